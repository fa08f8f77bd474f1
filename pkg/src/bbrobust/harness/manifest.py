"""Dataset manifests: CSV with header ``path,class,synonyms`` (synonyms ``|``-separated)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..classifier.types import LabelMatcher
from ..imgcore import load_image


class ManifestError(ValueError):
    pass


class ParseError(ManifestError):
    pass


class MissingFile(ManifestError):
    pass


class DuplicateEntry(ManifestError):
    pass


@dataclass(frozen=True)
class Entry:
    path: str  # as written in the manifest; doubles as the image id
    class_name: str
    root: Path

    @property
    def image_id(self) -> str:
        return self.path

    def resolve(self) -> Path:
        p = Path(self.path)
        return p if p.is_absolute() else self.root / p

    def load(self):
        return load_image(self.resolve())


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[Entry, ...]
    matchers: dict  # class name -> LabelMatcher
    dataset_id: str

    @property
    def classes(self) -> list[str]:
        return list(self.matchers)

    def __len__(self):
        return len(self.entries)


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    root = path.parent
    entries = []
    synonyms: dict[str, list[str]] = {}
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"path", "class"} <= set(reader.fieldnames):
            raise ParseError(f"{path}: header must contain 'path,class[,synonyms]'")
        for lineno, row in enumerate(reader, start=2):
            rel = (row.get("path") or "").strip()
            cls = (row.get("class") or "").strip()
            if not rel or not cls:
                raise ParseError(f"{path}:{lineno}: empty path or class")
            if rel in seen:
                raise DuplicateEntry(f"{path}:{lineno}: duplicate path {rel!r}")
            seen.add(rel)
            entry = Entry(rel, cls, root)
            if check_files and not entry.resolve().is_file():
                raise MissingFile(f"{path}:{lineno}: image {rel!r} not found")
            entries.append(entry)
            syn = synonyms.setdefault(cls, [])
            for s in (row.get("synonyms") or "").split("|"):
                s = s.strip()
                if s and s not in syn:
                    syn.append(s)
    if not entries:
        raise ParseError(f"{path}: manifest has no entries")
    matchers = {c: LabelMatcher(c, tuple(s)) for c, s in synonyms.items()}
    return DatasetManifest(tuple(entries), matchers, path.stem)


def write_manifest(path, rows) -> None:
    """Write ``(path, class, synonyms)`` rows; synonyms may be a list or a string."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "class", "synonyms"])
        for p, c, syn in rows:
            w.writerow([p, c, syn if isinstance(syn, str) else "|".join(syn)])
