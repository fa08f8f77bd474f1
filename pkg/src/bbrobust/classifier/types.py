"""Classification results and label matching shared by all backends."""

from __future__ import annotations

from dataclasses import dataclass, field


class ClassifierError(Exception):
    pass


class NetworkError(ClassifierError):
    pass


class ProtocolError(ClassifierError):
    pass


class Unavailable(NetworkError):
    """Retry budget exhausted."""


@dataclass(frozen=True)
class Label:
    name: str
    confidence: float

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ProtocolError("label name must be a non-empty string")
        if not 0.0 <= self.confidence <= 1.0:
            raise ProtocolError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class Classification:
    labels: tuple[Label, ...]
    backend_id: str
    latency_ms: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.labels:
            raise ProtocolError("classification has no labels")
        # stable sort keeps backend order among equal confidences
        ordered = tuple(sorted(self.labels, key=lambda lab: -lab.confidence))
        object.__setattr__(self, "labels", ordered)

    def top1(self) -> Label:
        return self.labels[0]

    def to_dict(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "labels": [{"name": lab.name, "confidence": lab.confidence} for lab in self.labels],
        }

    @classmethod
    def from_dict(cls, d: dict, backend_id: str | None = None, latency_ms: float = 0.0):
        try:
            labels = tuple(Label(str(x["name"]), float(x["confidence"])) for x in d["labels"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed labels: {exc}") from exc
        return cls(labels, backend_id or d.get("backend_id", "unknown"), latency_ms)


@dataclass(frozen=True)
class LabelMatcher:
    """Decides whether a free-text top-1 label names ``class_name``."""

    class_name: str
    synonyms: tuple[str, ...] = field(default_factory=tuple)

    def terms(self) -> tuple[str, ...]:
        seen = [self.class_name.lower()]
        for s in self.synonyms:
            s = s.strip().lower()
            if s and s not in seen:
                seen.append(s)
        return tuple(seen)

    def matches_name(self, name: str) -> bool:
        name = name.lower().strip()
        for term in self.terms():
            if term in name:
                return True
            # the label may be a single word contained in a longer synonym
            if " " not in name and name and name in term.split():
                return True
        return False


def match(matcher: LabelMatcher, cls: Classification) -> bool:
    """True iff the top-1 label matches the matcher's class."""
    return matcher.matches_name(cls.top1().name)
