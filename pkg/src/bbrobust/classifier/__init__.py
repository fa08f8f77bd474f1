from .cache import CachedBackend, ResponseCache, cache_get, cache_key, cache_put
from .reference import (
    ReferenceBackend,
    RefModel,
    color_histogram,
    predict_reference,
    train_reference,
)
from .remote import RemoteBackend, remote_classify
from .types import (
    Classification,
    ClassifierError,
    Label,
    LabelMatcher,
    NetworkError,
    ProtocolError,
    Unavailable,
    match,
)


def classify(backend, img) -> Classification:
    return backend.classify(img)


def open_backend(spec: str, cache_dir=None, **remote_kwargs):
    """Backend from ``ref:<model.json>`` or an ``http(s)://`` endpoint, optionally cached."""
    if spec.startswith("ref:"):
        backend = ReferenceBackend(RefModel.load(spec[4:]))
    elif spec.startswith(("http://", "https://")):
        backend = RemoteBackend(spec, **remote_kwargs)
    else:
        raise ValueError(f"backend must be 'ref:<path>' or an http(s) URL, got {spec!r}")
    if cache_dir is not None:
        backend = CachedBackend(backend, ResponseCache(cache_dir))
    return backend
