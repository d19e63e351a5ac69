"""Selects the solver core: compiled extension if available, NumPy otherwise.

Set ``PLATOON_OFFLOAD_BACKEND=py`` (or ``c``) to force a backend; forcing the
extension when it failed to build raises at import time rather than silently
running slow.
"""

import os

from . import _pycore

try:
    from . import _ccore
except ImportError:
    _ccore = None

_BACKENDS = {"py": _pycore, "python": _pycore}
if _ccore is not None:
    _BACKENDS["c"] = _ccore
    _BACKENDS["compiled"] = _ccore


def get_backend(name: str | None = None):
    """Resolve a backend module by name, env var, or availability."""
    if name is None:
        name = os.environ.get("PLATOON_OFFLOAD_BACKEND")
    if name is None:
        return _ccore if _ccore is not None else _pycore
    try:
        return _BACKENDS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}: choose from {sorted(set(_BACKENDS))}"
        ) from None


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _ccore is not None else [])


ACTIVE = get_backend()


def active_name() -> str:
    return ACTIVE.name
