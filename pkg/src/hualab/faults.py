"""Deliberate fault injection, used to check that the verification suites
actually detect broken maps."""
from __future__ import annotations

import contextlib

KNOWN_FAULTS = ("upsilon-sign",)
_active: set[str] = set()


def active(name: str) -> bool:
    return name in _active


@contextlib.contextmanager
def inject(*names: str):
    unknown = set(names) - set(KNOWN_FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s): {sorted(unknown)}")
    added = set(names) - _active
    _active.update(added)
    try:
        yield
    finally:
        _active.difference_update(added)
