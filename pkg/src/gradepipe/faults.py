"""Crash-injection points for durability testing.

Processors call :func:`fire` at the moments where an abrupt process death
would be most damaging. In production every call is a no-op; tests arm a
named point to make it raise once, then re-run the processor to verify
that nothing was lost or duplicated.
"""

from __future__ import annotations

_armed: set[str] = set()


class InjectedCrash(RuntimeError):
    """Raised at an armed fault point; simulates abrupt process death."""


def arm(point: str) -> None:
    _armed.add(point)


def disarm_all() -> None:
    _armed.clear()


def fire(point: str) -> None:
    # One-shot: firing disarms, so the re-run after the "crash" proceeds.
    if point in _armed:
        _armed.discard(point)
        raise InjectedCrash(point)
