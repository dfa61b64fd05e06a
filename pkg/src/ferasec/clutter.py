"""Loopback-filter clutter estimation and clutter reduction.

Clutter (echo energy from static or slowly moving scene elements) is
tracked per fast-time bin by a single-pole recursive filter and
subtracted from each incoming frame:

    c_m[n] = alpha * c_{m-1}[n] + (1 - alpha) * r_m[n]
    y_m[n] = r_m[n] - c_m[n]

``alpha`` close to 1 makes the estimate slow-moving, so articulator
motion survives in ``y`` while the static background cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .frames import Frame, FrameSet, FrameSetKind

__all__ = ["DEFAULT_ALPHA", "ClutterState", "clutter_update", "reduce_frameset"]

DEFAULT_ALPHA = 0.95


@dataclass(frozen=True)
class ClutterState:
    """Running clutter estimate for one radar stream."""

    c: np.ndarray
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.float64).copy()
        if c.ndim != 1 or c.size == 0:
            raise DimensionError("clutter estimate must be a non-empty 1-D vector")
        if not np.all(np.isfinite(c)):
            raise DomainError("clutter estimate must be finite")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return int(self.c.size)


def clutter_update(state: ClutterState, frame: Frame) -> tuple[ClutterState, Frame]:
    """Advance the clutter estimate by one frame and return the reduced frame.

    The update is evaluated as ``c + (1 - alpha) * (r - c)``, algebraically
    identical to ``alpha*c + (1-alpha)*r`` but exactly fixed-point
    preserving in floating point: a converged estimate yields an exactly
    zero reduced frame.
    """
    if frame.n != state.n:
        raise DimensionError(f"frame length {frame.n} does not match clutter length {state.n}")
    r = frame.amplitudes
    c_new = state.c + (1.0 - state.alpha) * (r - state.c)
    reduced = r - c_new
    return ClutterState(c_new, state.alpha), Frame(reduced)


def reduce_frameset(
    raw: FrameSet,
    alpha: float = DEFAULT_ALPHA,
    *,
    init: str = "first_frame",
) -> FrameSet:
    """Run the loopback filter over a raw frame set, row by slow-time row.

    ``init`` selects the unobservable pre-first-frame clutter estimate:
    ``"first_frame"`` (default) seeds it with the first raw frame, which
    makes the first reduced row exactly zero and keeps the whole map
    linear in the input; ``"zero"`` starts from an empty scene estimate
    and admits a startup transient proportional to the static background.
    """
    if raw.kind is not FrameSetKind.RAW:
        raise DomainError("reduce_frameset expects a raw frame set")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if init not in ("first_frame", "zero"):
        raise DomainError(f"init must be 'first_frame' or 'zero', got {init!r}")

    data = raw.data.astype(np.float64)
    c = data[0].copy() if init == "first_frame" else np.zeros(raw.n, dtype=np.float64)
    reduced = np.empty_like(data)
    one_minus = 1.0 - alpha
    for m in range(raw.m):
        c = c + one_minus * (data[m] - c)
        reduced[m] = data[m] - c
    return FrameSet(
        reduced,
        frame_rate_hz=raw.frame_rate_hz,
        range_m=raw.range_m,
        kind=FrameSetKind.CLUTTER_REDUCED,
        label=raw.label,
    )
