"""FERASEC feature extraction over radar frame sets.

The extractor turns an ``M x N`` frame set into six feature rows of
length ``K = floor(M*N / D)``:

1. DC-removed, downsampled RMS envelope of the concatenated raw frames.
2. The same pipeline applied to the clutter-reduced frame set.
3, 4. Regression-weighted local slopes (deltas) of rows 1 and 2.
5, 6. Deltas of rows 3 and 4 (second derivatives).

Length normalization and circular alignment are companion utilities for
visual comparison of features across repeated utterances; the
classifiers consume features at native length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clutter import DEFAULT_ALPHA, reduce_frameset
from .errors import DimensionError, DomainError, FormatError
from .frames import FrameSet, FrameSetKind, pearson_correlation

__all__ = [
    "FerasecConfig",
    "FeatureMatrix",
    "vectorize",
    "rms_envelope",
    "downsample",
    "remove_dc",
    "delta",
    "extract_features",
    "normalize_length",
    "circular_align",
    "store_features",
    "load_features",
]

FEATURE_ROW_COUNT = 6
FEATURES_MAGIC = b"FTM1"
_FEATURES_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class FerasecConfig:
    """Pipeline knobs: RMS window, downsampling factor, delta window."""

    window: int = 400
    downsample: int = 1024
    delta_window: int = 9

    def __post_init__(self) -> None:
        if self.window < 2 or self.window % 2 != 0:
            raise DomainError(f"window must be an even integer >= 2, got {self.window}")
        if self.downsample < 1:
            raise DomainError(f"downsample factor must be >= 1, got {self.downsample}")
        if self.delta_window < 3 or self.delta_window % 2 == 0:
            raise DomainError(f"delta window must be an odd integer >= 3, got {self.delta_window}")


@dataclass(frozen=True)
class FeatureMatrix:
    """Six feature rows of equal length K; rows 1 and 2 are zero-mean."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        if values.ndim != 2 or values.shape[0] != FEATURE_ROW_COUNT:
            raise DimensionError(f"feature matrix must have exactly {FEATURE_ROW_COUNT} rows")
        if values.shape[1] < 1:
            raise DomainError("feature matrix must have at least one column")
        if not np.all(np.isfinite(values)):
            raise DomainError("feature values must be finite")
        for row in (0, 1):
            bound = 1e-9 * max(np.abs(values[row]).max(), np.finfo(np.float64).tiny)
            if abs(values[row].mean()) > bound:
                raise DomainError(f"envelope row {row + 1} is not DC-free")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.values.shape[1])

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.asarray(self.values, dtype=dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )


def vectorize(fs: FrameSet) -> np.ndarray:
    """Concatenate the frames of ``fs`` top-to-bottom into one row vector.

    Element ``(m, n)`` of the matrix lands at position ``(m-1)*N + n``
    (1-based) of the result.
    """
    return fs.data.astype(np.float64).reshape(-1)


def rms_envelope(f: np.ndarray, window: int) -> np.ndarray:
    """Sliding-window RMS of ``f`` with step 1 and a fixed divisor.

    The window at 1-based position ``j`` spans samples
    ``max(1, j - W/2) .. min(len, j + W/2 - 1)``; the divisor is ``W``
    even for truncated edge windows, which damps the envelope toward the
    sequence ends.
    """
    if window < 2 or window % 2 != 0:
        raise DomainError(f"window must be an even integer >= 2, got {window}")
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise DimensionError("envelope input must be a non-empty 1-D vector")
    total = f.size
    half = window // 2
    # Window sums via a running sum of squares: O(n) regardless of the
    # window length.  The prefix accumulates in extended precision so the
    # difference of two prefixes stays accurate even where the local
    # window energy is tiny compared to the whole sequence (sqrt would
    # amplify any absolute error there).
    csum = np.zeros(total + 1, dtype=np.longdouble)
    np.cumsum(np.square(f, dtype=np.longdouble), out=csum[1:])
    lo = np.maximum(np.arange(total) - half, 0)  # 0-based inclusive
    hi = np.minimum(np.arange(total) + half - 1, total - 1)  # 0-based inclusive
    window_sums = (csum[hi + 1] - csum[lo]).astype(np.float64)
    return np.sqrt(np.maximum(window_sums, 0.0) / window)


def downsample(e: np.ndarray, factor: int) -> np.ndarray:
    """Strided selection ``v_k = e[factor * k]`` (1-based), k = 1..floor(len/factor).

    No anti-alias filtering: the RMS window already smooths the envelope.
    """
    if factor < 1:
        raise DomainError(f"downsample factor must be >= 1, got {factor}")
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 1:
        raise DimensionError("downsample input must be 1-D")
    if e.size < factor:
        raise DomainError(
            f"frame set too short: {e.size} envelope samples < downsample factor {factor}"
        )
    count = e.size // factor
    return e[factor - 1 : factor * count : factor].copy()


def remove_dc(v: np.ndarray) -> np.ndarray:
    """Subtract the mean so the sequence sums to zero."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("remove_dc input must be a non-empty 1-D vector")
    return v - v.mean()


def delta(z: np.ndarray, delta_window: int = 9) -> np.ndarray:
    """Regression-weighted local slope over a symmetric window.

    ``out_k = sum_l l * z[k+l] / sum_l l**2`` for ``l`` in
    ``-floor(L/2) .. floor(L/2)``; out-of-range samples count as zero.
    A second application yields the second derivative.
    """
    if delta_window < 3 or delta_window % 2 == 0:
        raise DomainError(f"delta window must be an odd integer >= 3, got {delta_window}")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise DimensionError("delta input must be a non-empty 1-D vector")
    half = delta_window // 2
    denom = 2.0 * sum(l * l for l in range(1, half + 1))
    padded = np.concatenate((np.zeros(half), z, np.zeros(half)))
    out = np.zeros_like(z)
    for l in range(-half, half + 1):
        if l == 0:
            continue
        out += l * padded[half + l : half + l + z.size]
    return out / denom


def extract_features(
    raw: FrameSet,
    cfg: FerasecConfig = FerasecConfig(),
    alpha: float = DEFAULT_ALPHA,
) -> FeatureMatrix:
    """Run the full six-row pipeline on a raw frame set."""
    if raw.kind is not FrameSetKind.RAW:
        raise DomainError("extract_features expects a raw frame set")
    if raw.m * raw.n < cfg.downsample:
        raise DomainError(
            f"frame set too short: {raw.m}x{raw.n} samples < downsample factor {cfg.downsample}"
        )

    def envelope_row(fs: FrameSet) -> np.ndarray:
        return remove_dc(downsample(rms_envelope(vectorize(fs), cfg.window), cfg.downsample))

    row1 = envelope_row(raw)
    row2 = envelope_row(reduce_frameset(raw, alpha))
    row3 = delta(row1, cfg.delta_window)
    row4 = delta(row2, cfg.delta_window)
    row5 = delta(row3, cfg.delta_window)
    row6 = delta(row4, cfg.delta_window)
    return FeatureMatrix(np.vstack((row1, row2, row3, row4, row5, row6)))


def normalize_length(seq: np.ndarray, target: int = 100) -> np.ndarray:
    """Resample a sequence to ``target`` points, preserving endpoints.

    Shorter sequences are linearly interpolated at uniformly spaced
    positions; longer ones are sampled at uniformly spaced rounded
    indices.  Used to compare features across utterances of different
    durations.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 1:
        raise DimensionError("normalize_length input must be 1-D")
    if seq.size < 2:
        raise DomainError(f"need at least 2 samples to resample, got {seq.size}")
    if target < 2:
        raise DomainError(f"target length must be >= 2, got {target}")
    k = seq.size
    if k == target:
        return seq.copy()
    positions = np.linspace(0.0, k - 1.0, target)
    if k < target:
        return np.interp(positions, np.arange(k), seq)
    idx = np.rint(positions).astype(np.intp)
    return seq[idx].copy()


def circular_align(seq: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, int]:
    """Circularly shift ``seq`` to maximize its correlation with ``reference``.

    Searches all T rotations exhaustively and returns
    ``(rolled sequence, shift)`` where ``rolled[t] == seq[(t + shift) % T]``.
    Ties break toward the smallest shift.
    """
    seq = np.asarray(seq, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if seq.ndim != 1 or ref.ndim != 1:
        raise DimensionError("circular_align inputs must be 1-D")
    if seq.size != ref.size:
        raise DimensionError(f"length mismatch: {seq.size} vs {ref.size}")
    best_shift = 0
    best_rho = -np.inf
    for shift in range(seq.size):
        rho = pearson_correlation(np.roll(seq, -shift), ref)
        if rho > best_rho:
            best_rho = rho
            best_shift = shift
    return np.roll(seq, -best_shift), best_shift


def store_features(matrix: FeatureMatrix | np.ndarray, path: str | Path) -> None:
    """Write a feature matrix: magic, row count, K, then row-major float32 values."""
    values = np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise DimensionError("feature matrix must be a non-empty 2-D array")
    header = _FEATURES_HEADER.pack(FEATURES_MAGIC, values.shape[0], values.shape[1])
    Path(path).write_bytes(header + np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_features(path: str | Path) -> np.ndarray:
    """Read a feature matrix written by :func:`store_features`."""
    blob = Path(path).read_bytes()
    if len(blob) < _FEATURES_HEADER.size:
        raise FormatError(f"file too short for header: {len(blob)} bytes", offset=len(blob))
    magic, rows, length = _FEATURES_HEADER.unpack_from(blob, 0)
    if magic != FEATURES_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FEATURES_MAGIC!r}", offset=0)
    if rows == 0 or length == 0:
        raise FormatError("feature matrix dimensions must be positive", offset=4)
    expected = rows * length * 4
    actual = len(blob) - _FEATURES_HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload holds {actual} bytes but dimensions {rows}x{length} require {expected}",
            offset=_FEATURES_HEADER.size + min(actual, expected),
        )
    data = np.frombuffer(blob, dtype="<f4", count=rows * length, offset=_FEATURES_HEADER.size)
    return data.reshape(rows, length).astype(np.float64)
