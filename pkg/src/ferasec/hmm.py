"""Hybrid MLP-HMM sequence classifier.

Each class gets a left-to-right hidden Markov chain (self-loop and
advance-by-one only, no skips); a single shared multilayer perceptron
emits posteriors over every (class, state) pair from a context-spliced
feature column.  Decoding uses scaled likelihoods: the emission score of
state ``s`` at time ``k`` is ``log p(s | x_k) - log prior(s)``.

Training alternates mini-batch gradient descent on the frame-level
cross-entropy with Viterbi realignment, starting from a uniform
flat-start segmentation.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    FormatError,
    NumericError,
    TrainingError,
)

__all__ = [
    "MlpSpec",
    "HmmTrainingConfig",
    "TrainedHmmModel",
    "splice_context",
    "flat_start_align",
    "mlp_init",
    "mlp_forward",
    "mlp_log_posteriors",
    "mlp_backprop",
    "train",
    "viterbi_decode",
    "classify",
    "store_model",
    "load_model",
]

MODEL_MAGIC = b"HMM1"
MODEL_VERSION = 1

MlpParams = tuple[tuple[np.ndarray, np.ndarray], ...]


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes of the posterior network: rectifier hiddens, softmax output."""

    input_dim: int
    hidden: tuple[int, ...] = (256, 256, 256)
    output_dim: int = 40

    def __post_init__(self) -> None:
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(d < 1 for d in dims):
            raise DomainError(f"all layer sizes must be positive, got {dims}")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)


@dataclass(frozen=True)
class HmmTrainingConfig:
    """Training recipe; every knob is overridable, defaults are desk-scale."""

    states_per_class: int = 5
    context_window: int = 7
    hidden: tuple[int, ...] = (256, 256, 256)
    realignment_rounds: int = 3
    epochs_per_round: int = 12
    batch_size: int = 128
    learning_rate: float = 0.02
    prior_floor: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.states_per_class < 1:
            raise DomainError("states_per_class must be >= 1")
        if self.context_window < 1 or self.context_window % 2 == 0:
            raise DomainError("context_window must be a positive odd integer")
        if self.realignment_rounds < 1 or self.epochs_per_round < 1:
            raise DomainError("rounds and epochs must be >= 1")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise DomainError("learning_rate must be positive")
        if not 0.0 < self.prior_floor < 1.0:
            raise DomainError("prior_floor must lie in (0, 1)")
        object.__setattr__(self, "hidden", tuple(self.hidden))


@dataclass(frozen=True)
class TrainedHmmModel:
    """Per-class transition chains plus the shared posterior network."""

    labels: tuple[str, ...]
    transitions: np.ndarray  # (B, S, S)
    priors: np.ndarray  # (B*S,)
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    config: HmmTrainingConfig
    # Mean cross-entropy per epoch, all rounds concatenated.  Diagnostic
    # only: empty on models loaded from disk.
    loss_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not labels:
            raise DomainError("model must cover at least one class")
        s = self.config.states_per_class
        b = len(labels)
        trans = np.asarray(self.transitions, dtype=np.float64).copy()
        priors = np.asarray(self.priors, dtype=np.float64).copy()
        if trans.shape != (b, s, s):
            raise DimensionError(f"transitions must have shape {(b, s, s)}, got {trans.shape}")
        if priors.shape != (b * s,):
            raise DimensionError(f"priors must have shape ({b * s},), got {priors.shape}")
        for c in range(b):
            _check_left_to_right(trans[c])
        if not np.all(priors > 0.0):
            raise DomainError("every state prior must be positive")
        if abs(priors.sum() - 1.0) > 1e-9:
            raise DomainError("state priors must sum to 1")
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(v, dtype=np.float64) for v in self.biases)
        if len(weights) != len(biases) or not weights:
            raise DimensionError("weights and biases must be non-empty and aligned")
        if weights[-1].shape[1] != b * s:
            raise DimensionError("output layer width must equal class_count * states_per_class")
        for w, v in zip(weights, biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
                raise NumericError("model parameters must be finite")
        trans.setflags(write=False)
        priors.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def class_count(self) -> int:
        return len(self.labels)

    @property
    def states_per_class(self) -> int:
        return self.config.states_per_class

    @property
    def params(self) -> MlpParams:
        return tuple(zip(self.weights, self.biases))


def _check_left_to_right(matrix: np.ndarray) -> None:
    s = matrix.shape[0]
    if matrix.shape != (s, s):
        raise DimensionError("transition matrix must be square")
    allowed = np.eye(s, dtype=bool) | np.eye(s, k=1, dtype=bool)
    if np.any(matrix[~allowed] != 0.0):
        raise DomainError("transitions outside the self-loop/advance structure must be exactly 0")
    if np.any(matrix < 0.0):
        raise DomainError("transition probabilities must be non-negative")
    if np.max(np.abs(matrix.sum(axis=1) - 1.0)) > 1e-9:
        raise DomainError("each transition row must sum to 1")


def splice_context(features, window: int = 7) -> np.ndarray:
    """Stack each column with its neighbors: output row ``k`` concatenates
    columns ``k - w//2 .. k + w//2``, replicating the edge columns where
    the window leaves the sequence."""
    if window < 1 or window % 2 == 0:
        raise DomainError("context window must be a positive odd integer")
    values = np.asarray(features, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] < 1:
        raise DimensionError("features must be a non-empty 2-D array (dims x time)")
    k = values.shape[1]
    half = window // 2
    offsets = np.arange(-half, half + 1)
    idx = np.clip(np.arange(k)[:, None] + offsets[None, :], 0, k - 1)
    # (dims, K, window) -> (K, window, dims) -> (K, window*dims)
    return values[:, idx].transpose(1, 2, 0).reshape(k, window * values.shape[0])


def flat_start_align(length: int, states: int = 5) -> np.ndarray:
    """Uniform initial segmentation: 0-based state ``ceil((k+1)*S/K) - 1``
    at 0-based index ``k``.  Non-decreasing and occupies every state."""
    if states < 1:
        raise DomainError("state count must be >= 1")
    if length < states:
        raise DomainError(f"sequence shorter than state count: {length} < {states}")
    k = np.arange(1, length + 1)
    return ((k * states + length - 1) // length - 1).astype(np.intp)


def mlp_init(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out)); zero biases."""
    params = []
    dims = spec.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append((w, np.zeros(fan_out)))
    return tuple(params)


def _forward_hiddens(params: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    """Activations after each layer; rectifier on hiddens, raw logits last."""
    acts = [x]
    for i, (w, b) in enumerate(params):
        z = acts[-1] @ w + b
        acts.append(z if i == len(params) - 1 else np.maximum(z, 0.0))
    return acts


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def mlp_log_posteriors(params: MlpParams, inputs) -> np.ndarray:
    """Log state posteriors for a batch of spliced inputs, shape (n, out)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise NumericError("network input must be finite")
    if x.shape[1] != params[0][0].shape[0]:
        raise DimensionError(
            f"input width {x.shape[1]} does not match first layer fan-in {params[0][0].shape[0]}"
        )
    return _log_softmax(_forward_hiddens(params, x)[-1])


def mlp_forward(params: MlpParams, inputs) -> np.ndarray:
    """State posteriors (softmax outputs) for a batch of spliced inputs."""
    return np.exp(mlp_log_posteriors(params, inputs))


def mlp_backprop(
    params: MlpParams, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy loss and its gradients for a batch of int targets."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    t = np.asarray(targets, dtype=np.intp).reshape(-1)
    if t.size != x.shape[0]:
        raise DimensionError(f"batch size mismatch: {x.shape[0]} inputs vs {t.size} targets")
    acts = _forward_hiddens(params, x)
    logp = _log_softmax(acts[-1])
    n = x.shape[0]
    loss = -float(logp[np.arange(n), t].mean())

    dlogits = np.exp(logp)
    dlogits[np.arange(n), t] -= 1.0
    dlogits /= n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)  # type: ignore[list-item]
    delta_up = dlogits
    for i in range(len(params) - 1, -1, -1):
        grads[i] = (acts[i].T @ delta_up, delta_up.sum(axis=0))
        if i > 0:
            delta_up = (delta_up @ params[i][0].T) * (acts[i] > 0.0)
    return loss, grads


def _estimate_transitions(
    alignments: Sequence[np.ndarray], class_indices: Sequence[int], b: int, s: int
) -> np.ndarray:
    """Row-stochastic left-to-right matrices from alignment run lengths.

    Add-one smoothing on the two allowed transitions keeps every allowed
    probability positive even when a state never self-loops in the data.
    """
    stay = np.zeros((b, s))
    advance = np.zeros((b, s))
    for align, c in zip(alignments, class_indices):
        moved = align[1:] != align[:-1]
        for state, did_move in zip(align[:-1], moved):
            if did_move:
                advance[c, state] += 1
            else:
                stay[c, state] += 1
    trans = np.zeros((b, s, s))
    for c in range(b):
        for state in range(s - 1):
            total = stay[c, state] + advance[c, state] + 2.0
            trans[c, state, state] = (stay[c, state] + 1.0) / total
            trans[c, state, state + 1] = (advance[c, state] + 1.0) / total
        trans[c, s - 1, s - 1] = 1.0
    return trans


def _estimate_priors(
    alignments: Sequence[np.ndarray], class_indices: Sequence[int], b: int, s: int, floor: float
) -> np.ndarray:
    counts = np.zeros(b * s)
    for align, c in zip(alignments, class_indices):
        counts[c * s : (c + 1) * s] += np.bincount(align, minlength=s)
    priors = counts / counts.sum()
    priors = np.maximum(priors, floor)
    return priors / priors.sum()


def _viterbi_core(emissions: np.ndarray, log_trans: np.ndarray) -> tuple[float, np.ndarray]:
    """Best-path score and path over a left-to-right lattice.

    ``emissions`` is (K, S); the path is forced to start in state 0 and
    end in state S-1.  Requires K >= S.
    """
    k, s = emissions.shape
    delta = np.full(s, -np.inf)
    delta[0] = emissions[0, 0]
    back = np.zeros((k, s), dtype=np.intp)
    stay_logp = np.diag(log_trans)
    adv_logp = np.diag(log_trans, k=1)
    for t in range(1, k):
        stay = delta + stay_logp
        adv = np.full(s, -np.inf)
        adv[1:] = delta[:-1] + adv_logp
        take_stay = stay >= adv
        delta = np.where(take_stay, stay, adv) + emissions[t]
        back[t] = np.where(take_stay, np.arange(s), np.arange(s) - 1)
    path = np.empty(k, dtype=np.intp)
    path[-1] = s - 1
    for t in range(k - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return float(delta[s - 1]), path


def _scaled_log_likelihoods(
    logpost: np.ndarray, priors: np.ndarray, class_index: int, states: int
) -> np.ndarray:
    """Emission scores for one class block: log posterior minus log prior."""
    block = slice(class_index * states, (class_index + 1) * states)
    return logpost[:, block] - np.log(priors[block])


def train(corpus: Sequence[tuple[object, str]], cfg: HmmTrainingConfig = HmmTrainingConfig()) -> TrainedHmmModel:
    """Fit the shared network and per-class chains on labeled feature matrices.

    ``corpus`` holds ``(feature matrix, label)`` pairs; matrices are
    ``(dims, K)`` with a shared ``dims`` and ``K >= states_per_class``.
    Flat-start alignments bootstrap the first round; each round trains the
    network on the current alignments, re-estimates transitions and
    priors from them, then realigns every sequence for the next round.
    """
    if not corpus:
        raise TrainingError("training corpus is empty")
    matrices = [np.asarray(m, dtype=np.float64) for m, _ in corpus]
    labels_per_item = [label for _, label in corpus]
    dims = {m.shape[0] for m in matrices}
    if any(m.ndim != 2 for m in matrices) or len(dims) != 1:
        raise DimensionError("all feature matrices must be 2-D with one shared row count")
    feature_dim = dims.pop()
    s = cfg.states_per_class
    for m, label in zip(matrices, labels_per_item):
        if m.shape[1] < s:
            raise TrainingError(
                f"sequence for class {label!r} is shorter than the state count "
                f"({m.shape[1]} < {s})"
            )
    labels = tuple(sorted(set(labels_per_item)))
    counts = {label: labels_per_item.count(label) for label in labels}
    thin = [label for label, c in counts.items() if c < 2]
    if thin:
        raise TrainingError(f"every class needs >= 2 examples; too few for {thin}")
    b = len(labels)
    class_indices = [labels.index(label) for label in labels_per_item]

    spliced = [splice_context(m, cfg.context_window) for m in matrices]
    x_all = np.vstack(spliced)
    mean = x_all.mean(axis=0)
    std = x_all.std(axis=0)
    std[std < 1e-8] = 1.0
    x_all = (x_all - mean) / std
    seq_slices = []
    start = 0
    for sp in spliced:
        seq_slices.append(slice(start, start + sp.shape[0]))
        start += sp.shape[0]

    rng = np.random.default_rng(cfg.seed)
    spec = MlpSpec(feature_dim * cfg.context_window, cfg.hidden, b * s)
    params = mlp_init(spec, rng)
    alignments = [flat_start_align(m.shape[1], s) for m in matrices]
    transitions = np.zeros((b, s, s))
    priors = np.full(b * s, 1.0 / (b * s))

    n_total = x_all.shape[0]
    loss_history: list[float] = []
    for rnd in range(cfg.realignment_rounds):
        targets = np.empty(n_total, dtype=np.intp)
        for align, c, sl in zip(alignments, class_indices, seq_slices):
            targets[sl] = c * s + align

        lr = cfg.learning_rate
        best_loss = np.inf
        for epoch in range(cfg.epochs_per_round):
            perm = rng.permutation(n_total)
            epoch_loss = 0.0
            for lo in range(0, n_total, cfg.batch_size):
                batch = perm[lo : lo + cfg.batch_size]
                loss, grads = mlp_backprop(params, x_all[batch], targets[batch])
                if not np.isfinite(loss):
                    raise NumericError(
                        f"non-finite training loss (round {rnd + 1}, epoch {epoch + 1})"
                    )
                params = tuple(
                    (w - lr * gw, v - lr * gb)
                    for (w, v), (gw, gb) in zip(params, grads)
                )
                epoch_loss += loss * batch.size
            epoch_loss /= n_total
            loss_history.append(epoch_loss)
            if epoch_loss >= best_loss:
                lr *= 0.5
            else:
                best_loss = epoch_loss

        transitions = _estimate_transitions(alignments, class_indices, b, s)
        priors = _estimate_priors(alignments, class_indices, b, s, cfg.prior_floor)

        if rnd < cfg.realignment_rounds - 1:
            with np.errstate(divide="ignore"):
                log_trans = np.log(transitions)
            new_alignments = []
            for c, sl in zip(class_indices, seq_slices):
                logpost = mlp_log_posteriors(params, x_all[sl])
                emis = _scaled_log_likelihoods(logpost, priors, c, s)
                _, path = _viterbi_core(emis, log_trans[c])
                new_alignments.append(path)
            alignments = new_alignments

    # Fold input standardization into the first layer so the stored model
    # consumes raw spliced features.
    w0, b0 = params[0]
    folded = ((w0 / std[:, None], b0 - (mean / std) @ w0),) + params[1:]
    return TrainedHmmModel(
        labels=labels,
        transitions=transitions,
        priors=priors,
        weights=tuple(w for w, _ in folded),
        biases=tuple(v for _, v in folded),
        config=cfg,
        loss_history=tuple(loss_history),
    )


def viterbi_decode(model: TrainedHmmModel, label: str, features) -> tuple[float, np.ndarray]:
    """Best-path log-likelihood of ``features`` under one class's chain.

    The path starts in state 0, ends in the last state, and is
    non-decreasing with steps of 0 or +1 (0-based state indices).
    """
    if label not in model.labels:
        raise DomainError(f"unknown class label {label!r}")
    values = np.asarray(features, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError("features must be a 2-D array (dims x time)")
    s = model.states_per_class
    if values.shape[1] < s:
        raise DomainError(
            f"sequence of length {values.shape[1]} cannot traverse {s} states without skips"
        )
    c = model.labels.index(label)
    spliced = splice_context(values, model.config.context_window)
    logpost = mlp_log_posteriors(model.params, spliced)
    emissions = _scaled_log_likelihoods(logpost, model.priors, c, s)
    with np.errstate(divide="ignore"):
        log_trans = np.log(model.transitions[c])
    return _viterbi_core(emissions, log_trans)


def classify(model: TrainedHmmModel, features) -> tuple[str, np.ndarray]:
    """Label of the chain with the highest best-path log-likelihood.

    Returns the winning label plus the per-class log-likelihood vector
    (aligned with ``model.labels``); ties break toward the earlier class.
    """
    values = np.asarray(features, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError("features must be a 2-D array (dims x time)")
    s = model.states_per_class
    if values.shape[1] < s:
        raise DomainError(
            f"sequence of length {values.shape[1]} cannot traverse {s} states without skips"
        )
    spliced = splice_context(values, model.config.context_window)
    logpost = mlp_log_posteriors(model.params, spliced)
    with np.errstate(divide="ignore"):
        log_trans = np.log(model.transitions)
    scores = np.empty(model.class_count)
    for c in range(model.class_count):
        emis = _scaled_log_likelihoods(logpost, model.priors, c, s)
        scores[c], _ = _viterbi_core(emis, log_trans[c])
    winner = int(np.argmax(scores))
    return model.labels[winner], scores


def store_model(model: TrainedHmmModel, path: str | Path) -> None:
    """Serialize a trained model; numeric payloads are little-endian float32."""
    cfg = model.config
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack(
        "<IIIII",
        MODEL_VERSION,
        model.class_count,
        cfg.states_per_class,
        cfg.context_window,
        len(model.weights),
    )
    out += struct.pack(
        "<QIIIf",
        cfg.seed,
        cfg.realignment_rounds,
        cfg.epochs_per_round,
        cfg.batch_size,
        np.float32(cfg.learning_rate),
    )
    for label in model.labels:
        raw = label.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
    out += np.ascontiguousarray(model.transitions, dtype="<f4").tobytes()
    out += np.ascontiguousarray(model.priors, dtype="<f4").tobytes()
    for w, v in zip(model.weights, model.biases):
        out += struct.pack("<II", w.shape[0], w.shape[1])
        out += np.ascontiguousarray(w, dtype="<f4").tobytes()
        out += np.ascontiguousarray(v, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_model(path: str | Path) -> TrainedHmmModel:
    """Read a model written by :func:`store_model`.

    Transition rows and priors are renormalized after the float32
    round-trip so the stochastic invariants hold exactly again.
    """
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    pos = 0

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise FormatError("model file truncated", offset=pos)
        vals = struct.unpack_from(fmt, view, pos)
        pos += size
        return vals

    def take_floats(count: int) -> np.ndarray:
        nonlocal pos
        size = count * 4
        if pos + size > len(blob):
            raise FormatError("model file truncated", offset=pos)
        arr = np.frombuffer(view, dtype="<f4", count=count, offset=pos).astype(np.float64)
        pos += size
        return arr

    (magic,) = take("<4s")
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}", offset=0)
    version, b, s, window, layer_count = take("<IIIII")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", offset=4)
    seed, rounds, epochs, batch, lr = take("<QIIIf")
    labels = []
    for _ in range(b):
        (length,) = take("<I")
        if pos + length > len(blob):
            raise FormatError("model file truncated in label table", offset=pos)
        labels.append(bytes(view[pos : pos + length]).decode("utf-8"))
        pos += length
    transitions = take_floats(b * s * s).reshape(b, s, s)
    transitions /= transitions.sum(axis=2, keepdims=True)
    priors = take_floats(b * s)
    priors /= priors.sum()
    weights, biases = [], []
    hidden = []
    for i in range(layer_count):
        fan_in, fan_out = take("<II")
        weights.append(take_floats(fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(take_floats(fan_out))
        if i < layer_count - 1:
            hidden.append(fan_out)
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes after model payload", offset=pos)
    cfg = HmmTrainingConfig(
        states_per_class=s,
        context_window=window,
        hidden=tuple(hidden),
        realignment_rounds=rounds,
        epochs_per_round=epochs,
        batch_size=batch,
        learning_rate=float(lr),
        seed=seed,
    )
    return TrainedHmmModel(
        labels=tuple(labels),
        transitions=transitions,
        priors=priors,
        weights=tuple(weights),
        biases=tuple(biases),
        config=cfg,
    )
