"""Two-hidden-state Markov detection of ground-level episodes.

Hidden state 0 is "outside the rotational ground level" (dark only at the
noise floor), hidden state 1 is "in the ground level" (dark at the
detection fidelity).  Default transition rates derive from the thermal
entry balance and the per-cycle leave probability; defaults for the
emission rows are the noise floor 0.03 and the fidelity 0.72.

Decoding offers scaled forward-backward smoothing (per-record posteriors
plus sequence log-likelihood) and a log-space Viterbi path; ties always
resolve toward the non-signal state so detection stays conservative.
Training is supervised maximum-likelihood counting with add-one smoothing
on labeled simulator output, with Baum-Welch refinement available for
unlabeled streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataio import write_table

__all__ = [
    "STATE_NAMES",
    "EstimationError",
    "HmmParams",
    "DecodedSeries",
    "DetectionMetrics",
    "default_params",
    "forward_backward",
    "viterbi",
    "estimate_params_supervised",
    "baum_welch",
    "bayes_posterior",
    "evaluate",
    "write_decoded_csv",
]

STATE_NAMES = ("J!=3/2", "J=3/2")


class EstimationError(RuntimeError):
    """Parameter estimation failed (e.g. a hidden state never observed)."""


def _check_stochastic(name: str, matrix: np.ndarray, rows: int, cols: int) -> None:
    if matrix.shape != (rows, cols):
        raise ValueError(f"{name} must have shape {(rows, cols)}, got {matrix.shape}")
    if matrix.min() < 0.0:
        raise ValueError(f"{name} entries must be >= 0")
    residual = np.abs(matrix.sum(axis=1) - 1.0).max()
    if residual > 1e-12:
        raise ValueError(f"{name} rows must sum to 1 within 1e-12 (off by {residual:.3e})")


@dataclass(frozen=True)
class HmmParams:
    """Row-stochastic transition, emission and initial probabilities.

    ``trans[i, j]`` moves hidden state i -> j per cycle; ``emit[i, o]``
    emits observation o (0 bright, 1 dark) from state i; ``initial[i]`` is
    the state distribution before the first record.
    """

    trans: np.ndarray
    emit: np.ndarray
    initial: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "trans", np.asarray(self.trans, dtype=float))
        object.__setattr__(self, "emit", np.asarray(self.emit, dtype=float))
        object.__setattr__(self, "initial", np.asarray(self.initial, dtype=float))
        _check_stochastic("trans", self.trans, 2, 2)
        _check_stochastic("emit", self.emit, 2, 2)
        if self.initial.shape != (2,):
            raise ValueError(f"initial must have shape (2,), got {self.initial.shape}")
        if self.initial.min() < 0.0 or abs(self.initial.sum() - 1.0) > 1e-12:
            raise ValueError("initial must be a probability vector within 1e-12")

    def to_mapping(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for i in range(2):
            for j in range(2):
                out[f"trans_{i}{j}"] = float(self.trans[i, j])
        for i in range(2):
            for o in range(2):
                out[f"emit_{i}{o}"] = float(self.emit[i, o])
        out["initial_0"] = float(self.initial[0])
        out["initial_1"] = float(self.initial[1])
        return out

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "HmmParams":
        """Parse the flat key set, renormalizing away file rounding.

        Serialized parameters carry 10 significant digits, so row sums can
        be off by ~1e-10; anything worse than 1e-6 is treated as a broken
        file rather than rounding.
        """

        def grab(key: str) -> float:
            if key not in mapping:
                raise ValueError(f"missing HMM parameter key {key!r}")
            return float(mapping[key])

        def renormalized(name: str, rows: np.ndarray) -> np.ndarray:
            sums = rows.sum(axis=-1, keepdims=True)
            if np.abs(sums - 1.0).max() > 1e-6:
                raise ValueError(f"{name} rows must sum to 1 within 1e-6")
            return rows / sums

        trans = np.array([[grab(f"trans_{i}{j}") for j in range(2)] for i in range(2)])
        emit = np.array([[grab(f"emit_{i}{o}") for o in range(2)] for i in range(2)])
        initial = np.array([grab("initial_0"), grab("initial_1")])
        return cls(
            trans=renormalized("trans", trans),
            emit=renormalized("emit", emit),
            initial=renormalized("initial", initial),
        )


def default_params(
    p_b: float = 0.03, p_d: float = 0.72, p_s: float = 0.015, p_g: float = 0.0047
) -> HmmParams:
    """Dynamics-derived defaults.

    The entry rate into the ground level balances the thermal occupancy in
    steady state: epsilon = p_g p_s / (1 - p_g); the exit rate is p_s
    itself.  Emission rows are the noise floor and the detection fidelity,
    and the initial vector is the thermal occupancy.
    """
    for name, value in (("p_b", p_b), ("p_d", p_d), ("p_s", p_s)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    if not 0.0 <= p_g < 1.0:
        raise ValueError(f"p_g must lie in [0, 1), got {p_g!r}")
    entry = p_g * p_s / (1.0 - p_g)
    return HmmParams(
        trans=np.array([[1.0 - entry, entry], [p_s, 1.0 - p_s]]),
        emit=np.array([[1.0 - p_b, p_b], [1.0 - p_d, p_d]]),
        initial=np.array([1.0 - p_g, p_g]),
    )


@dataclass(frozen=True)
class DecodedSeries:
    """Smoothing output: hard states, signal posteriors, log-likelihood."""

    states: np.ndarray
    posteriors: np.ndarray
    log_likelihood: float


@dataclass(frozen=True)
class DetectionMetrics:
    """Per-record detection quality against ground-truth labels."""

    precision: float
    recall: float
    f1: float
    correct_positive: int
    incorrect_positive: int
    incorrect_negative: int


def _check_observations(observations: Sequence[int] | np.ndarray) -> np.ndarray:
    obs = np.asarray(observations)
    if obs.ndim != 1:
        raise ValueError("observations must be one-dimensional")
    if obs.size and not np.isin(obs, (0, 1)).all():
        raise ValueError("observations must be 0 (bright) or 1 (dark)")
    return obs.astype(np.int8)


def forward_backward(
    params: HmmParams, observations: Sequence[int] | np.ndarray
) -> DecodedSeries:
    """Scaled forward-backward smoothing of a bright/dark stream.

    Returns per-record posteriors of the signal state, the hard argmax
    labels (ties to the non-signal state), and the total log-likelihood
    accumulated from the per-step scaling factors.
    """
    obs = _check_observations(observations)
    n = obs.size
    if n == 0:
        return DecodedSeries(
            states=np.empty(0, dtype=np.int8),
            posteriors=np.empty(0),
            log_likelihood=0.0,
        )
    trans, emit, initial = params.trans, params.emit, params.initial
    alpha = np.empty((n, 2))
    scale = np.empty(n)
    a = initial * emit[:, obs[0]]
    scale[0] = a.sum()
    if scale[0] == 0.0:
        raise ValueError("observation sequence impossible under the model")
    alpha[0] = a / scale[0]
    for t in range(1, n):
        a = (alpha[t - 1] @ trans) * emit[:, obs[t]]
        scale[t] = a.sum()
        if scale[t] == 0.0:
            raise ValueError("observation sequence impossible under the model")
        alpha[t] = a / scale[t]
    beta = np.empty((n, 2))
    beta[n - 1] = 1.0
    for t in range(n - 2, -1, -1):
        beta[t] = trans @ (emit[:, obs[t + 1]] * beta[t + 1]) / scale[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    posteriors = gamma[:, 1]
    states = (posteriors > 0.5).astype(np.int8)
    return DecodedSeries(
        states=states,
        posteriors=posteriors,
        log_likelihood=float(np.log(scale).sum()),
    )


def viterbi(params: HmmParams, observations: Sequence[int] | np.ndarray) -> np.ndarray:
    """Most likely hidden path in log-space; ties resolve to state 0."""
    obs = _check_observations(observations)
    n = obs.size
    if n == 0:
        return np.empty(0, dtype=np.int8)
    with np.errstate(divide="ignore"):
        log_trans = np.log(params.trans)
        log_emit = np.log(params.emit)
        log_init = np.log(params.initial)
    delta = log_init + log_emit[:, obs[0]]
    back = np.empty((n, 2), dtype=np.int8)
    for t in range(1, n):
        cand = delta[:, None] + log_trans  # cand[i, j]: from i into j
        # argmax over the source state, preferring 0 on exact ties
        choose1 = cand[1] > cand[0]
        back[t] = choose1
        delta = np.where(choose1, cand[1], cand[0]) + log_emit[:, obs[t]]
    path = np.empty(n, dtype=np.int8)
    path[n - 1] = 1 if delta[1] > delta[0] else 0
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _labeled_pairs(
    datasets: Iterable,
) -> list[tuple[np.ndarray, np.ndarray]]:
    pairs = []
    for item in datasets:
        if hasattr(item, "outcomes") and hasattr(item, "hidden_labels"):
            obs = item.outcomes()
            labels = item.hidden_labels()
            if labels is None:
                raise EstimationError("supervised training needs hidden labels")
        else:
            obs, labels = item
            obs = np.asarray(obs)
            labels = np.asarray(labels)
        if obs.shape != labels.shape:
            raise ValueError("observations and labels must have equal length")
        pairs.append((obs.astype(np.int8), labels.astype(np.int8)))
    return pairs


def estimate_params_supervised(datasets: Iterable) -> HmmParams:
    """Maximum-likelihood counting on labeled streams, add-one smoothed.

    Accepts labeled trial datasets or plain (observations, labels) pairs.
    Raises :class:`EstimationError` naming any hidden state that never
    appears in the labels, before smoothing would mask its absence.
    """
    pairs = _labeled_pairs(datasets)
    if not pairs:
        raise EstimationError("no training data supplied")
    trans_counts = np.zeros((2, 2))
    emit_counts = np.zeros((2, 2))
    init_counts = np.zeros(2)
    seen = np.zeros(2, dtype=bool)
    for obs, labels in pairs:
        if labels.size == 0:
            continue
        seen |= np.isin((0, 1), labels)
        init_counts[labels[0]] += 1
        np.add.at(emit_counts, (labels, obs), 1.0)
        np.add.at(trans_counts, (labels[:-1], labels[1:]), 1.0)
    for state in (0, 1):
        if not seen[state]:
            raise EstimationError(
                f"hidden state {STATE_NAMES[state]} never observed in the labels"
            )
    trans = trans_counts + 1.0
    emit = emit_counts + 1.0
    initial = init_counts + 1.0
    return HmmParams(
        trans=trans / trans.sum(axis=1, keepdims=True),
        emit=emit / emit.sum(axis=1, keepdims=True),
        initial=initial / initial.sum(),
    )


def baum_welch(
    observations: Sequence[int] | np.ndarray,
    initial_params: HmmParams,
    *,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> tuple[HmmParams, list[float]]:
    """Unsupervised EM refinement for unlabeled streams.

    Starts from ``initial_params`` (typically the supervised estimates)
    and iterates until the log-likelihood gain drops below ``tol``.
    Returns the refined parameters and the log-likelihood trace.
    """
    obs = _check_observations(observations)
    if obs.size < 2:
        raise ValueError("baum_welch needs at least two observations")
    params = initial_params
    history: list[float] = []
    for _ in range(max_iter):
        trans, emit = params.trans, params.emit
        n = obs.size
        alpha = np.empty((n, 2))
        scale = np.empty(n)
        a = params.initial * emit[:, obs[0]]
        scale[0] = a.sum()
        if scale[0] == 0.0:
            raise ValueError("observation sequence impossible under the model")
        alpha[0] = a / scale[0]
        for t in range(1, n):
            a = (alpha[t - 1] @ trans) * emit[:, obs[t]]
            scale[t] = a.sum()
            if scale[t] == 0.0:
                raise ValueError("observation sequence impossible under the model")
            alpha[t] = a / scale[t]
        history.append(float(np.log(scale).sum()))
        beta = np.empty((n, 2))
        beta[n - 1] = 1.0
        for t in range(n - 2, -1, -1):
            beta[t] = trans @ (emit[:, obs[t + 1]] * beta[t + 1]) / scale[t + 1]
        gamma = alpha * beta
        gamma /= gamma.sum(axis=1, keepdims=True)
        xi_sum = np.zeros((2, 2))
        for t in range(n - 1):
            xi = (
                alpha[t][:, None]
                * trans
                * (emit[:, obs[t + 1]] * beta[t + 1])[None, :]
                / scale[t + 1]
            )
            xi_sum += xi
        new_trans = xi_sum / gamma[:-1].sum(axis=0)[:, None]
        emit_num = np.zeros((2, 2))
        for o in (0, 1):
            emit_num[:, o] = gamma[obs == o].sum(axis=0)
        new_emit = emit_num / gamma.sum(axis=0)[:, None]
        new_initial = gamma[0]
        params = HmmParams(
            trans=new_trans / new_trans.sum(axis=1, keepdims=True),
            emit=new_emit / new_emit.sum(axis=1, keepdims=True),
            initial=new_initial / new_initial.sum(),
        )
        if len(history) >= 2 and abs(history[-1] - history[-2]) < tol:
            break
    return params, history


def bayes_posterior(
    p_x_given_signal: float, p_x_given_noise: float, prior_signal: float
) -> float:
    """Two-hypothesis Bayes rule P(signal | x)."""
    if p_x_given_signal < 0.0 or p_x_given_noise < 0.0:
        raise ValueError("likelihoods must be >= 0")
    if not 0.0 <= prior_signal <= 1.0:
        raise ValueError(f"prior must lie in [0, 1], got {prior_signal!r}")
    numerator = p_x_given_signal * prior_signal
    denominator = numerator + p_x_given_noise * (1.0 - prior_signal)
    if denominator == 0.0:
        raise ValueError("posterior undefined: both likelihood terms vanish")
    return numerator / denominator


def evaluate(
    predictions: Sequence[int] | np.ndarray, truth: Sequence[int] | np.ndarray
) -> DetectionMetrics:
    """Per-record precision, recall and F1 of predicted signal states."""
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError("predictions and truth must be 1-d sequences of equal length")
    cp = int(np.sum((pred == 1) & (true == 1)))
    ip = int(np.sum((pred == 1) & (true == 0)))
    inn = int(np.sum((pred == 0) & (true == 1)))
    precision = cp / (cp + ip) if cp + ip else (1.0 if inn == 0 else 0.0)
    recall = cp / (cp + inn) if cp + inn else (1.0 if ip == 0 else 0.0)
    f1 = 0.0 if precision + recall == 0.0 else 2.0 * precision * recall / (precision + recall)
    return DetectionMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        correct_positive=cp,
        incorrect_positive=ip,
        incorrect_negative=inn,
    )


def write_decoded_csv(
    path,
    observations: Sequence[int] | np.ndarray,
    decoded: DecodedSeries,
    *,
    indices: Sequence[int] | None = None,
) -> None:
    """Export decoding as CSV: index, outcome, predicted_state, posterior."""
    obs = _check_observations(observations)
    if obs.size != decoded.states.size:
        raise ValueError("observations and decoded series differ in length")
    idx = range(obs.size) if indices is None else indices
    rows = (
        (int(i), int(o), int(s), float(p))
        for i, o, s, p in zip(idx, obs, decoded.states, decoded.posteriors)
    )
    write_table(path, ("index", "outcome", "predicted_state", "posterior"), rows)
