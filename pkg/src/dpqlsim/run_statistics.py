"""Classical statistics of the measurement stream.

Two bin-level models describe the dark-count distribution of 20-cycle
windows: a pure-noise binomial and a signal model in which the molecule
starts a bin in the rotational ground level, survives there for a
geometric number of cycles, and emits darks at the detection fidelity
while present and at the noise floor afterwards.

Significance of an observed run of consecutive darks uses the exact
distribution of the longest success run in independent Bernoulli trials.
The production path is a run-length automaton raised to the n-th power
(exact at any practical n); a counting recursion over strings with a
bounded run is kept as an independent cross-check, and the historical
linear-in-n extrapolation is available for n beyond a configured cap.
p-values convert to one-sided Gaussian sigmas through the inverse normal
quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import binom as _binom

__all__ = [
    "NoiseSignalModel",
    "SignificanceResult",
    "BinValuePrediction",
    "binom_noise_pmf",
    "signal_bin_pmf",
    "noise_pmf",
    "signal_pmf",
    "bin_value_distribution",
    "longest_run_cdf",
    "p_value",
    "extrapolate_p_value",
    "z_from_p",
    "p_from_z",
    "significance",
    "find_longest_run",
    "observed_run_significance",
    "required_run_length",
]


@dataclass(frozen=True)
class NoiseSignalModel:
    """Per-bin dark statistics: noise floor, fidelity, departure, occupancy.

    ``p_b`` is the dark probability away from the ground level, ``p_d``
    the dark probability in it, ``p_s`` the per-cycle probability of
    leaving it, and ``p_g`` the thermal occupancy used to mix the two bin
    distributions (may be left None and supplied at prediction time).
    """

    p_b: float = 0.03
    p_d: float = 0.72
    p_s: float = 0.015
    p_g: float | None = None
    bin: int = 20

    def __post_init__(self) -> None:
        for name in ("p_b", "p_d", "p_s"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.p_g is not None and not 0.0 <= self.p_g <= 1.0:
            raise ValueError(f"p_g must lie in [0, 1], got {self.p_g!r}")
        if self.p_d <= self.p_b:
            raise ValueError("p_d must exceed p_b")
        if self.bin < 1:
            raise ValueError(f"bin must be >= 1, got {self.bin!r}")


def _check_k(k: int, bin_size: int) -> None:
    if not 0 <= k <= bin_size:
        raise ValueError(f"k must lie in [0, {bin_size}], got {k!r}")


def noise_pmf(model: NoiseSignalModel) -> np.ndarray:
    """Dark-count pmf of a noise-only bin, indices 0..bin."""
    return _binom.pmf(np.arange(model.bin + 1), model.bin, model.p_b)


def binom_noise_pmf(k: int, model: NoiseSignalModel) -> float:
    """Probability of k darks in one noise-only bin."""
    _check_k(k, model.bin)
    return float(_binom.pmf(k, model.bin, model.p_b))


@lru_cache(maxsize=64)
def _signal_pmf_cached(p_b: float, p_d: float, p_s: float, bin_size: int) -> np.ndarray:
    # Residence time in the ground level: i signal cycles with probability
    # (1-p_s)^(i-1) p_s for i < bin, all remaining mass on a full bin.
    pmf = np.zeros(bin_size + 1)
    for i in range(1, bin_size + 1):
        if i < bin_size:
            weight = (1.0 - p_s) ** (i - 1) * p_s
        else:
            weight = (1.0 - p_s) ** (bin_size - 1)
        signal = _binom.pmf(np.arange(i + 1), i, p_d)
        noise = _binom.pmf(np.arange(bin_size - i + 1), bin_size - i, p_b)
        pmf += weight * np.convolve(signal, noise)
    return pmf


def signal_pmf(model: NoiseSignalModel) -> np.ndarray:
    """Dark-count pmf of a bin that starts in the ground level."""
    return _signal_pmf_cached(model.p_b, model.p_d, model.p_s, model.bin).copy()


def signal_bin_pmf(k: int, model: NoiseSignalModel) -> float:
    """Probability of k darks in one signal bin."""
    _check_k(k, model.bin)
    return float(signal_pmf(model)[k])


@dataclass(frozen=True)
class BinValuePrediction:
    """Expected dark-count histogram over N bins, with a p_g sigma band."""

    k: np.ndarray
    counts: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    n_bins: int
    p_g: float

    def rows(self):
        for i in range(self.k.size):
            yield (
                int(self.k[i]),
                float(self.counts[i]),
                float(self.band_low[i]),
                float(self.band_high[i]),
            )


def bin_value_distribution(
    n_bins: int,
    model: NoiseSignalModel,
    *,
    p_g: float | None = None,
    p_g_sigma: float = 0.0,
) -> BinValuePrediction:
    """Predicted dark-count histogram N [(1 - p_g) p_n(k) + p_g p_e(k)].

    ``p_g`` overrides the model's thermal occupancy; the band re-evaluates
    the mixture at p_g plus and minus one sigma (clipped to [0, 1]).
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins!r}")
    occupancy = model.p_g if p_g is None else p_g
    if occupancy is None:
        raise ValueError("p_g must be set on the model or passed explicitly")
    if not 0.0 <= occupancy <= 1.0:
        raise ValueError(f"p_g must lie in [0, 1], got {occupancy!r}")
    if p_g_sigma < 0.0:
        raise ValueError("p_g_sigma must be >= 0")
    p_noise = noise_pmf(model)
    p_signal = signal_pmf(model)

    def mixture(pg: float) -> np.ndarray:
        pg = min(max(pg, 0.0), 1.0)
        return n_bins * ((1.0 - pg) * p_noise + pg * p_signal)

    lo, hi = mixture(occupancy - p_g_sigma), mixture(occupancy + p_g_sigma)
    return BinValuePrediction(
        k=np.arange(model.bin + 1),
        counts=mixture(occupancy),
        band_low=np.minimum(lo, hi),
        band_high=np.maximum(lo, hi),
        n_bins=n_bins,
        p_g=occupancy,
    )


def _check_run_args(n: int, x: int, p_dark: float) -> None:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    if x < 0 or x > n:
        raise ValueError(f"x must lie in [0, n], got x={x!r} for n={n!r}")
    if not 0.0 <= p_dark <= 1.0:
        raise ValueError(f"p_dark must lie in [0, 1], got {p_dark!r}")


def _automaton_matrix(x: int, p_dark: float) -> np.ndarray:
    # States 0..x track the trailing dark-run length; state x+1 absorbs
    # once a run of length x+1 has appeared.
    size = x + 2
    t = np.zeros((size, size))
    q = 1.0 - p_dark
    for r in range(x + 1):
        t[r, 0] = q
        t[r, min(r + 1, x + 1)] = p_dark
    t[x + 1, x + 1] = 1.0
    return t


def _automaton_masses(n: int, x: int, p_dark: float) -> tuple[float, float]:
    """(live mass, dead mass) after n steps; both free of cancellation."""
    power = np.linalg.matrix_power(_automaton_matrix(x, p_dark), n)
    live = float(power[0, : x + 1].sum())
    dead = float(power[0, x + 1])
    return live, dead


def _recursion_counts(n: int, x: int) -> list[list[int]]:
    # counts[m][k]: length-m strings with k darks and no dark run longer
    # than x, built by conditioning on the leading run (j darks, then a
    # bright, then any admissible remainder).  Exact integers throughout.
    counts = [[0] * (n + 1) for _ in range(n + 1)]
    for m in range(n + 1):
        for k in range(m + 1):
            if m == k:
                counts[m][k] = 1 if m <= x else 0
                continue
            total = 0
            for j in range(min(x, k) + 1):
                total += counts[m - 1 - j][k - j]
            counts[m][k] = total
    return counts


def _recursion_cdf(n: int, x: int, p_dark: float) -> float:
    counts = _recursion_counts(n, x)
    q = 1.0 - p_dark
    total = 0.0
    for k in range(n + 1):
        count = counts[n][k]
        if count:
            total += float(count) * p_dark**k * q ** (n - k)
    return total


def longest_run_cdf(n: int, x: int, p_dark: float, *, method: str = "automaton") -> float:
    """P(longest dark run in n Bernoulli trials is <= x).

    ``method='automaton'`` is the production path; ``'recursion'`` is the
    exact-integer counting cross-check and is practical for n up to a few
    hundred.
    """
    _check_run_args(n, x, p_dark)
    if n == 0 or p_dark == 0.0:
        return 1.0
    if method == "automaton":
        return _automaton_masses(n, x, p_dark)[0]
    if method == "recursion":
        return _recursion_cdf(n, x, p_dark)
    raise ValueError(f"method must be 'automaton' or 'recursion', got {method!r}")


def extrapolate_p_value(
    n_target: int, x: int, p_dark: float, *, exact_cap: int = 1000, points: int = 11
) -> tuple[float, bool]:
    """Linear-in-n extrapolation of the exact p-value beyond ``exact_cap``.

    Fits p(n) over exact evaluations up to the cap and extends the line to
    ``n_target``; returns (p, clipped) where the flag marks saturation at
    one.  Kept for methodological fidelity; the automaton path makes exact
    evaluation cheap far beyond any practical cap.
    """
    if points < 2:
        raise ValueError("points must be >= 2")
    if exact_cap < x + 1:
        raise ValueError("exact_cap must exceed x")
    ns = np.unique(np.linspace(max(x + 1, exact_cap // 2), exact_cap, points).astype(int))
    ps = [_automaton_masses(int(m), x, p_dark)[1] for m in ns]
    slope, intercept = np.polyfit(ns, ps, 1)
    p = slope * n_target + intercept
    if p >= 1.0:
        return 1.0, True
    return max(float(p), 0.0), False


def p_value(n: int, x: int, p_dark: float, *, exact_cap: int = 1_000_000) -> float:
    """P(longest dark run > x) in n trials; exact up to ``exact_cap``.

    Beyond the cap the linear extrapolation takes over, saturating at one.
    """
    _check_run_args(n, x, p_dark)
    if n <= exact_cap:
        return _automaton_masses(n, x, p_dark)[1]
    return extrapolate_p_value(n, x, p_dark, exact_cap=exact_cap)[0]


def z_from_p(p: float) -> float:
    """One-sided Gaussian significance of a p-value in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    return float(-ndtri(p))


def p_from_z(z: float) -> float:
    """Upper-tail Gaussian probability of a significance z."""
    return float(ndtr(-z))


@dataclass(frozen=True)
class SignificanceResult:
    """Longest-run significance summary for one (n, x) evaluation."""

    n: int
    x: int
    p_dark: float
    p_value: float
    z: float
    extrapolated: bool = False
    clipped: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError(f"p_value must lie in (0, 1], got {self.p_value!r}")
        expected = -math.inf if self.p_value == 1.0 else z_from_p(self.p_value)
        if expected == -math.inf:
            consistent = self.z == -math.inf
        else:
            consistent = abs(self.z - expected) <= 1e-9
        if not consistent:
            raise ValueError(f"z={self.z!r} inconsistent with p={self.p_value!r}")

    @property
    def method(self) -> str:
        return "extrapolated" if self.extrapolated else "exact"

    def to_json_dict(self) -> dict[str, object]:
        return {
            "n": self.n,
            "x": self.x,
            "p_dark": self.p_dark,
            "p_value": self.p_value,
            "z": self.z,
            "method": self.method,
        }


def significance(
    n: int, x: int, p_dark: float, *, exact_cap: int = 1_000_000
) -> SignificanceResult:
    """Full significance record for the event 'longest run exceeds x'."""
    _check_run_args(n, x, p_dark)
    extrapolated = n > exact_cap
    clipped = False
    if extrapolated:
        p, clipped = extrapolate_p_value(n, x, p_dark, exact_cap=exact_cap)
        p = max(p, 0.0)
        if p == 0.0:
            # A vanishing fit means the exact value is below float noise;
            # fall back to the exact automaton rather than claim p = 0.
            p = _automaton_masses(n, x, p_dark)[1]
            extrapolated = False
    else:
        p = _automaton_masses(n, x, p_dark)[1]
    z = -math.inf if p >= 1.0 else z_from_p(p)
    return SignificanceResult(
        n=n, x=x, p_dark=p_dark, p_value=min(p, 1.0), z=z,
        extrapolated=extrapolated, clipped=clipped,
    )


def find_longest_run(outcomes: Sequence[int] | np.ndarray) -> tuple[int, int]:
    """(length, start index) of the longest run of dark outcomes; first wins."""
    best_len, best_start = 0, 0
    run_len, run_start = 0, 0
    for i, value in enumerate(outcomes):
        if value == 1:
            if run_len == 0:
                run_start = i
            run_len += 1
            if run_len > best_len:
                best_len, best_start = run_len, run_start
        else:
            run_len = 0
    return best_len, best_start


def observed_run_significance(
    outcomes: Sequence[int] | np.ndarray,
    p_dark: float,
    *,
    exact_cap: int = 1_000_000,
) -> SignificanceResult:
    """Significance of the longest observed dark run in a stream.

    The p-value is P(longest run >= observed length) under pure noise,
    i.e. the exceedance threshold sits one below the observed length.
    """
    outcomes = np.asarray(outcomes)
    n = int(outcomes.size)
    x_obs, _ = find_longest_run(outcomes)
    if x_obs == 0:
        return SignificanceResult(
            n=n, x=0, p_dark=p_dark, p_value=1.0, z=-math.inf
        )
    inner = significance(n, x_obs - 1, p_dark, exact_cap=exact_cap)
    return SignificanceResult(
        n=n, x=x_obs, p_dark=p_dark, p_value=inner.p_value, z=inner.z,
        extrapolated=inner.extrapolated, clipped=inner.clipped,
    )


def required_run_length(
    n: int, p_dark: float, z_target: float, *, exact_cap: int = 1_000_000, max_x: int = 200
) -> SignificanceResult:
    """Smallest x whose exceedance reaches ``z_target`` sigmas at size n."""
    for x in range(min(n, max_x) + 1):
        result = significance(n, x, p_dark, exact_cap=exact_cap)
        if result.z >= z_target:
            return result
    raise ValueError(
        f"no run length up to {max_x} reaches Z = {z_target} at n = {n}"
    )
