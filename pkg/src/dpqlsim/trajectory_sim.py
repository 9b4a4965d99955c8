"""Monte Carlo simulation of the experiment loop.

Each cycle the hidden rovibrational state takes one stochastic step
(collisional re-thermalization, else a blackbody-driven jump if the state
sits in the radiative Omega = 3/2 manifold), then a bright/dark outcome is
emitted: dark with the detection fidelity when the molecule occupies the
rotational ground level, dark with the noise floor otherwise.  Measurement
never alters the hidden state.

Exactly four uniform variates are consumed per cycle in a fixed order
(collision gate, jump gate / collision resample, jump target, emission),
so datasets are bit-reproducible from (config, seed) and insensitive to
which branches fire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import dataio
from .bbr_kinetics import build_rate_matrix
from .spectroscopy import (
    ROT_GROUND,
    MolecularConstants,
    RoVibState,
    enumerate_levels,
    thermal_distribution,
)

__all__ = [
    "DEFAULT_RAMP_FIDELITIES",
    "ExperimentConfig",
    "MeasurementRecord",
    "TrialDataset",
    "TrajectoryDynamics",
    "step_hidden_state",
    "emit_measurement",
    "simulate_trial",
    "simulate_hours",
    "ensemble_ground_occupancy",
    "bin_series",
    "disjoint_bin_counts",
    "records_from_rows",
]

#: Nominal two-ramp-plus-shelving fidelity budget whose product motivates
#: the 0.72 detection fidelity.  Kept as reference metadata; the simulator
#: itself only consumes ``detection_fidelity``.
DEFAULT_RAMP_FIDELITIES = (0.90, 0.85, 0.95)


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of the simulated experiment loop.

    ``ramp_fidelity_1``, ``ramp_fidelity_2`` and ``shelving_fidelity`` are
    optional bookkeeping; when all three are given their product must
    reproduce ``detection_fidelity`` within 1e-6.  ``trial_duration_cap``
    truncates a trial at a wall-clock time (molecule loss), and
    ``thermalization_wait`` documents the equilibration pause assumed long
    enough that each trial starts from a thermal state.
    """

    cycle: float = 0.040
    experiments_per_trial: int = 30000
    p_bright_noise: float = 0.03
    detection_fidelity: float = 0.72
    ramp_fidelity_1: float | None = None
    ramp_fidelity_2: float | None = None
    shelving_fidelity: float | None = None
    collision_rate: float = 0.008
    thermalization_wait: float = 300.0
    temperature: float = 300.0
    rng_seed: int = 0
    trial_duration_cap: float | None = None

    def __post_init__(self) -> None:
        if not self.cycle > 0.0:
            raise ValueError(f"cycle must be positive, got {self.cycle!r}")
        if self.experiments_per_trial < 1:
            raise ValueError("experiments_per_trial must be >= 1")
        _check_probability("p_bright_noise", self.p_bright_noise)
        _check_probability("detection_fidelity", self.detection_fidelity)
        if self.collision_rate < 0.0:
            raise ValueError(f"collision_rate must be >= 0, got {self.collision_rate!r}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")
        if self.thermalization_wait < 0.0:
            raise ValueError("thermalization_wait must be >= 0")
        if self.trial_duration_cap is not None and not self.trial_duration_cap > 0.0:
            raise ValueError("trial_duration_cap must be positive when set")
        ramps = (self.ramp_fidelity_1, self.ramp_fidelity_2, self.shelving_fidelity)
        for name, value in zip(
            ("ramp_fidelity_1", "ramp_fidelity_2", "shelving_fidelity"), ramps
        ):
            if value is not None:
                _check_probability(name, value)
        if all(value is not None for value in ramps):
            product = ramps[0] * ramps[1] * ramps[2]
            if abs(product - self.detection_fidelity) > 1e-6:
                raise ValueError(
                    f"ramp fidelity product {product:.6f} does not match "
                    f"detection_fidelity {self.detection_fidelity:.6f} within 1e-6"
                )

    def to_mapping(self) -> dict[str, object]:
        out: dict[str, object] = {
            "cycle": self.cycle,
            "experiments_per_trial": self.experiments_per_trial,
            "p_bright_noise": self.p_bright_noise,
            "detection_fidelity": self.detection_fidelity,
            "collision_rate": self.collision_rate,
            "thermalization_wait": self.thermalization_wait,
            "temperature": self.temperature,
            "rng_seed": self.rng_seed,
        }
        for name in ("ramp_fidelity_1", "ramp_fidelity_2", "shelving_fidelity"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.trial_duration_cap is not None:
            out["trial_duration_cap"] = self.trial_duration_cap
        return out

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "ExperimentConfig":
        casters: dict[str, type] = {
            "cycle": float,
            "experiments_per_trial": int,
            "p_bright_noise": float,
            "detection_fidelity": float,
            "ramp_fidelity_1": float,
            "ramp_fidelity_2": float,
            "shelving_fidelity": float,
            "collision_rate": float,
            "thermalization_wait": float,
            "temperature": float,
            "rng_seed": int,
            "trial_duration_cap": float,
        }
        kwargs: dict[str, object] = {}
        for key, raw in mapping.items():
            if key not in casters:
                raise ValueError(f"unknown experiment-config key {key!r}")
            kwargs[key] = casters[key](raw)
        return cls(**kwargs)


@dataclass(frozen=True)
class MeasurementRecord:
    """One experiment outcome: 0 bright, 1 dark, with optional truth label.

    ``hidden_label`` is 1 when the molecule occupied the rotational ground
    level during the cycle, 0 otherwise, and None for experimental data.
    """

    index: int
    outcome: int
    time_s: float
    hidden_label: int | None = None

    def __post_init__(self) -> None:
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {self.outcome!r}")
        if self.hidden_label not in (None, 0, 1):
            raise ValueError(f"hidden_label must be 0, 1 or None, got {self.hidden_label!r}")


@dataclass(frozen=True)
class TrialDataset:
    """Ordered measurement stream plus the config and seed that made it."""

    records: tuple[MeasurementRecord, ...]
    config: ExperimentConfig
    seed: int

    def __post_init__(self) -> None:
        if self.config.trial_duration_cap is None:
            if len(self.records) != self.config.experiments_per_trial:
                raise ValueError(
                    f"{len(self.records)} records for "
                    f"{self.config.experiments_per_trial} configured experiments"
                )
        previous = -math.inf
        for rec in self.records:
            if rec.time_s <= previous:
                raise ValueError("record timestamps must be strictly increasing")
            previous = rec.time_s

    def outcomes(self) -> np.ndarray:
        return np.array([rec.outcome for rec in self.records], dtype=np.int8)

    def hidden_labels(self) -> np.ndarray | None:
        labels = [rec.hidden_label for rec in self.records]
        if any(label is None for label in labels):
            return None
        return np.array(labels, dtype=np.int8)

    def ground_occupancy(self) -> float:
        """Fraction of cycles spent in the rotational ground level."""
        labels = self.hidden_labels()
        if labels is None:
            raise ValueError("dataset has no hidden labels")
        return float(labels.mean())

    def to_csv(self, path) -> None:
        dataio.write_dataset_csv(
            path,
            (
                (rec.index, rec.outcome, rec.time_s, rec.hidden_label)
                for rec in self.records
            ),
        )


def records_from_rows(
    rows: Iterable[tuple[int, int, float, int | None]]
) -> list[MeasurementRecord]:
    """Wrap raw dataset rows (as read by dataio) into records."""
    return [
        MeasurementRecord(index=i, outcome=o, time_s=t, hidden_label=h)
        for i, o, t, h in rows
    ]


class TrajectoryDynamics:
    """Precomputed stochastic-step tables for one (constants, config) pair.

    Encodes every level of the full two-manifold set as an integer; the
    radiative levels carry one-jump-per-cycle transition tables derived
    from the exponentiated generator column (stay probability
    exp(G_ii dt), targets weighted by their off-diagonal rates).  The
    one-jump restriction is accurate to O((rate * dt)^2), and every rate
    here is far below 1/cycle.
    """

    def __init__(self, constants: MolecularConstants, *, temperature: float,
                 cycle: float, collision_rate: float):
        self.constants = constants
        self.temperature = temperature
        self.cycle = cycle
        self.collision_rate = collision_rate
        self.collision_prob = -math.expm1(-collision_rate * cycle)

        self.states: tuple[RoVibState, ...] = tuple(enumerate_levels(constants))
        self._code_of = {state: i for i, state in enumerate(self.states)}
        self.ground_code = self._code_of[ROT_GROUND]

        dist = thermal_distribution(constants, temperature)
        probs = np.array([dist.probability(s) for s in self.states])
        self.thermal_cum = np.cumsum(probs)
        self.thermal_cum[-1] = 1.0  # guard the top edge against roundoff

        m = build_rate_matrix(constants, temperature)
        n_states = len(self.states)
        self.stay_prob = np.ones(n_states)
        self.jump_codes: list[np.ndarray | None] = [None] * n_states
        self.jump_cum: list[np.ndarray | None] = [None] * n_states
        for i, state in enumerate(m.level_index):
            code = self._code_of[state]
            out_rate = -m.generator[i, i]
            self.stay_prob[code] = math.exp(-out_rate * cycle)
            column = m.generator[:, i].copy()
            column[i] = 0.0
            targets = np.nonzero(column > 0.0)[0]
            if targets.size and out_rate > 0.0:
                weights = column[targets] / out_rate
                cum = np.cumsum(weights)
                cum[-1] = 1.0
                self.jump_codes[code] = np.array(
                    [self._code_of[m.level_index[k]] for k in targets]
                )
                self.jump_cum[code] = cum

    @classmethod
    def for_config(
        cls, config: ExperimentConfig, constants: MolecularConstants | None = None
    ) -> "TrajectoryDynamics":
        return _dynamics_cached(
            constants or MolecularConstants(),
            config.temperature,
            config.cycle,
            config.collision_rate,
        )

    def code_of(self, state: RoVibState) -> int:
        return self._code_of[state]

    def sample_thermal_code(self, u: float) -> int:
        return int(np.searchsorted(self.thermal_cum, u, side="right"))

    def step_code(self, code: int, u_collision: float, u_gate: float, u_target: float) -> int:
        """Advance one cycle; u_gate doubles as the resample variate on
        collision cycles (all variates are drawn regardless of branch)."""
        if u_collision < self.collision_prob:
            return self.sample_thermal_code(u_gate)
        cum = self.jump_cum[code]
        if cum is None or u_gate < self.stay_prob[code]:
            return code
        codes = self.jump_codes[code]
        return int(codes[np.searchsorted(cum, u_target, side="right")])


@lru_cache(maxsize=16)
def _dynamics_cached(
    constants: MolecularConstants, temperature: float, cycle: float, collision_rate: float
) -> TrajectoryDynamics:
    return TrajectoryDynamics(
        constants, temperature=temperature, cycle=cycle, collision_rate=collision_rate
    )


def step_hidden_state(
    current: RoVibState, dynamics: TrajectoryDynamics, rng: np.random.Generator
) -> RoVibState:
    """One stochastic cycle step of the hidden state.

    Collision (probability 1 - exp(-collision_rate * cycle)) re-samples the
    thermal distribution over both fine-structure manifolds; otherwise a
    radiative jump may fire if the state sits in Omega = 3/2.  Omega = 1/2
    states only move through collisions.
    """
    u = rng.random(3)
    code = dynamics.step_code(dynamics.code_of(current), u[0], u[1], u[2])
    return dynamics.states[code]


def emit_measurement(
    hidden: RoVibState, config: ExperimentConfig, rng: np.random.Generator
) -> int:
    """Bright/dark outcome for one cycle; never changes the hidden state."""
    p_dark = (
        config.detection_fidelity if hidden == ROT_GROUND else config.p_bright_noise
    )
    return int(rng.random() < p_dark)


def _simulate_arrays(
    config: ExperimentConfig,
    constants: MolecularConstants,
    rng: np.random.Generator,
    n_cycles: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Fast path: (outcomes, ground_labels) int8 arrays for n_cycles."""
    dyn = TrajectoryDynamics.for_config(config, constants)
    code = dyn.sample_thermal_code(rng.random())
    uniforms = rng.random((n_cycles, 4))
    outcomes = np.empty(n_cycles, dtype=np.int8)
    labels = np.empty(n_cycles, dtype=np.int8)
    p_d, p_b = config.detection_fidelity, config.p_bright_noise
    ground = dyn.ground_code
    step = dyn.step_code
    for k in range(n_cycles):
        u = uniforms[k]
        code = step(code, u[0], u[1], u[2])
        in_ground = code == ground
        labels[k] = in_ground
        outcomes[k] = u[3] < (p_d if in_ground else p_b)
    return outcomes, labels


def simulate_trial(
    config: ExperimentConfig, constants: MolecularConstants | None = None
) -> TrialDataset:
    """Generate one labeled trial, deterministic in (config, seed).

    The initial hidden state is a thermal draw (the configured
    thermalization wait is assumed long enough to equilibrate); each cycle
    then steps the state and emits an outcome.  A configured
    ``trial_duration_cap`` truncates the stream at that wall-clock time.
    """
    constants = constants or MolecularConstants()
    n_cycles = config.experiments_per_trial
    if config.trial_duration_cap is not None:
        n_cycles = min(n_cycles, int(config.trial_duration_cap / config.cycle))
    rng = np.random.default_rng(config.rng_seed)
    outcomes, labels = _simulate_arrays(config, constants, rng, n_cycles)
    records = tuple(
        MeasurementRecord(
            index=k,
            outcome=int(outcomes[k]),
            time_s=(k + 1) * config.cycle,
            hidden_label=int(labels[k]),
        )
        for k in range(n_cycles)
    )
    return TrialDataset(records=records, config=config, seed=config.rng_seed)


def simulate_hours(
    config: ExperimentConfig, hours: float, constants: MolecularConstants | None = None
) -> TrialDataset:
    """Convenience wrapper sizing one trial to a wall-clock duration."""
    if not hours > 0.0:
        raise ValueError(f"hours must be positive, got {hours!r}")
    n_cycles = int(round(hours * 3600.0 / config.cycle))
    return simulate_trial(
        replace(config, experiments_per_trial=n_cycles), constants
    )


def ensemble_ground_occupancy(
    config: ExperimentConfig,
    n_trials: int,
    hours: float,
    constants: MolecularConstants | None = None,
) -> np.ndarray:
    """Ground-level occupancy fraction of ``n_trials`` independent runs.

    Each run covers ``hours`` of wall-clock time with its own RNG stream
    spawned from the config seed, so the ensemble is reproducible yet the
    streams are statistically independent.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    constants = constants or MolecularConstants()
    n_cycles = int(round(hours * 3600.0 / config.cycle))
    children = np.random.SeedSequence(config.rng_seed).spawn(n_trials)
    fractions = np.empty(n_trials)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        _, labels = _simulate_arrays(config, constants, rng, n_cycles)
        fractions[i] = labels.mean()
    return fractions


def bin_series(values: Sequence[int] | np.ndarray, window: int = 20) -> np.ndarray:
    """Moving average of a 0/1 outcome stream; empty when window > length."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window!r}")
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("bin_series expects a one-dimensional sequence")
    if window > arr.size:
        return np.empty(0)
    return np.convolve(arr, np.full(window, 1.0 / window), mode="valid")


def disjoint_bin_counts(
    values: Sequence[int] | np.ndarray, window: int = 20
) -> np.ndarray:
    """Histogram of dark counts over disjoint windows, offset-averaged.

    Splits the stream into consecutive windows at every starting offset
    0..window-1, histograms the per-window dark counts, and averages the
    histograms.  Returns an array of length window + 1 whose k-th entry is
    the mean number of windows containing exactly k darks.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window!r}")
    arr = np.asarray(values, dtype=np.int64)
    if arr.size < window:
        return np.zeros(window + 1)
    total = np.zeros(window + 1)
    for offset in range(window):
        usable = (arr.size - offset) // window
        if usable == 0:
            continue
        chunk = arr[offset : offset + usable * window].reshape(usable, window)
        counts = chunk.sum(axis=1)
        total += np.bincount(counts, minlength=window + 1)[: window + 1]
    return total / window
