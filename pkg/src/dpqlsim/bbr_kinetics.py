"""Blackbody-driven rovibrational kinetics of the trapped molecular ion.

Builds the radiative master equation over the Omega = 3/2 level set (the
fine-structure gap is electric-dipole forbidden, so Omega = 1/2 levels
never couple radiatively): Planck spectral density, Einstein A and B
coefficients from rigid-rotor line strengths, the rate-matrix generator,
population evolution, and the derived timescales (ground-state residence
lifetime, re-thermalization time, per-cycle leave probability).

Line strengths use the Hoenl-London factors of a Pi-state branch with
fixed Omega.  Absolute rates hinge on two dipole scales that are not
independently known; the vibrational dipole is calibrated so the lowest
rotational level of v = 1 decays at ``VIB_DECAY_TARGET`` (5 per second)
and the rotational dipole sits ``mu_rot_scale`` (default one order of
magnitude) above the vibrational one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import constants as _const
from scipy.integrate import solve_ivp

from .dataio import write_table
from .spectroscopy import (
    KB_CM,
    ROT_GROUND,
    MolecularConstants,
    RoVibState,
    StateDistribution,
    degeneracy,
    enumerate_levels,
    level_energy,
    most_probable_rotational_state,
    thermal_population,
)

__all__ = [
    "VIB_DECAY_TARGET",
    "IntegrationError",
    "PlanckField",
    "EinsteinCoefficients",
    "RateMatrix",
    "PopulationTrajectory",
    "planck_energy_density",
    "photon_occupation",
    "radiative_levels",
    "build_einstein_coefficients",
    "build_rate_matrix",
    "restricted_boltzmann",
    "evolve_populations",
    "ground_state_residence_lifetime",
    "rethermalization_time",
    "leave_probability_per_cycle",
    "lifetime_temperature_sweep",
]

#: Aggregate spontaneous decay rate, s^-1, of the lowest v = 1 level; the
#: vibrational dipole is calibrated against this anchor.
VIB_DECAY_TARGET = 5.0

# Radiative transitions act only inside this fine-structure manifold.
_RADIATIVE_TWO_OMEGA = 3

# 16 pi^3 / (3 eps0 h c^3): A = _A_PREFACTOR * nu^3 * mu^2 * S / (2J_u + 1)
_A_PREFACTOR = 16.0 * math.pi**3 / (3.0 * _const.epsilon_0 * _const.h * _const.c**3)

# cm^-1 to Hz.
_HZ_PER_CM = _const.c * 100.0


class IntegrationError(RuntimeError):
    """Numerical integration failed; carries the last trusted time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g} s)")
        self.last_time = last_time


def planck_energy_density(nu: float, T: float) -> float:
    """Spectral energy density (8 pi h nu^3 / c^3) / (exp(h nu / kT) - 1).

    Units J s m^-3 (per unit ordinary frequency).  Both arguments must be
    strictly positive.
    """
    if not nu > 0.0:
        raise ValueError(f"frequency must be positive, got {nu!r}")
    if not T > 0.0:
        raise ValueError(f"temperature must be positive, got {T!r}")
    x = _const.h * nu / (_const.k * T)
    prefactor = 8.0 * math.pi * _const.h * nu**3 / _const.c**3
    if x > 700.0:  # expm1 would overflow; Wien tail underflows to zero instead
        return prefactor * math.exp(-x)
    return prefactor / math.expm1(x)


def photon_occupation(nu: float, T: float) -> float:
    """Mean thermal photon number at frequency nu; zero at T = 0."""
    if not nu > 0.0:
        raise ValueError(f"frequency must be positive, got {nu!r}")
    if T < 0.0:
        raise ValueError(f"temperature must be >= 0, got {T!r}")
    if T == 0.0:
        return 0.0
    x = _const.h * nu / (_const.k * T)
    if x > 700.0:  # expm1 would overflow; occupation underflows to zero
        return math.exp(-x)
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class PlanckField:
    """Isotropic thermal radiation field at a fixed temperature."""

    temperature: float

    def __post_init__(self) -> None:
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")

    def energy_density(self, nu: float) -> float:
        return planck_energy_density(nu, self.temperature)

    def occupation(self, nu: float) -> float:
        return photon_occupation(nu, self.temperature)


def radiative_levels(c: MolecularConstants) -> list[RoVibState]:
    """The radiatively coupled basis: all Omega = 3/2 levels, v then n order."""
    return enumerate_levels(c, two_omega=_RADIATIVE_TWO_OMEGA)


def _honl_london_pair(two_J_hi: int, two_omega: int) -> float:
    # P/R-type line strength for the pair (J_hi, J_hi - 1) at fixed Omega.
    J, O = two_J_hi / 2.0, two_omega / 2.0
    return (J * J - O * O) / J


def _honl_london_q(two_J: int, two_omega: int) -> float:
    # Q-type line strength (J -> J) at fixed Omega.
    J, O = two_J / 2.0, two_omega / 2.0
    return (2.0 * J + 1.0) * O * O / (J * (J + 1.0))


@dataclass(frozen=True)
class EinsteinCoefficients:
    """A and B coefficients over ordered (upper, lower) level pairs.

    ``A`` holds spontaneous rates in s^-1, ``B`` the stimulated
    coefficients with B = A c^3 / (8 pi h nu^3), and ``frequencies`` the
    transition frequencies in Hz.  ``mu_vib`` and ``mu_rot`` are the
    calibrated transition dipoles in C m.
    """

    levels: tuple[RoVibState, ...]
    A: Mapping[tuple[RoVibState, RoVibState], float]
    B: Mapping[tuple[RoVibState, RoVibState], float]
    frequencies: Mapping[tuple[RoVibState, RoVibState], float]
    mu_vib: float
    mu_rot: float

    def total_decay_rate(self, upper: RoVibState) -> float:
        """Sum of spontaneous rates out of one level."""
        return sum(rate for (u, _), rate in self.A.items() if u == upper)


def _vibrational_channels(n_upper: int, J_count: int) -> list[tuple[int, float]]:
    """(lower n, line strength) pairs for emission from (v+1, n_upper)."""
    two_J_u = _RADIATIVE_TWO_OMEGA + 2 * n_upper
    channels = [(n_upper, _honl_london_q(two_J_u, _RADIATIVE_TWO_OMEGA))]
    if n_upper + 1 < J_count:  # lower level with J one above
        channels.append(
            (n_upper + 1, _honl_london_pair(two_J_u + 2, _RADIATIVE_TWO_OMEGA))
        )
    if n_upper >= 1:  # lower level with J one below
        channels.append((n_upper - 1, _honl_london_pair(two_J_u, _RADIATIVE_TWO_OMEGA)))
    return channels


@lru_cache(maxsize=16)
def build_einstein_coefficients(c: MolecularConstants) -> EinsteinCoefficients:
    """Construct the radiative coefficient tables for the level set.

    The vibrational dipole is fixed by requiring that the total spontaneous
    rate out of (v = 1, lowest rotational level) equals ``VIB_DECAY_TARGET``
    times ``mu_vib_scale`` squared; the rotational dipole is
    ``mu_rot_scale`` times the vibrational one.  Both knobs default to the
    anchored calibration.
    """
    levels = radiative_levels(c)

    # Calibration: decay channels of (v=1, n=0) depend only on omega_e, B_e.
    base_rate = 0.0
    for n_low, strength in _vibrational_channels(0, c.J_count):
        gap_cm = c.omega_e - c.B_e * n_low * (n_low + 1)
        nu = gap_cm * _HZ_PER_CM
        base_rate += _A_PREFACTOR * nu**3 * strength / (_RADIATIVE_TWO_OMEGA + 1)
    mu_vib = math.sqrt(VIB_DECAY_TARGET / base_rate) * c.mu_vib_scale
    mu_rot = c.mu_rot_scale * mu_vib

    A: dict[tuple[RoVibState, RoVibState], float] = {}
    B: dict[tuple[RoVibState, RoVibState], float] = {}
    freqs: dict[tuple[RoVibState, RoVibState], float] = {}

    def add_pair(upper: RoVibState, lower: RoVibState, strength: float, mu: float):
        nu = (level_energy(upper, c) - level_energy(lower, c)) * _HZ_PER_CM
        rate = _A_PREFACTOR * nu**3 * mu**2 * strength / degeneracy(upper)
        A[(upper, lower)] = rate
        B[(upper, lower)] = rate * _const.c**3 / (8.0 * math.pi * _const.h * nu**3)
        freqs[(upper, lower)] = nu

    for v in range(c.v_max + 1):
        # Pure rotational lines within one vibrational level, Delta J = -1.
        for n in range(1, c.J_count):
            upper = RoVibState(v=v, two_omega=_RADIATIVE_TWO_OMEGA,
                               two_J=_RADIATIVE_TWO_OMEGA + 2 * n)
            lower = RoVibState(v=v, two_omega=_RADIATIVE_TWO_OMEGA,
                               two_J=_RADIATIVE_TWO_OMEGA + 2 * (n - 1))
            add_pair(upper, lower,
                     _honl_london_pair(upper.two_J, _RADIATIVE_TWO_OMEGA), mu_rot)
        # Vibrational band v -> v-1 with P, Q, R rotational structure.
        if v >= 1:
            for n_u in range(c.J_count):
                upper = RoVibState(v=v, two_omega=_RADIATIVE_TWO_OMEGA,
                                   two_J=_RADIATIVE_TWO_OMEGA + 2 * n_u)
                for n_l, strength in _vibrational_channels(n_u, c.J_count):
                    lower = RoVibState(v=v - 1, two_omega=_RADIATIVE_TWO_OMEGA,
                                       two_J=_RADIATIVE_TWO_OMEGA + 2 * n_l)
                    add_pair(upper, lower, strength, mu_vib)

    return EinsteinCoefficients(
        levels=tuple(levels), A=A, B=B, frequencies=freqs,
        mu_vib=mu_vib, mu_rot=mu_rot,
    )


@dataclass(frozen=True)
class RateMatrix:
    """Master-equation generator dp/dt = G p over the radiative level set.

    Columns sum to zero (probability conservation) and all off-diagonal
    entries are non-negative; the Boltzmann distribution at the field
    temperature is stationary by detailed balance.
    """

    generator: np.ndarray
    level_index: tuple[RoVibState, ...]
    temperature: float

    def __post_init__(self) -> None:
        gen = self.generator
        n = len(self.level_index)
        if gen.shape != (n, n):
            raise ValueError(f"generator shape {gen.shape} does not match {n} levels")
        off = gen - np.diag(np.diag(gen))
        if off.min() < 0.0:
            raise ValueError("negative off-diagonal rate in generator")
        scale = np.abs(np.diag(gen)).max() or 1.0
        residual = np.abs(gen.sum(axis=0)).max() / scale
        if residual > 1e-12:
            raise ValueError(f"generator columns sum to {residual:.3e} relative, expected 0")
        object.__setattr__(
            self, "_index", {state: i for i, state in enumerate(self.level_index)}
        )

    def index_of(self, state: RoVibState) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise ValueError(f"{state.label()} is not in the radiative level set") from None


def build_rate_matrix(c: MolecularConstants, T: float) -> RateMatrix:
    """Generator combining spontaneous decay with thermal pumping at T.

    For each allowed pair the downward rate is A (1 + n_bar) and the upward
    rate A n_bar g_u / g_l, with n_bar the Planck occupation at the pair
    frequency; T = 0 leaves only spontaneous decay.
    """
    if T < 0.0:
        raise ValueError(f"temperature must be >= 0, got {T!r}")
    coeffs = build_einstein_coefficients(c)
    levels = coeffs.levels
    index = {state: i for i, state in enumerate(levels)}
    gen = np.zeros((len(levels), len(levels)))
    for (upper, lower), rate in coeffs.A.items():
        n_bar = photon_occupation(coeffs.frequencies[(upper, lower)], T)
        iu, il = index[upper], index[lower]
        gen[il, iu] += rate * (1.0 + n_bar)
        gen[iu, il] += rate * n_bar * degeneracy(upper) / degeneracy(lower)
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=0))
    return RateMatrix(generator=gen, level_index=tuple(levels), temperature=T)


def restricted_boltzmann(c: MolecularConstants, T: float) -> StateDistribution:
    """Boltzmann distribution conditioned on the radiative level set.

    This is the exact stationary vector of :func:`build_rate_matrix` at the
    same temperature.
    """
    levels = radiative_levels(c)
    energies = np.array([level_energy(s, c) for s in levels])
    weights = np.array([float(degeneracy(s)) for s in levels])
    boltz = weights * np.exp(-energies / (KB_CM * T))
    boltz /= boltz.sum()
    return StateDistribution(dict(zip(levels, boltz.tolist())), temperature=T)


@dataclass(frozen=True)
class PopulationTrajectory:
    """Time-resolved populations over the radiative level set."""

    times: np.ndarray
    level_index: tuple[RoVibState, ...]
    populations: np.ndarray  # shape (n_levels, n_times), renormalized
    norm_drift: np.ndarray  # raw snapshot sums minus one

    @cached_property
    def distributions(self) -> list[StateDistribution]:
        return [
            StateDistribution(
                dict(zip(self.level_index, self.populations[:, k].tolist()))
            )
            for k in range(len(self.times))
        ]

    def population_of(self, state: RoVibState) -> np.ndarray:
        """Population of one level at every snapshot time."""
        idx = self.level_index.index(state)
        return self.populations[idx]

    def to_csv(self, path) -> None:
        """Export as CSV: time_s then one column per tracked level."""
        header = ["time_s"] + [state.label() for state in self.level_index]
        rows = (
            [float(t)] + [float(x) for x in self.populations[:, k]]
            for k, t in enumerate(self.times)
        )
        write_table(path, header, rows)


def _as_vector(init: StateDistribution, levels: Sequence[RoVibState]) -> np.ndarray:
    index = {state: i for i, state in enumerate(levels)}
    p0 = np.zeros(len(levels))
    for state, p in init.populations.items():
        key = state if state.parity is None else RoVibState(state.v, state.two_omega, state.two_J)
        if key in index:
            p0[index[key]] += p
        elif p > 0.0:
            raise ValueError(
                f"initial population on {state.label()} which is outside the level set"
            )
    return p0


def evolve_populations(
    m: RateMatrix,
    init: StateDistribution,
    duration: float,
    tol: float = 1e-8,
    *,
    snapshots: int = 201,
) -> PopulationTrajectory:
    """Integrate dp/dt = G p from ``init`` over ``duration`` seconds.

    Adaptive explicit Runge-Kutta; such schemes preserve the linear
    invariant sum(p) to roundoff, and the per-snapshot drift is checked
    against ``tol`` anyway.  Raises :class:`IntegrationError` if the solver
    fails, loses normalization beyond ``tol``, or produces populations
    below -tol.
    """
    if duration < 0.0:
        raise ValueError(f"duration must be >= 0, got {duration!r}")
    gen = m.generator
    p0 = _as_vector(init, m.level_index)
    times = np.linspace(0.0, duration, snapshots)
    if duration == 0.0:
        raw = np.tile(p0[:, None], (1, snapshots))
    else:
        sol = solve_ivp(
            lambda t, p: gen @ p,
            (0.0, duration),
            p0,
            method="DOP853",
            t_eval=times,
            rtol=tol,
            atol=tol * 1e-3,
        )
        if not sol.success:
            last = float(sol.t[-1]) if sol.t.size else 0.0
            raise IntegrationError(f"solver failed: {sol.message}", last_time=last)
        raw = sol.y
    sums = raw.sum(axis=0)
    drift = sums - 1.0
    worst = int(np.abs(drift).argmax())
    if abs(drift[worst]) > tol:
        raise IntegrationError(
            f"normalization drifted by {drift[worst]:.3e}", last_time=float(times[worst])
        )
    if raw.min() < -tol:
        k = int(np.unravel_index(raw.argmin(), raw.shape)[1])
        raise IntegrationError(
            f"population dipped to {raw.min():.3e}", last_time=float(times[k])
        )
    cleaned = np.clip(raw, 0.0, None)
    cleaned /= cleaned.sum(axis=0, keepdims=True)
    return PopulationTrajectory(
        times=times,
        level_index=m.level_index,
        populations=cleaned,
        norm_drift=drift,
    )


@lru_cache(maxsize=64)
def ground_state_residence_lifetime(
    c: MolecularConstants, T: float, *, fit_decades: float = 2.0
) -> float:
    """1/e time for leaving the rotational ground level, in seconds.

    Starts from unit occupation of (v = 0, Omega = 3/2, J = 3/2), evolves a
    generator with the return paths into that level removed (so only first
    departures count), and fits a single exponential over the first
    ``fit_decades`` decades of decay.
    """
    m = build_rate_matrix(c, T)
    g = m.index_of(ROT_GROUND)
    gen = m.generator.copy()
    # Remove inflow into the ground level; its outflow column is untouched.
    kept = gen[g, g]
    gen[g, :] = 0.0
    gen[g, g] = kept
    gamma_guess = -kept
    if gamma_guess <= 0.0:
        raise ValueError("ground level has no departure channels at this temperature")
    horizon = math.log(10.0**fit_decades) / gamma_guess * 1.05
    times = np.linspace(0.0, horizon, 161)
    p0 = np.zeros(len(m.level_index))
    p0[g] = 1.0
    sol = solve_ivp(
        lambda t, p: gen @ p, (0.0, horizon), p0,
        method="DOP853", t_eval=times, rtol=1e-10, atol=1e-12,
    )
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"solver failed: {sol.message}", last_time=last)
    survival = sol.y[g]
    mask = survival >= 10.0 ** (-fit_decades)
    slope = np.polyfit(times[mask], np.log(survival[mask]), 1)[0]
    return float(-1.0 / slope)


def rethermalization_time(
    c: MolecularConstants,
    T: float,
    start: RoVibState | None = None,
    *,
    target_fraction: float = 0.63,
    duration: float = 600.0,
) -> float:
    """Time for the ground-level population to reach a fraction of thermal.

    Starting from unit occupation of ``start`` (default: the most probable
    rotational level at T), evolves the full generator and returns the
    first time the (v = 0, J = 3/2) population crosses ``target_fraction``
    of its stationary value within the radiative set.
    """
    if start is None:
        start = most_probable_rotational_state(c, T)
    m = build_rate_matrix(c, T)
    init = StateDistribution({start: 1.0})
    traj = evolve_populations(m, init, duration, snapshots=601)
    target = target_fraction * restricted_boltzmann(c, T).probability(ROT_GROUND)
    pg = traj.population_of(ROT_GROUND)
    above = np.nonzero(pg >= target)[0]
    if above.size == 0:
        raise ValueError(
            f"ground population did not reach {target:.3e} within {duration} s"
        )
    k = int(above[0])
    if k == 0:
        return 0.0
    # Linear interpolation between the bracketing snapshots.
    t0, t1 = traj.times[k - 1], traj.times[k]
    f0, f1 = pg[k - 1], pg[k]
    return float(t0 + (target - f0) / (f1 - f0) * (t1 - t0))


def leave_probability_per_cycle(
    c: MolecularConstants,
    T: float,
    cycle: float,
    *,
    collision_rate: float = 0.0,
) -> float:
    """Probability of leaving the rotational ground level in one cycle.

    Radiative departures happen at the inverse residence lifetime; an
    optional collisional channel adds ``collision_rate`` times the chance
    that a re-thermalizing collision lands outside the ground level.
    """
    if not cycle > 0.0:
        raise ValueError(f"cycle must be positive, got {cycle!r}")
    if collision_rate < 0.0:
        raise ValueError(f"collision_rate must be >= 0, got {collision_rate!r}")
    gamma = 1.0 / ground_state_residence_lifetime(c, T)
    if collision_rate > 0.0:
        gamma += collision_rate * (1.0 - thermal_population(ROT_GROUND, c, T))
    return float(-math.expm1(-gamma * cycle))


def lifetime_temperature_sweep(
    c: MolecularConstants, temperatures: Sequence[float]
) -> list[tuple[float, float, float]]:
    """Rows (T, residence lifetime, thermal ground population) per T."""
    rows = []
    for T in temperatures:
        rows.append(
            (
                float(T),
                ground_state_residence_lifetime(c, T),
                thermal_population(ROT_GROUND, c, T),
            )
        )
    return rows
