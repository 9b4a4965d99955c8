"""Level structure and thermal populations of a trapped CaO+ molecular ion.

The electronic ground term is a 2-Pi state split by spin-orbit coupling
into Omega = 3/2 and Omega = 1/2 fine-structure manifolds, each carrying a
harmonic vibrational ladder and a rigid-rotor rotational ladder.  Energies
are expressed in cm^-1 as

    E(v, Omega, n) = omega_e * v + A_so * [Omega in upper manifold]
                     + B_e * n * (n + 1)

where ``n`` counts rotational quanta above the floor of a manifold; the
floor level has J = Omega, so a level with n quanta carries J = Omega + n.
The global minimum of the truncated set sits at zero energy.

The Omega-doublet parity splitting (hundreds of kHz) lies some seven
orders of magnitude below k_B T and is dropped from thermal energies; the
two parity components instead contribute a uniform statistical factor of
two that cancels in every population ratio.

Half-integer angular momenta are stored doubled (``two_J`` = 2J,
``two_omega`` = 2*Omega) so quantum-number arithmetic stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy import constants as _const

__all__ = [
    "KB_CM",
    "PARITY_DOUBLET",
    "RoVibState",
    "MolecularConstants",
    "StateDistribution",
    "ROT_GROUND",
    "level_energy",
    "degeneracy",
    "enumerate_levels",
    "partition_function",
    "thermal_population",
    "manifold_population",
    "thermal_distribution",
    "most_probable_rotational_state",
    "constants_to_config",
    "constants_from_config",
]

# Boltzmann constant expressed in cm^-1 per kelvin.
KB_CM = _const.k / (_const.h * _const.c * 100.0)

# Each (v, Omega, J) level is a near-degenerate parity doublet; the factor is
# uniform across the level set and cancels in all population ratios.
PARITY_DOUBLET = 2


@dataclass(frozen=True)
class RoVibState:
    """One rovibrational level (v, Omega, J), optionally parity-resolved.

    Parameters
    ----------
    v : int
        Vibrational quantum number, >= 0.
    two_omega : int
        Doubled fine-structure projection; 1 or 3 for Omega = 1/2 or 3/2.
    two_J : int
        Doubled total angular momentum; odd and >= two_omega.
    parity : str, optional
        'e' or 'f' to pick one component of the parity doublet.  Leave unset
        to address the full doublet (the thermal model treats the two
        components as exactly degenerate).
    """

    v: int
    two_omega: int
    two_J: int
    parity: str | None = None

    def __post_init__(self) -> None:
        if self.v < 0:
            raise ValueError(f"vibrational quantum number must be >= 0, got v={self.v}")
        if self.two_omega not in (1, 3):
            raise ValueError(f"two_omega must be 1 or 3, got {self.two_omega}")
        if self.two_J % 2 == 0 or self.two_J < self.two_omega:
            raise ValueError(
                f"two_J must be an odd integer >= two_omega, got two_J={self.two_J}"
            )
        if self.parity not in (None, "e", "f"):
            raise ValueError(f"parity must be 'e' or 'f', got {self.parity!r}")

    @property
    def J(self) -> float:
        return self.two_J / 2.0

    @property
    def omega(self) -> float:
        return self.two_omega / 2.0

    @property
    def rotational_quanta(self) -> int:
        """Rotational quanta above the manifold floor (J = Omega + quanta)."""
        return (self.two_J - self.two_omega) // 2

    def label(self) -> str:
        """Compact text key with doubled half-integers, e.g. ``v0.O3.J35``."""
        base = f"v{self.v}.O{self.two_omega}.J{self.two_J}"
        return base if self.parity is None else f"{base}.{self.parity}"

    @classmethod
    def from_label(cls, text: str) -> "RoVibState":
        """Inverse of :meth:`label`."""
        parts = text.strip().split(".")
        if len(parts) not in (3, 4):
            raise ValueError(f"malformed state label {text!r}")
        try:
            v = int(parts[0].removeprefix("v"))
            two_omega = int(parts[1].removeprefix("O"))
            two_J = int(parts[2].removeprefix("J"))
        except ValueError as exc:
            raise ValueError(f"malformed state label {text!r}") from exc
        parity = parts[3] if len(parts) == 4 else None
        return cls(v=v, two_omega=two_omega, two_J=two_J, parity=parity)


#: Detection target of the experiment: the lowest level of the Omega = 3/2
#: manifold, J = 3/2 in the vibrational ground state.
ROT_GROUND = RoVibState(v=0, two_omega=3, two_J=3)


@dataclass(frozen=True)
class MolecularConstants:
    """Spectroscopic constants plus truncation and dipole calibration knobs.

    Units: ``omega_e``, ``A_so`` and ``B_e`` in cm^-1; ``omega_mol`` (the
    ground-state Omega-doublet splitting) and ``g_q_ground`` (the vacuum
    Rabi coupling to the phonon mode) in rad/s.

    ``mu_vib_scale`` multiplies the vibrational transition dipole used by
    the radiative-rate builder and ``mu_rot_scale`` sets the rotational
    dipole relative to the vibrational one.  ``omega_half_lower`` inverts
    the fine-structure ordering; by default Omega = 3/2 is the lower
    manifold.
    """

    omega_e: float = 634.0
    A_so: float = 130.0
    B_e: float = 0.37
    omega_mol: float = 2 * math.pi * 450e3
    g_q_ground: float = 2 * math.pi * 2.6e3
    v_max: int = 1
    J_count: int = 70
    mu_vib_scale: float = 1.0
    mu_rot_scale: float = 10.0
    omega_half_lower: bool = False

    def __post_init__(self) -> None:
        if self.omega_e <= 0 or self.A_so <= 0 or self.B_e <= 0:
            raise ValueError("omega_e, A_so and B_e must all be positive")
        if self.v_max < 0:
            raise ValueError(f"v_max must be >= 0, got {self.v_max}")
        if self.J_count < 1:
            raise ValueError(f"J_count must be >= 1, got {self.J_count}")
        if self.mu_vib_scale <= 0 or self.mu_rot_scale <= 0:
            raise ValueError("dipole scale factors must be positive")

    @property
    def lower_two_omega(self) -> int:
        return 1 if self.omega_half_lower else 3

    @property
    def upper_two_omega(self) -> int:
        return 3 if self.omega_half_lower else 1


# Config-file keys with their parsers; see constants_from_config.
_CONFIG_FIELDS: dict[str, type] = {
    "omega_e": float,
    "A_so": float,
    "B_e": float,
    "omega_mol": float,
    "g_q_ground": float,
    "v_max": int,
    "J_count": int,
    "mu_vib_scale": float,
    "mu_rot_scale": float,
    "omega_half_lower": bool,
}


def constants_to_config(c: MolecularConstants) -> dict[str, object]:
    """Flatten constants into a key-value mapping for config serialization."""
    return {name: getattr(c, name) for name in _CONFIG_FIELDS}


def constants_from_config(mapping: Mapping[str, object]) -> MolecularConstants:
    """Build constants from a key-value mapping, applying defaults.

    Unknown keys raise ``ValueError`` so typos in config files fail loudly.
    """
    kwargs: dict[str, object] = {}
    for key, raw in mapping.items():
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown molecular-constants key {key!r}")
        caster = _CONFIG_FIELDS[key]
        if caster is bool and isinstance(raw, str):
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "0", "1"):
                raise ValueError(f"key {key!r}: expected a boolean, got {raw!r}")
            kwargs[key] = lowered in ("true", "1")
        else:
            kwargs[key] = caster(raw)
    return MolecularConstants(**kwargs)


@dataclass(frozen=True)
class StateDistribution:
    """Probability table over rovibrational levels at a given temperature.

    Entries must be non-negative and sum to one within 1e-9.
    """

    populations: Mapping[RoVibState, float]
    temperature: float | None = None

    def __post_init__(self) -> None:
        total = 0.0
        for state, p in self.populations.items():
            if p < 0.0:
                raise ValueError(f"negative population {p!r} for {state.label()}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"populations sum to {total!r}, expected 1 within 1e-9")

    def probability(self, state: RoVibState) -> float:
        """Population of one level; zero if the level is not tabulated."""
        return self.populations.get(state, 0.0)

    def marginal(self, *, v: int | None = None, two_omega: int | None = None) -> float:
        """Summed population over all levels matching the given filters."""
        total = 0.0
        for state, p in self.populations.items():
            if v is not None and state.v != v:
                continue
            if two_omega is not None and state.two_omega != two_omega:
                continue
            total += p
        return total

    def argmax(self) -> RoVibState:
        """Most populated level of the table."""
        return max(self.populations, key=self.populations.__getitem__)


def _check_temperature(T: float) -> None:
    if not (isinstance(T, (int, float)) and math.isfinite(T)) or T <= 0.0:
        raise ValueError(f"temperature must be a positive finite number, got {T!r}")


def _check_in_truncation(state: RoVibState, c: MolecularConstants) -> None:
    if state.v > c.v_max:
        raise ValueError(f"v={state.v} exceeds the truncation v_max={c.v_max}")
    if state.rotational_quanta >= c.J_count:
        raise ValueError(
            f"rotational level {state.rotational_quanta} outside the "
            f"{c.J_count}-level truncation"
        )


def level_energy(state: RoVibState, c: MolecularConstants) -> float:
    """Energy of a level in cm^-1, relative to the lowest level of the set.

    Within one fine-structure manifold consecutive rotational levels are
    spaced by 2 * B_e * (n + 1) where n is the lower level's quantum count;
    the vibrational gap is omega_e and the fine-structure gap A_so.
    """
    _check_in_truncation(state, c)
    n = state.rotational_quanta
    fine = c.A_so if state.two_omega == c.upper_two_omega else 0.0
    return c.omega_e * state.v + fine + c.B_e * n * (n + 1)


def degeneracy(state: RoVibState) -> int:
    """Statistical weight 2J+1 of a single parity component of the level."""
    return state.two_J + 1


def enumerate_levels(
    c: MolecularConstants,
    *,
    two_omega: int | None = None,
    v: int | None = None,
) -> list[RoVibState]:
    """All levels of the truncated set, lower fine-structure manifold first.

    Within each manifold the order is v ascending, then rotational quanta
    ascending, so a single-manifold listing indexes as ``v * J_count + n``.
    Optional filters restrict the listing to one manifold or one vibrational
    level.
    """
    manifolds: Iterable[int] = (c.lower_two_omega, c.upper_two_omega)
    if two_omega is not None:
        if two_omega not in (1, 3):
            raise ValueError(f"two_omega must be 1 or 3, got {two_omega}")
        manifolds = (two_omega,)
    v_values = range(c.v_max + 1) if v is None else (v,)
    levels = []
    for omega2 in manifolds:
        for vv in v_values:
            for n in range(c.J_count):
                levels.append(RoVibState(v=vv, two_omega=omega2, two_J=omega2 + 2 * n))
    return levels


@lru_cache(maxsize=32)
def _level_table(c: MolecularConstants):
    """Cached (states, energies, weights) arrays for the full truncated set."""
    states = tuple(enumerate_levels(c))
    energies = np.array([level_energy(s, c) for s in states])
    weights = np.array([PARITY_DOUBLET * degeneracy(s) for s in states], dtype=float)
    return states, energies, weights


def partition_function(c: MolecularConstants, T: float) -> float:
    """Z = sum of g_i exp(-E_i / k_B T) over the truncated level set."""
    _check_temperature(T)
    _, energies, weights = _level_table(c)
    return float(np.sum(weights * np.exp(-energies / (KB_CM * T))))


def thermal_population(state: RoVibState, c: MolecularConstants, T: float) -> float:
    """Boltzmann probability of one level at temperature T.

    A state without a parity label addresses the whole doublet; with a
    parity label it receives half the doublet weight.
    """
    _check_temperature(T)
    weight = degeneracy(state)
    if state.parity is None:
        weight *= PARITY_DOUBLET
    boltzmann = math.exp(-level_energy(state, c) / (KB_CM * T))
    return weight * boltzmann / partition_function(c, T)


def manifold_population(
    c: MolecularConstants,
    T: float,
    *,
    v: int | None = None,
    two_omega: int | None = None,
) -> float:
    """Thermal probability summed over all levels matching the filters.

    Conditional marginals follow by ratio, e.g. P(Omega = 3/2 | v = 0) =
    ``manifold_population(c, T, v=0, two_omega=3) / manifold_population(c,
    T, v=0)``.
    """
    _check_temperature(T)
    states, energies, weights = _level_table(c)
    mask = np.ones(len(states), dtype=bool)
    if v is not None:
        mask &= np.array([s.v == v for s in states])
    if two_omega is not None:
        mask &= np.array([s.two_omega == two_omega for s in states])
    boltz = weights * np.exp(-energies / (KB_CM * T))
    return float(boltz[mask].sum() / boltz.sum())


def thermal_distribution(c: MolecularConstants, T: float) -> StateDistribution:
    """Full Boltzmann distribution over the truncated level set."""
    _check_temperature(T)
    states, energies, weights = _level_table(c)
    boltz = weights * np.exp(-energies / (KB_CM * T))
    boltz /= boltz.sum()
    return StateDistribution(dict(zip(states, boltz.tolist())), temperature=T)


def most_probable_rotational_state(c: MolecularConstants, T: float) -> RoVibState:
    """Most populated rotational level within (v = 0, lower manifold).

    The doublet factor and the partition function cancel inside one
    manifold, so the argmax needs only relative weights.
    """
    _check_temperature(T)
    omega2 = c.lower_two_omega
    best_n, best_weight = 0, -math.inf
    for n in range(c.J_count):
        two_J = omega2 + 2 * n
        weight = (two_J + 1) * math.exp(-c.B_e * n * (n + 1) / (KB_CM * T))
        if weight > best_weight:
            best_n, best_weight = n, weight
    return RoVibState(v=0, two_omega=omega2, two_J=omega2 + 2 * best_n)
