"""Avoided-crossing dynamics of the dipole-phonon coupling.

A single excitation-conserving doublet {|f, 0>, |e, 1>} of the
Jaynes-Cummings interaction suffices for a ground-state-cooled mode: the
2x2 Hamiltonian carries detuning +-(omega_mol - omega_q)/2 on the
diagonal and g_q/2 off the diagonal.  A linear sweep of the trap
frequency omega_q through resonance transfers population between the
diabatic states; the analytic Landau-Zener formula serves as an
independent oracle for the numerical integration.

Also includes the off-resonant carrier excitation bound used to estimate
how much a strong far-detuned drive leaks into the excited state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .bbr_kinetics import IntegrationError

__all__ = [
    "SweepConfig",
    "TwoLevelAmplitudes",
    "TransferWindowMap",
    "jc_coupling_matrix",
    "evolve_sweep",
    "evolve_sweep_amplitudes",
    "landau_zener_oracle",
    "transfer_window_map",
    "offres_carrier_excitation",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SweepConfig:
    """Linear trap-frequency sweep parameters (all angular frequencies).

    Defaults: sweep from 2 pi x 492 kHz down to 2 pi x 410 kHz at
    2 pi x 10 kHz per ms, with the molecular resonance at 2 pi x 450 kHz
    and a vacuum Rabi coupling of 2 pi x 2.6 kHz.
    """

    omega_start: float = _TWO_PI * 492e3
    omega_end: float = _TWO_PI * 410e3
    ramp_rate: float = _TWO_PI * 10e3 / 1e-3
    omega_mol: float = _TWO_PI * 450e3
    g_q: float = _TWO_PI * 2.6e3
    time_step: float | None = None

    def __post_init__(self) -> None:
        if not self.ramp_rate > 0.0:
            raise ValueError(f"ramp_rate must be positive, got {self.ramp_rate!r}")
        if self.omega_start == self.omega_end:
            raise ValueError("omega_start and omega_end must differ")
        if self.g_q < 0.0:
            raise ValueError(f"g_q must be >= 0, got {self.g_q!r}")
        if self.time_step is not None and not self.time_step > 0.0:
            raise ValueError("time_step must be positive when set")

    @property
    def duration(self) -> float:
        return abs(self.omega_end - self.omega_start) / self.ramp_rate

    @property
    def direction(self) -> float:
        return 1.0 if self.omega_end > self.omega_start else -1.0

    def omega_q(self, t: float) -> float:
        """Instantaneous trap frequency at time t into the sweep."""
        return self.omega_start + self.direction * self.ramp_rate * t


@dataclass(frozen=True)
class TwoLevelAmplitudes:
    """Complex amplitudes of |f, n> and |e, n+1> for one doublet."""

    amp_f_n: complex
    amp_e_np1: complex

    @property
    def norm(self) -> float:
        return abs(self.amp_f_n) ** 2 + abs(self.amp_e_np1) ** 2

    @property
    def transfer_probability(self) -> float:
        return abs(self.amp_e_np1) ** 2


def jc_coupling_matrix(omega_q: float, cfg: SweepConfig) -> np.ndarray:
    """2x2 Hamiltonian (rad/s) in the {|f,0>, |e,1>} basis at fixed omega_q."""
    delta = cfg.omega_mol - omega_q
    return np.array(
        [[0.5 * delta, 0.5 * cfg.g_q], [0.5 * cfg.g_q, -0.5 * delta]]
    )


def _integrate(cfg: SweepConfig, frame: str) -> np.ndarray:
    duration = cfg.duration
    # Phase of the instantaneous diagonal: theta(t) = integral of delta.
    d0 = cfg.omega_mol - cfg.omega_start
    slope = cfg.direction * cfg.ramp_rate

    def theta(t: float) -> float:
        return d0 * t - 0.5 * slope * t * t

    if frame == "rotating":
        # Interaction picture with respect to the instantaneous diagonal;
        # only the coupling remains, dressed with the accumulated phase.
        def rhs(t, y):
            phase = np.exp(1j * theta(t))
            half_g = 0.5 * cfg.g_q
            return [
                -1j * half_g * phase * y[1],
                -1j * half_g * np.conj(phase) * y[0],
            ]

    elif frame == "fixed":
        def rhs(t, y):
            h = jc_coupling_matrix(cfg.omega_q(t), cfg)
            return -1j * (h @ y)

    else:
        raise ValueError(f"frame must be 'rotating' or 'fixed', got {frame!r}")

    y0 = np.array([1.0 + 0.0j, 0.0 + 0.0j])
    max_step = cfg.time_step if cfg.time_step is not None else np.inf
    sol = solve_ivp(
        rhs,
        (0.0, duration),
        y0,
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
        max_step=max_step,
    )
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"sweep integration failed: {sol.message}", last_time=last)
    y_end = sol.y[:, -1]
    norm = float(abs(y_end[0]) ** 2 + abs(y_end[1]) ** 2)
    if abs(norm - 1.0) > 1e-6:
        raise IntegrationError(
            f"norm drifted to {norm:.8f} during the sweep", last_time=duration
        )
    return y_end


def evolve_sweep_amplitudes(cfg: SweepConfig, *, frame: str = "rotating") -> TwoLevelAmplitudes:
    """Final doublet amplitudes after the full sweep, starting in |f, 0>."""
    y_end = _integrate(cfg, frame)
    return TwoLevelAmplitudes(amp_f_n=complex(y_end[0]), amp_e_np1=complex(y_end[1]))


def evolve_sweep(cfg: SweepConfig, *, frame: str = "rotating") -> float:
    """Transfer probability |<e,1|psi(end)>|^2 of the swept crossing.

    The two frames are physically identical (they differ by a diagonal
    phase); the fixed frame is kept as a cross-validation path.
    """
    return evolve_sweep_amplitudes(cfg, frame=frame).transfer_probability


def landau_zener_oracle(g_q: float, ramp_rate: float) -> float:
    """Analytic transfer probability 1 - exp(-2 pi (g_q/2)^2 / ramp_rate)."""
    if g_q < 0.0:
        raise ValueError(f"g_q must be >= 0, got {g_q!r}")
    if not ramp_rate > 0.0:
        raise ValueError(f"ramp_rate must be positive, got {ramp_rate!r}")
    return -math.expm1(-_TWO_PI * (0.5 * g_q) ** 2 / ramp_rate)


@dataclass(frozen=True)
class TransferWindowMap:
    """Transfer probabilities over (omega_mol, g_q) grids.

    ``transfer[i, j]`` is the probability at ``omega_mol_values[i]`` and
    ``g_q_values[j]``.  ``window`` is the contiguous omega_mol interval
    with transfer above the threshold at the g_q column closest to the
    configured coupling, or None when no grid point clears it.
    """

    omega_mol_values: np.ndarray
    g_q_values: np.ndarray
    transfer: np.ndarray
    threshold: float
    window: tuple[float, float] | None

    def rows(self):
        """(omega_mol_Hz, g_q_Hz, transfer) rows for CSV export."""
        for i, wm in enumerate(self.omega_mol_values):
            for j, gq in enumerate(self.g_q_values):
                yield (float(wm) / _TWO_PI, float(gq) / _TWO_PI, float(self.transfer[i, j]))


def transfer_window_map(
    cfg: SweepConfig,
    omega_mol_values: Sequence[float],
    g_q_values: Sequence[float] | None = None,
    *,
    threshold: float = 0.99,
) -> TransferWindowMap:
    """Evaluate the sweep over a grid and report the high-fidelity window.

    ``omega_mol_values`` and ``g_q_values`` are angular frequencies; the
    g_q grid defaults to the configured coupling alone.
    """
    wm = np.asarray(list(omega_mol_values), dtype=float)
    gq = np.asarray(
        list(g_q_values) if g_q_values is not None else [cfg.g_q], dtype=float
    )
    if wm.size == 0 or gq.size == 0:
        raise ValueError("omega_mol and g_q grids must be nonempty")
    transfer = np.empty((wm.size, gq.size))
    for j, g in enumerate(gq):
        for i, mol in enumerate(wm):
            transfer[i, j] = evolve_sweep(replace(cfg, omega_mol=float(mol), g_q=float(g)))
    ref_col = int(np.argmin(np.abs(gq - cfg.g_q)))
    above = np.nonzero(transfer[:, ref_col] > threshold)[0]
    window = None
    if above.size:
        window = (float(wm[above[0]]), float(wm[above[-1]]))
    return TransferWindowMap(
        omega_mol_values=wm,
        g_q_values=gq,
        transfer=transfer,
        threshold=threshold,
        window=window,
    )


def offres_carrier_excitation(
    rabi: float, detuning: float, pulse: float, carrier_noise: float
) -> float:
    """Worst-case off-resonant excitation of a strong detuned drive.

    Maximizes the two-level excitation Omega^2 / (Omega^2 + Delta^2) *
    sin^2(sqrt(Omega^2 + Delta^2) t / 2) over pulse times up to ``pulse``
    and over carrier offsets within +-``carrier_noise`` of the nominal
    detuning.  All frequencies are angular.
    """
    if detuning == 0.0:
        raise ValueError("detuning must be nonzero")
    if rabi < 0.0 or carrier_noise < 0.0:
        raise ValueError("rabi and carrier_noise must be >= 0")
    if not pulse > 0.0:
        raise ValueError(f"pulse must be positive, got {pulse!r}")
    if rabi == 0.0:
        return 0.0
    best = 0.0
    for offset in np.linspace(-carrier_noise, carrier_noise, 181):
        delta = detuning + offset
        general_rabi = math.hypot(rabi, delta)
        envelope = math.sin(min(0.5 * general_rabi * pulse, 0.5 * math.pi)) ** 2
        best = max(best, (rabi / general_rabi) ** 2 * envelope)
    return best
