"""Electron dephasing, imperfect polarization and the Bloch-length noise budget.

Coherence decays with a Gaussian envelope ``exp(-(t/T)^2)``: ``T2`` applies
while dynamical decoupling protects the electron, ``T2*`` during the short
unprotected gaps between gates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .gates import GateOp, SIGMA, I2, identity
from .qmath import DensityMatrix, entropy_from_bloch

US = 1e-6


@dataclass(frozen=True)
class NoiseParams:
    """Dephasing and polarization parameters; all times in seconds."""

    T2: float = 378 * US
    T2_star: float = 2.5 * US
    protected_time: float = 190 * US
    unprotected_gaps: float = 1.2 * US
    p0: float = 0.84

    def __post_init__(self):
        for name in ("T2", "T2_star", "protected_time", "unprotected_gaps"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        if self.T2 == 0 or self.T2_star == 0:
            raise ValueError("coherence times must be positive")
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")

    def to_dict(self) -> dict:
        return asdict(self)


def decay_factor(t: float, T: float) -> float:
    """Gaussian coherence envelope ``exp(-(t/T)^2)``; ``T = inf`` gives 1."""
    if not T > 0:
        raise ValueError(f"coherence time must be positive, got {T}")
    if t < 0:
        raise ValueError(f"elapsed time must be non-negative, got {t}")
    if np.isinf(T):
        return 1.0
    return float(np.exp(-((t / T) ** 2)))


def incremental_decay(t_before: float, dt: float, T: float) -> float:
    """Factor that extends a Gaussian decay from ``t_before`` to ``t_before + dt``.

    Chaining these over consecutive intervals multiplies out to
    ``decay_factor(total, T)`` exactly.
    """
    if np.isinf(T):
        return 1.0
    return float(np.exp(-((t_before + dt) ** 2 - t_before ** 2) / T ** 2))


def dephasing_channel(lam: float, target: str) -> GateOp:
    """Phase damping that scales the target's off-diagonal elements by ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"dephasing factor must lie in [0, 1], got {lam}")
    k0 = np.sqrt((1 + lam) / 2) * I2
    k1 = np.sqrt((1 - lam) / 2) * SIGMA["Z"]
    return GateOp("kraus", (k0, k1), (target,), name=f"DEPHASE({lam:.6g})_{target}")


def imperfect_polarization(rho0: DensityMatrix, p0: float) -> DensityMatrix:
    """Mix a single-qubit state with the identity: ``p0 rho0 + (1 - p0) I/2``."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    if rho0.dims != (2,):
        raise ValueError(f"imperfect polarization is defined for one qubit, got dims {rho0.dims}")
    return DensityMatrix(p0 * rho0.data + (1 - p0) * I2 / 2, rho0.labels, rho0.dims)


@dataclass(frozen=True)
class NoiseBudget:
    protected_decay: float
    gap_decay: float
    L_remaining: float
    S_final: float
    S_initial_ref: float
    delta_S: float


def exp3_noise_budget(params: NoiseParams = NoiseParams(), S_initial: float = 0.90) -> NoiseBudget:
    """Closed-form Bloch-length and entropy estimate for the entangled-demon run.

    ``S_initial`` is the measured starting entropy to compare against.
    """
    a = decay_factor(params.protected_time, params.T2)
    b = decay_factor(params.unprotected_gaps, params.T2_star)
    L = a * b
    S = entropy_from_bloch(L)
    return NoiseBudget(a, b, L, S, S_initial, S_initial - S)


@dataclass(frozen=True)
class Unsubtracted:
    S0: float
    Sf: float
    delta_S: float


def unsubtracted_entropies(L0: float, Lf: float, p0: float) -> Unsubtracted:
    """Entropies before background subtraction, where each Bloch length shrinks by ``p0``."""
    for name, v in (("L0", L0), ("Lf", Lf), ("p0", p0)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    s0 = entropy_from_bloch(p0 * L0)
    sf = entropy_from_bloch(p0 * Lf)
    return Unsubtracted(s0, sf, s0 - sf)


def insert_dephasing(schedule: Sequence[GateOp], params: NoiseParams, target: str = "E") -> list[GateOp]:
    """Follow each timed gate in ``schedule`` with a dephasing channel on ``target``.

    Protected time advances a ``T2`` clock and unprotected time a ``T2*``
    clock; each channel carries the incremental Gaussian decay of its own
    clock, so the product over the whole schedule equals
    ``decay_factor(protected total, T2) * decay_factor(unprotected total, T2*)``.
    Items that are not gates (stage marks) pass through untouched.
    """
    out: list = []
    clocks = {True: 0.0, False: 0.0}
    for g in schedule:
        out.append(g)
        if not isinstance(g, GateOp) or g.duration <= 0:
            continue
        T = params.T2 if g.protected else params.T2_star
        lam = incremental_decay(clocks[g.protected], g.duration, T)
        clocks[g.protected] += g.duration
        out.append(dephasing_channel(lam, target))
    return out


def schedule_totals(schedule: Sequence[GateOp]) -> tuple[float, float]:
    """(protected, unprotected) time summed over a schedule."""
    gates = [g for g in schedule if isinstance(g, GateOp)]
    prot = sum(g.duration for g in gates if g.protected)
    free = sum(g.duration for g in gates if not g.protected)
    return prot, free


def rescale_schedule(schedule: Sequence[GateOp], protected_total: float,
                     unprotected_total: float) -> list[GateOp]:
    """Scale gate durations so the two time budgets hit the requested totals."""
    prot, free = schedule_totals(schedule)
    out = []
    for g in schedule:
        if not isinstance(g, GateOp):
            out.append(g)
            continue
        total = prot if g.protected else free
        target = protected_total if g.protected else unprotected_total
        scale = target / total if total > 0 else 0.0
        out.append(g.with_timing(g.duration * scale, g.protected))
    return out


def gap(label: str, duration: float) -> GateOp:
    """Unprotected idle interval on ``label``."""
    return identity(label, duration=duration, protected=False, name=f"GAP_{label}")

