"""Simulated fluorescence readout, linear-inversion tomography and Monte-Carlo error bars.

Each tomography setting measures one Pauli string on a group of spins.  Basis
rotations bring every factor onto its Z axis, the qubit parities are folded
onto the electron with ideal CNOTs (a SWAP first if the electron is not in the
string's support), and the electron is read out by photon counting.  The
probability ``q`` of finding the electron in ``|0>`` is then
``(1 + <P>) / 2``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .gates import SIGMA, I2, embed, parse_gate
from .qmath import DensityMatrix, PureState, as_density
from .seeding import derive_rng

READOUT = "E"
CI_LEVEL = 0.683
DEFAULT_RESAMPLES = 1000

_PREROTATION = {"X": "RY(-pi/2)", "Y": "RX(pi/2)"}


class TomographyError(ValueError):
    """Raised for malformed settings, datasets or calibrations."""


@dataclass(frozen=True)
class Calibration:
    """Mean photon counts per cycle for electron ``|0>`` and ``|-1>``.

    The defaults give at least 5e4 photons per setting at 4e6 cycles.
    """

    c0: float = 0.0180
    c1: float = 0.0126
    cycles: int = 4_000_000

    def __post_init__(self):
        if not (self.c0 > self.c1 > 0):
            raise TomographyError(f"calibration needs c0 > c1 > 0, got c0={self.c0}, c1={self.c1}")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise TomographyError(f"cycles must be a positive integer, got {self.cycles}")
        object.__setattr__(self, "cycles", int(self.cycles))

    def mixed_reference(self, p0: float) -> "Calibration":
        """Calibration measured on reference states diluted as ``p0 rho + (1 - p0) I/2``."""
        mid = 0.5 * (self.c0 + self.c1)
        return Calibration(p0 * self.c0 + (1 - p0) * mid, p0 * self.c1 + (1 - p0) * mid, self.cycles)

    def to_dict(self) -> dict:
        return {"c0": self.c0, "c1": self.c1, "cycles": self.cycles}


@dataclass(frozen=True)
class Setting:
    """One measurement configuration: a Pauli string and the gates that read it out."""

    pauli: str
    labels: tuple[str, ...]
    gates: tuple[str, ...]

    @property
    def name(self) -> str:
        return "".join(self.pauli)

    def to_dict(self) -> dict:
        return {"name": self.name, "pauli": self.pauli, "labels": list(self.labels),
                "gates": list(self.gates)}


@dataclass(frozen=True)
class ConfidenceInterval:
    point: float
    lower: float
    upper: float
    level: float = CI_LEVEL

    def __post_init__(self):
        if not self.lower <= self.point <= self.upper:
            raise ValueError(f"interval [{self.lower}, {self.upper}] does not contain {self.point}")

    @property
    def minus(self) -> float:
        return self.point - self.lower

    @property
    def plus(self) -> float:
        return self.upper - self.point

    def __contains__(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper, "level": self.level}


def readout_gates(pauli: str, labels: Sequence[str], readout: str = READOUT) -> tuple[str, ...]:
    """Gate names that map the Pauli string onto the Z axis of the readout spin."""
    if len(pauli) != len(labels):
        raise TomographyError(f"Pauli string {pauli!r} does not match labels {tuple(labels)}")
    support = [lab for p, lab in zip(pauli, labels) if p != "I"]
    if not support:
        raise TomographyError("the identity string carries no information")
    gates = [f"{_PREROTATION[p]}_{lab}" for p, lab in zip(pauli, labels) if p in _PREROTATION]
    if readout in support:
        head = readout
    else:
        head = support[0]
        gates.append(f"SWAP_{readout}_{head}")
    for lab in support:
        if lab != head:
            gates.append(f"CX_{lab}_{readout}")
    return tuple(gates)


def pauli_strings(n: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n) if set(p) != {"I"}]


def pauli_settings(labels: Sequence[str], readout: str = READOUT) -> list[Setting]:
    """The complete set of non-identity Pauli settings on ``labels``."""
    labels = tuple(labels)
    return [Setting(p, labels, readout_gates(p, labels, readout)) for p in pauli_strings(len(labels))]


def pauli_matrix(pauli: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for p in pauli:
        m = np.kron(m, I2 if p == "I" else SIGMA[p])
    return m


@lru_cache(maxsize=4096)
def _readout_unitary(gates: tuple[str, ...], register: tuple[str, ...]) -> np.ndarray:
    u = np.eye(2 ** len(register), dtype=complex)
    for name in gates:
        g = parse_gate(name)
        u = embed(g.matrix, g.acts_on, register) @ u
    return u


@lru_cache(maxsize=4096)
def _zero_projector(gates: tuple[str, ...], register: tuple[str, ...], readout: str) -> np.ndarray:
    """Heisenberg-picture projector ``U^dag |0><0|_readout U``."""
    u = _readout_unitary(gates, register)
    p = embed(np.diag([1.0, 0.0]).astype(complex), (readout,), register)
    return u.conj().T @ p @ u


def measured_observable(setting: Setting, readout: str = READOUT) -> np.ndarray:
    """Observable on ``setting.labels`` whose expectation the readout reports."""
    reg = tuple(dict.fromkeys((readout,) + setting.labels))
    proj = _zero_projector(setting.gates, reg, readout)
    obs = 2 * proj - np.eye(proj.shape[0])
    # restrict to the setting's labels; must act trivially elsewhere
    rest = [lab for lab in reg if lab not in setting.labels]
    n_keep = len(setting.labels)
    perm = [reg.index(lab) for lab in setting.labels] + [reg.index(lab) for lab in rest]
    n = len(reg)
    t = obs.reshape((2,) * 2 * n).transpose(perm + [p + n for p in perm])
    d_keep, d_rest = 2 ** n_keep, 2 ** len(rest)
    t = t.reshape(d_keep, d_rest, d_keep, d_rest)
    return np.einsum("ajbj->ab", t) / d_rest


def excited_population(rho: DensityMatrix, setting: Setting, readout: str = READOUT) -> float:
    """Probability of electron ``|0>`` after the setting's rotations."""
    missing = (set(setting.labels) | {readout}) - set(rho.labels)
    if missing:
        raise TomographyError(f"setting needs labels {sorted(missing)} absent from {rho.labels}")
    proj = _zero_projector(setting.gates, rho.labels, readout)
    return float(np.clip(np.real(np.trace(proj @ rho.data)), 0.0, 1.0))


def expected_counts(q: float, cal: Calibration) -> float:
    return cal.cycles * (q * cal.c0 + (1 - q) * cal.c1)


def simulate_counts(rho: DensityMatrix, setting: Setting, cal: Calibration,
                    rng_seed: int | np.random.Generator = 0) -> int:
    """Poisson photon count for one setting; deterministic for a fixed seed."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    q = excited_population(rho, setting)
    return int(rng.poisson(expected_counts(q, cal)))


def estimate_population(counts, cal: Calibration):
    """Normalize counts against the calibration levels; not clamped to [0, 1]."""
    if cal.c0 == cal.c1:
        raise TomographyError("degenerate calibration: c0 == c1")
    q = (np.asarray(counts, dtype=float) / cal.cycles - cal.c1) / (cal.c0 - cal.c1)
    return float(q) if np.ndim(q) == 0 else q


@dataclass
class TomographyDataset:
    labels: tuple[str, ...]
    settings: list[Setting]
    counts: list[int]
    calibration: Calibration = field(default_factory=Calibration)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if len(self.settings) != len(self.counts):
            raise TomographyError(f"{len(self.settings)} settings but {len(self.counts)} count records")
        for c in self.counts:
            if int(c) != c or c < 0:
                raise TomographyError(f"counts must be non-negative integers, got {c!r}")
        self.counts = [int(c) for c in self.counts]
        for s in self.settings:
            if s.labels != self.labels:
                raise TomographyError(f"setting {s.name} is on {s.labels}, dataset on {self.labels}")

    def check_complete(self) -> None:
        have = {s.pauli for s in self.settings}
        missing = set(pauli_strings(len(self.labels))) - have
        if missing:
            raise TomographyError(f"incomplete settings; missing {sorted(missing)[:5]}...")

    def check_observables(self, tol: float = 1e-9) -> None:
        """Verify every gate list really reads out its declared Pauli string."""
        for s in self.settings:
            obs = measured_observable(s)
            if np.max(np.abs(obs - pauli_matrix(s.pauli))) > tol:
                raise TomographyError(f"gates {s.gates} do not measure {s.pauli}")

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "calibration": self.calibration.to_dict(),
            "settings": [s.to_dict() for s in self.settings],
            "counts": list(self.counts),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "TomographyDataset":
        try:
            labels = tuple(doc["labels"])
            cal = Calibration(**doc["calibration"])
            settings = [Setting(s["pauli"], tuple(s.get("labels", labels)), tuple(s["gates"]))
                        for s in doc["settings"]]
            counts = doc["counts"]
        except (KeyError, TypeError) as exc:
            raise TomographyError(f"malformed tomography document: {exc}") from exc
        ds = cls(labels, settings, counts, cal)
        ds.check_observables()
        return ds

    @classmethod
    def from_json(cls, text: str) -> "TomographyDataset":
        return cls.from_dict(json.loads(text))


def sample_dataset(rho: DensityMatrix, labels: Sequence[str], cal: Calibration,
                   rng: np.random.Generator) -> TomographyDataset:
    settings = pauli_settings(labels)
    counts = [simulate_counts(rho, s, cal, rng) for s in settings]
    return TomographyDataset(tuple(labels), settings, counts, cal)


def analytic_expectations(rho: DensityMatrix, labels: Sequence[str]) -> dict[str, float]:
    """Exact Pauli expectations, i.e. the infinite-count limit of a dataset."""
    from .qmath import partial_trace, reorder
    red = reorder(partial_trace(rho, labels), labels)
    return {p: float(np.real(np.trace(pauli_matrix(p) @ red.data))) for p in pauli_strings(len(labels))}


@lru_cache(maxsize=16)
def _basis(n: int) -> tuple[tuple[str, ...], np.ndarray]:
    strings = tuple(pauli_strings(n))
    return strings, np.ascontiguousarray(np.stack([pauli_matrix(p) for p in strings]))


def _ordered_expectations(ds: TomographyDataset, counts: np.ndarray) -> np.ndarray:
    """Map a (batch, settings) counts array to (batch, 4^n - 1) Pauli expectations."""
    strings, _ = _basis(len(ds.labels))
    col = {s.pauli: i for i, s in enumerate(ds.settings)}
    q = estimate_population(counts, ds.calibration)
    e = 2 * np.atleast_2d(q) - 1
    return np.ascontiguousarray(e[:, [col[p] for p in strings]])


def _reconstruct_batch(expect: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear inversion then projection onto the nearest physical spectrum.

    Returns eigenvalues ``(batch, d)`` and eigenvectors ``(batch, d, d)``.
    """
    _, basis = _basis(n)
    rho = kernels.assemble_density(np.ascontiguousarray(expect, dtype=float), basis)
    w, v = np.linalg.eigh(rho)
    w = kernels.project_spectrum(np.ascontiguousarray(w))
    return w, np.ascontiguousarray(v)


def _to_matrix(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v * w) @ np.conj(np.swapaxes(v, -1, -2))


def reconstruct_from_expectations(expect: dict[str, float], labels: Sequence[str]) -> DensityMatrix:
    labels = tuple(labels)
    strings, _ = _basis(len(labels))
    missing = set(strings) - set(expect)
    if missing:
        raise TomographyError(f"incomplete expectations; missing {sorted(missing)[:5]}...")
    e = np.array([[expect[p] for p in strings]])
    w, v = _reconstruct_batch(e, len(labels))
    m = _to_matrix(w[0], v[0])
    return DensityMatrix(0.5 * (m + m.conj().T), labels)


def reconstruct(ds: TomographyDataset) -> DensityMatrix:
    """Physical density matrix from a tomographically complete dataset."""
    ds.check_complete()
    e = _ordered_expectations(ds, np.array([ds.counts]))
    w, v = _reconstruct_batch(e, len(ds.labels))
    m = _to_matrix(w[0], v[0])
    return DensityMatrix(0.5 * (m + m.conj().T), ds.labels)


STATISTICS = ("entropy", "fidelity", "F_e", "L")


def batch_statistic(w: np.ndarray, v: np.ndarray, statistic: str, target=None) -> np.ndarray:
    """Evaluate a statistic on eigen-decomposed states (one row per state)."""
    if statistic == "entropy":
        return kernels.entropy_bits(np.ascontiguousarray(w))
    if statistic == "L":
        if w.shape[1] != 2:
            raise ValueError("Bloch length needs single-qubit data")
        return np.minimum(np.abs(w[:, 1] - w[:, 0]), 1.0)
    if statistic in ("fidelity", "F_e"):
        if target is None:
            raise ValueError(f"statistic {statistic!r} needs a target state")
        if isinstance(target, PureState):
            psi = np.ascontiguousarray(target.amplitudes)
        elif statistic == "F_e":
            raise ValueError("entanglement fidelity needs a pure target")
        else:
            tw, tv = np.linalg.eigh(as_density(target).data)
            psi = tv[:, -1] if tw[-1] > 1 - 1e-12 else None
        if psi is not None:
            return np.clip(kernels.pure_overlap(np.ascontiguousarray(w), v, psi), 0.0, 1.0)
        tw = np.sqrt(np.clip(tw, 0.0, None))
        s = (tv * tw) @ tv.conj().T
        inner = s @ _to_matrix(w[:, None, :], v) @ s
        iw = np.clip(np.linalg.eigvalsh(0.5 * (inner + np.conj(np.swapaxes(inner, 1, 2)))), 0.0, None)
        return np.clip(np.sum(np.sqrt(iw), axis=1) ** 2, 0.0, 1.0)
    raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")


def point_statistic(ds: TomographyDataset, statistic: str, target=None) -> float:
    ds.check_complete()
    e = _ordered_expectations(ds, np.array([ds.counts]))
    w, v = _reconstruct_batch(e, len(ds.labels))
    return float(batch_statistic(w, v, statistic, target)[0])


def monte_carlo_ci(ds: TomographyDataset, statistic: str = "entropy", n_resamples: int = DEFAULT_RESAMPLES,
                   rng_seed: int = 0, target=None, level: float = CI_LEVEL) -> ConfidenceInterval:
    """Central ``level`` interval of a statistic under Poisson resampling of every count.

    Resampled counts come from one generator seeded by ``derive_seed(rng_seed,
    "resample")`` and are drawn as a single ``(n_resamples, n_settings)`` block,
    so the result depends only on the seed.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    ds.check_complete()
    point = point_statistic(ds, statistic, target)
    rng = derive_rng(rng_seed, "resample")
    counts = rng.poisson(np.asarray(ds.counts, dtype=float), size=(n_resamples, len(ds.counts)))
    e = _ordered_expectations(ds, counts)
    w, v = _reconstruct_batch(e, len(ds.labels))
    samples = batch_statistic(w, v, statistic, target)
    lo, hi = np.quantile(samples, [(1 - level) / 2, (1 + level) / 2])
    return ConfidenceInterval(point, float(min(lo, point)), float(max(hi, point)), level)
