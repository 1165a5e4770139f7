"""The three demon experiments: circuits, ideal-state oracles and entropy bookkeeping.

Registers and roles
-------------------
1. successive operation: E (demon), C (particle A), N (particle B)
2. superposition demon:  E (demon), C (system); N is polarized and left out
3. entangled demon:      E (demon), C (system), N (ancilla)

A circuit is a list of :class:`Step` entries.  A step either applies a named
gate with a nominal duration or marks a stage at which the state is recorded.
With noise enabled, every timed gate is followed by electron dephasing as
described in :func:`qdemon.noise.insert_dephasing`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gates import GateOp, apply, parse_gate, with_decoupling
from .noise import NoiseParams, gap, imperfect_polarization, insert_dephasing, schedule_totals
from .qmath import (
    DensityMatrix,
    PureState,
    basis_state,
    bloch_length,
    fidelity,
    maximally_mixed,
    partial_trace,
    reorder,
    tensor_all,
    von_neumann_entropy,
)
from .seeding import derive_rng, derive_seed
from .tomography import (
    Calibration,
    ConfidenceInterval,
    TomographyDataset,
    monte_carlo_ci,
    reconstruct,
    sample_dataset,
)

US = 1e-6
SQ2 = np.sqrt(2.0)

REGISTERS = {1: ("E", "C", "N"), 2: ("E", "C"), 3: ("E", "C", "N")}
ROLES = {
    1: {"E": "demon", "C": "particle A", "N": "particle B", "CN": "system (A+B)"},
    2: {"E": "demon", "C": "system"},
    3: {"E": "demon", "C": "system", "N": "ancilla", "EN": "demon+ancilla"},
}
GROUPS = {1: ("E", "C", "N", "CN"), 2: ("E", "C"), 3: ("E", "C", "N", "EN")}
OBSERVERS = ("outside", "inside")
BASES = ("diagonal", "off-diagonal")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    gate: str = ""
    duration: float = 0.0
    protected: bool = False
    gap: float = 0.0
    decouple: bool = False
    mark: str = ""

    @property
    def is_mark(self) -> bool:
        return bool(self.mark)


def _g(name, us=0.0, protected=False, gap_us=0.0, decouple=False) -> Step:
    return Step(name, us * US, protected, gap_us * US, decouple)


def _m(stage) -> Step:
    return Step(mark=stage)


# Nominal durations.  Selective MW pulses on the electron take ~0.5 us in the
# first two experiments; RF pulses on nuclei take tens of us.  In the third
# experiment the MW pulses must resolve the 14N splitting and become slow.
def program(experiment: int, observer: str = "inside", basis: str = "off-diagonal") -> list[Step]:
    """Ordered gate and stage-mark list for one experiment variant."""
    if experiment == 1:
        return [
            _m("begin"),
            _g("C_C-NOT_E", 0.5), _m("readout:step1"), _g("C_E-NOT_C", 40.0),
            _m("step1"),
            _g("C_N-NOT_E", 0.5), _m("readout:step2"), _g("C_E-NOT_N", 40.0),
            _m("step2"),
        ]
    if experiment == 2:
        if basis not in BASES:
            raise ExperimentError(f"basis must be one of {BASES}, got {basis!r}")
        steps = [
            _g("RX(pi/2)_E"),
            _m("begin"),
            _g("C_C-NOT_E", 0.5), _g("C_E-NOT_C", 40.0, True, 0.2),
        ]
        if basis == "off-diagonal":
            steps.append(_g("C_C-RY_E", 0.5))
        return steps + [_m("final")]
    if experiment == 3:
        if observer not in OBSERVERS:
            raise ExperimentError(f"observer must be one of {OBSERVERS}, got {observer!r}")
        steps = [
            _g("RX(pi/2)_E"), _g("C_E-NOT_N", 40.0, True, 0.2),
            _m("begin"),
            _g("C_C-NOT_E", 15.0, True, 0.2, decouple=True), _g("C_E-NOT_C", 40.0, True, 0.2),
        ]
        if observer == "outside":
            return steps + [_m("final")]
        return steps + [
            _m("demon"),
            _g("C_E-NOT_N", 40.0, True, 0.2), _g("C_N-NOT_E", 40.0, True, 0.2, decouple=True),
            _g("C_C-NOT_E", 15.0, True, 0.2, decouple=True),
            _m("final"),
        ]
    raise ExperimentError(f"unknown experiment {experiment!r}")


def stages_of(experiment: int, observer: str = "inside", basis: str = "off-diagonal") -> list[str]:
    return [s.mark for s in program(experiment, observer, basis)
            if s.is_mark and not s.mark.startswith("readout:")]


def initial_state(experiment: int, p0: Optional[float] = None) -> DensityMatrix:
    """Register state after optical pumping; ``p0`` dilutes the polarized spins."""
    def polarized(label):
        rho = basis_state(0, label).to_density()
        return rho if p0 is None else imperfect_polarization(rho, p0)

    if experiment == 1:
        return tensor_all([polarized("E"), maximally_mixed(["C"]), maximally_mixed(["N"])])
    if experiment == 2:
        return tensor_all([polarized("E"), maximally_mixed(["C"])])
    if experiment == 3:
        return tensor_all([polarized("E"), maximally_mixed(["C"]), polarized("N")])
    raise ExperimentError(f"unknown experiment {experiment!r}")


def _timed_gates(steps: Sequence[Step]) -> list[GateOp]:
    ops = []
    for s in steps:
        g = parse_gate(s.gate)
        if s.decouple:
            g = with_decoupling(g, "E")
        ops.append(g.with_timing(s.duration, s.protected))
        if s.gap > 0:
            ops.append(gap("E", s.gap))
    return ops


def budget_scale(noise: NoiseParams) -> tuple[float, float]:
    """Duration multipliers (protected, unprotected) that stretch the full
    inside-observer entangled-demon sequence onto the noise budget totals."""
    prot, free = schedule_totals(_timed_gates([s for s in program(3, "inside") if not s.is_mark]))
    return noise.protected_time / prot, noise.unprotected_gaps / free


def evolve(steps: Sequence[Step], rho: DensityMatrix, noise: Optional[NoiseParams] = None,
           time_scale: tuple[float, float] = (1.0, 1.0)) -> dict[str, DensityMatrix]:
    """Run a program, returning the state at every stage mark.

    ``time_scale`` multiplies protected and unprotected durations before the
    dephasing channels are inserted.
    """
    seq: list = []
    for s in steps:
        if s.is_mark:
            seq.append(s.mark)
            continue
        for g in _timed_gates([s]):
            k = time_scale[0] if g.protected else time_scale[1]
            seq.append(g.with_timing(g.duration * k, g.protected))
    if noise is not None:
        seq = insert_dephasing(seq, noise, "E")
    out: dict[str, DensityMatrix] = {}
    for item in seq:
        if isinstance(item, str):
            out[item] = rho
        else:
            rho = apply(rho, item)
    return out


def simulate_stages(experiment: int, noise: Optional[NoiseParams] = None, observer: str = "inside",
                    basis: str = "off-diagonal", polarize: bool = False) -> dict[str, DensityMatrix]:
    """Exact stage states for one experiment; the third is scaled to the noise budget."""
    p0 = noise.p0 if (polarize and noise is not None) else None
    steps = program(experiment, observer, basis)
    scale = budget_scale(noise) if (experiment == 3 and noise is not None) else (1.0, 1.0)
    return evolve(steps, initial_state(experiment, p0), noise, scale)


# ---------------------------------------------------------------------------
# Closed-form ideal states
# ---------------------------------------------------------------------------

def _ket(amps: dict[str, complex], labels=("E", "C", "N")) -> np.ndarray:
    v = np.zeros(2 ** len(labels), dtype=complex)
    for bits, a in amps.items():
        v[int(bits, 2)] += a
    return v


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


PHI_DA = PureState(np.array([1, 0, 0, -1]) / SQ2, ("E", "N"))
PHI_1 = PureState(_ket({"000": 1, "111": 1j}) / SQ2, ("E", "C", "N"))
PHI_2 = PureState(_ket({"011": 1, "100": 1j}) / SQ2, ("E", "C", "N"))


def rho_ecn() -> DensityMatrix:
    """Post-demon state of the entangled experiment, ``(|Phi1><Phi1| + |Phi2><Phi2|) / 2``."""
    return DensityMatrix((_proj(PHI_1.amplitudes) + _proj(PHI_2.amplitudes)) / 2, ("E", "C", "N"))


def ideal_stage_state(experiment: int, stage: str, observer: str = "inside",
                      basis: str = "off-diagonal") -> DensityMatrix:
    """Noise-free register state at ``stage``, written out in closed form.

    Bit order in kets is (E, C, N) or (E, C); bit 1 means |-1>, |down>, |1>.
    """
    up, mix = np.diag([1.0, 0.0]), np.eye(2) / 2
    if experiment == 1:
        if stage == "begin":
            return DensityMatrix(np.kron(np.kron(up, mix), mix), REGISTERS[1])
        if stage in ("step1", "step2"):
            return DensityMatrix(np.kron(np.kron(mix, up), mix), REGISTERS[1])
    elif experiment == 2:
        if stage == "begin":
            e = np.array([1, -1j]) / SQ2
            return DensityMatrix(np.kron(_proj(e), mix), REGISTERS[2])
        if stage == "final" and basis == "diagonal":
            psi1 = _ket({"00": 1, "11": -1}, ("E", "C")) / SQ2
            psi2 = _ket({"01": 1, "10": 1}, ("E", "C")) / SQ2
            return DensityMatrix((_proj(psi1) + _proj(psi2)) / 2, REGISTERS[2])
        if stage == "final" and basis == "off-diagonal":
            plus = np.array([1, 1]) / SQ2
            return DensityMatrix(np.kron(mix, _proj(plus)), REGISTERS[2])
    elif experiment == 3:
        if stage == "begin":
            en = reorder(DensityMatrix(np.kron(PHI_DA.to_density().data, mix),
                                       ("E", "N", "C")), REGISTERS[3])
            return en
        if stage == "demon" or (stage == "final" and observer == "outside"):
            return rho_ecn()
        if stage == "final" and observer == "inside":
            # |0>_E (|up> - i|down>)/sqrt2 (x) I_N/2 under the locked pulse phase
            c = np.array([1, -1j]) / SQ2
            return DensityMatrix(np.kron(np.kron(up, _proj(c)), mix), REGISTERS[3])
    raise ExperimentError(f"no ideal state for experiment {experiment}, stage {stage!r}")


def ideal_target(experiment: int, stage: str, group: str, observer: str = "inside",
                 basis: str = "off-diagonal"):
    """Reduced ideal state on ``group``; a :class:`PureState` when it is pure."""
    labels = tuple(group)
    red = reorder(partial_trace(ideal_stage_state(experiment, stage, observer, basis), labels), labels)
    w, v = np.linalg.eigh(red.data)
    if w[-1] > 1 - 1e-12:
        return PureState(v[:, -1], labels, normalize=True)
    return red


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class SubsystemRecord:
    stage: str
    subsystem: str
    role: str
    entropy: float
    fidelity: float
    bloch_length: Optional[float] = None
    entropy_ci: Optional[ConfidenceInterval] = None
    fidelity_ci: Optional[ConfidenceInterval] = None

    def to_dict(self) -> dict:
        d = {
            "stage": self.stage, "subsystem": self.subsystem, "role": self.role,
            "S": self.entropy, "F": self.fidelity, "L": self.bloch_length,
        }
        d["S_ci"] = self.entropy_ci.to_dict() if self.entropy_ci else None
        d["F_ci"] = self.fidelity_ci.to_dict() if self.fidelity_ci else None
        return d


@dataclass
class ExperimentReport:
    experiment: int
    mode: str
    stages: list[str]
    records: list[SubsystemRecord]
    observer: Optional[str] = None
    detection_basis: Optional[str] = None
    noise: Optional[dict] = None
    readout_entropy: dict[str, float] = field(default_factory=dict)
    circuit: list[str] = field(default_factory=list)
    datasets: dict[str, TomographyDataset] = field(default_factory=dict)

    def record(self, stage: str, subsystem: str) -> SubsystemRecord:
        for r in self.records:
            if r.stage == stage and r.subsystem == subsystem:
                return r
        raise KeyError(f"no record for stage {stage!r}, subsystem {subsystem!r}")

    def entropy(self, stage: str, subsystem: str) -> float:
        return self.record(stage, subsystem).entropy

    def table(self, quantity: str = "S") -> dict[str, dict[str, float]]:
        attr = {"S": "entropy", "F": "fidelity", "L": "bloch_length"}[quantity]
        out: dict[str, dict[str, float]] = {}
        for r in self.records:
            out.setdefault(r.subsystem, {})[r.stage] = getattr(r, attr)
        return out

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "mode": self.mode,
            "observer": self.observer,
            "detection_basis": self.detection_basis,
            "stages": list(self.stages),
            "noise": self.noise,
            "circuit": list(self.circuit),
            "readout_entropy": dict(self.readout_entropy),
            "records": [r.to_dict() for r in self.records],
        }

    CSV_FIELDS = ("stage", "subsystem", "S", "S_lo", "S_hi", "F", "F_lo", "F_hi", "L")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.records:
            s_lo = r.entropy_ci.lower if r.entropy_ci else ""
            s_hi = r.entropy_ci.upper if r.entropy_ci else ""
            f_lo = r.fidelity_ci.lower if r.fidelity_ci else ""
            f_hi = r.fidelity_ci.upper if r.fidelity_ci else ""
            L = "" if r.bloch_length is None else repr(r.bloch_length)
            w.writerow([r.stage, r.subsystem, repr(r.entropy), s_lo, s_hi, repr(r.fidelity), f_lo, f_hi, L])
        return buf.getvalue()


def _measure_group(rho: DensityMatrix, group: str, mode: str, target, cal: Calibration,
                   seed: int, task: str, n_resamples: Optional[int]):
    labels = tuple(group)
    if mode == "analytic":
        red = reorder(partial_trace(rho, labels), labels)
        return red, None, None, None
    ds = sample_dataset(rho, labels, cal, derive_rng(seed, task, "counts"))
    red = reconstruct(ds)
    s_ci = f_ci = None
    if n_resamples:
        s_ci = monte_carlo_ci(ds, "entropy", n_resamples, derive_seed(seed, task, "S"))
        f_ci = monte_carlo_ci(ds, "fidelity", n_resamples, derive_seed(seed, task, "F"), target=target)
    return red, ds, s_ci, f_ci


def _build_report(experiment: int, states: dict[str, DensityMatrix], mode: str, seed: int,
                  observer=None, basis=None, noise=None, cal: Optional[Calibration] = None,
                  n_resamples: Optional[int] = None) -> ExperimentReport:
    if mode not in ("analytic", "sampled"):
        raise ExperimentError(f"mode must be 'analytic' or 'sampled', got {mode!r}")
    cal = cal or Calibration()
    steps = program(experiment, observer or "inside", basis or "off-diagonal")
    stage_names = stages_of(experiment, observer or "inside", basis or "off-diagonal")
    report = ExperimentReport(
        experiment, mode, stage_names, [], observer, basis,
        noise.to_dict() if noise is not None else None,
        circuit=[s.gate if not s.is_mark else f"[{s.mark}]" for s in steps],
    )
    for stage in stage_names:
        rho = states[stage]
        for group in GROUPS[experiment]:
            target = ideal_target(experiment, stage, group, observer or "inside", basis or "off-diagonal")
            task = f"exp{experiment}/{stage}/{group}"
            red, ds, s_ci, f_ci = _measure_group(rho, group, mode, target, cal, seed, task, n_resamples)
            if ds is not None:
                report.datasets[f"{stage}/{group}"] = ds
            S = von_neumann_entropy(red)
            F = fidelity(target.to_density() if isinstance(target, PureState) else target, red)
            # report the interval's own point so the record always sits inside it
            if s_ci is not None:
                S, F = s_ci.point, f_ci.point
            L = bloch_length(red) if len(group) == 1 else None
            report.records.append(SubsystemRecord(stage, group, ROLES[experiment][group], S, F, L,
                                                  s_ci, f_ci))
    for key, rho in states.items():
        if key.startswith("readout:"):
            step = key.split(":", 1)[1]
            red, *_ = _measure_group(rho, "E", mode, None, cal, seed, f"exp{experiment}/{key}/E", None)
            report.readout_entropy[step] = von_neumann_entropy(red)
    return report


def run_experiment1(noise: Optional[NoiseParams] = None, mode: str = "analytic", seed: int = 0,
                    calibration: Optional[Calibration] = None, n_resamples: Optional[int] = None,
                    polarize: bool = False) -> ExperimentReport:
    """Demon acts on particle A, then again on particle B with its memory already used."""
    states = simulate_stages(1, noise, polarize=polarize)
    return _build_report(1, states, mode, seed, noise=noise, cal=calibration, n_resamples=n_resamples)


def run_experiment2(noise: Optional[NoiseParams] = None, mode: str = "analytic",
                    basis: str = "off-diagonal", seed: int = 0,
                    calibration: Optional[Calibration] = None, n_resamples: Optional[int] = None,
                    polarize: bool = False) -> ExperimentReport:
    """Demon starts in an equal superposition; the system is read in ``basis``."""
    states = simulate_stages(2, noise, basis=basis, polarize=polarize)
    return _build_report(2, states, mode, seed, basis=basis, noise=noise, cal=calibration,
                         n_resamples=n_resamples)


def run_experiment3(noise: Optional[NoiseParams] = None, mode: str = "analytic",
                    observer: str = "inside", seed: int = 0,
                    calibration: Optional[Calibration] = None, n_resamples: Optional[int] = None,
                    polarize: bool = False) -> ExperimentReport:
    """Demon starts entangled with the 14N ancilla; reported for one kind of observer."""
    states = simulate_stages(3, noise, observer=observer, polarize=polarize)
    return _build_report(3, states, mode, seed, observer=observer, noise=noise, cal=calibration,
                         n_resamples=n_resamples)


def run_experiment(experiment: int, **kw) -> ExperimentReport:
    runner = {1: run_experiment1, 2: run_experiment2, 3: run_experiment3}.get(experiment)
    if runner is None:
        raise ExperimentError(f"unknown experiment {experiment!r}")
    return runner(**kw)


def information_acquired(report: ExperimentReport, step: str = "step1") -> float:
    """Rise in demon entropy across the readout gate of ``step``.

    Equals the information gained when the demon enters the step in a pure state.
    """
    if step not in report.readout_entropy or step not in report.stages:
        raise ExperimentError(f"report has no readout data for {step!r}")
    idx = report.stages.index(step)
    if idx == 0:
        raise ExperimentError(f"{step!r} has no preceding stage")
    before = report.entropy(report.stages[idx - 1], "E")
    return report.readout_entropy[step] - before
