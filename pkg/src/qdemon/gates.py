"""Conditional spin-rotation gates and their action on labeled registers.

Logical qubit encodings (index 0 / index 1):

    E  electron spin      |0>  / |-1>
    C  13C nuclear spin   |up> / |down>
    N  14N nuclear spin   |0>  / |1>

A selective pi pulse is not a textbook CNOT: it is the rotation
``exp(-i pi sigma/2) = -i sigma`` on the driven branch.  That ``-i`` is what
produces the relative phase ``+i`` in the post-demon branches of the entangled
experiment, so it is kept in every gate and never normalized away.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qmath import DensityMatrix, LabelError

UNITARY_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PROJ = (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex))


@dataclass(frozen=True)
class PhaseConvention:
    """Sign of the rotation generator: ``R(theta) = exp(sign * i * theta * sigma / 2)``.

    The default ``sign=-1`` makes a pi pulse equal to ``-i sigma``.
    """

    sign: int = -1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def pulse_phase(self) -> complex:
        return complex(self.sign * 1j)


DEFAULT_CONVENTION = PhaseConvention()


@dataclass(frozen=True, eq=False)
class GateOp:
    """A unitary or a Kraus channel on named subsystems.

    ``duration`` is the nominal time the operation occupies in seconds and
    ``protected`` says whether dynamical decoupling covers that time.
    """

    kind: str
    ops: tuple
    acts_on: tuple[str, ...]
    duration: float = 0.0
    protected: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("unitary", "kraus"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.acts_on)) != len(self.acts_on):
            raise LabelError(f"gate acts on repeated labels {self.acts_on}")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        ops = tuple(np.asarray(k, dtype=complex) for k in self.ops)
        d = 2 ** len(self.acts_on)
        for k in ops:
            if k.shape != (d, d):
                raise ValueError(f"operator shape {k.shape} does not match {len(self.acts_on)} qubits")
        if self.kind == "unitary" and len(ops) != 1:
            raise ValueError("a unitary gate holds exactly one matrix")
        object.__setattr__(self, "ops", ops)
        completeness = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(completeness - np.eye(d))) > UNITARY_TOL:
            what = "unitary" if self.kind == "unitary" else "trace preserving"
            raise ValueError(f"gate {self.name or '?'} is not {what}")

    @property
    def matrix(self) -> np.ndarray:
        if self.kind != "unitary":
            raise TypeError("Kraus channels have no single matrix")
        return self.ops[0]

    def with_timing(self, duration: float, protected: bool) -> "GateOp":
        return GateOp(self.kind, self.ops, self.acts_on, duration, protected, self.name, dict(self.meta))

    def dagger(self) -> "GateOp":
        return GateOp("unitary", (self.matrix.conj().T,), self.acts_on, self.duration,
                      self.protected, self.name + "^dag")


def unitary(matrix, acts_on: Sequence[str], name: str = "", duration: float = 0.0,
            protected: bool = False) -> GateOp:
    return GateOp("unitary", (matrix,), tuple(acts_on), duration, protected, name)


def rotation_matrix(axis: str, angle: float, convention: PhaseConvention = DEFAULT_CONVENTION) -> np.ndarray:
    try:
        s = SIGMA[axis.upper()]
    except KeyError:
        raise ValueError(f"unknown rotation axis {axis!r}") from None
    return np.cos(angle / 2) * I2 + convention.sign * 1j * np.sin(angle / 2) * s


def rotation(axis: str, angle: float, target: str = "E",
             convention: PhaseConvention = DEFAULT_CONVENTION) -> GateOp:
    """Single-qubit rotation by ``angle`` about ``axis`` on ``target``."""
    return unitary(rotation_matrix(axis, angle, convention), (target,),
                   name=f"R{axis.upper()}({angle:.6g})_{target}")


def conditional_gate(control: str, target: str, action: GateOp | np.ndarray,
                     control_value: int = 1, name: str = "") -> GateOp:
    """Apply ``action`` to ``target`` only on the ``control_value`` branch of ``control``.

    The returned gate acts on ``(control, target)`` in that order.
    """
    if control == target:
        raise LabelError("control and target must differ")
    if isinstance(action, GateOp):
        if action.kind != "unitary" or len(action.acts_on) != 1:
            raise ValueError("conditional action must be a single-qubit unitary")
        if action.acts_on != (target,):
            raise LabelError(f"action acts on {action.acts_on}, expected ({target!r},)")
        u = action.matrix
    else:
        u = np.asarray(action, dtype=complex)
    if control_value not in (0, 1):
        raise ValueError("control_value must be 0 or 1")
    blocks = [I2, I2]
    blocks[control_value] = u
    m = np.kron(PROJ[0], blocks[0]) + np.kron(PROJ[1], blocks[1])
    return unitary(m, (control, target), name=name or f"C_{control}-U_{target}")


def conditional_not(control: str, target: str, axis: str = "X", control_value: int = 1,
                    convention: PhaseConvention = DEFAULT_CONVENTION) -> GateOp:
    """Selective pi pulse on ``target`` conditioned on ``control``; named like ``C_C-NOT_E``."""
    u = rotation_matrix(axis, np.pi, convention)
    tag = "NOT" if axis.upper() == "X" else f"R{axis.upper()}"
    return conditional_gate(control, target, u, control_value, name=f"C_{control}-{tag}_{target}")


def ideal_cnot(control: str, target: str) -> GateOp:
    """Phase-free CNOT, used only for mapping parities onto the readout spin."""
    return conditional_gate(control, target, SIGMA["X"], 1, name=f"CX_{control}_{target}")


def swap(a: str, b: str) -> GateOp:
    m = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    return unitary(m, (a, b), name=f"SWAP_{a}_{b}")


def identity(label: str, duration: float = 0.0, protected: bool = False, name: str = "") -> GateOp:
    return unitary(I2, (label,), name=name or f"IDLE_{label}", duration=duration, protected=protected)


def with_decoupling(gate: GateOp, label: str, axis: str = "X",
                    convention: PhaseConvention = DEFAULT_CONVENTION) -> GateOp:
    """Sandwich ``gate`` between two pi pulses on ``label``.

    When the decoupling axis matches the axis of the gate's own pulses on that
    spin, the composite equals the bare gate up to a global phase.
    """
    labels = gate.acts_on if label in gate.acts_on else gate.acts_on + (label,)
    g = embed(gate.matrix, gate.acts_on, labels)
    p = embed(rotation_matrix(axis, np.pi, convention), (label,), labels)
    return unitary(p @ g @ p, labels, name=f"DD[{gate.name}]", duration=gate.duration,
                   protected=True)


def embed(op: np.ndarray, acts_on: Sequence[str], labels: Sequence[str],
          dims: Sequence[int] | None = None) -> np.ndarray:
    """Lift ``op`` on ``acts_on`` to the full register ordered as ``labels``."""
    labels = tuple(labels)
    missing = [a for a in acts_on if a not in labels]
    if missing:
        raise LabelError(f"gate labels {missing} not in register {labels}")
    n = len(labels)
    dims = tuple(dims) if dims is not None else (2,) * n
    pos = [labels.index(a) for a in acts_on]
    rest = [i for i in range(n) if i not in pos]
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(op, np.eye(d_rest, dtype=complex))
    order = pos + rest
    inv = list(np.argsort(order))
    shape = [dims[i] for i in order] * 2
    t = full.reshape(shape).transpose(inv + [n + i for i in inv])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def apply(rho: DensityMatrix, g: GateOp) -> DensityMatrix:
    """Evolve ``rho`` by ``U rho U^dag`` or ``sum_k K rho K^dag``."""
    missing = set(g.acts_on) - set(rho.labels)
    if missing:
        raise LabelError(f"gate {g.name or '?'} acts on {sorted(missing)} not in {rho.labels}")
    out = np.zeros_like(rho.data)
    for k in g.ops:
        m = embed(k, g.acts_on, rho.labels, rho.dims)
        out += m @ rho.data @ m.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, rho.labels, rho.dims, validate=False)


def apply_sequence(rho: DensityMatrix, gates: Sequence[GateOp]) -> DensityMatrix:
    for g in gates:
        rho = apply(rho, g)
    return rho


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)


_ANGLE = {"pi": np.pi, "pi/2": np.pi / 2, "-pi/2": -np.pi / 2, "-pi": -np.pi}
_COND = re.compile(r"^C_([A-Za-z]+)(?:=(0|1))?-(NOT|RX|RY|RZ)_([A-Za-z]+)$")
_ROT = re.compile(r"^R(X|Y|Z)\((-?pi(?:/2)?)\)_([A-Za-z]+)$")
_SWAP = re.compile(r"^SWAP_([A-Za-z]+)_([A-Za-z]+)$")
_CX = re.compile(r"^CX_([A-Za-z]+)_([A-Za-z]+)$")


def parse_gate(name: str, convention: PhaseConvention = DEFAULT_CONVENTION) -> GateOp:
    """Build a gate from its string name.

    Recognized forms: ``C_C-NOT_E`` (conditional pi pulse, optional ``=0``
    branch selector as in ``C_C=0-NOT_E``), ``C_C-RY_E``, ``RX(pi/2)_E``,
    ``RY(-pi/2)_N``, ``SWAP_E_N`` and ``CX_N_E`` (ideal readout CNOT).
    """
    m = _COND.match(name)
    if m:
        ctrl, val, kind, tgt = m.groups()
        axis = "X" if kind == "NOT" else kind[1]
        g = conditional_not(ctrl, tgt, axis, int(val) if val else 1, convention)
        return GateOp(g.kind, g.ops, g.acts_on, name=name)
    m = _ROT.match(name)
    if m:
        axis, ang, tgt = m.groups()
        g = rotation(axis, _ANGLE[ang], tgt, convention)
        return GateOp(g.kind, g.ops, g.acts_on, name=name)
    m = _SWAP.match(name)
    if m:
        return swap(*m.groups())
    m = _CX.match(name)
    if m:
        return ideal_cnot(*m.groups())
    raise ValueError(f"unrecognized gate name {name!r}")
