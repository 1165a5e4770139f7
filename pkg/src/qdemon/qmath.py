"""Dense linear algebra on small labeled spin registers, plus entropy and fidelity.

Every state carries an ordered tuple of subsystem labels alongside its
dimensions, so partial traces and gate embeddings are resolved by name rather
than by position.  The registers used here are at most three qubits, so all
routines work on dense ``numpy`` arrays without any attempt at sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-12


class InvalidStateError(ValueError):
    """Raised when an array does not describe a physical quantum state."""


class LabelError(ValueError):
    """Raised for unknown, duplicated or colliding subsystem labels."""


def _check_register(dims: Sequence[int], labels: Sequence[str], size: int) -> None:
    if len(dims) != len(labels):
        raise LabelError(f"{len(dims)} dims given for {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise LabelError(f"duplicate labels in {tuple(labels)}")
    if int(np.prod(dims)) != size:
        raise InvalidStateError(f"dims {tuple(dims)} do not match size {size}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive semidefinite operator on a labeled register."""

    data: np.ndarray
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __init__(self, data, labels: Sequence[str], dims: Sequence[int] | None = None,
                 validate: bool = True):
        data = np.array(data, dtype=complex)
        labels = tuple(labels)
        dims = tuple(int(d) for d in dims) if dims is not None else (2,) * len(labels)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got {data.shape}")
        _check_register(dims, labels, data.shape[0])
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        if validate:
            self.validate()

    def validate(self) -> None:
        d = self.data
        if np.max(np.abs(d - d.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(np.trace(d) - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace is {np.trace(d).real:.3g}, expected 1")
        w = np.linalg.eigvalsh(d)
        if w[0] < -PSD_TOL:
            raise InvalidStateError(f"negative eigenvalue {w[0]:.3g}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def relabel(self, labels: Sequence[str]) -> "DensityMatrix":
        return DensityMatrix(self.data, labels, self.dims, validate=False)

    def __repr__(self) -> str:
        return f"DensityMatrix(labels={self.labels}, dims={self.dims})"


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a labeled register."""

    amplitudes: np.ndarray
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __init__(self, amplitudes, labels: Sequence[str], dims: Sequence[int] | None = None,
                 normalize: bool = False):
        amp = np.array(amplitudes, dtype=complex).reshape(-1)
        labels = tuple(labels)
        dims = tuple(int(d) for d in dims) if dims is not None else (2,) * len(labels)
        _check_register(dims, labels, amp.size)
        norm = np.linalg.norm(amp)
        if normalize:
            if norm == 0:
                raise InvalidStateError("cannot normalize the zero vector")
            amp = amp / norm
        elif abs(norm ** 2 - 1.0) > NORM_TOL:
            raise InvalidStateError(f"squared norm is {norm ** 2:.3g}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)

    def to_density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.labels, self.dims)

    def __repr__(self) -> str:
        return f"PureState(labels={self.labels}, dims={self.dims})"


State = Union[DensityMatrix, PureState]


def basis_state(index: int, label: str) -> PureState:
    v = np.zeros(2, dtype=complex)
    v[index] = 1.0
    return PureState(v, (label,))


def maximally_mixed(labels: Sequence[str]) -> DensityMatrix:
    d = 2 ** len(labels)
    return DensityMatrix(np.eye(d) / d, labels)


def as_density(state: State) -> DensityMatrix:
    return state.to_density() if isinstance(state, PureState) else state


def tensor(a: State, b: State) -> State:
    """Kronecker product of two states on disjoint registers.

    Mixed kinds are promoted to a density matrix.
    """
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise LabelError(f"label collision: {sorted(clash)}")
    labels = a.labels + b.labels
    dims = a.dims + b.dims
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), labels, dims, normalize=True)
    a, b = as_density(a), as_density(b)
    return DensityMatrix(np.kron(a.data, b.data), labels, dims)


def tensor_all(states: Iterable[State]) -> State:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _partial_trace_array(data: np.ndarray, dims: Sequence[int], keep_idx: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = data.reshape(tuple(dims) * 2)
    traced = [i for i in range(n) if i not in keep_idx]
    # trace from the highest axis down so remaining axis numbers stay valid
    for k, i in enumerate(sorted(traced, reverse=True)):
        n_cur = n - k
        t = np.trace(t, axis1=i, axis2=i + n_cur)
    d = int(np.prod([dims[i] for i in keep_idx])) if keep_idx else 1
    return t.reshape(d, d)


def partial_trace(rho: State, keep: Iterable[str]) -> DensityMatrix:
    """Reduced state on the subsystems named in ``keep``.

    The kept subsystems retain their order in ``rho``, not the order of ``keep``.
    """
    rho = as_density(rho)
    keep = set(keep)
    if not keep:
        raise LabelError("keep must name at least one subsystem")
    unknown = keep - set(rho.labels)
    if unknown:
        raise LabelError(f"unknown labels {sorted(unknown)}; register is {rho.labels}")
    keep_idx = [i for i, lab in enumerate(rho.labels) if lab in keep]
    data = _partial_trace_array(rho.data, rho.dims, keep_idx)
    data = 0.5 * (data + data.conj().T)
    return DensityMatrix(data, [rho.labels[i] for i in keep_idx],
                         [rho.dims[i] for i in keep_idx], validate=False)


def reorder(rho: DensityMatrix, labels: Sequence[str]) -> DensityMatrix:
    """Permute the tensor factors of ``rho`` into the order given by ``labels``."""
    if sorted(labels) != sorted(rho.labels):
        raise LabelError(f"cannot reorder {rho.labels} into {tuple(labels)}")
    perm = [rho.labels.index(lab) for lab in labels]
    n = len(perm)
    t = rho.data.reshape(rho.dims * 2).transpose(perm + [p + n for p in perm])
    dims = [rho.dims[p] for p in perm]
    d = rho.dim
    return DensityMatrix(t.reshape(d, d), labels, dims, validate=False)


def _clamped_eigvals(rho: DensityMatrix) -> np.ndarray:
    w = np.linalg.eigvalsh(rho.data)
    if w[0] < -PSD_TOL:
        raise InvalidStateError(f"negative eigenvalue {w[0]:.3g}")
    return np.clip(w, 0.0, None)


def shannon_entropy(probs) -> float:
    """Entropy in bits of a probability vector, with 0 log 0 taken as 0."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def von_neumann_entropy(rho: State) -> float:
    """Entropy in bits, computed from the eigenvalue spectrum."""
    return shannon_entropy(_clamped_eigvals(as_density(rho)))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w[0] < -PSD_TOL:
        raise InvalidStateError(f"negative eigenvalue {w[0]:.3g} in square root")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def fidelity(rho_id: State, rho_e: State) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho_id) rho_e sqrt(rho_id)))**2``."""
    a, b = as_density(rho_id), as_density(rho_e)
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    # a pure argument reduces to an overlap; this avoids sqrt(roundoff) terms
    for x, y in ((a, b), (b, a)):
        w, v = np.linalg.eigh(x.data)
        if w[-1] > 1.0 - PSD_TOL:
            psi = v[:, -1]
            return float(min(max(np.real(psi.conj() @ y.data @ psi), 0.0), 1.0))
    s = _psd_sqrt(a.data)
    inner = s @ b.data @ s
    inner = 0.5 * (inner + inner.conj().T)
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(f, 0.0), 1.0)


def entanglement_fidelity(rho: State, phi: PureState) -> float:
    """Overlap ``<phi|rho|phi>`` with a target pure state."""
    rho = as_density(rho)
    if rho.dims != phi.dims:
        raise ValueError(f"dimension mismatch: {rho.dims} vs {phi.dims}")
    v = phi.amplitudes
    return float(min(max(np.real(v.conj() @ rho.data @ v), 0.0), 1.0))


def bloch_length(rho: State) -> float:
    """``|2p - 1|`` for a single qubit with eigenvalues ``p`` and ``1 - p``."""
    rho = as_density(rho)
    if rho.dims != (2,):
        raise ValueError(f"Bloch length needs a single qubit, got dims {rho.dims}")
    w = _clamped_eigvals(rho)
    return float(min(abs(w[1] - w[0]), 1.0))


def bloch_vector(rho: State) -> np.ndarray:
    rho = as_density(rho)
    if rho.dims != (2,):
        raise ValueError(f"Bloch vector needs a single qubit, got dims {rho.dims}")
    d = rho.data
    return np.array([2 * d[0, 1].real, -2 * d[0, 1].imag, (d[0, 0] - d[1, 1]).real])


def entropy_from_bloch(length: float) -> float:
    """Single-qubit entropy in bits as a function of Bloch vector length."""
    L = float(length)
    if not 0.0 <= L <= 1.0:
        raise ValueError(f"Bloch length must lie in [0, 1], got {L}")
    terms = 0.0
    for x in (1.0 + L, 1.0 - L):
        if x > 0:
            terms += x * np.log2(x)
    return float(max(0.0, 1.0 - 0.5 * terms))


def random_density_matrix(labels: Sequence[str], rng: np.random.Generator,
                          rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed random state; full rank unless ``rank`` is given."""
    d = 2 ** len(labels)
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, labels)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
