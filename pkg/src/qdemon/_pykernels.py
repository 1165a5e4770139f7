"""Numpy implementation of the batched reconstruction kernels.

Same signatures and results as the compiled ``_ckernels`` module.
"""

import numpy as np


def assemble_density(expect, basis):
    expect = np.asarray(expect, dtype=float)
    basis = np.asarray(basis, dtype=complex)
    d = basis.shape[1]
    rho = np.einsum("bs,sij->bij", expect, basis)
    rho += np.eye(d)
    return rho / d


def project_spectrum(w):
    w = np.asarray(w, dtype=float)
    u = -np.sort(-w, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, w.shape[1] + 1)
    cond = u - css / idx > 0
    # last index where the condition holds; index 0 always qualifies
    r = w.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(w.shape[0]), r] / (r + 1)
    return np.maximum(w - theta[:, None], 0.0)


def entropy_bits(p):
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    return np.maximum(-np.sum(np.where(p > 0, p * np.log2(safe), 0.0), axis=1), 0.0)


def pure_overlap(w, v, psi):
    amps = np.einsum("i,bik->bk", np.conj(psi), v)
    return np.sum(np.asarray(w) * np.abs(amps) ** 2, axis=1)
