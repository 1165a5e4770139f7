"""Compare the compiled and numpy kernel backends on the Monte-Carlo hot loop.

    python3 benchmarks/bench_kernels.py [--resamples 1000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from qdemon import kernels
from qdemon.experiments import PHI_DA
from qdemon.tomography import Calibration, _basis, sample_dataset, _ordered_expectations


def inputs(n_resamples):
    ds = sample_dataset(PHI_DA.to_density(), ("E", "N"), Calibration(), np.random.default_rng(0))
    rng = np.random.default_rng(1)
    counts = rng.poisson(np.asarray(ds.counts, float), size=(n_resamples, len(ds.counts)))
    expect = _ordered_expectations(ds, counts)
    _, basis = _basis(2)
    return expect, basis


def kernel_args(expect, basis):
    rho = kernels._pykernels.assemble_density(expect, basis)
    w, v = np.linalg.eigh(rho)
    w = np.ascontiguousarray(w)
    p = kernels._pykernels.project_spectrum(w)
    psi = np.ascontiguousarray(PHI_DA.amplitudes)
    return {
        "assemble_density": (expect, basis),
        "project_spectrum": (w,),
        "entropy_bits": (p,),
        "pure_overlap": (p, np.ascontiguousarray(v), psi),
    }


def best_time(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--resamples", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    expect, basis = inputs(args.resamples)
    kargs = kernel_args(expect, basis)
    backends = kernels.available_backends()
    print(f"{args.resamples} resamples, 2-qubit group; best of {args.repeat} (ms)")
    print(f"{'kernel':>18} " + " ".join(f"{n:>9}" for n in sorted(backends)))
    for kname, a in kargs.items():
        row, outs = [], []
        for name in sorted(backends):
            t, out = best_time(getattr(backends[name], kname), a, args.repeat)
            row.append(t * 1e3)
            outs.append(np.asarray(out))
        for o in outs[1:]:
            assert np.allclose(o, outs[0], atol=1e-12), kname
        print(f"{kname:>18} " + " ".join(f"{t:9.3f}" for t in row))
    t0 = time.perf_counter()
    np.linalg.eigh(kernels._pykernels.assemble_density(expect, basis))
    print(f"{'(numpy eigh)':>18} {1e3 * (time.perf_counter() - t0):9.3f}")


if __name__ == "__main__":
    main()
