"""Time the compiled and pure-numpy kernels on bundle-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 200]

Prints one line per (kernel, backend) with the median time per call and the
speedup of the compiled backend.
"""

import argparse
import importlib
import timeit

import numpy as np

from lcmopt.simulate import get_bundle, random_params, sample


def _backends():
    out = {"python": importlib.import_module("lcmopt._pykernels")}
    try:
        out["cython"] = importlib.import_module("lcmopt._ckernels")
    except ImportError:
        pass
    return out


def _cases(bundle_id):
    spec = get_bundle(bundle_id)
    data = sample(spec.params, spec.n, 0)
    p = random_params(spec.K, spec.scheme, np.random.default_rng(1))
    geom = spec.scheme.layout(spec.K)
    x = np.random.default_rng(2).normal(size=geom.dim)
    eta = np.ascontiguousarray(p.eta)
    pi = np.ascontiguousarray(p.pi_matrix)
    g_eta = np.empty_like(eta)
    g_pi = np.empty_like(pi)
    out = np.empty_like(x)
    return {
        "project_blocks": lambda k: k.project_blocks(x, geom.offsets, geom.sizes, out),
        "loglik": lambda k: k.loglik(data.codes, data.counts, eta, pi),
        "loglik_grad": lambda k: k.loglik_grad(data.codes, data.counts, eta, pi, g_eta, g_pi),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bundle", default="4D")
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    backends = _backends()
    print(f"bundle {args.bundle}, {args.repeat} calls per timing, backends: {', '.join(backends)}")
    for name, call in _cases(args.bundle).items():
        times = {}
        for bname, mod in backends.items():
            runs = timeit.repeat(lambda: call(mod), number=args.repeat, repeat=5)
            times[bname] = np.median(runs) / args.repeat
            print(f"{name:15s} {bname:7s} {times[bname] * 1e6:10.2f} us/call")
        if len(times) == 2:
            print(f"{name:15s} speedup {times['python'] / times['cython']:8.1f}x")


if __name__ == "__main__":
    main()
