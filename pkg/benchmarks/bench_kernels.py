"""Time the compiled power-control kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--users 20] [--repeat 5]

Both backends run the same inputs; the script also checks that they agree
bit for bit.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from satterra import _kernels_py
from satterra.channel import build_statistics
from satterra.harness import ExperimentConfig, generate_drop
from satterra.throughput import rate_to_sinr, sinr_terms

try:
    from satterra import _kernels
except ImportError:  # extension not built
    _kernels = None


def make_inputs(users: int, aps: int, target_mbps: float, seed: int):
    cfg = ExperimentConfig.profile("paper", users=users, aps=aps, master_seed=seed)
    stats = build_statistics(generate_drop(cfg, 0))
    t = sinr_terms(stats)
    xi = np.full(users, float(rate_to_sinr(target_mbps, stats.radio, users)))
    p = np.full(users, cfg.p_max_w)
    return t, xi, p


def bench(fn, number: int, repeat: int) -> float:
    """Best time per call in microseconds."""
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number * 1e6


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=20)
    ap.add_argument("--aps", type=int, default=40)
    ap.add_argument("--target", type=float, default=50.0, help="target rate in Mbps")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    t, xi, p = make_inputs(args.users, args.aps, args.target, args.seed)
    mu = np.zeros(args.users)
    mu[::4] = 2.0
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, mod in backends.items():
        capped = lambda m=mod: m.power_iteration(t.gain2, t.cross, t.noise, xi, p, p, np.zeros_like(mu),
                                                 1e-4, 500)
        soft = lambda m=mod: m.power_iteration(t.gain2, t.cross, t.noise, xi, p, p, mu, 1e-4, 500)
        matvec = lambda m=mod: m.compensated_matvec(t.cross, p)
        results[name] = {
            "iters": capped()[1],
            "capped_us": bench(capped, 20, args.repeat),
            "soft_us": bench(soft, 20, args.repeat),
            "matvec_us": bench(matvec, 2000, args.repeat),
            "out": (capped()[0], soft()[0]),
        }

    print(f"K={args.users}, M={args.aps}, target={args.target:g} Mbps, "
          f"capped iterations={results['python']['iters']}")
    print(f"{'backend':8s} {'capped us':>11s} {'soft us':>11s} {'matvec us':>11s}")
    for name, r in results.items():
        print(f"{name:8s} {r['capped_us']:11.1f} {r['soft_us']:11.1f} {r['matvec_us']:11.2f}")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        same = all(np.array_equal(a, b) for a, b in zip(py["out"], cy["out"]))
        print(f"speedup capped={py['capped_us'] / cy['capped_us']:.1f}x "
              f"soft={py['soft_us'] / cy['soft_us']:.1f}x "
              f"matvec={py['matvec_us'] / cy['matvec_us']:.1f}x; bit-identical={same}")


if __name__ == "__main__":
    main()
