"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are called on identical inputs; the script also reports the
largest difference between their outputs.
"""
import argparse
import math
import timeit

import numpy as np

from nsparametrix import _fallback
from nsparametrix.grid_field import Grid, _axis_wavenumbers

try:
    from nsparametrix import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    g2 = Grid(2, 64)
    g3 = Grid(3, 32)
    full2, half2 = _axis_wavenumbers(g2)
    full3, half3 = _axis_wavenumbers(g3)
    c2 = rng.standard_normal((2,) + g2.spectral_shape) + 1j * rng.standard_normal((2,) + g2.spectral_shape)
    c3 = rng.standard_normal((3,) + g3.spectral_shape) + 1j * rng.standard_normal((3,) + g3.spectral_shape)
    p2 = rng.uniform(0, g2.L, (4096, 2))
    p3 = rng.uniform(0, g3.L, (2048, 3))
    v2 = rng.standard_normal((2,) + g2.shape)
    v3 = rng.standard_normal((3,) + g3.shape)
    s2 = math.sqrt(2 * 0.1 * 0.05)
    s3 = math.sqrt(2 * 0.5 * 0.05)
    return {
        "trig_eval_2d N=64 M=4096": ("trig_eval_2d", (c2, full2, half2, p2)),
        "trig_eval_3d N=32 M=2048": ("trig_eval_3d", (c3, full3, full3, half3, p3)),
        "gaussian_average_2d N=64 M=4096": ("gaussian_average_2d", (v2, p2, s2, g2.h, 6 * s2)),
        "gaussian_average_3d N=32 M=2048": ("gaussian_average_3d", (v3, p3, s3, g3.h, 6 * s3)),
    }


def _first(out):
    return out[0] if isinstance(out, tuple) else out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"python": _fallback}
    if _kernels is not None:
        backends["compiled"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':34s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup  max|diff|")
    for name, (fn, argv) in cases(rng).items():
        times, outs = {}, {}
        for b, mod in backends.items():
            f = getattr(mod, fn)
            outs[b] = _first(f(*argv))
            times[b] = min(timeit.repeat(lambda: f(*argv), number=1, repeat=args.repeat))
        row = f"{name:34s} " + " ".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(outs["python"] - outs["compiled"])))
            row += f"  {times['python'] / times['compiled']:7.2f}x  {diff:.1e}"
        print(row)


if __name__ == "__main__":
    main()
