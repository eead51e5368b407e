"""Time each counting kernel on both backends.

    python3 benchmarks/bench_kernels.py --size 128 --repeat 5
"""
import argparse
import timeit

import numpy as np

from radiloc import kernels


def workloads(levels, ng):
    return {
        "glcm": lambda m: m.glcm_counts(levels, ng, -1, 1),
        "glrlm": lambda m: m.glrlm_counts(levels, ng, -1, 1),
        "glszm": lambda m: m.glszm_counts(levels, ng),
        "ngtdm": lambda m: m.ngtdm_stats(levels, ng, 1),
        "gldm": lambda m: m.gldm_counts(levels, ng, 1, 0),
        "label": lambda m: m.label_components(levels > ng // 2, 8),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128, help="side of the square ROI")
    ap.add_argument("--ng", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    levels = rng.integers(1, args.ng + 1, (args.size, args.size))
    levels[rng.random(levels.shape) < 0.1] = 0
    found = kernels.backends()
    names = sorted(found)
    print(f"ROI {args.size}x{args.size}, ng={args.ng}, best of {args.repeat} (ms)")
    print(f"{'kernel':<8}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for kernel, fn in workloads(levels, args.ng).items():
        times = {n: min(timeit.repeat(lambda: fn(found[n]), number=1, repeat=args.repeat)) * 1e3
                 for n in names}
        row = f"{kernel:<8}" + "".join(f"{times[n]:>12.3f}" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
