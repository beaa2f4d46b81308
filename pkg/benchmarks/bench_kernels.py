"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--out DIR] [--repeat N]
"""
import argparse

from crp.experiment import format_bench, run_bench


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="write bench.json here")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rows = run_bench(args.out, sizes=((16, 16, 100), (32, 32, 200), (64, 64, 200)),
                     repeat=args.repeat, seed=args.seed)
    print(format_bench(rows))


if __name__ == "__main__":
    main()
