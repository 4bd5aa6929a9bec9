"""Wall-clock complexity study: fit log-log slopes of the retention forms
over a sweep of sequence lengths and print them beside the FLOP model.

    python3 scripts/run_complexity_bench.py [--lengths 512,...,8192]
"""

import argparse
import sys

from tsgpt.bench import dominant_term, run_bench


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lengths", default="512,1024,2048,4096,8192")
    ap.add_argument("--mechanisms", default="parallel,chunkwise,attention")
    ap.add_argument("--heads", type=int, default=1)
    ap.add_argument("--d", type=int, default=16)
    args = ap.parse_args()
    lengths = [int(x) for x in args.lengths.split(",")]

    results, slopes = run_bench(lengths, args.mechanisms.split(","), heads=args.heads, d=args.d)
    print(f"{'mechanism':>10}  {'n':>6}  {'median_s':>10}  {'layer_flops':>14}  {'regime':>12}")
    for r in results:
        print(
            f"{r.mechanism:>10}  {r.n:>6}  {r.median_seconds:>10.5f}  "
            f"{r.model_flops:>14d}  {dominant_term(r.n, r.heads, r.d):>12}"
        )
    for mech, slope in slopes.items():
        print(f"{mech}: fitted log-log slope {slope:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
