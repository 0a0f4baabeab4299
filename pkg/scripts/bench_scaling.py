"""Time fast vs direct profile-likelihood evaluation over image sizes.

Writes bench.csv (N, method, seconds) and prints the speed-up per size.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from gpcellseg.cli import main

parser = argparse.ArgumentParser()
parser.add_argument("--sizes", default="10,20,40,80")
parser.add_argument("--repeats", type=int, default=3)
parser.add_argument("--output-dir", default="results/bench")
args = parser.parse_args()

code = main(["bench", "--sizes", args.sizes, "--repeats", str(args.repeats), "--output-dir", args.output_dir])
if code:
    raise SystemExit(code)
times = defaultdict(dict)
for row in csv.DictReader(open(Path(args.output_dir) / "bench.csv")):
    times[int(row["N"])][row["method"]] = float(row["seconds"])
for N, t in sorted(times.items()):
    for fam in ("matern52", "exp"):
        fast, direct = t[f"fast-{fam}"], t[f"direct-{fam}"]
        print(f"N={N:5d} {fam:8s} fast {fast:.4f}s direct {direct:.4f}s  x{direct / fast:.1f}")
