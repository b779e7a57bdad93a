"""Runs the bench command over a size grid; the CSV goes to stdout and --out."""
import argparse
import sys
import tempfile
from pathlib import Path

from netalign.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--algo", default="isorank")
    ap.add_argument("--sizes", default="10000,20000,40000")
    ap.add_argument("--avg-degree", default="10")
    ap.add_argument("--out")
    args = ap.parse_args()
    out = args.out or str(Path(tempfile.mkdtemp()) / f"bench_{args.algo}.csv")
    sys.exit(main(["bench", "--algo", args.algo, "--sizes", args.sizes, "--avg-degree", args.avg_degree, "--out", out]))
