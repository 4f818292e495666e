"""Run the seven schemes on four rooms and print the exploitability table.

    python3 scripts/four_rooms_benchmark.py --iters 200 --out runs/four_rooms
"""

import argparse
import sys
from pathlib import Path

from mfgbench.cli import main as cli_main

parser = argparse.ArgumentParser()
parser.add_argument("--iters", type=int, default=200)
parser.add_argument("--out", default="runs/four_rooms")
args = parser.parse_args()

out = Path(args.out)
rc = cli_main(["run", "--env", "four_rooms", "--algo", "all", "--iters", str(args.iters),
               "--out", str(out)])
if rc:
    sys.exit(rc)
dirs = sorted(str(p) for p in out.iterdir() if (p / "exploitability.csv").is_file())
sys.exit(cli_main(["compare", *dirs, "--out", str(out)]))
