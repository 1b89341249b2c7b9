#!/usr/bin/env python3
"""Run the whole pipeline end to end and drop every artifact in one place.

Equivalent to calling the CLI by hand:

  voss solve <feeder>            for each bundled feeder
  voss benchmark <feeder>        single-segment studies
  voss benchmark ieee34-stressed --paths 800-814,816-822,828-854
  voss oracle                    correction-factor cross-check
  voss sensors sample_day.csv sample_chain.json

Outputs land in --out-dir (default: results/). Running twice must produce
byte-identical files; the suite's acceptance test enforces that.
"""

import argparse
import sys
from pathlib import Path

from voss.cli import main as cli
from voss.feeder import bundled_feeder_path

FEEDERS = ("ieee13.feeder", "ieee34.feeder", "ieee34-stressed.feeder")
STRESSED_PATHS = "800-814,816-822,828-854"


def run(argv):
    print("$ voss " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(f"step failed with exit code {code}: voss {' '.join(argv)}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    common = ["--out-dir", str(out)]

    for name in FEEDERS:
        path = str(bundled_feeder_path(name))
        run(["solve", path] + common)
        run(["benchmark", path] + common)
    run(
        ["benchmark", str(bundled_feeder_path("ieee34-stressed.feeder")),
         "--paths", STRESSED_PATHS] + common
    )
    run(["oracle"] + common)
    run(
        ["sensors", str(bundled_feeder_path("sample_day.csv")),
         str(bundled_feeder_path("sample_chain.json"))] + common
    )

    files = sorted(p.name for p in out.iterdir())
    print(f"\n{len(files)} files in {out}/:")
    for name in files:
        print(f"  {name}")


if __name__ == "__main__":
    main()
