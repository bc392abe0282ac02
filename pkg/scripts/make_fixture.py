"""Regenerate the bundled evaluation fixture under src/bearguard/data/.

    python scripts/make_fixture.py [--check]

With --check the files are rebuilt in memory and compared with the committed ones.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from bearguard.fixture import GROUND_TRUTH_FILE, PREDICTIONS_FILE, write_fixture

DATA = Path(__file__).resolve().parents[1] / "src" / "bearguard" / "data"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    if not args.check:
        for p in write_fixture(DATA):
            print(f"wrote {p}")
        return 0
    with tempfile.TemporaryDirectory() as tmp:
        write_fixture(tmp)
        stale = [n for n in (PREDICTIONS_FILE, GROUND_TRUTH_FILE)
                 if (Path(tmp) / n).read_bytes() != (DATA / n).read_bytes()]
    if stale:
        print(f"out of date: {stale}")
        return 1
    print("fixture up to date")
    return 0


if __name__ == "__main__":
    sys.exit(main())
