#!/usr/bin/env python3
"""Run the acceptance suite and print one PASS/FAIL line per criterion.

Extra arguments are passed to pytest, e.g. ``-k c04`` to run one criterion.
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main(argv: list[str]) -> int:
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q", "-s", "-p", "no:cacheprovider", *argv]
    proc = subprocess.run(cmd, cwd=ROOT, capture_output=True, text=True)
    lines = [ln for ln in proc.stdout.splitlines() if ln.startswith(("[PASS]", "[FAIL]"))]
    print("\n".join(lines))
    summary = proc.stdout.strip().splitlines()[-1:] or ["(no pytest output)"]
    print(summary[0])
    if proc.returncode and not lines:
        sys.stderr.write(proc.stdout + proc.stderr)
    return proc.returncode


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
