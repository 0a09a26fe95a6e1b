#!/usr/bin/env python3
"""Regenerate tests/golden/ from the deterministic request script.

Each case becomes two files: NN-name.json (request, expected status) and
NN-name.body (exact response bytes).
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from golden_cases import golden_cases  # noqa: E402


def main() -> int:
    out = ROOT / "tests" / "golden"
    out.mkdir(exist_ok=True)
    for old in out.glob("*"):
        old.unlink()
    for name, request, status, response in golden_cases():
        meta = {"request": request, "status": status}
        (out / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, ensure_ascii=False) + "\n", "utf-8")
        (out / f"{name}.body").write_bytes(response)
        print(f"{status}  {name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
