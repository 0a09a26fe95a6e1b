#!/usr/bin/env python3
"""Run the employee-agent scenario and save its transcript.

Usage: run_demo.py [--frozen-clock] [--tamper-compliance] [--out FILE]
"""

import argparse
import io
import sys

from agentfacts.cli import run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frozen-clock", action="store_true", help="stop the clock at the escalation instant")
    ap.add_argument("--tamper-compliance", action="store_true", help="corrupt the compliance section before evaluation")
    ap.add_argument("--out", help="also write the transcript to this file")
    args = ap.parse_args()
    argv = ["demo", "employee-agent"]
    argv += ["--frozen-clock"] if args.frozen_clock else []
    argv += ["--tamper-compliance"] if args.tamper_compliance else []
    buf = io.StringIO()
    code = run(argv, stdout=buf)
    sys.stdout.write(buf.getvalue())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    print(f"exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
