#!/usr/bin/env python3
"""Run the full verification suite and write the JSON report.

Usage: python scripts/run_verification.py [outdir]
"""

import sys

from llblow.cli import dispatch

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out_verify"
    sys.exit(dispatch(["verify", "--all", "--out", out]))
