#!/usr/bin/env python3
"""Run the acceptance suite and stream its PASS/FAIL lines."""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    return subprocess.call(
        [sys.executable, "-m", "pytest", "-v", "-s",
         str(ROOT / "tests" / "test_acceptance.py")])


if __name__ == "__main__":
    raise SystemExit(main())
