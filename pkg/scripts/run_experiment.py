#!/usr/bin/env python3
"""Run one JSON-configured experiment and print the bound reports.

Thin wrapper over `signopt run` so experiments can be launched from a
checkout without installing the console script.
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from signopt.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main(["run", *sys.argv[1:]]))
