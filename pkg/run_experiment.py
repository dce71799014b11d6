#!/usr/bin/env python3
"""Run one thermokam experiment from an .ini configuration (see configs/)."""

from __future__ import annotations

from dotenv import load_dotenv

from thermokam.cli import main


if __name__ == "__main__":
    load_dotenv()
    raise SystemExit(main())
