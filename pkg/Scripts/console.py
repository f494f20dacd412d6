"""Console logging helpers shared by the CLI and long-running library calls."""

from __future__ import annotations

import sys

BAR_LEN = 30

_QUIET = False


def set_quiet(quiet: bool) -> None:
    global _QUIET
    _QUIET = bool(quiet)


def log(msg: str) -> None:
    if not _QUIET:
        print(msg, flush=True)


def log_status(percent: int, message: str) -> None:
    if _QUIET:
        return
    percent = max(0, min(100, percent))
    filled = int(BAR_LEN * percent // 100)
    bar = "=" * filled + "-" * (BAR_LEN - filled)
    print(f"[{bar}] {percent:3d}%  {message}", flush=True)


def log_detail(message: str) -> None:
    if not _QUIET:
        print(f"Detail: {message}", flush=True)


def log_warning(message: str) -> None:
    if not _QUIET:
        print(f"Warning: {message}", flush=True)


def log_error(message: str) -> None:
    # errors are never silenced
    print(f"❌ ERROR: {message}", file=sys.stderr, flush=True)
