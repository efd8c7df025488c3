"""Behavior models of copy and archive utilities over the in-memory image.

Each model runs on a copy of the input image and returns a CopyOutcome with
the resulting image, the operation events it produced, and (when requested)
the trace records of every destination-side file-system call.
"""

from __future__ import annotations

from ..vfs import FsImage
from .common import (
    DEGRADE,
    ERROR,
    OK,
    PROMPT,
    SKIP,
    STEP_LIMIT,
    STEP_LIMIT_HIT,
    CopyOutcome,
    Event,
    Run,
    source_entries,
)
from .cp import run_cp
from .dropbox import run_dropbox
from .rsync import run_rsync
from .tar import run_tar
from .zip import run_zip

UTILITIES = ("tar", "zip", "cp", "cp_star", "rsync", "dropbox")
LABELS = {"tar": "tar", "zip": "zip", "cp": "cp", "cp_star": "cp*", "rsync": "rsync", "dropbox": "Dropbox"}
PROGRAMS = {"tar": "tar", "zip": "unzip", "cp": "cp", "cp_star": "cp", "rsync": "rsync", "dropbox": "dropbox"}


def run_model(utility: str, image: FsImage, src: str = "/src", dst: str = "/dst", *,
              prompt_script=None, trace: bool = False, pid: int = 2389) -> CopyOutcome:
    """Copy ``src`` into the existing directory ``dst`` the way ``utility``
    would. The input image is left untouched. ``prompt_script`` answers
    unzip's questions (a list, or one string used for every question)."""
    if utility not in UTILITIES:
        raise KeyError(f"unknown utility {utility!r}; choose from {', '.join(UTILITIES)}")
    work = image.copy()
    run = Run(utility, work, src, dst)
    sink = [] if trace else None
    with work.tracing(sink, PROGRAMS[utility], pid):
        if utility == "tar":
            run_tar(run)
        elif utility == "zip":
            run_zip(run, prompt_script)
        elif utility in ("cp", "cp_star"):
            run_cp(run, star=utility == "cp_star")
        elif utility == "rsync":
            run_rsync(run)
        else:
            run_dropbox(run)
    run.outcome.trace = sink or []
    if run.outcome.terminated == OK and any(e.result == ERROR for e in run.outcome.events):
        run.outcome.terminated = ERROR
    return run.outcome


__all__ = [
    "UTILITIES", "LABELS", "run_model", "CopyOutcome", "Event", "source_entries",
    "OK", "ERROR", "SKIP", "DEGRADE", "PROMPT", "STEP_LIMIT", "STEP_LIMIT_HIT",
]
