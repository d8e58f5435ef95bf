"""First p-Laplacian eigenvalues on meshes under conformal metrics."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import COMMANDS, _run_command


def run_command(command, config, out_dir=".", jobs=1, write_files=False):
    """Run a CLI experiment in-process; returns (exit_code, results, csv_body, message)."""
    code, results, csv, message = _run_command(command, _json.dumps(config), str(out_dir), jobs, write_files)
    return code, _json.loads(results) if results != "null" else None, csv, message


__all__ = [name for name in dir() if not name.startswith("_")]
