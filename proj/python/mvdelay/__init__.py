"""Path-dependent McKean-Vlasov simulation toolkit."""

import json
import os

from ._mvdelay import (
    MvdelayError,
    RateFunction,
    __version__,
    path_distance,
    path_norm,
    solve_assignment,
    wasserstein_1d,
)
from ._mvdelay import run_command as _run_command

COMMANDS = ("simulate", "contract", "chaos", "moments", "girsanov", "rates")


def run(command, config, out_dir, seed=None, threads=None, verbose=False):
    """Run a CLI subcommand in-process; returns (exit_code, summary dict).

    config is a dict or a path to a JSON file. MVDELAY_THREADS overrides threads.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    if not isinstance(config, dict):
        with open(config) as fh:
            config = json.load(fh)
    env = os.environ.get("MVDELAY_THREADS")
    if env is not None:
        threads = int(env)
    threads = 1 if threads is None else threads
    if threads < 1:
        raise ValueError("threads must be positive")
    code, summary = _run_command(command, json.dumps(config), os.fspath(out_dir), seed, threads, verbose)
    return code, json.loads(summary)


def rates(K1, K2, R, Ksigma, beta, Kb, r0):
    return json.loads(RateFunction(K1, K2, R, Ksigma, beta).rates(Kb, r0))


__all__ = [
    "COMMANDS",
    "MvdelayError",
    "RateFunction",
    "__version__",
    "path_distance",
    "path_norm",
    "rates",
    "run",
    "solve_assignment",
    "wasserstein_1d",
]
