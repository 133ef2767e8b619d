"""Finite-space multistage stochastic DP over history spaces."""

from ._tbdp import (
    SolverError,
    canonicalize,
    digest,
    lex_index,
    lex_pair,
    run_command,
    solve_history_values,
)

__all__ = [
    "SolverError",
    "canonicalize",
    "digest",
    "lex_index",
    "lex_pair",
    "run_command",
    "solve_history_values",
]
