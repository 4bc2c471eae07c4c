"""Barrier-function attack detection and recovery: solver, simulator and certifier bindings."""

from ._core import (
    QPSolution,
    certify,
    gamma,
    load_config,
    mix_motors,
    quadrotor_derivative,
    run_scenario,
    solve_qp,
    trace_header,
    worst_case_attack_term,
)

__all__ = [
    "QPSolution",
    "certify",
    "gamma",
    "load_config",
    "mix_motors",
    "quadrotor_derivative",
    "run_scenario",
    "solve_qp",
    "trace_header",
    "worst_case_attack_term",
]
