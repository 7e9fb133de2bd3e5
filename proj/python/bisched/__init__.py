"""Scheduling with bilinear rewards: simulation, allocation solvers and trace tools."""

from ._bisched import (
    Error,
    ParseError,
    RegularizedDesign,
    Scenario,
    ValidationError,
    beta,
    build_features,
    closed_form_single_server,
    equilibrium_solve,
    estimate_reward_table,
    generate_trace,
    ingest_trace,
    kmeans,
    load_scenario,
    recommended_v,
    save_scenario,
    simulate,
    simulate_dynamics,
    solve_allocation,
    solve_oracle,
    synthetic_scenario,
    theorem_bounds,
)

POLICIES = ("sabr", "wsabr", "switching", "oracle", "nolearn", "perjob")

__all__ = [name for name in dir() if not name.startswith("_")]
