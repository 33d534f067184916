"""Nitsche-XFEM optimal control of elliptic interface problems."""

from ._core import (
    ConfigurationError,
    Discretization,
    GeometryError,
    LevelSet,
    SolverError,
    convergence_study,
    eoc,
    example_info,
    project_control,
    solve_example,
)

__all__ = [
    "ConfigurationError",
    "Discretization",
    "GeometryError",
    "LevelSet",
    "SolverError",
    "convergence_study",
    "eoc",
    "example_info",
    "project_control",
    "solve_example",
]
