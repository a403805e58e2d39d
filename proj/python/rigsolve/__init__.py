"""Sparse blendshape-weight fitting for rigs with corrective shapes."""

from ._rigsolve import (
    GenSpec,
    QuadraticCache,
    Rig,
    RigsolveError,
    Solver,
    SynthData,
    build_cache,
    cardinality,
    cli_main,
    generate,
    load_rig,
    load_targets,
    load_weights,
    mesh_error,
    minimize_quartic,
    save_rig,
    save_targets,
    solve_qp,
)

__all__ = [
    "GenSpec",
    "QuadraticCache",
    "Rig",
    "RigsolveError",
    "Solver",
    "SynthData",
    "build_cache",
    "cardinality",
    "cli_main",
    "generate",
    "load_rig",
    "load_targets",
    "load_weights",
    "mesh_error",
    "minimize_quartic",
    "save_rig",
    "save_targets",
    "solve_qp",
]
