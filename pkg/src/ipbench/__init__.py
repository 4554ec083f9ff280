"""Interior-point nonlinear programming over a pluggable sparse LDL^T backend."""
from .bench import (
    PAPER_REPS,
    PAPER_SWEEP,
    CalibrationResult,
    ProfileCurve,
    ProfileSet,
    RunRecord,
    calibrate,
    performance_profile,
    plot_profiles,
    read_records,
    run_matrix,
    summarize,
    write_records,
)
from .ipm import (
    DegreesOfFreedomError,
    Iterate,
    KktSystem,
    SolveResult,
    SolverOptions,
    Status,
    solve,
)
from .ldl import (
    DenseLdlBackend,
    Inertia,
    PivotOptions,
    RANK_REVEALING,
    SparseLdlBackend,
    analyze,
    factorize,
    make_backend,
)
from .nlp import FunctionNlp, NlpProblem
from .problems import (
    GeneratedNlp,
    analytic_suite,
    gen_boundary_control_2d,
    gen_boundary_control_3d,
    gen_dist_control_2d,
    generate,
)
from .sparse import SymCsc, SymTriplet, fill_reducing_order, from_triplets

__all__ = [
    "PAPER_REPS", "PAPER_SWEEP", "CalibrationResult", "ProfileCurve", "ProfileSet",
    "RunRecord", "calibrate", "performance_profile", "plot_profiles", "read_records",
    "run_matrix", "summarize", "write_records",
    "DegreesOfFreedomError", "Iterate", "KktSystem", "SolveResult", "SolverOptions",
    "Status", "solve",
    "DenseLdlBackend", "Inertia", "PivotOptions", "RANK_REVEALING", "SparseLdlBackend", "analyze",
    "factorize", "make_backend",
    "FunctionNlp", "NlpProblem",
    "GeneratedNlp", "analytic_suite", "gen_boundary_control_2d", "gen_boundary_control_3d",
    "gen_dist_control_2d", "generate",
    "SymCsc", "SymTriplet", "fill_reducing_order", "from_triplets",
]
