"""Sharp constants of sup-norm Sobolev-type inequalities on the line for
step potentials with integrable step densities and point masses, computed by
a two-step minimization: an inner box-constrained solve at a pinned peak,
then an outer minimization over the peak location."""

from .analysis import (
    BoundReport,
    NoInequalityError,
    best_constant,
    comparison_check,
    delta_closed_form,
    invariance_check,
    nondecreasing_limit,
    perturbation_bounds,
)
from .discretization import (
    AssemblyContractError,
    Grid,
    QuadraticForm,
    assemble,
    build_grid,
    embedding_check,
    energy,
)
from .inner import (
    InnerProblem,
    InnerSolution,
    InvalidPotentialError,
    MethodInapplicableError,
    make_inner_problem,
    positivity_and_ode_check,
    solve_linear,
    solve_obstacle,
    solve_transfer,
    transfer_value,
)
from .outer import (
    OuterResult,
    OuterSolverError,
    SweepResult,
    evaluate_inner,
    minimize,
    refine,
    sweep,
    trapped_mode_criterion,
)
from .potential import (
    Atom,
    Potential,
    StepFunction,
    ThresholdDecompositionError,
    decompose_threshold,
    delta_potential,
)

__version__ = "0.1.0"
