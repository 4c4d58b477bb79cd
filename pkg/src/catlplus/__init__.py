"""Two-layer temporal logic (CaTL+) robustness and control synthesis."""

from .autodiff import ADValue, Tape, backward, kth_largest
from .dynamics import AgentModel, ControlPlan, rollout, sample_initial_states
from .formulas import (
    Always,
    And,
    Atom,
    CatlTask,
    Circle,
    Eventually,
    Formula,
    Halfplane,
    Interval,
    Not,
    Or,
    Task,
    TrueNode,
    Until,
    horizon,
    import_catl_task,
    validate,
)
from .parsing import ParseError, parse_formula, parse_inner_formula, print_formula
from .robustness import (
    RobustnessParams,
    TeamEntry,
    TeamTrajectory,
    conj_exp,
    count,
    eta_exponential,
    eval_bool,
    rho_traditional,
    task_exp,
)
from .scenario import ScenarioConfig, ScenarioError, build_scenario, load_config
from .synthesis import (
    Scenario,
    SynthesisConfig,
    SynthesisResult,
    objective,
    sup_cost_bound,
    synthesize,
)

__version__ = "0.1.0"
