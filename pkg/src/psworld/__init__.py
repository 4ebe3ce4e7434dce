"""Problem-space world models: boundaries, activation, outcomes, sufficiency."""

from .activation import (
    ActiveSet,
    Derivation,
    SimulationTrace,
    compute_active_set,
    explain_activation,
    replay_derivation,
    simulate,
)
from .boundary import IndependenceReport, RescopePlan, rescope, verify_boundary_independence
from .diagnostics import (
    ActivationError,
    Diagnostic,
    InsufficientModelError,
    ModelIntegrityError,
    ModelSyntaxError,
    NotActiveError,
    NotRemovableError,
    PsworldError,
    RescopeError,
    SearchTooLargeError,
    Severity,
    SourceSpan,
    UngroundedOutcomeError,
    UnknownIdError,
)
from .dsl import load_model, parse_declarations, parse_model, serialize_model
from .model import (
    Boundary,
    ContextDecl,
    DesiredOutcomeLink,
    Emission,
    Entity,
    EntityKind,
    Firing,
    FunctionSpec,
    Goal,
    Interaction,
    InteractionClass,
    OutcomeDecl,
    RelayRule,
    RequirementDecl,
    Stakeholder,
    StateMachine,
    WorldModel,
    classify_all,
    classify_interaction,
    is_admissible,
)
from .outcomes import (
    OutcomeClass,
    check_invariance,
    classify_outcome,
    evaluate_outcome,
    find_minimal_sets,
    find_nonessential,
    reduce_model,
    truth_table,
)
from .sufficiency import (
    SufficiencyReport,
    audit_sufficiency,
    check_goal_satisfaction,
    impact_of_new_outcome,
)
from .validate import validate_model

__version__ = "0.1.0"


def corpus_path():
    """Path of the bundled traffic-control model."""
    from importlib.resources import files

    return files(__name__) / "data" / "traffic.psw"
