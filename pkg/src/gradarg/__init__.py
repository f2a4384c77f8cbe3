"""gradarg: gradual argumentation for multi-user preference conflicts.

Frameworks pair arguments (options, user arguments, robot/task observations)
with attack and support relations. Gradual semantics turn base scores into
final strengths; the resolver turns strengths plus a preference profile into a
decision, with analysis utilities for enumeration, attribution and
sensitivity.
"""

from .afformat import (
    ParseError,
    SourceDocument,
    parse_framework,
    serialize_framework,
    try_parse_framework,
)
from .analysis import (
    AttributionTable,
    DistributionTable,
    ExactShapley,
    PermutationSampling,
    Scenario,
    SweepResult,
    base_score_sweep,
    enumerate_decisions,
    relation_attribution,
)
from .corpus import list_corpora, load_corpus
from .dynamics import (
    AddArgument,
    EditEvent,
    GapReport,
    RemoveArgument,
    SetActive,
    SetBaseScore,
    SetPreference,
    apply_edit,
    check_addition_discrimination,
    check_basescore_discrimination,
)
from .errors import GradargError
from .model import (
    Argument,
    ArgumentKind,
    Framework,
    Polarity,
    Relation,
    ValidationReport,
    active_subframework,
    check_user_consistency,
    pro_con,
    validate_structure,
)
from .preferences import (
    ConflictClass,
    Overall,
    PreferenceProfile,
    Sign,
    classify,
    extend,
    preference_sets,
)
from .resolver import (
    Decision,
    ExternalRank,
    Interactive,
    Lexicographic,
    conflict_resolved,
    interactive_round,
    max_strength_set,
    mupcr,
)
from .semantics import (
    EvalConfig,
    SemanticsKind,
    StrengthMap,
    aggregate,
    evaluate,
    influence_qe,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
