"""Multi-user preference conflict resolution.

Resolution first classifies the (totalised) preference profile. Conflicting
profiles are decided by strength alone over all options; non-conflicting ones
restrict the candidate pool to the profile-derived option sets first. Ties are
handed to a pluggable tie-break strategy, which may solicit new arguments and
re-run the whole resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

from .dynamics import AddArgument, apply_edit
from .errors import (
    EmptyCandidatesError,
    NoEligibleOptionError,
    NotATieError,
    UnknownArgumentError,
)
from .model import Framework
from .preferences import classify, preference_sets
from .semantics import DEFAULT_SEMANTICS, EvalConfig, SemanticsKind, StrengthMap, evaluate

DEFAULT_TIE_EPSILON = 1e-9
MAX_INTERACTIVE_ROUNDS = 5

# Called on a tie: (candidates, framework, semantics, round) -> new arguments.
ArgumentProvider = Callable[[Sequence[str], Framework, SemanticsKind, int], Iterable[AddArgument]]


@dataclass(frozen=True)
class Lexicographic:
    """Pick the smallest option id; fully deterministic."""

    def pick(self, candidates: Sequence[str], framework: Framework, kind: SemanticsKind) -> str:
        return min(candidates)


@dataclass(frozen=True)
class ExternalRank:
    """Pick the candidate ranked best by a caller-supplied total order."""

    order: tuple[str, ...]

    def pick(self, candidates: Sequence[str], framework: Framework, kind: SemanticsKind) -> str:
        missing = [c for c in candidates if c not in self.order]
        if missing:
            raise UnknownArgumentError(f"external rank does not cover {missing}")
        return min(candidates, key=self.order.index)


@dataclass(frozen=True)
class Interactive:
    """Solicit new arguments on ties and re-run; falls back after max_rounds.

    The provider is only consulted in in-process use; a service front-end
    instead surfaces the tie to its clients and re-runs after they post
    events.
    """

    provider: ArgumentProvider | None = None
    max_rounds: int = MAX_INTERACTIVE_ROUNDS


TieBreakStrategy = Union[Lexicographic, ExternalRank, Interactive]


@dataclass(frozen=True)
class Decision:
    selected: str
    branch: str  # "C", "NC1", "NC2" or "NC3"
    candidate_set: tuple[str, ...]
    strengths: StrengthMap
    tie: bool
    rounds: int = 0
    resolved: bool = True
    fallback_reason: str | None = None


def max_strength_set(
    options: Sequence[str],
    strengths: Mapping[str, float],
    tie_epsilon: float = DEFAULT_TIE_EPSILON,
) -> tuple[str, ...]:
    """Options whose strength is within tie_epsilon of the maximum."""
    if not options:
        raise EmptyCandidatesError("no options to choose from")
    top = max(strengths[o] for o in options)
    return tuple(o for o in options if strengths[o] >= top - tie_epsilon)


def conflict_resolved(
    strengths: Mapping[str, float],
    options: Sequence[str],
    tie_epsilon: float = DEFAULT_TIE_EPSILON,
) -> bool:
    """True iff one option strictly dominates all others beyond tie_epsilon."""
    if not options:
        raise EmptyCandidatesError("no options to check")
    return len(max_strength_set(options, strengths, tie_epsilon)) == 1


def interactive_round(
    framework: Framework,
    candidates: Sequence[str],
    new_arguments: Iterable[AddArgument],
) -> Framework:
    """Apply tie-breaking additions; the caller re-runs resolution afterwards."""
    if len(candidates) < 2:
        raise NotATieError("interactive rounds only apply to ties")
    for event in new_arguments:
        framework = apply_edit(framework, event)
    return framework


def _branch_pool(framework: Framework, labels: frozenset[str], is_conflict: bool):
    options = framework.options
    if is_conflict:
        return "C", tuple(options)
    profile = framework.total_preferences()
    plus, zero, minus = preference_sets(profile)
    if "NC1" in labels:
        for pool in (plus, zero, minus):
            if pool:
                return "NC1", tuple(o for o in options if o in pool)
        return "NC1", ()
    if "NC2" in labels:
        return "NC2", tuple(o for o in options if o in plus)
    eligible = zero - minus
    return "NC3", tuple(o for o in options if o in eligible)


def mupcr(
    framework: Framework,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    strategy: TieBreakStrategy | None = None,
    config: EvalConfig | None = None,
    tie_epsilon: float = DEFAULT_TIE_EPSILON,
) -> Decision:
    """Select an option from strengths and the preference-conflict class.

    Conflicts go straight to the strength argmax over all options;
    non-conflicting profiles draw candidates from the positively preferred
    options first (NC1/NC2) or the commonly indifferent, unrejected ones
    (NC3). Ties within tie_epsilon are delegated to the strategy.
    """
    strategy = strategy if strategy is not None else Lexicographic()
    rounds = 0
    fallback = None
    while True:
        cls = classify(framework.total_preferences())
        strengths = evaluate(framework, kind, config)
        branch, pool = _branch_pool(framework, cls.labels, cls.is_conflict)
        if not pool:
            raise NoEligibleOptionError(
                f"branch {branch} has no eligible option (labels {sorted(cls.labels)})"
            )
        candidates = max_strength_set(pool, strengths, tie_epsilon)
        if len(candidates) == 1:
            return Decision(
                selected=candidates[0],
                branch=branch,
                candidate_set=candidates,
                strengths=strengths,
                tie=False,
                rounds=rounds,
                resolved=True,
                fallback_reason=fallback,
            )
        if isinstance(strategy, Interactive):
            if rounds >= strategy.max_rounds:
                return Decision(
                    selected=Lexicographic().pick(candidates, framework, kind),
                    branch=branch,
                    candidate_set=candidates,
                    strengths=strengths,
                    tie=True,
                    rounds=rounds,
                    resolved=False,
                    fallback_reason="MAX_ROUNDS_EXCEEDED",
                )
            additions = (
                tuple(strategy.provider(candidates, framework, kind, rounds))
                if strategy.provider is not None
                else ()
            )
            framework = interactive_round(framework, candidates, additions)
            rounds += 1
            continue
        return Decision(
            selected=strategy.pick(candidates, framework, kind),
            branch=branch,
            candidate_set=candidates,
            strengths=strengths,
            tie=True,
            rounds=rounds,
            resolved=False,
            fallback_reason=fallback,
        )
