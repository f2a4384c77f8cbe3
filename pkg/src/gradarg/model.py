"""Core data model: arguments, polarized relations, frameworks.

A framework bundles arguments (options, user arguments, task arguments),
attack/support relations, an ordered set of option arguments, users, and a
preference profile. Framework values are immutable; every operation returns a
new value, so they are safe to share across threads.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import (
    BadScoreError,
    CycleError,
    DuplicateIdError,
    DuplicateRelationError,
    MissingOwnerError,
    NotAnOptionError,
    OptionEditError,
    SelfRelationError,
    UnknownArgumentError,
    UnknownReferenceError,
    UnknownUserError,
)
from .preferences import PreferenceProfile, Sign, extend

ID_PATTERN = re.compile(r"[A-Za-z][A-Za-z0-9_¬]*\Z")


def canonical_id(token: str) -> str:
    """Normalise an argument id; a leading "¬" is spelled ``not_``."""
    if token.startswith("¬"):
        return "not_" + token[1:]
    return token


class Polarity(enum.Enum):
    ATTACK = "att"
    SUPPORT = "sup"


class ArgumentKind(enum.Enum):
    OPTION = "option"
    USER = "user"
    TASK = "task"


@dataclass(frozen=True)
class Argument:
    id: str
    kind: ArgumentKind
    label: str = ""
    owner: str | None = None
    base_score: float = 0.5
    active: bool = False
    # "active iff at least one of these is active"; overrides the own flag.
    derived_active_from: tuple[str, ...] = ()


@dataclass(frozen=True)
class Relation:
    source: str
    target: str
    polarity: Polarity

    @property
    def is_attack(self) -> bool:
        return self.polarity is Polarity.ATTACK

    def key(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class Framework:
    """Immutable argumentation framework value.

    Use :meth:`Framework.of` to construct; it validates referential integrity
    and normalises storage order so that equal values compare equal.
    """

    arguments: dict[str, Argument]
    relations: tuple[Relation, ...]
    options: tuple[str, ...]
    users: tuple[str, ...]
    preferences: PreferenceProfile
    _incoming: dict[str, tuple[Relation, ...]] = field(
        default_factory=dict, compare=False, repr=False
    )
    _outgoing: dict[str, tuple[Relation, ...]] = field(
        default_factory=dict, compare=False, repr=False
    )

    # -- construction -----------------------------------------------------

    @staticmethod
    def of(
        arguments: Iterable[Argument],
        relations: Iterable[Relation] = (),
        options: Iterable[str] = (),
        users: Iterable[str] = (),
        preferences: PreferenceProfile | None = None,
    ) -> "Framework":
        args: dict[str, Argument] = {}
        for arg in arguments:
            if not arg.id or not ID_PATTERN.match(arg.id):
                raise UnknownReferenceError(f"invalid argument id {arg.id!r}")
            if arg.id in args:
                raise DuplicateIdError(f"duplicate argument id {arg.id!r}")
            if not 0.0 <= arg.base_score <= 1.0:
                raise BadScoreError(
                    f"base score of {arg.id} is {arg.base_score}; must be in [0, 1]"
                )
            if "\n" in arg.label or "\r" in arg.label:
                raise UnknownReferenceError(f"label of {arg.id} contains a newline")
            args[arg.id] = replace(
                arg, derived_active_from=tuple(sorted(set(arg.derived_active_from)))
            )

        user_list = tuple(sorted(set(users)))
        user_set = set(user_list)
        for arg in args.values():
            if arg.kind is ArgumentKind.USER:
                if arg.owner is None:
                    raise MissingOwnerError(f"user argument {arg.id} has no owner")
                if arg.owner not in user_set:
                    raise UnknownReferenceError(
                        f"owner {arg.owner!r} of {arg.id} is not a declared user"
                    )
            elif arg.owner is not None:
                raise UnknownReferenceError(
                    f"{arg.kind.value} argument {arg.id} must not have an owner"
                )
            for dep in arg.derived_active_from:
                if dep not in args:
                    raise UnknownReferenceError(
                        f"derived activation of {arg.id} references unknown {dep!r}"
                    )

        option_list = tuple(options)
        option_set = set(option_list)
        if len(option_set) != len(option_list):
            raise DuplicateIdError("duplicate option id")
        for oid in option_list:
            if oid not in args:
                raise UnknownReferenceError(f"option {oid!r} is not a declared argument")
            if args[oid].kind is not ArgumentKind.OPTION:
                raise NotAnOptionError(f"argument {oid!r} is not of option kind")
            args[oid] = replace(args[oid], active=True)
        for arg in args.values():
            if arg.kind is ArgumentKind.OPTION and arg.id not in option_set:
                raise NotAnOptionError(
                    f"option-kind argument {arg.id!r} missing from the options list"
                )

        seen: set[tuple[str, str]] = set()
        rels: list[Relation] = []
        for rel in relations:
            if rel.source == rel.target:
                raise SelfRelationError(f"relation {rel.source}->{rel.target} is a self-loop")
            for endpoint in (rel.source, rel.target):
                if endpoint not in args:
                    raise UnknownReferenceError(
                        f"relation endpoint {endpoint!r} is not a declared argument"
                    )
            if rel.key() in seen:
                raise DuplicateRelationError(
                    f"more than one relation between {rel.source} and {rel.target}"
                )
            seen.add(rel.key())
            rels.append(rel)
        rels.sort(key=lambda r: r.key())

        profile = preferences if preferences is not None else PreferenceProfile()
        for user, option, _ in profile.items():
            if user not in user_set:
                raise UnknownUserError(f"preference names unknown user {user!r}")
            if option not in option_set:
                raise NotAnOptionError(f"preference names non-option {option!r}")

        incoming: dict[str, list[Relation]] = {a: [] for a in args}
        outgoing: dict[str, list[Relation]] = {a: [] for a in args}
        for rel in rels:
            incoming[rel.target].append(rel)
            outgoing[rel.source].append(rel)

        return Framework(
            arguments=args,
            relations=tuple(rels),
            options=option_list,
            users=user_list,
            preferences=profile,
            _incoming={k: tuple(v) for k, v in incoming.items()},
            _outgoing={k: tuple(v) for k, v in outgoing.items()},
        )

    # -- accessors ---------------------------------------------------------

    def argument(self, argument_id: str) -> Argument:
        try:
            return self.arguments[argument_id]
        except KeyError:
            raise UnknownArgumentError(f"no argument {argument_id!r}") from None

    def incoming(self, argument_id: str) -> tuple[Relation, ...]:
        self.argument(argument_id)
        return self._incoming.get(argument_id, ())

    def outgoing(self, argument_id: str) -> tuple[Relation, ...]:
        self.argument(argument_id)
        return self._outgoing.get(argument_id, ())

    def attackers_of(self, argument_id: str) -> tuple[str, ...]:
        return tuple(r.source for r in self.incoming(argument_id) if r.is_attack)

    def supporters_of(self, argument_id: str) -> tuple[str, ...]:
        return tuple(r.source for r in self.incoming(argument_id) if not r.is_attack)

    def is_option(self, argument_id: str) -> bool:
        return argument_id in self.options

    def total_preferences(self) -> PreferenceProfile:
        return extend(self.preferences, self.options, self.users)

    def base_scores(self) -> dict[str, float]:
        return {a.id: a.base_score for a in self.arguments.values()}


# -- structural validation --------------------------------------------------


def topological_order(framework: Framework) -> list[str] | None:
    """Sources-first order, or None when the graph is cyclic. Deterministic."""
    indegree = {aid: len(framework._incoming.get(aid, ())) for aid in framework.arguments}
    ready = sorted(aid for aid, d in indegree.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for rel in framework._outgoing.get(node, ()):
            indegree[rel.target] -= 1
            if indegree[rel.target] == 0:
                ready.append(rel.target)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(framework.arguments):
        return None
    return order


def _cyclic_arguments(framework: Framework) -> set[str]:
    """Arguments with a path back to themselves (members of non-trivial SCCs)."""
    index_counter = [0]
    stack: list[str] = []
    lowlink: dict[str, int] = {}
    index: dict[str, int] = {}
    on_stack: set[str] = set()
    cyclic: set[str] = set()

    def strongconnect(root: str) -> None:
        work = [(root, iter(framework._outgoing.get(root, ())))]
        index[root] = lowlink[root] = index_counter[0]
        index_counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for rel in it:
                succ = rel.target
                if succ not in index:
                    index[succ] = lowlink[succ] = index_counter[0]
                    index_counter[0] += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(framework._outgoing.get(succ, ()))))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1:
                    cyclic.update(component)

    for aid in framework.arguments:
        if aid not in index:
            strongconnect(aid)
    return cyclic


def reaches_option(framework: Framework) -> set[str]:
    """Arguments with a directed path (length >= 1) to at least one option."""
    reach: set[str] = set()
    frontier = list(framework.options)
    while frontier:
        node = frontier.pop()
        for rel in framework._incoming.get(node, ()):
            if rel.source not in reach:
                reach.add(rel.source)
                frontier.append(rel.source)
    return reach


def validate_structure(framework: Framework) -> ValidationReport:
    """Check the option-rootedness and acyclicity requirements.

    Errors: OPTION_HAS_OUTGOING for relations leaving an option, CYCLE for
    arguments lying on a directed cycle. Non-option arguments with no path to
    any option are reported as NO_PATH_TO_OPTION warnings; they stay present
    but cannot influence option strengths.
    """
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []

    for rel in framework.relations:
        if framework.is_option(rel.source):
            errors.append(
                ValidationIssue(
                    "OPTION_HAS_OUTGOING",
                    f"{rel.source}->{rel.target}",
                    f"option {rel.source} must not have outgoing relations",
                )
            )

    for aid in sorted(_cyclic_arguments(framework)):
        errors.append(
            ValidationIssue("CYCLE", aid, f"argument {aid} lies on a directed cycle")
        )

    reach = reaches_option(framework)
    for aid in sorted(framework.arguments):
        if framework.is_option(aid):
            continue
        if aid not in reach:
            warnings.append(
                ValidationIssue(
                    "NO_PATH_TO_OPTION",
                    aid,
                    f"argument {aid} has no path to any option and stays inert",
                )
            )

    return ValidationReport(tuple(errors), tuple(warnings))


# -- activation --------------------------------------------------------------


def effective_activation(
    framework: Framework, overrides: Mapping[str, bool] | None = None
) -> dict[str, bool]:
    """Resolve per-argument activation.

    Overrides replace the stored flags, options are always active, and
    derived-activation rules win last: a rule argument is active iff at least
    one of its listed activators is. Rules are resolved as a least fixpoint so
    chains of rule arguments behave consistently.
    """
    overrides = dict(overrides or {})
    for key in overrides:
        framework.argument(key)

    state: dict[str, bool] = {}
    for aid, arg in framework.arguments.items():
        if framework.is_option(aid):
            state[aid] = True
        elif arg.derived_active_from:
            state[aid] = False
        else:
            state[aid] = overrides.get(aid, arg.active)

    rule_args = [a for a in framework.arguments.values() if a.derived_active_from]
    changed = True
    while changed:
        changed = False
        for arg in rule_args:
            value = any(state[dep] for dep in arg.derived_active_from)
            if value and not state[arg.id]:
                state[arg.id] = True
                changed = True
    return state


def active_subframework(
    framework: Framework, overrides: Mapping[str, bool] | None = None
) -> Framework:
    """Framework induced by the effectively active arguments.

    Relations with an inactive endpoint are dropped, as are derived-rule
    references to dropped arguments; surviving arguments carry active=True.
    """
    state = effective_activation(framework, overrides)
    keep = {aid for aid, on in state.items() if on}
    args = []
    for aid, arg in framework.arguments.items():
        if aid not in keep:
            continue
        deps = tuple(d for d in arg.derived_active_from if d in keep)
        args.append(replace(arg, active=True, derived_active_from=deps))
    rels = [r for r in framework.relations if r.source in keep and r.target in keep]
    return Framework.of(
        args,
        rels,
        options=framework.options,
        users=framework.users,
        preferences=framework.preferences,
    )


# -- path parity (pro/con) ----------------------------------------------------


def pro_con(framework: Framework, option: str) -> tuple[frozenset[str], frozenset[str]]:
    """Arguments reaching ``option`` through an even / odd number of attacks.

    Membership is structural (activation flags are ignored) and an argument may
    appear on both sides when distinct paths have distinct parities.
    """
    if option not in framework.options:
        raise NotAnOptionError(f"{option!r} is not an option of this framework")
    order = topological_order(framework)
    if order is None:
        raise CycleError("pro/con analysis requires an acyclic framework")

    even: dict[str, bool] = {aid: False for aid in framework.arguments}
    odd: dict[str, bool] = {aid: False for aid in framework.arguments}
    # Sinks first: a node's parity reach only depends on its successors.
    for node in reversed(order):
        e = o = False
        for rel in framework._outgoing.get(node, ()):
            succ = rel.target
            flip = rel.is_attack
            succ_even = even[succ] or succ == option
            if flip:
                e = e or odd[succ]
                o = o or succ_even
            else:
                e = e or succ_even
                o = o or odd[succ]
            if e and o:
                break
        even[node], odd[node] = e, o
    return (
        frozenset(a for a, v in even.items() if v),
        frozenset(a for a, v in odd.items() if v),
    )


@dataclass(frozen=True)
class ConsistencyEntry:
    option: str
    sign: Sign
    has_pro: bool
    has_con: bool
    consistent: bool


def check_user_consistency(framework: Framework, user: str) -> dict[str, ConsistencyEntry]:
    """Check whether a user's stated signs are backed by their own arguments.

    A + preference needs an owned pro argument, a - preference an owned con
    argument, and indifference needs either both or neither.
    """
    if user not in framework.users:
        raise UnknownUserError(f"no user {user!r}")
    owned = {a.id for a in framework.arguments.values() if a.owner == user}
    profile = framework.total_preferences()
    report: dict[str, ConsistencyEntry] = {}
    for option in framework.options:
        pro, con = pro_con(framework, option)
        has_pro = bool(owned & pro)
        has_con = bool(owned & con)
        sign = profile.sign(user, option)
        if sign is Sign.POSITIVE:
            consistent = has_pro
        elif sign is Sign.NEGATIVE:
            consistent = has_con
        else:
            consistent = (has_pro and has_con) or (not has_pro and not has_con)
        report[option] = ConsistencyEntry(option, sign, has_pro, has_con, consistent)
    return report
