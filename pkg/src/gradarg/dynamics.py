"""Framework edits and executable gap-discrimination checks.

Edits are persistent-value operations: applying an event yields a new
framework and leaves the original untouched, so an event list replayed from
the initial framework reproduces the final one exactly. Events serialize to a
JSON-lines stream for session persistence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Union

from .errors import (
    DuplicateIdError,
    InvalidEventError,
    OptionEditError,
    ShapeMismatchError,
    UnknownArgumentError,
    UnknownUserError,
    NotAnOptionError,
    WouldCreateCycleError,
)
from .model import (
    Argument,
    ArgumentKind,
    Framework,
    Polarity,
    Relation,
    pro_con,
    validate_structure,
)
from .preferences import Sign
from .semantics import DEFAULT_SEMANTICS, EvalConfig, SemanticsKind, evaluate


@dataclass(frozen=True)
class AddArgument:
    argument: Argument
    relations: tuple[Relation, ...] = ()


@dataclass(frozen=True)
class RemoveArgument:
    argument_id: str


@dataclass(frozen=True)
class SetBaseScore:
    argument_id: str
    base_score: float


@dataclass(frozen=True)
class SetActive:
    argument_id: str
    active: bool


@dataclass(frozen=True)
class SetPreference:
    user: str
    option: str
    sign: Sign


EditEvent = Union[AddArgument, RemoveArgument, SetBaseScore, SetActive, SetPreference]


def apply_edit(framework: Framework, event: EditEvent) -> Framework:
    """Apply one event, re-validating structure; errors leave the input as-is."""
    if isinstance(event, AddArgument):
        return _add_argument(framework, event)
    if isinstance(event, RemoveArgument):
        return _remove_argument(framework, event.argument_id)
    if isinstance(event, SetBaseScore):
        arg = framework.argument(event.argument_id)
        return _rebuild(framework, {arg.id: replace(arg, base_score=event.base_score)})
    if isinstance(event, SetActive):
        arg = framework.argument(event.argument_id)
        if framework.is_option(arg.id):
            raise OptionEditError("options are always active")
        return _rebuild(framework, {arg.id: replace(arg, active=event.active)})
    if isinstance(event, SetPreference):
        if event.user not in framework.users:
            raise UnknownUserError(f"no user {event.user!r}")
        if event.option not in framework.options:
            raise NotAnOptionError(f"{event.option!r} is not an option")
        return Framework.of(
            framework.arguments.values(),
            framework.relations,
            options=framework.options,
            users=framework.users,
            preferences=framework.preferences.with_entry(event.user, event.option, event.sign),
        )
    raise InvalidEventError(f"unknown event type {type(event).__name__}")


def _rebuild(framework: Framework, changed: dict[str, Argument]) -> Framework:
    args = [changed.get(aid, arg) for aid, arg in framework.arguments.items()]
    return Framework.of(
        args,
        framework.relations,
        options=framework.options,
        users=framework.users,
        preferences=framework.preferences,
    )


def _add_argument(framework: Framework, event: AddArgument) -> Framework:
    new = event.argument
    if new.id in framework.arguments:
        raise DuplicateIdError(f"argument {new.id!r} already exists")
    if new.kind is ArgumentKind.OPTION:
        raise OptionEditError("options cannot be added after construction")
    for rel in event.relations:
        if new.id not in (rel.source, rel.target):
            raise InvalidEventError(
                f"relation {rel.source}->{rel.target} is not incident to {new.id}"
            )
        if rel.source in framework.options:
            raise OptionEditError(f"option {rel.source} cannot be a relation source")
    candidate = Framework.of(
        list(framework.arguments.values()) + [new],
        list(framework.relations) + list(event.relations),
        options=framework.options,
        users=framework.users,
        preferences=framework.preferences,
    )
    report = validate_structure(candidate)
    for issue in report.errors:
        if issue.code == "CYCLE":
            raise WouldCreateCycleError(f"adding {new.id} creates a cycle ({issue.subject})")
        if issue.code == "OPTION_HAS_OUTGOING":
            raise OptionEditError(issue.message)
    return candidate


def _remove_argument(framework: Framework, argument_id: str) -> Framework:
    framework.argument(argument_id)
    if framework.is_option(argument_id):
        raise OptionEditError("options cannot be removed")
    args = []
    for aid, arg in framework.arguments.items():
        if aid == argument_id:
            continue
        deps = tuple(d for d in arg.derived_active_from if d != argument_id)
        args.append(replace(arg, derived_active_from=deps))
    rels = [
        r
        for r in framework.relations
        if argument_id not in (r.source, r.target)
    ]
    return Framework.of(
        args,
        rels,
        options=framework.options,
        users=framework.users,
        preferences=framework.preferences,
    )


# -- JSON-lines event codec ----------------------------------------------------


def event_to_dict(event: EditEvent) -> dict:
    if isinstance(event, AddArgument):
        return {
            "type": "add_argument",
            "argument": _argument_to_dict(event.argument),
            "relations": [
                {"source": r.source, "target": r.target, "polarity": r.polarity.value}
                for r in event.relations
            ],
        }
    if isinstance(event, RemoveArgument):
        return {"type": "remove_argument", "argument_id": event.argument_id}
    if isinstance(event, SetBaseScore):
        return {
            "type": "set_base_score",
            "argument_id": event.argument_id,
            "base_score": event.base_score,
        }
    if isinstance(event, SetActive):
        return {"type": "set_active", "argument_id": event.argument_id, "active": event.active}
    if isinstance(event, SetPreference):
        return {
            "type": "set_preference",
            "user": event.user,
            "option": event.option,
            "sign": event.sign.value,
        }
    raise InvalidEventError(f"unknown event type {type(event).__name__}")


def event_from_dict(data: dict) -> EditEvent:
    kind = data.get("type")
    try:
        if kind == "add_argument":
            return AddArgument(
                argument=_argument_from_dict(data["argument"]),
                relations=tuple(
                    Relation(r["source"], r["target"], Polarity(r["polarity"]))
                    for r in data.get("relations", ())
                ),
            )
        if kind == "remove_argument":
            return RemoveArgument(data["argument_id"])
        if kind == "set_base_score":
            return SetBaseScore(data["argument_id"], float(data["base_score"]))
        if kind == "set_active":
            return SetActive(data["argument_id"], bool(data["active"]))
        if kind == "set_preference":
            return SetPreference(data["user"], data["option"], Sign(data["sign"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidEventError(f"malformed event payload: {exc}") from exc
    raise InvalidEventError(f"unknown event type {kind!r}")


def _argument_to_dict(argument: Argument) -> dict:
    return {
        "id": argument.id,
        "kind": argument.kind.value,
        "label": argument.label,
        "owner": argument.owner,
        "base_score": argument.base_score,
        "active": argument.active,
        "derived_active_from": list(argument.derived_active_from),
    }


def _argument_from_dict(data: dict) -> Argument:
    return Argument(
        id=data["id"],
        kind=ArgumentKind(data["kind"]),
        label=data.get("label", ""),
        owner=data.get("owner"),
        base_score=float(data.get("base_score", 0.5)),
        active=bool(data.get("active", False)),
        derived_active_from=tuple(data.get("derived_active_from", ())),
    )


def events_to_jsonl(events: Iterable[EditEvent], start_seq: int = 1) -> str:
    lines = []
    for seq, event in enumerate(events, start=start_seq):
        record = {"seq": seq}
        record.update(event_to_dict(event))
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def events_from_jsonl(text: str) -> list[tuple[int, EditEvent]]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        data = json.loads(line)
        out.append((int(data.get("seq", len(out) + 1)), event_from_dict(data)))
    return out


# -- discrimination checks -----------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    o1: str
    o2: str
    gap_before: float
    gap_after: float
    applicable: bool
    reason: str | None = None
    direction: str = "raised"

    @property
    def widened(self) -> bool:
        return self.gap_after > self.gap_before


def _not_applicable(o1: str, o2: str, gap_before: float, gap_after: float, reason: str, direction: str = "raised") -> GapReport:
    return GapReport(o1, o2, gap_before, gap_after, applicable=False, reason=reason, direction=direction)


def _pure_parity(framework: Framework, candidate: str, o1: str, o2: str) -> bool:
    """True when every influence path of ``candidate`` favours o1 over o2."""
    pro1, con1 = pro_con(framework, o1)
    pro2, con2 = pro_con(framework, o2)
    helps = candidate in pro1 or candidate in con2
    hurts = candidate in con1 or candidate in pro2
    return helps and not hurts


def check_addition_discrimination(
    before: Framework,
    after: Framework,
    o1: str,
    o2: str,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
) -> GapReport:
    """Check that adding one pro-o1/con-o2 argument widened sigma(o1)-sigma(o2).

    Preconditions that cannot hold strictly (zero base score, saturated
    strengths, mixed-parity paths) yield an inapplicable report instead of a
    verdict.
    """
    added = set(after.arguments) - set(before.arguments)
    removed = set(before.arguments) - set(after.arguments)
    if len(added) != 1 or removed:
        raise ShapeMismatchError("after must equal before plus exactly one argument")
    alpha = added.pop()
    extra = set(after.relations) - set(before.relations)
    if set(before.relations) - set(after.relations) or any(
        alpha not in (r.source, r.target) for r in extra
    ):
        raise ShapeMismatchError("relation changes must all be incident to the new argument")

    sig_before = evaluate(before, kind, config)
    sig_after = evaluate(after, kind, config)
    gap_before = sig_before[o1] - sig_before[o2]
    gap_after = sig_after[o1] - sig_after[o2]

    if after.arguments[alpha].base_score <= 0.0:
        return _not_applicable(o1, o2, gap_before, gap_after, "added argument has zero base score")
    if alpha not in sig_after:
        return _not_applicable(o1, o2, gap_before, gap_after, "added argument is inactive")
    for option in (o1, o2):
        if not 0.0 < sig_before[option] < 1.0:
            return _not_applicable(o1, o2, gap_before, gap_after, f"{option} is saturated")
    targets = [r.target for r in extra if r.source == alpha]
    if not any(0.0 < sig_before.get(t, 0.0) < 1.0 for t in targets):
        return _not_applicable(o1, o2, gap_before, gap_after, "no responsive direct target")
    if not _pure_parity(after, alpha, o1, o2):
        return _not_applicable(o1, o2, gap_before, gap_after, "mixed or unrelated influence paths")

    return GapReport(o1, o2, gap_before, gap_after, applicable=True)


def check_basescore_discrimination(
    before: Framework,
    after: Framework,
    o1: str,
    o2: str,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
) -> GapReport:
    """Check the gap response to a single base-score change.

    Raising the base score of a purely pro-o1/con-o2 argument widens the
    sigma(o1)-sigma(o2) gap; symmetrically, lowering a purely con-o1/pro-o2
    argument widens it too (``direction`` records which case applies).
    Everything else is reported as inapplicable.
    """
    if set(before.arguments) != set(after.arguments) or before.relations != after.relations:
        raise ShapeMismatchError("frameworks must share arguments and relations")
    changed = [
        aid
        for aid in before.arguments
        if before.arguments[aid].base_score != after.arguments[aid].base_score
    ]
    if len(changed) != 1:
        raise ShapeMismatchError("exactly one base score must differ")
    alpha = changed[0]
    direction = (
        "raised"
        if after.arguments[alpha].base_score > before.arguments[alpha].base_score
        else "lowered"
    )

    sig_before = evaluate(before, kind, config)
    sig_after = evaluate(after, kind, config)
    gap_before = sig_before[o1] - sig_before[o2]
    gap_after = sig_after[o1] - sig_after[o2]

    if alpha not in sig_before:
        return _not_applicable(o1, o2, gap_before, gap_after, "changed argument is inactive", direction)
    for option in (o1, o2):
        if not 0.0 < sig_before[option] < 1.0:
            return _not_applicable(o1, o2, gap_before, gap_after, f"{option} is saturated", direction)
    helped, harmed = (o1, o2) if direction == "raised" else (o2, o1)
    if not _pure_parity(before, alpha, helped, harmed):
        return _not_applicable(o1, o2, gap_before, gap_after, "mixed or unrelated influence paths", direction)

    return GapReport(o1, o2, gap_before, gap_after, applicable=True, direction=direction)
