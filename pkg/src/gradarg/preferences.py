"""Categorical preferences over options and conflict classification.

A user marks each option as preferred (+), undesirable (-), or indifferent (0).
Profiles are stored partially; :func:`extend` totalises them by filling every
unmentioned (user, option) pair with indifference.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ConflictingSignError, InvalidProfileError

# Above this many users the NC.2 check switches from an explicit search over
# user subsets to the equivalent closed-form test.
_NC2_SUBSET_SEARCH_LIMIT = 6


class Sign(enum.Enum):
    POSITIVE = "+"
    NEGATIVE = "-"
    INDIFFERENT = "0"

    @classmethod
    def from_token(cls, token: str) -> "Sign":
        for sign in cls:
            if sign.value == token:
                return sign
        raise ValueError(f"not a preference sign: {token!r}")


class Overall(enum.Enum):
    NO_CONFLICT = "no_conflict"
    CONFLICT = "conflict"


@dataclass(frozen=True)
class ConflictClass:
    """Set of matched taxonomy labels plus the overall verdict."""

    labels: frozenset[str]
    overall: Overall

    @property
    def is_conflict(self) -> bool:
        return self.overall is Overall.CONFLICT


class PreferenceProfile:
    """Immutable map from (user, option) to an explicit :class:`Sign`.

    Pairs without an explicit entry are implicitly indifferent; :meth:`sign`
    reflects that, while :meth:`items` exposes only explicit entries.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[tuple[str, str, Sign]] | Mapping[tuple[str, str], Sign] = ()):
        store: dict[tuple[str, str], Sign] = {}
        if isinstance(entries, Mapping):
            entries = [(u, o, s) for (u, o), s in entries.items()]
        for user, option, sign in entries:
            if not isinstance(sign, Sign):
                sign = Sign.from_token(str(sign))
            key = (user, option)
            if key in store and store[key] is not sign:
                raise ConflictingSignError(
                    f"preference for ({user}, {option}) stated as both "
                    f"{store[key].value!r} and {sign.value!r}"
                )
            store[key] = sign
        self._entries = store

    def sign(self, user: str, option: str) -> Sign:
        return self._entries.get((user, option), Sign.INDIFFERENT)

    def items(self) -> Iterator[tuple[str, str, Sign]]:
        return ((u, o, s) for (u, o), s in self._entries.items())

    def users(self) -> frozenset[str]:
        return frozenset(u for u, _ in self._entries)

    def options(self) -> frozenset[str]:
        return frozenset(o for _, o in self._entries)

    def with_entry(self, user: str, option: str, sign: Sign) -> "PreferenceProfile":
        store = dict(self._entries)
        store[(user, option)] = sign
        return PreferenceProfile({k: v for k, v in store.items()})

    def without_user(self, user: str) -> "PreferenceProfile":
        return PreferenceProfile({k: v for k, v in self._entries.items() if k[0] != user})

    def without_option(self, option: str) -> "PreferenceProfile":
        return PreferenceProfile({k: v for k, v in self._entries.items() if k[1] != option})

    def is_total_over(self, users: Iterable[str], options: Iterable[str]) -> bool:
        return all((u, o) in self._entries for u in users for o in options)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PreferenceProfile):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(frozenset(self._entries.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"({u}, {o}): {s.value}" for (u, o), s in sorted(self._entries.items()))
        return f"PreferenceProfile({{{body}}})"


def extend(profile: PreferenceProfile, options: Iterable[str], users: Iterable[str]) -> PreferenceProfile:
    """Totalise ``profile``: keep explicit entries, fill the rest with 0."""
    entries: dict[tuple[str, str], Sign] = {}
    for user in users:
        for option in options:
            entries[(user, option)] = profile.sign(user, option)
    return PreferenceProfile(entries)


def preference_sets(profile: PreferenceProfile) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    """Options marked +, 0 and - by at least one user each (may overlap)."""
    plus, zero, minus = set(), set(), set()
    for _, option, sign in profile.items():
        if sign is Sign.POSITIVE:
            plus.add(option)
        elif sign is Sign.INDIFFERENT:
            zero.add(option)
        else:
            minus.add(option)
    return frozenset(plus), frozenset(zero), frozenset(minus)


def _nc1(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    if len(users) < 2:
        return True
    first = users[0]
    return all(
        profile.sign(u, o) is profile.sign(first, o) for u in users[1:] for o in options
    )


def _nc2_closed_form(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    # Some option o is the only positively preferred option anywhere, and every
    # user not preferring o is explicitly indifferent to it.
    for o in options:
        holders = [u for u in users if profile.sign(u, o) is Sign.POSITIVE]
        if not holders:
            continue
        other_positive = any(
            profile.sign(u, o2) is Sign.POSITIVE for u in users for o2 in options if o2 != o
        )
        if other_positive:
            continue
        if all(profile.sign(u, o) is Sign.INDIFFERENT for u in users if u not in holders):
            return True
    return False


def _nc2_subset_search(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    for o in options:
        for r in range(1, len(users) + 1):
            for group in itertools.combinations(users, r):
                chosen = set(group)
                ok = all(
                    profile.sign(u, o) is Sign.POSITIVE
                    and not any(
                        profile.sign(u, o2) is Sign.POSITIVE for o2 in options if o2 != o
                    )
                    for u in chosen
                )
                if not ok:
                    continue
                rest_ok = all(
                    profile.sign(u, o) is Sign.INDIFFERENT
                    and not any(
                        profile.sign(u, o2) is Sign.POSITIVE for o2 in options if o2 != o
                    )
                    for u in users
                    if u not in chosen
                )
                if rest_ok:
                    return True
    return False


def _nc3(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    # No user prefers anything, and each user is indifferent to at least one option.
    for u in users:
        if any(profile.sign(u, o) is Sign.POSITIVE for o in options):
            return False
        if not any(profile.sign(u, o) is Sign.INDIFFERENT for o in options):
            return False
    return True


def _c1(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    for o in options:
        signs = {profile.sign(u, o) for u in users}
        if Sign.POSITIVE in signs and Sign.NEGATIVE in signs:
            return True
    return False


def _c2(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    # One user prefers an option the other does not prefer.
    for o in options:
        holders = [u for u in users if profile.sign(u, o) is Sign.POSITIVE]
        if holders and len(holders) < len(users):
            return True
    return False


def _c3(profile: PreferenceProfile, users: Sequence[str], options: Sequence[str]) -> bool:
    # One user rejects an option the other does not reject.
    for o in options:
        rejecters = [u for u in users if profile.sign(u, o) is Sign.NEGATIVE]
        if rejecters and len(rejecters) < len(users):
            return True
    return False


def classify(profile: PreferenceProfile) -> ConflictClass:
    """Assign taxonomy labels to a total profile.

    The non-conflict conditions NC.1-3 are checked first; when at least one
    holds the profile is non-conflicting and only NC labels are reported.
    Otherwise the conflict conditions C.1-3 apply, and at least one of them is
    guaranteed to hold (no C label would force identical positive and negative
    option sets across users, i.e. NC.1).
    """
    users = sorted(profile.users())
    options = sorted(profile.options())
    if not users or not options:
        raise InvalidProfileError("classification needs at least one user and one option")
    if not profile.is_total_over(users, options):
        raise InvalidProfileError("profile is not total; call extend() first")

    nc_labels = set()
    if _nc1(profile, users, options):
        nc_labels.add("NC1")
    nc2 = (
        _nc2_subset_search(profile, users, options)
        if len(users) <= _NC2_SUBSET_SEARCH_LIMIT
        else _nc2_closed_form(profile, users, options)
    )
    if nc2:
        nc_labels.add("NC2")
    if _nc3(profile, users, options):
        nc_labels.add("NC3")
    if nc_labels:
        return ConflictClass(frozenset(nc_labels), Overall.NO_CONFLICT)

    c_labels = set()
    if _c1(profile, users, options):
        c_labels.add("C1")
    if _c2(profile, users, options):
        c_labels.add("C2")
    if _c3(profile, users, options):
        c_labels.add("C3")
    assert c_labels, "unlabelled profile; totality argument violated"
    return ConflictClass(frozenset(c_labels), Overall.CONFLICT)
