"""Shared random-framework generators and independent test oracles."""

from __future__ import annotations

import itertools
import random
from dataclasses import replace

from gradarg.dynamics import AddArgument, apply_edit
from gradarg.model import Argument, ArgumentKind, Framework, Polarity, Relation, pro_con
from gradarg.preferences import PreferenceProfile, Sign

SIGNS = (Sign.POSITIVE, Sign.NEGATIVE, Sign.INDIFFERENT)


def random_acyclic_qbaf(
    rng: random.Random,
    max_args: int = 15,
    min_args: int = 2,
    n_options: int = 0,
    edge_prob: float = 0.35,
    tau_lo: float = 0.05,
    tau_hi: float = 0.95,
) -> Framework:
    """Random acyclic framework; with options they are sinks every argument reaches."""
    n = rng.randint(max(min_args, n_options + 1), max(max_args, n_options + 1))
    ids = [f"O{i}" if i < n_options else f"A{i}" for i in range(n)]
    args = []
    for i, aid in enumerate(ids):
        kind = ArgumentKind.OPTION if i < n_options else ArgumentKind.TASK
        args.append(
            Argument(
                aid,
                kind,
                base_score=rng.uniform(tau_lo, tau_hi) if i >= n_options else 0.5,
                active=True,
            )
        )
    relations = []
    for j in range(n_options, n):
        targets = [i for i in range(j) if rng.random() < edge_prob]
        if n_options and not targets:
            targets = [rng.randrange(j)]  # keep a path towards the option layer
        for i in targets:
            polarity = Polarity.ATTACK if rng.random() < 0.5 else Polarity.SUPPORT
            relations.append(Relation(ids[j], ids[i], polarity))
    return Framework.of(args, relations, options=ids[:n_options])


def random_mup_framework(
    rng: random.Random,
    max_extra: int = 12,
    n_users: int = 2,
    tau_lo: float = 0.05,
    tau_hi: float = 0.95,
) -> Framework:
    """Two-option framework with users and a conflicting preference profile."""
    base = random_acyclic_qbaf(
        rng, max_args=max_extra + 2, min_args=4, n_options=2, tau_lo=tau_lo, tau_hi=tau_hi
    )
    users = tuple(f"u{i}" for i in range(n_users))
    args = []
    for arg in base.arguments.values():
        if arg.kind is ArgumentKind.TASK and rng.random() < 0.5:
            args.append(replace(arg, kind=ArgumentKind.USER, owner=rng.choice(users)))
        else:
            args.append(arg)
    profile = PreferenceProfile(
        {("u0", "O0"): Sign.POSITIVE, ("u0", "O1"): Sign.NEGATIVE,
         ("u1", "O0"): Sign.NEGATIVE, ("u1", "O1"): Sign.POSITIVE}
    )
    return Framework.of(args, base.relations, options=base.options, users=users, preferences=profile)


_WORDS = ("risk", "balance", "repeat", "measure", "time", "safety", "fatigue", "score")


def random_label(rng: random.Random) -> str:
    n = rng.randint(0, 4)
    parts = [rng.choice(_WORDS) for _ in range(n)]
    if parts and rng.random() < 0.3:
        parts.append('with "quotes"')
    if parts and rng.random() < 0.2:
        parts.append("back\\slash")
    if parts and rng.random() < 0.2:
        parts.append("#hash")
    return " ".join(parts)


def random_full_framework(rng: random.Random) -> Framework:
    """Framework exercising every serializable feature, for round-trip tests."""
    n_options = rng.randint(1, 3)
    n_rest = rng.randint(1, 10)
    users = tuple(f"u{i}" for i in range(rng.randint(1, 3)))
    option_ids = [f"O{i}" for i in range(n_options)]
    rest_ids = [f"A{i}" for i in range(n_rest)]
    ids = option_ids + rest_ids

    args = [
        Argument(oid, ArgumentKind.OPTION, label=random_label(rng), active=True)
        for oid in option_ids
    ]
    for aid in rest_ids:
        if rng.random() < 0.4:
            args.append(
                Argument(
                    aid,
                    ArgumentKind.USER,
                    owner=rng.choice(users),
                    label=random_label(rng),
                    base_score=rng.random(),
                    active=rng.random() < 0.5,
                )
            )
        else:
            args.append(
                Argument(
                    aid,
                    ArgumentKind.TASK,
                    label=random_label(rng),
                    base_score=rng.random(),
                    active=rng.random() < 0.5,
                )
            )

    relations = []
    for j in range(n_options, len(ids)):
        for i in range(j):
            if rng.random() < 0.3:
                polarity = Polarity.ATTACK if rng.random() < 0.5 else Polarity.SUPPORT
                relations.append(Relation(ids[j], ids[i], polarity))

    # Occasionally mark an argument's activation as derived from its supporters.
    by_target: dict[str, list[str]] = {}
    for rel in relations:
        if not rel.is_attack:
            by_target.setdefault(rel.target, []).append(rel.source)
    for idx, arg in enumerate(args):
        if arg.kind is ArgumentKind.OPTION or arg.id not in by_target:
            continue
        if rng.random() < 0.3:
            args[idx] = replace(arg, derived_active_from=tuple(by_target[arg.id]))

    entries = {}
    for user in users:
        for oid in option_ids:
            if rng.random() < 0.6:
                entries[(user, oid)] = rng.choice(SIGNS)
    return Framework.of(
        args, relations, options=option_ids, users=users, preferences=PreferenceProfile(entries)
    )


def with_leaf(
    framework: Framework,
    target: str,
    polarity: Polarity,
    tau: float,
    arg_id: str = "Zleaf",
) -> Framework:
    """Framework plus one fresh active leaf pointing at ``target``."""
    return apply_edit(
        framework,
        AddArgument(
            Argument(arg_id, ArgumentKind.TASK, base_score=tau, active=True),
            (Relation(arg_id, target, polarity),),
        ),
    )


# -- independent oracles ---------------------------------------------------


def pro_con_by_path_enumeration(framework: Framework, option: str):
    """Brute-force pro/con via explicit enumeration of all simple paths."""
    pro: set[str] = set()
    con: set[str] = set()
    out_edges: dict[str, list[Relation]] = {}
    for rel in framework.relations:
        out_edges.setdefault(rel.source, []).append(rel)

    def walk(node: str, attacks: int, visited: frozenset[str]) -> None:
        for rel in out_edges.get(node, ()):
            total = attacks + (1 if rel.is_attack else 0)
            if rel.target == option:
                (con if total % 2 else pro).add(start)
            elif rel.target not in visited:
                walk(rel.target, total, visited | {rel.target})

    for start in framework.arguments:
        if start == option:
            continue
        walk(start, 0, frozenset({start}))
    return frozenset(pro), frozenset(con)


def all_profiles(n_users: int, n_options: int):
    """Every total preference profile over u0..;o0.. with the given sizes."""
    users = [f"u{i}" for i in range(n_users)]
    options = [f"o{i}" for i in range(n_options)]
    pairs = [(u, o) for u in users for o in options]
    for assignment in itertools.product(SIGNS, repeat=len(pairs)):
        yield PreferenceProfile(dict(zip(pairs, assignment))), users, options


def sample_pure_parity_site(rng: random.Random, framework: Framework):
    """Attachment site (target, polarity, o1, o2) whose new argument helps o1
    against o2 along every path; None when the random pick is impure."""
    options = framework.options
    o_a, o_b = rng.sample(list(options), 2)
    gamma = rng.choice(list(framework.arguments))
    polarity = Polarity.ATTACK if rng.random() < 0.5 else Polarity.SUPPORT
    if framework.is_option(gamma) and polarity is Polarity.ATTACK:
        return None

    memberships = {}
    for option in (o_a, o_b):
        pro, con = pro_con(framework, option)
        direct = gamma == option
        in_pro = (polarity is Polarity.SUPPORT and (direct or gamma in pro)) or (
            polarity is Polarity.ATTACK and gamma in con
        )
        in_con = (polarity is Polarity.ATTACK and (direct or gamma in pro)) or (
            polarity is Polarity.SUPPORT and gamma in con
        )
        memberships[option] = (in_pro, in_con)

    helps = memberships[o_a][0] or memberships[o_b][1]
    hurts = memberships[o_a][1] or memberships[o_b][0]
    if helps and not hurts:
        return gamma, polarity, o_a, o_b
    return None


def find_pure_parity_argument(rng: random.Random, framework: Framework):
    """Existing non-option argument with purely helpful paths for some option pair."""
    options = list(framework.options)
    candidates = [a for a in framework.arguments if not framework.is_option(a)]
    rng.shuffle(candidates)
    pro_con_cache = {o: pro_con(framework, o) for o in options}
    for candidate in candidates:
        for o_a, o_b in itertools.permutations(options, 2):
            pro_a, con_a = pro_con_cache[o_a]
            pro_b, con_b = pro_con_cache[o_b]
            helps = candidate in pro_a or candidate in con_b
            hurts = candidate in con_a or candidate in pro_b
            if helps and not hurts:
                return candidate, o_a, o_b
    return None
