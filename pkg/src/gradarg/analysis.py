"""Scenario analysis: exhaustive enumeration, relation attribution, sweeps.

Everything here rides on a compiled, numpy-batched evaluator so that hundreds
of thousands of framework configurations can be scored in one topological
pass per node. The scalar evaluator in :mod:`gradarg.semantics` stays the
reference implementation; tests pin the two against each other.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadGridError,
    CycleError,
    TooManyRelationsError,
    TooManyTogglesError,
    UnknownArgumentError,
)
from .model import (
    Framework,
    Relation,
    active_subframework,
    reaches_option,
    topological_order,
)
from .semantics import (
    DEFAULT_SEMANTICS,
    EvalConfig,
    SemanticsKind,
    evaluate,
)

MAX_EXHAUSTIVE_TOGGLES = 24
MAX_EXACT_SHAPLEY_RELATIONS = 20
_DEFAULT_CHUNK = 1 << 16


@dataclass(frozen=True)
class Scenario:
    """A framework plus the free activation variables to enumerate over."""

    name: str
    framework: Framework
    toggles: tuple[str, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for toggle in self.toggles:
            self.framework.argument(toggle)
            if self.framework.is_option(toggle):
                raise UnknownArgumentError(f"toggle {toggle!r} is an option")

    @property
    def risk_roots(self) -> tuple[str, ...]:
        """The derived-rule aggregate arguments (the removable risk layer)."""
        return tuple(
            sorted(a.id for a in self.framework.arguments.values() if a.derived_active_from)
        )


@dataclass(frozen=True)
class ExactShapley:
    pass


@dataclass(frozen=True)
class PermutationSampling:
    samples: int = 20000
    seed: int = 0


@dataclass
class DistributionTable:
    scenario: str
    filter_label: str
    options: tuple[str, ...]
    n: int
    counts: dict[str, int]  # per option id plus "tie"

    def pct(self, key: str) -> float:
        return 100.0 * self.counts[key] / self.n if self.n else float("nan")

    @property
    def pct_tie(self) -> float:
        return self.pct("tie")


@dataclass
class AttributionTable:
    relations: tuple[Relation, ...]
    options: tuple[str, ...]
    contributions: dict[str, tuple[float, ...]]  # option -> value per relation
    stderr: dict[str, tuple[float, ...]] | None
    final_strengths: dict[str, float]
    base_scores: dict[str, float]
    method: ExactShapley | PermutationSampling

    def contribution(self, relation: Relation, option: str) -> float:
        return self.contributions[option][self.relations.index(relation)]

    def stderr_of(self, relation: Relation, option: str) -> float:
        if self.stderr is None:
            return 0.0
        return self.stderr[option][self.relations.index(relation)]

    def efficiency_gap(self, option: str) -> float:
        """Deviation of the contribution total from sigma(option) - tau(option)."""
        total = sum(self.contributions[option])
        return total - (self.final_strengths[option] - self.base_scores[option])


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    n: int
    mean_gap: float
    std_gap: float
    pct: Mapping[str, float]
    pct_tie: float


@dataclass
class SweepResult:
    scenario: str
    target: str
    options: tuple[str, ...]
    grid: tuple[float, ...]
    groups: dict[str, tuple[SweepPoint, ...]]  # "all" / "active" / "inactive"


# -- compiled batched evaluator ------------------------------------------------


class CompiledGraph:
    """Topologically compiled framework for batched strength evaluation.

    The node order is fixed once from the full graph, so it stays valid for
    every edge subset and every activation pattern.
    """

    def __init__(self, framework: Framework):
        order = topological_order(framework)
        if order is None:
            raise CycleError("batched evaluation requires an acyclic framework")
        self.framework = framework
        self.order = order
        self.index = {aid: i for i, aid in enumerate(order)}
        self.tau = np.array([framework.arguments[a].base_score for a in order])
        self.relations = framework.relations
        self.edge_src = np.array([self.index[r.source] for r in self.relations], dtype=np.int64)
        self.edge_dst = np.array([self.index[r.target] for r in self.relations], dtype=np.int64)
        self.edge_sign = np.array([-1.0 if r.is_attack else 1.0 for r in self.relations])
        self.node_in: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for i, aid in enumerate(order):
            edge_ids = np.array(
                [e for e, r in enumerate(self.relations) if r.target == aid], dtype=np.int64
            )
            self.node_in.append((edge_ids, self.edge_src[edge_ids], self.edge_sign[edge_ids]))

    def n_edges(self) -> int:
        return len(self.relations)

    def strengths(
        self,
        kind: SemanticsKind,
        batch: int,
        edge_mask: np.ndarray | None = None,
        active: np.ndarray | None = None,
        tau: np.ndarray | None = None,
    ) -> np.ndarray:
        """Strength matrix of shape (nodes, batch).

        ``edge_mask`` (edges, batch) removes individual relations;
        ``active`` (nodes, batch) removes arguments (their incident relations
        drop out; strengths of inactive rows are meaningless filler).
        """
        n = len(self.order)
        base = self.tau if tau is None else tau
        if base.ndim == 1:
            base = np.broadcast_to(base[:, None], (n, batch))
        sigma = np.empty((n, batch))
        if edge_mask is None and active is None:
            mask = None
        else:
            mask = (
                np.ones((self.n_edges(), batch), dtype=bool)
                if edge_mask is None
                else edge_mask.astype(bool, copy=True)
            )
            if active is not None:
                mask &= active[self.edge_src] & active[self.edge_dst]

        for i in range(n):
            edge_ids, src_ids, signs = self.node_in[i]
            t = base[i]
            if len(edge_ids) == 0:
                sigma[i] = t
                continue
            s = sigma[src_ids]
            if mask is not None:
                m = mask[edge_ids]
            else:
                m = None
            if kind is SemanticsKind.DF_QUAD:
                att = signs < 0
                sup = ~att
                if m is None:
                    att_prod = np.prod(1.0 - s[att], axis=0) if att.any() else np.ones(batch)
                    sup_prod = np.prod(1.0 - s[sup], axis=0) if sup.any() else np.ones(batch)
                else:
                    att_prod = (
                        np.prod(1.0 - s[att] * m[att], axis=0) if att.any() else np.ones(batch)
                    )
                    sup_prod = (
                        np.prod(1.0 - s[sup] * m[sup], axis=0) if sup.any() else np.ones(batch)
                    )
                v_att = 1.0 - att_prod
                v_sup = 1.0 - sup_prod
                sigma[i] = np.where(
                    v_att >= v_sup,
                    t - t * (v_att - v_sup),
                    t + (1.0 - t) * (v_sup - v_att),
                )
                continue
            contrib = signs[:, None] * s
            if m is not None:
                contrib = contrib * m
            energy = contrib.sum(axis=0)
            if kind is SemanticsKind.EULER_BASED:
                e = np.exp(np.clip(energy, None, 700.0))
                sigma[i] = 1.0 - (1.0 - t * t) / (1.0 + t * e)
            else:
                h = energy * energy / (1.0 + energy * energy)
                sigma[i] = np.where(energy <= 0, t - t * h, t + (1.0 - t) * h)
        return sigma


# -- activation patterns -------------------------------------------------------


def _activation_matrix(
    graph: CompiledGraph, toggles: Sequence[str], combo_ids: np.ndarray
) -> np.ndarray:
    """Per-argument activation for each toggle assignment (nodes, batch)."""
    fw = graph.framework
    batch = len(combo_ids)
    default = np.array(
        [fw.is_option(a) or fw.arguments[a].active for a in graph.order], dtype=bool
    )
    active = np.repeat(default[:, None], batch, axis=1)
    for bit, toggle in enumerate(toggles):
        active[graph.index[toggle]] = ((combo_ids >> bit) & 1).astype(bool)
    # Derived rules win last, regardless of the argument's own bit.
    derived = [
        (graph.index[a.id], np.array([graph.index[d] for d in a.derived_active_from]))
        for a in fw.arguments.values()
        if a.derived_active_from
    ]
    for idx, _ in derived:
        active[idx] = False
    changed = True
    while changed:
        changed = False
        for idx, deps in derived:
            value = active[deps].any(axis=0)
            if not np.array_equal(value, active[idx]):
                active[idx] = value
                changed = True
    return active


def _without_arguments(framework: Framework, remove: set[str]) -> Framework:
    args = []
    for aid, arg in framework.arguments.items():
        if aid in remove:
            continue
        deps = tuple(d for d in arg.derived_active_from if d not in remove)
        args.append(replace(arg, derived_active_from=deps))
    rels = [
        r
        for r in framework.relations
        if r.source not in remove and r.target not in remove
    ]
    return Framework.of(
        args,
        rels,
        options=framework.options,
        users=framework.users,
        preferences=framework.preferences,
    )


# -- exhaustive enumeration ----------------------------------------------------


def _tally_chunk(
    graph: CompiledGraph,
    toggles: Sequence[str],
    combo_ids: np.ndarray,
    kind: SemanticsKind,
    tie_epsilon: float,
    require_active: str | None,
) -> tuple[dict[str, int], int]:
    fw = graph.framework
    active = _activation_matrix(graph, toggles, combo_ids)
    if require_active is not None:
        keep = active[graph.index[require_active]]
        combo_ids = combo_ids[keep]
        active = active[:, keep]
    batch = active.shape[1]
    counts = {oid: 0 for oid in fw.options}
    counts["tie"] = 0
    if batch == 0:
        return counts, 0
    sigma = graph.strengths(kind, batch, active=active)
    opt_rows = np.array([graph.index[o] for o in fw.options])
    sig_opts = sigma[opt_rows]
    top = sig_opts.max(axis=0)
    at_top = sig_opts >= top - tie_epsilon
    ties = at_top.sum(axis=0) > 1
    winners = sig_opts.argmax(axis=0)
    counts["tie"] = int(ties.sum())
    for k, oid in enumerate(fw.options):
        counts[oid] = int(((winners == k) & ~ties).sum())
    return counts, batch


def _enumerate_worker(payload) -> tuple[dict[str, int], int]:
    from .afformat import SourceDocument, parse_framework

    af_text, toggles, kind_token, tie_epsilon, require_active, start, stop = payload
    framework = parse_framework(SourceDocument(af_text, origin="<worker>"))
    graph = CompiledGraph(framework)
    combo_ids = np.arange(start, stop, dtype=np.int64)
    return _tally_chunk(
        graph, toggles, combo_ids, SemanticsKind(kind_token), tie_epsilon, require_active
    )


def enumerate_decisions(
    scenario: Scenario,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
    *,
    require_active: str | None = None,
    without_risk: bool = False,
    exclude_inert: bool | None = None,
    tie_epsilon: float = 1e-9,
    chunk_size: int = _DEFAULT_CHUNK,
    jobs: int = 1,
) -> DistributionTable:
    """Tally the decision over every activation assignment of the toggles.

    ``require_active`` keeps only assignments where that argument ends up
    effectively active. ``without_risk`` removes the derived-rule aggregates
    (the observation layer they summarise stays put) and by default switches
    to distinct-outcome counting: toggles left without a path to any option
    are dropped, since they double the count without changing outcomes.
    ``exclude_inert`` overrides that counting mode explicitly.
    """
    del config  # enumeration is acyclic/topological; kept for interface parity
    framework = scenario.framework
    toggles = list(scenario.toggles)
    label = "all"
    if without_risk:
        risk = set(scenario.risk_roots)
        framework = _without_arguments(framework, risk)
        toggles = [t for t in toggles if t not in risk]
        label = "no_risk"
    if exclude_inert is None:
        exclude_inert = without_risk
    if exclude_inert:
        reach = reaches_option(framework)
        toggles = [t for t in toggles if t in reach]
    if require_active is not None:
        framework.argument(require_active)
        label = f"{require_active}_active"

    if len(toggles) > MAX_EXHAUSTIVE_TOGGLES:
        raise TooManyTogglesError(
            f"{len(toggles)} toggles exceed the exhaustive limit of {MAX_EXHAUSTIVE_TOGGLES}"
        )

    total = 1 << len(toggles)
    counts = {oid: 0 for oid in framework.options}
    counts["tie"] = 0
    n = 0

    if jobs > 1:
        from .afformat import serialize_framework

        af_text = serialize_framework(framework)
        ranges = [
            (start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)
        ]
        payloads = [
            (af_text, tuple(toggles), kind.value, tie_epsilon, require_active, a, b)
            for a, b in ranges
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part, part_n in pool.map(_enumerate_worker, payloads):
                for key, value in part.items():
                    counts[key] += value
                n += part_n
    else:
        graph = CompiledGraph(framework)
        for start in range(0, total, chunk_size):
            combo_ids = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
            part, part_n = _tally_chunk(
                graph, toggles, combo_ids, kind, tie_epsilon, require_active
            )
            for key, value in part.items():
                counts[key] += value
            n += part_n

    return DistributionTable(
        scenario=scenario.name,
        filter_label=label,
        options=framework.options,
        n=n,
        counts=counts,
    )


# -- relation attribution ------------------------------------------------------


def _popcount(values: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(values)
    v = values.copy()
    while v.any():
        counts += v & 1
        v >>= 1
    return counts


def _exact_shapley(
    graph: CompiledGraph, kind: SemanticsKind, options: Sequence[str], chunk_size: int
) -> dict[str, np.ndarray]:
    n = graph.n_edges()
    total = 1 << n
    opt_rows = np.array([graph.index[o] for o in options])
    values = {o: np.empty(total) for o in options}
    for start in range(0, total, chunk_size):
        ids = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        mask = ((ids[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
        sigma = graph.strengths(kind, len(ids), edge_mask=mask)
        for k, o in enumerate(options):
            values[o][ids] = sigma[opt_rows[k]]

    subset_ids = np.arange(total, dtype=np.int64)
    pc = _popcount(subset_ids)
    # Shapley ordering weight for a coalition of size s among n players.
    weight_by_size = np.array(
        [1.0 / (n * math.comb(n - 1, s)) for s in range(n)] or [1.0]
    )
    contributions = {o: np.zeros(n) for o in options}
    for e in range(n):
        without = subset_ids[(subset_ids >> e) & 1 == 0]
        w = weight_by_size[pc[without]]
        for o in options:
            delta = values[o][without | (1 << e)] - values[o][without]
            contributions[o][e] = float((w * delta).sum())
    return contributions


def _sampled_shapley(
    graph: CompiledGraph,
    kind: SemanticsKind,
    options: Sequence[str],
    samples: int,
    seed: int,
    chunk_size: int = 512,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    n = graph.n_edges()
    opt_rows = {o: graph.index[o] for o in options}
    sums = {o: np.zeros(n) for o in options}
    sumsq = {o: np.zeros(n) for o in options}
    rng = np.random.default_rng(seed)
    done = 0
    while done < samples:
        batch = min(chunk_size, samples - done)
        perms = rng.permuted(np.tile(np.arange(n), (batch, 1)), axis=1)
        mask = np.zeros((n, batch), dtype=bool)
        cols = np.arange(batch)
        prev = {o: np.full(batch, graph.tau[opt_rows[o]]) for o in options}
        for step in range(n):
            mask[perms[:, step], cols] = True
            sigma = graph.strengths(kind, batch, edge_mask=mask)
            for o in options:
                current = sigma[opt_rows[o]]
                marginal = current - prev[o]
                np.add.at(sums[o], perms[:, step], marginal)
                np.add.at(sumsq[o], perms[:, step], marginal * marginal)
                prev[o] = current
        done += batch
    means = {o: sums[o] / samples for o in options}
    stderr = {
        o: np.sqrt(np.maximum(sumsq[o] / samples - means[o] ** 2, 0.0) / samples)
        for o in options
    }
    return means, stderr


def relation_attribution(
    framework: Framework,
    method: ExactShapley | PermutationSampling | None = None,
    *,
    option: str | None = None,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
    chunk_size: int = _DEFAULT_CHUNK,
) -> AttributionTable:
    """Shapley influence of each active relation on each option's strength.

    A relation's contribution is its expected marginal effect on the option's
    final strength over random relation orderings (arguments stay; only edges
    are toggled). Totals per option equal sigma(option) - tau(option) exactly
    for :class:`ExactShapley`, and within sampling error otherwise.
    """
    active = active_subframework(framework)
    graph = CompiledGraph(active)
    options = (option,) if option is not None else active.options
    for o in options:
        if o not in active.options:
            raise UnknownArgumentError(f"{o!r} is not an option")
    n = graph.n_edges()
    if method is None:
        method = ExactShapley() if n <= 12 else PermutationSampling()

    if isinstance(method, ExactShapley):
        if n > MAX_EXACT_SHAPLEY_RELATIONS:
            raise TooManyRelationsError(
                f"{n} relations exceed the exact-mode limit of {MAX_EXACT_SHAPLEY_RELATIONS}"
            )
        contribs = _exact_shapley(graph, kind, options, chunk_size)
        stderr = None
    else:
        contribs, errs = _sampled_shapley(graph, kind, options, method.samples, method.seed)
        stderr = {o: tuple(float(x) for x in errs[o]) for o in options}

    strengths = evaluate(active, kind, config)
    return AttributionTable(
        relations=active.relations,
        options=tuple(options),
        contributions={o: tuple(float(x) for x in contribs[o]) for o in options},
        stderr=stderr,
        final_strengths={o: strengths[o] for o in options},
        base_scores={o: active.arguments[o].base_score for o in options},
        method=method,
    )


# -- base-score sensitivity sweep ----------------------------------------------


def base_score_sweep(
    scenario: Scenario,
    target: str,
    grid: Sequence[float],
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
    *,
    tie_epsilon: float = 1e-9,
    chunk_size: int = _DEFAULT_CHUNK,
) -> SweepResult:
    """Re-run the enumeration at each base score of ``target``.

    Gap statistics (mean and standard deviation of sigma(first option) -
    sigma(second option) across toggle assignments) and decision percentages
    are reported for all assignments and for the target-active/-inactive
    subsets; the inactive subset is constant across the grid.
    """
    del config
    framework = scenario.framework
    framework.argument(target)
    if len(framework.options) != 2:
        raise BadGridError("gap sweeps need exactly two options")
    grid = [float(g) for g in grid]
    if not grid or any(not 0.0 <= g <= 1.0 for g in grid):
        raise BadGridError("grid values must lie in [0, 1]")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise BadGridError("grid must be strictly increasing")
    toggles = list(scenario.toggles)
    if len(toggles) > MAX_EXHAUSTIVE_TOGGLES:
        raise TooManyTogglesError(f"{len(toggles)} toggles exceed the exhaustive limit")

    o1, o2 = framework.options
    groups: dict[str, list[SweepPoint]] = {"all": [], "active": [], "inactive": []}
    total = 1 << len(toggles)

    for tau_value in grid:
        fw_t = Framework.of(
            [
                replace(arg, base_score=tau_value) if arg.id == target else arg
                for arg in framework.arguments.values()
            ],
            framework.relations,
            options=framework.options,
            users=framework.users,
            preferences=framework.preferences,
        )
        graph = CompiledGraph(fw_t)
        gaps: list[np.ndarray] = []
        actives: list[np.ndarray] = []
        for start in range(0, total, chunk_size):
            combo_ids = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
            act = _activation_matrix(graph, toggles, combo_ids)
            sigma = graph.strengths(kind, len(combo_ids), active=act)
            gaps.append(sigma[graph.index[o1]] - sigma[graph.index[o2]])
            actives.append(act[graph.index[target]])
        gap = np.concatenate(gaps)
        target_on = np.concatenate(actives)

        for group, sel in (
            ("all", np.ones(total, dtype=bool)),
            ("active", target_on),
            ("inactive", ~target_on),
        ):
            sub = gap[sel]
            n = int(sel.sum())
            if n == 0:
                point = SweepPoint(tau_value, 0, float("nan"), float("nan"), {o1: float("nan"), o2: float("nan")}, float("nan"))
            else:
                r_wins = (sub > tie_epsilon).sum()
                nr_wins = (sub < -tie_epsilon).sum()
                ties = n - int(r_wins) - int(nr_wins)
                point = SweepPoint(
                    tau=tau_value,
                    n=n,
                    mean_gap=float(sub.mean()),
                    std_gap=float(sub.std()),
                    pct={o1: 100.0 * r_wins / n, o2: 100.0 * nr_wins / n},
                    pct_tie=100.0 * ties / n,
                )
            groups[group].append(point)

    return SweepResult(
        scenario=scenario.name,
        target=target,
        options=framework.options,
        grid=tuple(grid),
        groups={k: tuple(v) for k, v in groups.items()},
    )


# -- CSV contracts -------------------------------------------------------------


def distribution_to_csv(tables: Iterable[DistributionTable]) -> str:
    """Schema: scenario,filter,n,pct_r,pct_nr,pct_tie."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "filter", "n", "pct_r", "pct_nr", "pct_tie"])
    for table in tables:
        first, second = table.options
        writer.writerow(
            [table.scenario, table.filter_label, table.n, table.pct(first), table.pct(second), table.pct_tie]
        )
    return out.getvalue()


def attribution_to_csv(table: AttributionTable) -> str:
    """Schema: polarity,source,target,contrib_r,contrib_nr,stderr_r,stderr_nr."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["polarity", "source", "target", "contrib_r", "contrib_nr", "stderr_r", "stderr_nr"]
    )
    first, second = table.options
    for i, rel in enumerate(table.relations):
        writer.writerow(
            [
                rel.polarity.value,
                rel.source,
                rel.target,
                table.contributions[first][i],
                table.contributions[second][i],
                table.stderr[first][i] if table.stderr else 0.0,
                table.stderr[second][i] if table.stderr else 0.0,
            ]
        )
    return out.getvalue()


def sweep_to_csv(result: SweepResult) -> str:
    """Schema: tau,group,mean_gap,std_gap,pct_r,pct_nr,pct_tie."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["tau", "group", "mean_gap", "std_gap", "pct_r", "pct_nr", "pct_tie"])
    first, second = result.options
    for group, points in result.groups.items():
        for point in points:
            writer.writerow(
                [
                    point.tau,
                    group,
                    point.mean_gap,
                    point.std_gap,
                    point.pct[first],
                    point.pct[second],
                    point.pct_tie,
                ]
            )
    return out.getvalue()
