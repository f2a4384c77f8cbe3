"""Gradual semantics: quadratic energy (default), DF-QuAD, and Euler-based.

Acyclic frameworks are evaluated exactly in one topological pass; cyclic ones
fall back to damped synchronous fixed-point iteration. Evaluation covers the
effectively active arguments only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import BadScoreError, EmptyFrameworkError, UnknownArgumentError
from .model import Framework, active_subframework, topological_order


class SemanticsKind(enum.Enum):
    QUADRATIC_ENERGY = "quadratic_energy"
    DF_QUAD = "df_quad"
    EULER_BASED = "euler_based"

    @classmethod
    def from_token(cls, token: str) -> "SemanticsKind":
        aliases = {
            "qe": cls.QUADRATIC_ENERGY,
            "quadratic_energy": cls.QUADRATIC_ENERGY,
            "quadratic-energy": cls.QUADRATIC_ENERGY,
            "dfquad": cls.DF_QUAD,
            "df_quad": cls.DF_QUAD,
            "df-quad": cls.DF_QUAD,
            "euler": cls.EULER_BASED,
            "euler_based": cls.EULER_BASED,
            "euler-based": cls.EULER_BASED,
        }
        try:
            return aliases[token.lower()]
        except KeyError:
            raise ValueError(f"unknown semantics {token!r}") from None


DEFAULT_SEMANTICS = SemanticsKind.QUADRATIC_ENERGY


@dataclass(frozen=True)
class EvalConfig:
    epsilon: float = 1e-9
    max_iterations: int = 10000
    damping: float = 0.5

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")


@dataclass
class StrengthMap(Mapping[str, float]):
    """Final strength per active argument plus convergence metadata."""

    values: dict[str, float]
    iterations: int = 0
    converged: bool = True
    method: str = "topological"

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def aggregate(framework: Framework, strengths: Mapping[str, float], argument_id: str) -> float:
    """Signed sum of direct neighbour strengths: supporters minus attackers."""
    total = 0.0
    for rel in framework.incoming(argument_id):
        term = strengths[rel.source]
        total += -term if rel.is_attack else term
    return total


def influence_qe(base: float, energy: float) -> float:
    """Quadratic-energy combination of a base score with aggregated energy."""
    if not 0.0 <= base <= 1.0:
        raise BadScoreError(f"base score {base} outside [0, 1]")
    h = energy * energy / (1.0 + energy * energy)
    if energy <= 0:
        return base - base * h
    return base + (1.0 - base) * h


def influence_euler(base: float, energy: float) -> float:
    """Euler-based combination: 1 - (1 - base^2) / (1 + base * e^energy)."""
    if not 0.0 <= base <= 1.0:
        raise BadScoreError(f"base score {base} outside [0, 1]")
    if energy > 700.0:
        return 1.0 if base > 0 else 0.0
    return 1.0 - (1.0 - base * base) / (1.0 + base * math.exp(energy))


def dfquad_aggregate(strengths: Iterator[float] | list[float]) -> float:
    """Probabilistic-sum aggregation: 1 - prod(1 - s)."""
    product = 1.0
    for s in strengths:
        product *= 1.0 - s
    return 1.0 - product


def influence_dfquad(base: float, v_attack: float, v_support: float) -> float:
    """DF-QuAD combination of aggregated attack and support masses."""
    if not 0.0 <= base <= 1.0:
        raise BadScoreError(f"base score {base} outside [0, 1]")
    if v_attack >= v_support:
        return base - base * (v_attack - v_support)
    return base + (1.0 - base) * (v_support - v_attack)


def _node_update(framework: Framework, kind: SemanticsKind, strengths: Mapping[str, float], aid: str) -> float:
    base = framework.arguments[aid].base_score
    if kind is SemanticsKind.DF_QUAD:
        v_att = dfquad_aggregate([strengths[r.source] for r in framework.incoming(aid) if r.is_attack])
        v_sup = dfquad_aggregate([strengths[r.source] for r in framework.incoming(aid) if not r.is_attack])
        return influence_dfquad(base, v_att, v_sup)
    energy = aggregate(framework, strengths, aid)
    if kind is SemanticsKind.EULER_BASED:
        return influence_euler(base, energy)
    return influence_qe(base, energy)


def evaluate(
    framework: Framework,
    kind: SemanticsKind = DEFAULT_SEMANTICS,
    config: EvalConfig | None = None,
    method: str = "auto",
) -> StrengthMap:
    """Evaluate final strengths of the active sub-framework.

    ``method`` is "auto" (topological when acyclic), "topological", or
    "iterative". Non-convergence of the iterative mode is reported through
    ``converged=False``, never silently.
    """
    config = config or EvalConfig()
    active = active_subframework(framework)
    if not active.arguments:
        raise EmptyFrameworkError("no active arguments to evaluate")

    order = topological_order(active)
    if method == "auto":
        method = "topological" if order is not None else "iterative"
    if method == "topological":
        if order is None:
            raise EmptyFrameworkError("topological evaluation requires an acyclic framework")
        values: dict[str, float] = {}
        for aid in order:
            values[aid] = _node_update(active, kind, values, aid)
        return StrengthMap(values, iterations=0, converged=True, method="topological")
    if method != "iterative":
        raise ValueError(f"unknown evaluation method {method!r}")

    current = {aid: arg.base_score for aid, arg in active.arguments.items()}
    iterations = 0
    converged = False
    while iterations < config.max_iterations:
        iterations += 1
        nxt = {}
        delta = 0.0
        for aid in current:
            update = _node_update(active, kind, current, aid)
            value = current[aid] + config.damping * (update - current[aid])
            nxt[aid] = value
            delta = max(delta, abs(value - current[aid]))
        current = nxt
        if delta < config.epsilon:
            converged = True
            break
    return StrengthMap(current, iterations=iterations, converged=converged, method="iterative")
