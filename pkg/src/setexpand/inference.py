"""Concept posteriors for a query entity set.

Two concept models are provided:

* Noisy-Or: a concept is activated unless every query entity independently
  fails to activate it; supports exact incremental extension with one more
  entity.
* Naive Bayes with additive-style smoothing: covered entities contribute
  ``lam * P(e|c)``, uncovered ones ``(1 - lam) * P(e)``; evaluated in
  log-space so long queries cannot underflow the weight ratios.

All operations are pure functions of (taxonomy, query, config); distributions
are treated as immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .taxonomy import Taxonomy, TermId, normalize_name


class EntityResolutionError(ValueError):
    """One or more query names are unknown or have no hypernym edges."""

    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        super().__init__("unresolvable query entities: " + ", ".join(repr(n) for n in self.names))


@dataclass(frozen=True)
class Query:
    """Ordered, de-duplicated set of resolvable entity ids (n_hypo > 0 each)."""

    entities: tuple[TermId, ...]

    def __post_init__(self):
        if not self.entities:
            raise ValueError("query must contain at least one entity")
        if len(set(self.entities)) != len(self.entities):
            raise ValueError("query entities must be distinct")

    @classmethod
    def from_ids(cls, t: Taxonomy, ids: Iterable[TermId]) -> "Query":
        seen: dict[TermId, None] = {}
        bad = []
        for tid in ids:
            if not 0 <= tid < t.n_terms or t.n_hypo(tid) == 0:
                bad.append(str(tid))
            elif tid not in seen:
                seen[tid] = None
        if bad:
            raise EntityResolutionError(bad)
        return cls(tuple(seen))

    @classmethod
    def from_names(cls, t: Taxonomy, names: Iterable[str]) -> "Query":
        """Resolve names (normalized); collects every unresolvable one."""
        seen: dict[TermId, None] = {}
        bad = []
        for raw in names:
            name = normalize_name(raw)
            if name not in t:
                bad.append(raw.strip())
                continue
            tid = t.term_id(name)
            if t.n_hypo(tid) == 0:
                bad.append(raw.strip())
            elif tid not in seen:
                seen[tid] = None
        if bad:
            raise EntityResolutionError(bad)
        if not seen:
            raise EntityResolutionError(["<empty query>"])
        return cls(tuple(seen))

    def extended(self, e: TermId) -> "Query":
        if e in self.entities:
            return self
        return Query(self.entities + (e,))


@dataclass(frozen=True)
class SmoothingConfig:
    """Mixing weight for the Bayes model; covered concepts keep `lam`."""

    lam: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")


@dataclass(frozen=True)
class ConceptDistribution:
    """Sparse concept -> weight map; weights strictly positive on the support."""

    weights: dict[TermId, float]
    normalized: bool = False

    @property
    def support(self) -> list[TermId]:
        return list(self.weights)

    def __len__(self) -> int:
        return len(self.weights)


def posterior_noisy_or(t: Taxonomy, q: Query) -> ConceptDistribution:
    """Unnormalized Noisy-Or activation per concept: 1 - prod(1 - P(c|e_j)).

    Support is the union of the query entities' concepts; every weight lies
    in (0, 1].
    """
    # accumulate in sorted-entity order so the result is exactly independent
    # of the query's reporting order (float products do not commute in ulps)
    fail: dict[TermId, float] = {}
    for e in sorted(q.entities):
        ne = t.n_hypo(e)
        for c, cnt in t.concepts_of(e):
            fail[c] = fail.get(c, 1.0) * (1.0 - cnt / ne)
    return ConceptDistribution({c: 1.0 - f for c, f in fail.items()})


def extend_noisy_or(dist: ConceptDistribution, t: Taxonomy, e: TermId) -> ConceptDistribution:
    """Noisy-Or posterior for q ∪ {e} from the posterior for q.

    Applies the exact identity  w' = w + p - w*p  with p = P(c|e), written in
    complement form 1 - (1-w)(1-p) so saturated weights stay at exactly 1 and
    no weight ever decreases; the result equals the batch recomputation.
    """
    if dist.normalized:
        raise ValueError("extend_noisy_or requires the unnormalized posterior")
    ne = t.n_hypo(e)
    if ne == 0:
        raise EntityResolutionError([t.name(e)])
    new = dict(dist.weights)
    for c, cnt in t.concepts_of(e):
        p = cnt / ne
        w = new.get(c, 0.0)
        new[c] = 1.0 - (1.0 - w) * (1.0 - p)
    return ConceptDistribution(new)


def posterior_bayes(
    t: Taxonomy, q: Query, s: SmoothingConfig = SmoothingConfig()
) -> ConceptDistribution:
    """Unnormalized smoothed Naive Bayes posterior over the query's concepts.

    weight(c) ∝ P(c) * prod_{covered} lam*P(e_j|c) * prod_{uncovered} (1-lam)*P(e_j).
    Computed in log-space and exponentiated after subtracting the max log
    weight, so relative weights are exact and overflow-free; the returned
    scale is arbitrary (max weight is 1).
    """
    # sorted-entity order keeps the log sums order-independent to the ulp
    coverage = [(e, dict(t.concepts_of(e))) for e in sorted(q.entities)]
    support: dict[TermId, None] = {}
    for _, ce in coverage:
        for c in ce:
            support[c] = None
    if not support:
        return ConceptDistribution({})

    log_lam = math.log(s.lam)
    log_miss = math.log(1.0 - s.lam)
    log_eprior = {e: math.log(t.entity_prior(e)) for e, _ in coverage}

    logs: dict[TermId, float] = {}
    for c in support:
        nc = t.n_hyper(c)
        lw = math.log(t.concept_prior(c))
        for e, ce in coverage:
            cnt = ce.get(c)
            if cnt:
                lw += log_lam + math.log(cnt / nc)
            else:
                lw += log_miss + log_eprior[e]
        logs[c] = lw

    top = max(logs.values())
    return ConceptDistribution({c: math.exp(lw - top) for c, lw in logs.items()})


def normalize(dist: ConceptDistribution) -> ConceptDistribution:
    """Scale weights to sum to 1; errors on an empty support."""
    if not dist.weights:
        raise ValueError("cannot normalize an empty distribution")
    total = sum(dist.weights.values())
    return ConceptDistribution({c: w / total for c, w in dist.weights.items()}, normalized=True)
