"""Concept-level weighting: popularity penalty and hitting-time selection.

Two ways to bias the latent concept layer away from overly general concepts:

* popularity penalty (``pp``): weight(c) = 1 / P(c), so popular concepts are
  damped in proportion to their hypernym-role mass;
* fine-grained selection (``fg``): keep the k concepts with the smallest
  aggregate expected hitting time of an upward random walk from the query
  entities, everything else drops to weight 0.

Expected hitting times solve  h(x|c) = 0 if x = c, else
1 + sum_{c' in concepts_of(x)} P(c'|x) * h(c'|c).  Whenever the walk can
permanently bypass the target the true expectation diverges, so values are
truncated at a cap: value iteration starts every node at the cap and sweeps
monotonically downward until convergence.  Indexes for distinct targets are
independent and can be precomputed offline and persisted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np

from .inference import Query
from .taxonomy import Taxonomy, TaxonomyError, TermId

DEFAULT_CAP = 20.0
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class HittingTimeIndex:
    """Truncated expected hitting times toward one target concept.

    ``h`` stores the target (value 0) and every node that participates in the
    walk; everything else is implicitly at the cap.
    """

    target: TermId
    cap: float
    tol: float
    h: dict[TermId, float] = field(default_factory=dict)

    def value(self, node: TermId) -> float:
        return self.h.get(node, self.cap)


@dataclass(frozen=True)
class ConceptSelection:
    """The concept weighting used by the ranking layer.

    ``pp``: weights hold 1/P(c) for every support concept, ``selected`` is None.
    ``fg``: weights are an indicator over the chosen set; ``selected`` maps each
    chosen concept to its aggregate hitting time.
    """

    mode: str
    weights: dict[TermId, float]
    selected: dict[TermId, float] | None = None

    @property
    def total_hitting(self) -> float:
        if self.selected is None:
            raise ValueError("aggregate hitting time only exists for fg selections")
        return sum(self.selected.values())


def delta_pp(t: Taxonomy, support: Iterable[TermId]) -> ConceptSelection:
    """Popularity penalty: weight(c) = total mass / n_hyper(c) = 1 / P(c)."""
    weights: dict[TermId, float] = {}
    total = t.total_hyper_mass
    for c in support:
        nc = t.n_hyper(c)
        if nc == 0:
            raise TaxonomyError(f"{t.name(c)!r} has no hypernym-role mass; delta undefined")
        weights[c] = total / nc
    return ConceptSelection(mode="pp", weights=weights)


def hitting_times(
    t: Taxonomy,
    target: TermId,
    cap: float = DEFAULT_CAP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> HittingTimeIndex:
    """Capped expected hitting time to `target` from every node, by value iteration.

    Initialized at the cap and swept with the Bellman update
    ``h(x) <- min(cap, 1 + sum P(c'|x) h(c'))`` until the largest change drops
    below `tol` or `max_iter` sweeps ran.  Sweeps never increase any entry.
    Nodes without outgoing edges (other than the target) stay at the cap.
    """
    if cap <= 1.0:
        raise ValueError(f"cap must exceed 1, got {cap}")
    if t.n_hyper(target) == 0:
        raise TaxonomyError(f"{t.name(target)!r} has no hyponym edges; not a concept")

    walkers = np.nonzero(t._n_hypo)[0]
    h = np.full(t.n_terms, cap, dtype=np.float64)
    h[target] = 0.0
    if walkers.size:
        starts = t._hypo_ptr[walkers]
        target_pos = np.searchsorted(walkers, target)
        target_is_walker = target_pos < walkers.size and walkers[target_pos] == target
        for _ in range(max_iter):
            sums = np.add.reduceat(t._e_prob * h[t._e_hyper], starts)
            new = 1.0 + sums
            np.minimum(new, cap, out=new)
            if target_is_walker:
                new[target_pos] = 0.0
            delta = np.max(np.abs(new - h[walkers]))
            h[walkers] = new
            if delta < tol:
                break

    result = {int(x): float(h[x]) for x in walkers}
    result[int(target)] = 0.0
    return HittingTimeIndex(target=target, cap=cap, tol=tol, h=result)


def aggregate_hitting(
    t: Taxonomy,
    q: Query,
    c: TermId,
    cap: float = DEFAULT_CAP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    index: HittingTimeIndex | None = None,
) -> float:
    """Sum of capped hitting times from each query entity to concept c."""
    if index is None:
        index = hitting_times(t, c, cap, tol, max_iter)
    return sum(index.value(e) for e in q.entities)


def candidate_targets(t: Taxonomy, q: Query, cap: float) -> list[TermId]:
    """Concepts reachable upward from the query within `cap` steps.

    Every path of length L has hitting time >= L, so a breadth-first climb of
    ceil(cap) levels covers all concepts that could score below the cap.
    """
    max_depth = int(math.ceil(cap))
    pool: set[TermId] = set()
    seen: set[TermId] = set(q.entities)
    frontier: set[TermId] = set(q.entities)
    for _ in range(max_depth):
        if not frontier:
            break
        nxt: set[TermId] = set()
        for x in frontier:
            for c, _ in t.concepts_of(x):
                pool.add(c)
                if c not in seen:
                    seen.add(c)
                    nxt.add(c)
        frontier = nxt
    return sorted(pool, key=t.name)


def select_fine_grained(
    t: Taxonomy,
    q: Query,
    k: int,
    cap: float = DEFAULT_CAP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    store: "HittingTimeStore | None" = None,
) -> ConceptSelection:
    """Pick the k candidate concepts with the smallest aggregate hitting time.

    Aggregate time is additive over concepts, so the minimizing k-subset is
    exactly the k smallest aggregates.  Ties break on concept name; concepts
    whose aggregate saturates at |q| * cap are unreachable and never selected,
    even if fewer than k remain.  With a `store`, aggregates come from the
    precomputed indexes (targets absent from the store count as unreachable).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pool = candidate_targets(t, q, cap)
    if not pool:
        raise TaxonomyError("query has no candidate concepts")
    saturated = len(q.entities) * cap
    scored: list[tuple[float, str, TermId]] = []
    for c in pool:
        if store is not None:
            agg = store.aggregate(q, c)
        else:
            agg = aggregate_hitting(t, q, c, cap, tol, max_iter)
        if agg < saturated:
            scored.append((agg, t.name(c), c))
    scored.sort()
    chosen = scored[:k]
    return ConceptSelection(
        mode="fg",
        weights={c: 1.0 for _, _, c in chosen},
        selected={c: agg for agg, _, c in chosen},
    )


class HittingTimeStore:
    """Precomputed hitting-time indexes for many targets, persistable to TSV.

    File layout, one section per target:

        #<target name><TAB><cap><TAB><tol>
        <node name><TAB><hitting time>
        ...

    Only entries below the prune threshold are stored; lookups for missing
    entries return the cap.
    """

    def __init__(self, cap: float, tol: float):
        self.cap = cap
        self.tol = tol
        self._indexes: dict[TermId, HittingTimeIndex] = {}

    def __contains__(self, target: TermId) -> bool:
        return target in self._indexes

    def __len__(self) -> int:
        return len(self._indexes)

    @property
    def targets(self) -> list[TermId]:
        return list(self._indexes)

    def add(self, index: HittingTimeIndex) -> None:
        self._indexes[index.target] = index

    def get(self, target: TermId) -> HittingTimeIndex | None:
        return self._indexes.get(target)

    def aggregate(self, q: Query, target: TermId) -> float:
        """Sum of stored hitting times; unknown targets or nodes count as cap."""
        index = self._indexes.get(target)
        if index is None:
            return len(q.entities) * self.cap
        return sum(index.value(e) for e in q.entities)

    def save(self, destination: Union[str, IO[str]], t: Taxonomy) -> None:
        """Write all sections sorted by target then node name; deterministic."""
        chunks = []
        for target in sorted(self._indexes, key=t.name):
            index = self._indexes[target]
            chunks.append(f"#{t.name(target)}\t{index.cap!r}\t{index.tol!r}\n")
            rows = sorted((t.name(node), v) for node, v in index.h.items())
            chunks.extend(f"{name}\t{v!r}\n" for name, v in rows)
        text = "".join(chunks)
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8") as fh:
                fh.write(text)


def precompute_hitting(
    t: Taxonomy,
    targets: Iterable[TermId],
    cap: float = DEFAULT_CAP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    prune: float | None = None,
) -> HittingTimeStore:
    """Compute hitting-time indexes for all targets, keeping entries below `prune`.

    `prune` defaults to the cap; entries at or above it are dropped (a lookup
    reproduces them as the cap, so pruning at the cap is lossless).
    """
    targets = list(targets)
    if not targets:
        raise ValueError("precompute requires at least one target")
    if prune is None:
        prune = cap
    if not 0.0 < prune <= cap:
        raise ValueError(f"prune must lie in (0, cap], got {prune}")
    store = HittingTimeStore(cap=cap, tol=tol)
    for target in sorted(set(targets), key=t.name):
        index = hitting_times(t, target, cap, tol, max_iter)
        kept = {node: v for node, v in index.h.items() if v < prune}
        store.add(HittingTimeIndex(target=target, cap=cap, tol=tol, h=kept))
    return store


def load_hitting_store(source: Union[str, IO[str]], t: Taxonomy) -> HittingTimeStore:
    """Read a store written by :meth:`HittingTimeStore.save` against the same taxonomy."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()

    store: HittingTimeStore | None = None
    current: dict[TermId, float] | None = None
    target: TermId | None = None
    cap = tol = None

    def flush():
        if target is not None:
            store.add(HittingTimeIndex(target=target, cap=cap, tol=tol, h=current))

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: malformed section header")
            if store is not None:
                flush()
            new_cap, new_tol = float(parts[1]), float(parts[2])
            if store is None:
                store = HittingTimeStore(cap=new_cap, tol=new_tol)
            elif store.cap != new_cap:
                raise ValueError(f"line {lineno}: sections disagree on cap")
            cap, tol = new_cap, new_tol
            target = t.term_id(parts[0])
            current = {}
        else:
            if current is None:
                raise ValueError(f"line {lineno}: entry before any section header")
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected `node<TAB>h`")
            current[t.term_id(parts[0])] = float(parts[1])
    if store is None:
        raise ValueError("empty hitting-time index file")
    flush()
    return store
