"""Ground-truth corpora, query construction, ranking metrics, and significance tests.

Ground truth is a set of named entity lists.  Evaluation queries hide part of
each list: ceil(alpha * |L|) members become the seed query and the rest is the
holdout a suggester should recover.  Metrics are binary-relevance precision /
recall / F1, NDCG, and precision@k.

The divergence-objective sanity check follows a paired design: for each query,
the divergence for the true held-out answer is paired with the mean divergence
of randomly drawn concept-sharing entities, and a two-sided paired t-test is
run on the pairs.  The t CDF is computed from the regularized incomplete beta
continued fraction, accurate to well below 1e-6 for df <= 1000.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import IO, Collection, Iterable, Sequence, Union

import numpy as np

from .granularity import ConceptSelection, HittingTimeStore
from .inference import Query, SmoothingConfig, posterior_bayes, posterior_noisy_or
from .ranking import (
    ALL_VARIANTS,
    ModelConfig,
    ScoredConceptContext,
    UnconceptualizableQueryError,
    rem_score,
    suggest,
)
from .taxonomy import Taxonomy, TermId, normalize_name

logger = logging.getLogger(__name__)


class EmptyEvaluationError(ValueError):
    """No ground-truth list is resolvable against the taxonomy."""


# ---------------------------------------------------------------------------
# ground truth and query construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthList:
    name: str
    members: tuple[str, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError(f"list {self.name!r} needs at least 2 members")


@dataclass(frozen=True)
class EvalQuery:
    """One trial: seeds drawn from a list, holdout = the rest."""

    source: str
    seeds: tuple[str, ...]
    holdout: tuple[str, ...]
    alpha: float
    rng_seed: int
    trial: int


def load_lists(source: Union[str, IO[str]]) -> list[GroundTruthList]:
    """Parse ground-truth lists from TSV or colon format (auto-detected).

    TSV: one `list_name<TAB>member` pair per line.  Colon: one list per line,
    `name: m1, m2, ...`.  Mixing the two in one file is an error.  Duplicate
    members are dropped with a warning; lists with fewer than 2 distinct
    members are rejected with a warning.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()

    mode = None  # "tsv" | "colon"
    collected: dict[str, list[str]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        line_mode = "tsv" if "\t" in line else "colon" if ":" in line else None
        if line_mode is None:
            raise ValueError(f"line {lineno}: neither TSV nor `name: members` format")
        if mode is None:
            mode = line_mode
        elif mode != line_mode:
            raise ValueError(
                f"line {lineno}: mixed list formats; use a single format per file"
            )
        if mode == "tsv":
            name, member = line.split("\t", 1)
            collected.setdefault(normalize_name(name), []).append(normalize_name(member))
        else:
            name, _, rest = line.partition(":")
            members = [normalize_name(m) for m in rest.split(",") if m.strip()]
            collected.setdefault(normalize_name(name), []).extend(members)

    lists: list[GroundTruthList] = []
    for name, members in collected.items():
        unique: dict[str, None] = {}
        for m in members:
            if m in unique:
                logger.warning("list %r: duplicate member %r dropped", name, m)
            else:
                unique[m] = None
        if len(unique) < 2:
            logger.warning("list %r has fewer than 2 members; rejected", name)
            continue
        lists.append(GroundTruthList(name=name, members=tuple(unique)))
    if not lists:
        raise ValueError("no valid ground-truth lists found")
    return lists


def seed_count(alpha: float, size: int) -> int:
    """ceil(alpha * size), guarded against float noise right at integers."""
    return min(max(math.ceil(round(alpha * size, 9)), 1), size)


def make_queries(
    lists: Sequence[GroundTruthList], alpha: float, rng_seed: int, trials: int = 1
) -> list[EvalQuery]:
    """Draw `trials` uniformly random seed subsets of size ceil(alpha*|L|) per list.

    Reproducible for a fixed rng_seed.  Queries whose seed set swallows the
    whole list (empty holdout) are still produced; harnesses skip them.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    out: list[EvalQuery] = []
    for lst in lists:
        n = len(lst.members)
        m = seed_count(alpha, n)
        for trial in range(trials):
            idx = np.sort(rng.choice(n, size=m, replace=False))
            chosen = set(idx.tolist())
            seeds = tuple(lst.members[i] for i in sorted(chosen))
            holdout = tuple(x for i, x in enumerate(lst.members) if i not in chosen)
            out.append(
                EvalQuery(
                    source=lst.name,
                    seeds=seeds,
                    holdout=holdout,
                    alpha=alpha,
                    rng_seed=rng_seed,
                    trial=trial,
                )
            )
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def precision_recall_f(
    ranked: Sequence[str], truth: Collection[str], n_r: int
) -> tuple[float, float, float]:
    """Precision, recall, F1 of the top-n_r ranked names against the holdout."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    truth_set = set(truth)
    if not truth_set:
        raise ValueError("empty ground truth")
    hits = sum(1 for name in ranked[:n_r] if name in truth_set)
    p = hits / n_r
    r = hits / len(truth_set)
    f = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
    return p, r, f


def ndcg(ranked: Sequence[str], truth: Collection[str], depth: int) -> float:
    """Binary-relevance NDCG at `depth`: gain 1/log2(rank+1), ideal prefix of ones."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    truth_set = set(truth)
    if not truth_set:
        raise ValueError("empty ground truth")
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, name in enumerate(ranked[:depth], start=1)
        if name in truth_set
    )
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(truth_set), depth) + 1))
    return dcg / idcg


def precision_at(ranked: Sequence[str], truth: Collection[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    truth_set = set(truth)
    return sum(1 for name in ranked[:k] if name in truth_set) / k


def mndcg(values: Iterable[float]) -> float:
    """Mean NDCG over per-query values."""
    values = list(values)
    if not values:
        raise ValueError("mndcg of zero queries is undefined")
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# Student t machinery (regularized incomplete beta continued fraction)
# ---------------------------------------------------------------------------

_CF_MAX_ITER = 300
_CF_EPS = 3e-16
_CF_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_sf(t_value: float, df: int) -> float:
    """P(T > t) for Student's t with `df` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t_value):
        return 0.0 if t_value > 0 else 1.0
    x = df / (df + t_value * t_value)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return tail if t_value >= 0 else 1.0 - tail


def paired_t_test(d1: Sequence[float], d2: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t statistic, p-value).

    Degenerate cases: identical pairs give (0, 1); zero variance with a
    nonzero mean difference gives (+-inf, 0).
    """
    if len(d1) != len(d2):
        raise ValueError("paired samples must have equal length")
    n = len(d1)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = np.asarray(d1, dtype=np.float64) - np.asarray(d2, dtype=np.float64)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t_value = mean / (sd / math.sqrt(n))
    p_value = 2.0 * student_t_sf(abs(t_value), n - 1)
    return t_value, min(p_value, 1.0)


# ---------------------------------------------------------------------------
# divergence-objective rationality check
# ---------------------------------------------------------------------------


def _raw_context(t: Taxonomy, q: Query, cfg: ModelConfig) -> ScoredConceptContext:
    # unweighted support: the rationality check looks at the bare posterior
    if cfg.concept_model == "no":
        posterior = posterior_noisy_or(t, q)
    else:
        posterior = posterior_bayes(t, q, SmoothingConfig(cfg.lam))
    selection = ConceptSelection(mode="fg", weights={c: 1.0 for c in posterior.weights})
    return ScoredConceptContext(
        query=q,
        config=cfg,
        posterior=posterior,
        selection=selection,
        effective=dict(posterior.weights),
    )


def rem_rationality_test(
    t: Taxonomy,
    lists: Sequence[GroundTruthList],
    n_queries: int = 50,
    n_random: int = 50,
    rng_seed: int = 0,
    cfg: ModelConfig | None = None,
) -> tuple[float, float]:
    """Paired test that true answers perturb the concept distribution least.

    For each sampled query, d1 is the divergence for the held-out answer and
    d2-bar the mean divergence over `n_random` draws of entities sharing at
    least one concept with the query (answer and seeds excluded).  Returns the
    two-sided paired t-test over the (d1, d2-bar) pairs.
    """
    cfg = cfg or ModelConfig(model="rem", concept_model="no", granularity="fg")
    usable: list[tuple[str, list[TermId]]] = []
    for lst in lists:
        try:
            ids = [t.term_id(m) for m in lst.members]
        except KeyError:
            continue
        if all(t.n_hypo(i) > 0 for i in ids):
            usable.append((lst.name, ids))
    if not usable:
        raise EmptyEvaluationError("no ground-truth list is resolvable against the taxonomy")

    rng = np.random.default_rng(rng_seed)
    d1s: list[float] = []
    d2s: list[float] = []
    for i in range(n_queries):
        list_name, ids = usable[i % len(usable)]
        answer = ids[int(rng.integers(len(ids)))]
        seeds = tuple(x for x in ids if x != answer)
        q = Query(seeds)
        ctx = _raw_context(t, q, cfg)

        exclude = set(seeds) | {answer}
        pool: dict[TermId, None] = {}
        for c in ctx.effective:
            for e, _ in t.entities_of(c):
                if e not in exclude and t.n_hypo(e) > 0:
                    pool[e] = None
        candidates = sorted(pool, key=t.name)
        if not candidates:
            logger.warning("query from list %r has no random pool; skipped", list_name)
            continue
        draws = rng.integers(len(candidates), size=n_random)
        d1s.append(rem_score(t, ctx, answer))
        d2s.append(float(np.mean([rem_score(t, ctx, candidates[j]) for j in draws])))

    if len(d1s) < 2:
        raise ValueError("fewer than 2 usable query pairs")
    return paired_t_test(d1s, d2s)


# ---------------------------------------------------------------------------
# evaluation harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    variant: str
    list_name: str
    trial: int
    n_seeds: int
    precision: float
    recall: float
    f1: float
    ndcg: float
    precision_at: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class VariantSummary:
    variant: str
    reports: list[MetricReport]

    def mean(self, attr: str) -> float:
        if not self.reports:
            return 0.0
        return sum(getattr(r, attr) for r in self.reports) / len(self.reports)

    def mean_precision_at(self, k: int) -> float:
        if not self.reports:
            return 0.0
        return sum(r.precision_at[k] for r in self.reports) / len(self.reports)

    @property
    def mndcg(self) -> float:
        return self.mean("ndcg")


def resolvable_lists(t: Taxonomy, lists: Sequence[GroundTruthList]) -> list[GroundTruthList]:
    """Lists whose members all resolve as entities of the taxonomy."""
    out = []
    for lst in lists:
        ok = True
        for m in lst.members:
            if m not in t or t.n_hypo(t.term_id(m)) == 0:
                ok = False
                break
        if ok:
            out.append(lst)
        else:
            logger.warning("list %r has unresolvable members; skipped", lst.name)
    return out


def evaluate_variants(
    t: Taxonomy,
    lists: Sequence[GroundTruthList],
    variants: Sequence[str] = ALL_VARIANTS,
    alpha: float = 0.5,
    rng_seed: int = 0,
    trials: int = 1,
    base: ModelConfig | None = None,
    ks: Sequence[int] = (1, 2, 3, 5, 10),
    ndcg_depth: int = 10,
    n_r: int | None = None,
    store: HittingTimeStore | None = None,
) -> list[VariantSummary]:
    """Run every variant over the same seeded queries and collect metric reports.

    `n_r` is the ranked-list cutoff for precision/recall/F1; by default it is
    each query's holdout size, which makes precision and recall symmetric.
    Fully deterministic for a fixed rng_seed.
    """
    from dataclasses import replace

    from .ranking import variant_config

    base = base or ModelConfig()
    usable = resolvable_lists(t, lists)
    if not usable:
        raise EmptyEvaluationError("no ground-truth list is resolvable against the taxonomy")
    queries = [eq for eq in make_queries(usable, alpha, rng_seed, trials) if eq.holdout]
    if not queries:
        raise EmptyEvaluationError("every query has an empty holdout at this alpha")

    depth_needed = max(ndcg_depth, max(ks), max(len(eq.holdout) for eq in queries))
    summaries: list[VariantSummary] = []
    for name in variants:
        cfg = variant_config(name, base)
        cfg = replace(cfg, top_n=max(cfg.top_n, depth_needed))
        reports: list[MetricReport] = []
        for eq in queries:
            q = Query.from_names(t, eq.seeds)
            try:
                result = suggest(t, q, cfg, store=store)
                ranked = result.names(t)
            except UnconceptualizableQueryError:
                ranked = []
            truth = set(eq.holdout)
            cutoff = n_r if n_r is not None else len(truth)
            if ranked:
                p, r, f = precision_recall_f(ranked, truth, cutoff)
                nd = ndcg(ranked, truth, ndcg_depth)
                p_at = {k: precision_at(ranked, truth, k) for k in ks}
            else:
                p = r = f = nd = 0.0
                p_at = {k: 0.0 for k in ks}
            reports.append(
                MetricReport(
                    variant=name,
                    list_name=eq.source,
                    trial=eq.trial,
                    n_seeds=len(eq.seeds),
                    precision=p,
                    recall=r,
                    f1=f,
                    ndcg=nd,
                    precision_at=p_at,
                )
            )
        summaries.append(VariantSummary(variant=name, reports=reports))
    return summaries
