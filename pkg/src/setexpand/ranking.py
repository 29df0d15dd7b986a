"""Entity ranking: relevance scoring, divergence scoring, and the KNN baseline.

A query is answered in three steps: infer the concept posterior (`no`/`ba`),
weight or select concepts (`pp`/`fg`), then score candidate entities against
the resulting latent concept layer.  Two scoring models are provided:

* ``prm`` ranks by relevance  sum_c P(e|c) * posterior(c) * weight(c),
  descending;
* ``rem`` ranks by how little admitting the entity perturbs the query's
  concept distribution (a relative-entropy score, ascending).

For the Noisy-Or concept model the posterior is a vector of independent
per-concept activation probabilities, so the perturbation is the KL
divergence of the joint activation distribution: the sum of per-concept
Bernoulli divergences.  For the Bayes model the posterior is categorical and
the divergence is the categorical KL over the (weighted, floored, normalized)
support.  Both are true KL divergences, hence non-negative, and zero when the
entity leaves the distribution unchanged.

Candidates are generated from the inverted index (entities of the effective
support), never by scanning the whole entity set; terms whose hypernym-role
mass exceeds their hyponym-role mass are treated as concepts, not suggestable
entities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .granularity import (
    DEFAULT_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ConceptSelection,
    HittingTimeStore,
    delta_pp,
    select_fine_grained,
)
from .inference import (
    ConceptDistribution,
    Query,
    SmoothingConfig,
    extend_noisy_or,
    posterior_bayes,
    posterior_noisy_or,
)
from .taxonomy import Taxonomy, TermId

REM_FLOOR = 1e-12

MODELS = ("prm", "rem", "knn")
CONCEPT_MODELS = ("no", "ba")
GRANULARITIES = ("pp", "fg")

#: the eight suggestion variants plus the baseline, in reporting order
ALL_VARIANTS = (
    "prm+pp+ba", "prm+fg+ba", "prm+pp+no", "prm+fg+no",
    "rem+pp+ba", "rem+fg+ba", "rem+pp+no", "rem+fg+no",
    "knn",
)


class UnconceptualizableQueryError(ValueError):
    """No concept relates to any query entity under the chosen granularity."""


@dataclass(frozen=True)
class ModelConfig:
    """Which model combination to run, plus its numeric knobs."""

    model: str = "prm"
    concept_model: str = "no"
    granularity: str = "fg"
    k: int = 50
    lam: float = 0.9
    cap: float = DEFAULT_CAP
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    top_n: int = 10
    concept_filter_ratio: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.concept_model not in CONCEPT_MODELS:
            raise ValueError(f"concept_model must be one of {CONCEPT_MODELS}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        if self.granularity == "fg" and self.k < 1:
            raise ValueError("k must be >= 1 for fine-grained selection")
        if self.concept_model == "ba" and not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1) for the Bayes model")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.cap <= 1.0:
            raise ValueError("cap must exceed 1")

    @property
    def variant(self) -> str:
        if self.model == "knn":
            return "knn"
        return f"{self.model}+{self.granularity}+{self.concept_model}"


def variant_config(name: str, base: ModelConfig | None = None) -> ModelConfig:
    """Build a config from a variant name like ``rem+fg+no`` or ``knn``."""
    base = base or ModelConfig()
    name = name.strip().lower()
    if name == "knn":
        return replace(base, model="knn")
    parts = name.split("+")
    if len(parts) != 3:
        raise ValueError(f"variant must look like 'prm+pp+no' or 'knn', got {name!r}")
    model, granularity, concept_model = parts
    return replace(base, model=model, granularity=granularity, concept_model=concept_model)


@dataclass(frozen=True)
class ScoredConceptContext:
    """The assembled latent layer a query is scored against.

    ``effective`` is posterior * weight on the surviving support; for the
    divergence model it is additionally normalized to a proper distribution.
    """

    query: Query
    config: ModelConfig
    posterior: ConceptDistribution
    selection: ConceptSelection
    effective: dict[TermId, float]


@dataclass(frozen=True)
class RankedSuggestions:
    """Scored entities, best first, ties broken by ascending entity name."""

    items: list[tuple[TermId, float]]
    query_echo: Query
    model_echo: ModelConfig

    def names(self, t: Taxonomy) -> list[str]:
        return [t.name(e) for e, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def build_context(
    t: Taxonomy,
    q: Query,
    cfg: ModelConfig,
    store: HittingTimeStore | None = None,
    posterior: ConceptDistribution | None = None,
) -> ScoredConceptContext:
    """Infer the posterior and concept weighting for a query.

    `posterior` may carry a maintained (incrementally extended) Noisy-Or
    posterior; it must equal the batch posterior for `q`.  Raises
    :class:`UnconceptualizableQueryError` when nothing survives selection.
    """
    if posterior is None:
        if cfg.concept_model == "no":
            posterior = posterior_noisy_or(t, q)
        else:
            posterior = posterior_bayes(t, q, SmoothingConfig(cfg.lam))

    if cfg.granularity == "pp":
        selection = delta_pp(t, posterior.support)
        effective = {c: w * selection.weights[c] for c, w in posterior.weights.items()}
    else:
        selection = select_fine_grained(
            t, q, cfg.k, cfg.cap, cfg.tol, cfg.max_iter, store=store
        )
        effective = {
            c: w for c, w in posterior.weights.items() if c in selection.weights
        }

    if not effective:
        raise UnconceptualizableQueryError(
            "no concept relates the query entities under the current settings"
        )
    if cfg.model == "rem":
        total = sum(effective.values())
        effective = {c: w / total for c, w in effective.items()}
    return ScoredConceptContext(
        query=q, config=cfg, posterior=posterior, selection=selection, effective=effective
    )


def prm_score(t: Taxonomy, ctx: ScoredConceptContext, e: TermId) -> float:
    """Relevance of e: sum over the effective support of P(e|c) * effective(c)."""
    score = 0.0
    for c, cnt in t.concepts_of(e):
        w = ctx.effective.get(c)
        if w is not None:
            score += (cnt / t.n_hyper(c)) * w
    return score


def _bernoulli_divergence(p: float, p_ext: float) -> float:
    """KL between Bernoulli(p) and Bernoulli(p_ext), floored against log(0)."""
    term = 0.0
    if p > 0.0:
        term += p * math.log(p / max(p_ext, REM_FLOOR))
    if p < 1.0:
        term += (1.0 - p) * math.log((1.0 - p) / max(1.0 - p_ext, REM_FLOOR))
    return max(term, 0.0)


def _categorical_divergence(
    base: dict[TermId, float], extended: dict[TermId, float]
) -> float:
    """KL(base || extended) over base's support after flooring and normalizing."""
    zb = sum(base.values())
    floored = {c: extended.get(c, 0.0) + REM_FLOOR for c in base}
    zx = sum(floored.values())
    total = 0.0
    for c, w in base.items():
        pb = w / zb
        if pb > 0.0:
            total += pb * math.log(pb / (floored[c] / zx))
    return max(total, 0.0)


def rem_score(t: Taxonomy, ctx: ScoredConceptContext, e: TermId) -> float:
    """How much admitting e perturbs the query's concept distribution (>= 0).

    Noisy-Or: sum over the effective support of selection-weighted Bernoulli
    divergences between the activation before and after the extension (the
    extension uses the exact incremental identity, so it matches the batch
    posterior for q + e).  Bayes: categorical KL between the weighted,
    normalized posteriors before and after recomputation over q + e.
    """
    t.name(e)
    cfg = ctx.config
    support = ctx.effective

    if cfg.concept_model == "no":
        extended = extend_noisy_or(ctx.posterior, t, e).weights
        score = 0.0
        for c in support:
            p = ctx.posterior.weights[c]
            weight = ctx.selection.weights.get(c, 1.0)
            score += weight * _bernoulli_divergence(p, extended[c])
        return score

    ext_posterior = posterior_bayes(t, ctx.query.extended(e), SmoothingConfig(cfg.lam))
    base = {c: ctx.posterior.weights[c] * ctx.selection.weights.get(c, 1.0) for c in support}
    extended = {
        c: ext_posterior.weights.get(c, 0.0) * ctx.selection.weights.get(c, 1.0)
        for c in support
    }
    return _categorical_divergence(base, extended)


def _is_suggestable(t: Taxonomy, e: TermId, ratio: float) -> bool:
    # terms that are mostly concepts (hypernym mass dominates) are not suggested
    return t.n_hyper(e) <= ratio * t.n_hypo(e)


def candidate_entities(t: Taxonomy, ctx: ScoredConceptContext, q: Query) -> list[TermId]:
    """Entities of the effective support, minus the query and concept-like terms.

    Complete: every entity with a positive relevance score appears here, since
    a positive score requires an edge into some effective concept.
    """
    exclude = set(q.entities)
    out: dict[TermId, None] = {}
    for c in ctx.effective:
        for e, _ in t.entities_of(c):
            if e not in exclude and e not in out and _is_suggestable(
                t, e, ctx.config.concept_filter_ratio
            ):
                out[e] = None
    return sorted(out, key=t.name)


def suggest(
    t: Taxonomy,
    q: Query,
    cfg: ModelConfig,
    store: HittingTimeStore | None = None,
    posterior: ConceptDistribution | None = None,
) -> RankedSuggestions:
    """Rank candidate entities for the query under the configured model.

    Deterministic: scores are pure functions of the taxonomy, and ordering is
    (score, entity name) with the score direction set by the model.
    """
    if cfg.model == "knn":
        return knn_baseline(t, q, cfg.top_n, cfg.concept_filter_ratio, config=cfg)
    ctx = build_context(t, q, cfg, store=store, posterior=posterior)
    candidates = candidate_entities(t, ctx, q)
    if cfg.model == "prm":
        scored = [(e, prm_score(t, ctx, e)) for e in candidates]
        scored.sort(key=lambda it: (-it[1], t.name(it[0])))
    else:
        scored = [(e, rem_score(t, ctx, e)) for e in candidates]
        scored.sort(key=lambda it: (it[1], t.name(it[0])))
    return RankedSuggestions(items=scored[: cfg.top_n], query_echo=q, model_echo=cfg)


def knn_baseline(
    t: Taxonomy,
    q: Query,
    top_n: int = 10,
    concept_filter_ratio: float = 1.0,
    config: ModelConfig | None = None,
) -> RankedSuggestions:
    """Rank by cosine similarity between concept vectors of the query and entity.

    The query vector holds P(q|c) = sum_e n(e,c) / n_hyper(c) over the union of
    the query entities' concepts; entity vectors hold P(e|c).  Candidates are
    restricted to entities sharing at least one concept with the query, which
    cannot drop any entity with a nonzero cosine.
    """
    cfg = config or ModelConfig(model="knn", top_n=top_n)
    qvec: dict[TermId, float] = {}
    for e in q.entities:
        for c, cnt in t.concepts_of(e):
            qvec[c] = qvec.get(c, 0.0) + cnt / t.n_hyper(c)
    qnorm = math.sqrt(sum(v * v for v in qvec.values()))

    exclude = set(q.entities)
    pool: dict[TermId, None] = {}
    for c in qvec:
        for e, _ in t.entities_of(c):
            if e not in exclude and e not in pool and _is_suggestable(
                t, e, concept_filter_ratio
            ):
                pool[e] = None

    scored: list[tuple[TermId, float]] = []
    for e in sorted(pool, key=t.name):
        dot = 0.0
        sq = 0.0
        for c, cnt in t.concepts_of(e):
            v = cnt / t.n_hyper(c)
            sq += v * v
            if c in qvec:
                dot += v * qvec[c]
        sim = dot / (qnorm * math.sqrt(sq)) if dot > 0.0 else 0.0
        scored.append((e, sim))
    scored.sort(key=lambda it: (-it[1], t.name(it[0])))
    return RankedSuggestions(items=scored[:top_n], query_echo=q, model_echo=cfg)
