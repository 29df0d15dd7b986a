"""Run every suggestion variant on the classic seed set {china, india, brazil}.

Two scoring models (relevance / distribution divergence) x two concept models
(noisy-or / bayes) x two granularity treatments (penalty / selection), plus
the cosine-similarity baseline.  All of them should complete the group with
russia before drifting to generic countries.
"""

from pathlib import Path

from setexpand import (
    ALL_VARIANTS,
    ModelConfig,
    Query,
    build_context,
    load_taxonomy,
    suggest,
    variant_config,
)

DATA = Path(__file__).resolve().parent.parent / "data"
t = load_taxonomy(DATA / "t0.tsv")
q = Query.from_names(t, ["china", "india", "brazil"])

print("seed entities: china, india, brazil\n")
for name in ALL_VARIANTS:
    cfg = variant_config(name, ModelConfig(top_n=3))
    result = suggest(t, q, cfg)
    shown = ", ".join(f"{t.name(e)} ({s:.4f})" for e, s in result.items)
    print(f"{name:10s} -> {shown}")

# peek at the latent layer one variant actually scored against
cfg = ModelConfig(model="prm", concept_model="no", granularity="pp")
ctx = build_context(t, q, cfg)
print("\neffective concept support for prm+pp+no:")
for c in sorted(ctx.effective, key=lambda c: -ctx.effective[c]):
    print(f"  {t.name(c):20s} {ctx.effective[c]:.4f}")
print("\nbric's activation is modest, but the popularity penalty lifts it above")
print("`country`, so russia (a strong bric member) outscores usa")
