"""Infer which concepts a seed set implies, with both concept models.

Noisy-Or treats each concept as activated unless every seed independently
fails to activate it, so concepts covering more seeds concentrate mass.  The
smoothed Naive Bayes posterior multiplies per-seed typicalities instead.
Watch the bric activation climb as seeds arrive one by one.
"""

from pathlib import Path

from setexpand import (
    Query,
    SmoothingConfig,
    extend_noisy_or,
    load_taxonomy,
    normalize,
    posterior_bayes,
    posterior_noisy_or,
)

DATA = Path(__file__).resolve().parent.parent / "data"
t = load_taxonomy(DATA / "t0.tsv")


def show(title, dist):
    print(f"\n{title}")
    for c in sorted(dist.weights, key=lambda c: -dist.weights[c]):
        print(f"  {t.name(c):20s} {dist.weights[c]:.6f}")


# Noisy-Or, seed by seed: the incremental extension is exactly the batch result
seeds = ["china", "india", "brazil"]
dist = posterior_noisy_or(t, Query.from_names(t, seeds[:1]))
show("Noisy-Or after {china}", dist)
for name in seeds[1:]:
    dist = extend_noisy_or(dist, t, t.term_id(name))
    show(f"... extended with {name}", dist)

batch = posterior_noisy_or(t, Query.from_names(t, seeds))
drift = max(abs(dist.weights[c] - batch.weights[c]) for c in batch.weights)
print(f"\nincremental vs batch, largest deviation: {drift:.2e}")

show("normalized Noisy-Or distribution", normalize(batch))

# the Bayes posterior: smoothing keeps concepts alive that miss a seed
ba = posterior_bayes(t, Query.from_names(t, seeds), SmoothingConfig(lam=0.9))
show("Naive Bayes (lambda=0.9), relative weights", ba)

mixed = posterior_bayes(t, Query.from_names(t, ["china", "usa"]), SmoothingConfig(0.9))
show("Bayes for the stranger pair {china, usa}", mixed)
print("\ncountry covers both seeds, so it dominates; bric only covers china")
