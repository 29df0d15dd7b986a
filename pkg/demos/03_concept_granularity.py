"""Damp overly general concepts: popularity penalty vs hitting-time selection.

`country` covers everything, so it dominates raw posteriors.  The popularity
penalty divides by each concept's prior.  The granularity-aware alternative
runs an upward random walk from the seeds and keeps the k concepts reached in
the fewest expected steps; walks that can bypass a concept forever are
truncated at a cap.
"""

from pathlib import Path

from setexpand import (
    Query,
    aggregate_hitting,
    delta_pp,
    hitting_times,
    load_taxonomy,
    precompute_hitting,
    select_fine_grained,
)

DATA = Path(__file__).resolve().parent.parent / "data"

t = load_taxonomy(DATA / "t0.tsv")
q = Query.from_names(t, ["china", "india", "brazil"])

print("popularity penalty (1 / concept prior):")
sel = delta_pp(t, t.concept_ids())
for c in sorted(sel.weights, key=t.name):
    print(f"  {t.name(c):20s} delta={sel.weights[c]:.4f}")

print("\nexpected steps to reach `country` from each node (cap=10):")
idx = hitting_times(t, t.term_id("country"), cap=10.0)
for node in sorted(idx.h, key=t.name):
    print(f"  {t.name(node):20s} h={idx.value(node):.4f}")

print("\naggregate hitting time of the query to each concept:")
for name in ("bric", "developing country", "country"):
    agg = aggregate_hitting(t, q, t.term_id(name), cap=10.0)
    print(f"  {name:20s} H={agg:.4f}")

sel = select_fine_grained(t, q, k=1, cap=10.0)
chosen = ", ".join(t.name(c) for c in sel.weights)
print(f"\nfine-grained selection on this tiny fixture, k=1 -> {{{chosen}}}")
print("(direct `country` edges dominate T0, so the general concept wins here)")

# T1 routes 70% of each member's mass through the specific concept: now the
# general concept is mostly reached via a longer path and loses
t1 = load_taxonomy(DATA / "t1.tsv")
q1 = Query.from_names(t1, ["e1", "e2", "e3"])
for name in ("core group", "broad class"):
    agg = aggregate_hitting(t1, q1, t1.term_id(name), cap=10.0)
    print(f"\nT1 aggregate to {name!r}: {agg:.4f}", end="")
sel1 = select_fine_grained(t1, q1, k=1, cap=10.0)
print(f"\nT1 selection, k=1 -> {{{', '.join(t1.name(c) for c in sel1.weights)}}}")

# the per-target indexes are query-independent, so they precompute offline
store = precompute_hitting(t, t.concept_ids(), cap=10.0)
out = Path("/tmp/t0_hitting_index.tsv")
store.save(out, t)
print(f"\nwrote {len(store)} hitting-time sections to {out}")
