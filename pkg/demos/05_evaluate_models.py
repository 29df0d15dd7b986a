"""Score the model variants against held-out list members, end to end.

Ground truth is a set of named entity lists.  For each list a random seed
subset becomes the query and the rest is the holdout to recover; rankings are
scored with precision/recall/F1, NDCG, and precision@k.  A paired t-test
checks the divergence objective itself: admitting the true held-out answer
should perturb the query's concept distribution less than admitting a random
concept-sharing entity.
"""

import random
from pathlib import Path

from setexpand import (
    GroundTruthList,
    Taxonomy,
    evaluate_variants,
    load_taxonomy,
    rem_rationality_test,
)

DATA = Path(__file__).resolve().parent.parent / "data"

# tiny smoke run on the bundled fixture
t = load_taxonomy(DATA / "t0.tsv")
lists = [GroundTruthList("bric", ("china", "india", "brazil", "russia"))]
summaries = evaluate_variants(t, lists, variants=("prm+pp+no", "rem+fg+no", "knn"),
                              alpha=0.75, rng_seed=7, trials=4)
print("fixture lists, 3 seeds / 1 holdout, 4 trials:")
for s in summaries:
    print(f"  {s.variant:10s} mndcg={s.mndcg:.3f}  p@1={s.mean_precision_at(1):.3f}")

# a synthetic corpus with planted shared concepts and bystander noise
rng = random.Random(11)
edges, truth = [], []
for li in range(10):
    members = [f"item {li}.{j}" for j in range(5)]
    for m in members:
        edges.append((m, f"group {li}", rng.randint(10, 30)))
        edges.append((m, "everything", rng.randint(1, 5)))
    truth.append(GroundTruthList(f"group {li}", tuple(members)))
for i in range(40):
    edges.append((f"bystander {i}", "everything", rng.randint(2, 8)))
corpus = Taxonomy.from_edges(edges)

print(f"\nplanted corpus: {corpus}")
summaries = evaluate_variants(corpus, truth, variants=("prm+fg+no", "prm+pp+ba", "knn"),
                              alpha=0.5, rng_seed=3, trials=2)
for s in summaries:
    print(f"  {s.variant:10s} mndcg={s.mndcg:.3f}  recall={s.mean('recall'):.3f}")

t_stat, p_value = rem_rationality_test(corpus, truth, n_queries=30, n_random=20, rng_seed=5)
print(f"\ndivergence-objective sanity: paired t = {t_stat:.2f}, p = {p_value:.2e}")
print("negative t: true answers disturb the concept distribution least")
