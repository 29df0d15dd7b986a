"""Load the bundled toy taxonomy and read off its count-based probabilities.

The taxonomy is a weighted isA edge list: `china isA bric (4)` says the pair
was observed 4 times.  Every probability the models use is a ratio of these
counts, computed on demand.
"""

from pathlib import Path

from setexpand import load_taxonomy

DATA = Path(__file__).resolve().parent.parent / "data"

t = load_taxonomy(DATA / "t0.tsv")
print(t)

china = t.term_id("china")
bric = t.term_id("bric")
country = t.term_id("country")

print(f"\nn(china, bric) = {t.edge_count(china, bric)}")
print(f"n_hypo(china)  = {t.n_hypo(china)}   (china's total hyponym-role mass)")
print(f"n_hyper(bric)  = {t.n_hyper(bric)}   (bric's total hypernym-role mass)")

# both directions of typicality come from the same edge count
print(f"\nP(china | bric) = {t.typicality_e_given_c(china, bric):.6f}  (how typical"
      " china is of bric)")
print(f"P(bric | china) = {t.typicality_c_given_e(china, bric):.6f}  (how typical"
      " bric is of china)")

print(f"\nconcept prior P(bric)    = {t.concept_prior(bric):.6f}")
print(f"concept prior P(country) = {t.concept_prior(country):.6f}")

print("\nconcepts of china:")
for c, cnt in t.concepts_of(china):
    print(f"  {t.name(c):20s} count={cnt:3d}  P(c|china)={t.typicality_c_given_e(china, c):.4f}")

print("\nentities of bric:")
for e, cnt in t.entities_of(bric):
    print(f"  {t.name(e):20s} count={cnt:3d}  P(e|bric)={t.typicality_e_given_c(e, bric):.4f}")

# a term can be both an entity and a concept; the two marginals are independent
dc = t.term_id("developing country")
print(f"\n'developing country' plays both roles: n_hypo={t.n_hypo(dc)}, n_hyper={t.n_hyper(dc)}")
