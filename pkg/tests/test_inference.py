import random
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setexpand import (
    EntityResolutionError,
    Query,
    SmoothingConfig,
    extend_noisy_or,
    normalize,
    posterior_bayes,
    posterior_noisy_or,
)

from synth import random_taxonomy


def q(t, *names):
    return Query.from_names(t, names)


class TestQuery:
    def test_from_names_resolves_and_dedupes(self, t0):
        query = Query.from_names(t0, ["China", "india", " china "])
        assert [t0.name(e) for e in query.entities] == ["china", "india"]

    def test_unknown_entities_collected(self, t0):
        with pytest.raises(EntityResolutionError) as exc:
            Query.from_names(t0, ["china", "atlantis", "mordor"])
        assert exc.value.names == ["atlantis", "mordor"]

    def test_pure_concept_not_resolvable(self, t0):
        # `country` never appears in the hyponym role in T0
        with pytest.raises(EntityResolutionError):
            Query.from_names(t0, ["country"])

    def test_empty_query_rejected(self, t0):
        with pytest.raises(EntityResolutionError):
            Query.from_names(t0, [])


class TestNoisyOr:
    def test_single_entity_equals_conditional(self, t0):
        dist = posterior_noisy_or(t0, q(t0, "china"))
        assert dist.weights[t0.term_id("bric")] == pytest.approx(4 / 22, abs=1e-12)

    def test_two_entities_hand_value(self, t0):
        dist = posterior_noisy_or(t0, q(t0, "china", "india"))
        expected = 1 - (1 - 4 / 22) * (1 - 3 / 15)
        assert dist.weights[t0.term_id("bric")] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.345455, abs=1e-6)

    def test_three_entities_hand_value(self, t0):
        dist = posterior_noisy_or(t0, q(t0, "china", "india", "brazil"))
        expected = 1 - (1 - 12 / 22) * (1 - 8 / 15) * (1 - 6 / 14)
        assert dist.weights[t0.term_id("country")] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.878788, abs=1e-6)

    def test_support_is_union_of_member_concepts(self, t0):
        dist = posterior_noisy_or(t0, q(t0, "usa"))
        assert set(dist.weights) == {t0.term_id("country")}

    def test_weights_in_unit_interval(self, t0):
        dist = posterior_noisy_or(t0, q(t0, "china", "india", "brazil", "russia", "usa"))
        for w in dist.weights.values():
            assert 0.0 < w <= 1.0


class TestExtendNoisyOr:
    def test_incremental_formula(self):
        # w' = w + p - w*p on a direct 0.5/0.5 case
        assert 0.5 + 0.5 - 0.25 == 0.75

    def test_extend_matches_batch_on_t0(self, t0):
        base = posterior_noisy_or(t0, q(t0, "china", "india"))
        ext = extend_noisy_or(base, t0, t0.term_id("brazil"))
        batch = posterior_noisy_or(t0, q(t0, "china", "india", "brazil"))
        assert set(ext.weights) == set(batch.weights)
        for c, w in batch.weights.items():
            assert ext.weights[c] == pytest.approx(w, abs=1e-12)

    def test_zero_contribution_leaves_weight_unchanged(self, t0):
        base = posterior_noisy_or(t0, q(t0, "china"))
        ext = extend_noisy_or(base, t0, t0.term_id("usa"))
        bric = t0.term_id("bric")
        assert ext.weights[bric] == base.weights[bric]

    def test_extend_never_decreases(self, t0):
        base = posterior_noisy_or(t0, q(t0, "china", "india"))
        ext = extend_noisy_or(base, t0, t0.term_id("russia"))
        for c, w in base.weights.items():
            assert ext.weights[c] >= w
            assert ext.weights[c] <= 1.0

    def test_extend_requires_unnormalized(self, t0):
        base = normalize(posterior_noisy_or(t0, q(t0, "china")))
        with pytest.raises(ValueError):
            extend_noisy_or(base, t0, t0.term_id("india"))

    def test_incremental_equals_batch_randomized(self):
        rng = random.Random(202)
        for _ in range(100):
            t = random_taxonomy(rng, n_entities=9, n_concepts=6, n_edges=35)
            entities = t.entity_ids()
            size = rng.randint(1, min(4, len(entities) - 1))
            members = rng.sample(entities, size)
            extra_pool = [e for e in entities if e not in members]
            extra = rng.choice(extra_pool)
            base = posterior_noisy_or(t, Query.from_ids(t, members))
            ext = extend_noisy_or(base, t, extra)
            batch = posterior_noisy_or(t, Query.from_ids(t, members + [extra]))
            assert set(ext.weights) == set(batch.weights)
            for c, w in batch.weights.items():
                assert abs(ext.weights[c] - w) < 1e-12

    def test_permutation_invariance(self, t0):
        names = ["china", "india", "brazil"]
        reference = posterior_noisy_or(t0, q(t0, *names)).weights
        for perm in permutations(names):
            other = posterior_noisy_or(t0, q(t0, *perm)).weights
            assert set(other) == set(reference)
            for c, w in reference.items():
                assert other[c] == pytest.approx(w, abs=1e-12)

    def test_concentration(self, t0):
        # a concept dominating another on every member (strictly on one)
        # ends up with the larger activation
        dist = posterior_noisy_or(t0, q(t0, "china", "india", "brazil"))
        country = dist.weights[t0.term_id("country")]
        bric = dist.weights[t0.term_id("bric")]
        # P(country|e) > P(bric|e) for every member of the query
        assert country > bric


class TestBayes:
    def test_hand_weights_ratio(self, t0):
        # exact ratio country/bric is 7/4 for q={china, india}, lambda=0.9
        dist = posterior_bayes(t0, q(t0, "china", "india"), SmoothingConfig(0.9))
        bric = dist.weights[t0.term_id("bric")]
        country = dist.weights[t0.term_id("country")]
        assert country / bric == pytest.approx(1.75, abs=1e-9)

    def test_unscaled_hand_value_proportions(self, t0):
        # (14/98)*(0.9*4/14)*(0.9*3/14) ~= 0.007084 before rescaling; the
        # implementation rescales by the max weight so only ratios are pinned
        dist = posterior_bayes(t0, q(t0, "china", "india"), SmoothingConfig(0.9))
        bric = dist.weights[t0.term_id("bric")]
        dc = dist.weights[t0.term_id("developing country")]
        raw_bric = (14 / 98) * (0.9 * 4 / 14) * (0.9 * 3 / 14)
        raw_dc = (20 / 98) * (0.9 * 6 / 20) * (0.9 * 4 / 20)
        assert bric / dc == pytest.approx(raw_bric / raw_dc, rel=1e-9)

    def test_single_entity_ranking_matches_edge_counts(self, t0):
        # with |q| = 1 the weight is proportional to n(e, c)
        dist = posterior_bayes(t0, q(t0, "china"), SmoothingConfig(0.9))
        ranked = sorted(dist.weights, key=dist.weights.get, reverse=True)
        by_count = sorted(
            (c for c, _ in t0.concepts_of(t0.term_id("china"))),
            key=lambda c: t0.edge_count(t0.term_id("china"), c),
            reverse=True,
        )
        assert ranked == by_count

    def test_support_restricted_to_query_concepts(self, t0):
        dist = posterior_bayes(t0, q(t0, "usa"), SmoothingConfig(0.9))
        assert set(dist.weights) == {t0.term_id("country")}

    def test_ranking_invariant_under_count_scaling(self, t0):
        from setexpand import Taxonomy

        scaled = Taxonomy.from_edges(
            (t0.name(e.hypo), t0.name(e.hyper), e.count * 13) for e in t0.edges()
        )
        d0 = posterior_bayes(t0, q(t0, "china", "india"), SmoothingConfig(0.9))
        d1 = posterior_bayes(scaled, q(scaled, "china", "india"), SmoothingConfig(0.9))
        names0 = {t0.name(c): w for c, w in d0.weights.items()}
        names1 = {scaled.name(c): w for c, w in d1.weights.items()}
        anchor = "bric"
        for n in names0:
            assert names0[n] / names0[anchor] == pytest.approx(
                names1[n] / names1[anchor], rel=1e-9
            )

    def test_lambda_near_one_favors_full_coverage(self, t0):
        # `bric` covers both query entities, `country` too, but a concept
        # missing one entity must fall below any full-coverage concept
        for lam in (0.9, 0.99, 0.999):
            dist = posterior_bayes(t0, q(t0, "china", "usa"), SmoothingConfig(lam))
            bric = dist.weights[t0.term_id("bric")]  # covers china only
            country = dist.weights[t0.term_id("country")]  # covers both
            assert country > bric
        # and the full-coverage dominance grows with lambda
        ratios = []
        for lam in (0.9, 0.99, 0.999):
            dist = posterior_bayes(t0, q(t0, "china", "usa"), SmoothingConfig(lam))
            ratios.append(
                dist.weights[t0.term_id("country")] / dist.weights[t0.term_id("bric")]
            )
        assert ratios == sorted(ratios)

    def test_smoothing_config_bounds(self):
        with pytest.raises(ValueError):
            SmoothingConfig(0.0)
        with pytest.raises(ValueError):
            SmoothingConfig(1.0)


class TestNormalize:
    def test_symmetry(self, t0):
        from setexpand import ConceptDistribution

        dist = normalize(ConceptDistribution({1: 2.0, 2: 2.0}))
        assert dist.weights == {1: 0.5, 2: 0.5}
        assert dist.normalized

    def test_singleton(self):
        from setexpand import ConceptDistribution

        dist = normalize(ConceptDistribution({5: 3.0}))
        assert dist.weights[5] == pytest.approx(1.0, abs=1e-15)

    def test_t0_noisy_or_normalization(self, t0):
        # exact rational evaluation of the three Noisy-Or products gives
        # (17/35, 23/35, 29/33); dividing by their sum yields the values below
        dist = normalize(posterior_noisy_or(t0, q(t0, "china", "india", "brazil")))
        assert dist.weights[t0.term_id("bric")] == pytest.approx(561 / 2335, abs=1e-12)
        assert dist.weights[t0.term_id("developing country")] == pytest.approx(
            759 / 2335, abs=1e-12
        )
        assert dist.weights[t0.term_id("country")] == pytest.approx(203 / 467, abs=1e-12)
        assert sum(dist.weights.values()) == pytest.approx(1.0, abs=1e-9)

    def test_empty_support_rejected(self):
        from setexpand import ConceptDistribution

        with pytest.raises(ValueError):
            normalize(ConceptDistribution({}))


@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=4))
@settings(max_examples=40, deadline=None)
def test_noisy_or_monotone_and_bounded(seed, size):
    rng = random.Random(seed)
    t = random_taxonomy(rng, n_entities=8, n_concepts=5, n_edges=30)
    entities = t.entity_ids()
    members = rng.sample(entities, min(size, len(entities)))
    dist = posterior_noisy_or(t, Query.from_ids(t, members))
    for w in dist.weights.values():
        assert 0.0 < w <= 1.0
    others = [e for e in entities if e not in members]
    if others:
        ext = extend_noisy_or(dist, t, rng.choice(others))
        for c, w in dist.weights.items():
            assert ext.weights[c] >= w - 1e-15
