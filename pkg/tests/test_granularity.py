import io
import random
from itertools import combinations

import numpy as np
import pytest

from setexpand import (
    Query,
    TaxonomyError,
    aggregate_hitting,
    candidate_targets,
    delta_pp,
    hitting_times,
    load_hitting_store,
    precompute_hitting,
    select_fine_grained,
)

from synth import exact_hitting_times, random_taxonomy, random_upward_dag


def q(t, *names):
    return Query.from_names(t, names)


class TestDeltaPP:
    def test_hand_values(self, t0):
        sel = delta_pp(t0, [t0.term_id("bric"), t0.term_id("country")])
        assert sel.weights[t0.term_id("bric")] == pytest.approx(7.0, abs=1e-12)
        assert sel.weights[t0.term_id("country")] == pytest.approx(98 / 64, abs=1e-12)

    def test_ratio_and_antimonotonicity(self, t0):
        ids = [t0.term_id(n) for n in ("bric", "developing country", "country")]
        sel = delta_pp(t0, ids)
        bric, dc, country = (sel.weights[c] for c in ids)
        assert bric / country == pytest.approx(64 / 14, abs=1e-12)
        # n_hyper: bric=14 < dc=20 < country=64, so weights strictly reverse
        assert bric > dc > country

    def test_rejects_zero_mass_concept(self, t0):
        with pytest.raises(TaxonomyError):
            delta_pp(t0, [t0.term_id("china")])


class TestHittingTimes:
    def test_target_is_zero(self, t0):
        idx = hitting_times(t0, t0.term_id("country"), cap=10.0)
        assert idx.value(t0.term_id("country")) == 0.0

    def test_t0_hand_solution(self, t0):
        idx = hitting_times(t0, t0.term_id("country"), cap=10.0)
        assert idx.value(t0.term_id("bric")) == pytest.approx(1.0, abs=1e-9)
        assert idx.value(t0.term_id("developing country")) == pytest.approx(1.0, abs=1e-9)
        assert idx.value(t0.term_id("china")) == pytest.approx(16 / 11, abs=1e-9)
        assert idx.value(t0.term_id("india")) == pytest.approx(22 / 15, abs=1e-9)
        assert idx.value(t0.term_id("brazil")) == pytest.approx(11 / 7, abs=1e-9)

    def test_dead_end_saturates_at_cap(self, t0):
        idx = hitting_times(t0, t0.term_id("bric"), cap=10.0)
        assert idx.value(t0.term_id("country")) == 10.0

    def test_values_bounded(self, t0):
        for name in ("bric", "developing country", "country"):
            idx = hitting_times(t0, t0.term_id(name), cap=10.0)
            for node, v in idx.h.items():
                assert 0.0 <= v <= 10.0
                if node != idx.target:
                    assert v >= 1.0

    def test_cap_must_exceed_one(self, t0):
        with pytest.raises(ValueError):
            hitting_times(t0, t0.term_id("country"), cap=1.0)

    def test_target_must_be_concept(self, t0):
        with pytest.raises(TaxonomyError):
            hitting_times(t0, t0.term_id("usa"))

    def test_sweeps_never_increase(self, t0):
        # re-running value iteration sweep by sweep must be monotone downward
        import numpy as np

        t = t0
        target = t.term_id("country")
        cap = 10.0
        walkers = np.nonzero(t._n_hypo)[0]
        starts = t._hypo_ptr[walkers]
        h = np.full(t.n_terms, cap)
        h[target] = 0.0
        for _ in range(50):
            sums = np.add.reduceat(t._e_prob * h[t._e_hyper], starts)
            new = np.minimum(1.0 + sums, cap)
            pos = np.searchsorted(walkers, target)
            if pos < walkers.size and walkers[pos] == target:
                new[pos] = 0.0
            assert np.all(new <= h[walkers] + 1e-12)
            h[walkers] = new

    def test_matches_exact_topological_solution(self):
        rng = random.Random(31)
        for _ in range(25):
            n = rng.randint(5, 14)
            t, names, edges = random_upward_dag(rng, n_nodes=n, extra_edges=rng.randint(0, 12))
            target_idx = n - 1
            cap = 25.0
            exact = exact_hitting_times(edges, n, target_idx, cap)
            idx = hitting_times(t, t.term_id(names[target_idx]), cap=cap, tol=1e-12)
            for i in range(n):
                assert idx.value(t.term_id(names[i])) == pytest.approx(
                    float(exact[i]), abs=1e-8
                )

    def test_cycle_saturates_when_unreachable(self):
        from setexpand import Taxonomy

        t = Taxonomy.from_edges(
            [("a", "b", 1), ("b", "a", 1), ("x", "goal", 1), ("a", "goal", 1)]
        )
        idx = hitting_times(t, t.term_id("goal"), cap=8.0)
        # b -> a -> goal exists, so both converge below cap
        assert idx.value(t.term_id("a")) < 8.0
        assert idx.value(t.term_id("b")) < 8.0

        t2 = Taxonomy.from_edges(
            [("a", "b", 1), ("b", "a", 1), ("x", "goal", 1)]
        )
        idx2 = hitting_times(t2, t2.term_id("goal"), cap=8.0)
        assert idx2.value(t2.term_id("a")) == 8.0
        assert idx2.value(t2.term_id("b")) == 8.0


class TestAggregate:
    def test_t0_country_aggregate(self, t0):
        agg = aggregate_hitting(t0, q(t0, "china", "india", "brazil"),
                                t0.term_id("country"), cap=10.0)
        assert agg == pytest.approx(16 / 11 + 22 / 15 + 11 / 7, abs=1e-9)
        assert agg == pytest.approx(4.492641, abs=1e-6)

    def test_single_forced_step(self, t0):
        # usa's only concept is country, so one step is forced
        agg = aggregate_hitting(t0, q(t0, "usa"), t0.term_id("country"), cap=10.0)
        assert agg == pytest.approx(1.0, abs=1e-9)

    def test_t0_bric_aggregate_with_saturation(self, t0):
        agg = aggregate_hitting(t0, q(t0, "china", "india", "brazil"),
                                t0.term_id("bric"), cap=10.0)
        china = 1 + (18 / 22) * 10
        india = 1 + (12 / 15) * 10
        brazil = 1 + (11 / 14) * 10
        assert china == pytest.approx(9.181818, abs=1e-6)
        assert agg == pytest.approx(china + india + brazil, abs=1e-9)
        assert agg == pytest.approx(27.038961, abs=1e-6)


class TestSelectFineGrained:
    def test_t0_k1_selects_country(self, t0):
        sel = select_fine_grained(t0, q(t0, "china", "india", "brazil"), k=1, cap=10.0)
        assert set(sel.weights) == {t0.term_id("country")}
        assert sel.total_hitting == pytest.approx(4.492641, abs=1e-6)

    def test_k_at_least_support_selects_everything_reachable(self, t0):
        sel = select_fine_grained(t0, q(t0, "china", "india", "brazil"), k=50, cap=10.0)
        names = {t0.name(c) for c in sel.weights}
        assert names == {"bric", "developing country", "country"}

    def test_indicator_weights(self, t0):
        sel = select_fine_grained(t0, q(t0, "china"), k=2, cap=10.0)
        assert all(w == 1.0 for w in sel.weights.values())
        assert sel.mode == "fg"

    def test_topk_equals_subset_argmin(self, t0):
        # enumerating all 2-subsets and summing aggregates must agree with
        # taking the 2 smallest aggregates (additivity)
        query = q(t0, "china", "india", "brazil")
        pool = candidate_targets(t0, query, cap=10.0)
        aggs = {c: aggregate_hitting(t0, query, c, cap=10.0) for c in pool}
        best = min(
            combinations(pool, 2),
            key=lambda subset: (sum(aggs[c] for c in subset),
                                tuple(sorted(t0.name(c) for c in subset))),
        )
        sel = select_fine_grained(t0, query, k=2, cap=10.0)
        assert set(sel.weights) == set(best)

    def test_brute_force_randomized(self):
        rng = random.Random(77)
        for _ in range(15):
            t = random_taxonomy(rng, n_entities=8, n_concepts=6, n_edges=30)
            entities = t.entity_ids()
            members = rng.sample(entities, min(3, len(entities)))
            query = Query.from_ids(t, members)
            cap = 12.0
            pool = candidate_targets(t, query, cap)
            if len(pool) > 12:
                continue
            aggs = {c: aggregate_hitting(t, query, c, cap=cap) for c in pool}
            reachable = [c for c in pool if aggs[c] < len(members) * cap]
            for k in (1, 2, 3, 4):
                if not reachable:
                    break
                kk = min(k, len(reachable))
                best = min(
                    combinations(reachable, kk),
                    key=lambda subset: (
                        sum(aggs[c] for c in subset),
                        tuple(sorted(t.name(c) for c in subset)),
                    ),
                )
                sel = select_fine_grained(t, query, k=k, cap=cap)
                assert sum(aggs[c] for c in sel.weights) == pytest.approx(
                    sum(aggs[c] for c in best), abs=1e-9
                )

    def test_unreachable_never_selected(self):
        from setexpand import Taxonomy

        # `island` is only reachable from its own member, never from e1/e2
        t = Taxonomy.from_edges(
            [("e1", "shared", 5), ("e2", "shared", 5), ("loner", "island", 5)]
        )
        sel = select_fine_grained(t, Query.from_names(t, ["e1", "e2"]), k=10, cap=5.0)
        assert {t.name(c) for c in sel.weights} == {"shared"}

    def test_cap_dominance(self, t0):
        # both concepts sit strictly below the lower cap: order must not change
        query = q(t0, "china", "india", "brazil")
        low, high = 6.0, 10.0
        for cap in (low, high):
            agg_c = aggregate_hitting(t0, query, t0.term_id("country"), cap=cap)
            agg_d = aggregate_hitting(t0, query, t0.term_id("developing country"), cap=cap)
            assert agg_c < agg_d


class TestGranularityFixtureT1:
    def test_fg_selects_specific_concept(self, t1):
        query = q(t1, "e1", "e2", "e3")
        for cap in (5.0, 10.0, 20.0):
            sel = select_fine_grained(t1, query, k=1, cap=cap)
            assert {t1.name(c) for c in sel.weights} == {"core group"}

    def test_pp_ranks_specific_above_general(self, t1):
        core, broad = t1.term_id("core group"), t1.term_id("broad class")
        sel = delta_pp(t1, [core, broad])
        assert sel.weights[core] > sel.weights[broad]

    def test_mass_share_through_specific(self, t1):
        # construction guarantee: >= 70% of each member's mass goes upward
        # through the specific concept
        core = t1.term_id("core group")
        for name in ("e1", "e2", "e3", "e4"):
            e = t1.term_id(name)
            assert t1.edge_count(e, core) / t1.n_hypo(e) >= 0.7


class TestPrecompute:
    def test_prune_drops_saturated_entries(self, t0):
        store = precompute_hitting(t0, t0.concept_ids(), cap=10.0, prune=10.0)
        bric_idx = store.get(t0.term_id("bric"))
        assert t0.term_id("country") not in bric_idx.h  # saturated at cap
        assert bric_idx.h[t0.term_id("bric")] == 0.0

    def test_prune_1_5_keeps_hand_filtered_entries(self, t0):
        store = precompute_hitting(t0, [t0.term_id("country")], cap=10.0, prune=1.5)
        idx = store.get(t0.term_id("country"))
        kept = {t0.name(n): v for n, v in idx.h.items()}
        assert kept["china"] == pytest.approx(16 / 11, abs=1e-9)
        assert kept["developing country"] == pytest.approx(1.0, abs=1e-9)
        assert kept["bric"] == pytest.approx(1.0, abs=1e-9)
        assert kept["country"] == 0.0
        # everything below 1.5 stays: india 22/15, russia 28/19, usa 1;
        # only brazil (11/7 > 1.5) is pruned
        assert set(kept) == {
            "china", "india", "russia", "usa",
            "developing country", "bric", "country",
        }

    def test_roundtrip_reproduces_selection(self, t0, tmp_path):
        store = precompute_hitting(t0, t0.concept_ids(), cap=10.0)
        path = tmp_path / "index.tsv"
        store.save(path, t0)
        loaded = load_hitting_store(path, t0)
        query = q(t0, "china", "india", "brazil")
        online = select_fine_grained(t0, query, k=1, cap=10.0)
        offline = select_fine_grained(t0, query, k=1, cap=10.0, store=loaded)
        assert set(online.weights) == set(offline.weights)
        assert online.selected == offline.selected

    def test_save_is_deterministic(self, t0, tmp_path):
        store = precompute_hitting(t0, t0.concept_ids(), cap=10.0)
        a, b = io.StringIO(), io.StringIO()
        store.save(a, t0)
        store.save(b, t0)
        assert a.getvalue() == b.getvalue()

    def test_prune_bounds(self, t0):
        with pytest.raises(ValueError):
            precompute_hitting(t0, t0.concept_ids(), cap=10.0, prune=11.0)
        with pytest.raises(ValueError):
            precompute_hitting(t0, [], cap=10.0)
