from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repmix import (
    ConfigError,
    DimensionMismatchError,
    Draws,
    MixtureState,
    build_dataset,
    evaluate,
)
from repmix.metrics import (
    CSV_FIELDS,
    ari,
    cluster_counts,
    k_hat,
    point_assignments,
    purity,
    rand_agreement,
    relabel_draws,
    rmse_from_draws,
    rmse_posthoc,
)
from repmix.simbench import gen_scenario, toy_spec


def brute_ari(a, b):
    """Pair-counting adjusted Rand index, exact rational arithmetic."""
    n = len(a)
    pairs = list(combinations(range(n), 2))
    same_a = [a[i] == a[j] for i, j in pairs]
    same_b = [b[i] == b[j] for i, j in pairs]
    index = sum(x and y for x, y in zip(same_a, same_b))
    ra, rb, total = sum(same_a), sum(same_b), len(pairs)
    if total == 0:
        return Fraction(1)
    expected = Fraction(ra * rb, total)
    top = Fraction(ra + rb, 2)
    if top == expected:
        return Fraction(1)
    return (index - expected) / (top - expected)


def brute_purity(pred, truth):
    hits = 0
    for c in set(pred):
        members = [t for p, t in zip(pred, truth) if p == c]
        hits += max(members.count(t) for t in set(members))
    return Fraction(hits, len(pred))


def state(z, k=None, weights=None):
    z = np.asarray(z)
    k = k or int(z.max()) + 1
    return MixtureState(z, np.arange(k, dtype=float)[:, None], np.ones(k), np.ones(k, dtype=bool), weights)


partitions = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n))
)


class TestAri:
    def test_identical(self):
        assert ari([3, 3, 1, 2], [0, 0, 5, 6]) == 1.0

    def test_four_items(self):
        got = ari([1, 1, 2, 2], [1, 2, 1, 2])
        assert got == float(brute_ari([1, 1, 2, 2], [1, 2, 1, 2]))
        assert got == -0.5

    def test_random_partitions_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 13))
            a = rng.integers(0, rng.integers(1, 6), n).tolist()
            b = rng.integers(0, rng.integers(1, 6), n).tolist()
            assert ari(a, b) == float(brute_ari(a, b))

    @given(partitions)
    def test_matches_oracle(self, ab):
        a, b = ab
        assert ari(a, b) == float(brute_ari(a, b))

    @given(partitions, st.permutations(range(5)))
    def test_label_and_argument_invariance(self, ab, perm):
        a, b = ab
        relabeled = [perm[v] for v in a]
        assert ari(a, b) == ari(relabeled, b) == ari(b, a)
        assert -1.0 <= ari(a, b) <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ari([1, 2], [1])

    def test_rand_agreement(self):
        assert rand_agreement([0, 0, 1], [0, 0, 1]) == 1.0
        assert rand_agreement([0, 0, 1], [0, 1, 1]) == pytest.approx(1 / 3)


class TestPurity:
    def test_perfect(self):
        assert purity([2, 2, 0, 1], [5, 5, 6, 7]) == 1.0

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_one_cluster(self, k):
        assert purity(np.zeros(10 * k, dtype=int), np.repeat(np.arange(k), 10)) == 1.0 / k

    def test_random_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 13))
            a = rng.integers(0, 4, n).tolist()
            b = rng.integers(0, 4, n).tolist()
            assert purity(a, b) == float(brute_purity(a, b))


class TestRelabel:
    def test_identical_draws_fixed_point(self):
        d = Draws([state([0, 0, 1, 2]) for _ in range(5)], {})
        out = relabel_draws(d)
        for s, t in zip(d.states, out.states):
            np.testing.assert_array_equal(s.z, t.z)
            np.testing.assert_array_equal(s.beta, t.beta)

    def test_label_swap(self):
        a = state([0, 0, 1, 1])
        b = state([1, 1, 0, 0])
        out = relabel_draws(Draws([a, b], {}))
        np.testing.assert_array_equal(out.states[0].z, out.states[1].z)
        # parameters travel with their labels
        s0, s1 = out.states
        np.testing.assert_array_equal(s0.beta[s0.z[0]], a.beta[a.z[0]])
        np.testing.assert_array_equal(s1.beta[s1.z[0]], b.beta[b.z[0]])

    def test_agreement_improves(self):
        rng = np.random.default_rng(2)
        truth = np.repeat([0, 1, 2], 10)
        states = []
        for _ in range(30):
            z = truth.copy()
            flip = rng.random(30) < 0.1
            z[flip] = rng.integers(0, 3, flip.sum())
            states.append(state(rng.permutation(3)[z], 3))
        d = Draws(states, {})

        def agreement(dr):
            zs = [s.z for s in dr.states]
            return np.mean([np.mean(a == b) for a, b in combinations(zs, 2)])

        out = relabel_draws(d)
        assert agreement(out) > agreement(d)
        assert "relabel_reference" in out.meta

    def test_unmatched_labels_fresh(self):
        a = state([0, 0, 0, 0])
        b = state([0, 0, 1, 1])
        out = relabel_draws(Draws([a, b, a], {}))
        zs = {tuple(s.z) for s in out.states}
        assert (0, 0, 0, 0) in zs
        assert any(len(set(z)) == 2 for z in zs)


class TestPointAssignments:
    def test_single_draw(self):
        np.testing.assert_array_equal(point_assignments(Draws([state([2, 0, 1])], {})), [2, 0, 1])

    def test_majority_and_ties(self):
        d = Draws([state([1, 1]), state([1, 2]), state([2, 1])], {})
        np.testing.assert_array_equal(point_assignments(d), [1, 1])
        tie = Draws([state([1]), state([2])], {})
        np.testing.assert_array_equal(point_assignments(tie), [1])

    def test_empty(self):
        with pytest.raises(ConfigError):
            point_assignments(Draws([], {}))


class TestRmse:
    def test_exact_fit(self, rng):
        X = np.column_stack([np.ones(20), rng.normal(size=20)])
        ds = build_dataset(X, X @ [1.0, -2.0])
        assert rmse_posthoc(ds, np.zeros(20, dtype=int)) == pytest.approx(0.0, abs=1e-12)

    def test_truth_labels_toy(self):
        ds, z = gen_scenario(toy_spec(0))
        assert 0.9 <= rmse_posthoc(ds, z) <= 1.2

    def test_singleton_ridge(self, two_lines):
        ds, z = two_lines
        z = z.copy()
        z[0] = 5
        assert np.isfinite(rmse_posthoc(ds, z))

    @given(st.permutations(range(3)))
    def test_label_invariance(self, perm):
        r = np.random.default_rng(4)
        X = np.column_stack([np.ones(30), r.normal(size=30)])
        ds = build_dataset(X, r.normal(size=30))
        z = np.repeat([0, 1, 2], 10)
        assert rmse_posthoc(ds, np.array(perm)[z]) == pytest.approx(rmse_posthoc(ds, z), rel=1e-12)

    def test_from_draws_uses_posterior_means(self):
        X = np.ones((4, 1))
        ds = build_dataset(X, [0.0, 0.0, 2.0, 2.0])
        d = Draws([state([0, 0, 1, 1], 2)], {})
        # state betas are 0 and 1, so residuals are 0, 0, 1, 1
        assert rmse_from_draws(ds, d, np.array([0, 0, 1, 1])) == pytest.approx(np.sqrt(0.5))


class TestKHat:
    def test_constant(self):
        d = Draws([state([0, 1, 2, 3])] * 5, {"model": "rgrm"})
        assert k_hat(d) == {"mean": 4.0, "mode": 4}

    def test_sid_threshold(self):
        s = state([0, 1, 0, 1], 4, weights=np.array([0.5, 0.4999, 1e-4, 1e-4]))
        assert cluster_counts(Draws([s], {"model": "sid1"}))[0] == 2

    def test_mode_tie_goes_low(self):
        d = Draws([state([0, 1]), state([0, 0])], {})
        assert k_hat(d)["mode"] == 1


class TestEvaluate:
    def test_report(self, two_lines):
        ds, z = two_lines
        d = Draws([state(z, 2)] * 3, {"model": "mfm"})
        rep = evaluate(ds, d, z)
        assert rep.ari == 1.0 and rep.purity == 1.0 and rep.k_mode == 2
        row = rep.to_row("s1", "mfm", 3)
        assert tuple(row) == CSV_FIELDS

    def test_without_truth(self, two_lines):
        ds, z = two_lines
        rep = evaluate(ds, Draws([state(z, 2)], {}))
        assert rep.ari is None and rep.purity is None

    def test_bad_variant(self, two_lines):
        ds, z = two_lines
        with pytest.raises(ConfigError):
            evaluate(ds, Draws([state(z, 2)], {}), z, rmse="mae")
