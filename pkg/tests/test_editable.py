import math
import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treedist.editable import (
    PiecewiseMap,
    pw_add,
    pw_check_axioms,
    pw_l1_distance,
    pw_norm,
    pw_restrict,
    pw_scale,
    pw_sum,
    pw_truncate,
)
from strategies import nonzero_maps, piecewise_maps

chi = PiecewiseMap.constant


def lin(lo, hi, icpt, slope):
    return PiecewiseMap.affine(lo, hi, icpt, slope)


def trapezoid_l1(a: PiecewiseMap, b: PiecewiseMap, n: int = 100_000) -> float:
    """Quadrature oracle on a uniform grid over the joint support."""
    sa, sb = a.support, b.support
    spans = [s for s in (sa, sb) if s is not None]
    lo = min(s[0] for s in spans)
    hi = max(s[1] for s in spans)
    xs = np.linspace(lo, hi, n)
    diff = np.abs(a(xs) - b(xs)).sum(axis=-1) if a.channels > 1 else np.abs(a(xs) - b(xs)).ravel()
    return float(np.trapezoid(diff, xs))


class TestConstruction:
    def test_canonical_merge_and_drop(self):
        m = PiecewiseMap.step([0, 1, 2, 3], [1.0, 1.0, 0.0])
        assert m.n_pieces == 1
        assert m.support == (0.0, 2.0)

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError, match="negative"):
            lin(0, 1, 0.5, -1.0)

    def test_rejects_overlap(self):
        with pytest.raises(ValueError, match="disjoint"):
            PiecewiseMap.from_pieces(1, [(0, 2, 1.0, 0.0), (1, 3, 1.0, 0.0)])

    def test_unbounded_piece_must_be_constant_and_last(self):
        assert chi(2, math.inf, 1.0).norm == math.inf
        with pytest.raises(ValueError):
            lin(0, math.inf, 0.0, 1.0)
        with pytest.raises(ValueError):
            PiecewiseMap.from_pieces(1, [(0, math.inf, 1.0, 0.0), (5, 6, 1.0, 0.0)])

    def test_pickle_and_hash(self):
        m = pw_add(chi(0, 2, 1.0), lin(1, 3, 0.0, 0.5))
        back = pickle.loads(pickle.dumps(m))
        assert back == m and hash(back) == hash(m)

    def test_multichannel(self):
        m = chi(0, 1, [1.0, 2.0])
        assert m.channels == 2
        assert m.norm == pytest.approx(3.0)
        with pytest.raises(ValueError, match="channel"):
            pw_add(m, chi(0, 1, 1.0))


class TestAdd:
    def test_neutral(self):
        assert pw_add(chi(0, 1, 1.0), PiecewiseMap.zero()) == chi(0, 1, 1.0)

    def test_pointwise_sum(self):
        assert pw_add(chi(0, 1, 1.0), chi(0, 2, 1.0)) == PiecewiseMap.step([0, 1, 2], [2.0, 1.0])

    def test_affine_pieces_cancel_slope(self):
        s = pw_add(lin(0, 1, 0.0, 1.0), lin(0, 1, 1.0, -1.0))
        assert s == chi(0, 1, 1.0)

    @given(piecewise_maps(), piecewise_maps())
    def test_breakpoints_within_union(self, a, b):
        s = pw_add(a, b)
        union = set(a.breakpoints) | set(b.breakpoints)
        assert set(s.breakpoints) <= union

    def test_sum_matches_fold(self):
        maps = [chi(0, 1, 1.0), lin(0.5, 2, 0.0, 1.0), chi(1, 3, 2.0)]
        assert pw_l1_distance(pw_sum(maps), pw_add(pw_add(maps[0], maps[1]), maps[2])) < 1e-12


class TestDistanceAndNorm:
    def test_two_basin_leaf_shrinks(self):
        # first leaf: t on [0,1) then 1 up to 1.3, against t - 0.3 on [0.3, 1.3)
        a = PiecewiseMap.from_pieces(1, [(0, 1, 0.0, 1.0), (1, 1.3, 1.0, 0.0)])
        b = lin(0.3, 1.3, -0.3, 1.0)
        assert pw_l1_distance(a, b) == pytest.approx(0.3, abs=1e-12)
        # second leaf: 2(t - 0.3) on [0.3, 1.3) against 2t on [0,1) then 2
        c = lin(0.3, 1.3, -0.6, 2.0)
        d = PiecewiseMap.from_pieces(1, [(0, 1, 0.0, 2.0), (1, 1.3, 2.0, 0.0)])
        assert pw_l1_distance(c, d) == pytest.approx(0.6, abs=1e-12)

    def test_norm_examples(self):
        assert pw_norm(PiecewiseMap.zero()) == 0.0
        assert pw_norm(chi(2, 5, 3.0)) == 9.0
        assert pw_norm(lin(0, 1, 0.0, 2.0)) == pytest.approx(1.0)

    def test_sign_crossing_inside_piece(self):
        # |t - 0.5| on [0, 1) integrates to 0.25
        assert pw_l1_distance(lin(0, 1, 0.0, 1.0), chi(0, 1, 0.5)) == pytest.approx(0.25)

    @given(piecewise_maps())
    def test_identity(self, a):
        assert pw_l1_distance(a, a) == 0.0

    @given(piecewise_maps(), piecewise_maps())
    def test_norm_is_distance_to_zero(self, a, b):
        assert pw_norm(a) == pytest.approx(pw_l1_distance(a, PiecewiseMap.zero()), abs=1e-12)
        assert pw_l1_distance(a, b) == pytest.approx(pw_l1_distance(b, a), abs=1e-12)

    @given(piecewise_maps(channels=2), piecewise_maps(channels=2))
    def test_quadrature_oracle_multichannel(self, a, b):
        if a.is_zero and b.is_zero:
            return
        exact = pw_l1_distance(a, b)
        assert exact == pytest.approx(trapezoid_l1(a, b), rel=1e-4, abs=1e-6)

    def test_many_pieces_take_the_vectorised_path(self):
        xs = np.linspace(0, 10, 60)
        a = PiecewiseMap.step(xs, np.abs(np.sin(xs[:-1])) + 0.1)
        b = PiecewiseMap.step(xs, np.abs(np.cos(xs[:-1])) + 0.1)
        assert a.n_pieces + b.n_pieces > 24
        assert pw_l1_distance(a, b) == pytest.approx(trapezoid_l1(a, b), rel=1e-4)
        assert pw_norm(pw_add(a, b)) == pytest.approx(a.norm + b.norm, rel=1e-12)


class TestTruncate:
    def test_examples(self):
        assert pw_truncate(chi(0, 2, 1.0), 1) == chi(0, 1, 1.0)
        assert pw_truncate(chi(0, 1, 1.0), 5) == chi(0, 1, 1.0)
        assert pw_truncate(chi(0, math.inf, 1.0), 1) == chi(0, 1, 1.0)

    @given(piecewise_maps(), st.integers(-20, 20).map(lambda i: i / 4))
    def test_idempotent_and_shrinking(self, a, K):
        t = pw_truncate(a, K)
        assert pw_truncate(t, K) == t
        assert t.norm <= a.norm + 1e-12

    def test_restrict_and_scale(self):
        m = lin(0, 2, 0.0, 1.0)
        assert pw_restrict(m, 1, 5) == lin(1, 2, 0.0, 1.0)
        assert pw_scale(m, 2.0).norm == pytest.approx(4.0)


class TestAxioms:
    def test_zero_only(self):
        r = pw_check_axioms([PiecewiseMap.zero()])
        assert r.ok and r.max_violation == 0.0

    @given(st.lists(nonzero_maps, min_size=2, max_size=6))
    def test_random_maps(self, maps):
        r = pw_check_axioms(maps)
        assert r.ok, r

    @given(nonzero_maps, nonzero_maps)
    def test_norm_additive(self, a, b):
        assert abs(pw_add(a, b).norm - a.norm - b.norm) <= 1e-9

    @given(nonzero_maps, nonzero_maps, nonzero_maps)
    def test_translation_invariant_and_triangle(self, a, b, c):
        assert abs(pw_l1_distance(pw_add(c, a), pw_add(c, b)) - pw_l1_distance(a, b)) <= 1e-9
        assert pw_l1_distance(a, c) <= pw_l1_distance(a, b) + pw_l1_distance(b, c) + 1e-9
