from fractions import Fraction

import numpy as np
import pytest

from sclab.assembly import evaluate_hierarchical
from sclab.fixtures import random_support_union
from sclab.hierarchy import (basis_subset, build_levels, cohomology_from_ranks, element_areas,
                             hierarchical_bezier_mesh, hierarchical_dims, hierarchical_incidence,
                             select_active)
from sclab.meshspec import build_stack
from sclab.rank import PRIMES
from sclab.tensor import apply_boundary_conditions, build_complex
from sclab.univariate import uniform_knot_vector


def base(p, n):
    return apply_boundary_conditions(build_complex([uniform_knot_vector(p, n)] * 2))


def corner(n, m):
    w = np.zeros((n, n), dtype=bool)
    w[:m, :m] = True
    return w


class TestLevelStack:
    def test_single_level_is_tensor(self):
        b = base(2, 4)
        st = build_levels(b, [])
        assert st.N == 0
        assert hierarchical_dims(st) == b.dims()

    def test_dyadic_bookkeeping(self):
        st = build_levels(base(2, 4), [corner(4, 2)])
        assert st.num_elements(1) == (8, 8)
        assert st.omega(1, 1).sum() == 16

    def test_not_nested(self):
        w2 = np.zeros((8, 8), dtype=bool)
        w2[6:, 6:] = True
        with pytest.raises(ValueError):
            build_levels(base(2, 4), [corner(4, 2), w2])

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            build_levels(base(2, 4), [corner(5, 2)])


class TestActiveSelection:
    def test_empty_refinement(self):
        b = base(3, 5)
        st = build_levels(b, [np.zeros((5, 5), dtype=bool)])
        for k in range(3):
            hs = select_active(st, k)
            assert hs.counts == [b.spaces[k].dim, 0]

    def test_full_refinement(self):
        b = base(3, 5)
        st = build_levels(b, [np.ones((5, 5), dtype=bool)])
        for k in range(3):
            hs = select_active(st, k)
            assert hs.counts == [0, st.complexes[1].spaces[k].dim]

    def test_two_level_quadratic_counts_by_enumeration(self):
        st = build_levels(base(2, 6), [corner(6, 3)])
        hs = select_active(st, 0)
        # level 0: retained functions whose support leaves the refined corner
        r = st.complexes[0].spaces[0].components[0].support_ranges()
        n0 = 0
        for i in range(1, r[0].shape[0] - 1):
            for j in range(1, r[1].shape[0] - 1):
                n0 += not (r[0][i, 1] <= 3 and r[1][j, 1] <= 3)
        r1 = st.complexes[1].spaces[0].components[0].support_ranges()
        n1 = sum(r1[0][i, 1] <= 6 and r1[1][j, 1] <= 6
                 for i in range(1, r1[0].shape[0] - 1) for j in range(1, r1[1].shape[0] - 1))
        assert hs.counts == [n0, n1]

    @pytest.mark.parametrize("seed", range(5))
    def test_level_dimension_identity(self, seed):
        rng = np.random.default_rng(seed)
        st = build_stack(random_support_union(rng, 2 + seed % 2, 8, 3))
        for k in range(3):
            for l in range(st.N):
                trunc = build_levels(st.base, st.omegas[:l])
                nxt = build_levels(st.base, st.omegas[:l + 1])
                lhs = select_active(nxt, k).dim
                rhs = (select_active(trunc, k).dim + basis_subset(nxt, k, l + 1, l + 1).size
                       - basis_subset(nxt, k, l, l + 1).size)
                assert lhs == rhs

    def test_level_coefficients_shape(self):
        st = build_levels(base(2, 4), [corner(4, 2)])
        hs = select_active(st, 1)
        C = hs.level_coefficients(1)
        assert C.shape == (st.complexes[1].spaces[1].full_dim, hs.dim)


class TestBezierMesh:
    def test_single_level(self):
        st = build_levels(base(2, 4), [])
        assert [m.sum() for m in hierarchical_bezier_mesh(st)] == [16]

    def test_corner(self):
        st = build_levels(base(2, 4), [corner(4, 2)])
        assert [int(m.sum()) for m in hierarchical_bezier_mesh(st)] == [12, 16]

    def test_area_sum(self):
        st = build_levels(base(2, 4), [corner(4, 2), corner(8, 2)])
        total = sum(element_areas(st, l)[m].sum() for l, m in enumerate(hierarchical_bezier_mesh(st)))
        assert total == pytest.approx(1.0, abs=1e-14)


class TestDimensions:
    def test_counterexample(self, stacks):
        dims = hierarchical_dims(stacks("counterexample"))
        assert dims == [147, 328, 181]
        assert dims[0] + dims[2] != dims[1] + 1

    def test_empty_refinement(self):
        b = base(3, 6)
        st = build_levels(b, [np.zeros((6, 6), dtype=bool)])
        assert hierarchical_dims(st) == b.dims()

    def test_cohomology_from_ranks(self):
        assert cohomology_from_ranks([4, 12, 9], [4, 8]) == [0, 0, 1]


class TestHierarchicalIncidence:
    @pytest.mark.parametrize("name", ["counterexample", "maxwell_diag_2x2", "stokes_1x1_4levels"])
    def test_dd_zero_modular(self, stacks, name):
        st = stacks(name)
        sp_ = [select_active(st, k) for k in range(3)]
        P = PRIMES[0]
        D0 = hierarchical_incidence(sp_[0], sp_[1], prime=P)
        D1 = hierarchical_incidence(sp_[1], sp_[2], prime=P)
        DD = (D1 @ D0).tocsr()
        DD.data %= P
        assert not DD.data.any()

    @pytest.mark.parametrize("k", [0, 1])
    def test_float_matches_modular(self, stacks, k):
        st = stacks("counterexample")
        a, b = select_active(st, k), select_active(st, k + 1)
        P = PRIMES[0]
        Df = hierarchical_incidence(a, b).tocoo()
        Dm = hierarchical_incidence(a, b, prime=P).toarray()
        assert Dm.dtype == np.int64
        ref = np.zeros_like(Dm)
        for i, j, x in zip(Df.row, Df.col, Df.data):
            f = Fraction(float(x)).limit_denominator(1 << 16)
            ref[i, j] = (ref[i, j] + f.numerator * pow(f.denominator, -1, P)) % P
        np.testing.assert_array_equal(ref, Dm)

    @pytest.mark.parametrize("seed", range(3))
    def test_agrees_with_pointwise_derivatives(self, seed):
        rng = np.random.default_rng(seed)
        st = build_stack(random_support_union(rng, 2, 6, 3))
        N = st.N
        hs = [select_active(st, k) for k in range(3)]
        pts = [rng.random(7), rng.random(6)]
        c0 = rng.standard_normal(hs[0].dim)
        c1 = hierarchical_incidence(hs[0], hs[1]) @ c0
        for d, nu in ((0, (1, 0)), (1, (0, 1))):
            grad = evaluate_hierarchical(hs[0], N, pts, nu=nu) @ c0
            np.testing.assert_allclose(evaluate_hierarchical(hs[1], N, pts, axis=d) @ c1, grad, atol=1e-10)
        u = rng.standard_normal(hs[1].dim)
        curl = (evaluate_hierarchical(hs[1], N, pts, nu=(1, 0), axis=1) @ u
                - evaluate_hierarchical(hs[1], N, pts, nu=(0, 1), axis=0) @ u)
        w = hierarchical_incidence(hs[1], hs[2]) @ u
        np.testing.assert_allclose(evaluate_hierarchical(hs[2], N, pts) @ w, curl, atol=1e-9)
