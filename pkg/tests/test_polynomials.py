"""Sparse polynomial maps: evaluation, Jacobians, composition."""

import numpy as np
import pytest

from kooplift import Monomial, PolynomialMap, eval_poly, poly_jacobian
from kooplift.errors import DimensionError
from kooplift.polynomials import (
    compose_monomial,
    fresh_power_caches,
    poly_mul,
    poly_pow,
)


def _random_poly_map(rng, n_vars, n_out, degree, n_terms):
    rows = []
    for _ in range(n_out):
        terms = {}
        for _ in range(n_terms):
            exps = tuple(int(e) for e in rng.integers(0, degree + 1, n_vars))
            if sum(exps) > degree:
                continue
            terms[exps] = float(rng.normal())
        rows.append(terms)
    return PolynomialMap(n_vars, rows)


def _naive_eval(p, x):
    # independent term-by-term oracle on plain python floats
    out = []
    for row in p.rows:
        acc = 0.0
        for exps, coeff in row.items():
            v = coeff
            for xi, e in zip(x, exps):
                v *= float(xi) ** e
            acc += v
        out.append(acc)
    return np.array(out)


class TestEvaluation:
    def test_benchmark_autonomous_map_at_ones(self):
        # x+ = [a1 x1, a2 x2 - a3 x1^2] with a1 = a2 = 0.7, a3 = 0.5;
        # at x = (1, 1) the rows are 0.7 and 0.7 - 0.5 (= 0.2 up to rounding)
        f = PolynomialMap(2, [{(1, 0): 0.7}, {(0, 1): 0.7, (2, 0): -0.5}])
        values = f.evaluate([1.0, 1.0])
        np.testing.assert_array_equal(values, [0.7, 0.7 - 0.5])
        np.testing.assert_allclose(values, [0.7, 0.2], rtol=0, atol=1e-15)

    def test_zero_polynomial(self):
        p = PolynomialMap(3, [{}, {}])
        np.testing.assert_array_equal(p.evaluate([1.0, -2.0, 3.0]), [0.0, 0.0])

    def test_random_map_matches_term_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = _random_poly_map(rng, 3, 2, 3, 6)
            x = rng.normal(size=3)
            got = p.evaluate(x)
            want = _naive_eval(p, x)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-14 * (1 + np.abs(want).max()))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(8)
        p = _random_poly_map(rng, 2, 3, 4, 8)
        X = rng.normal(size=(11, 2))
        batch = p.evaluate_batch(X)
        single = np.stack([p.evaluate(x) for x in X])
        np.testing.assert_allclose(batch, single, rtol=1e-13, atol=1e-13)

    def test_dimension_mismatch(self):
        p = PolynomialMap(2, [{(1, 0): 1.0}])
        with pytest.raises(DimensionError):
            p.evaluate([1.0, 2.0, 3.0])

    def test_eval_poly_alias(self):
        p = PolynomialMap(1, [{(2,): 3.0}])
        np.testing.assert_array_equal(eval_poly(p, [2.0]), [12.0])


class TestJacobian:
    def test_dictionary_style_map(self):
        # Phi = [x1, x2, x1^2] -> dPhi/dx = [[1,0],[0,1],[2 x1,0]]
        phi = PolynomialMap(2, [{(1, 0): 1.0}, {(0, 1): 1.0}, {(2, 0): 1.0}])
        jac = phi.jacobian_matrix([3.0, 5.0])
        np.testing.assert_array_equal(jac, [[1, 0], [0, 1], [6, 0]])

    def test_constant_polynomial_has_zero_jacobian(self):
        p = PolynomialMap(2, [{(0, 0): 4.2}])
        assert poly_jacobian(p).rows == ({}, {})

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p = _random_poly_map(rng, 3, 2, 4, 7)
        jac = p.jacobian()
        h = 1e-6
        for _ in range(10):
            x = rng.normal(size=3)
            J = jac.evaluate(x).reshape(2, 3)
            for i in range(3):
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                fd = (p.evaluate(xp) - p.evaluate(xm)) / (2 * h)
                scale = 1.0 + np.abs(J[:, i])
                assert np.all(np.abs(J[:, i] - fd) <= 1e-6 * scale)

    def test_flattening_order(self):
        p = PolynomialMap(2, [{(1, 1): 2.0}])
        jac = p.jacobian()
        # row j*n_vars + i is d(row j)/d(x_i)
        assert jac.rows[0] == {(0, 1): 2.0}
        assert jac.rows[1] == {(1, 0): 2.0}


class TestAlgebra:
    def test_mul_bilinear_random(self):
        rng = np.random.default_rng(5)
        a = _random_poly_map(rng, 2, 1, 3, 5).rows[0]
        b = _random_poly_map(rng, 2, 1, 3, 5).rows[0]
        prod = poly_mul(a, b)
        for _ in range(5):
            x = rng.normal(size=2)
            va = _naive_eval(PolynomialMap(2, [a]), x)[0]
            vb = _naive_eval(PolynomialMap(2, [b]), x)[0]
            vp = _naive_eval(PolynomialMap(2, [prod]), x)[0]
            assert abs(vp - va * vb) <= 1e-12 * (1 + abs(va * vb))

    def test_pow_via_cache(self):
        base = {(1,): 2.0, (0,): 1.0}  # 2x + 1
        cache = [{(0,): 1.0}]
        cubed = poly_pow(base, 3, cache)
        assert cubed == {(3,): 8.0, (2,): 12.0, (1,): 6.0, (0,): 1.0}
        assert len(cache) == 4

    def test_compose_monomial(self):
        # substitute f = [x1 + x2, x1 * x2] into the monomial x1^2 x2
        components = [{(1, 0): 1.0, (0, 1): 1.0}, {(1, 1): 1.0}]
        caches = fresh_power_caches(components, 2)
        composed = compose_monomial((2, 1), components, 2, caches)
        # (x1 + x2)^2 * x1 x2 = x1^3 x2 + 2 x1^2 x2^2 + x1 x2^3
        assert composed == {(3, 1): 1.0, (2, 2): 2.0, (1, 3): 1.0}

    def test_duplicate_terms_merge(self):
        p = PolynomialMap(1, [[((1,), 2.0), ((1,), 3.0)]])
        assert p.rows[0] == {(1,): 5.0}

    def test_zero_coefficients_dropped(self):
        p = PolynomialMap(1, [{(1,): 0.0, (2,): 1.0}])
        assert p.rows[0] == {(2,): 1.0}


class TestMonomial:
    def test_negative_exponent_rejected(self):
        with pytest.raises(ValueError):
            Monomial((1, -1))

    def test_degree_and_eval(self):
        m = Monomial((2, 1))
        assert m.degree == 3
        assert m.evaluate([2.0, 3.0]) == 12.0

    def test_terms_roundtrip(self):
        p = PolynomialMap(2, [{(1, 0): 0.7}, {(0, 1): 0.7, (2, 0): -0.5}])
        clone = PolynomialMap.from_terms(2, p.to_terms())
        assert clone.same_terms(p)
