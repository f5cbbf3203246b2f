import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvsat.trig import (COS, SIN, Basis, CubedDerivative, Gen, LinComb, TrigPoly, VectorField, bracket_from_json,
                         bracket_to_json, cert_depth, cert_from_json, cert_to_json, derivative, echelon_basis,
                         evaluate, evaluate_bracket, fn_step, h0_basis, lie_bracket, mode_certificate, multiply,
                         polarized_product, saturation_closure, span_contains, vectorfield_certificate)

H = Fraction(1, 2)
S1, C1 = TrigPoly.mode(1, SIN), TrigPoly.mode(1, COS)

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def polys(draw, max_deg=4):
    deg = draw(st.integers(0, max_deg))
    return TrigPoly(draw(fractions), draw(st.lists(fractions, min_size=deg, max_size=deg)),
                    draw(st.lists(fractions, min_size=deg, max_size=deg)))


X = np.linspace(0, 2 * np.pi, 37)


class TestTrigPoly:
    def test_trimming_and_equality(self):
        p = TrigPoly(1, [0, 2, 0, 0], [0, 0, 0])
        assert p.N == 2 and p == TrigPoly(1, [0, 2])
        assert TrigPoly(0, [0], [0]).N == 0

    def test_mode_rejects_sin0(self):
        with pytest.raises(ValueError):
            TrigPoly.mode(0, SIN)

    def test_derivative_examples(self):
        assert derivative(S1) == C1
        assert derivative(TrigPoly(1)).is_zero()
        g = C1 + TrigPoly.mode(3, COS)
        assert derivative(g) == -S1 - TrigPoly.mode(3, SIN, 3)

    def test_multiply_examples(self):
        assert C1 * C1 == TrigPoly(H, [0, H])
        assert (C1 * 2) * TrigPoly.mode(2, COS) == C1 + TrigPoly.mode(3, COS)
        assert (C1 * TrigPoly(0)).is_zero()

    @given(polys(), polys())
    def test_multiply_matches_pointwise(self, p, q):
        np.testing.assert_allclose((p * q)(X), p(X) * q(X), atol=1e-9)
        assert (p * q).N <= p.N + q.N

    @given(polys())
    def test_derivative_matches_finite_difference(self, p):
        h = 1e-6
        np.testing.assert_allclose(p.derivative()(X), (p(X + h) - p(X - h)) / (2 * h), atol=1e-5)

    @given(polys())
    def test_json_round_trip(self, p):
        assert TrigPoly.from_json(json.loads(json.dumps(p.to_json()))) == p

    def test_float_json_round_trip(self):
        p = TrigPoly(0.1, [1 / 3], [math.pi])
        assert TrigPoly.from_json(json.loads(json.dumps(p.to_json()))) == p

    def test_complex_coefficients(self):
        p = TrigPoly(1, [2], [3])
        c = p.complex_coefficients(2)
        x = np.linspace(0, 6, 11)
        vals = sum(c[k + 2] * np.exp(1j * k * x) for k in range(-2, 3))
        np.testing.assert_allclose(vals.real, p(x), atol=1e-12)

    def test_power(self):
        assert C1 ** 3 == TrigPoly(0, [Fraction(3, 4), 0, Fraction(1, 4)])
        assert C1 ** 0 == TrigPoly(1)


class TestPolarization:
    def test_cos_cubed(self):
        prod, expansion = polarized_product([S1, S1, S1], 3)
        assert prod == TrigPoly(0, [Fraction(3, 4), 0, Fraction(1, 4)])
        total = TrigPoly(0)
        for sign, _, power in expansion:
            total = total + power * sign
        assert total == prod * 6
        assert len(expansion) == 8

    def test_pointwise_identity_at_ones(self):
        # (1/3!)(27 - 3*8 + 3*1 - 0) = 1
        assert Fraction(27 - 24 + 3, 6) == 1

    def test_constants_give_zero(self):
        prod, _ = polarized_product([TrigPoly(1), TrigPoly(2), TrigPoly(3)], 3)
        assert prod.is_zero()

    @pytest.mark.parametrize("n", [2, 4, 1])
    def test_rejects_even_or_small(self, n):
        with pytest.raises(ValueError):
            polarized_product([S1] * n, n)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            polarized_product([S1, S1], 3)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(polys(3), min_size=3, max_size=3))
    def test_identity_n3(self, fs):
        polarized_product(fs, 3)  # raises on mismatch

    @settings(max_examples=5, deadline=None)
    @given(st.lists(polys(2), min_size=5, max_size=5))
    def test_identity_n5(self, fs):
        polarized_product(fs, 5)


class TestClosure:
    def test_fn_step_sin(self):
        basis = fn_step([S1], 3)
        assert span_contains(basis, S1)
        assert span_contains(basis, TrigPoly(0, [Fraction(3, 4), 0, Fraction(1, 4)]))

    def test_fn_step_constant(self):
        assert fn_step([TrigPoly(1)], 3) == [TrigPoly(1)]

    def test_fn_step_h0_reaches_mode3(self):
        basis = fn_step(h0_basis(3), 3)
        assert span_contains(basis, TrigPoly.mode(3, COS))
        assert span_contains(basis, TrigPoly.mode(3, SIN))

    def test_closure_fills_window_strictly(self):
        chain = saturation_closure(h0_basis(3), 3, window=16)
        dims = [len(h) for h in chain]
        assert all(b > a for a, b in zip(dims, dims[1:]))
        assert dims[-1] == 33
        for N in range(17):
            assert span_contains(chain[-1], TrigPoly.mode(N, COS))

    def test_echelon_canonical(self):
        b = echelon_basis([C1 + S1, C1 - S1, TrigPoly(2) + C1])
        assert b == [TrigPoly(1), C1, S1]


class TestModeCertificates:
    def test_low_modes_are_leaves(self):
        cert = mode_certificate(1, COS)
        assert isinstance(cert, Basis) and evaluate(cert, h0_basis(3)) == C1

    def test_cos3(self):
        cert = mode_certificate(3, COS)
        assert evaluate(cert, h0_basis(3)) == TrigPoly.mode(3, COS)
        # cos(3x) = 4 cos^3 x - 3 cos x: the top coefficient of cos x cos^2 x is 1/4
        assert any(c == 4 for c, _ in cert.terms)

    def test_sin5_depth(self):
        cert = mode_certificate(5, SIN)
        assert evaluate(cert, h0_basis(3)) == TrigPoly.mode(5, SIN)
        assert cert_depth(cert) >= 2

    @pytest.mark.parametrize("N", range(0, 17))
    @pytest.mark.parametrize("parity", [COS, SIN])
    def test_all_modes(self, N, parity):
        if N == 0 and parity == SIN:
            pytest.skip("sin(0x) = 0")
        assert evaluate(mode_certificate(N, parity), h0_basis(3)) == TrigPoly.mode(N, parity)

    def test_general_odd_power(self):
        gens = h0_basis(5)
        for N in range(9):
            assert evaluate(mode_certificate(N, COS, 5), gens) == TrigPoly.mode(N, COS)

    def test_json_round_trip_with_sharing(self):
        cert = mode_certificate(7, SIN)
        back = cert_from_json(json.loads(json.dumps(cert_to_json(cert))))
        assert evaluate(back, h0_basis(3)) == TrigPoly.mode(7, SIN)

    def test_cubed_node(self):
        c = CubedDerivative(LinComb(((Fraction(2), Basis(2)),)))
        assert evaluate(c, h0_basis(3)) == (S1 * 2).derivative() ** 3


class TestBrackets:
    def test_examples(self):
        s2, c2 = C1.derivative() ** 2, S1.derivative() ** 2
        assert lie_bracket(VectorField(s2), VectorField(c2)).coeff == -TrigPoly.mode(2, SIN)
        X = VectorField(TrigPoly(1, [2], [3]))
        assert lie_bracket(X, X).coeff.is_zero()
        got = lie_bracket(VectorField(TrigPoly.mode(2, SIN)), VectorField(S1)).coeff
        assert got == TrigPoly(0, [], [Fraction(3, 2), 0, Fraction(-1, 2)])

    @settings(max_examples=40, deadline=None)
    @given(polys(), polys(), polys())
    def test_antisymmetry_and_jacobi(self, f, g, h):
        X, Y, Z = VectorField(f), VectorField(g), VectorField(h)
        assert lie_bracket(X, Y).coeff == -lie_bracket(Y, X).coeff
        jac = (lie_bracket(X, lie_bracket(Y, Z)).coeff + lie_bracket(Y, lie_bracket(Z, X)).coeff
               + lie_bracket(Z, lie_bracket(X, Y)).coeff)
        assert jac.is_zero()

    def test_field_certificate_constant(self):
        expr = vectorfield_certificate(TrigPoly(1))
        assert evaluate_bracket(expr).coeff == TrigPoly(1)
        assert {str(g.phi) for _, g in expr.terms} == {str(C1), str(S1)}

    def test_field_certificate_cos2(self):
        expr = vectorfield_certificate(TrigPoly.mode(2, COS))
        assert evaluate_bracket(expr).coeff == TrigPoly.mode(2, COS)
        assert sorted(c for c, _ in expr.terms) == [-1, 1]

    @pytest.mark.parametrize("N", range(0, 13))
    def test_field_modes(self, N):
        for parity in ([COS, SIN] if N else [COS]):
            p = TrigPoly.mode(N, parity)
            assert evaluate_bracket(vectorfield_certificate(p)).coeff == p

    @given(polys(5))
    @settings(max_examples=20, deadline=None)
    def test_field_certificate_arbitrary(self, p):
        assert evaluate_bracket(vectorfield_certificate(p)).coeff == p

    @given(st.floats(-50, 50), polys(3))
    def test_generator_scaling(self, lam, phi):
        g = Gen(phi).scaled(lam)
        assert g.verify()
        np.testing.assert_allclose(g.field(X), abs(lam) * phi.derivative()(X) ** 2, rtol=1e-9, atol=1e-9)

    def test_bracket_json_round_trip(self):
        expr = vectorfield_certificate(TrigPoly.mode(4, SIN))
        back = bracket_from_json(json.loads(json.dumps(bracket_to_json(expr))))
        assert evaluate_bracket(back).coeff == TrigPoly.mode(4, SIN)

    def test_gen_rejects_tampered_field(self):
        g = Gen(S1)
        g.field = TrigPoly(5)
        with pytest.raises(ArithmeticError):
            evaluate_bracket(g)
