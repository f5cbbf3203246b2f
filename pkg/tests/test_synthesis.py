import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvsat.errors import BudgetExceeded, DepthBudget, NormMismatch, NotInSpan
from kdvsat.spectral import (ControlProfileSet, ControlProgram, SolverConfig, SpectralState, evolve_program,
                             free_flow, phase_multiply, translate)
from kdvsat.synthesis import (BASE_TAU, ConeTerm, FreeOp, GlobalPhase, Phase, PhaseOp, PhaseTarget, TauLadder,
                              TransportParams, Translate, UNIT_TERMS, apply_ops, base_phase_program, calibrate,
                              check_norms, cone_field, cubed_phase_ops, global_phase_residual, ideal_evolve,
                              merge_ops, negative_ops, ops_to_program, period_shift, phase_ops, phase_program,
                              required_K, split_in_span, steer_word, transport_ops, word_target)
from kdvsat.trig import Basis, CubedDerivative, TrigPoly, mode_certificate
from kdvsat.verification import smooth_state

Q2 = ControlProfileSet.standard(2)
COS1, SIN1 = TrigPoly.mode(1, "cos"), TrigPoly.mode(1, "sin")

coef = st.floats(-2, 2, allow_nan=False)


class TestOps:
    def test_merge_sums_phases_and_drops_zero(self):
        ops = merge_ops([PhaseOp(COS1, "a"), PhaseOp(-COS1, "b"), FreeOp(0.1), PhaseOp(SIN1, "c")])
        assert len(ops) == 2 and isinstance(ops[0], FreeOp) and ops[1].theta == SIN1

    def test_merge_rejects_bad_free(self):
        with pytest.raises(ValueError):
            merge_ops([FreeOp(-1.0)])

    def test_program_shape(self):
        prog = ops_to_program([PhaseOp(COS1 * 2), FreeOp(0.3)], Q2)
        assert [s.tau for s in prog] == [BASE_TAU, 0.3]
        np.testing.assert_allclose(np.array(prog.segments[0].u) * BASE_TAU, [0, 2, 0, 0, 0])
        assert prog.segments[1].is_free()

    def test_compile_soundness(self):
        ops = [PhaseOp(COS1), FreeOp(0.01), PhaseOp(TrigPoly(0, [0, 0.5], [0.2])), FreeOp(0.02)]
        psi = smooth_state(16, 1.0)
        prog = ops_to_program(ops, Q2)
        assert ideal_evolve(psi, prog, Q2).distance(apply_ops(psi, ops)) < 1e-12
        out, _ = evolve_program(psi, prog, Q2)
        assert out.distance(apply_ops(psi, ops)) < 1e-9

    def test_required_K_grows_with_slope(self):
        assert required_K([PhaseOp(COS1 * 100)], 16) == 16 + 130 + 32
        assert required_K([FreeOp(1.0)], 16) == 48


class TestBasePhase:
    def test_segment_and_empty(self):
        prog = base_phase_program(COS1, 0.1, Q2)
        assert len(prog) == 1 and prog.segments[0].u[1] == pytest.approx(10.0)
        assert len(base_phase_program(TrigPoly(0), 0.1, Q2)) == 0
        with pytest.raises(ValueError):
            base_phase_program(COS1, 0.0, Q2)

    @settings(max_examples=15, deadline=None)
    @given(st.lists(coef, min_size=5, max_size=5))
    def test_short_segment_is_the_phase(self, w):
        theta = Q2.combine(w)
        psi = smooth_state(16, -2.5)
        out, _ = evolve_program(psi.resized(32), base_phase_program(theta, 1e-12, Q2), Q2)
        assert out.distance(phase_multiply(psi.resized(32), theta)) < 1e-9

    def test_split_in_span(self):
        theta = TrigPoly(1, [2, 0, 3])
        inside, rest = split_in_span(theta, Q2)
        assert rest == TrigPoly(0, [0, 0, 3.0]) and inside == TrigPoly(1.0, [2.0])

    def test_constant_target(self):
        psi = SpectralState.mode(8, 1)
        prog, err, _ = phase_program(PhaseTarget(TrigPoly(0.7), 1e-6, 0.1), Q2, psi)
        assert err < 1e-10 and prog.total_time < 1e-12

    def test_out_of_span_needs_schedule(self):
        with pytest.raises(NotInSpan):
            phase_ops(TrigPoly.mode(3, "cos"), Q2, None)


class TestCubed:
    def test_structure(self):
        tau = 1e-3
        ops = cubed_phase_ops(CubedDerivative(Basis(2)), TauLadder(tau))
        assert [type(o) for o in ops] == [PhaseOp, FreeOp, PhaseOp]
        s = tau ** (-1 / 3)
        assert ops[0].theta == SIN1 * s and ops[2].theta == SIN1 * -s
        assert ops[1].tau == tau
        assert ops[0].label.endswith("+:base") and ops[2].label.endswith("-:base")

    def test_weight_enters_as_cube_root(self):
        ops = cubed_phase_ops(CubedDerivative(Basis(2)), TauLadder(1e-3), scale=-8.0)
        assert ops[0].theta == SIN1 * (-2 * 1e-3 ** (-1 / 3))

    def test_limit_converges(self):
        # exp(i cos^3 x) on the constant mode
        psi = SpectralState.mode(64, 0)
        target = phase_multiply(psi, COS1 ** 3)
        errs = []
        for tau in (1e-3, 1e-6, 1e-9):
            ops = cubed_phase_ops(CubedDerivative(Basis(2)), TauLadder(tau))
            errs.append(apply_ops(psi.resized(required_K(ops, 64)), ops).distance(target))
        assert errs[0] > errs[1] > errs[2] and errs[-1] < 1e-2

    def test_depth_budget(self):
        with pytest.raises(DepthBudget):
            cubed_phase_ops(mode_certificate(16, "cos"), TauLadder(1e-3), max_depth=1)

    def test_ladder(self):
        lad = TauLadder(1.0, 0.5, ((2, 7.0),))
        assert [lad(i) for i in range(4)] == [1.0, 0.5, 7.0, 0.125]
        assert lad.scaled(2)(2) == 14.0


class TestTransports:
    def test_flat_phi_is_free_flow(self):
        for sym in (False, True):
            ops = merge_ops(transport_ops(TrigPoly(0), 1e-3, 4, 1.0, symmetric=sym))
            assert all(isinstance(o, FreeOp) for o in ops)
            # a constant phi only adds phases that cancel
            psi = smooth_state(8, 1.0)
            ops = transport_ops(TrigPoly(0.3), 1e-3, 4, 1.0, symmetric=sym)
            assert apply_ops(psi, ops).distance(free_flow(psi, 1e-3)) < 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            transport_ops(SIN1, 0.0, 4, 0.0)
        with pytest.raises(ValueError):
            ConeTerm(-1.0, SIN1)

    def test_unit_terms_sum_to_one(self):
        assert cone_field(UNIT_TERMS) == TrigPoly(1)

    def test_period_shift(self):
        s, k, Pi = period_shift(TrigPoly(1), 0.5)
        assert (k, s) == (0, pytest.approx(2 * math.pi - 0.5)) and Pi == pytest.approx(2 * math.pi)
        s, k, _ = period_shift(TrigPoly(1), 7.0)
        assert k == 1 and s == pytest.approx(4 * math.pi - 7.0)

    def test_backward_rotation(self):
        # exp(-kappa T_1) = translation by -kappa, realized forward over one period
        kappa = 0.5
        psi = SpectralState.mode(16, 1)
        errs = []
        for n_outer in (8, 16):
            ops = negative_ops(list(UNIT_TERMS), kappa, 0.0, TransportParams(tau=1e-5, n=32, n_outer=n_outer))
            out = apply_ops(psi.resized(required_K(ops, 16)), ops, SolverConfig(tail_tol=None))
            errs.append(out.distance(translate(psi, -kappa)))
        # symmetric Trotter: doubling n_outer divides the error by about 4
        assert errs[1] < 0.05 and 3.0 < errs[0] / errs[1] < 5.0


class TestWords:
    def test_order_is_application_order(self):
        psi = smooth_state(8)
        a = word_target([Translate(1.0), Phase(COS1)], psi.resized(32))
        b = phase_multiply(translate(psi.resized(32), 1.0), COS1)
        assert a.distance(b) < 1e-13

    def test_global_phase_pi(self):
        psi = SpectralState.mode(8, 1)
        res = steer_word([GlobalPhase(math.pi)], psi, 1e-8, Q2)
        assert res.psi_final.distance(psi.with_coeffs(-psi.coeffs)) < 1e-12
        assert res.program.total_time == pytest.approx(BASE_TAU)

    def test_empty_word(self):
        with pytest.raises(ValueError):
            steer_word([], SpectralState.mode(8, 0), 1.0, Q2)

    def test_norm_guard(self):
        psi = SpectralState.mode(8, 0)
        with pytest.raises(NormMismatch):
            steer_word([Phase(COS1)], psi, 1.0, Q2, target=psi.with_coeffs(psi.coeffs * 2))
        with pytest.raises(NormMismatch):
            check_norms(psi, psi.with_coeffs(psi.coeffs * 0.5))

    def test_global_phase_residual(self):
        psi = smooth_state(8)
        beta, res = global_phase_residual(psi.with_coeffs(psi.coeffs * np.exp(-0.3j)), psi)
        assert beta == pytest.approx(0.3) and res < 1e-13


def test_calibrate_unreachable():
    def build(p):
        return 1.0 / p, ControlProgram(1, []), {}

    with pytest.raises(BudgetExceeded) as exc:
        calibrate(build, [1, 2, 4], 0.0)
    assert exc.value.best_error == 0.25 and len(exc.value.curve) == 3


def test_calibrate_stops_at_first_success():
    cal = calibrate(lambda p: (1.0 / p, ControlProgram(1, []), {}), [1, 2, 4, 8], 0.3)
    assert cal.param == 4 and len(cal.curve) == 3
