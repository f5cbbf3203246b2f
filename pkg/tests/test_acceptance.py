"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (shown in the pytest terminal summary)
before asserting, so the report is complete even when a check fails.
Run with ``pytest tests/test_acceptance.py -v``.
"""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import record
from kdvsat.errors import NormMismatch
from kdvsat.flows import transport_apply
from kdvsat.spectral import ControlProfileSet, ControlProgram, Segment, SolverConfig, SpectralState, evolve_program
from kdvsat.synthesis import (ConeTerm, GlobalPhase, Phase, PhaseTarget, TransportParams, Translate, calibrate,
                              measure_ops, negative_ops, phase_program, steer_word, transport_ops, witness_states)
from kdvsat.trig import TrigPoly, VectorField, lie_bracket
from kdvsat.verification import (eventually_decreasing, period_study, satlimit_study, saturation_report,
                                 smooth_state, strang_study, trotter_study)

ALPHAS = (0.0, 1.0, -2.5)
SIN1 = TrigPoly.mode(1, "sin")
COS1 = TrigPoly.mode(1, "cos")


def test_conservation_random_programs():
    Q = ControlProfileSet.standard(2)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(20):
        psi = smooth_state(64, float(rng.choice(ALPHAS)), seed=trial, modes=4)
        segs = []
        for _ in range(int(rng.integers(1, 51))):
            u = rng.normal(size=Q.q)
            u *= rng.uniform(0, 10) / np.linalg.norm(u)
            segs.append(Segment(float(rng.uniform(1e-4, 2e-2)), tuple(u), "random"))
        out, _ = evolve_program(psi, ControlProgram(Q.q, segs), Q, SolverConfig(tail_tol=None))
        worst = max(worst, abs(out.norm() - psi.norm()))
    ok = worst <= 1e-10
    record("AC1", ok, f"max L2 drift over 20 programs at K=64: {worst:.2e} (tol 1e-10)")
    assert ok


def test_strang_order_against_dense_oracle():
    dts, errs, rep = strang_study(K=16)
    ok = abs(rep.slope - 2.0) <= 0.1 and errs[-1] < 1e-6
    record("AC2", ok, f"slope {rep.slope:.3f} (2.0 +- 0.1), error at dt=1e-4: {errs[-1]:.2e} (< 1e-6)")
    assert ok


def _satlimit_verdict(taus, errs):
    # envelope C tau^(5/24) fixed by the three coarsest points, then checked on the rest
    ratios = [e / t ** (5 / 24) for t, e in zip(taus, errs)]
    C = max(ratios[:3])
    below = all(r <= C * (1 + 1e-12) for r in ratios)
    return eventually_decreasing(errs), errs[-1] < 1e-2, below, C


def test_saturation_limit_as_stated():
    lines = []
    ok = True
    for alpha in ALPHAS:
        taus, errs = satlimit_study(alpha, range(4, 15), sign=+1)
        dec, small, below, _ = _satlimit_verdict(taus, errs)
        ok &= dec and small and below
        lines.append(f"a={alpha:g}: finest {errs[-1]:.3f}, decreasing={dec}")
    record("AC3", ok, "target exp(+i cos^3 x), tau=2^-4..2^-14; " + "; ".join(lines))
    assert ok


def test_saturation_limit_with_selected_sign():
    """The conjugated free flow converges to exp(-i (phi')^3); that limit is checked over a longer ladder."""
    lines = []
    ok = True
    for alpha in ALPHAS:
        taus, errs = satlimit_study(alpha, range(4, 27), sign=-1)
        dec, small, below, C = _satlimit_verdict(taus, errs)
        ok &= dec and small and below
        lines.append(f"a={alpha:g}: 2^-14 {errs[10]:.3f}, 2^-26 {errs[-1]:.2e}, under C tau^(5/24)={below}")
    record("AC3b", ok, "target exp(-i cos^3 x), tau to 2^-26; " + "; ".join(lines))
    assert ok


def _wtn_errors(alpha, tau, ns, symmetric, psi0=None):
    Q = ControlProfileSet.standard(3)
    psi0 = SpectralState.mode(32, 0, alpha) if psi0 is None else psi0
    target = transport_apply(psi0.resized(128), TrigPoly(1.5, [0, 1.5]), 1.0)
    out = []
    for n in ns:
        ops = transport_ops(SIN1, tau, n, alpha, symmetric)
        err, _, _ = measure_ops(ops, Q, [psi0], SolverConfig(), targets=[target])
        out.append(err)
    return out


def _transport_verdict(symmetric):
    ok = True
    lines = []
    for alpha in ALPHAS:
        best = None
        for tau in (1e-4, 1e-5, 1e-6):
            errs = _wtn_errors(alpha, tau, (16, 32, 64), symmetric)
            cand = min(errs)
            if best is None or cand < best[0]:
                best = (cand, tau, (16, 32, 64)[errs.index(cand)])
        doubling = _wtn_errors(alpha, 1e-6, (16, 32, 64), symmetric)
        dec = all(b < a for a, b in zip(doubling, doubling[1:]))
        ok &= best[0] < 5e-2 and dec
        lines.append(f"a={alpha:g}: best {best[0]:.3f} at tau={best[1]:g},n={best[2]}; "
                     f"n-doubling at tau=1e-6 {[round(e, 3) for e in doubling]}")
    return ok, lines


def test_transport_limit_as_stated():
    ok, lines = _transport_verdict(symmetric=False)
    record("AC4", ok, "W product in the stated factor order, n<=64; " + " | ".join(lines))
    assert ok


def test_transport_limit_symmetric_product():
    ok, lines = _transport_verdict(symmetric=True)
    record("AC4b", ok, "W product conjugated by half the g phase, n<=64; " + " | ".join(lines))
    assert ok


@pytest.mark.parametrize("budget", [0.1, 0.01])
def test_phase_steering_cos3x(budget):
    Q = ControlProfileSet.standard(2)
    theta = TrigPoly.mode(3, "cos")
    ok = True
    lines = []
    for alpha in ALPHAS:
        for m in (0, 1):
            psi0 = SpectralState.mode(16, m, alpha)
            prog, err, cal = phase_program(PhaseTarget(theta, 1e-2, budget), Q, psi0)
            good = err < 1e-2 and prog.total_time < budget
            ok &= good
            lines.append(f"a={alpha:g},m={m}: {err:.2e} in T={prog.total_time:.1e}")
    record("AC5" if budget == 0.1 else "AC5b", ok,
           f"cos 3x with 5 profiles, budget {budget}: " + "; ".join(lines))
    assert ok


def test_word_steering():
    Q = ControlProfileSet.standard(3)
    word = [Phase(COS1), Translate(math.pi / 2), GlobalPhase(1.0)]
    ok = True
    lines = []
    for alpha in ALPHAS:
        psi0 = SpectralState.mode(32, 1, alpha)

        def build(n_outer):
            res = steer_word(word, psi0, 1.0, Q, TransportParams(tau=1e-6, n=32, n_outer=n_outer))
            return res.error, res.program, {}

        cal = calibrate(build, [2, 4, 8, 16], 5e-2)
        ok &= cal.error < 5e-2
        lines.append(f"a={alpha:g}: {cal.error:.3f} (n_outer={cal.param})")
    psi0 = SpectralState.mode(32, 1, 0.0)
    bad = psi0.with_coeffs(psi0.coeffs * 1.5)
    try:
        steer_word(word, psi0, 5e-2, Q, TransportParams(tau=1e-6, n=32, n_outer=8), target=bad)
        guard = False
    except NormMismatch:
        guard = True
    ok &= guard
    record("AC6", ok, "; ".join(lines) + f"; norm guard rejects |target|=1.5: {guard}")
    assert ok


def test_trotter_rate():
    ns, errs, rep = trotter_study(ns=(4, 8, 16, 32, 64, 128, 256))
    ok = abs(rep.slope - 1.0) <= 0.2
    record("AC7", ok, f"slope in 1/n: {rep.slope:.3f} (1.0 +- 0.2), errors {errs[0]:.2e} -> {errs[-1]:.2e}")
    assert ok


def test_period_trick():
    Pi, returns = period_study()
    exact = 2 * math.pi / math.sqrt(2)
    terms = [ConeTerm(2.0, COS1), ConeTerm(1.0, SIN1)]  # 2 sin^2 + cos^2 = 1 + sin^2
    g = TrigPoly(1.5, [0, -0.5])
    Q = ControlProfileSet.standard(3)
    params = TransportParams(tau=1e-5, n=32, n_outer=32)
    worst = 0.0
    for alpha in ALPHAS:
        states = witness_states(32, alpha)
        targets = [transport_apply(s.resized(128), g, -0.3) for s in states]
        err, _, _ = measure_ops(negative_ops(terms, 0.3, alpha, params), Q, states, SolverConfig(), targets=targets)
        worst = max(worst, err)
    ok = abs(Pi - exact) < 1e-8 and returns[0] < 1e-6 and worst < 5e-2
    record("AC8", ok, f"|Pi - 2pi/sqrt2| = {abs(Pi - exact):.1e}; return after Pi {returns[0]:.1e}; "
                      f"backward kappa=0.3 worst error {worst:.3f} (< 5e-2)")
    assert ok


def _random_field(rng, deg=4):
    c = lambda: Fraction(rng.randint(-9, 9), rng.randint(1, 6))
    return VectorField(TrigPoly(c(), [c() for _ in range(deg)], [c() for _ in range(deg)]))


def test_algebra_certificates():
    rep = saturation_report(3, 16, field_N_max=12)
    rng = random.Random(7)
    algebra_ok = True
    for _ in range(100):
        X, Y, Z = (_random_field(rng) for _ in range(3))
        algebra_ok &= lie_bracket(X, Y).coeff == -lie_bracket(Y, X).coeff
        jac = (lie_bracket(X, lie_bracket(Y, Z)).coeff + lie_bracket(Y, lie_bracket(Z, X)).coeff
               + lie_bracket(Z, lie_bracket(X, Y)).coeff)
        algebra_ok &= jac.is_zero()
    ok = rep.passed and algebra_ok and len(rep.modes) == 33 and len(rep.fields) == 25
    depth = max(m["depth"] for m in rep.modes)
    record("AC9", ok, f"33 mode certificates exact={all(m['ok'] for m in rep.modes)} (max depth {depth}), "
                      f"25 field certificates exact={all(f['ok'] for f in rep.fields)}, "
                      f"antisymmetry+Jacobi on 100 triples={algebra_ok}")
    assert ok
