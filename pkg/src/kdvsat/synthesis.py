"""Compiling phase and transport targets into piecewise-constant control programs.

Every construction is first expressed as a list of *operations* (exact phase
multiplications and free flows).  Adjacent phases commute and are merged,
then each phase becomes one short, strong control segment and each free
flow a zero-control segment.  Keeping the operation list around gives the
"intended" operator for free, which is how the compiler checks itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceeded, DepthBudget, NormMismatch, NotInSpan, NotPositive
from .flows import certify_positive, flow_period, transport_apply
from .spectral import (DEFAULT_CONFIG, ControlProfileSet, ControlProgram, Segment, SolverConfig, SpectralState,
                       evolve_program, free_flow, phase_multiply, translate)
from .trig import (COS, SIN, Basis, CubedDerivative, LinComb, TrigPoly, evaluate, h0_basis, poly_certificate)

log = logging.getLogger(__name__)

BASE_TAU = 1e-14


# ---------------------------------------------------------------------------
# Operation lists
# ---------------------------------------------------------------------------


@dataclass
class PhaseOp:
    theta: TrigPoly
    label: str = "phase"


@dataclass
class FreeOp:
    tau: float
    label: str = "free"


def merge_ops(ops) -> list:
    """Sum runs of adjacent phases and drop empty ones."""
    out = []
    for op in ops:
        if isinstance(op, PhaseOp):
            if out and isinstance(out[-1], PhaseOp):
                prev = out[-1]
                labels = prev.label if op.label in prev.label.split("+") else f"{prev.label}+{op.label}"
                out[-1] = PhaseOp(prev.theta + op.theta, labels)
            else:
                out.append(op)
        elif isinstance(op, FreeOp):
            if op.tau <= 0:
                raise ValueError(f"free flow duration must be positive, got {op.tau}")
            out.append(op)
        else:
            raise TypeError(f"unknown operation {op!r}")
    return [op for op in out if not (isinstance(op, PhaseOp) and op.theta.is_zero())]


def ops_to_program(ops, Q: ControlProfileSet, base_tau: float = BASE_TAU) -> ControlProgram:
    prog = ControlProgram(Q.q, [])
    zero = (0.0,) * Q.q
    for op in merge_ops(ops):
        if isinstance(op, PhaseOp):
            w = Q.solve(op.theta)
            prog.segments.append(Segment(base_tau, tuple(w / base_tau), op.label))
        else:
            prog.segments.append(Segment(op.tau, zero, op.label))
    return prog


def apply_ops(state: SpectralState, ops, config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """The intended operator: exact phases and exact free flows, no splitting."""
    for op in merge_ops(ops):
        if isinstance(op, PhaseOp):
            state = phase_multiply(state, op.theta, config=config)
        else:
            state = free_flow(state, op.tau)
    return state


def ideal_evolve(state: SpectralState, program: ControlProgram, Q: ControlProfileSet,
                 config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """Run a program with every controlled segment replaced by its pure phase ``tau u.Q``."""
    for seg in program.segments:
        if seg.is_free():
            state = free_flow(state, seg.tau)
        else:
            state = phase_multiply(state, Q.combine(np.asarray(seg.u) * seg.tau), config=config)
    return state


def required_K(ops, K0: int, margin: int = 32) -> int:
    """Cutoff estimate from the largest slope of any running phase sum.

    Free flows leave ``|u_hat|`` untouched and a phase ``theta`` shifts
    frequencies by at most ``sup |theta'|``, so the running sum bounds the
    spectral spread for the operation sequences produced here.
    """
    acc = TrigPoly(0)
    worst = 0.0
    for op in merge_ops(ops):
        if isinstance(op, PhaseOp):
            acc = acc + op.theta
            worst = max(worst, acc.derivative().sup_bound())
    return int(K0 + math.ceil(1.3 * worst) + margin)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------


def base_phase_program(theta: TrigPoly, tau: float, Q: ControlProfileSet, label: str = "base") -> ControlProgram:
    """One segment ``(tau, w / tau)`` with ``w . Q = theta``; empty for ``theta = 0``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if theta.is_zero():
        return ControlProgram(Q.q, [])
    w = Q.solve(theta)
    return ControlProgram(Q.q, [Segment(tau, tuple(w / tau), label)])


def split_in_span(theta: TrigPoly, Q: ControlProfileSet) -> tuple[TrigPoly, TrigPoly]:
    """``theta = inside + rest`` with ``inside`` in span(Q), by orthogonal projection of coefficients."""
    W = max(theta.N, Q.N)
    b = np.array([float(c) for c in theta.vector(W)])
    A = np.array([[float(c) for c in p.vector(W)] for p in Q.profiles]).T
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    inside = Q.combine(w)
    rest_vec = b - A @ w
    rest_vec[np.abs(rest_vec) < 1e-14 * max(1.0, float(np.max(np.abs(b))))] = 0.0
    return inside, TrigPoly.from_vector(list(rest_vec))


@dataclass(frozen=True)
class TauLadder:
    """Free-flow durations per nesting level: ``top * ratio**level`` unless overridden."""

    top: float
    ratio: float = 0.25
    overrides: tuple = ()

    def __call__(self, level: int) -> float:
        for lv, t in self.overrides:
            if lv == level:
                return t
        return self.top * self.ratio ** level

    def scaled(self, factor: float) -> "TauLadder":
        return TauLadder(self.top * factor, self.ratio, tuple((lv, t * factor) for lv, t in self.overrides))


def _direction_key(p: TrigPoly):
    """Canonical key for the line through ``p'`` (exact coefficients)."""
    d = p.to_exact().derivative()
    lead = next(c for _, _, c in d.terms())
    return (d / lead), lead


def _flatten(cert, scale, gens, memo, base, cubed):
    """Collect ``scale * cert`` as ``base + sum w_j (child_j')**3``.

    Cubed terms whose children have proportional derivatives are merged,
    using ``c (lam psi')**3 = c lam**3 (psi')**3``.
    """
    if isinstance(cert, Basis):
        base[0] = base[0] + gens[cert.index] * scale
    elif isinstance(cert, LinComb):
        for c, child in cert.terms:
            _flatten(child, scale * c, gens, memo, base, cubed)
    elif isinstance(cert, CubedDerivative):
        if cert.n != 3:
            raise ValueError("only cubic saturation is lowered to programs")
        child_val = evaluate(cert.child, gens, memo)
        if child_val.derivative().is_zero():
            return
        key, lead = _direction_key(child_val)
        if key in cubed:
            node, node_lead, w = cubed[key]
            lam = float(lead) / float(node_lead)
            cubed[key] = (node, node_lead, w + float(scale) * lam ** 3)
        else:
            cubed[key] = (cert.child, lead, float(scale))
    else:
        raise TypeError(f"not a certificate node: {cert!r}")


def cubed_phase_ops(cert, ladder: TauLadder, scale=1.0, level: int = 0, max_depth: int = 4,
                    gens=None, memo=None, label: str = "c") -> list:
    """Operations approximating ``exp(i * scale * evaluate(cert))``.

    Each cubic term ``w (psi')**3`` is realized as ``chi = cbrt(w) psi`` with
    phase ``+chi s``, free flow ``tau``, phase ``-chi s`` (in that order of
    application) and ``s = tau**(-1/3)``; the two phases are lowered
    recursively one level deeper.
    """
    gens = h0_basis(3) if gens is None else gens
    memo = {} if memo is None else memo
    if level > max_depth:
        raise DepthBudget(f"certificate nesting exceeds depth budget {max_depth}")
    base = [TrigPoly(0)]
    cubed: dict = {}
    _flatten(cert, Fraction(1), gens, memo, base, cubed)
    ops = []
    if not base[0].is_zero():
        ops.append(PhaseOp(base[0].to_float() * float(scale), f"{label}:base"))
    tau = ladder(level)
    s = tau ** (-1.0 / 3.0)
    for j, (node, _lead, w) in enumerate(cubed.values()):
        w = w * float(scale)
        if w == 0:
            continue
        a = math.copysign(abs(w) ** (1.0 / 3.0), w)
        sub = f"{label}{j}"
        ops += cubed_phase_ops(node, ladder, a * s, level + 1, max_depth, gens, memo, sub + "+")
        ops.append(FreeOp(tau, f"{sub}:free"))
        ops += cubed_phase_ops(node, ladder, -a * s, level + 1, max_depth, gens, memo, sub + "-")
    return ops


def cubed_phase_program(cert, ladder: TauLadder, Q: ControlProfileSet, scale=1.0, max_depth: int = 4,
                        base_tau: float = BASE_TAU) -> ControlProgram:
    return ops_to_program(cubed_phase_ops(cert, ladder, scale, max_depth=max_depth), Q, base_tau)


def phase_ops(theta: TrigPoly, Q: ControlProfileSet, ladder: TauLadder | None, max_depth: int = 4,
              label: str = "phase") -> list:
    """Exact-phase part in span(Q) plus certificate lowering of the remainder."""
    inside, rest = split_in_span(theta, Q)
    ops = [PhaseOp(inside, label)] if not inside.is_zero() else []
    if not rest.is_zero():
        if ladder is None:
            raise NotInSpan(f"{rest!r} is outside span(Q) and no saturation schedule was given")
        if rest.N <= 2:
            raise NotInSpan("residual inside the saturating base; profile set is degenerate")
        ops += cubed_phase_ops(poly_certificate(rest), ladder, max_depth=max_depth, label=label + ":")
    return ops


# ---------------------------------------------------------------------------
# Witnesses, calibration
# ---------------------------------------------------------------------------


def witness_states(K: int, alpha: float = 0.0) -> list[SpectralState]:
    """Normalized constant and normalized first mode."""
    return [SpectralState.mode(K, 0, alpha), SpectralState.mode(K, 1, alpha)]


@dataclass
class Trial:
    param: float
    error: float
    total_time: float
    segment_count: int


@dataclass
class Calibration:
    param: float
    error: float
    program: ControlProgram | None
    curve: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    CSV_FIELDS = ("param", "error", "total_time", "segment_count")

    def rows(self):
        return [(t.param, t.error, t.total_time, t.segment_count) for t in self.curve]


def calibrate(build: Callable, params: Sequence, epsilon: float, time_budget: float | None = None,
              stop_on_success: bool = True) -> Calibration:
    """Walk a refinement sequence until the measured error drops below ``epsilon``.

    ``build(param)`` returns ``(error, program, extra)``.  ``params`` is the
    declared monotone direction (halving ``tau``, doubling ``n``, ...).
    Parameters whose program exceeds ``time_budget`` are recorded and skipped.
    """
    curve = []
    best = None
    for p in params:
        err, prog, extra = build(p)
        T = prog.total_time if prog is not None else 0.0
        curve.append(Trial(p, err, T, len(prog) if prog is not None else 0))
        if time_budget is not None and T >= time_budget:
            continue
        if best is None or err < best.error:
            best = Calibration(p, err, prog, curve, extra)
        if err < epsilon and stop_on_success:
            break
    if best is None or not best.error < epsilon:
        be = None if best is None else best.error
        raise BudgetExceeded(f"no parameter reached error {epsilon:g} (best {be})", be, curve)
    best.curve = curve
    return best


def measure_ops(ops, Q, states, config, base_tau=BASE_TAU, targets=None):
    """Simulate a compiled op list on each state; returns (max error, program, details)."""
    K0 = max(s.K for s in states)
    K = required_K(ops, K0)
    prog = ops_to_program(ops, Q, base_tau)
    errs, compile_errs = [], []
    for i, st in enumerate(states):
        big = st.resized(K)
        out, _ = evolve_program(big, prog, Q, config)
        tgt = targets[i].resized(K)
        errs.append(out.distance(tgt))
        compile_errs.append(out.distance(ideal_evolve(big, prog, Q, config)))
    return max(errs), prog, {"errors": errs, "compile_errors": compile_errs, "K": K}


@dataclass
class PhaseTarget:
    theta: TrigPoly
    epsilon: float
    time_budget: float

    def __post_init__(self):
        if not (self.epsilon > 0 and self.time_budget > 0):
            raise ValueError("epsilon and time_budget must be positive")


def phase_program(target: PhaseTarget, Q: ControlProfileSet, psi0: SpectralState,
                  config: SolverConfig = DEFAULT_CONFIG, tau_start: float | None = None,
                  shrink: float = 0.5, max_iter: int = 24, ratio: float = 0.25,
                  base_tau: float = BASE_TAU, witnesses: bool = True) -> tuple[ControlProgram, float, Calibration]:
    """Compile ``exp(i theta)`` and calibrate the saturation schedule.

    The error is measured on ``psi0`` and, if ``witnesses`` is set, on the
    normalized constant and first mode too; the worst one counts.
    """
    states = [psi0] + (witness_states(psi0.K, psi0.alpha) if witnesses else [])
    targets = [phase_multiply(s.resized(s.K), target.theta, config=config) for s in states]
    _, rest = split_in_span(target.theta, Q)
    if rest.is_zero():
        ops = phase_ops(target.theta, Q, None)
        err, prog, extra = measure_ops(ops, Q, states, config, base_tau, targets)
        cal = Calibration(0.0, err, prog, [Trial(0.0, err, prog.total_time, len(prog))], extra)
        if not err < target.epsilon:
            raise BudgetExceeded(f"base phase error {err:.3e} above {target.epsilon:g}", err, cal.curve)
        return prog, err, cal
    tau0 = tau_start if tau_start is not None else target.time_budget / 10

    def build(tau):
        ops = phase_ops(target.theta, Q, TauLadder(tau, ratio))
        return measure_ops(ops, Q, states, config, base_tau, targets)

    cal = calibrate(build, [tau0 * shrink ** j for j in range(max_iter)], target.epsilon, target.time_budget)
    return cal.program, cal.error, cal


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


def transport_ops(phi: TrigPoly, tau: float, n: int, alpha: float, symmetric: bool = False,
                  label: str = "W") -> list:
    """Operations for ``(e^{i g/(n sqrt tau)} e^{i phi/sqrt tau} e^{tau L/n} e^{-i phi/sqrt tau})**n``.

    ``g = (phi')**3 + alpha sqrt(tau) (phi')**2``; the rightmost factor acts
    first.  The product approximates ``exp(T_f)`` with ``f = 3 (phi')**2``.

    With ``symmetric=True`` the result is conjugated by half of the ``g`` phase,
    which turns the first-order splitting of the inner product into a
    second-order one and has the same limit.
    """
    if not tau > 0 or n < 1:
        raise ValueError("need tau > 0 and n >= 1")
    phi = phi.to_float()
    s = 1.0 / math.sqrt(tau)
    d = phi.derivative()
    g = d ** 3 + d ** 2 * (alpha * math.sqrt(tau))
    E = phi * s
    G = g * (s / n)
    ops = [PhaseOp(-E, f"{label}:conj-")]
    if symmetric:
        ops.append(PhaseOp(G * 0.5, f"{label}:g"))
        for i in range(n):
            ops.append(FreeOp(tau / n, f"{label}:free"))
            ops.append(PhaseOp(G * (0.5 if i == n - 1 else 1.0), f"{label}:g"))
    else:
        for i in range(n):
            ops.append(FreeOp(tau / n, f"{label}:free"))
            ops.append(PhaseOp(E, f"{label}:conj+"))
            ops.append(PhaseOp(G, f"{label}:g"))
            if i < n - 1:
                ops.append(PhaseOp(-E, f"{label}:conj-"))
        return ops
    ops.append(PhaseOp(E, f"{label}:conj+"))
    return ops


def transport_program(phi: TrigPoly, tau: float, n: int, alpha: float, Q: ControlProfileSet,
                      symmetric: bool = False, ladder: TauLadder | None = None,
                      base_tau: float = BASE_TAU) -> ControlProgram:
    """Control program for ``exp(T_f)``, ``f = 3 (phi')**2`` (see :func:`transport_ops`).

    When ``g`` leaves span(Q) its phase is lowered through saturation
    certificates on the schedule ``ladder``.
    """
    ops = realize_ops(transport_ops(phi, tau, n, alpha, symmetric), Q, ladder)
    return ops_to_program(ops, Q, base_tau)


def realize_ops(ops, Q, ladder):
    out = []
    for op in merge_ops(ops):
        if isinstance(op, PhaseOp):
            out += phase_ops(op.theta, Q, ladder, label=op.label)
        else:
            out.append(op)
    return out


@dataclass(frozen=True)
class ConeTerm:
    """``sign * lam * (phi')**2`` with ``lam >= 0``."""

    lam: float
    phi: TrigPoly
    sign: int = 1

    def __post_init__(self):
        if self.lam < 0 or self.sign not in (1, -1):
            raise ValueError("cone term needs lam >= 0 and sign +-1")

    def field(self) -> TrigPoly:
        return self.phi.derivative() ** 2 * (self.sign * self.lam)


def cone_field(terms) -> TrigPoly:
    out = TrigPoly(0)
    for t in terms:
        out = out + t.field()
    return out


UNIT_TERMS = (ConeTerm(1.0, TrigPoly.mode(1, COS)), ConeTerm(1.0, TrigPoly.mode(1, SIN)))  # sin^2 + cos^2 = 1


@dataclass(frozen=True)
class TransportParams:
    """Knobs for transport synthesis.

    ``tau``/``n`` are the inner time and splitting count of each W product,
    ``n_outer`` the Trotter count used to combine cone terms and ``n_neg``
    the Trotter count pairing negative parts with translations.
    """

    tau: float = 1e-6
    n: int = 32
    n_outer: int = 16
    n_neg: int = 8
    symmetric: bool = True
    trotter_symmetric: bool = True
    ladder: TauLadder | None = None


def _trotter_schedule(m: int, n: int, symmetric: bool) -> list[tuple[int, float]]:
    """(factor index, fraction of total time) in application order, merged."""
    if m == 1:
        return [(0, 1.0)]
    seq = []
    for _ in range(n):
        if symmetric:
            step = [(j, 0.5 / n) for j in range(m - 1)] + [(m - 1, 1.0 / n)] + \
                   [(j, 0.5 / n) for j in reversed(range(m - 1))]
        else:
            step = [(j, 1.0 / n) for j in range(m)]
        for j, frac in step:
            if seq and seq[-1][0] == j:
                seq[-1] = (j, seq[-1][1] + frac)
            else:
                seq.append((j, frac))
    return seq


def positive_cone_ops(terms, t: float, alpha: float, params: TransportParams, label: str = "cone") -> list:
    """``exp(t T_f)`` for ``f = sum lam_j (phi_j')**2``, ``t >= 0``, by Trotter splitting."""
    if t < 0:
        raise ValueError("positive cone flows run forward only")
    terms = [tm for tm in terms if tm.lam > 0 and not tm.phi.derivative().is_zero()]
    if t == 0 or not terms:
        return []
    ops = []
    for j, frac in _trotter_schedule(len(terms), params.n_outer, params.trotter_symmetric):
        tm = terms[j]
        amp = math.sqrt(tm.lam * t * frac / 3.0)
        ops += transport_ops(tm.phi * amp, params.tau, params.n, alpha, params.symmetric, f"{label}{j}")
    return ops


def period_shift(g: TrigPoly, kappa: float) -> tuple[float, int, float]:
    """``(s, k, Pi)`` with ``s = (k+1) Pi - kappa`` and the smallest ``k >= 0`` making ``s >= 0``."""
    Pi = flow_period(g)
    k = max(0, math.ceil(kappa / Pi) - 1)
    return (k + 1) * Pi - kappa, k, Pi


def backward_cone_ops(terms, kappa: float, alpha: float, params: TransportParams, label: str = "back") -> list:
    """``exp(-kappa T_g)`` for a positive cone element ``g`` as the forward flow ``exp(s T_g)``."""
    s, _, _ = period_shift(cone_field(terms), kappa)
    return positive_cone_ops(terms, s, alpha, params, label)


def translation_ops(delta: float, alpha: float, params: TransportParams, label: str = "shift") -> list:
    """``psi(x) -> psi(x + delta)`` as the transport of ``1 = sin^2 + cos^2``."""
    if delta >= 0:
        return positive_cone_ops(UNIT_TERMS, delta, alpha, params, label)
    return backward_cone_ops(UNIT_TERMS, -delta, alpha, params, label)


def negative_ops(neg_terms, t: float, alpha: float, params: TransportParams, label: str = "neg") -> list:
    """``exp(-t T_h)`` for a cone element ``h``.

    When ``h`` is certified positive the period of its flow gives the answer
    directly.  Otherwise ``h + delta`` is positive for
    ``delta = max(1, 2 sup|h|)`` and ``-h = -(h + delta) + delta`` is split by
    Trotter into backward flows of ``h + delta`` and forward translations.
    """
    h = cone_field(neg_terms)
    try:
        certify_positive(h)
        return backward_cone_ops(neg_terms, t, alpha, params, label)
    except NotPositive:
        pass
    delta = max(1.0, 2.0 * h.sup_bound())
    shifted = list(neg_terms) + [ConeTerm(delta * tm.lam, tm.phi) for tm in UNIT_TERMS]
    certify_positive(cone_field(shifted))
    n = params.n_neg
    ops = []
    for i in range(n):
        ops += backward_cone_ops(shifted, t / n, alpha, params, f"{label}{i}:back")
        ops += translation_ops(delta * t / n, alpha, params, f"{label}{i}:shift")
    return ops


def signed_transport_ops(terms, t: float, alpha: float, params: TransportParams, label: str = "T") -> list:
    """``exp(t T_f)`` for ``f = sum sign_j lam_j (phi_j')**2`` and ``t >= 0``."""
    if t < 0:
        terms = [ConeTerm(tm.lam, tm.phi, -tm.sign) for tm in terms]
        t = -t
    pos = [ConeTerm(tm.lam, tm.phi) for tm in terms if tm.sign > 0]
    neg = [ConeTerm(tm.lam, tm.phi) for tm in terms if tm.sign < 0]
    if not neg:
        return positive_cone_ops(pos, t, alpha, params, label)
    if not pos:
        return negative_ops(neg, t, alpha, params, label + "-")
    ops = []
    n = params.n_neg
    for i in range(n):
        ops += positive_cone_ops(pos, t / n, alpha, params, f"{label}{i}+")
        ops += negative_ops(neg, t / n, alpha, params, f"{label}{i}-")
    return ops


def signed_transport_program(terms, t: float, alpha: float, Q: ControlProfileSet,
                             params: TransportParams = TransportParams(),
                             base_tau: float = BASE_TAU) -> ControlProgram:
    ops = realize_ops(signed_transport_ops(terms, t, alpha, params), Q, params.ladder)
    return ops_to_program(ops, Q, base_tau)


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase:
    theta: TrigPoly


@dataclass(frozen=True)
class Transport:
    terms: tuple
    time: float = 1.0


@dataclass(frozen=True)
class Translate:
    delta: float


@dataclass(frozen=True)
class GlobalPhase:
    c: float


def exact_atom(state: SpectralState, atom, config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    if isinstance(atom, Phase):
        return phase_multiply(state, atom.theta, config=config)
    if isinstance(atom, Transport):
        return transport_apply(state, cone_field(atom.terms), atom.time, config=config)
    if isinstance(atom, Translate):
        return translate(state, atom.delta)
    if isinstance(atom, GlobalPhase):
        return state.with_coeffs(state.coeffs * np.exp(1j * atom.c))
    raise TypeError(f"unknown word atom {atom!r}")


def word_target(word, psi0: SpectralState, config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """Exact image of ``psi0``; atoms act in list order."""
    st = psi0
    for atom in word:
        st = exact_atom(st, atom, config)
    return st


def atom_ops(atom, alpha: float, params: TransportParams) -> list:
    if isinstance(atom, Phase):
        return [PhaseOp(atom.theta, "word:phase")]
    if isinstance(atom, GlobalPhase):
        return [PhaseOp(TrigPoly(float(atom.c)), "word:global")]
    if isinstance(atom, Translate):
        return translation_ops(atom.delta, alpha, params, "word:shift")
    if isinstance(atom, Transport):
        return signed_transport_ops(atom.terms, atom.time, alpha, params, "word:T")
    raise TypeError(f"unknown word atom {atom!r}")


def check_norms(a: SpectralState, b: SpectralState, tol: float = 1e-10):
    if abs(a.norm() - b.norm()) > tol:
        raise NormMismatch(f"norms differ: {a.norm():.15g} vs {b.norm():.15g}")


def global_phase_residual(out: SpectralState, target: SpectralState) -> tuple[float, float]:
    """Best ``beta`` for ``e^{i beta} out ~ target`` and the remaining distance."""
    K = max(out.K, target.K)
    a, b = out.resized(K).coeffs, target.resized(K).coeffs
    beta = float(np.angle(np.vdot(a, b)))
    return beta, float(np.linalg.norm(np.exp(1j * beta) * a - b))


@dataclass
class WordResult:
    program: ControlProgram
    error: float
    psi_final: SpectralState
    target: SpectralState
    beta: float
    error_mod_phase: float
    compile_error: float


def steer_word(word, psi0: SpectralState, epsilon: float, Q: ControlProfileSet,
               params: TransportParams = TransportParams(), target: SpectralState | None = None,
               config: SolverConfig = DEFAULT_CONFIG, base_tau: float = BASE_TAU) -> WordResult:
    """Compile a word of atoms, simulate it on ``psi0`` and compare with the exact image.

    A caller-supplied ``target`` must have the norm of ``psi0``; anything else
    is unreachable by unitary dynamics and is rejected before simulating.
    """
    word = list(word)
    if not word:
        raise ValueError("empty steering word")
    if target is not None:
        check_norms(psi0, target)
    exact = word_target(word, psi0, config) if target is None else target
    ops = []
    for atom in word:
        ops += atom_ops(atom, psi0.alpha, params)
    ops = realize_ops(ops, Q, params.ladder)
    K = required_K(ops, psi0.K)
    prog = ops_to_program(ops, Q, base_tau)
    big = psi0.resized(K)
    out, _ = evolve_program(big, prog, Q, config)
    ideal = ideal_evolve(big, prog, Q, config)
    err = out.distance(exact)
    beta, err_mod = global_phase_residual(out, exact)
    res = WordResult(prog, err, out, exact, beta, err_mod, out.distance(ideal))
    if not err < epsilon:
        raise BudgetExceeded(f"word error {err:.3e} above {epsilon:g}", err, [res])
    return res
