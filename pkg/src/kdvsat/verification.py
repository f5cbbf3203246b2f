"""Independent reference computations and convergence measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import CostGuard, DegenerateFit
from .spectral import ControlProfileSet, SpectralState, dispersion_symbol
from .trig import (COS, SIN, TrigPoly, cert_stats, evaluate, evaluate_bracket, h0_basis, mode_certificate,
                   saturation_closure, span_contains, vectorfield_certificate)

MAX_DENSE_K = 128


def multiplication_matrix(v: TrigPoly, K: int) -> np.ndarray:
    """Galerkin matrix of multiplication by ``v`` on modes ``-K..K`` (Toeplitz in k)."""
    c = v.complex_coefficients(2 * K)  # c[j + 2K] = v_hat_j, unnormalized Fourier series
    idx = np.arange(-K, K + 1)
    diff = idx[:, None] - idx[None, :]
    return c[diff + 2 * K]


def dense_generator(u, Q: ControlProfileSet, K: int, alpha: float) -> np.ndarray:
    """``A = i diag(k^3 - alpha k^2) + i Toeplitz(u.Q)``."""
    A = 1j * multiplication_matrix(Q.combine(u), K)
    A[np.diag_indices_from(A)] += 1j * dispersion_symbol(K, alpha)
    return A


def dense_evolve(state: SpectralState, u, Q: ControlProfileSet, T: float, K: int | None = None,
                 method: str = "expm") -> SpectralState:
    """Reference solution ``exp(T A) psi`` on the truncated mode space.

    ``method="expm"`` uses scaling and squaring with Pade approximants;
    ``method="eigh"`` diagonalizes the Hermitian matrix ``-iA`` instead, which
    is a second, unrelated route used to cross-check the first.
    """
    K = state.K if K is None else K
    if K > MAX_DENSE_K:
        raise CostGuard(f"dense oracle limited to K <= {MAX_DENSE_K}, got {K}")
    psi = state.resized(K)
    A = dense_generator(u, Q, K, state.alpha)
    if method == "expm":
        out = scipy.linalg.expm(T * A) @ psi.coeffs
    elif method == "eigh":
        H = -1j * A
        H = 0.5 * (H + H.conj().T)
        w, V = np.linalg.eigh(H)
        out = V @ (np.exp(1j * T * w) * (V.conj().T @ psi.coeffs))
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralState(out, K, state.alpha)


@dataclass
class RateReport:
    params: list
    errors: list
    slope: float
    intercept: float
    residual: float
    monotone: bool
    dropped: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    @property
    def converging(self) -> bool:
        return self.slope > 0.05

    def predict(self, h: float) -> float:
        return math.exp(self.intercept) * h ** self.slope


def _lsq(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(r ** 2)))


def fit_rate(params, errors, floor: float = 1e-13, drop_coarse: bool = True) -> RateReport:
    """Least-squares slope of ``log(error)`` against ``log(param)``.

    Points under ``floor`` are excluded as rounding-limited.  When the
    residual exceeds 0.05 the two coarsest points (largest params) are
    dropped once and the fit is redone.
    """
    p = np.asarray(params, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(p) != len(e):
        raise ValueError("params and errors differ in length")
    order = np.argsort(p)
    p, e = p[order], e[order]
    if np.any(np.diff(p) <= 0):
        raise ValueError("parameter grid must be strictly monotone")
    if np.any(e < 0):
        raise ValueError("errors must be non-negative")
    keep = e >= floor
    excluded = list(p[~keep])
    p, e = p[keep], e[keep]
    if len(p) < 4:
        raise DegenerateFit(f"only {len(p)} points above the rounding floor {floor:g}")
    x, y = np.log(p), np.log(e)
    slope, icpt, res = _lsq(x, y)
    dropped = []
    if drop_coarse and res > 0.05 and len(p) >= 6:
        dropped = list(p[-2:])
        slope, icpt, res = _lsq(x[:-2], y[:-2])
    # error should shrink as the parameter shrinks
    monotone = bool(np.all(np.diff(e) >= 0))
    return RateReport(list(p), list(e), slope, icpt, res, monotone, dropped, excluded)


def eventually_decreasing(errors, tail: int = 3) -> bool:
    """The last ``tail`` steps of a refinement sequence (coarse to fine) strictly decrease."""
    e = list(errors)[-(tail + 1):]
    return all(b < a for a, b in zip(e, e[1:]))


@dataclass
class SaturationReport:
    n: int
    N_max: int
    closure_dims: list
    closure_complete: bool
    modes: list  # dicts: N, parity, depth, tree_size, max_coeff, ok
    fields: list  # dicts: N, parity, ok
    spans_profiles: bool | None = None

    @property
    def passed(self) -> bool:
        return (self.closure_complete and all(m["ok"] for m in self.modes)
                and all(f["ok"] for f in self.fields) and self.spans_profiles is not False)

    def to_json(self) -> dict:
        return {"n": self.n, "N_max": self.N_max, "closure_dims": self.closure_dims,
                "closure_complete": self.closure_complete, "spans_profiles": self.spans_profiles,
                "passed": self.passed, "modes": self.modes, "fields": self.fields}


def _mode_list(N_max):
    for N in range(N_max + 1):
        yield N, COS
        if N:
            yield N, SIN


def saturation_report(n: int = 3, N_max: int = 16, Q: ControlProfileSet | None = None,
                      field_N_max: int | None = None) -> SaturationReport:
    """Closure run from ``H_0`` plus exact checks of every mode and field certificate."""
    gens = h0_basis(n)
    chain = saturation_closure(gens, n=n, window=N_max)
    final = chain[-1]
    complete = all(span_contains(final, TrigPoly.mode(N, par)) for N, par in _mode_list(N_max))
    modes = []
    for N, par in _mode_list(N_max):
        cert = mode_certificate(N, par, n)
        st = cert_stats(cert)
        ok = evaluate(cert, gens) == TrigPoly.mode(N, par)
        modes.append({"N": N, "parity": par, "depth": st["depth"], "tree_size": st["tree_size"],
                      "distinct_nodes": st["distinct_nodes"], "max_coeff": st["max_coeff"], "ok": bool(ok)})
    fields = []
    for N, par in _mode_list(N_max if field_N_max is None else field_N_max):
        expr = vectorfield_certificate(TrigPoly.mode(N, par))
        fields.append({"N": N, "parity": par, "ok": bool(evaluate_bracket(expr).coeff == TrigPoly.mode(N, par))})
    spans = None
    if Q is not None:
        spans = all(span_contains(Q.profiles, p) for p in h0_basis(3))
    return SaturationReport(n, N_max, [len(h) for h in chain], complete, modes, fields, spans)


# ---------------------------------------------------------------------------
# Convergence studies (shared by the CLI, demos and acceptance tests)
# ---------------------------------------------------------------------------


def smooth_state(K: int, alpha: float = 0.0, seed: int = 0, modes: int = 3) -> SpectralState:
    """Normalized random state supported on ``|k| <= modes``."""
    rng = np.random.default_rng(seed)
    c = np.zeros(2 * K + 1, dtype=complex)
    for k in range(-modes, modes + 1):
        c[k + K] = (rng.normal() + 1j * rng.normal()) / (1 + k * k)
    return SpectralState(c, K, alpha).normalized()


def strang_study(K: int = 16, T: float = 0.1, dts=(1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4),
                 alpha: float = 1.0, seed: int = 0, u=(0.5, 1.0, -0.7, 0.4, 0.3)):
    """Strang splitting against the dense oracle for one constant segment."""
    from .spectral import evolve_constant

    Q = ControlProfileSet.standard(2)
    psi = smooth_state(K, alpha, seed)
    ref = dense_evolve(psi, u, Q, T)
    errs = [evolve_constant(psi, u, Q, T, steps=max(1, round(T / dt))).distance(ref) for dt in dts]
    return list(dts), errs, fit_rate(dts, errs)


def conjugated_free_flow(psi0: SpectralState, phi: TrigPoly, tau: float, K: int | None = None) -> SpectralState:
    """``e^{i phi s} e^{tau L} e^{-i phi s} psi0`` with ``s = tau**(-1/3)``, computed exactly."""
    from .spectral import free_flow, phase_multiply

    s = tau ** (-1.0 / 3.0)
    if K is None:
        K = psi0.K + math.ceil(1.3 * s * phi.derivative().sup_bound()) + 32
    st = phase_multiply(psi0.resized(K), phi * (-s))
    st = free_flow(st, tau)
    return phase_multiply(st, phi * s)


def satlimit_study(alpha: float = 0.0, exponents=range(4, 15), sign: int = 1, phi: TrigPoly | None = None,
                   K0: int = 16):
    """Distance between the conjugated free flow and ``e^{i sign (phi')^3} psi0`` on the constant state.

    ``sign=+1`` is the limit as usually quoted; ``sign=-1`` is the one the
    dynamics actually selects (see the README section on the saturation limit).
    """
    from .spectral import phase_multiply

    phi = TrigPoly.mode(1, SIN) if phi is None else phi
    psi0 = SpectralState.mode(K0, 0, alpha)
    cube = phi.derivative() ** 3
    taus, errs = [], []
    for j in exponents:
        tau = 2.0 ** (-j)
        out = conjugated_free_flow(psi0, phi, tau)
        tgt = phase_multiply(psi0.resized(out.K), cube * sign)
        taus.append(tau)
        errs.append(out.distance(tgt))
    return taus, errs


def power_law_envelope(params, errors, exponent: float) -> float:
    """Smallest ``C`` with ``errors <= C * params**exponent`` at every point."""
    return float(max(e / p ** exponent for p, e in zip(params, errors)))


def trotter_study(ns=(4, 8, 16, 32, 64, 128, 256), K: int = 16, delta: float = 1.0, M: int = 256):
    """Lie-Trotter product of the sin^2 and cos^2 transports against the exact translation."""
    from .flows import diffeo_apply, integrate_flow
    from .spectral import translate

    psi = SpectralState.from_function(lambda x: np.exp(np.cos(x) + 0.5j * np.sin(2 * x)), K).normalized()
    f1 = TrigPoly.mode(1, COS).derivative() ** 2  # sin^2
    f2 = TrigPoly.mode(1, SIN).derivative() ** 2  # cos^2
    exact = translate(psi, delta)
    errs = []
    for n in ns:
        A = integrate_flow(f1, delta / n, M)
        B = integrate_flow(f2, delta / n, M)
        st = psi
        for _ in range(n):
            st = diffeo_apply(diffeo_apply(st, B), A)
        errs.append(st.distance(exact))
    return list(ns), errs, fit_rate([1.0 / n for n in ns], errs)


def wtn_study(alpha: float = 0.0, tau: float = 1e-6, ns=(16, 32, 64), symmetric: bool = True,
              psi0: SpectralState | None = None, phi: TrigPoly | None = None):
    """Simulated W product against the characteristic transport of ``3 (phi')**2`` for unit time."""
    from .flows import transport_apply
    from .spectral import SolverConfig, evolve_program
    from .synthesis import ideal_evolve, ops_to_program, required_K, transport_ops

    phi = TrigPoly.mode(1, SIN) if phi is None else phi
    psi0 = SpectralState.mode(32, 0, alpha) if psi0 is None else psi0
    Q = ControlProfileSet.standard(3)
    f = phi.derivative() ** 2 * 3
    target = transport_apply(psi0.resized(4 * psi0.K), f, 1.0)
    rows = []
    for n in ns:
        ops = transport_ops(phi, tau, n, alpha, symmetric)
        K = required_K(ops, psi0.K)
        prog = ops_to_program(ops, Q)
        big = psi0.resized(K)
        out, _ = evolve_program(big, prog, Q, SolverConfig())
        rows.append({"tau": tau, "n": n, "error": out.distance(target), "K": K,
                     "compile_error": out.distance(ideal_evolve(big, prog, Q)),
                     "total_time": prog.total_time, "segments": len(prog)})
    return rows


def period_study(g: TrigPoly | None = None, M: int = 256):
    """Period of ``1 + sin^2`` by quadrature and the return of its flow to the identity."""
    from .flows import flow_period, integrate_flow

    g = TrigPoly(Fraction(3, 2), [0, Fraction(-1, 2)]) if g is None else g
    Pi = flow_period(g)
    returns = [integrate_flow(g, j * Pi, M).distance_to_identity() for j in (1, 2, 3)]
    return Pi, returns
