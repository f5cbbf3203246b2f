"""Circle diffeomorphisms, their unitary action on states, and transport flows.

A transport generator ``T_f = f d/dx + f'/2`` acts through the flow ``P`` of the
field ``f`` as ``psi -> sqrt(P') * psi(P)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonDiffeo, NotPositive, TruncationLoss
from .spectral import (DEFAULT_CONFIG, SQRT2PI, SolverConfig, SpectralState, grid_points, grid_size,
                       grid_to_coeffs, translate)
from .trig import TrigPoly

__all__ = ["FlowMap", "integrate_flow", "diffeo_apply", "transport_apply", "translate", "flow_period",
           "default_dt_ode"]


@dataclass(frozen=True)
class FlowMap:
    """Lifted values ``P(x_j)`` and derivatives ``P'(x_j)`` on ``M`` uniform nodes."""

    M: int
    P: np.ndarray
    dP: np.ndarray
    field: TrigPoly | None = None
    time: float | None = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        dP = np.asarray(self.dP, dtype=float)
        if P.shape != (self.M,) or dP.shape != (self.M,):
            raise ValueError("FlowMap arrays must have length M")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "dP", dP)

    def validate(self):
        if not np.all(self.dP > 0):
            raise NonDiffeo(f"P' <= 0 at {int(np.sum(self.dP <= 0))} node(s)")
        lifted = np.append(self.P, self.P[0] + 2 * np.pi)
        if not np.all(np.diff(lifted) > 0):
            raise NonDiffeo("lifted map is not strictly increasing")
        return self

    @classmethod
    def identity(cls, M: int) -> "FlowMap":
        return cls(M, grid_points(M), np.ones(M))

    @property
    def x(self) -> np.ndarray:
        return grid_points(self.M)

    def displacement(self) -> np.ndarray:
        """``P(x) - x`` reduced to ``(-pi, pi]``."""
        d = self.P - self.x
        return d - 2 * np.pi * np.round(d / (2 * np.pi))

    def distance_to_identity(self) -> float:
        return float(max(np.max(np.abs(self.displacement())), np.max(np.abs(self.dP - 1))))

    def to_json(self) -> dict:
        return {"M": self.M, "P": [float(v) for v in self.P], "dP": [float(v) for v in self.dP]}

    @classmethod
    def from_json(cls, obj: dict) -> "FlowMap":
        return cls(int(obj["M"]), obj["P"], obj["dP"]).validate()


def default_dt_ode(f: TrigPoly) -> float:
    return 0.01 / (1.0 + f.derivative().sup_bound())


def integrate_flow(f: TrigPoly, t: float, M: int = 256, dt_ode: float | None = None) -> FlowMap:
    """RK4 for ``dP/dt = f(P)``, ``dP'/dt = f'(P) P'`` from the identity.

    Negative ``t`` integrates backwards.
    """
    if M < 8:
        raise ValueError("need at least 8 nodes")
    dt_ode = default_dt_ode(f) if dt_ode is None else dt_ode
    if not dt_ode > 0:
        raise ValueError("dt_ode must be positive")
    fp = f.derivative()
    P = grid_points(M).copy()
    D = np.ones(M)
    steps = max(1, math.ceil(abs(t) / dt_ode)) if t else 0
    h = t / steps if steps else 0.0

    def rhs(P, D):
        return f(P), fp(P) * D

    for _ in range(steps):
        k1p, k1d = rhs(P, D)
        k2p, k2d = rhs(P + 0.5 * h * k1p, D + 0.5 * h * k1d)
        k3p, k3d = rhs(P + 0.5 * h * k2p, D + 0.5 * h * k2d)
        k4p, k4d = rhs(P + h * k3p, D + h * k3d)
        P = P + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        D = D + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
    return FlowMap(M, P, D, f, t).validate()


def _eval_at(state: SpectralState, pts: np.ndarray, chunk: int = 512) -> np.ndarray:
    # direct trigonometric summation, chunked to bound memory
    out = np.empty(len(pts), dtype=complex)
    k = state.k
    for i in range(0, len(pts), chunk):
        out[i:i + chunk] = np.exp(1j * np.multiply.outer(pts[i:i + chunk], k)) @ state.coeffs
    return out / SQRT2PI


def diffeo_apply(state: SpectralState, P: FlowMap, config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """``(U_P psi)(x) = sqrt(P'(x)) psi(P(x))`` sampled on the nodes of ``P``."""
    P.validate()
    if P.M < 2 * state.K + 1:
        raise ValueError(f"flow grid of {P.M} nodes too coarse for K={state.K}")
    vals = np.sqrt(P.dP) * _eval_at(state, P.P)
    c, tail = grid_to_coeffs(vals, state.K)
    if config.tail_tol is not None and tail > config.tail_tol:
        raise TruncationLoss(tail, config.tail_tol, "diffeo_apply")
    return state.with_coeffs(c, tail)


def transport_apply(state: SpectralState, f: TrigPoly, t: float, M: int | None = None,
                    dt_ode: float | None = None, config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """``exp(t T_f) psi`` through the characteristics of ``f``."""
    if t == 0 or f.is_zero():
        return state
    M = M or grid_size(state.K, config.oversample)
    return diffeo_apply(state, integrate_flow(f, t, M, dt_ode), config)


def certify_positive(g: TrigPoly, nodes: int = 8192) -> float:
    """Certified lower bound on ``min g`` from samples and a derivative bound.

    Raises NotPositive when the bound is not positive.
    """
    x = grid_points(nodes)
    vals = g(x)
    lower = float(np.min(vals)) - g.derivative().sup_bound() * (np.pi / nodes)
    if lower <= 0:
        raise NotPositive(f"cannot certify g > 0 (sampled min {np.min(vals):.3e}, certified bound {lower:.3e})")
    return lower


def flow_period(g: TrigPoly, nodes: int = 8192) -> float:
    """Return time ``int_0^{2 pi} dx / g`` of the flow of a positive field.

    Trapezoidal rule on a periodic analytic integrand, so convergence is
    geometric in ``nodes``.
    """
    certify_positive(g, nodes)
    x = grid_points(nodes)
    return float(2 * np.pi * np.mean(1.0 / g(x)))
