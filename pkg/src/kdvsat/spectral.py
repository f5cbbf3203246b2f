"""Truncated Fourier states and split-step evolution of the controlled equation

    d/dt psi + psi_xxx - i alpha psi_xx = i (u . Q) psi      on the circle.

Coefficients use the unitary normalization ``u_hat(k) = (2 pi)^(-1/2) int psi e^{-ikx}``
so the L2 norm is the plain Euclidean norm of the coefficient vector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NotInSpan, TruncationLoss
from .trig import TrigPoly, echelon_basis, h0_basis, span_contains

log = logging.getLogger(__name__)

SQRT2PI = math.sqrt(2 * math.pi)


def grid_size(K: int, oversample: int = 4) -> int:
    """Smallest power of two with at least ``oversample * (K + 1)`` points."""
    need = max(8, oversample * (K + 1))
    return 1 << (need - 1).bit_length()


def grid_points(M: int) -> np.ndarray:
    return 2 * np.pi * np.arange(M) / M


def coeffs_to_grid(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Values ``psi(x_j)`` on ``M`` uniform nodes from coefficients ``k = -K..K``."""
    K = (len(coeffs) - 1) // 2
    if M < 2 * K + 1:
        raise ValueError(f"grid of {M} points cannot hold K={K}")
    arr = np.zeros(M, dtype=complex)
    arr[: K + 1] = coeffs[K:]
    if K:
        arr[M - K:] = coeffs[:K]
    return np.fft.ifft(arr) * (M / SQRT2PI)


def grid_to_coeffs(values: np.ndarray, K: int) -> tuple[np.ndarray, float]:
    """Coefficients ``k = -K..K`` from grid values, plus the discarded mass."""
    M = len(values)
    F = np.fft.fft(values) * (SQRT2PI / M)
    out = np.concatenate([F[M - K:], F[: K + 1]]) if K else F[:1].copy()
    tail = float(np.sum(np.abs(F[K + 1: M - K]) ** 2))
    return out, tail


@dataclass(frozen=True)
class SpectralState:
    """Fourier coefficients ``coeffs[k + K]`` of a state, with bookkeeping.

    ``tail`` accumulates the spectral mass discarded by truncations that
    produced this state; it is what separates the computed norm from the
    exact one.
    """

    coeffs: np.ndarray
    K: int
    alpha: float = 0.0
    tail: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.K + 1,):
            raise ValueError(f"expected {2 * self.K + 1} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    # constructors
    @classmethod
    def zeros(cls, K: int, alpha: float = 0.0):
        return cls(np.zeros(2 * K + 1, dtype=complex), K, alpha)

    @classmethod
    def mode(cls, K: int, m: int = 0, alpha: float = 0.0, amplitude: complex = 1.0):
        """``amplitude * e^{imx} / sqrt(2 pi)``; unit norm for unit amplitude."""
        c = np.zeros(2 * K + 1, dtype=complex)
        c[m + K] = amplitude
        return cls(c, K, alpha)

    @classmethod
    def from_function(cls, f, K: int, alpha: float = 0.0, M: int | None = None):
        M = M or grid_size(K, 8)
        c, _ = grid_to_coeffs(np.asarray(f(grid_points(M)), dtype=complex), K)
        return cls(c, K, alpha)

    def with_coeffs(self, coeffs, tail_added: float = 0.0) -> "SpectralState":
        return replace(self, coeffs=np.asarray(coeffs, dtype=complex), tail=self.tail + tail_added)

    def normalized(self) -> "SpectralState":
        return self.with_coeffs(self.coeffs / self.norm())

    def resized(self, K: int) -> "SpectralState":
        """Zero-pad or truncate to a new cutoff; truncated mass goes into ``tail``."""
        if K == self.K:
            return self
        c = np.zeros(2 * K + 1, dtype=complex)
        lo = min(K, self.K)
        c[K - lo: K + lo + 1] = self.coeffs[self.K - lo: self.K + lo + 1]
        lost = max(0.0, float(np.sum(np.abs(self.coeffs) ** 2) - np.sum(np.abs(c) ** 2)))
        return SpectralState(c, K, self.alpha, self.tail + lost)

    # norms and values
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def sobolev_norm(self, s: float) -> float:
        return sobolev_norm(self, s)

    def grid_values(self, M: int | None = None) -> np.ndarray:
        return coeffs_to_grid(self.coeffs, M or grid_size(self.K))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(1j * np.multiply.outer(x, self.k)) @ self.coeffs / SQRT2PI

    def distance(self, other: "SpectralState") -> float:
        """L2 distance, padding the smaller cutoff with zeros."""
        K = max(self.K, other.K)
        return float(np.linalg.norm(self.resized(K).coeffs - other.resized(K).coeffs))

    # serialization
    def to_json(self) -> dict:
        return {"K": self.K, "alpha": float(self.alpha), "re": [float(v) for v in self.coeffs.real],
                "im": [float(v) for v in self.coeffs.imag]}

    @classmethod
    def from_json(cls, obj: dict) -> "SpectralState":
        K = int(obj["K"])
        c = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return cls(c, K, float(obj.get("alpha", 0.0)))


def sobolev_norm(state: SpectralState, s: float) -> float:
    """``(sum_k (1 + k^2)^s |u_hat(k)|^2)^(1/2)``."""
    w = (1.0 + state.k.astype(float) ** 2) ** s
    return float(np.sqrt(np.sum(w * np.abs(state.coeffs) ** 2)))


class ControlProfileSet:
    """Control profiles ``Q_0..Q_{q-1}``; their span must contain 1, cos x, sin x, cos 2x, sin 2x."""

    def __init__(self, profiles):
        self.profiles = tuple(profiles)
        if not self.profiles:
            raise ValueError("empty profile set")
        missing = [p for p in h0_basis(3) if not span_contains(self.profiles, p)]
        if missing:
            raise ValueError(f"profiles do not span {missing}")
        self.N = max(p.N for p in self.profiles)
        self._mat = np.array([[float(c) for c in p.vector(self.N)] for p in self.profiles]).T
        self._grid_cache: dict[int, np.ndarray] = {}

    @classmethod
    def standard(cls, N: int = 2) -> "ControlProfileSet":
        """``1, cos x, sin x, ..., cos Nx, sin Nx``."""
        return cls(h0_basis(N + 1))

    def __len__(self):
        return len(self.profiles)

    @property
    def q(self) -> int:
        return len(self.profiles)

    def on_grid(self, M: int) -> np.ndarray:
        if M not in self._grid_cache:
            x = grid_points(M)
            self._grid_cache[M] = np.array([p(x) for p in self.profiles])
        return self._grid_cache[M]

    def combine(self, u) -> TrigPoly:
        """``u . Q`` as a TrigPoly."""
        out = TrigPoly(0)
        for c, p in zip(u, self.profiles):
            if c:
                out = out + p * float(c)
        return out

    def contains(self, theta: TrigPoly) -> bool:
        return theta.N <= self.N and span_contains(echelon_basis(self.profiles), theta)

    def solve(self, theta: TrigPoly, tol: float = 1e-12) -> np.ndarray:
        """Weights ``w`` with ``w . Q = theta`` (least squares, residual checked)."""
        if theta.N > self.N:
            raise NotInSpan(f"frequency {theta.N} exceeds profile frequency {self.N}")
        b = np.array([float(c) for c in theta.vector(self.N)])
        w, *_ = np.linalg.lstsq(self._mat, b, rcond=None)
        res = float(np.linalg.norm(self._mat @ w - b))
        if res > tol * max(1.0, float(np.linalg.norm(b))):
            raise NotInSpan(f"target not in span of controls (residual {res:.2e})")
        return w

    def to_json(self) -> list:
        return [p.to_json() for p in self.profiles]

    @classmethod
    def from_json(cls, obj) -> "ControlProfileSet":
        return cls([TrigPoly.from_json(p) for p in obj])


@dataclass(frozen=True)
class Segment:
    tau: float
    u: tuple
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"segment duration must be finite and positive, got {self.tau}")
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))

    def is_free(self) -> bool:
        return not any(self.u)


@dataclass
class ControlProgram:
    """Piecewise-constant control: segments applied in list order."""

    q: int
    segments: list = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return math.fsum(s.tau for s in self.segments)

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def then(self, other: "ControlProgram") -> "ControlProgram":
        """Concatenation: ``self`` runs first, then ``other``."""
        if other.q != self.q:
            raise ValueError("control dimension mismatch")
        return ControlProgram(self.q, self.segments + other.segments)

    def append(self, tau: float, u, label: str = ""):
        self.segments.append(Segment(float(tau), tuple(u), label))

    def relabel(self, prefix: str) -> "ControlProgram":
        return ControlProgram(self.q, [replace(s, label=f"{prefix}/{s.label}" if s.label else prefix)
                                       for s in self.segments])

    def to_json(self) -> dict:
        return {"q": self.q, "segments": [{"tau": s.tau, "u": list(s.u), "label": s.label}
                                          for s in self.segments]}

    @classmethod
    def from_json(cls, obj: dict) -> "ControlProgram":
        q = int(obj["q"])
        segs = []
        for s in obj.get("segments", []):
            if len(s["u"]) != q:
                raise ValueError(f"segment control has length {len(s['u'])}, expected {q}")
            segs.append(Segment(float(s["tau"]), tuple(s["u"]), s.get("label", "")))
        return cls(q, segs)


def concat(*programs: ControlProgram) -> ControlProgram:
    out = ControlProgram(programs[0].q, [])
    for p in programs:
        out = out.then(p)
    return out


@dataclass(frozen=True)
class SolverConfig:
    """Step policy and numerical tolerances.

    ``dt_rate`` is the number of Strang steps per unit time; each segment
    takes ``max(1, ceil(dt_rate * tau))`` steps.  ``max_phase_step`` optionally
    adds steps so that a single phase factor never exceeds that many radians.
    """

    dt_rate: float = 1e4
    oversample: int = 4
    tail_tol: float | None = 1e-8
    min_duration: float = 1e-15
    max_phase_step: float | None = None

    def steps_for(self, tau: float, phase_sup: float = 0.0) -> int:
        steps = max(1, math.ceil(self.dt_rate * tau))
        if self.max_phase_step and phase_sup > 0:
            steps = max(steps, math.ceil(phase_sup * tau / self.max_phase_step))
        return steps


DEFAULT_CONFIG = SolverConfig()


def dispersion_symbol(K: int, alpha: float) -> np.ndarray:
    """``k^3 - alpha k^2`` for ``k = -K..K``; the free generator is ``i`` times this."""
    k = np.arange(-K, K + 1, dtype=float)
    return k ** 3 - alpha * k ** 2


def free_flow(state: SpectralState, t: float) -> SpectralState:
    """Exact free evolution ``e^{tL}``: ``u_hat(k) *= exp(i t (k^3 - alpha k^2))``."""
    if t == 0:
        return state
    return state.with_coeffs(state.coeffs * np.exp(1j * t * dispersion_symbol(state.K, state.alpha)))


def translate(state: SpectralState, delta: float) -> SpectralState:
    """``psi(x) -> psi(x + delta)``."""
    return state.with_coeffs(state.coeffs * np.exp(1j * delta * state.k))


def heat_regularize(state: SpectralState, tau: float) -> SpectralState:
    """Smoothing ``u_hat(k) *= exp(-tau^(1/4) k^2)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return state.with_coeffs(state.coeffs * np.exp(-tau ** 0.25 * state.k.astype(float) ** 2))


def _apply_grid_phase(state: SpectralState, phase: np.ndarray, tail_tol, where="") -> SpectralState:
    M = len(phase)
    vals = coeffs_to_grid(state.coeffs, M) * np.exp(1j * phase)
    c, tail = grid_to_coeffs(vals, state.K)
    if tail_tol is not None and tail > tail_tol:
        raise TruncationLoss(tail, tail_tol, where)
    return state.with_coeffs(c, tail)


def phase_multiply(state: SpectralState, theta, M: int | None = None,
                   config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """Multiply by ``exp(i theta(x))`` on an oversampled grid and truncate back.

    ``theta`` is a TrigPoly or a callable on grid points.
    """
    M = M or grid_size(state.K, config.oversample)
    x = grid_points(M)
    phase = theta(x)
    return _apply_grid_phase(state, np.asarray(phase, dtype=float), config.tail_tol, "phase_multiply")


def evolve_constant(state: SpectralState, u, Q: ControlProfileSet, T: float, steps: int | None = None,
                    config: SolverConfig = DEFAULT_CONFIG) -> SpectralState:
    """One constant-control segment by Strang splitting.

    ``[e^{dt L/2} e^{i dt u.Q} e^{dt L/2}]^steps`` with adjacent half steps of the
    free flow merged.  A zero control is a single exact free flow.
    """
    u = np.asarray(u, dtype=float)
    if len(u) != Q.q:
        raise ValueError(f"control has length {len(u)}, expected {Q.q}")
    if T == 0:
        return state
    if not np.any(u):
        return free_flow(state, T)
    M = grid_size(state.K, config.oversample)
    v = u @ Q.on_grid(M)
    if steps is None:
        steps = config.steps_for(T, float(np.max(np.abs(v))))
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = T / steps
    sym = dispersion_symbol(state.K, state.alpha)
    half = np.exp(0.5j * dt * sym)
    full = half * half
    phase = np.exp(1j * dt * v)
    c = state.coeffs * half
    tail = 0.0
    for j in range(steps):
        vals = coeffs_to_grid(c, M) * phase
        c, lost = grid_to_coeffs(vals, state.K)
        tail += lost
        c = c * (full if j < steps - 1 else half)
    if config.tail_tol is not None and tail > config.tail_tol:
        raise TruncationLoss(tail, config.tail_tol, "evolve_constant")
    return state.with_coeffs(c, tail)


@dataclass
class TraceRow:
    segment: int
    t_end: float
    l2_norm: float
    h1_norm: float
    tail_mass: float

    FIELDS = ("segment", "t_end", "l2_norm", "h1_norm", "tail_mass")


def evolve_program(state: SpectralState, program: ControlProgram, Q: ControlProfileSet,
                   config: SolverConfig = DEFAULT_CONFIG, trace: bool = False):
    """Run a program segment by segment; returns ``(state, rows)``.

    ``rows`` is a list of :class:`TraceRow` when ``trace`` is set, else empty.
    Segments shorter than ``config.min_duration`` are skipped.
    """
    if program.q != Q.q:
        raise ValueError(f"program has q={program.q} but profile set has {Q.q}")
    rows = []
    t = 0.0
    dropped = 0
    for i, seg in enumerate(program.segments):
        if seg.tau < config.min_duration:
            dropped += 1
            continue
        before = state.tail
        state = evolve_constant(state, seg.u, Q, seg.tau, config=config)
        t += seg.tau
        if trace:
            rows.append(TraceRow(i, t, state.norm(), sobolev_norm(state, 1.0), state.tail - before))
    if dropped:
        log.warning("dropped %d segment(s) shorter than %.1e", dropped, config.min_duration)
    return state, rows
