"""Exact algebra of real trigonometric polynomials and vector fields on the circle.

Coefficients are kept as :class:`fractions.Fraction` whenever the inputs are
integers or fractions, so closure runs and certificates are exact.  Floats are
accepted too (phases scaled by cube roots are irrational); mixing the two
silently falls back to floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

COS = "cos"
SIN = "sin"


def _coerce(c):
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("boolean coefficient")
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (float, np.floating)):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _exact(c):
    return c if isinstance(c, Fraction) else Fraction(c)


class TrigPoly:
    """``a0 + sum_m a_m cos(m x) + b_m sin(m x)`` in canonical (trimmed) form."""

    __slots__ = ("a0", "cos", "sin")

    def __init__(self, a0=0, cos=(), sin=()):
        cos = [_coerce(c) for c in cos]
        sin = [_coerce(c) for c in sin]
        n = max(len(cos), len(sin))
        cos += [Fraction(0)] * (n - len(cos))
        sin += [Fraction(0)] * (n - len(sin))
        while n and cos[n - 1] == 0 and sin[n - 1] == 0:
            n -= 1
        self.a0 = _coerce(a0)
        self.cos = tuple(cos[:n])
        self.sin = tuple(sin[:n])

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c=1):
        return cls(c)

    @classmethod
    def mode(cls, m: int, parity: str = COS, c=1) -> "TrigPoly":
        if m < 0:
            raise ValueError("frequency must be non-negative")
        if m == 0:
            if parity != COS:
                raise ValueError("sin(0x) is identically zero")
            return cls(c)
        coeffs = [0] * m
        coeffs[m - 1] = c
        return cls(0, coeffs, []) if parity == COS else cls(0, [], coeffs)

    @classmethod
    def from_vector(cls, vec) -> "TrigPoly":
        """Inverse of :meth:`vector`."""
        vec = list(vec)
        if len(vec) % 2 == 0:
            raise ValueError("coefficient vector must have odd length")
        return cls(vec[0], vec[1::2], vec[2::2])

    # -- basic accessors ----------------------------------------------------
    @property
    def N(self) -> int:
        return len(self.cos)

    def coeff(self, m: int, parity: str = COS):
        if m == 0:
            return self.a0 if parity == COS else Fraction(0)
        if m > self.N:
            return Fraction(0)
        return self.cos[m - 1] if parity == COS else self.sin[m - 1]

    def terms(self):
        """Yield ``(m, parity, coefficient)`` for every nonzero coefficient."""
        if self.a0 != 0:
            yield 0, COS, self.a0
        for m in range(1, self.N + 1):
            if self.cos[m - 1] != 0:
                yield m, COS, self.cos[m - 1]
            if self.sin[m - 1] != 0:
                yield m, SIN, self.sin[m - 1]

    def vector(self, W: int | None = None) -> list:
        """Coefficients ordered ``a0, a1, b1, a2, b2, ...`` up to frequency ``W``."""
        W = self.N if W is None else W
        if W < self.N:
            raise ValueError(f"frequency {self.N} exceeds window {W}")
        out = [self.a0]
        for m in range(1, W + 1):
            out += [self.coeff(m, COS), self.coeff(m, SIN)]
        return out

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in (self.a0, *self.cos, *self.sin))

    def is_zero(self) -> bool:
        return self.N == 0 and self.a0 == 0

    def to_exact(self) -> "TrigPoly":
        return TrigPoly(_exact(self.a0), [_exact(c) for c in self.cos], [_exact(c) for c in self.sin])

    def to_float(self) -> "TrigPoly":
        return TrigPoly(float(self.a0), [float(c) for c in self.cos], [float(c) for c in self.sin])

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly(other)
        n = max(self.N, other.N)
        return TrigPoly(
            self.a0 + other.a0,
            [self.coeff(m, COS) + other.coeff(m, COS) for m in range(1, n + 1)],
            [self.coeff(m, SIN) + other.coeff(m, SIN) for m in range(1, n + 1)],
        )

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self.a0, [-c for c in self.cos], [-c for c in self.sin])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "TrigPoly":
        c = _coerce(c)
        return TrigPoly(c * self.a0, [c * x for x in self.cos], [c * x for x in self.sin])

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = _coerce(c)
        return self.scale(1 / c)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = TrigPoly(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def derivative(self) -> "TrigPoly":
        return derivative(self)

    # -- comparison ---------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            if isinstance(other, (int, float, Fraction)):
                other = TrigPoly(other)
            else:
                return NotImplemented
        return self.a0 == other.a0 and self.cos == other.cos and self.sin == other.sin

    def __hash__(self):
        return hash((self.a0, self.cos, self.sin))

    def allclose(self, other: "TrigPoly", atol: float = 1e-12) -> bool:
        n = max(self.N, other.N)
        a = np.array([float(c) for c in self.vector(n)])
        b = np.array([float(c) for c in other.vector(n)])
        return bool(np.all(np.abs(a - b) <= atol))

    # -- numerics -----------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, float(self.a0))
        for m in range(1, self.N + 1):
            a, b = float(self.cos[m - 1]), float(self.sin[m - 1])
            if a:
                out += a * np.cos(m * x)
            if b:
                out += b * np.sin(m * x)
        return out

    def complex_coefficients(self, K: int | None = None) -> np.ndarray:
        """Array ``c[k + K]`` with ``p(x) = sum_k c_k exp(i k x)`` for ``|k| <= K``."""
        K = self.N if K is None else K
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K] = float(self.a0)
        for m in range(1, min(self.N, K) + 1):
            a, b = float(self.cos[m - 1]), float(self.sin[m - 1])
            c[K + m] = (a - 1j * b) / 2
            c[K - m] = (a + 1j * b) / 2
        return c

    def sup_bound(self) -> float:
        """Upper bound on ``max |p|`` from the coefficient 1-norm."""
        return abs(float(self.a0)) + sum(abs(float(a)) + abs(float(b)) for a, b in zip(self.cos, self.sin))

    def __repr__(self):
        if self.is_zero():
            return "TrigPoly(0)"
        parts = []
        for m, par, c in self.terms():
            cs = str(c) if isinstance(c, Fraction) else f"{c:.6g}"
            parts.append(cs if m == 0 else f"{cs}*{par}({m}x)" if m > 1 else f"{cs}*{par}(x)")
        return "TrigPoly(" + " + ".join(parts) + ")"

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {"a0": num_to_json(self.a0), "cos": [num_to_json(c) for c in self.cos],
                "sin": [num_to_json(c) for c in self.sin]}

    @classmethod
    def from_json(cls, obj: dict) -> "TrigPoly":
        return cls(num_from_json(obj.get("a0", 0)), [num_from_json(c) for c in obj.get("cos", [])],
                   [num_from_json(c) for c in obj.get("sin", [])])


def num_to_json(c):
    if isinstance(c, Fraction):
        return {"num": c.numerator, "den": c.denominator}
    return float(c)


def num_from_json(obj):
    if isinstance(obj, dict):
        return Fraction(int(obj["num"]), int(obj["den"]))
    if isinstance(obj, int):
        return Fraction(obj)
    return float(obj)


ZERO = TrigPoly(0)
ONE = TrigPoly(1)


def derivative(p: TrigPoly) -> TrigPoly:
    """Term-wise derivative; the constant term drops out."""
    return TrigPoly(
        0,
        [m * p.sin[m - 1] for m in range(1, p.N + 1)],
        [-m * p.cos[m - 1] for m in range(1, p.N + 1)],
    )


def multiply(p: TrigPoly, q: TrigPoly) -> TrigPoly:
    """Exact product via product-to-sum identities."""
    A = [p.a0, *p.cos]
    B = [Fraction(0), *p.sin]
    C = [q.a0, *q.cos]
    D = [Fraction(0), *q.sin]
    N = p.N + q.N
    rc = [Fraction(0)] * (N + 1)
    rs = [Fraction(0)] * (N + 1)

    def add_sin(k, v):
        if k > 0:
            rs[k] += v
        elif k < 0:
            rs[-k] -= v

    for m, (am, bm) in enumerate(zip(A, B)):
        if am == 0 and bm == 0:
            continue
        for n, (cn, dn) in enumerate(zip(C, D)):
            if cn == 0 and dn == 0:
                continue
            s, d = m + n, m - n
            if am != 0 and cn != 0:
                v = am * cn / 2
                rc[s] += v
                rc[abs(d)] += v
            if bm != 0 and dn != 0:
                v = bm * dn / 2
                rc[abs(d)] += v
                rc[s] -= v
            if am != 0 and dn != 0:
                v = am * dn / 2
                rs[s] += v
                add_sin(-d, v)
            if bm != 0 and cn != 0:
                v = bm * cn / 2
                rs[s] += v
                add_sin(d, v)
    return TrigPoly(rc[0], rc[1:], rs[1:])


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VectorField:
    """The field ``coeff * d/dx`` on the circle."""

    coeff: TrigPoly

    def __add__(self, other):
        return VectorField(self.coeff + other.coeff)

    def __sub__(self, other):
        return VectorField(self.coeff - other.coeff)

    def scale(self, c):
        return VectorField(self.coeff * c)


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """``[f d/dx, g d/dx] = (f g' - g f') d/dx``."""
    f, g = X.coeff, Y.coeff
    return VectorField(f * g.derivative() - g * f.derivative())


# ---------------------------------------------------------------------------
# Linear algebra over exact coefficients
# ---------------------------------------------------------------------------


def _rref(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    rows = [r[:] for r in rows if any(c != 0 for c in r)]
    if not rows:
        return []
    ncol = len(rows[0])
    pivot_row = 0
    for col in range(ncol):
        sel = next((i for i in range(pivot_row, len(rows)) if rows[i][col] != 0), None)
        if sel is None:
            continue
        rows[pivot_row], rows[sel] = rows[sel], rows[pivot_row]
        pr = rows[pivot_row]
        inv = 1 / pr[col]
        pr = [c * inv for c in pr]
        rows[pivot_row] = pr
        for i, r in enumerate(rows):
            if i != pivot_row and r[col] != 0:
                f = r[col]
                rows[i] = [a - f * b for a, b in zip(r, pr)]
        pivot_row += 1
        if pivot_row == len(rows):
            break
    return rows[:pivot_row]


def echelon_basis(polys, W: int | None = None) -> list[TrigPoly]:
    """Reduced echelon basis of ``span(polys)`` in exact arithmetic.

    Coordinates are ordered by frequency and then parity (cos before sin), so
    the returned basis is canonical: a space containing every mode up to some
    frequency comes back as the pure modes themselves.
    """
    polys = [p.to_exact() for p in polys]
    if W is None:
        W = max((p.N for p in polys), default=0)
    rows = _rref([p.vector(W) for p in polys])
    return [TrigPoly.from_vector(r) for r in rows]


def span_contains(basis, p: TrigPoly) -> bool:
    W = max([p.N] + [b.N for b in basis])
    return len(_rref([b.to_exact().vector(W) for b in basis] + [p.to_exact().vector(W)])) == len(
        _rref([b.to_exact().vector(W) for b in basis]))


def h0_basis(n: int = 3) -> list[TrigPoly]:
    """Generators ``1, cos x, sin x, ..., cos((n-1)x), sin((n-1)x)``.

    Index ``0`` is the constant, ``2m-1`` is ``cos(mx)`` and ``2m`` is ``sin(mx)``.
    """
    out = [ONE]
    for m in range(1, n):
        out += [TrigPoly.mode(m, COS), TrigPoly.mode(m, SIN)]
    return out


def _check_odd(n):
    if not isinstance(n, int) or n < 3 or n % 2 == 0:
        raise ValueError(f"power must be an odd integer >= 3, got {n!r}")


# ---------------------------------------------------------------------------
# Saturation: polarization and the F_n step
# ---------------------------------------------------------------------------


def polarized_product(f_list, n: int):
    """Product of derivatives together with its odd-power polarization.

    Returns ``(prod, expansion)`` where ``prod = f_1' ... f_n'`` and
    ``expansion`` lists ``(sign, subset, ((sum_{j in subset} f_j)')**n)`` for all
    ``2**n`` subsets; ``sum(sign * power) == n! * prod`` is checked before
    returning.
    """
    _check_odd(n)
    f_list = list(f_list)
    if len(f_list) != n:
        raise ValueError(f"need exactly {n} functions, got {len(f_list)}")
    prod = ONE
    for f in f_list:
        prod = prod * f.derivative()
    expansion = []
    total = ZERO
    for eps in itertools.product((0, 1), repeat=n):
        subset = tuple(j for j, e in enumerate(eps) if e)
        sign = (-1) ** (n - len(subset))
        s = ZERO
        for j in subset:
            s = s + f_list[j]
        power = s.derivative() ** n
        expansion.append((sign, subset, power))
        total = total + power * sign
    expected = prod * math.factorial(n)
    ok = total == expected if (total.is_exact and expected.is_exact) else total.allclose(expected, 1e-9)
    if not ok:
        raise ArithmeticError("polarization identity failed")
    return prod, expansion


def fn_step(generators, n: int = 3, window: int | None = None) -> list[TrigPoly]:
    """Basis of ``F_n(span(generators)) = span + span{(phi')**n}``.

    The n-th power span is generated by all products of ``n`` derivatives of
    basis elements (with repetition), which is the polarization argument made
    finite.  Products whose frequency could exceed ``window`` are skipped.
    """
    _check_odd(n)
    basis = echelon_basis(generators)
    top = max((b.N for b in basis), default=0)
    window = n * top if window is None else max(window, top)
    derivs = [b.derivative() for b in basis]
    derivs = [d for d in derivs if not d.is_zero()]
    cands = list(basis)
    for combo in itertools.combinations_with_replacement(range(len(derivs)), n):
        if sum(derivs[i].N for i in combo) > window:
            continue
        prod = ONE
        for i in combo:
            prod = prod * derivs[i]
        if prod.N <= window and not prod.is_zero():
            cands.append(prod)
    return echelon_basis(cands, window)


def saturation_closure(H0=None, n: int = 3, window: int = 16, max_steps: int = 20):
    """Iterate :func:`fn_step` from ``H0``; return the list of bases ``H_0, H_1, ...``.

    Stops once the dimension stalls or every mode up to ``window`` is present.
    """
    H = echelon_basis(h0_basis(n) if H0 is None else H0)
    out = [H]
    full = 2 * window + 1
    for _ in range(max_steps):
        if len(H) >= full:
            break
        nxt = fn_step(H, n, window)
        if len(nxt) == len(H):
            break
        H = nxt
        out.append(H)
    return out


# ---------------------------------------------------------------------------
# Saturation certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Basis:
    index: int


@dataclass(frozen=True, eq=False)
class LinComb:
    terms: tuple  # ((coefficient, node), ...)


@dataclass(frozen=True, eq=False)
class CubedDerivative:
    """``(child')**n``; ``n`` is 3 except for general odd-power closure runs."""

    child: object
    n: int = 3


def evaluate(cert, generators, memo=None) -> TrigPoly:
    """Value of a certificate over the declared generating set."""
    memo = {} if memo is None else memo
    key = id(cert)
    if key in memo:
        return memo[key]
    if isinstance(cert, Basis):
        val = generators[cert.index]
    elif isinstance(cert, LinComb):
        val = ZERO
        for c, node in cert.terms:
            val = val + evaluate(node, generators, memo) * c
    elif isinstance(cert, CubedDerivative):
        val = evaluate(cert.child, generators, memo).derivative() ** cert.n
    else:
        raise TypeError(f"not a certificate node: {cert!r}")
    memo[key] = val
    return val


def cert_depth(cert, memo=None) -> int:
    memo = {} if memo is None else memo
    key = id(cert)
    if key not in memo:
        if isinstance(cert, Basis):
            memo[key] = 0
        elif isinstance(cert, LinComb):
            memo[key] = max((cert_depth(n, memo) for _, n in cert.terms), default=0)
        else:
            memo[key] = 1 + cert_depth(cert.child, memo)
    return memo[key]


def cert_stats(cert) -> dict:
    """Distinct node count, expanded tree size and largest |coefficient|."""
    seen = {}
    size = {}
    big = [0.0]

    def walk(node):
        key = id(node)
        if key in size:
            return size[key]
        seen[key] = node
        if isinstance(node, Basis):
            s = 1
        elif isinstance(node, LinComb):
            s = 1
            for c, ch in node.terms:
                big[0] = max(big[0], abs(float(c)))
                s += walk(ch)
        else:
            s = 1 + walk(node.child)
        size[key] = s
        return s

    total = walk(cert)
    return {"distinct_nodes": len(seen), "tree_size": total, "max_coeff": big[0], "depth": cert_depth(cert)}


def _lc(*terms):
    return LinComb(tuple((Fraction(c) if isinstance(c, int) else c, node) for c, node in terms if c != 0))


@lru_cache(maxsize=None)
def _mode_cert(N: int, parity: str, n: int):
    if N <= n - 1:
        if N == 0:
            return Basis(0)
        return Basis(2 * N - 1 if parity == COS else 2 * N)
    gens = h0_basis(n)
    m0 = N - (n - 1)
    # f' = cos(m0 x) for the cos target, f' = sin(m0 x) for the sin target.
    if parity == COS:
        f = _lc((Fraction(1, m0), _mode_cert(m0, SIN, n)))
    else:
        f = _lc((Fraction(-1, m0), _mode_cert(m0, COS, n)))
    g = Basis(2)  # sin x, so g' = cos x
    # f' (g')^(n-1) = (1/n!) sum_eps (-1)^(n-|eps|) (eps_1 f + r g)'^n, grouped by r.
    terms = []
    for e1 in (0, 1):
        for r in range(n):
            if e1 == 0 and r == 0:
                continue
            w = Fraction((-1) ** (n - e1 - r) * math.comb(n - 1, r), math.factorial(n))
            inner = f if r == 0 else (Basis(2) if e1 == 0 and r == 1 else _lc((e1, f), (r, g)))
            terms.append((w, CubedDerivative(inner, n)))
    prod_cert = LinComb(tuple(terms))
    prod = evaluate(prod_cert, gens)
    top = prod.coeff(N, parity)
    if top == 0 or prod.N != N:
        raise ArithmeticError(f"no top mode while certifying {parity}({N}x)")
    out = [(1 / top, prod_cert)]
    for m, par, c in prod.terms():
        if (m, par) == (N, parity):
            continue
        out.append((-c / top, _mode_cert(m, par, n)))
    cert = LinComb(tuple(out))
    if evaluate(cert, gens) != TrigPoly.mode(N, parity):
        raise ArithmeticError(f"certificate for {parity}({N}x) does not evaluate to the mode")
    return cert


def mode_certificate(N: int, parity: str = COS, n: int = 3):
    """Certificate over ``h0_basis(n)`` whose value is exactly ``cos(Nx)`` / ``sin(Nx)``.

    Follows the induction: with ``m0 = N - (n-1)``, the product
    ``cos(m0 x) cos(x)**(n-1)`` is a combination of n-th powers of derivatives,
    its top mode is ``cos(Nx)`` and everything below is certified already.
    Lower-mode certificates are memoized and shared.
    """
    _check_odd(n)
    if parity not in (COS, SIN):
        raise ValueError("parity must be 'cos' or 'sin'")
    return _mode_cert(int(N), parity, n)


def poly_certificate(p: TrigPoly, n: int = 3):
    """Certificate for an arbitrary trigonometric polynomial (linear assembly of modes)."""
    p = p.to_exact()
    terms = [(c, mode_certificate(m, par, n)) for m, par, c in p.terms()]
    return LinComb(tuple(terms))


# ---------------------------------------------------------------------------
# Bracket expressions over G = {(phi')^2}
# ---------------------------------------------------------------------------


class Gen:
    """Generator leaf ``(phi')**2 d/dx``; the generating phase is kept for checking."""

    __slots__ = ("phi", "field")

    def __init__(self, phi: TrigPoly):
        self.phi = phi
        self.field = phi.derivative() ** 2

    def verify(self) -> bool:
        return self.field == self.phi.derivative() ** 2

    def scaled(self, lam):
        """``|lam| (phi')**2`` as a generator of ``sqrt(|lam|) phi``."""
        return Gen(self.phi * math.sqrt(abs(float(lam))))

    def __repr__(self):
        return f"Gen(phi={self.phi!r})"


@dataclass(frozen=True, eq=False)
class Lin:
    terms: tuple  # ((coefficient, expr), ...)


@dataclass(frozen=True, eq=False)
class Bracket:
    left: object
    right: object


def evaluate_bracket(expr, memo=None) -> VectorField:
    memo = {} if memo is None else memo
    key = id(expr)
    if key in memo:
        return memo[key]
    if isinstance(expr, Gen):
        if not expr.verify():
            raise ArithmeticError("generator field is not (phi')^2")
        val = VectorField(expr.field)
    elif isinstance(expr, Lin):
        acc = ZERO
        for c, e in expr.terms:
            acc = acc + evaluate_bracket(e, memo).coeff * c
        val = VectorField(acc)
    elif isinstance(expr, Bracket):
        val = lie_bracket(evaluate_bracket(expr.left, memo), evaluate_bracket(expr.right, memo))
    else:
        raise TypeError(f"not a bracket expression: {expr!r}")
    memo[key] = val
    return val


def _lin(*terms):
    return Lin(tuple((Fraction(c) if isinstance(c, int) else c, e) for c, e in terms if c != 0))


class _FieldModes:
    """Memo of bracket expressions for ``cos(mx) d/dx`` and ``sin(mx) d/dx``."""

    def __init__(self):
        s1 = TrigPoly.mode(1, SIN)
        c1 = TrigPoly.mode(1, COS)
        h = Fraction(1, 2)
        f1 = Gen(c1)  # sin^2 x
        f2 = Gen(s1)  # cos^2 x
        self.one = _lin((1, f1), (1, f2))
        modes = {(0, COS): self.one, (2, COS): _lin((1, f2), (-1, f1)), (2, SIN): _lin((-1, Bracket(f1, f2)))}
        fp = Gen(s1 + TrigPoly.mode(2, SIN, h))
        fm = Gen(s1 - TrigPoly.mode(2, SIN, h))
        g = _lin((h, fp), (-h, fm))  # cos x + cos 3x
        dg = Bracket(self.one, g)
        ddg = Bracket(self.one, dg)
        dddg = Bracket(self.one, ddg)
        modes[(1, COS)] = _lin((Fraction(9, 8), g), (Fraction(1, 8), ddg))
        modes[(1, SIN)] = _lin((Fraction(-9, 8), dg), (Fraction(-1, 8), dddg))
        self.modes = modes
        self.top = 2

    def get(self, m, parity):
        while self.top < m:
            k = self.top  # build k+1 from k and k-1
            s1 = self.modes[(1, SIN)]
            for par in (SIN, COS):
                br = Bracket(self.modes[(k, par)], s1)
                self.modes[(k + 1, par)] = _lin(
                    (Fraction(2, 1 - k), br), (Fraction(-(1 + k), 1 - k), self.modes[(k - 1, par)]))
            self.top += 1
        return self.modes[(m, parity)]


_FIELD_MODES = None


def vectorfield_certificate(p: TrigPoly):
    """Bracket expression over generators in G evaluating exactly to ``p d/dx``.

    Uses ``sin^2`` and ``cos^2`` for ``1, cos 2x, sin 2x``, the pair
    ``sin x +- sin(2x)/2`` and derivatives (brackets with ``d/dx``) for the
    first modes, then brackets with ``sin x d/dx`` to climb one frequency at a
    time.
    """
    global _FIELD_MODES
    if _FIELD_MODES is None:
        _FIELD_MODES = _FieldModes()
    fm = _FIELD_MODES
    p = p.to_exact()
    terms = [(c, fm.get(m, par)) for m, par, c in p.terms()]
    if len(terms) == 1 and terms[0][0] == 1:
        return terms[0][1]
    return Lin(tuple(terms))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _count_refs(root, children):
    counts = {}
    stack = [root]
    while stack:
        node = stack.pop()
        key = id(node)
        counts[key] = counts.get(key, 0) + 1
        if counts[key] == 1:
            stack.extend(children(node))
    return counts


def _cert_children(node):
    if isinstance(node, LinComb):
        return [n for _, n in node.terms]
    if isinstance(node, CubedDerivative):
        return [node.child]
    return []


def cert_to_json(cert) -> dict:
    """JSON tree; subtrees referenced more than once carry an ``id`` and later
    occurrences are written as ``{"kind": "ref", "id": ...}``."""
    counts = _count_refs(cert, _cert_children)
    ids = {}

    def enc(node):
        key = id(node)
        if key in ids:
            return {"kind": "ref", "id": ids[key]}
        if isinstance(node, Basis):
            out = {"kind": "basis", "index": node.index}
        elif isinstance(node, LinComb):
            out = {"kind": "lincomb", "terms": []}
            if counts[key] > 1:
                ids[key] = len(ids)
                out["id"] = ids[key]
            out["terms"] = [{"coef": num_to_json(c), "node": enc(n)} for c, n in node.terms]
            return out
        else:
            out = {"kind": "cubed"}
            if node.n != 3:
                out["n"] = node.n
            if counts[key] > 1:
                ids[key] = len(ids)
                out["id"] = ids[key]
            out["child"] = enc(node.child)
            return out
        if counts[key] > 1:
            ids[key] = len(ids)
            out["id"] = ids[key]
        return out

    return enc(cert)


def cert_from_json(obj):
    table = {}

    def dec(o):
        kind = o["kind"]
        if kind == "ref":
            return table[o["id"]]
        if kind == "basis":
            node = Basis(int(o["index"]))
        elif kind == "lincomb":
            node = LinComb(tuple((num_from_json(t["coef"]), dec(t["node"])) for t in o["terms"]))
        elif kind == "cubed":
            node = CubedDerivative(dec(o["child"]), int(o.get("n", 3)))
        else:
            raise ValueError(f"unknown certificate node kind {kind!r}")
        if "id" in o:
            table[o["id"]] = node
        return node

    return dec(obj)


def _bracket_children(node):
    if isinstance(node, Lin):
        return [e for _, e in node.terms]
    if isinstance(node, Bracket):
        return [node.left, node.right]
    return []


def bracket_to_json(expr) -> dict:
    counts = _count_refs(expr, _bracket_children)
    ids = {}

    def enc(node):
        key = id(node)
        if key in ids:
            return {"kind": "ref", "id": ids[key]}
        if counts[key] > 1:
            ids[key] = len(ids)
        if isinstance(node, Gen):
            out = {"kind": "gen", "phi": node.phi.to_json()}
        elif isinstance(node, Lin):
            out = {"kind": "lincomb", "terms": [{"coef": num_to_json(c), "node": enc(e)} for c, e in node.terms]}
        else:
            out = {"kind": "bracket", "left": enc(node.left), "right": enc(node.right)}
        if key in ids:
            out["id"] = ids[key]
        return out

    return enc(expr)


def bracket_from_json(obj):
    table = {}

    def dec(o):
        kind = o["kind"]
        if kind == "ref":
            return table[o["id"]]
        if kind == "gen":
            node = Gen(TrigPoly.from_json(o["phi"]))
        elif kind == "lincomb":
            node = Lin(tuple((num_from_json(t["coef"]), dec(t["node"])) for t in o["terms"]))
        elif kind == "bracket":
            node = Bracket(dec(o["left"]), dec(o["right"]))
        else:
            raise ValueError(f"unknown bracket node kind {kind!r}")
        if "id" in o:
            table[o["id"]] = node
        return node

    return dec(obj)
