"""Residue-ring arithmetic for 2x2 matrices and exact rationals.

Two layers live here. ``Mat2`` is the small immutable value type used at API
boundaries. The search engine works on *packed codes* instead: a matrix
``[[a, b], [c, d]] mod N`` is stored as the integer ``((a*N + b)*N + c)*N + d``
so that whole groups fit in one sorted ``int64`` array and products can be
computed in bulk with numpy.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy


class ModulusMismatch(ValueError):
    pass


class NotInvertible(ValueError):
    """Raised when a matrix is not in GL2 over the residue ring."""


@dataclass(frozen=True)
class Mat2:
    n11: int
    n12: int
    n21: int
    n22: int
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"modulus must be >= 1, got {self.N}")
        for name in ("n11", "n12", "n21", "n22"):
            object.__setattr__(self, name, getattr(self, name) % self.N)

    @classmethod
    def from_rows(cls, rows, N):
        (a, b), (c, d) = rows
        return cls(a, b, c, d, N)

    @classmethod
    def identity(cls, N):
        return cls(1, 0, 0, 1, N)

    @classmethod
    def from_code(cls, code, N):
        a, b, c, d = decode_one(int(code), N)
        return cls(a, b, c, d, N)

    @property
    def entries(self):
        return (self.n11, self.n12, self.n21, self.n22)

    @property
    def code(self):
        a, b, c, d = self.entries
        return ((a * self.N + b) * self.N + c) * self.N + d

    def det(self):
        return (self.n11 * self.n22 - self.n12 * self.n21) % self.N

    def trace(self):
        return (self.n11 + self.n22) % self.N

    def is_invertible(self):
        return math.gcd(self.det(), self.N) == 1

    def reduce(self, M):
        if self.N % M:
            raise ValueError(f"{M} does not divide {self.N}")
        return Mat2(*self.entries, M)

    def __matmul__(self, other):
        return mat_mul(self, other)

    def __pow__(self, k):
        return mat_pow(self, k)

    def __str__(self):
        a, b, c, d = self.entries
        return f"[[{a},{b}],[{c},{d}]] mod {self.N}"

    @classmethod
    def parse(cls, text):
        m = _MAT_RE.fullmatch(text.strip())
        if not m:
            raise ValueError(f"cannot parse matrix {text!r}")
        a, b, c, d, N = (int(x) for x in m.groups())
        return cls(a, b, c, d, N)


_MAT_RE = re.compile(
    r"\[\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\s*,\s*\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\]\s*mod\s*(\d+)"
)


def _check(a, b):
    if a.N != b.N:
        raise ModulusMismatch(f"moduli differ: {a.N} vs {b.N}")


def mat_mul(a: Mat2, b: Mat2) -> Mat2:
    _check(a, b)
    return Mat2(
        a.n11 * b.n11 + a.n12 * b.n21,
        a.n11 * b.n12 + a.n12 * b.n22,
        a.n21 * b.n11 + a.n22 * b.n21,
        a.n21 * b.n12 + a.n22 * b.n22,
        a.N,
    )


def mat_add(a: Mat2, b: Mat2) -> Mat2:
    _check(a, b)
    return Mat2(*(x + y for x, y in zip(a.entries, b.entries)), a.N)


def mat_inverse(a: Mat2) -> Mat2:
    d = a.det()
    if math.gcd(d, a.N) != 1:
        raise NotInvertible(f"{a} is not in GL2 (det {d})")
    if a.N == 1:
        return a
    di = pow(d, -1, a.N)
    return Mat2(di * a.n22, -di * a.n12, -di * a.n21, di * a.n11, a.N)


def mat_pow(a: Mat2, k: int) -> Mat2:
    if k < 0:
        return mat_pow(mat_inverse(a), -k)
    result = Mat2.identity(a.N)
    base = a
    while k:
        if k & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        k >>= 1
    return result


def crt_combine(a: Mat2, b: Mat2) -> Mat2:
    m, n = a.N, b.N
    if math.gcd(m, n) != 1:
        raise ValueError(f"moduli {m} and {n} are not coprime")
    return Mat2(*(_crt(x, m, y, n) for x, y in zip(a.entries, b.entries)), m * n)


def _crt(x, m, y, n):
    # x + m*t = y (mod n)
    t = ((y - x) * pow(m, -1, n)) % n if n > 1 else 0
    return x + m * t


# ---------------------------------------------------------------------------
# group orders and element orders

def factor(n: int) -> dict:
    """Prime factorisation of a nonzero integer (sign dropped)."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factor 0")
    return dict(sympy.factorint(n))


@lru_cache(maxsize=None)
def gl2_order(N: int) -> int:
    order = N**4
    for p in factor(N):
        order = order // (p * p) * (p - 1) * (p * p - 1) // p
    return order


@lru_cache(maxsize=None)
def sl2_order(N: int) -> int:
    return gl2_order(N) // euler_phi(N)


def euler_phi(N: int) -> int:
    out = N
    for p in factor(N):
        out = out // p * (p - 1)
    return out


def element_order(a: Mat2) -> int:
    if not a.is_invertible():
        raise NotInvertible(f"{a} is not in GL2")
    order = gl2_order(a.N)
    ident = Mat2.identity(a.N)
    for q, e in factor(order).items():
        for _ in range(e):
            if order % q == 0 and mat_pow(a, order // q) == ident:
                order //= q
            else:
                break
    return order


# ---------------------------------------------------------------------------
# rationals and classes modulo cubes

@dataclass(frozen=True)
class FactoredRational:
    sign: int
    exponents: tuple  # sorted ((prime, exponent), ...) with exponent != 0

    @classmethod
    def from_fraction(cls, x) -> "FactoredRational":
        x = Fraction(x)
        if x == 0:
            raise ValueError("zero has no factorisation")
        exps = dict(factor(x.numerator))
        for p, e in factor(x.denominator).items():
            exps[p] = exps.get(p, 0) - e
        return cls(1 if x > 0 else -1, tuple(sorted(exps.items())))

    def to_fraction(self) -> Fraction:
        out = Fraction(self.sign)
        for p, e in self.exponents:
            out *= Fraction(p) ** e
        return out

    def as_dict(self):
        return dict(self.exponents)


def cube_class(d) -> FactoredRational:
    """Class of a nonzero rational in Q^x / (Q^x)^3, as exponents in {1, 2}.

    The sign is dropped because -1 is a cube.
    """
    d = Fraction(d)
    if d == 0:
        raise ValueError("cube_class of 0 is undefined")
    f = FactoredRational.from_fraction(d)
    exps = tuple((p, e % 3) for p, e in f.exponents if e % 3)
    return FactoredRational(1, exps)


def is_cube(d) -> bool:
    return cube_class(d).exponents == ()


def rational_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text) -> Fraction:
    return Fraction(str(text).strip())


# ---------------------------------------------------------------------------
# packed codes (vectorised engine representation)

def decode_one(code: int, N: int):
    code, d = divmod(code, N)
    code, c = divmod(code, N)
    a, b = divmod(code, N)
    return a, b, c, d


def encode(a, b, c, d, N):
    a = np.asarray(a, dtype=np.int64) % N
    b = np.asarray(b, dtype=np.int64) % N
    c = np.asarray(c, dtype=np.int64) % N
    d = np.asarray(d, dtype=np.int64) % N
    return ((a * N + b) * N + c) * N + d


def decode(codes, N):
    codes = np.asarray(codes, dtype=np.int64)
    d = codes % N
    codes = codes // N
    c = codes % N
    codes = codes // N
    return codes // N, codes % N, c, d


def pmul(x, y, N):
    """Entrywise-broadcast product of packed matrices x*y."""
    a1, b1, c1, d1 = decode(x, N)
    a2, b2, c2, d2 = decode(y, N)
    return encode(a1 * a2 + b1 * c2, a1 * b2 + b1 * d2,
                  c1 * a2 + d1 * c2, c1 * b2 + d1 * d2, N)


@lru_cache(maxsize=None)
def unit_inverse_table(N):
    table = np.zeros(max(N, 1), dtype=np.int64)
    for u in range(N):
        if math.gcd(u, N) == 1:
            table[u] = pow(u, -1, N) if N > 1 else 0
    return table


def pinv(x, N):
    a, b, c, d = decode(x, N)
    di = unit_inverse_table(N)[(a * d - b * c) % N]
    return encode(di * d, -di * b, -di * c, di * a, N)


def pdet(x, N):
    a, b, c, d = decode(x, N)
    return (a * d - b * c) % N


def ptrace(x, N):
    a, _, _, d = decode(x, N)
    return (a + d) % N


def pconj(x, g, N):
    """x g x^-1, broadcast."""
    return pmul(pmul(x, g, N), pinv(x, N), N)


def ppow(x, e, N):
    """x**e elementwise; e may be an array of nonnegative exponents."""
    x = np.asarray(x, dtype=np.int64)
    e = np.broadcast_to(np.asarray(e, dtype=np.int64), x.shape).copy()
    result = np.full(x.shape, identity_code(N), dtype=np.int64)
    base = x.copy()
    while np.any(e):
        odd = (e & 1).astype(bool)
        if odd.any():
            result = np.where(odd, pmul(result, base, N), result)
        e >>= 1
        base = pmul(base, base, N)
    return result


def identity_code(N):
    return (N + 0) * N * N + 1 if N > 1 else 0


def minus_identity_code(N):
    return int(encode(-1, 0, 0, -1, N))


def preduce(x, N, M):
    a, b, c, d = decode(x, N)
    return encode(a, b, c, d, M)


def pelement_orders(x, N):
    """Orders of packed invertible matrices, descending through the prime
    factors of |GL2(Z/N)| instead of iterating powers."""
    x = np.asarray(x, dtype=np.int64)
    order = np.full(x.shape, gl2_order(N), dtype=np.int64)
    ident = identity_code(N)
    for q, e in factor(gl2_order(N)).items():
        for _ in range(e):
            cand = order // q
            ok = (order % q == 0) & (ppow(x, cand, N) == ident)
            if not ok.any():
                break
            order = np.where(ok, cand, order)
    return order


@lru_cache(maxsize=None)
def gl2_codes(N):
    """Sorted codes of all of GL2(Z/N)."""
    a, b, c, d = np.meshgrid(*(np.arange(N, dtype=np.int64),) * 4, indexing="ij")
    a, b, c, d = a.ravel(), b.ravel(), c.ravel(), d.ravel()
    det = (a * d - b * c) % N
    units = np.array([math.gcd(u, N) == 1 for u in range(N)])
    keep = units[det]
    out = encode(a[keep], b[keep], c[keep], d[keep], N)
    out.sort()
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def sl2_codes(N):
    g = gl2_codes(N)
    out = g[pdet(g, N) == 1 % N]
    out.flags.writeable = False
    return out


def pcrt(x, m, y, n):
    """Combine packed matrices mod m and mod n (coprime) into mod mn, over
    all pairs (outer product)."""
    if math.gcd(m, n) != 1:
        raise ValueError(f"moduli {m} and {n} are not coprime")
    xs = decode(np.asarray(x)[:, None], m)
    ys = decode(np.asarray(y)[None, :], n)
    minv = pow(m, -1, n) if n > 1 else 0
    parts = [xe + m * (((ye - xe) * minv) % n) for xe, ye in zip(xs, ys)]
    return encode(*parts, m * n).ravel()
