"""Near coincidences of division fields: the kernel predicate and the searches.

A subgroup G of GL2(Z/n) represents a near coincidence of level (n, m) when
its determinant is surjective and the only element of G that is trivial mod
m and has determinant 1 is the identity.

Searches at level p^k work one layer at a time. Let M = p^(k-1) and
V = {I + M X : X in M2(F_p)}, the kernel of reduction to level M; for k >= 2
it is abelian and isomorphic to M2(F_p) (the cross term M^2 X Y vanishes).
Conjugation by G acts on V through G mod p. For g = I + M X in V,

    det g = 1 + M tr X  (mod p^k),

so the determinant-one part of V is exactly the trace-zero part. Hence if
K = G n V meets SL2 trivially, K is an H-stable subspace (H = image of G)
meeting the trace-zero hyperplane in zero, so dim K <= 1 and |K| <= p. Given
H and K, the groups G are complements of V/K in the preimage of H modulo K,
i.e. 1-cocycles H -> V/K; cocycles differing by a coboundary give
V-conjugate groups. Everything below is linear algebra over F_p on top of
a breadth-first walk of H.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import modmat as mm
from .grouplat import (ConjClassRep, MatGroup, enumerate_subgroups, gl2, maximal_classes,
                       sort_classes)
from .modcurve import CurveInvariants, invariants

SUPPORTED = {(2, 2), (3, 2), (5, 2), (2, 3), (3, 3)}


class UnsupportedLevel(ValueError):
    pass


def _check_det(G):
    if not G.has_surjective_det():
        raise ValueError("near coincidences need a surjective determinant")


def kernel_meets_sl2_trivially(G, m):
    el = G.elements
    N = G.N
    mask = (mm.preduce(el, N, m) == mm.identity_code(m)) & (mm.pdet(el, N) == 1 % N)
    return int(mask.sum()) == 1


def represents_nearco(G: MatGroup, m: int) -> bool:
    if G.N % m:
        raise ValueError(f"{m} does not divide {G.N}")
    _check_det(G)
    return kernel_meets_sl2_trivially(G, m)


# ---------------------------------------------------------------------------
# linear algebra over F_p

def rref(A, p):
    """Row-reduce A mod p; returns (R, pivot columns)."""
    R = np.array(A, dtype=np.int64) % p
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if not nz.size:
            continue
        k = r + nz[0]
        R[[r, k]] = R[[k, r]]
        R[r] = (R[r] * pow(int(R[r, c]), -1, p)) % p
        others = np.nonzero(R[:, c])[0]
        others = others[others != r]
        if others.size:
            R[others] = (R[others] - np.outer(R[others, c], R[r])) % p
        pivots.append(c)
        r += 1
    return R[:r], pivots


def nullspace(A, p):
    A = np.atleast_2d(np.asarray(A, dtype=np.int64))
    n = A.shape[1]
    R, piv = rref(A, p) if A.size else (np.zeros((0, n), dtype=np.int64), [])
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = np.zeros(n, dtype=np.int64)
        v[f] = 1
        for i, c in enumerate(piv):
            v[c] = (-R[i, f]) % p
        basis.append(v)
    return np.array(basis, dtype=np.int64).reshape(len(basis), n)


def solve_affine(A, b, p):
    """One solution x of A x = b mod p, or None."""
    A = np.asarray(A, dtype=np.int64)
    aug = np.concatenate([A, np.asarray(b, dtype=np.int64).reshape(-1, 1)], axis=1)
    R, piv = rref(aug, p)
    n = A.shape[1]
    if n in piv:
        return None
    x = np.zeros(n, dtype=np.int64)
    for i, c in enumerate(piv):
        x[c] = R[i, n]
    return x % p


def rank(A, p):
    A = np.atleast_2d(np.asarray(A, dtype=np.int64))
    if not A.size:
        return 0
    return len(rref(A, p)[1])


def complement_basis(U, W, p):
    """Vectors of W extending a basis of span(U) to a basis of span(U + W)."""
    cur = [u for u in U]
    out = []
    r = rank(np.array(cur), p) if cur else 0
    for w in W:
        cand = cur + [w]
        rr = rank(np.array(cand), p)
        if rr > r:
            cur, r = cand, rr
            out.append(w)
    return out


# ---------------------------------------------------------------------------
# the lift search

def _mat_vec(x, N, p):
    a, b, c, d = (int(t) % p for t in mm.decode_one(int(x), N))
    return np.array([[a, b], [c, d]], dtype=np.int64)


def _action(h, M, p):
    """4x4 matrix of X -> hbar^-1 X hbar on row-major vec(X), hbar = h mod p."""
    hb = _mat_vec(h, M, p)
    hi = _mat_vec(int(mm.pinv(np.array([h]), M)[0]), M, p)
    return np.kron(hi, hb.T) % p


def _kernel_code(X, M, N):
    return int(mm.encode(1 + M * X[0], M * X[1], M * X[2], 1 + M * X[3], N))


def _lift_code(h, M, N):
    return int(mm.encode(*mm.decode_one(int(h), M), N))


def stable_lines(H, p, M):
    """H-stable lines of M2(F_p) spanned by a matrix of nonzero trace."""
    acts = [_action(h, M, p) for h in H.gens]
    lines = []
    for v in itertools.product(range(p), repeat=4):
        v = np.array(v, dtype=np.int64)
        nz = np.nonzero(v)[0]
        if not nz.size or v[nz[0]] != 1:
            continue
        if (v[0] + v[3]) % p == 0:
            continue
        if all(rank(np.array([v, A @ v % p]), p) == 1 for A in acts):
            lines.append(v)
    return lines


class _Walk:
    """Breadth-first spanning tree of H with lifted section s(h)."""

    def __init__(self, H, N, p):
        M = H.N
        self.H, self.N, self.M, self.p = H, N, M, p
        self.gens = [int(g) for g in H.gens]
        self.lifts = [_lift_code(g, M, N) for g in self.gens]
        self.acts = [_action(g, M, p) for g in self.gens]
        el = H.elements
        self.index = {int(c): i for i, c in enumerate(el)}
        n, r = el.size, len(self.gens)
        self.parent = [None] * n
        self.section = np.zeros(n, dtype=np.int64)
        self.A = np.zeros((n, 4, 4 * r), dtype=np.int64)
        self.b = np.zeros((n, 4), dtype=np.int64)
        self.edges = []  # (h index, gen index, target index, defect vector)
        ident = mm.identity_code(M)
        start = self.index[ident]
        seen = np.zeros(n, dtype=bool)
        seen[start] = True
        self.section[start] = mm.identity_code(N)
        queue = [start]
        hgens = np.array(self.gens, dtype=np.int64)
        hl = np.array(self.lifts, dtype=np.int64)
        while queue:
            i = queue.pop(0)
            targets = mm.pmul(el[i], hgens, M)
            prods = mm.pmul(self.section[i], hl, N)
            for j in range(r):
                t = self.index[int(targets[j])]
                if not seen[t]:
                    seen[t] = True
                    self.section[t] = prods[j]
                    self.A[t] = self.acts[j] @ self.A[i] % p
                    self.A[t][:, 4 * j:4 * j + 4] += np.eye(4, dtype=np.int64)
                    self.A[t] %= p
                    self.b[t] = self.acts[j] @ self.b[i] % p
                    queue.append(t)
                else:
                    self.edges.append((i, j, t, int(prods[j])))
        # defects for non-tree edges: s(h) lift_j = s(t) (I + M c)
        self.defects = []
        for i, j, t, prod in self.edges:
            q = int(mm.pmul(mm.pinv(np.array([self.section[t]]), N), prod, N)[0])
            a, b_, c, d = mm.decode_one(q, N)
            vec = np.array([(a - 1) // M, b_ // M, c // M, (d - 1) // M], dtype=np.int64) % p
            self.defects.append(vec)


def complements(H, N, p, line=None):
    """Groups G at level N with image H and G n V = span(line) (or trivial).

    Returned up to V-conjugacy (one per class in H^1).
    """
    walk = _Walk(H, N, p)
    r = len(walk.gens)
    Q = np.eye(4, dtype=np.int64) if line is None else _quotient_map(line, p)
    rows, rhs = [], []
    for (i, j, t, _), c in zip(walk.edges, walk.defects):
        L = (walk.acts[j] @ walk.A[i]) % p
        L[:, 4 * j:4 * j + 4] += np.eye(4, dtype=np.int64)
        L = (L - walk.A[t]) % p
        beta = (walk.acts[j] @ walk.b[i] + c - walk.b[t]) % p
        rows.append(Q @ L % p)
        rhs.append((-(Q @ beta)) % p)
    n = 4 * r
    if rows:
        A = np.concatenate(rows)
        b = np.concatenate(rhs)
        x0 = solve_affine(A, b, p)
        if x0 is None:
            return []
        W = nullspace(A, p)
    else:
        x0 = np.zeros(n, dtype=np.int64)
        W = np.eye(n, dtype=np.int64)
    # coboundaries and K^r do not change the class
    U = []
    for w in np.eye(4, dtype=np.int64) if r else ():
        U.append(np.concatenate([(w - walk.acts[j] @ w) % p for j in range(r)]))
    if line is not None:
        for j in range(r):
            u = np.zeros(n, dtype=np.int64)
            u[4 * j:4 * j + 4] = line
            U.append(u)
    ext = complement_basis(U, list(W), p)
    out = []
    for coeffs in itertools.product(range(p), repeat=len(ext)):
        v = x0.copy()
        for c_, e in zip(coeffs, ext):
            v = (v + c_ * e) % p
        out.append(_build(walk, v, line))
    return out


def _quotient_map(line, p):
    """Matrix whose kernel is exactly span(line)."""
    basis = [line] + [e for e in np.eye(4, dtype=np.int64)]
    chosen = complement_basis([line], basis[1:], p)
    B = np.array([line] + chosen, dtype=np.int64).T  # columns: line, then complement
    Binv = _inverse_mod(B, p)
    return Binv[1:] % p


def _inverse_mod(B, p):
    n = B.shape[0]
    R, piv = rref(np.concatenate([B, np.eye(n, dtype=np.int64)], axis=1), p)
    return R[:, n:]


def _build(walk, v, line):
    N, M, p = walk.N, walk.M, walk.p
    f = (np.einsum("nij,j->ni", walk.A, v) + walk.b) % p
    ts = range(p) if line is not None else (0,)
    codes = []
    for t in ts:
        X = (f + t * (line if line is not None else 0)) % p
        ker = mm.encode(1 + M * X[:, 0], M * X[:, 1], M * X[:, 2], 1 + M * X[:, 3], N)
        codes.append(mm.pmul(walk.section, ker, N))
    gens = [int(mm.pmul(lift, _kernel_code(v[4 * j:4 * j + 4], M, N), N))
            for j, lift in enumerate(walk.lifts)]
    if line is not None:
        gens.append(_kernel_code(line, M, N))
    return MatGroup(N, gens, elements=np.concatenate(codes))


# ---------------------------------------------------------------------------
# searches

@dataclass
class NearcoClass:
    rep: ConjClassRep
    invariants: CurveInvariants
    kernel_order: int
    admissible: bool

    def to_json(self):
        out = self.rep.to_json()
        out.update(self.invariants.to_json())
        out["kernel_order"] = self.kernel_order
        out["admissible"] = self.admissible
        return out


def _kernel_order(G, m):
    el = G.elements
    return int(np.sum(mm.preduce(el, G.N, m) == mm.identity_code(m)))


def all_subgroup_classes(N):
    A = gl2(N)
    if A.is_solvable():
        return [r.group for r in enumerate_subgroups(A, strategy="solvable")]
    return [r.group for r in enumerate_subgroups(A, strategy="full")]


def kernel_family(p, k, strategy="lift_search"):
    """All classes of subgroups of GL2(Z/p^k) meeting the determinant-one
    kernel of reduction to p^(k-1) trivially."""
    N, M = p**k, p ** (k - 1)
    ambient = gl2(N)
    if strategy == "solvable":
        return enumerate_subgroups(ambient, filter=lambda G: kernel_meets_sl2_trivially(G, M),
                                   strategy="solvable")
    if k >= 3 and p % 2:
        # images of such groups themselves meet their own determinant-one
        # kernel trivially (the p-th power map carries I + p^(k-2) X to
        # I + p^(k-1) X for odd p), so the previous layer supplies the bases
        bases = [r.group for r in kernel_family(p, k - 1)]
    else:
        bases = all_subgroup_classes(M)
    reps = enumerate_subgroups(ambient, strategy="lift_search",
                               lift=lambda: _iter_lifts(bases, p, k))
    return reps


def _iter_lifts(bases, p, k):
    N, M = p**k, p ** (k - 1)
    for H in bases:
        H.compact_gens()
        for line in [None] + stable_lines(H, p, M):
            yield from complements(H, N, p, line)


def maximal_nearco(p, k, strategy=None, with_invariants=True):
    if (p, k) not in SUPPORTED:
        raise UnsupportedLevel(f"unsupported level ({p}, {k})")
    N, M = p**k, p ** (k - 1)
    if strategy is None:
        strategy = "solvable" if (p, k) in {(2, 2), (3, 2), (2, 3)} else "lift_search"
    fam = kernel_family(p, k, strategy)
    surj = [r for r in fam if r.group.has_surjective_det()]
    top = sort_classes(maximal_classes(surj, gl2(N)))
    if not with_invariants:
        return top
    from .nilpclass import is_admissible
    return [NearcoClass(r, invariants(r.group), _kernel_order(r.group, M),
                        is_admissible(r.group)) for r in top]


# ---------------------------------------------------------------------------
# the lift identity (I + p^n X)^p = I + p^(n+1) X  mod p^(n+2)

@dataclass
class LiftReport:
    p: int
    n: int
    trials: int
    failures: int
    witness: object = None


def lift_identity_holds(X, p, n):
    mod = p ** (n + 2)
    q = p**n
    a, b, c, d = X
    g = mm.Mat2(1 + q * a, q * b, q * c, 1 + q * d, mod)
    lhs = g ** p
    rhs = mm.Mat2(1 + q * p * a, q * p * b, q * p * c, 1 + q * p * d, mod)
    return lhs == rhs


def lift_identity_check(p, n, trials=10_000, seed=0):
    rng = np.random.default_rng(seed)
    if (p, n) == (2, 1):
        for X in itertools.product(range(4), repeat=4):
            if not lift_identity_holds(X, p, n):
                return LiftReport(p, n, 0, 0, witness=mm.Mat2(*X, 4))
        return LiftReport(p, n, 0, 0, witness=None)
    failures = 0
    mats = rng.integers(0, p * p, size=(trials, 4))
    for X in mats:
        if not lift_identity_holds(tuple(int(x) for x in X), p, n):
            failures += 1
    return LiftReport(p, n, trials, failures)
