"""Finite subgroups of GL2(Z/N): closure, structure, conjugacy, enumeration.

A ``MatGroup`` keeps its elements as a sorted array of packed codes (see
``modmat``). Everything expensive (products, conjugation, orders) is done in
bulk on those arrays.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import modmat as mm
from .modmat import Mat2

DEFAULT_BUDGET = 2**22


class GroupTooLarge(RuntimeError):
    pass


class StrategyError(ValueError):
    pass


def _sorted_unique(codes):
    return np.unique(np.asarray(codes, dtype=np.int64))


def _closure(gens, N, budget):
    ident = mm.identity_code(N)
    gens = _sorted_unique(gens)
    gens = gens[gens != ident]
    elems = np.array([ident], dtype=np.int64)
    frontier = elems
    while frontier.size:
        prods = mm.pmul(frontier[:, None], gens[None, :], N).ravel()
        prods = np.unique(prods)
        new = prods[~np.isin(prods, elems, assume_unique=True)]
        if not new.size:
            break
        elems = np.union1d(elems, new)
        if elems.size > budget:
            raise GroupTooLarge(f"closure exceeds element budget {budget}")
        frontier = new
    return elems


class MatGroup:
    """Subgroup of GL2(Z/N) given by generators, elements built lazily."""

    def __init__(self, N, gens=(), elements=None, budget=DEFAULT_BUDGET):
        self.N = int(N)
        self.gens = np.asarray(
            [g.code if isinstance(g, Mat2) else int(g) for g in gens], dtype=np.int64
        ) if not isinstance(gens, np.ndarray) else gens.astype(np.int64)
        self.budget = budget
        self._elements = None
        if elements is not None:
            self._elements = _sorted_unique(elements)
            self._elements.flags.writeable = False
        self._cache = {}

    # construction ---------------------------------------------------------
    @classmethod
    def from_elements(cls, N, elements, gens=None):
        elements = _sorted_unique(elements)
        if gens is None:
            gens = small_generating_set(elements, N)
        return cls(N, gens, elements=elements)

    @property
    def elements(self):
        if self._elements is None:
            if self.gens.size:
                dets = mm.pdet(self.gens, self.N)
                bad = [int(g) for g, dt in zip(self.gens, dets) if math.gcd(int(dt), self.N) != 1]
                if bad:
                    raise mm.NotInvertible(
                        f"generator {Mat2.from_code(bad[0], self.N)} is not invertible")
            self._elements = _closure(self.gens, self.N, self.budget)
            self._elements.flags.writeable = False
        return self._elements

    @property
    def order(self):
        return int(self.elements.size)

    def __len__(self):
        return self.order

    def contains(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        el = self.elements
        pos = np.searchsorted(el, codes)
        pos = np.minimum(pos, el.size - 1)
        return el[pos] == codes

    def __contains__(self, g):
        code = g.code if isinstance(g, Mat2) else int(g)
        return bool(self.contains(np.array([code]))[0])

    def issubset(self, other):
        return bool(np.all(other.contains(self.elements)))

    def __eq__(self, other):
        return (isinstance(other, MatGroup) and self.N == other.N
                and self.order == other.order
                and np.array_equal(self.elements, other.elements))

    def __hash__(self):
        return hash((self.N, self.digest()))

    def digest(self):
        if "digest" not in self._cache:
            h = hashlib.sha256(str(self.N).encode())
            h.update(self.elements.tobytes())
            self._cache["digest"] = h.hexdigest()
        return self._cache["digest"]

    def generators(self):
        return [Mat2.from_code(int(g), self.N) for g in self.gens]

    def __iter__(self):
        for c in self.elements:
            yield Mat2.from_code(int(c), self.N)

    def __repr__(self):
        return f"MatGroup(N={self.N}, order={self.order})"

    def to_json(self):
        return {"level": self.N,
                "generators": [str(g) for g in self.generators()],
                "order": self.order}

    @classmethod
    def from_json(cls, data):
        N = int(data["level"])
        G = cls(N, [Mat2.parse(s) for s in data["generators"]])
        if "order" in data and G.order != int(data["order"]):
            raise ValueError("serialized order does not match generators")
        return G

    # structure ------------------------------------------------------------
    def element_orders(self):
        if "orders" not in self._cache:
            self._cache["orders"] = mm.pelement_orders(self.elements, self.N)
        return self._cache["orders"]

    def det_image(self):
        return np.unique(mm.pdet(self.elements, self.N))

    def has_surjective_det(self):
        return self.det_image().size == mm.euler_phi(self.N)

    def is_abelian(self):
        g = self.gens
        if g.size < 2:
            return True
        ab = mm.pmul(g[:, None], g[None, :], self.N)
        return bool(np.array_equal(ab, ab.T))

    def center(self):
        if "center" not in self._cache:
            el = self.elements
            ok = np.ones(el.size, dtype=bool)
            for g in self.gens:
                ok &= mm.pmul(el, g, self.N) == mm.pmul(g, el, self.N)
            self._cache["center"] = MatGroup.from_elements(self.N, el[ok])
        return self._cache["center"]

    def subgroup(self, codes):
        return MatGroup(self.N, np.asarray(codes, dtype=np.int64), budget=self.budget)

    def p_elements(self, q):
        orders = self.element_orders()
        mask = orders == q ** _valuation(orders, q)
        return self.elements[mask]

    def sylow(self, q):
        """A Sylow q-subgroup (built by growing a q-subgroup inside its normaliser)."""
        key = ("sylow", q)
        if key in self._cache:
            return self._cache[key]
        target = q ** _valuation(np.array([self.order]), q)[0]
        qel = self.p_elements(q)
        if qel.size == target:
            P = MatGroup.from_elements(self.N, qel)
        else:
            P = MatGroup(self.N, [])
            while P.order < target:
                norm = normalizer(P, self)
                cand = norm.p_elements(q)
                cand = cand[~P.contains(cand)]
                # some q-element of N(P)/P outside P extends P
                for x in cand:
                    Q = MatGroup(self.N, np.append(P.gens, x))
                    if Q.order == q ** _valuation(np.array([Q.order]), q)[0]:
                        P = Q
                        break
        self._cache[key] = P
        return P

    def is_nilpotent(self, method="sylow"):
        if method == "sylow":
            if "nilpotent" not in self._cache:
                orders = self.element_orders()
                ok = True
                for q in mm.factor(self.order) if self.order > 1 else {}:
                    full = q ** _valuation(np.array([self.order]), q)[0]
                    count = int(np.sum(orders == q ** _valuation(orders, q)))
                    if count != full:
                        ok = False
                        break
                self._cache["nilpotent"] = ok
            return self._cache["nilpotent"]
        if method == "lcs":
            return lower_central_series(self)[-1].order == 1
        if method == "sylow_product":
            total = 1
            for q in (mm.factor(self.order) if self.order > 1 else {}):
                P = self.sylow(q)
                if not is_normal(P, self):
                    return False
                total *= P.order
            return total == self.order
        raise ValueError(f"unknown method {method}")

    def compact_gens(self):
        if self.gens.size > 6:
            self.gens = small_generating_set(self.elements, self.N)
        return self.gens

    def derived_subgroup(self):
        if "derived" not in self._cache:
            g = self.compact_gens()
            if g.size < 2:
                D = MatGroup(self.N, [])
            else:
                a, b = g[:, None], g[None, :]
                comm = mm.pmul(mm.pmul(a, b, self.N),
                               mm.pmul(mm.pinv(a, self.N), mm.pinv(b, self.N), self.N), self.N)
                D = normal_closure(comm.ravel(), self)
            self._cache["derived"] = D
        return self._cache["derived"]

    def derived_length(self):
        if "dlen" not in self._cache:
            n, H = 0, self
            while H.order > 1:
                D = H.derived_subgroup()
                if D.order == H.order:
                    n = -1  # perfect, not solvable
                    break
                H, n = D, n + 1
            self._cache["dlen"] = n
        return self._cache["dlen"]

    def is_solvable(self):
        return self.derived_length() >= 0

    def fingerprint(self):
        if "fp" not in self._cache:
            el = self.elements
            trip = np.stack([self.element_orders(), mm.ptrace(el, self.N), mm.pdet(el, self.N)])
            keys, counts = np.unique(trip, axis=1, return_counts=True)
            self._cache["fp"] = (self.order, tuple(map(tuple, keys.T.tolist())),
                                 tuple(counts.tolist()))
        return self._cache["fp"]


def _valuation(values, q):
    values = np.asarray(values, dtype=np.int64).copy()
    v = np.zeros(values.shape, dtype=np.int64)
    while True:
        m = (values % q == 0) & (values > 0)
        if not m.any():
            return v
        v += m
        values = np.where(m, values // q, values)


def small_generating_set(elements, N):
    """Greedy generating set: add elements until the closure is everything."""
    elements = _sorted_unique(elements)
    ident = mm.identity_code(N)
    if elements.size <= 1:
        return np.zeros(0, dtype=np.int64)
    orders = mm.pelement_orders(elements, N)
    order_idx = np.argsort(-orders, kind="stable")
    gens = []
    current = np.array([ident], dtype=np.int64)
    for i in order_idx:
        x = elements[i]
        if np.isin(x, current):
            continue
        gens.append(int(x))
        current = _closure(np.array(gens), N, elements.size + 1)
        if current.size == elements.size:
            break
    return np.array(gens, dtype=np.int64)


def generate(gens, N, budget=DEFAULT_BUDGET) -> MatGroup:
    for g in gens:
        if isinstance(g, Mat2) and g.N != N:
            raise mm.ModulusMismatch(f"generator modulus {g.N} differs from {N}")
    G = MatGroup(N, list(gens), budget=budget)
    G.elements
    return G


def gl2(N) -> MatGroup:
    return MatGroup.from_elements(N, mm.gl2_codes(N), gens=_gl2_gens(N))


def sl2(N) -> MatGroup:
    return MatGroup.from_elements(N, mm.sl2_codes(N), gens=_sl2_gens(N))


def _sl2_gens(N):
    return np.array([int(mm.encode(1, 1, 0, 1, N)), int(mm.encode(0, -1, 1, 0, N))])


def _gl2_gens(N):
    gens = list(_sl2_gens(N))
    units = [u for u in range(1, max(N, 2)) if math.gcd(u, N) == 1]
    gens += [int(mm.encode(1, 0, 0, u, N)) for u in units]
    return np.array(gens, dtype=np.int64)


def join(G, extra):
    return MatGroup(G.N, np.concatenate([G.gens, np.atleast_1d(np.asarray(extra, dtype=np.int64))]),
                    budget=G.budget)


def conjugate(G, x):
    """x G x^-1 for a packed element x."""
    N = G.N
    return MatGroup(N, mm.pconj(x, G.gens, N), elements=mm.pconj(x, G.elements, N))


def is_normal(H, G):
    for g in G.gens:
        if not np.all(H.contains(mm.pconj(g, H.gens, G.N))):
            return False
    return True


def normal_closure(codes, G):
    N = G.N
    H = MatGroup(N, [])
    H = _grow(H, np.asarray(codes, dtype=np.int64))
    while True:
        new = mm.pconj(G.gens[:, None], H.gens[None, :], N).ravel()
        missing = new[~H.contains(new)]
        if not missing.size:
            return H
        H = _grow(H, missing)


def _grow(H, codes):
    """Join H with codes, adding one generator at a time so that the
    generating set stays small."""
    codes = np.unique(np.asarray(codes, dtype=np.int64))
    while True:
        missing = codes[~H.contains(codes)]
        if not missing.size:
            return H
        H = join(H, missing[0])


def commutator_subgroup(A, B):
    """[A, B] for A, B inside a common group normalising both."""
    N = A.N
    a, b = A.elements[:, None], B.compact_gens()[None, :]
    comm = mm.pmul(mm.pmul(a, b, N), mm.pmul(mm.pinv(a, N), mm.pinv(b, N), N), N)
    gens = np.unique(comm.ravel())
    H = MatGroup(N, gens)
    # close under conjugation by A and B
    parent = MatGroup(N, np.concatenate([A.gens, B.gens]))
    return normal_closure(H.gens, parent)


def lower_central_series(G):
    series = [G]
    while True:
        nxt = commutator_subgroup(series[-1], G)
        if nxt.order == series[-1].order:
            return series
        series.append(nxt)
        if nxt.order == 1:
            return series


def normalizer(H, ambient):
    """Elements of the ambient group normalising H."""
    N = H.N
    el = ambient.elements
    ok = np.ones(el.size, dtype=bool)
    for h in H.gens:
        ok &= H.contains(mm.pconj(el, h, N))
    return MatGroup.from_elements(N, el[ok])


def conjugators(G, H, ambient):
    """Ambient elements x with x G x^-1 contained in H."""
    N = G.N
    cand = ambient.elements
    for g in G.gens:
        cand = cand[H.contains(mm.pconj(cand, g, N))]
        if not cand.size:
            break
    return cand


def are_conjugate(G, H, ambient, return_conjugator=False):
    ok = G.order == H.order and G.fingerprint() == H.fingerprint()
    x = None
    if ok:
        if G.order == 1:
            x = mm.identity_code(G.N)
        else:
            cand = conjugators(G, H, ambient)
            ok = cand.size > 0
            x = int(cand[0]) if ok else None
    if return_conjugator:
        return ok, (Mat2.from_code(x, G.N) if x is not None else None)
    return ok


def contained_up_to_conjugacy(G, H, ambient):
    if H.order % G.order:
        return False
    if G.order == 1:
        return True
    return conjugators(G, H, ambient).size > 0


def reduce_group(G, M) -> MatGroup:
    if G.N % M:
        raise ValueError(f"{M} does not divide level {G.N}")
    if M == G.N:
        return G
    return MatGroup(M, np.unique(mm.preduce(G.gens, G.N, M)),
                    elements=mm.preduce(G.elements, G.N, M))


def kernel_of_reduction(G, M) -> MatGroup:
    if G.N % M:
        raise ValueError(f"{M} does not divide level {G.N}")
    el = G.elements
    return MatGroup.from_elements(G.N, el[mm.preduce(el, G.N, M) == mm.identity_code(M)])


def preimage(H, N) -> MatGroup:
    """Full preimage of H (level M) in GL2(Z/N), M | N."""
    M = H.N
    if N % M:
        raise ValueError(f"{M} does not divide {N}")
    ker = [int(mm.encode(1 + M * a, M * b, M * c, 1 + M * d, N))
           for a in range(N // M) for b in range(N // M)
           for c in range(N // M) for d in range(N // M)]
    ker = MatGroup.from_elements(N, ker) if N > M else MatGroup(N, [])
    lifts = mm.encode(*mm.decode(H.elements, M), N)
    el = mm.pmul(lifts[:, None], ker.elements[None, :], N).ravel()
    gens = np.concatenate([mm.encode(*mm.decode(H.gens, M), N), ker.gens])
    return MatGroup(N, gens, elements=el)


# ---------------------------------------------------------------------------
# enumeration up to conjugacy

@dataclass
class ConjClassRep:
    group: MatGroup
    fingerprint: tuple = field(repr=False)
    size: int = 1  # number of conjugates is not tracked; kept for API symmetry

    @property
    def order(self):
        return self.group.order

    @property
    def derived_length(self):
        return self.group.derived_length()

    def to_json(self):
        out = self.group.to_json()
        out["derived_length"] = self.derived_length
        return out


class ClassList:
    """Conjugacy-class registry keyed by fingerprint."""

    def __init__(self, ambient):
        self.ambient = ambient
        self.buckets = {}
        self.reps = []
        self._seen = set()

    def add(self, G):
        """Register G; return True if it is a new class."""
        dg = G.digest()
        if dg in self._seen:
            return False
        self._seen.add(dg)
        key = G.fingerprint()
        bucket = self.buckets.setdefault(key, [])
        for i, rep in enumerate(bucket):
            if conjugators(G, rep.group, self.ambient).size:
                # keep the lexicographically least element array
                if _lex_less(G.elements, rep.group.elements):
                    rep.group = G
                return False
        rep = ConjClassRep(G, key)
        bucket.append(rep)
        self.reps.append(rep)
        return True


def _lex_less(a, b):
    diff = np.nonzero(a != b)[0]
    return bool(diff.size) and a[diff[0]] < b[diff[0]]


def _cyclic_generators(ambient):
    """One generator per cyclic subgroup of the ambient group."""
    el = ambient.elements
    N = ambient.N
    orders = ambient.element_orders()
    seen = np.zeros(el.size, dtype=bool)
    out = []
    for i in np.argsort(orders, kind="stable"):
        if seen[i]:
            continue
        x = el[i]
        n = int(orders[i])
        out.append(int(x))
        ks = np.array([k for k in range(1, n + 1) if math.gcd(k, n) == 1], dtype=np.int64)
        powers = mm.ppow(np.full(ks.size, x), ks, N)
        seen[np.searchsorted(el, powers)] = True
    return np.array(out, dtype=np.int64)


def enumerate_subgroups(ambient, filter=None, strategy="full", hereditary=True,
                        maximal=False, lift=None, filter_is_solvable=False):
    """Conjugacy classes of subgroups of ``ambient`` that satisfy ``filter``.

    ``hereditary`` says the filter passes to subgroups, which lets the search
    prune. Strategies: ``full`` (joins with cyclic subgroups, any ambient up
    to 10^4 elements), ``solvable`` (prime-index extensions inside
    normalisers; complete for all solvable subgroups) and ``lift_search``
    (delegates to ``lift``, a callable returning candidate groups).

    ``filter_is_solvable`` lets ``solvable`` run on a non-solvable ambient
    when the hereditary filter only admits solvable groups (e.g. nilpotency).
    """
    filt = filter or (lambda G: True)
    if strategy == "full":
        if ambient.order > 10**4:
            raise StrategyError("full enumeration needs an ambient of at most 10^4 elements")
        reps = _enumerate_full(ambient, filt if hereditary else None)
    elif strategy == "solvable":
        if not (filter_is_solvable and hereditary and filter) and not ambient.is_solvable():
            raise StrategyError("solvable strategy needs a solvable ambient")
        reps = _enumerate_solvable(ambient, filt if hereditary else None)
    elif strategy == "lift_search":
        if lift is None:
            raise StrategyError("lift_search needs a lift callable")
        reg = ClassList(ambient)
        for G in lift():
            reg.add(G)
        reps = reg.reps
    else:
        raise StrategyError(f"unknown strategy {strategy}")
    reps = [r for r in reps if filt(r.group)]
    if maximal:
        reps = maximal_classes(reps, ambient)
    return sort_classes(reps)


def sort_classes(reps):
    return sorted(reps, key=lambda r: (r.group.order, r.group.elements.tolist()))


def _enumerate_full(ambient, prune):
    N = ambient.N
    cyc = _cyclic_generators(ambient)
    reg = ClassList(ambient)
    reg.add(MatGroup(N, []))
    i = 0
    while i < len(reg.reps):
        H = reg.reps[i].group
        i += 1
        outside = cyc[~H.contains(cyc)]
        for x in outside:
            K = join(H, x)
            if prune is not None and not prune(K):
                continue
            reg.add(K)
    return reg.reps


def _enumerate_solvable(ambient, prune):
    N = ambient.N
    reg = ClassList(ambient)
    reg.add(MatGroup(N, []))
    i = 0
    while i < len(reg.reps):
        H = reg.reps[i].group
        i += 1
        for K in prime_index_overgroups(H, ambient):
            if prune is not None and not prune(K):
                continue
            reg.add(K)
    return reg.reps


def prime_index_overgroups(H, ambient):
    """All K with H normal of prime index in K, K inside the ambient group."""
    N = H.N
    norm = normalizer(H, ambient)
    rest = norm.elements[~H.contains(norm.elements)]
    covered = np.zeros(rest.size, dtype=bool)
    out = []
    for j in range(rest.size):
        if covered[j]:
            continue
        x = rest[j]
        # order of x modulo H
        k, y = 1, x
        while not H.contains(np.array([y]))[0]:
            y = int(mm.pmul(y, x, N))
            k += 1
        if k not in _small_primes(k):
            continue
        cosets = [H.elements]
        y = x
        for _ in range(k - 1):
            cosets.append(mm.pmul(H.elements, y, N))
            y = int(mm.pmul(y, x, N))
        el = np.concatenate(cosets)
        K = MatGroup(N, np.append(H.gens, x), elements=el)
        out.append(K)
        covered |= np.isin(rest, el)
    return out


def _small_primes(k):
    return (k,) if k > 1 and all(k % q for q in range(2, int(k**0.5) + 1)) else ()


def maximal_classes(reps, ambient):
    """Drop classes conjugate-contained in a strictly larger class."""
    keep = []
    reps = sorted(reps, key=lambda r: -r.group.order)
    for r in reps:
        G = r.group
        if any(K.group.order > G.order and contained_up_to_conjugacy(G, K.group, ambient)
               for K in keep):
            continue
        keep.append(r)
    return keep
