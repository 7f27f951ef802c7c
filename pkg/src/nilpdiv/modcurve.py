"""Level, index, genus, elliptic points and cusps of the modular curve X_G."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import modmat as mm
from .grouplat import MatGroup


class DeterminantNotSurjective(ValueError):
    pass


@dataclass(frozen=True)
class CurveInvariants:
    level: int
    index: int
    index_sl: int
    nu2: int
    nu3: int
    cusps: int
    genus: int

    @property
    def label_prefix(self):
        return f"{self.level}.{self.index}.{self.genus}"

    def to_json(self):
        out = asdict(self)
        out["label_prefix"] = self.label_prefix
        return out


def _with_minus_identity(codes, N):
    codes = np.asarray(codes, dtype=np.int64)
    return np.union1d(codes, mm.pmul(codes, mm.minus_identity_code(N), N))


def coset_table(H_codes, N):
    """Right cosets H x of H in SL2(Z/N): returns (sl2 codes, coset id per element)."""
    sl = mm.sl2_codes(N)
    ids = np.full(sl.size, -1, dtype=np.int64)
    H_codes = np.asarray(H_codes, dtype=np.int64)
    n = 0
    for i in range(sl.size):
        if ids[i] >= 0:
            continue
        coset = mm.pmul(H_codes, sl[i], N)
        ids[np.searchsorted(sl, coset)] = n
        n += 1
    return sl, ids


def invariants(G: MatGroup) -> CurveInvariants:
    N = G.N
    if not G.has_surjective_det():
        raise DeterminantNotSurjective(f"det(G) is not all of (Z/{N})^x")
    el = G.elements
    H = _with_minus_identity(el[mm.pdet(el, N) == 1 % N], N)
    sl, ids = coset_table(H, N)
    d = int(ids.max()) + 1
    reps = np.zeros(d, dtype=np.int64)
    reps[ids] = sl  # any element of each coset
    counts = {}
    for name, g in (("S", mm.encode(0, -1, 1, 0, N)), ("U", mm.encode(0, -1, 1, -1, N)),
                    ("T", mm.encode(1, 1, 0, 1, N))):
        perm = ids[np.searchsorted(sl, mm.pmul(reps, g, N))]
        counts[name] = perm
    nu2 = int(np.sum(counts["S"] == np.arange(d)))
    nu3 = int(np.sum(counts["U"] == np.arange(d)))
    cusps = _cycle_count(counts["T"])
    genus = 1 + Fraction(d, 12) - Fraction(nu2, 4) - Fraction(nu3, 3) - Fraction(cusps, 2)
    if genus.denominator != 1 or genus < 0:
        raise ArithmeticError(f"non-integral genus {genus} for level {N}")
    index = mm.gl2_order(N) // G.order
    return CurveInvariants(N, index, d, nu2, nu3, cusps, int(genus))


def _cycle_count(perm):
    seen = np.zeros(perm.size, dtype=bool)
    cycles = 0
    for i in range(perm.size):
        if seen[i]:
            continue
        cycles += 1
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
    return cycles


def fiber_product(Gp: MatGroup, Hq: MatGroup) -> MatGroup:
    """CRT product of groups at coprime levels: all M with M = g mod p, M = h mod q."""
    m, n = Gp.N, Hq.N
    el = mm.pcrt(Gp.elements, m, Hq.elements, n)
    # generators: each factor's generators paired with the other's identity
    gens = np.concatenate([mm.pcrt(Gp.gens, m, np.array([mm.identity_code(n)]), n),
                           mm.pcrt(np.array([mm.identity_code(m)]), m, Hq.gens, n)])
    return MatGroup(m * n, gens, elements=el)


def genus_identity_holds(inv: CurveInvariants) -> bool:
    return 12 * (inv.genus - 1) + 3 * inv.nu2 + 4 * inv.nu3 + 6 * inv.cusps == inv.index_sl
