"""Nilpotent division fields: admissibility, prime-level searches and the classifier.

A subgroup of GL2(Z/N) can only be the mod-N Galois image of a curve over Q
if its determinant is onto and it holds a complex-conjugation-like element
(determinant -1, trace 0) fixing a point of exact order N. The division
field is nilpotent iff the image is a nilpotent group; over composite N that
factors prime power by prime power, so most of the work is at prime level.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from . import cartan as ca
from . import grouplat as gl
from . import modmat as mm
from .grouplat import MatGroup
from .modcurve import fiber_product, invariants


class MalformedDescriptor(ValueError):
    pass


# ---------------------------------------------------------------------------
# admissibility

def is_admissible(G: MatGroup) -> bool:
    N = G.N
    if N < 2:
        raise ValueError("admissibility needs N >= 2")
    if not G.has_surjective_det():
        return False
    el = G.elements
    conj = el[(mm.pdet(el, N) == (N - 1) % N) & (mm.ptrace(el, N) == 0)]
    if not conj.size:
        return False
    v1, v2 = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    v1, v2 = v1.ravel(), v2.ravel()
    exact = np.gcd(np.gcd(v1, v2), N) == 1
    v1, v2 = v1[exact], v2[exact]
    a, b, c, d = (x[:, None] for x in mm.decode(conj, N))
    fixed = ((a * v1 + b * v2 - v1) % N == 0) & ((c * v1 + d * v2 - v2) % N == 0)
    return bool(fixed.any())


# ---------------------------------------------------------------------------
# image in PGL2(F_p)

@dataclass(frozen=True)
class ProjectiveClass:
    tag: str  # ContainsSL2, BorelType, Cyclic, Dihedral, A4, S4, A5
    param: int | None = None

    def __str__(self):
        return self.tag if self.param is None else f"{self.tag}({self.param})"

    @property
    def is_two_power_dihedral(self):
        return self.tag == "Dihedral" and self.param & (self.param - 1) == 0


def projective_orders(G: MatGroup):
    """Order of each element of G modulo the scalars."""
    p = G.N
    el = G.elements
    cur = el.copy()
    orders = np.zeros(el.size, dtype=np.int64)
    for k in range(1, G.order + 1):
        a, b, c, d = mm.decode(cur, p)
        scalar = (b == 0) & (c == 0) & (a == d) & (orders == 0)
        orders[scalar] = k
        if orders.all():
            return orders
        cur = mm.pmul(cur, el, p)
    raise AssertionError("unreachable: every element has finite order")


def projective_class(G: MatGroup) -> ProjectiveClass:
    p = G.N
    if not sympy.isprime(p):
        raise ValueError(f"projective class needs a prime modulus, got {p}")
    if G.order % p == 0:
        sl = gl.sl2(p).elements
        if G.contains(sl).all():
            return ProjectiveClass("ContainsSL2")
        return ProjectiveClass("BorelType")
    m = G.order // ca.scalars(G).size
    top = int(projective_orders(G).max())
    if top == m:
        return ProjectiveClass("Cyclic", m)
    exceptional = {(12, 3): "A4", (24, 4): "S4", (60, 5): "A5"}
    if (m, top) in exceptional:
        return ProjectiveClass(exceptional[m, top])
    return ProjectiveClass("Dihedral", m // 2)


# ---------------------------------------------------------------------------
# prime-level searches

@dataclass
class NilpotentClass:
    rep: gl.ConjClassRep
    invariants: object
    projective: ProjectiveClass
    admissible: bool

    def to_json(self):
        out = self.rep.to_json()
        out.update(self.invariants.to_json())
        out["projective_class"] = str(self.projective)
        out["admissible"] = self.admissible
        return out


def nilpotent_subgroups(p):
    """Every conjugacy class of nilpotent subgroups of GL2(F_p)."""
    return gl.enumerate_subgroups(gl.gl2(p), filter=lambda G: G.is_nilpotent(),
                                  strategy="solvable", filter_is_solvable=True)


def maximal_nilpotent_admissible(p, require_admissible=True):
    """Classes maximal among nilpotent, admissible subgroups of GL2(F_p).

    With ``require_admissible=False`` only the determinant condition is kept,
    which also lets non-split Cartans without a conjugation element through.
    """
    if p not in (2, 3, 5, 7):
        raise ValueError(f"prime-level search is only run for p in 2, 3, 5, 7, got {p}")
    keep = is_admissible if require_admissible else (lambda G: G.has_surjective_det())
    reps = [r for r in nilpotent_subgroups(p) if keep(r.group)]
    top = gl.sort_classes(gl.maximal_classes(reps, gl.gl2(p)))
    return [NilpotentClass(r, invariants(r.group), projective_class(r.group),
                           is_admissible(r.group)) for r in top]


@dataclass
class ShapeReport:
    p: int
    checked: int
    abelian: int
    dihedral: int
    violations: list = field(default_factory=list)


def nilpotent_admissible_shapes(p):
    """Every nilpotent admissible subgroup mod p is abelian or 2-power dihedral mod scalars."""
    rep = ShapeReport(p, 0, 0, 0)
    for r in nilpotent_subgroups(p):
        G = r.group
        if not is_admissible(G):
            continue
        rep.checked += 1
        if G.is_abelian():
            rep.abelian += 1
        elif projective_class(G).is_two_power_dihedral:
            rep.dihedral += 1
        else:
            rep.violations.append(G)
    return rep


# ---------------------------------------------------------------------------
# 2-adic and odd prime-power towers

@dataclass
class TowerReport:
    base_order: int
    k: int
    preimage_order: int
    preimage_nilpotent: bool
    survivors: list

    def to_json(self):
        return {"base_order": self.base_order, "k": self.k,
                "preimage_order": self.preimage_order,
                "preimage_nilpotent": self.preimage_nilpotent,
                "survivors": [G.to_json() for G in self.survivors]}


def two_adic_tower_check(base: MatGroup, k, exhaustive=False) -> TowerReport:
    """Lift a mod-2 image to level 2^k.

    An order-3 base has no nilpotent admissible lift onto it; a base of
    order at most 2 has a 2-group as its full preimage.
    """
    if base.N != 2 or k not in (2, 3):
        raise ValueError("expects a subgroup of GL2(F2) and k in {2, 3}")
    pre = gl.preimage(base, 2**k)
    survivors = []
    if base.order == 3:
        reg = gl.ClassList(pre)
        for G in _lifts_onto_c3(pre, exhaustive):
            if gl.reduce_group(G, 2) == base and is_admissible(G):
                if reg.add(G):
                    survivors.append(G)
    return TowerReport(base.order, k, pre.order, pre.is_nilpotent(), survivors)


def _lifts_onto_c3(pre, exhaustive):
    """Nilpotent subgroups of ``pre`` that can map onto the order-3 base.

    The Sylow 3-subgroup of ``pre`` has order 3, and in a nilpotent lift it
    is central, so up to conjugacy the lift sits in the centraliser of one
    fixed element x of order 3.
    """
    if exhaustive:
        return [r.group for r in gl.enumerate_subgroups(
            pre, filter=lambda G: G.is_nilpotent(), strategy="solvable")]
    N = pre.N
    el = pre.elements
    x = int(el[pre.element_orders() == 3][0])
    cent = el[mm.pmul(el, x, N) == mm.pmul(np.full(el.size, x), el, N)]
    C = MatGroup.from_elements(N, cent)
    return [r.group for r in gl.enumerate_subgroups(
        C, filter=lambda G: G.is_nilpotent(), strategy="solvable")]


@dataclass
class OddSquareReport:
    p: int
    checked: int
    abelian: int
    scalar_kernel: int
    violations: list = field(default_factory=list)


def _kernel_is_scalar(G, p):
    ker = gl.kernel_of_reduction(G, p).elements
    a, b, c, d = mm.decode(ker, G.N)
    return bool(np.all((b == 0) & (c == 0) & (a == d) & (a % p == 1)))


def verify_odd_prime_squared(p=3) -> OddSquareReport:
    """Nilpotent G mod p^2 with p coprime to |G mod p|: abelian or scalar kernel."""
    if p != 3:
        raise ValueError("the exhaustive scan is only run at p = 3")
    N = p * p

    def qualifies(G):
        return gl.reduce_group(G, p).order % p != 0 and G.is_nilpotent()

    rep = OddSquareReport(p, 0, 0, 0)
    for r in gl.enumerate_subgroups(gl.gl2(N), filter=qualifies, strategy="solvable"):
        G = r.group
        rep.checked += 1
        if G.is_abelian():
            rep.abelian += 1
        elif _kernel_is_scalar(G, p):
            rep.scalar_kernel += 1
        else:
            rep.violations.append(G)
    return rep


# ---------------------------------------------------------------------------
# prime shapes and CM splitting

def _is_two_power(m):
    return m >= 1 and m & (m - 1) == 0


@dataclass(frozen=True)
class PrimeShape:
    is_mersenne: bool
    is_fermat: bool
    is_constructible_level: bool


def prime_shape(n) -> PrimeShape:
    if n < 1:
        raise ValueError("n must be positive")
    prime = n >= 2 and sympy.isprime(n)
    fermat = prime and n >= 3 and _is_two_power(n - 1)
    odd = n
    while odd % 2 == 0:
        odd //= 2
    fac = mm.factor(odd)
    constructible = all(e == 1 and _is_two_power(q - 1) for q, e in fac.items())
    return PrimeShape(prime and _is_two_power(n + 1), fermat, constructible)


class Splitting(str, enum.Enum):
    SPLIT = "split"
    INERT = "inert"
    RAMIFIED = "ramified"


def splitting_type(D, p) -> Splitting:
    if D not in ca.CM_DISCRIMINANTS:
        raise ValueError(f"{D} is not a class-number-one discriminant")
    if p == 2 or not sympy.isprime(p):
        raise ValueError(f"splitting type is computed for odd primes, got {p}")
    if D % p == 0:
        return Splitting.RAMIFIED
    K = ca.CmOrder.from_discriminant(D).field_disc
    s = sympy.jacobi_symbol(K % p, p)
    return {1: Splitting.SPLIT, -1: Splitting.INERT, 0: Splitting.RAMIFIED}[s]


# ---------------------------------------------------------------------------
# j = 0: E_d : y^2 = x^3 + d

def _is_square(x: Fraction):
    return x > 0 and math.isqrt(x.numerator) ** 2 == x.numerator \
        and math.isqrt(x.denominator) ** 2 == x.denominator


def _mod3_group(rows):
    return MatGroup.from_elements(3, [int(mm.encode(a, b, c, d, 3)) for a, b, c, d in rows])


def _j0_exponent(p):
    """e in {1, 2} with d = 16 p^e (mod cubes) marking the index-3 image at p."""
    if p % 9 in (4, 7):
        e = ((p - 1) // 3) % 3
    else:
        e = (-((p + 1) // 3)) % 3
    return e


def j0_image(d, p) -> MatGroup:
    d = Fraction(d)
    if d == 0:
        raise ValueError("d must be nonzero")
    if not sympy.isprime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        if mm.is_cube(d):
            return MatGroup(2, [mm.encode(1, 1, 0, 1, 2)])
        return gl.gl2(2)
    if p == 3:
        units, every = (1, 2), (0, 1, 2)
        d_sq, m3d_sq = _is_square(d), _is_square(-3 * d)
        if mm.is_cube(-4 * d):
            if d_sq or m3d_sq:
                return _mod3_group([(1, 0, 0, b) for b in units])
            return _mod3_group([(a, 0, 0, b) for a in units for b in units])
        if d_sq:
            return _mod3_group([(1, a, 0, b) for a in every for b in units])
        if m3d_sq:
            return _mod3_group([(a, b, 0, 1) for a in units for b in every])
        return _mod3_group([(s, a, 0, b) for s in units for a in every for b in units])
    r = p % 9
    if r == 1:
        return ca.split_normalizer(p)
    if r == 8:
        return ca.nonsplit_normalizer(p)
    special = mm.cube_class(d) == mm.cube_class(16 * p ** _j0_exponent(p))
    if r in (4, 7):
        return ca.cube_ratio_split(p) if special else ca.split_normalizer(p)
    return ca.nonsplit_index3(p) if special else ca.nonsplit_normalizer(p)


def j0_candidate_primes(bound=2**20):
    """Primes 3*2^k +- 1 (k >= 1) up to ``bound``, with the sign."""
    out = []
    k = 1
    while 3 * 2**k - 1 <= bound:
        for sign in (1, -1):
            q = 3 * 2**k + sign
            if q <= bound and sympy.isprime(q):
                out.append((q, sign))
        k += 1
    return sorted(out)


def _family_sign(p):
    for sign in (1, -1):
        m = p - sign
        if m % 3 == 0 and m // 3 >= 2 and _is_two_power(m // 3):
            return sign
    return 0


def j0_nilpotent_prime(d):
    """The unique prime p with Q(E_d[p]) nilpotent, or None.

    The class 2 p^e (mod cubes) has support {2, p}, so the only candidate
    beyond 2 and 3 is the odd prime in the support of d's class.
    """
    c = mm.cube_class(d)
    if c == mm.cube_class(1):
        return 2
    if c == mm.cube_class(2):
        return 3
    support = c.as_dict()
    if len(support) != 2 or support.get(2) != 1:
        return None
    (p,) = [q for q in support if q != 2]
    sign = _family_sign(p)
    if sign == 0:
        return None
    if sign == 1:
        e = ((p - 1) // 3) % 3
    else:
        e = (-((p + 1) // 3)) % 3
    return p if support[p] == e else None


# ---------------------------------------------------------------------------
# the classifier

class ImageClass(str, enum.Enum):
    FULL = "full"
    BOREL = "borel"
    SPLIT_NORMALIZER = "split+"
    NONSPLIT_NORMALIZER = "ns+"
    L2201 = "2.2.0.1"
    L2301 = "2.3.0.1"

    @classmethod
    def parse(cls, text):
        aliases = {"s+": "split+", "nonsplit+": "ns+", "ns": "ns+"}
        return cls(aliases.get(text, text))


@dataclass(frozen=True)
class CurveDescriptor:
    kind: str  # "cm", "j0" or "noncm"
    D: int | None = None
    d: Fraction | None = None
    images: tuple = ()  # sorted ((p, ImageClass), ...)
    has_2torsion: bool = False
    square_disc: bool = False

    @classmethod
    def cm(cls, D):
        if D not in ca.CM_DISCRIMINANTS:
            raise MalformedDescriptor(f"{D} is not a class-number-one discriminant")
        if D == -3:
            raise MalformedDescriptor("CM by Z[zeta3] depends on d; use a j = 0 descriptor")
        return cls("cm", D=D)

    @classmethod
    def j0(cls, d):
        d = Fraction(d)
        if d == 0:
            raise MalformedDescriptor("d must be nonzero")
        return cls("j0", d=d)

    @classmethod
    def noncm(cls, images=None, has_2torsion=False, square_disc=False):
        fixed = {}
        for p, c in (images or {}).items():
            p, c = int(p), ImageClass.parse(c) if isinstance(c, str) else c
            if not sympy.isprime(p):
                raise MalformedDescriptor(f"image key {p} is not prime")
            if p == 2 and c in (ImageClass.SPLIT_NORMALIZER, ImageClass.NONSPLIT_NORMALIZER):
                raise MalformedDescriptor("mod-2 images are given by label, borel or full")
            if p != 2 and c in (ImageClass.L2201, ImageClass.L2301):
                raise MalformedDescriptor(f"label {c.value} is a mod-2 image")
            fixed[p] = c
        if 2 not in fixed:
            if has_2torsion:
                fixed[2] = ImageClass.L2301
            elif square_disc:
                fixed[2] = ImageClass.L2201
        elif fixed[2] in (ImageClass.L2301, ImageClass.BOREL):
            has_2torsion = True
        return cls("noncm", images=tuple(sorted(fixed.items())),
                   has_2torsion=bool(has_2torsion), square_disc=bool(square_disc))

    def image_at(self, p):
        return dict(self.images).get(p, ImageClass.FULL)

    def to_json(self):
        out = {"kind": self.kind}
        if self.kind == "cm":
            out["D"] = self.D
        elif self.kind == "j0":
            out["d"] = mm.rational_str(self.d)
        else:
            out["images"] = {str(p): c.value for p, c in self.images}
            out["has_2torsion"] = self.has_2torsion
            out["square_disc"] = self.square_disc
        return out


@dataclass
class Verdict:
    nilpotent: bool
    conditional: bool = False
    reasons: list = field(default_factory=list)

    def to_json(self):
        return {"nilpotent": self.nilpotent, "conditional": self.conditional,
                "reasons": list(self.reasons)}


# rule ids used in Verdict.reasons
RULES = {
    "odd-prime-square": "an odd prime square divides n: never nilpotent",
    "cm-minus-27": "CM by the order of discriminant -27: never nilpotent",
    "cm-ramified": "a prime dividing n ramifies in the CM order",
    "cm-prime-shape": "an odd prime is neither split Fermat nor inert Mersenne",
    "cm-2-inert": "2 is inert in the CM field: even n never nilpotent",
    "cm-2-power": "CM order with a rational 2-torsion point: every 2-power part allowed",
    "cm-ok": "every odd prime is split Fermat or inert Mersenne",
    "j0-single-prime": "j = 0: nilpotent only at the single prime fixed by d mod cubes",
    "two-power-needs-2-torsion": "2-power part above 2 needs a rational 2-torsion point",
    "two-power-tower": "rational 2-torsion point: the 2-adic preimage is a 2-group",
    "image-not-nilpotent": "the mod-p image is not nilpotent",
    "fiber-product-nilpotent": "the mod-rad(n) fiber product is nilpotent",
    "no-rational-points": "the fiber product curve has no non-cuspidal non-CM points",
    "has-rational-points": "every image combination occurs on a non-CM curve",
    "split-cartan-large-p": "split normaliser at p >= 11: only cusps and CM points",
    "lemos-split": "a split image elsewhere forces surjectivity above 5",
    "lemos-isogeny": "a rational 2-isogeny rules out non-split Mersenne images above 7",
    "uniformity-conjecture": "non-split normaliser images above 11 excluded by the uniformity conjecture",
    "conditional-mersenne": "non-split Mersenne image above 7: nilpotent if such a curve exists",
    "flagged-4-mersenne": "flagged: 2-power part >= 4 with a non-split Mersenne image is outside the enumerated list",
    "no-point-data": "no recorded point data for this image combination",
}


def _rule(rid, detail=None):
    return rid if detail is None else f"{rid}:{detail}"


# point facts for combinations of prime-level images; keys use the maximal
# class at each prime, values say whether non-CM rational points exist
_NS, _SP = ImageClass.NONSPLIT_NORMALIZER, ImageClass.SPLIT_NORMALIZER
POINT_FACTS = {
    frozenset({(2, ImageClass.L2201)}): (True, "2.2.0.1"),
    frozenset({(2, ImageClass.L2301)}): (True, "2.3.0.1"),
    frozenset({(3, _NS)}): (True, "3.3.0.1"),
    frozenset({(5, _SP)}): (True, "5.15.0.1"),
    frozenset({(7, _NS)}): (True, "7.21.0.1"),
    frozenset({(2, ImageClass.L2201), (3, _NS)}): (False, "6.6.1.1"),
    frozenset({(2, ImageClass.L2301), (3, _NS)}): (True, "6.9.0.1"),
    frozenset({(2, ImageClass.L2201), (5, _SP)}): (False, "10.30.2.2"),
    frozenset({(2, ImageClass.L2301), (5, _SP)}): (False, "10.45.1.1"),
    frozenset({(2, ImageClass.L2201), (7, _NS)}): (False, "14.42.3.1"),
    frozenset({(2, ImageClass.L2301), (7, _NS)}): (False, "14.63.2.1"),
    frozenset({(3, _NS), (5, _SP)}): (True, "15.45.1.1"),
    frozenset({(3, _NS), (7, _NS)}): (True, "21.63.1.1"),
    frozenset({(5, _SP), (7, _NS)}): (False, "35.315.19.1"),
}


_TABLED = {entry for key in POINT_FACTS for entry in key}


@functools.lru_cache(maxsize=None)
def image_group(cls: ImageClass, p) -> MatGroup:
    if cls is ImageClass.FULL:
        return gl.gl2(p)
    if cls in (ImageClass.BOREL, ImageClass.L2301):
        return ca.borel(p)
    if cls is ImageClass.L2201:
        return ca.nonsplit_cartan(2)
    if cls is ImageClass.SPLIT_NORMALIZER:
        return ca.split_normalizer(p)
    return ca.nonsplit_normalizer(p)


EXPLICIT_LIMIT = 37  # above this the Fermat/Mersenne law stands in for the group


@functools.lru_cache(maxsize=None)
def image_is_nilpotent(cls: ImageClass, p) -> bool:
    if cls is ImageClass.FULL and p > 7:
        return False  # contains SL2(F_p), which is not nilpotent
    if p <= EXPLICIT_LIMIT:
        return image_group(cls, p).is_nilpotent()
    shape = prime_shape(p)
    return {ImageClass.FULL: False, ImageClass.BOREL: False,
            ImageClass.SPLIT_NORMALIZER: shape.is_fermat,
            ImageClass.NONSPLIT_NORMALIZER: shape.is_mersenne}[cls]


def classify(desc: CurveDescriptor, n, assume_conjecture=True) -> Verdict:
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    fac = mm.factor(n)
    bad = [p for p, e in fac.items() if p % 2 and e > 1]
    if bad:
        return Verdict(False, False, [_rule("odd-prime-square", bad[0])])
    if desc.kind == "cm":
        return _classify_cm(desc.D, fac)
    if desc.kind == "j0":
        p = j0_nilpotent_prime(desc.d)
        return Verdict(p == n, False, [_rule("j0-single-prime", p)])
    if desc.kind == "noncm":
        return _classify_noncm(desc, fac, assume_conjecture)
    raise MalformedDescriptor(f"unknown descriptor kind {desc.kind!r}")


_CM_TWO_TORSION = (-4, -7, -8, -12, -16, -28)


def _classify_cm(D, fac):
    if D == -27:
        return Verdict(False, False, [_rule("cm-minus-27")])
    reasons = []
    if 2 in fac:
        if D not in _CM_TWO_TORSION:
            return Verdict(False, False, [_rule("cm-2-inert")])
        reasons.append(_rule("cm-2-power"))
    for p in sorted(q for q in fac if q % 2):
        st = splitting_type(D, p)
        if st is Splitting.RAMIFIED:
            return Verdict(False, False, [_rule("cm-ramified", p)])
        shape = prime_shape(p)
        ok = (st is Splitting.SPLIT and shape.is_fermat) or \
             (st is Splitting.INERT and shape.is_mersenne)
        if not ok:
            return Verdict(False, False, [_rule("cm-prime-shape", p)])
    reasons.append(_rule("cm-ok"))
    return Verdict(True, False, reasons)


FIBER_LIMIT = 200_000


def _classify_noncm(desc, fac, assume_conjecture):
    reasons = []
    primes = sorted(fac)
    classes = {p: desc.image_at(p) for p in primes}
    if classes.get(2) is ImageClass.BOREL:
        classes[2] = ImageClass.L2301

    two = fac.get(2, 0)
    if two >= 2:
        if not desc.has_2torsion:
            return Verdict(False, False, [_rule("two-power-needs-2-torsion")])
        reasons.append(_rule("two-power-tower"))

    for p in primes:
        if not image_is_nilpotent(classes[p], p):
            return Verdict(False, False, [_rule("image-not-nilpotent", p)])
    fiber = _fiber_nilpotent(tuple((p, classes[p]) for p in primes))
    if fiber is False:
        return Verdict(False, False, [_rule("image-not-nilpotent", "fiber")])
    if fiber:
        reasons.append(_rule("fiber-product-nilpotent"))

    # the curve's own data, even at primes not dividing n
    all_images = dict(desc.images)
    for p, c in classes.items():
        all_images.setdefault(p, c)
    split_at = [p for p, c in all_images.items() if c is ImageClass.SPLIT_NORMALIZER]
    ns_at = [p for p, c in all_images.items() if c is ImageClass.NONSPLIT_NORMALIZER]

    big_split = [p for p in primes if classes[p] is ImageClass.SPLIT_NORMALIZER and p >= 11]
    if big_split:
        return Verdict(False, False, [_rule("split-cartan-large-p", big_split[0])])
    if split_at and any(p >= 7 for p in ns_at):
        return Verdict(False, False, [_rule("lemos-split")])

    big_ns = [p for p in primes if classes[p] is ImageClass.NONSPLIT_NORMALIZER and p > 7]
    conditional = bool(big_ns)
    if big_ns:
        if desc.has_2torsion:
            return Verdict(False, False, [_rule("lemos-isogeny", big_ns[0])])
        if assume_conjecture:
            return Verdict(False, True, [_rule("uniformity-conjecture", big_ns[0])])

    small = {(p, _fact_class(p, classes[p])) for p in primes if p not in big_ns}
    # tabled images at primes outside n still constrain the curve
    small |= {(p, _fact_class(p, c)) for p, c in all_images.items()
              if p not in classes and (p, _fact_class(p, c)) in _TABLED}
    small = frozenset(small)
    if small:
        ok, why = _feasible(small)
        if not ok:
            return Verdict(False, conditional, reasons + [why])
        reasons.append(why)

    if two >= 2 and any(_fact_class(p, classes[p]) is ImageClass.NONSPLIT_NORMALIZER
                        for p in primes):
        return Verdict(False, conditional, reasons + [_rule("flagged-4-mersenne")])
    if conditional:
        reasons.append(_rule("conditional-mersenne", big_ns[0]))
    return Verdict(True, conditional, reasons)


@functools.lru_cache(maxsize=None)
def _fiber_nilpotent(assignment):
    """Nilpotency of the explicit fiber product, or None when it is too big to build."""
    sizes = [mm.gl2_order(p) if c is ImageClass.FULL else
             image_group(c, p).order if p <= EXPLICIT_LIMIT else math.inf
             for p, c in assignment]
    if math.prod(sizes) > FIBER_LIMIT:
        return None
    (p0, c0), *rest = assignment
    G = image_group(c0, p0)
    for p, c in rest:
        G = fiber_product(G, image_group(c, p))
    return G.is_nilpotent()


def _fact_class(p, c):
    # C_s+(3) sits inside a conjugate of C_ns+(3), the Sylow 2-subgroup
    if p == 3 and c is ImageClass.SPLIT_NORMALIZER:
        return ImageClass.NONSPLIT_NORMALIZER
    return c


def _feasible(combo):
    for key, (ok, label) in POINT_FACTS.items():
        if not ok and key <= combo:
            return False, _rule("no-rational-points", label)
    if combo in POINT_FACTS:
        return True, _rule("has-rational-points", POINT_FACTS[combo][1])
    return False, _rule("no-point-data")


def nilpotent_levels(max_n=64, assume_conjecture=True):
    """Levels n <= max_n at which some non-CM image assignment classifies nilpotent."""
    out = []
    for n in range(2, max_n + 1):
        if any(classify(desc, n, assume_conjecture).nilpotent
               for desc in noncm_descriptors(n)):
            out.append(n)
    return out


def noncm_descriptors(n):
    """Every non-CM image assignment over the primes dividing n."""
    primes = sorted(mm.factor(n))
    choices = []
    for p in primes:
        if p == 2:
            choices.append([ImageClass.FULL, ImageClass.L2201, ImageClass.L2301])
        else:
            choices.append([ImageClass.FULL, ImageClass.BOREL, ImageClass.SPLIT_NORMALIZER,
                            ImageClass.NONSPLIT_NORMALIZER])
    for pick in itertools.product(*choices):
        images = dict(zip(primes, pick))
        flags = [False, True] if 2 not in images else [images[2] is ImageClass.L2301]
        for tor in flags:
            yield CurveDescriptor.noncm(images, has_2torsion=tor)
