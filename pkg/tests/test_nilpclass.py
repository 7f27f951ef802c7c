import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from nilpdiv import cartan as ca
from nilpdiv import grouplat as gl
from nilpdiv import modmat as mm
from nilpdiv import nilpclass as nc
from nilpdiv.nilpclass import CurveDescriptor, ImageClass


# ---------------------------------------------------------------------------
# admissibility against a direct reading of the definition

def brute_admissible(G):
    N = G.N
    mats = [mm.decode_one(int(c), N) for c in G.elements]
    dets = {(a * d - b * c) % N for a, b, c, d in mats}
    if dets != {u for u in range(N) if math.gcd(u, N) == 1}:
        return False
    for a, b, c, d in mats:
        if (a * d - b * c) % N != N - 1 or (a + d) % N:
            continue
        for v1, v2 in itertools.product(range(N), repeat=2):
            if math.gcd(math.gcd(v1, v2), N) == 1 and \
                    ((a * v1 + b * v2 - v1) % N, (c * v1 + d * v2 - v2) % N) == (0, 0):
                return True
    return False


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_admissibility_matches_definition(N):
    ambient = gl.gl2(N)
    strategy = "full" if N == 5 else "solvable"
    reps = gl.enumerate_subgroups(ambient, strategy=strategy,
                                  filter=(lambda G: G.order <= 96) if N == 5 else None)
    assert reps
    for r in reps:
        assert nc.is_admissible(r.group) == brute_admissible(r.group), r.group


def test_admissibility_examples():
    assert not nc.is_admissible(ca.nonsplit_cartan(7))
    assert nc.is_admissible(ca.nonsplit_normalizer(7))
    assert nc.is_admissible(gl.MatGroup(2, [mm.Mat2(1, 1, 0, 1, 2)]))


# ---------------------------------------------------------------------------
# projective classes

def test_projective_classes():
    assert str(nc.projective_class(ca.nonsplit_normalizer(7))) == "Dihedral(8)"
    assert str(nc.projective_class(ca.split_normalizer(7))) == "Dihedral(6)"
    assert nc.projective_class(gl.gl2(5)).tag == "ContainsSL2"
    assert nc.projective_class(ca.borel(5)).tag == "BorelType"
    assert nc.projective_class(ca.nonsplit_cartan(5)).tag == "Cyclic"
    assert nc.projective_class(gl.gl2(3)).tag == "ContainsSL2"
    assert nc.projective_class(ca.nonsplit_normalizer(3)).is_two_power_dihedral


def test_exceptional_projective_images():
    # GL2(F5) mod scalars is S5; its S4 (order 24 projectively) from the octahedral group
    found = {nc.projective_class(r.group).tag
             for r in gl.enumerate_subgroups(gl.gl2(5), strategy="full")}
    assert {"A4", "S4", "Cyclic", "Dihedral", "BorelType", "ContainsSL2"} <= found


# ---------------------------------------------------------------------------
# prime-level searches

def test_maximal_nilpotent_small_primes():
    labels = lambda p, **kw: sorted(c.invariants.label_prefix
                                    for c in nc.maximal_nilpotent_admissible(p, **kw))
    assert labels(2) == ["2.2.0", "2.3.0"]
    assert labels(3) == ["3.3.0"]
    assert labels(5) == ["5.15.0"]
    assert labels(5, require_admissible=False) == ["5.15.0", "5.20.0"]


def test_shapes_at_three():
    rep = nc.nilpotent_admissible_shapes(3)
    assert rep.checked > 0 and not rep.violations
    assert rep.abelian + rep.dihedral == rep.checked


def test_two_adic_tower():
    rep = nc.two_adic_tower_check(ca.nonsplit_cartan(2), 2)
    assert rep.survivors == []
    assert nc.two_adic_tower_check(ca.nonsplit_cartan(2), 2, exhaustive=True).survivors == []
    rep = nc.two_adic_tower_check(ca.borel(2), 3)
    assert rep.preimage_nilpotent and rep.preimage_order == 2 * 16 * 16
    with pytest.raises(ValueError):
        nc.two_adic_tower_check(ca.borel(3), 2)


# ---------------------------------------------------------------------------
# prime shapes and splitting

def test_prime_shape():
    assert nc.prime_shape(7).is_mersenne and not nc.prime_shape(7).is_fermat
    assert nc.prime_shape(17).is_fermat
    assert nc.prime_shape(3).is_mersenne and nc.prime_shape(3).is_fermat
    assert not nc.prime_shape(15).is_mersenne
    assert nc.prime_shape(60).is_constructible_level
    assert not nc.prime_shape(9).is_constructible_level
    with pytest.raises(ValueError):
        nc.prime_shape(0)


def kronecker_oracle(D, p):
    """Splitting of p in Q(sqrt D) by counting roots of x^2 - D mod p."""
    roots = sum((x * x - D) % p == 0 for x in range(p))
    return {2: "split", 0: "inert", 1: "ramified"}[roots]


@pytest.mark.parametrize("D", sorted(ca.CM_DISCRIMINANTS))
def test_splitting_against_root_count(D):
    for p in sympy.primerange(3, 80):
        got = nc.splitting_type(D, p).value
        K = ca.CmOrder.from_discriminant(D).field_disc
        want = "ramified" if D % p == 0 else kronecker_oracle(K, p)
        assert got == want, (D, p)


def test_fermat_mersenne_law_small():
    for p in sympy.primerange(3, 40):
        shape = nc.prime_shape(p)
        assert ca.split_normalizer(p).is_nilpotent() == shape.is_fermat
        assert ca.nonsplit_normalizer(p).is_nilpotent() == shape.is_mersenne


# ---------------------------------------------------------------------------
# j = 0 images against Frobenius traces of y^2 = x^3 + d

def _trace_of_frobenius(d, ell):
    x = np.arange(ell, dtype=np.int64)
    rhs = (x * x % ell * x + d) % ell
    sq = np.zeros(ell, dtype=np.int64)
    np.add.at(sq, x * x % ell, 1)
    return ell - int(sq[rhs].sum())


def frobenius_pairs(d, p, bound=1500):
    """(trace, det) mod p of Frobenius at good primes below ``bound``."""
    d = Fraction(d)
    bad = set(mm.factor(6 * p * d.numerator * d.denominator))
    out = set()
    for ell in sympy.primerange(5, bound):
        if ell in bad:
            continue
        dl = d.numerator * pow(d.denominator, -1, ell) % ell
        out.add((_trace_of_frobenius(dl, ell) % p, ell % p))
    return out


def char_pairs(G):
    el = G.elements
    return set(zip((mm.ptrace(el, G.N) % G.N).tolist(), (mm.pdet(el, G.N) % G.N).tolist()))


@pytest.mark.parametrize("d,p", [(1, 2), (2, 2), (1, 3), (2, 3), (-3, 3), (-432, 3), (5, 3),
                                 (2, 5), (10, 5), (50, 5), (3, 7), (2 * 7**2, 7),
                                 (16 * 11, 11), (2 * 11**2, 11), (2, 13), (2 * 13**2, 13)])
def test_j0_image_contains_frobenius(d, p):
    assert frobenius_pairs(d, p) <= char_pairs(nc.j0_image(d, p))


@pytest.mark.parametrize("p", [5, 11, 23])
def test_j0_special_class_is_detected(p):
    special = 16 * p ** nc._j0_exponent(p)
    small = nc.j0_image(special, p)
    assert small.order * 3 == ca.nonsplit_normalizer(p).order
    # a generic d escapes the index-3 subgroup
    assert not frobenius_pairs(2, p) <= char_pairs(small)


def test_j0_nilpotent_prime_examples():
    assert nc.j0_nilpotent_prime(1) == 2
    assert nc.j0_nilpotent_prime(2) == 3
    assert nc.j0_nilpotent_prime(16 * 97**2) == 97
    assert nc.j0_nilpotent_prime(5) is None
    assert nc.j0_nilpotent_prime(Fraction(27, 8)) == 2


def test_j0_prime_against_candidate_scan():
    for q, _ in nc.j0_candidate_primes(2**12):
        if q in (5, 7, 11, 13, 23):
            hits = [d for d in (2 * q, 2 * q * q, 4 * q, 4 * q * q)
                    if nc.j0_nilpotent_prime(d) == q]
            assert len(hits) == 1, q


@given(st.integers(1, 10**6), st.integers(1, 10**3))
def test_j0_prime_is_cube_invariant(a, u):
    assert nc.j0_nilpotent_prime(a) == nc.j0_nilpotent_prime(a * u**3)


# ---------------------------------------------------------------------------
# descriptors and the classifier

def test_descriptor_validation():
    with pytest.raises(nc.MalformedDescriptor):
        CurveDescriptor.cm(-5)
    with pytest.raises(nc.MalformedDescriptor):
        CurveDescriptor.j0(0)
    with pytest.raises(nc.MalformedDescriptor):
        CurveDescriptor.noncm({4: "borel"})
    with pytest.raises(nc.MalformedDescriptor):
        CurveDescriptor.noncm({2: "ns+"})
    assert CurveDescriptor.noncm({3: "s+"}).image_at(3) is ImageClass.SPLIT_NORMALIZER
    assert CurveDescriptor.noncm(has_2torsion=True).image_at(2) is ImageClass.L2301


def test_cm_rules():
    assert not nc.classify(CurveDescriptor.cm(-27), 6).nilpotent
    for n in range(2, 65, 2):
        assert not nc.classify(CurveDescriptor.cm(-11), n).nilpotent
    assert nc.classify(CurveDescriptor.cm(-4), 5).nilpotent      # 5 splits, Fermat
    assert nc.classify(CurveDescriptor.cm(-4), 7).nilpotent      # 7 inert, Mersenne
    assert not nc.classify(CurveDescriptor.cm(-4), 13).nilpotent  # splits, not Fermat
    assert not nc.classify(CurveDescriptor.cm(-7), 7).nilpotent   # ramified
    assert nc.classify(CurveDescriptor.cm(-4), 9).reasons == ["odd-prime-square:3"]


def test_noncm_examples():
    ns = lambda spec, **kw: CurveDescriptor.noncm(spec, **kw)
    assert nc.classify(ns({3: "ns+", 7: "ns+"}), 21).nilpotent
    assert not nc.classify(ns({5: "split+", 7: "ns+"}), 35).nilpotent
    assert nc.classify(ns({}, has_2torsion=True), 64).nilpotent
    assert not nc.classify(ns({}), 4).nilpotent
    v = nc.classify(ns({3: "ns+"}, has_2torsion=True), 12)
    assert not v.nilpotent and "flagged-4-mersenne" in v.reasons


def test_conjecture_flag():
    d = CurveDescriptor.noncm({31: "ns+"})
    assert not nc.classify(d, 31).nilpotent
    v = nc.classify(d, 31, assume_conjecture=False)
    assert v.nilpotent and v.conditional


def test_level_sets():
    with_conj = nc.nilpotent_levels(64)
    assert with_conj == [2, 3, 4, 5, 6, 7, 8, 15, 16, 21, 32, 64]
    assert sorted(set(nc.nilpotent_levels(64, assume_conjecture=False)) - set(with_conj)) == [31, 62]


divisor_pairs = st.integers(2, 64).flatmap(
    lambda n: st.tuples(st.just(n), st.sampled_from([m for m in range(2, n + 1) if n % m == 0])))


@given(divisor_pairs, st.data())
def test_nilpotency_passes_to_divisors(pair, data):
    n, m = pair
    descs = list(nc.noncm_descriptors(n))
    desc = data.draw(st.sampled_from(descs))
    if nc.classify(desc, n).nilpotent:
        assert nc.classify(desc, m).nilpotent


@given(st.sampled_from([D for D in sorted(ca.CM_DISCRIMINANTS) if D != -3]), divisor_pairs)
def test_cm_verdict_monotone(D, pair):
    n, m = pair
    if nc.classify(CurveDescriptor.cm(D), n).nilpotent:
        assert nc.classify(CurveDescriptor.cm(D), m).nilpotent


def test_verdict_json():
    v = nc.classify(CurveDescriptor.cm(-27), 6).to_json()
    assert v == {"nilpotent": False, "conditional": False, "reasons": ["cm-minus-27"]}
    assert all(r.split(":")[0] in nc.RULES for r in
               nc.classify(CurveDescriptor.noncm({7: "ns+"}), 14).reasons)
