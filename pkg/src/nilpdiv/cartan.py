"""Borel subgroups, Cartan subgroups and their normalisers, CM Cartans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from . import modmat as mm
from .grouplat import MatGroup, join

KINDS = ("borel", "split", "split+", "nonsplit", "nonsplit+", "nonsplit-3", "cubes",
         "ram-g", "ram-h1", "ram-h2")

# class-number-one discriminants
CM_DISCRIMINANTS = (-3, -4, -7, -8, -11, -12, -16, -19, -27, -28, -43, -67, -163)


class UnsupportedKind(ValueError):
    pass


@dataclass(frozen=True)
class CmOrder:
    D: int
    f: int
    phi: int
    delta: int
    field_disc: int

    @classmethod
    def from_discriminant(cls, D):
        if D >= 0 or D % 4 not in (0, 1):
            raise ValueError(f"{D} is not a negative discriminant")
        f = 1
        for p, e in mm.factor(D).items():
            for _ in range(e // 2):
                # p^2 | D with D/p^2 still a discriminant
                if (D // (f * p) ** 2) % 4 in (0, 1) and D % (f * p) ** 2 == 0:
                    f *= p
        K = D // (f * f)
        phi = f if D % 2 else 0
        return cls(D, f, phi, (D - phi * phi) // 4, K)


def primitive_root(p):
    return int(sympy.primitive_root(p))


def _units(p):
    return np.array([u for u in range(1, p) if math.gcd(u, p) == 1], dtype=np.int64)


def _diagonal_gens(p):
    if p == 2:
        return []
    g = primitive_root(p)
    return [int(mm.encode(g, 0, 0, 1, p)), int(mm.encode(1, 0, 0, g, p))]


def borel(p):
    a, b, d = np.meshgrid(_units(p), np.arange(p), _units(p), indexing="ij")
    gens = _diagonal_gens(p) + [int(mm.encode(1, 1, 0, 1, p))]
    return MatGroup.from_elements(p, mm.encode(a.ravel(), b.ravel(), 0, d.ravel(), p),
                                  gens=np.array(gens, dtype=np.int64))


def split_cartan(p):
    a, d = np.meshgrid(_units(p), _units(p), indexing="ij")
    return MatGroup.from_elements(p, mm.encode(a.ravel(), 0, 0, d.ravel(), p),
                                  gens=np.array(_diagonal_gens(p), dtype=np.int64))


def _cyclic_generator(codes, N, order):
    """An element of the cyclic group ``codes`` (of the given order) generating it."""
    ok = np.ones(codes.size, dtype=bool)
    for q in mm.factor(order):
        ok &= mm.ppow(codes, order // q, N) != mm.identity_code(N)
    return int(codes[np.argmax(ok)])


def split_normalizer(p):
    C = split_cartan(p)
    return join(C, mm.encode(0, 1, 1, 0, p))


def nonsplit_cartan(p, eps=None):
    """{[[a, eps*b], [b, a]]} with eps a non-square (for p = 2, x^2+x+1)."""
    if p == 2:
        return MatGroup.from_elements(2, [mm.identity_code(2), int(mm.encode(1, 1, 1, 0, 2)),
                                          int(mm.encode(0, 1, 1, 1, 2))])
    eps = primitive_root(p) if eps is None else eps
    a, b = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    a, b = a.ravel(), b.ravel()
    keep = (a * a - eps * b * b) % p != 0
    codes = mm.encode(a[keep], eps * b[keep], b[keep], a[keep], p)
    gen = _cyclic_generator(codes, p, p * p - 1)
    return MatGroup.from_elements(p, codes, gens=np.array([gen], dtype=np.int64))


def nonsplit_normalizer(p, eps=None):
    if p == 2:
        raise UnsupportedKind("the nonsplit normaliser is only built for odd p")
    return join(nonsplit_cartan(p, eps), mm.encode(1, 0, 0, -1, p))


def nonsplit_index3(p):
    """The index-3 subgroup of the nonsplit normaliser (unique up to conjugacy).

    When 3 | p+1 the normaliser maps onto S3: the Cartan goes onto C3 by
    x -> x^((p^2-1)/3), and the involution acts on C3 as x -> x^p, which is
    inversion. Index-3 subgroups are the preimages of the three order-2
    subgroups of S3; we return the one through diag(1, -1).
    """
    if p == 2 or (p + 1) % 3:
        raise UnsupportedKind(f"index-3 subgroup needs 3 | p+1, got p={p}")
    K = cubes_nonsplit(p)
    assert 3 * K.order == 2 * (p * p - 1)
    return K


def cube_ratio_split(p):
    """Elements of the split normaliser whose diagonal ratio a/b is a cube."""
    if (p - 1) % 3:
        raise UnsupportedKind(f"cubes are not a proper subgroup of F_{p}^x")
    cubes = {pow(u, 3, p) for u in range(1, p)}
    el = []
    for a in range(1, p):
        for b in range(1, p):
            if (a * pow(b, -1, p)) % p in cubes:
                el.append(int(mm.encode(a, 0, 0, b, p)))
                el.append(int(mm.encode(0, a, b, 0, p)))
    return MatGroup.from_elements(p, el)


def cubes_nonsplit(p):
    """{a^3} together with {a^3 diag(1,-1)}, a running over the nonsplit Cartan."""
    C = nonsplit_cartan(p)
    cubes = np.unique(mm.ppow(C.elements, 3, p))
    return join(MatGroup(p, _gens_of(cubes, p)), mm.encode(1, 0, 0, -1, p))


def _gens_of(codes, N):
    from .grouplat import small_generating_set
    return small_generating_set(codes, N)


def ramified_images(p):
    """The three upper-triangular groups G, H1, H2 for a ramified prime."""
    if p % 2 == 0:
        raise UnsupportedKind("ramified images are defined for odd p")
    units = range(1, p)
    squares = {pow(u, 2, p) for u in units}
    G, H1, H2 = [], [], []
    for a in units:
        for b in range(p):
            for s in (1, -1):
                G.append(int(mm.encode(a, b, 0, s * a, p)))
                if a in squares:
                    H1.append(int(mm.encode(a, b, 0, s * a, p)))
                    H2.append(int(mm.encode(s * a, b, 0, a, p)))
    return [MatGroup.from_elements(p, x) for x in (G, H1, H2)]


def standard_group(kind, p):
    if not sympy.isprime(p):
        raise UnsupportedKind(f"{p} is not prime")
    if kind == "borel":
        return borel(p)
    if kind == "split":
        return split_cartan(p)
    if kind == "split+":
        if p == 2:
            raise UnsupportedKind("split normaliser at 2 is all of GL2")
        return split_normalizer(p)
    if kind == "nonsplit":
        return nonsplit_cartan(p)
    if kind == "nonsplit+":
        return nonsplit_normalizer(p)
    if kind == "nonsplit-3":
        return nonsplit_index3(p)
    if kind == "cubes":
        if p == 2:
            raise UnsupportedKind("cubes kind needs p odd")
        return cubes_nonsplit(p)
    if kind in ("ram-g", "ram-h1", "ram-h2"):
        return ramified_images(p)[("ram-g", "ram-h1", "ram-h2").index(kind)]
    raise UnsupportedKind(f"unknown kind {kind!r}")


def cm_cartan(order: CmOrder, N) -> MatGroup:
    a, b = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    a, b = a.ravel(), b.ravel()
    norm = (a * a + a * b * order.phi - order.delta * b * b) % N
    units = np.array([math.gcd(u, N) == 1 for u in range(N)])
    keep = units[norm]
    a, b = a[keep], b[keep]
    return MatGroup.from_elements(N, mm.encode(a + b * order.phi, b, order.delta * b, a, N))


def cm_normalizer(order: CmOrder, N) -> MatGroup:
    return join(cm_cartan(order, N), mm.encode(-1, 0, order.phi, 1, N))


def scalars(G):
    el = G.elements
    a, b, c, d = mm.decode(el, G.N)
    return el[(b == 0) & (c == 0) & (a == d)]


def size_tower_holds(order: CmOrder, p, k, normalizer=False):
    """|C(p^k)| = p^(2(k-1)) |C(p)| (or the same for the normalisers)."""
    build = cm_normalizer if normalizer else cm_cartan
    return build(order, p**k).order == p ** (2 * (k - 1)) * build(order, p).order


def non_scalar_central(G):
    """Central elements of G that are not scalar matrices."""
    return np.setdiff1d(G.center().elements, scalars(G))


def center_is_scalar(G):
    return non_scalar_central(G).size == 0
