"""Exact j-maps X_G -> X(1) for the genus 0 and genus 1 curves with rational points."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

INFINITY = "inf"


class Pole(ArithmeticError):
    pass


class NotOnCurve(ValueError):
    pass


# genus-1 models y^2 + y = x^3 + c
CURVES = {"E15": 1, "E21": 12}


def on_curve(curve_id, point) -> bool:
    c = CURVES[curve_id]
    x, y = (Fraction(v) for v in point)
    return y * y + y == x**3 + c


# a polynomial is a tuple of coefficients, constant term first
def _poly_eval(coeffs, t):
    out = Fraction(0)
    for c in reversed(coeffs):
        out = out * t + c
    return out


@dataclass(frozen=True)
class RationalMap:
    """prod(num_i^e_i) / prod(den_j^f_j) in one variable, kept factored."""

    num: tuple  # ((coeffs, exponent), ...)
    den: tuple

    def degrees(self):
        deg = lambda fs: sum((len(c) - 1) * e for c, e in fs)
        return deg(self.num), deg(self.den)

    def leading(self):
        lead = lambda fs: _prod(Fraction(c[-1]) ** e for c, e in fs)
        return lead(self.num), lead(self.den)

    def __call__(self, t):
        if t == INFINITY:
            dn, dd = self.degrees()
            if dn > dd:
                raise Pole("pole at infinity")
            if dn < dd:
                return Fraction(0)
            a, b = self.leading()
            return a / b
        t = Fraction(t)
        den = _prod(_poly_eval(c, t) ** e for c, e in self.den)
        if den == 0:
            raise Pole(f"pole at t = {t}")
        return _prod(_poly_eval(c, t) ** e for c, e in self.num) / den


def _prod(values):
    out = Fraction(1)
    for v in values:
        out *= v
    return out


MAPS_P1 = {
    "f2": RationalMap((((1728, 0, 1), 1),), ()),
    "h2": RationalMap((((256, -1), 3),), (((0, 1), 2),)),
    "f3": RationalMap((((0, 1), 3),), ()),
    "f5": RationalMap((((5, 1), 3), ((-5, 0, 1), 3), ((10, 5, 1), 3)),
                      (((5, 5, 1), 5),)),
    "f6": RationalMap((((-15, 3, 3, 1), 3),), (((1, 1), 3),)),
    "f7": RationalMap((((-1, 2), 3), ((2, -1, 1), 3), ((4, 5, 2), 3), ((-4, 2, 5), 3)),
                      (((-1, -1, 2, 1), 7),)),
}

GENUS_ONE = {"f15": "E15", "f21": "E21"}
MAP_IDS = tuple(MAPS_P1) + tuple(GENUS_ONE)


def _f15(x, y):
    num = (y + 3) ** 3 * (y * y - 4 * y - 1) ** 3 * (y * y + y + 4) ** 3
    den = x**6 * (y * y + y - 1) ** 5
    if den == 0:
        raise Pole(f"pole at ({x}, {y})")
    return num / den


def _f21(x, y):
    u = x * x - 4 * x + 19
    top = x * x + 5 * x - 14  # (x - 2)(x + 7)
    bottom = u + 3 * y
    if bottom != 0:
        return MAPS_P1["f7"](top / bottom)
    if top != 0:
        return MAPS_P1["f7"](INFINITY)
    # both vanish at (2, -5); multiplying by the conjugate u - 3 - 3y turns the
    # denominator into (x - 2)(x - 14)(x^2 - x + 7) on the curve
    return MAPS_P1["f7"]((x + 7) * (u - 3 - 3 * y) / ((x - 14) * (x * x - x + 7)))


def evaluate(map_id, point):
    """j-invariant of the image of ``point``; genus-1 maps take (x, y) or None."""
    if map_id in MAPS_P1:
        if isinstance(point, (tuple, list)):
            raise TypeError(f"{map_id} takes a single parameter")
        return MAPS_P1[map_id](point if point == INFINITY else Fraction(point))
    if map_id not in GENUS_ONE:
        raise KeyError(f"unknown j-map {map_id!r}")
    if point is None or point == INFINITY:
        raise Pole("the base point of the genus-1 model is treated as a pole")
    x, y = (Fraction(v) for v in point)
    if not on_curve(GENUS_ONE[map_id], (x, y)):
        raise NotOnCurve(f"({x}, {y}) is not on the model of {map_id}")
    return _f15(x, y) if map_id == "f15" else _f21(x, y)
