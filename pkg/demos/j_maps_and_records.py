"""
j-invariants from points
========================

Points on the modular curves give j-invariants through exact rational maps.
We evaluate a few, walk around a genus-one curve with the group law, and
read LMFDB-style records back into classifier descriptors.
"""

from fractions import Fraction

from nilpdiv import jmaps, lmfdb
from nilpdiv.nilpclass import classify

print(jmaps.evaluate("f7", 2), jmaps.evaluate("f7", jmaps.INFINITY))
print(jmaps.evaluate("h2", 256), jmaps.evaluate("f2", 0))

# Genus-one maps take points of y^2 + y = x^3 + c.
P = (Fraction(-1), Fraction(0))
print(jmaps.on_curve("E15", P), jmaps.evaluate("f15", P))
for P in [(0, 3), (2, 4), (2, -5), (14, 52)]:
    print(P, jmaps.evaluate("f21", P))

# Records ship as fixtures, so this works offline.
for label in ("32.a3", "1.a1", "1.b1"):
    rec = lmfdb.fetch_curve(label)
    desc = lmfdb.to_descriptor(rec)
    print(label, rec.j_invariant, desc.to_json())
    print("   n=7:", classify(desc, 7).nilpotent, " n=3:", classify(desc, 3).nilpotent)
