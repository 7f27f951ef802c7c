"""
Levels with nilpotent division fields
=====================================

Put the prime-level pieces together: fiber products of the nilpotent images
at two primes, the recorded facts about their rational points, and the
resulting verdicts for CM, j = 0 and generic curves.
"""

from nilpdiv import cartan as ca
from nilpdiv import nilpclass as nc
from nilpdiv.modcurve import fiber_product, invariants
from nilpdiv.nilpclass import CurveDescriptor

# Fiber products of two maximal nilpotent images and their modular curves.
pairs = [(ca.nonsplit_cartan(2), ca.nonsplit_normalizer(3)),
         (ca.borel(2), ca.nonsplit_normalizer(3)),
         (ca.nonsplit_normalizer(3), ca.split_normalizer(5)),
         (ca.split_normalizer(5), ca.nonsplit_normalizer(7))]
for G, H in pairs:
    F = fiber_product(G, H)
    print(invariants(F).label_prefix, "nilpotent" if F.is_nilpotent() else "not nilpotent")

# Verdicts carry the ids of the rules that decided them.
print(nc.classify(CurveDescriptor.noncm({3: "ns+", 7: "ns+"}), 21).to_json())
print(nc.classify(CurveDescriptor.noncm({5: "split+", 7: "ns+"}), 35).to_json())
print(nc.classify(CurveDescriptor.cm(-27), 6).to_json())
print(nc.classify(CurveDescriptor.cm(-4), 5).to_json())

# A generic curve: the levels n <= 64 where some image assignment works.
print(nc.nilpotent_levels(64))
# without the uniformity conjecture, Mersenne primes above 7 come back as
# conditional cases
print(nc.nilpotent_levels(64, assume_conjecture=False))

# j = 0: y^2 = x^3 + d is nilpotent at exactly one prime, read off from d
# modulo cubes.
for d in (1, 2, 16 * 97**2, 5):
    print(d, nc.j0_nilpotent_prime(d))
