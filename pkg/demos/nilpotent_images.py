"""
Nilpotent images modulo a prime
===============================

Which subgroups of GL2(F_p) can be the mod-p image of an elliptic curve over
Q and still have a nilpotent Galois group?  We list the maximal ones, look at
them modulo scalars, and see what the admissibility test is doing.
"""

from nilpdiv import cartan as ca
from nilpdiv import nilpclass as nc

# The search: every class of nilpotent subgroups, filtered by admissibility
# (surjective determinant and a complex-conjugation-like element), then the
# maximal ones.
for p in (2, 3, 5, 7):
    found = nc.maximal_nilpotent_admissible(p)
    print(p, [(c.invariants.label_prefix, str(c.projective)) for c in found])

# At p = 5 the order-24 classes of index 20 are nilpotent with onto
# determinant, but none contains an element of det -1 and trace 0 fixing a
# vector of order 5.  Dropping that condition brings them back.
print(sorted(c.invariants.label_prefix
             for c in nc.maximal_nilpotent_admissible(5, require_admissible=False)))

# Modulo scalars nilpotent images are cyclic or 2-power dihedral.
for name, G in [("C_ns+(7)", ca.nonsplit_normalizer(7)), ("C_s+(5)", ca.split_normalizer(5)),
                ("C_s+(7)", ca.split_normalizer(7))]:
    print(name, G.order, nc.projective_class(G), "nilpotent" if G.is_nilpotent() else "")

# Normalisers of Cartans are nilpotent exactly at Fermat (split) and
# Mersenne (nonsplit) primes.
for p in (3, 5, 7, 13, 17, 31):
    s = nc.prime_shape(p)
    print(p, "fermat" if s.is_fermat else "", "mersenne" if s.is_mersenne else "",
          ca.split_normalizer(p).is_nilpotent(), ca.nonsplit_normalizer(p).is_nilpotent())
