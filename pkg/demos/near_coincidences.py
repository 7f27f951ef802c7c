"""
Near coincidences of division fields
====================================

When is Q(E[p^k]) only slightly bigger than Q(E[p^(k-1)])?  The image G of
the p^k-adic representation has to meet the determinant-one kernel of
reduction trivially.  The searches below find the maximal such G.
"""

from nilpdiv import grouplat as gl
from nilpdiv import nearco

# The predicate on the whole group fails: the kernel of reduction mod 2 in
# GL2(Z/4) contains plenty of determinant-one matrices.
print(nearco.represents_nearco(gl.gl2(4), 2))

# The maximal groups at (4, 2) and (9, 3), with their modular curves.
for p, k in [(2, 2), (3, 2)]:
    for c in nearco.maximal_nearco(p, k):
        print(c.invariants.label_prefix, "kernel", c.kernel_order,
              "admissible" if c.admissible else "")

# At (8, 4) every maximal group has positive genus, so there are only
# finitely many curves to look at.
print(sorted(c.invariants.genus for c in nearco.maximal_nearco(2, 3)))

# The layer-by-layer search relies on (I + p^n X)^p = I + p^(n+1) X mod
# p^(n+2).  It holds for odd p and for n >= 2, and breaks at (2, 1):
print(nearco.lift_identity_check(3, 1, trials=1000))
print(nearco.lift_identity_check(2, 1).witness)
