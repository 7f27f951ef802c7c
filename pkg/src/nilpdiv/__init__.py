"""Nilpotent division fields and near coincidences of elliptic curves over Q.

Subgroups of GL2(Z/n), their modular curves, and the classification of the
levels n at which Q(E[n]) can have nilpotent Galois group.
"""

__version__ = "0.1.0"
# bump the engine suffix whenever a search result can change
ENGINE_VERSION = f"{__version__}+engine.1"
