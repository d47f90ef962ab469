"""Atomic-pattern elliptic-curve scalar multiplication on P-256, a synthetic
EM trace simulator for it, and horizontal side-channel analysis tooling."""

__version__ = "0.1.0"
