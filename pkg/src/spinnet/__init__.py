"""Spin-system statistical mechanics and the neural networks it induces.

Exact enumeration oracles, mean-field relaxation, analog descent dynamics,
Hebbian content-addressable memory, and layered networks trained by the
generalized delta rule.
"""

__version__ = "0.1.0"
