"""Numerical laboratory for Bregman-cost transport inequalities on discretized measures."""
__version__ = "0.1.0"
