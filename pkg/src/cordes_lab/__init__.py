"""Nonlinear elliptic problems for L_gamma = Delta + gamma d_rr on the unit ball."""

__version__ = "0.1.0"
