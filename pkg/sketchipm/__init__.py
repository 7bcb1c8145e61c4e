"""
sketchipm - sketch-preconditioned infeasible interior point method for LPs
"""

__version__ = "0.1.0"
