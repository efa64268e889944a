"""Pseudo-spectral solvers for the mean-field polaron system and its Choquard limit."""

from .fields import Grid, make_grid, norm_l1, norm_sobolev, norm_sup, norm_y
from .trajectory import BlowupError, Trajectory

__version__ = "0.1.0"

__all__ = ["Grid", "make_grid", "norm_sobolev", "norm_l1", "norm_sup", "norm_y", "BlowupError", "Trajectory"]
