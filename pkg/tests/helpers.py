"""Shared builders for the test modules."""

import numpy as np

from mfpolaron.fields import make_grid, norm_sobolev
from mfpolaron.initdata import gaussian_wave, normalize_mass


def unit_gaussian(n=32, L=16.0, momentum=(0.0, 0.0, 0.0), target_mass=1.0):
    g = make_grid(n, L)
    return g, normalize_mass(gaussian_wave(g, 1.0, momentum=momentum), g, target_mass)


def observed_order(coarse, mid, fine, norm):
    """Self-convergence order log2(|a - b| / |b - c|)."""
    return float(np.log2(norm(coarse - mid) / norm(mid - fine)))


def xs(grid, s=2.0):
    return lambda f: norm_sobolev(f, s, grid)
