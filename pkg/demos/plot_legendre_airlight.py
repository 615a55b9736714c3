"""
A smooth airlight field from a handful of Legendre weights
==========================================================

A spatially varying airlight is written as ``A^c(u, v) = sum_i w_i^c g_i``
with products of Legendre polynomials as the members ``g_i``.  Five members
(order 2, no cross term) describe constant, linear and quadratic trends.
"""
from pathlib import Path

import numpy as np

from alfdehaze import build_basis, save_image
from alfdehaze.basis import AirlightField

out = Path(__file__).with_name("_output")
out.mkdir(exist_ok=True)

basis = build_basis(2)
print("members (u degree, v degree):", basis.degrees)
print("with cross terms:", build_basis(2, include_cross_terms=True).degrees)

###############################################################################
# The members are nearly orthogonal on a sampled grid, so each weight
# controls a distinct pattern.
g = basis.on_grid(101, 101)
gram = np.einsum("ihw,jhw->ij", g, g) / g[0].size
np.set_printoptions(precision=3, suppress=True)
print(gram)

###############################################################################
# Brighter, bluer haze towards the right and the top of the image.
weights = np.array([
    [0.70, 0.10, -0.05, 0.00, 0.00],
    [0.72, 0.08, -0.06, 0.00, 0.00],
    [0.75, 0.05, -0.08, 0.02, 0.00],
])
field = AirlightField(weights, basis, 120, 160)
A = field.values()
print("corner colours:", A[0, 0].round(3), A[0, -1].round(3), A[-1, 0].round(3), A[-1, -1].round(3))
save_image(A, out / "airlight_field.png")
