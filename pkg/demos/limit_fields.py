"""Inside the composite limit: Gaussian fields driven by one two-sided Wiener process.

The fields Phi, Pi and Psi are linear in the same Wiener increments. Their
second moments have closed forms (E Psi^2 = E|xi|^(2 gamma), E Pi^2 = E|xi|^(2 gamma - 2),
E Pi Psi = 0), which this demo checks by Monte Carlo.

    python demos/limit_fields.py
"""
import math

import numpy as np

from diffgof.limits import default_param_grid, param_limit_field
from diffgof.model import stationary_moments
from diffgof.simulate import wiener_cells

gamma, n = 1.5, 20_000
grid = default_param_grid(gamma)
edges = wiener_cells(grid.L, grid.dz)
print(f"gamma={gamma}: {edges.size - 1} Wiener cells on [{edges[0]:.2f}, {edges[-1]:.2f}]")

rng = np.random.default_rng(5)
dW = rng.standard_normal((edges.size - 1, n)) * math.sqrt(edges[1] - edges[0])
fld = param_limit_field(gamma, increments=dW, grid=grid)
mom = stationary_moments(gamma)
for label, sample, target in (("E Psi^2", fld.psi ** 2, mom.b), ("E Pi^2", fld.pi ** 2, mom.a),
                              ("E Pi Psi", fld.pi * fld.psi, 0.0)):
    se = sample.std(ddof=1) / math.sqrt(n)
    print(f"{label:9s} {sample.mean():+.4f} +- {se:.4f}   (exact {target:+.4f})")

# The CvM limit functional is the integral of eta0^2 over the probability scale.
cvm = np.trapezoid(np.vstack([np.zeros(n), fld.eta0 ** 2, np.zeros(n)]),
                   np.concatenate([[0.0], fld.t_grid, [1.0]]), axis=0)
print("quantiles of the ParamEDF CvM limit:",
      ", ".join(f"{q:.0%} {v:.4f}" for q, v in zip((0.5, 0.9, 0.95), np.quantile(cvm, [0.5, 0.9, 0.95]))))
