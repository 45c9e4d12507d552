"""Equilibria of the reference field for proportional gains from 0 to 1e4.

Walks through the static side of the model: load a scenario, solve for the
equilibrium, compare its norm with the a-priori bound and estimate whether
the fixed-point map contracts.  Run with ``python3 demos/01_equilibrium_across_gains.py``.
"""

import numpy as np

from dnfeq import estimate_contraction, scenarios, solve_fixed_point, verify_equilibrium

# %% The reference scenario: two logistic populations on [0, 1], Gaussian
# coupling, feedback on population 1 towards an affine reference profile.
cfg = scenarios.load("reference")
model = cfg.build_model()
print(model.domain)
print("Hilbert-Schmidt norm of W:", round(model.hs_norm, 4))

# %% One solve at the configured gain.
eq = solve_fixed_point(model, cfg.solver_options())
print(f"k = 1: converged in {eq.iterations} iterations, residual {eq.residual_T:.2e}")
print("   |x*| =", round(model.domain.pair_norm(eq.x_star), 4), " bound R =", round(eq.a_priori_bound, 4))

# independent check on the activity form of the equation
print("   |T(z*) - z*| =", f"{verify_equilibrium(eq.z_star, model).norm:.2e}")

# %% Sweep the gain.  Existence holds for every k >= 0; the solver should
# never fail here, and the tracking error shrinks as k grows.
print("\n      k   iters   |z1* - z_ref|   contraction (empirical)")
for k in [0, 1e-2, 1, 1e2, 1e4]:
    m = cfg.with_value("control.k", repr(float(k))).build_model()
    res = solve_fixed_point(m, cfg.solver_options())
    err = m.domain.norm(res.z_star[0] - m.z_ref)
    lip = estimate_contraction(m, center=res.x_star)
    print(f"{k:8g} {res.iterations:6d} {err:14.3e} {lip:16.3f}")

# %% The tracking error does not vanish under proportional feedback; that
# is what the integral term in demo 03 is for.
z1 = eq.z_star[0]
worst = np.argmax(np.abs(z1 - model.z_ref))
print(f"\nlargest offset at r = {model.domain.coords[worst]:.2f}: "
      f"z1* = {z1[worst]:.4f}, z_ref = {model.z_ref[worst]:.4f}")
