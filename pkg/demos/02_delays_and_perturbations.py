"""Delays shape the transient, not the equilibrium.

Solves the reference scenario with and without propagation delays, then
integrates the delayed closed loop from a perturbed equilibrium and watches
the distance decay.  The decay is an observation about one trajectory, not
a stability proof.
"""

import numpy as np

from dnfeq import distance_delay, probe_convergence, scenarios, simulate, solve_fixed_point
from dnfeq.model import zero_delay

cfg = scenarios.load("reference").with_value("domain.nodes", "51")
model = cfg.build_model()
dom = model.domain

# %% Equilibria never see the delays.
none = zero_delay(dom)
slow = distance_delay(dom, v=0.25, d_bar=2.0)
a = solve_fixed_point(model.replace(delays=(none, none)))
b = solve_fixed_point(model.replace(delays=(slow, slow)))
print("identical equilibria:", np.array_equal(a.x_star, b.x_star))

# %% Starting exactly at z*, the delayed simulation stays there.
run = simulate(model, a.z_star, t_end=5.0, dt=1e-2, reference=a.z_star)
print(f"drift from z* over t in [0, 5]: {run.distance.max():.1e}")

# %% Kick it and let it relax, for two propagation speeds.  The leak term
# dominates the relaxation here, so the delays only bend the curve slightly.
curves = []
for v in (1.0, 0.25):
    d = distance_delay(dom, v=v, d_bar=2.0)
    rep = probe_convergence(model.replace(delays=(d, d)), a.z_star, scale=0.05,
                            t_end=30.0, dt=1e-2, seed=1)
    half = rep.times[np.argmax(rep.distance <= 0.5 * rep.initial)]
    print(f"v = {v:4}: distance {rep.initial:.3f} -> {rep.terminal:.1e}, "
          f"halved by t = {half:.1f}  ({rep.label})")
    curves.append(rep.distance)
print(f"largest gap between the two distance curves: {np.abs(curves[0] - curves[1]).max():.1e}")
