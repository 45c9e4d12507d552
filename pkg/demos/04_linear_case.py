"""When every activation is linear the equilibrium equation is a linear system.

A rank-one kernel ``phi(r) phi(r')`` with unit-norm ``phi`` makes
``x - W x`` singular.  Then an equilibrium exists only for inputs orthogonal
to ``phi``, and it is not unique.
"""

import numpy as np

from dnfeq import build_domain, linear, make_model, solve_linear_case

dom = build_domain((0, 1), 81)
r, q = dom.coords, dom.weights
phi = 1.0 + 0.5 * np.cos(np.pi * r)
phi /= np.sqrt(np.sum(q * phi**2))
lookup = dict(zip(r, phi))
phi_of = np.vectorize(lookup.get)

S = linear(1.0)
base = make_model(dom, (S, S), kernels={"11": lambda a, b: phi_of(a) * phi_of(b)})

g = np.sin(2 * np.pi * r)
g -= phi * np.sum(q * phi * g)  # remove the phi component

for label, I1 in [("input orthogonal to phi", g), ("input with a phi component", g + phi)]:
    rep = solve_linear_case(base.replace(I_star=np.stack([I1, np.zeros(dom.size)])))
    print(f"{label}:")
    print(f"   rank {rep.rank} of {2 * dom.size}, smallest singular value {rep.singular_values[-1]:.1e}")
    print(f"   solvable={rep.solvable} unique={rep.unique} relative residual {rep.relative_residual:.1e}")
