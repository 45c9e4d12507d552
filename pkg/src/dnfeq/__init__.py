"""Equilibria and delayed dynamics of two-population neural fields under feedback.

The closed loop couples two populations through integral kernels on a
compact box, with delays, saturating activations and proportional or
proportional-integral feedback on population 1.  Equilibria are computed as
fixed points of ``pi(x) = H^{-1}(W(rho(x)) + f)`` and cross-checked by
time simulation.

Basic example
-------------

.. code:: python

    from dnfeq import scenarios, solve_fixed_point, simulate

    model = scenarios.load("reference").build_model()
    eq = solve_fixed_point(model)
    run = simulate(model, eq.z_star, t_end=5, dt=1e-3, reference=eq.z_star)
    run.distance.max()   # stays at round-off level
"""

from .activations import Activation, clamp, linear, logistic, relu
from .grid import KernelMatrix, SpatialDomain, assemble_kernel, build_domain
from .model import (
    Controller,
    NeuralFieldModel,
    constant_delay,
    distance_delay,
    gaussian_kernel,
    make_model,
    mexican_hat_kernel,
    open_loop,
    prop_int,
    proportional,
)
from .operators import (
    a_priori_bound,
    apply_H,
    apply_pi,
    apply_rho,
    apply_sigma,
    apply_T,
    apply_Tcal,
    apply_W,
    forcing_f,
    invert_H,
)
from .simulate import HistoryBuffer, probe_convergence, rhs, simulate
from .solver import (
    EquilibriumResult,
    SolverOptions,
    estimate_contraction,
    solve_fixed_point,
    solve_linear_case,
    solve_pi_equilibrium,
    verify_equilibrium,
)

__version__ = "0.1.0"

__all__ = [
    "Activation", "clamp", "linear", "logistic", "relu",
    "KernelMatrix", "SpatialDomain", "assemble_kernel", "build_domain",
    "Controller", "NeuralFieldModel", "constant_delay", "distance_delay", "gaussian_kernel",
    "make_model", "mexican_hat_kernel", "open_loop", "prop_int", "proportional",
    "a_priori_bound", "apply_H", "apply_pi", "apply_rho", "apply_sigma", "apply_T",
    "apply_Tcal", "apply_W", "forcing_f", "invert_H",
    "HistoryBuffer", "probe_convergence", "rhs", "simulate",
    "EquilibriumResult", "SolverOptions", "estimate_contraction", "solve_fixed_point",
    "solve_linear_case", "solve_pi_equilibrium", "verify_equilibrium",
]
