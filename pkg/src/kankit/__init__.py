"""Kolmogorov-Arnold network toolkit.

Layer variants that sum, multiply, or mix their edge activations; exact
reverse-mode gradients; an ODE-fitting loop built on a fixed-step RK4
integrator with a discrete adjoint; and a config-driven experiment harness.
"""

from kankit.basis import GridSpec, Normalizer
from kankit.layers import Add, Lean, LayerSpec, Mult, count_activations, count_parameters
from kankit.network import Network, load_model, save_model

__all__ = [
    "Add",
    "GridSpec",
    "Lean",
    "LayerSpec",
    "Mult",
    "Network",
    "Normalizer",
    "count_activations",
    "count_parameters",
    "load_model",
    "save_model",
]
