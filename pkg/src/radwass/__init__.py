"""Radial nonlinear diffusion, Wasserstein contraction and McCann's condition."""

__version__ = "0.1.0"
