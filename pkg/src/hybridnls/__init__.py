"""Hybrid line + torus solver for the defocusing nonlinear Schrödinger equation.

Data u = v + w with v decaying on the line and w periodic: w solves the
periodic problem, v solves the line problem perturbed by w.
"""

__version__ = "0.1.0"
