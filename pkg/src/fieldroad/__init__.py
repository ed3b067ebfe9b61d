"""fieldroad: an exclusion-process laboratory for field-road diffusion.

Simulates a symmetric exclusion process on a discrete cylinder coupled to
a fast road along its lower boundary, solves the limiting coupled
diffusion system, and cross-checks every exactly computable identity
relating the two: generator enumeration on tiny state spaces, Dynkin
martingales and their quadratic variation, Dirichlet-form and entropy
bounds, replacement and energy diagnostics, and weak-form/duality
residuals for the PDE.
"""

__version__ = "0.1.0"
