"""signopt: noise-corrupted sign methods for finite-sum optimization.

Stochastic sign descent with an explicit uniform-noise correction, its
variance-reduced variants with radius-triggered reference updates, plain SGD /
SVRG baselines, benchmark problems with analytic operator-norm smoothness
constants, and evaluators that check the methods' convergence bounds on
recorded traces.
"""

__version__ = "0.1.0"
