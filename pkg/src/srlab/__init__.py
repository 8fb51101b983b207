"""
srlab: superradiant relaxation of inhomogeneously coupled two-level emitters.

Submodules
----------
qnum          angular-momentum algebra (Clebsch-Gordan, 6j, ladder elements)
chip          Biot-Savart coupling of trapped atoms to an LC loop
propagator    homogeneous sector propagators of the collective master equation
perturbation  first-order correction in the coupling inhomogeneity
sse           stochastic Schroedinger trajectories, dark states, Lindblad oracle
config, cli   scenario files and the ``srlab`` command
"""

__version__ = "0.1.0"
