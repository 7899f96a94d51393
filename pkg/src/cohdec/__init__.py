"""Tensor-network simulation and maximum-likelihood decoding of the planar
surface code under unitary (coherent) errors.

Modules:

* :mod:`cohdec.tensors` -- dense complex tensors, truncated SVD, entropies.
* :mod:`cohdec.mps` -- matrix-product states, gates, MPOs, measurement.
* :mod:`cohdec.code` -- lattice geometry, Pauli algebra, dense oracles.
* :mod:`cohdec.isotns` -- isometric network of the code state and the
  row-by-row syndrome sampler.
* :mod:`cohdec.rbim` -- complex-weight stat-mech networks per homology class.
* :mod:`cohdec.decode` -- transfer-matrix contraction and the ML decision.
* :mod:`cohdec.exper` -- sweep harness, CSV schema, scaling analysis.
"""

__version__ = "0.1.0"
