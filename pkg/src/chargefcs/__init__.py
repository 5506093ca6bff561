"""Full counting statistics of charge transfer in symmetric local circuits.

Subpackages cross-validate four routes to the transferred-charge
distribution of a brick-wall circuit with a conserved U(1) charge:

``sep``
    Monte Carlo sampling and exact tilted transfer matrices for the
    symmetric exclusion process that the circuit average reduces to.
``coupled``
    The n-chain stochastic model with a weak inter-chain coupling that
    captures sample-to-sample fluctuations of the circuit ensemble.
``magnon``
    Exact one- and two-walker dynamics of the coupled model, both as the
    discrete brick-wall map and as a continuous-time Hamiltonian.
``replica``
    Haar averages of charge-block unitary gates in the paired-state
    basis, with Monte Carlo oracles.
``quantum``
    A counting-field statevector engine for qubit circuits.
``analytic``
    Closed-form large-time predictions the engines are compared against.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
