"""Rotation-controlled two-photon entanglement in a Sagnac fibre loop.

Sparse Fock-state simulation of the interferometer, CHSH analysis of the
post-selected polarization state, Monte Carlo shot sampling and a small
circuit description language.
"""

__version__ = "0.1.0"
