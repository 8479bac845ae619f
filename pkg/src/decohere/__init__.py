"""Dense-matrix toolkit for decoherence, open-system dynamics and its countermeasures.

Submodules: ``hilbert`` (states, operators, partial trace), ``interferometer``,
``evolution`` (closed, joint and Lindblad dynamics), ``influence`` (Gaussian
bath influence functional), ``compensation`` (decoherence-free subspaces and
measurement-free error correction), ``radical_pair``, ``stats`` and ``cli``.
Conventions: hbar = 1, big-endian qubit ordering (qubit 0 is the most
significant tensor factor).
"""

__version__ = "0.1.0"
