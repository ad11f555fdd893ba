"""Markov-chain potential theory on finite truncations and path simulation.

Modules: ``chain_core`` (kernels, truncations, measures, networks),
``potential`` (voltages, Green functions, capacities), ``bd_chain``
(birth-death simulation), ``planar_spiral`` (lattice spiral chain),
``subdivision`` (level subdivision of killed chains), ``traces``
(trace networks and resistance profiles) and ``cli``.
"""
__version__ = "0.1.0"
