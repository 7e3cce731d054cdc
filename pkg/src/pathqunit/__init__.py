"""Simulation and analysis of path-entangled photon pairs in N fiber paths.

Modules: ``statecore`` (pair states and density matrices), ``multiport``
(beam-splitter meshes and analyzers), ``sourcesim`` (source model and
coincidence probabilities), ``counting`` (Poisson count records),
``analysis`` (visibility, CHSH, tomography), ``phaselock`` (interferometer
stabilization) and ``cli`` (experiment runner).
"""

__version__ = "0.1.0"
