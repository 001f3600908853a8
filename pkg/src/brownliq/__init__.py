"""Hard balls in a vessel moving as reflected Brownian motions with drift.

The main entry points are :class:`~brownliq.configuration.ModelSpec` for the
model, :func:`~brownliq.sampler.run_chain` for stationary samples,
:func:`~brownliq.dynamics.simulate` for trajectories and the functions in
:mod:`brownliq.experiments` for the concentration studies.
"""
from brownliq.configuration import Configuration, ModelSpec
from brownliq.geometry import Ball, Box, GraphDomain, HalfCylinder
from brownliq.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "Ball", "Box", "Configuration", "GraphDomain", "HalfCylinder", "ModelSpec", "__version__"]
