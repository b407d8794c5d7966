"""Volumetric asymptotics of Orlicz balls via Gibbs tilting."""

__version__ = "0.1.0"
