"""Simulation and inference for nonresponse in forensic black-box studies."""

__version__ = "0.1.0"
