"""Geometric-phase effects in two-state vibronic dynamics near a conical intersection."""

__version__ = "0.1.0"

from .model import (BathParameters, LvcParameters, SubsystemParameters, SystemBathModel,  # noqa: E402
                    derive_geometry, potential_fields)

__all__ = ["__version__", "BathParameters", "LvcParameters", "SubsystemParameters", "SystemBathModel",
           "derive_geometry", "potential_fields"]
