"""Numerical laboratory for the minimal-surface inverse problem.

Modules: ``geometry`` (domains, metric families, coefficients), ``forward``
(minimal graph solver, DN map, areas), ``linearize`` (higher-order
linearizations), ``identities`` (integral identities), ``cgo`` (complex
geometric optics and stationary phase), ``recovery`` (twin experiments),
``cli`` (config-driven runner).
"""

__version__ = "0.1.0"

from .errors import (CalibrationMissing, ConfigInvalid, DegreeTooLow, EigenvalueObstruction,  # noqa: E402
                     FitIllConditioned, InadmissibleData, MinsurfError, NewtonDiverged, NonMinimal, NotSPD,
                     SeriesDiverging, SupportViolation, UnderResolved)

__all__ = ["__version__", "MinsurfError", "NonMinimal", "NotSPD", "NewtonDiverged", "EigenvalueObstruction",
           "InadmissibleData", "SupportViolation", "UnderResolved", "SeriesDiverging", "DegreeTooLow",
           "FitIllConditioned", "CalibrationMissing", "ConfigInvalid"]
