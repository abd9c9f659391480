"""Exception types shared across modules.

Each error carries a stable ``code`` used by the CLI's structured error record.
"""


class MinsurfError(Exception):
    code = "MinsurfError"
    exit_status = 3


class NonMinimal(MinsurfError):
    code = "NonMinimal"


class NotSPD(MinsurfError):
    code = "NotSPD"


class NewtonDiverged(MinsurfError):
    code = "NewtonDiverged"


class EigenvalueObstruction(MinsurfError):
    code = "EigenvalueObstruction"


class InadmissibleData(MinsurfError):
    code = "InadmissibleData"


class SupportViolation(MinsurfError):
    code = "SupportViolation"


class UnderResolved(MinsurfError):
    code = "UnderResolved"


class SeriesDiverging(MinsurfError):
    code = "SeriesDiverging"


class DegreeTooLow(MinsurfError):
    code = "DegreeTooLow"


class FitIllConditioned(MinsurfError):
    code = "FitIllConditioned"


class CalibrationMissing(MinsurfError):
    code = "CalibrationMissing"


class ConfigInvalid(MinsurfError):
    code = "ConfigInvalid"
    exit_status = 2
