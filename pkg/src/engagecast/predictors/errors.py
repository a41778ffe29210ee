"""Exception types shared across predictor implementations."""


class PredictorError(Exception):
    pass


class DegenerateDesign(PredictorError):
    pass


class NonFiniteLoss(PredictorError):
    pass


class SchemaMismatch(PredictorError):
    pass


class UnsupportedKind(PredictorError):
    pass
