"""Exception hierarchy shared across the toolkit."""


class SampidError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(SampidError, ValueError):
    pass


class InfeasibleParameterError(SampidError, ValueError):
    """Inertial parameters whose pseudo-inertia is not positive definite."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ConfigurationError(SampidError):
    pass


class DivergenceError(SampidError, FloatingPointError):
    """A simulation produced a non-finite value."""

    def __init__(self, message, field=None, time=None, step_index=None):
        super().__init__(message)
        self.field = field
        self.time = time
        self.step_index = step_index


class EvaluationFailedError(SampidError):
    pass


class OptimizationFailedError(SampidError):
    pass


class SensitivityFailedError(SampidError):
    def __init__(self, message, param_index=None):
        super().__init__(message)
        self.param_index = param_index


class ExcitationFailedError(SampidError):
    pass
