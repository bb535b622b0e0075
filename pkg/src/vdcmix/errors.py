"""Exception hierarchy shared by every module."""


class VdcMixError(Exception):
    """Base class for all package errors."""


class StructuralError(VdcMixError):
    """Elements, sets or observables from incompatible models were combined."""


class InvariantViolation(VdcMixError):
    """A declared invariant (positive measure, weights summing to one, ...) failed."""


class InequalityViolation(VdcMixError):
    """A theorem-level inequality was violated; always an implementation bug.

    ``witness`` carries whatever is needed to reproduce the failing instance.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InputError(VdcMixError):
    """A function received data outside its stated domain."""


class ConfigError(VdcMixError):
    """Malformed or inconsistent experiment configuration."""


class HypothesisRefusal(VdcMixError):
    """An experiment hypothesis failed, so no higher-order claim is made."""

    def __init__(self, message, stage=None, witness=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness


class StageFailure(VdcMixError):
    """A pipeline stage returned FAIL although its hypotheses were verified."""

    def __init__(self, message, stage=None, witness=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness
