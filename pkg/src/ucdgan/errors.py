"""Exception types shared across the package."""


class UcdganError(Exception):
    pass


class ShapeError(UcdganError, ValueError):
    """Operand shapes do not conform for an op."""


class DomainError(UcdganError, ValueError):
    """Value outside the mathematical domain of an op (log of <= 0, bad label index)."""


class ContractError(UcdganError, RuntimeError):
    """API precondition violated (wrong head kind, missing grad, non-scalar root)."""


class FormatError(UcdganError, ValueError):
    """Malformed checkpoint or game file."""


class ValidationError(UcdganError, ValueError):
    """Invalid dataset spec, tabular game, or sample file."""


class ConfigError(UcdganError, ValueError):
    """Bad run configuration or override key."""


class ConvergenceError(UcdganError, RuntimeError):
    """Numerical optimization failed to reach its tolerance."""


class TrainingAborted(UcdganError, RuntimeError):
    """Raised when a training run hits a non-finite loss."""

    def __init__(self, step, losses):
        self.step = step
        self.losses = losses
        super().__init__(f"non-finite loss at step {step}: {losses}")
