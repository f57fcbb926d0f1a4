class BoosterSimError(Exception):
    """Base class for all simulator errors."""


class ModelError(BoosterSimError, ValueError):
    """Raised when a model is evaluated outside its valid domain."""


class CalibrationError(ModelError):
    """Raised when a fit is underdetermined or has no feasible point."""


class ConfigError(BoosterSimError):
    """Raised when a configuration document fails validation.

    ``diagnostics`` holds one human readable line per offending field.
    """

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        if not self.diagnostics:
            return super().__str__()
        return "\n".join([super().__str__(), *("  " + d for d in self.diagnostics)])
