"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class ConfigurationError(ValueError):
    """A simulation was configured in a way that cannot run (missing input, unstable step)."""


class NoFerromagneticPhase(DomainError):
    pass


class NoBarrierRegime(DomainError):
    pass


class StepSizeError(ConfigurationError):
    pass
