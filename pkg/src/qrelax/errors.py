"""Exception types shared across the solver modules."""


class InstabilityError(RuntimeError):
    """A time integration left its validity envelope (norm/trace drift,
    positivity loss, covariance degeneracy).  The message names the failing
    step so runs can be re-tried with a smaller step size."""


class ConfigError(ValueError):
    """Invalid scenario configuration.  Collects every violation found, not
    just the first one."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AccuracyWarning(UserWarning):
    """A result is returned but a stated accuracy target is not met
    (e.g. truncated mode sums with non-negligible tail weight)."""
