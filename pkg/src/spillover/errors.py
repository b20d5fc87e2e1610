"""Exception hierarchy shared across the package."""


class SpilloverError(ValueError):
    """Base class for all errors raised deliberately by this package."""


class InputError(SpilloverError):
    """Malformed or inconsistent input data (CSV content, panel shape, config)."""


class DecompositionError(SpilloverError):
    """The R2 decomposition cannot be computed for the supplied window."""


class EstimationError(SpilloverError):
    """A least-squares VAR fit failed, typically because of a singular design."""
