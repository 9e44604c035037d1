"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or mismatched inputs (dimensions, pattern binding, indices)."""


class ConfigError(ValueError):
    """Invalid problem configuration (CLI flags, perturbation grammar)."""


class ModelFormatError(ValueError):
    """Model file cannot be parsed into a network."""


class UnsupportedLayerError(ModelFormatError):
    """Model file contains a layer kind the engine does not handle (e.g. maxpool)."""


class ImageFormatError(ValueError):
    """Image source cannot be decoded."""


class SolverError(RuntimeError):
    """The LP backend failed numerically (distinct from a provably empty region)."""


class InfeasibleError(RuntimeError):
    """An operation that requires a nonempty region was given an empty one."""


class UnboundedError(RuntimeError):
    """An LP was unbounded; the parameter box rows are missing from the polytope."""


class NumericError(RuntimeError):
    """A numeric routine (convex minimizer) failed to converge."""
