"""Exception types shared across the package."""


class PathmcError(Exception):
    """Base class for numerical and model errors raised by pathmc."""


class ModelEvaluationError(PathmcError):
    """A model function returned a non-finite value."""


class NotPositiveDefiniteError(PathmcError):
    """A node precision matrix failed its symmetric factorization.

    Gaussian sampling and marginalization both require every node precision
    block to be positive definite.  This usually means the expansion path is
    too far from a region where the quadratic approximation is convex; move
    the expansion path (or strengthen the quadratic potential) and rebuild.
    """

    def __init__(self, level, node, detail=""):
        self.level = level
        self.node = node
        msg = f"precision block not positive definite at level {level}, node {node}"
        if detail:
            msg += f": {detail}"
        msg += " (adjust the expansion path or the quadratic potential)"
        super().__init__(msg)


class ConfigError(Exception):
    """Invalid run configuration (usage error, exit code 1 in the CLI)."""
