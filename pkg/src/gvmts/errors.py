"""Exception types shared across the package."""


class GvmError(Exception):
    """Base class for errors raised by gvmts."""


class QuadratureError(GvmError):
    """Adaptive quadrature failed to converge within the node budget."""


class SupportError(GvmError):
    """Kullback-Leibler divergence is infinite: support condition violated."""


class InfeasibleError(GvmError):
    """Autocovariance constraints cannot be met by any spectral density."""


class NoConvergenceError(GvmError):
    """An iterative procedure exhausted its budget without converging."""
