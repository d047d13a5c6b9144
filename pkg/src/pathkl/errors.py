"""Exception types shared across the package.

Plain ``ValueError`` is raised for ordinary invalid arguments; the classes
here mark failure modes a caller may want to handle specifically.
"""


class UnsupportedOrderError(ValueError):
    """Requested polynomial or signature order exceeds the supported range."""


class NotPositiveSemidefiniteError(ValueError):
    """A covariance matrix has a significantly negative eigenvalue.

    For sample covariances this usually means the path count is too small;
    re-estimate with more paths.
    """


class DegenerateInputError(ValueError):
    """Input carries no variance, so the requested ratio is undefined."""


class RankDeficientError(ValueError):
    """Normal equations are singular at ridge = 0; raise the ridge penalty."""
