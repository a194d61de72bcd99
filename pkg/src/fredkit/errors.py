"""Exception types shared across the package.

Validation problems (bad parameters, arguments outside a model's domain,
unsupported requests) derive from ``ValueError``; numerical breakdowns
(identity residuals, failed quadrature, non-PSD results) derive from
``ArithmeticError``. The command line maps the two families to distinct
exit codes.
"""


class ValidationError(ValueError):
    """Input rejected before any numerical work."""


class DomainError(ValidationError):
    """Laplace or density argument outside the model's admissible set."""


class UnsupportedError(ValidationError):
    """The model does not provide the requested decomposition."""


class NumericalError(ArithmeticError):
    """A computation produced a value that cannot be trusted."""


class IdentityError(NumericalError):
    """Total and sum of terms disagree beyond tolerance."""

    def __init__(self, h, residual, tol):
        self.h = h
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"decomposition identity fails at h={h}: residual {residual:.3e} exceeds {tol:.3e}")
