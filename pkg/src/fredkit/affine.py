"""Dynamic affine (compound autoregressive) models.

An affine model of dimension n is described by its one-step conditional
Laplace transform::

    E[exp(-u'Y_{t+1}) | Y_t = y] = exp(-a(u)'y + b(u)),

where ``b(u) = c(u) - c(a(u))`` and ``c`` is the stationary log-Laplace
transform. Compounding gives the h-step transform
``exp(-a^h(u)'y + c(u) - c(a^h(u)))`` with ``a^h`` the h-fold composition.

The log-Laplace decomposition (FELD) of such a model splits into a part
linear in the conditioning state (``alpha``) and a constant part
(``beta``)::

    gamma(k, h) = alpha(h, k, u)'y + beta(h, k, u).

Sign conventions
----------------
``grad_a0`` is the matrix ``A`` such that ``E[Y_{t+1} | y] = A y + const``,
i.e. ``A[i, j] = d a_j / d u_i`` at 0. ``grad_c0`` is the gradient of ``c``
at zero, which equals minus the stationary mean.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, ValidationError
from .tables import assemble_table

FD_STEP = 1e-4


def _vec(u, dim=None):
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"expected a vector argument, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(f"expected length {dim}, got {arr.shape[0]}")
    return arr


def matrix_power(mat, h):
    """Repeated multiplication; h is small in every use here."""
    out = np.eye(mat.shape[0])
    for _ in range(h):
        out = mat @ out
    return out


def spectral_radius(mat):
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(mat)))))


def _central_jacobian(fn, x, step):
    # J[i, j] = d fn_i / d x_j
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2 * step))
    return np.column_stack(cols)


def _central_hessian(fn, x, step):
    x = np.asarray(x, dtype=float)
    n = x.size
    hess = np.empty((n, n))
    eye = np.eye(n) * step
    f0 = fn(x)
    for i in range(n):
        hess[i, i] = (fn(x + eye[i]) - 2 * f0 + fn(x - eye[i])) / step**2
        for j in range(i + 1, n):
            val = (fn(x + eye[i] + eye[j]) - fn(x + eye[i] - eye[j])
                   - fn(x - eye[i] + eye[j]) + fn(x - eye[i] - eye[j])) / (4 * step**2)
            hess[i, j] = hess[j, i] = val
    return hess


class AffineModel:
    """Compound autoregressive model given by its Laplace exponents.

    Parameters
    ----------
    dim : int
        State dimension n.
    a : callable
        One-step exponent, maps an n-vector to an n-vector.
    c : callable, optional
        Stationary log-Laplace transform (n-vector -> float).
    b : callable, optional
        One-step intercept ``c(u) - c(a(u))``; used when ``c`` has no
        closed form. Exactly one of ``c`` and ``b`` must be given.
    grad_a0 : array_like, optional
        Conditional-mean slope; finite differences of ``a`` when omitted.
    grad_c0 : array_like, optional
        Gradient of ``c`` at zero (minus the stationary mean). Derived from
        ``c`` or from ``b`` and ``grad_a0`` when omitted.
    domain : callable, optional
        Predicate on u. Defaults to "all entries finite".
    name : str
        Label used in error messages.
    """

    def __init__(self, dim, a, c=None, b=None, grad_a0=None, grad_c0=None, domain=None,
                 name="affine"):
        if (c is None) == (b is None):
            raise ValidationError("give exactly one of c and b")
        self.dim = int(dim)
        self.name = name
        self._a = a
        self._c = c
        self._b = b
        self.domain = domain if domain is not None else (lambda u: bool(np.all(np.isfinite(u))))
        zero = np.zeros(self.dim)

        if np.max(np.abs(self.a(zero))) > 1e-12:
            raise ValidationError(f"{name}: a(0) must vanish")
        if abs(self.b(zero)) > 1e-12:
            raise ValidationError(f"{name}: intercept at 0 must vanish")
        if c is not None and abs(float(c(zero))) > 1e-12:
            raise ValidationError(f"{name}: c(0) must vanish")

        jac = _central_jacobian(self.a, zero, 1e-6)
        if grad_a0 is None:
            grad_a0 = jac.T
        self.grad_a0 = np.atleast_2d(np.asarray(grad_a0, dtype=float))
        if self.grad_a0.shape != (self.dim, self.dim):
            raise ValidationError(f"{name}: grad_a0 must be {self.dim}x{self.dim}")
        if np.max(np.abs(self.grad_a0 - jac.T)) > 1e-6:
            raise ValidationError(f"{name}: grad_a0 disagrees with finite differences of a")
        rho = spectral_radius(self.grad_a0)
        if not rho < 1:
            raise ValidationError(f"{name}: spectral radius {rho:.6g} of grad_a0 is not below 1")

        if grad_c0 is None:
            if c is not None:
                grad_c0 = _central_jacobian(lambda v: np.atleast_1d(c(v)), zero, 1e-6)[0]
            else:
                grad_b = _central_jacobian(lambda v: np.atleast_1d(self.b(v)), zero, 1e-6)[0]
                mean = np.linalg.solve(np.eye(self.dim) - self.grad_a0, -grad_b)
                grad_c0 = -mean
        self.grad_c0 = _vec(grad_c0, self.dim)
        if c is not None:
            fd = _central_jacobian(lambda v: np.atleast_1d(c(v)), zero, 1e-6)[0]
            if np.max(np.abs(fd - self.grad_c0)) > 1e-6 * max(1.0, np.max(np.abs(fd))):
                raise ValidationError(f"{name}: grad_c0 disagrees with finite differences of c")

    # -- primitive exponents -------------------------------------------
    def a(self, u):
        return _vec(self._a(_vec(u)))

    def b(self, u):
        u = _vec(u)
        if self._b is not None:
            return float(self._b(u))
        return float(self._c(u)) - float(self._c(self.a(u)))

    def c(self, u):
        if self._c is None:
            raise ValidationError(f"{self.name}: stationary log-Laplace c has no closed form")
        return float(self._c(_vec(u)))

    @property
    def has_c(self):
        return self._c is not None

    @property
    def stationary_mean(self):
        return -self.grad_c0

    def check_argument(self, u):
        u = _vec(u, self.dim)
        if not self.domain(u):
            raise DomainError(f"{self.name}: argument {u.tolist()} outside the domain")
        return u

    # -- compounding -----------------------------------------------------
    def compound_path(self, u, h):
        """``[a^0(u), a^1(u), ..., a^h(u)]`` with a domain check at each step."""
        u = self.check_argument(u)
        out = [u]
        for step in range(1, h + 1):
            nxt = self.a(out[-1])
            if not self.domain(nxt):
                raise DomainError(
                    f"{self.name}: compound step {step} leaves the domain ({nxt.tolist()})")
            out.append(nxt)
        return out

    def compound(self, u, h):
        return self.compound_path(u, h)[-1]

    def intercept(self, u, h, path=None):
        """``c(u) - c(a^h(u))``, or the accumulated one-step intercepts."""
        path = self.compound_path(u, h) if path is None else path
        if self._c is not None:
            return self.c(path[0]) - self.c(path[h])
        return float(sum(self.b(path[j]) for j in range(h)))

    def log_laplace(self, u, h, states):
        """log E[exp(-u'Y_{t+h}) | Y_t] for one state or a batch of states.

        ``states`` has shape (n,) or (N, n); scalar models also accept (N,).
        """
        if h < 0:
            raise ValidationError("horizon must be >= 0")
        states = np.asarray(states, dtype=float)
        path = self.compound_path(u, h)
        coef = path[h]
        const = self.intercept(u, h, path) if h > 0 else 0.0
        if self.dim == 1 and (states.ndim == 0 or states.shape[-1:] != (1,)):
            return -coef[0] * states + const
        return -states @ coef + const

    def mean(self, y, h):
        y = _vec(y, self.dim)
        shift = -self.grad_c0
        return shift + matrix_power(self.grad_a0, h) @ (y + self.grad_c0)

    def one_step_variance(self, y):
        """Conditional variance of Y_{t+1} given Y_t = y (Hessian of log Psi)."""
        y = _vec(y, self.dim)
        zero = np.zeros(self.dim)
        step = FD_STEP
        out = _central_hessian(self.b, zero, step)
        for j in range(self.dim):
            if y[j] != 0:
                out = out - y[j] * _central_hessian(lambda v: self.a(v)[j], zero, step)
        return 0.5 * (out + out.T)


# -- module level operations ------------------------------------------------

def compound_a(model, u, h):
    """h-fold composition of the one-step exponent (h = 0 returns u)."""
    if h < 0:
        raise ValidationError("h must be >= 0")
    return model.compound(u, h)


def conditional_log_laplace(model, u, h, y):
    """log E[exp(-u'Y_{t+h}) | Y_t = y]."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    return float(model.log_laplace(u, h, _vec(y, model.dim)))


def conditional_mean(model, y, h):
    """E[Y_{t+h} | Y_t = y] = -c'(0) + A^h (y + c'(0))."""
    if h < 0:
        raise ValidationError("h must be >= 0")
    return model.mean(y, h)


@dataclass(frozen=True)
class FeldComponents:
    """State loading and constant of a FELD total and of each term.

    ``total(y) = alpha_total @ y + beta_total`` and
    ``terms(y)[k] = alpha_terms[k] @ y + beta_terms[k]``.
    """

    alpha_total: np.ndarray
    beta_total: float
    alpha_terms: np.ndarray
    beta_terms: np.ndarray

    def __post_init__(self):
        scale_a = np.maximum(1.0, np.abs(self.alpha_total))
        if np.any(np.abs(self.alpha_terms.sum(axis=0) - self.alpha_total) > 1e-10 * scale_a):
            raise NumericalError("alpha terms do not add up to alpha total")
        if abs(self.beta_terms.sum() - self.beta_total) > 1e-10 * max(1.0, abs(self.beta_total)):
            raise NumericalError("beta terms do not add up to beta total")

    @property
    def horizon(self):
        return len(self.beta_terms)

    def total(self, y):
        return float(self.alpha_total @ np.atleast_1d(y) + self.beta_total)

    def terms(self, y):
        return self.alpha_terms @ np.atleast_1d(y) + self.beta_terms


def feld_components(model, u, h):
    """Split of the h-step FELD into state-loading and constant parts.

    Term k is the expected change of the log conditional Laplace transform
    between t+k and t+k+1::

        a^{h-k-1}'m_{k+1} - a^{h-k}'m_k + c(a^{h-k-1}) - c(a^{h-k})

    with ``m_j = E[Y_{t+j} | Y_t]``. The total is computed separately from
    the h-step transform and the h-step mean.
    """
    if h < 1:
        raise ValidationError("h must be >= 1")
    path = model.compound_path(u, h)
    u = path[0]
    A, g = model.grad_a0, model.grad_c0
    powers = [np.eye(model.dim)]
    for _ in range(h):
        powers.append(A @ powers[-1])

    if model.has_c:
        cvals = [model.c(p) for p in path]
        cdiff = [cvals[h - k - 1] - cvals[h - k] for k in range(h)]
        intercept = cvals[0] - cvals[h]
    else:
        bvals = [model.b(p) for p in path[:h]]
        cdiff = [bvals[h - k - 1] for k in range(h)]
        intercept = float(sum(bvals))

    alpha_total = powers[h].T @ u - path[h]
    beta_total = -u @ g + u @ powers[h] @ g + intercept

    alpha_terms = np.empty((h, model.dim))
    beta_terms = np.empty(h)
    for k in range(h):
        nxt, cur = path[h - k - 1], path[h - k]
        alpha_terms[k] = powers[k + 1].T @ nxt - powers[k].T @ cur
        beta_terms[k] = ((cur - nxt) @ g + (nxt @ powers[k + 1] - cur @ powers[k]) @ g
                         + cdiff[k])
    return FeldComponents(alpha_total, float(beta_total), alpha_terms, beta_terms)


def feld_table(model, u, y0, horizons, argument_type="laplace"):
    """FELD table over ``horizons`` (an int H means 1..H)."""
    hs = range(1, horizons + 1) if np.isscalar(horizons) else horizons
    y0 = _vec(y0, model.dim)
    u = model.check_argument(u)
    terms, totals = {}, {}
    for h in hs:
        comp = feld_components(model, u, h)
        totals[h] = comp.total(y0)
        terms[h] = comp.terms(y0)
    return assemble_table("feld", terms, totals,
                          argument={"type": argument_type, "value": u.tolist()},
                          state=y0.tolist())


def fevd_affine_term(model, y0, h, k):
    """E{ V[E(Y_{t+h}|I_{t+k+1}) | I_{t+k}] | I_t } as an n x n matrix.

    The one-step conditional variance is affine in the state, so its
    expectation is the variance formula evaluated at E[Y_{t+k} | Y_t].
    """
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    y0 = _vec(y0, model.dim)
    var = model.one_step_variance(model.mean(y0, k))
    load = matrix_power(model.grad_a0, h - k - 1)
    out = load @ var @ load.T
    out = 0.5 * (out + out.T)
    scale = max(1.0, float(np.max(np.abs(out))))
    if np.min(np.linalg.eigvalsh(out)) < -1e-8 * scale:
        raise NumericalError(
            f"{model.name}: variance term (h={h}, k={k}) is not positive semi-definite")
    return out


def fevd_table(model, y0, horizons, weights=None):
    """Variance decomposition of ``w'Y_{t+h}`` (w defaults to the first unit vector).

    The total is the sum of the terms (law of total variance); model modules
    with a closed-form conditional variance check it independently.
    """
    hs = range(1, horizons + 1) if np.isscalar(horizons) else horizons
    y0 = _vec(y0, model.dim)
    w = np.eye(model.dim)[0] if weights is None else _vec(weights, model.dim)
    terms, totals = {}, {}
    for h in hs:
        vals = [float(w @ fevd_affine_term(model, y0, h, k) @ w) for k in range(h)]
        terms[h] = vals
        totals[h] = float(np.sum(vals))
    return assemble_table("fevd", terms, totals,
                          argument={"type": "weights", "value": w.tolist()},
                          state=y0.tolist())


@dataclass(frozen=True)
class RiskPremium:
    """Certainty equivalent and premium of a univariate position.

    Attributes
    ----------
    certainty_equivalent : float
        pi(u, h | y) = -log E[exp(-u Y_{t+h}) | Y_t = y] / u.
    mean : float
        E[Y_{t+h} | Y_t = y].
    premium : float
        mean - certainty_equivalent; equals the FELD total divided by u
        and is nonnegative by Jensen's inequality.
    terms : ndarray
        Premium attributable to each update k = 0..h-1.
    """

    u: float
    h: int
    certainty_equivalent: float
    mean: float
    premium: float
    terms: np.ndarray


def risk_premium_decomposition(model, u, y0, h):
    """Split the risk premium of ``Y_{t+h}`` into per-update contributions."""
    if model.dim != 1:
        raise ValidationError("risk premium decomposition needs a univariate model")
    u = float(u)
    if not u > 0:
        raise ValidationError("risk aversion u must be positive")
    y0 = _vec(y0, 1)
    ce = -conditional_log_laplace(model, [u], h, y0) / u
    mean = float(model.mean(y0, h)[0])
    comp = feld_components(model, [u], h)
    terms = comp.terms(y0) / u
    return RiskPremium(u=u, h=h, certainty_equivalent=ce, mean=mean, premium=mean - ce,
                       terms=terms)
