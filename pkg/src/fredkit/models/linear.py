"""Linear autoregressions: Gaussian VAR(1) and Cauchy AR(1).

The Gaussian VAR supports all three decompositions. The Cauchy AR(1) has no
second moments, so only the Kullback (density) decomposition exists; its
expectations are one-dimensional integrals against a Cauchy law, evaluated
by quadrature after the substitution ``eps = tan(theta)``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from ..affine import AffineModel, matrix_power, spectral_radius
from ..errors import NumericalError, UnsupportedError, ValidationError
from ..tables import assemble_table


def _horizons(h):
    return list(range(1, h + 1)) if np.isscalar(h) else list(h)


# ---------------------------------------------------------------------------
# Gaussian VAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianVarModel:
    """``Y_t = Phi Y_{t-1} + eps_t`` with ``eps_t ~ N(0, Sigma)``."""

    phi: np.ndarray
    sigma: np.ndarray
    model_id = "gauss-var"

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma", sigma)
        n = phi.shape[0]
        if phi.shape != (n, n) or sigma.shape != (n, n):
            raise ValidationError("Phi and Sigma must be square of equal size")
        if not spectral_radius(phi) < 1:
            raise ValidationError("Phi must have spectral radius below 1")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise ValidationError("Sigma must be symmetric")
        if not np.min(np.linalg.eigvalsh(sigma)) > 0:
            raise ValidationError("Sigma must be positive definite")

    @property
    def dim(self):
        return self.phi.shape[0]

    def power(self, h):
        return matrix_power(self.phi, h)

    def stationary_cov(self):
        return linalg.solve_discrete_lyapunov(self.phi, self.sigma)

    def affine(self):
        phi, sig_inf = self.phi, self.stationary_cov()
        return AffineModel(self.dim, a=lambda u: phi.T @ u, c=lambda u: 0.5 * u @ sig_inf @ u,
                           grad_a0=phi, grad_c0=np.zeros(self.dim), name="gauss-var")

    def mean(self, y, h):
        return np.asarray(y, dtype=float) @ self.power(h).T

    def log_laplace(self, u, h, states):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -states @ u
        return -states @ (self.power(h).T @ u) + 0.5 * u @ sigma_h(self, h) @ u

    def log_density(self, y, h, states):
        """log density of Y_{t+h} at y given Y_t for one state or a batch (N, n)."""
        if h < 1:
            raise ValidationError("density horizon must be >= 1")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        states = np.asarray(states, dtype=float)
        cov = sigma_h(self, h)
        factor = _pd_factor(cov, h)
        diff = y - states @ self.power(h).T
        quad = np.sum(diff * linalg.cho_solve(factor, diff.T).T, axis=-1)
        logdet = 2 * np.sum(np.log(np.diag(factor[0])))
        return -0.5 * (self.dim * np.log(2 * np.pi) + logdet + quad)


def _pd_factor(mat, h=None):
    try:
        return linalg.cho_factor(mat, lower=True)
    except linalg.LinAlgError as exc:
        where = "" if h is None else f" at h={h}"
        raise NumericalError(f"covariance matrix{where} is not positive definite") from exc


def sigma_h(model, h):
    """Forecast error covariance at horizon h (zero matrix at h = 0)."""
    if h < 0:
        raise ValidationError("h must be >= 0")
    out = np.zeros_like(model.sigma)
    for _ in range(h):
        out = model.sigma + model.phi @ out @ model.phi.T
    return out


def var_fevd(model, h):
    """Variance terms ``Phi^{h-k-1} Sigma Phi^{h-k-1}'`` for k = 0..h-1."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    out = []
    for k in range(h):
        p = model.power(h - k - 1)
        out.append(p @ model.sigma @ p.T)
    return out


def var_fevd_table(model, y0, horizons, weights=None):
    w = np.eye(model.dim)[0] if weights is None else np.asarray(weights, dtype=float)
    terms, totals = {}, {}
    for h in _horizons(horizons):
        terms[h] = [float(w @ t @ w) for t in var_fevd(model, h)]
        totals[h] = float(w @ sigma_h(model, h) @ w)
    return assemble_table("fevd", terms, totals,
                          argument={"type": "weights", "value": w.tolist()},
                          state=np.asarray(y0, dtype=float).tolist())


@dataclass(frozen=True)
class FekdCoefficients:
    """Term k of the Gaussian FEKD as ``a + b'y + y'c y``."""

    a: float
    b: np.ndarray
    c: np.ndarray

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return float(self.a + self.b @ y + y @ self.c @ y)


def var_fekd_coefficients(model, y0, h, k):
    """Quadratic-form coefficients of the FEKD term k at horizon h."""
    if not 0 <= k <= h - 2:
        raise ValidationError(f"k={k} outside 0..{h - 2}")
    y0 = np.asarray(y0, dtype=float)
    s_next, s_cur = sigma_h(model, h - k - 1), sigma_h(model, h - k)
    f_next, f_cur = _pd_factor(s_next), _pd_factor(s_cur)
    inv_next = linalg.cho_solve(f_next, np.eye(model.dim))
    inv_cur = linalg.cho_solve(f_cur, np.eye(model.dim))
    p_next, p_cur = model.power(h - k - 1), model.power(h - k)
    logdet_next = 2 * np.sum(np.log(np.diag(f_next[0])))
    logdet_cur = 2 * np.sum(np.log(np.diag(f_cur[0])))
    trace = (np.trace(inv_next @ p_next @ sigma_h(model, k + 1) @ p_next.T)
             - np.trace(inv_cur @ p_cur @ sigma_h(model, k) @ p_cur.T))
    D = inv_cur - inv_next
    mean = model.power(h) @ y0
    a = 0.5 * (logdet_next - logdet_cur) + 0.5 * trace - 0.5 * mean @ D @ mean
    b = D @ mean
    c = -0.5 * D
    return FekdCoefficients(float(a), b, 0.5 * (c + c.T))


def var_fekd_total(model, y, y0, h):
    """log f(y, h | Y_t) - E[log f(y, 1 | Y_{t+h-1}) | Y_t] in closed form."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    if h == 1:
        return 0.0
    y, y0 = np.asarray(y, dtype=float), np.asarray(y0, dtype=float)
    d = y - model.power(h) @ y0
    sh = sigma_h(model, h)
    fh, f1 = _pd_factor(sh, h), _pd_factor(model.sigma, 1)
    logdet_h = 2 * np.sum(np.log(np.diag(fh[0])))
    logdet_1 = 2 * np.sum(np.log(np.diag(f1[0])))
    spread = model.phi @ sigma_h(model, h - 1) @ model.phi.T
    return float(0.5 * (logdet_1 - logdet_h) - 0.5 * d @ linalg.cho_solve(fh, d)
                 + 0.5 * d @ linalg.cho_solve(f1, d)
                 + 0.5 * np.trace(linalg.cho_solve(f1, spread)))


def var_fekd(model, y, y0, h):
    """FEKD table for horizons 1..h and the coefficient triples keyed by (k, h)."""
    hs = _horizons(h)
    if max(hs) < 2 and np.isscalar(h):
        raise ValidationError("FEKD needs h >= 2")
    terms, totals, coefs = {}, {}, {}
    for hh in hs:
        totals[hh] = var_fekd_total(model, y, y0, hh)
        for k in range(hh - 1):
            coefs[(k, hh)] = var_fekd_coefficients(model, y0, hh, k)
            terms[(k, hh)] = coefs[(k, hh)].evaluate(y)
    table = assemble_table("fekd", terms, totals,
                           argument={"type": "density", "value": np.asarray(y, float).tolist()},
                           state=np.asarray(y0, dtype=float).tolist())
    return table, coefs


def var_feld(model, u, h, y0=None):
    """FELD table; terms ``b(Phi'^{h-k-1} u)`` with ``b(v) = v' Sigma v / 2``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y0 = np.zeros(model.dim) if y0 is None else np.asarray(y0, dtype=float)
    terms, totals = {}, {}
    for hh in _horizons(h):
        vals = []
        for k in range(hh):
            v = model.power(hh - k - 1).T @ u
            vals.append(0.5 * v @ model.sigma @ v)
        terms[hh] = vals
        totals[hh] = 0.5 * u @ sigma_h(model, hh) @ u
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": u.tolist()},
                          state=y0.tolist())


def mahalanobis(model, y, y0, h):
    """Distance of y from the h-step mean in the metric of Sigma_h."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    d = np.asarray(y, dtype=float) - model.power(h) @ np.asarray(y0, dtype=float)
    return float(np.sqrt(d @ linalg.cho_solve(_pd_factor(sigma_h(model, h), h), d)))


# ---------------------------------------------------------------------------
# Cauchy AR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CauchyArModel:
    """``Y_t = phi Y_{t-1} + sigma eps_t`` with standard Cauchy noise."""

    phi: float
    sigma: float
    model_id = "cauchy"
    dim = 1

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ValidationError("Cauchy AR needs |phi| < 1")
        if not self.sigma > 0:
            raise ValidationError("Cauchy AR needs sigma > 0")

    def scale(self, h):
        a = abs(self.phi)
        return self.sigma * (1 - a**h) / (1 - a)

    def log_density(self, y, h, states):
        if h < 1:
            raise ValidationError("density horizon must be >= 1")
        s = self.scale(h)
        z = (y - self.phi**h * np.asarray(states, dtype=float)) / s
        return -np.log(np.pi * s) - np.log1p(z * z)

    def mean(self, y, h):
        raise UnsupportedError(
            "Cauchy AR has no conditional mean or variance; only the density "
            "(Kullback) decomposition is defined")

    def log_laplace(self, u, h, states):
        raise UnsupportedError("Cauchy AR has no Laplace transform on the real line")


def cauchy_horizon_law(model, y0, h):
    """Location and scale of the Cauchy law of Y_{t+h} given Y_t = y0."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    return model.phi**h * y0, model.scale(h)


@dataclass(frozen=True)
class QuadratureSpec:
    """Midpoint rule in ``theta`` after ``eps = tan(theta)``.

    The node count doubles from ``nodes`` until two successive estimates
    agree within ``tol`` or ``max_nodes`` is reached.
    """

    nodes: int = 256
    tol: float = 1e-12
    max_nodes: int = 1 << 18

    def __post_init__(self):
        if self.nodes < 200:
            raise ValidationError("quadrature budget must be at least 200 nodes")


def cauchy_log_moment(a, b, s, quad=QuadratureSpec()):
    """``E[log(s^2 + (a - b eps)^2)]`` for standard Cauchy eps.

    With eps = tan(theta), theta is uniform on (-pi/2, pi/2) and

        log(s^2 + (a - b tan)^2) = log(s^2 cos^2 + (a cos - b sin)^2) - 2 log cos.

    The first piece is smooth and pi-periodic, so the midpoint rule
    converges geometrically; the second integrates to 2 log 2 exactly.
    When |a| is large against s + |b| the first piece has a narrow dip and
    an adaptive rule with a breakpoint at the dip takes over.

    Returns
    -------
    value, error_estimate : float, float
    """
    if b == 0:
        return float(np.log(s * s + a * a)), 0.0

    def rule(n):
        theta = -np.pi / 2 + (np.arange(n) + 0.5) * np.pi / n
        cs, sn = np.cos(theta), np.sin(theta)
        return float(np.mean(np.log((s * cs) ** 2 + (a * cs - b * sn) ** 2)))

    n = quad.nodes
    prev = rule(n)
    while n < quad.max_nodes:
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err <= quad.tol * max(1.0, abs(cur)):
            return cur + 2 * np.log(2), err
        prev = cur
    # a narrow dip near tan(theta) = a / b defeats the uniform rule; go adaptive
    # with a breakpoint there
    val, err = integrate.quad(
        lambda t: np.log((s * np.cos(t)) ** 2 + (a * np.cos(t) - b * np.sin(t)) ** 2),
        -np.pi / 2, np.pi / 2, points=[np.arctan(a / b)],
        epsabs=quad.tol, epsrel=quad.tol, limit=2000)
    err /= np.pi
    if err > 1e-8:
        raise NumericalError(f"Cauchy quadrature did not converge (error estimate {err:.2e})")
    return val / np.pi + 2 * np.log(2), err


def _expected_log_density(model, y, y0, m, j, quad):
    # E[log f(y, m | Y_{t+j}) | Y_t = y0]
    s_m = model.scale(m)
    a = y - model.phi ** (m + j) * y0
    b = model.phi**m * model.scale(j)
    moment, _ = cauchy_log_moment(a, b, s_m, quad)
    return -np.log(np.pi * s_m) - (moment - 2 * np.log(s_m))


def cauchy_fekd_term(model, y, y0, h, k, quad=QuadratureSpec()):
    """Expected log ratio of the (h-k)- and (h-k-1)-step densities at y."""
    if not 0 <= k <= h - 2:
        raise ValidationError(f"k={k} outside 0..{h - 2}")
    return float(_expected_log_density(model, y, y0, h - k, k, quad)
                 - _expected_log_density(model, y, y0, h - k - 1, k + 1, quad))


def cauchy_fekd_total(model, y, y0, h, quad=QuadratureSpec()):
    if h < 1:
        raise ValidationError("h must be >= 1")
    if h == 1:
        return 0.0
    direct = float(model.log_density(y, h, y0))
    return direct - float(_expected_log_density(model, y, y0, 1, h - 1, quad))


def cauchy_fekd(model, y, y0, h, quad=QuadratureSpec()):
    terms, totals = {}, {}
    for hh in _horizons(h):
        totals[hh] = cauchy_fekd_total(model, y, y0, hh, quad)
        for k in range(hh - 1):
            terms[(k, hh)] = cauchy_fekd_term(model, y, y0, hh, k, quad)
    return assemble_table("fekd", terms, totals, argument={"type": "density", "value": [float(y)]},
                          state=[float(y0)])
