"""Count-valued autoregressions: INAR(1), NBAR(1) and the bivariate NBAR.

All three are affine in the sense of :mod:`fredkit.affine`. Closed forms for
the compound exponents and for the log-Laplace decomposition are given here
and cross-checked in the tests against the generic engine.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..affine import AffineModel, FeldComponents, feld_table, matrix_power, spectral_radius
from ..errors import DomainError, ValidationError
from ..tables import assemble_table


def _nonneg(u):
    return bool(np.all(np.isfinite(u)) and np.all(u >= 0))


def _positive_u(u):
    u = float(np.atleast_1d(u)[0])
    if not u > 0:
        raise ValidationError(f"Laplace argument must be positive, got {u}")
    return u


def _horizons(h):
    return list(range(1, h + 1)) if np.isscalar(h) else list(h)


# ---------------------------------------------------------------------------
# INAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InarParams:
    """Binomial-thinning autoregression ``Y_t = p o Y_{t-1} + eps_t``, eps ~ Poisson(lam)."""

    p: float
    lam: float
    model_id = "inar"

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ValidationError(f"INAR p must lie in [0, 1), got {self.p}")
        if not self.lam >= 0:
            raise ValidationError(f"INAR lambda must be >= 0, got {self.lam}")

    dim = 1

    @property
    def stationary_mean(self):
        return self.lam / (1 - self.p)

    def affine(self):
        return inar_affine(self)

    def log_laplace(self, u, h, states):
        u = float(np.atleast_1d(u)[0])
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -u * states
        ph = self.p**h
        coef = -np.log(ph * np.exp(-u) + 1 - ph)
        return -coef * states - self.stationary_mean * (1 - ph) * (-np.expm1(-u))

    def mean(self, y, h):
        ph = self.p**h
        return ph * np.asarray(y, dtype=float) + self.stationary_mean * (1 - ph)


def inar_affine(params):
    p, lam = params.p, params.lam
    mu = lam / (1 - p)
    return AffineModel(
        1,
        a=lambda u: -np.log(p * np.exp(-u) + 1 - p),
        c=lambda u: -mu * (-np.expm1(-u[0])),
        grad_a0=[[p]],
        grad_c0=[-mu],
        domain=_nonneg,
        name="inar",
    )


def inar_compound_a(params, u, h):
    ph = params.p**h
    return float(-np.log(ph * np.exp(-u) + 1 - ph))


def inar_feld_components(params, u, h):
    """Closed-form state loading and constant of the INAR FELD."""
    u = _positive_u(u)
    p, lam = params.p, params.lam
    mu = lam / (1 - p)
    x = -np.expm1(-u)
    # G[m] = log(1 - p^m + p^m e^{-u}) = -a^m(u)
    G = np.array([np.log1p(-(p**m) * x) for m in range(h + 1)])
    alpha_total = np.array([p**h * u + G[h]])
    beta_total = mu * (1 - p**h) * (u - x)
    alpha_terms = np.empty((h, 1))
    beta_terms = np.empty(h)
    for k in range(h):
        alpha_terms[k, 0] = p**k * G[h - k] - p ** (k + 1) * G[h - k - 1]
        beta_terms[k] = (mu * (1 - p**k) * G[h - k] - mu * (1 - p ** (k + 1)) * G[h - k - 1]
                         - lam * p ** (h - k - 1) * x)
    return FeldComponents(alpha_total, float(beta_total), alpha_terms, beta_terms)


def inar_feld(params, u, y0, h):
    """INAR FELD table for horizons 1..h (or an explicit list)."""
    u = _positive_u(u)
    y0 = float(y0)
    if y0 < 0 or y0 != int(y0):
        raise ValidationError("INAR state must be a nonnegative integer")
    terms, totals = {}, {}
    for hh in _horizons(h):
        comp = inar_feld_components(params, u, hh)
        totals[hh] = comp.total([y0])
        terms[hh] = comp.terms([y0])
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": [u]},
                          state=[y0])


def inar_feld_limit(params, u):
    """Limit of the INAR FELD total as the horizon grows (state effect vanishes)."""
    u = float(u)
    if u < 0:
        raise ValidationError("u must be >= 0")
    return params.lam / (1 - params.p) * (u + np.expm1(-u))


# ---------------------------------------------------------------------------
# NBAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NbarParams:
    """Negative binomial autoregression with latent gamma intensity.

    ``X_{t+1} | Y_t ~ Gamma(delta + Y_t, scale c)`` and
    ``Y_{t+1} | X_{t+1} ~ Poisson(beta X_{t+1})``. Only ``rho = beta c``
    and ``delta`` are identified; the sampler uses ``beta = 1`` unless told
    otherwise.
    """

    rho: float
    delta: float
    beta: float = None
    c: float = None
    model_id = "nbar"
    dim = 1

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValidationError(f"NBAR rho must lie in (0, 1), got {self.rho}")
        if not self.delta > 0:
            raise ValidationError(f"NBAR delta must be positive, got {self.delta}")
        if (self.beta is None) != (self.c is None):
            raise ValidationError("give both beta and c or neither")
        if self.beta is not None:
            if not (self.beta > 0 and self.c > 0):
                raise ValidationError("beta and c must be positive")
            if abs(self.beta * self.c - self.rho) > 1e-12:
                raise ValidationError("beta * c must equal rho")

    @property
    def intensity_scale(self):
        # (beta, c) actually used by the sampler
        return (1.0, self.rho) if self.beta is None else (self.beta, self.c)

    @property
    def stationary_mean(self):
        return self.delta * self.rho / (1 - self.rho)

    def cumulative_rho(self, h):
        """``beta c_h = rho (1 - rho^h) / (1 - rho)``; equals -1 at h = -1."""
        return self.rho * (1 - self.rho**h) / (1 - self.rho)

    def _log_terms(self, u, hmax):
        # L[j + 1] = log(1 + beta c_j (1 - e^{-u})) for j = -1..hmax
        x = -np.expm1(-u)
        out = [-u]
        for j in range(0, hmax + 1):
            out.append(np.log1p(self.cumulative_rho(j) * x))
        return np.array(out)

    def compound_a(self, u, h):
        L = self._log_terms(u, h)
        return float(L[h + 1] - L[h])

    def affine(self):
        return nbar_affine(self)

    def log_laplace(self, u, h, states):
        u = float(np.atleast_1d(u)[0])
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -u * states
        L = self._log_terms(u, h)
        return -(L[h + 1] - L[h]) * states - self.delta * L[h + 1]

    def mean(self, y, h):
        rh = self.rho**h
        return rh * np.asarray(y, dtype=float) + self.stationary_mean * (1 - rh)

    def log_pmf(self, y, y_prev):
        """log P(Y_t = y | Y_{t-1} = y_prev), vectorized."""
        y = np.asarray(y, dtype=float)
        y_prev = np.asarray(y_prev, dtype=float)
        r = self.delta + y_prev
        return (y * np.log(self.rho) + gammaln(r + y) - gammaln(y + 1) - gammaln(r)
                - (r + y) * np.log1p(self.rho))


def nbar_affine(params):
    rho, delta = params.rho, params.delta
    kappa = rho / (1 - rho)
    return AffineModel(
        1,
        a=lambda u: np.log1p(rho * -np.expm1(-u)),
        c=lambda u: -delta * np.log1p(kappa * -np.expm1(-u[0])),
        grad_a0=[[rho]],
        grad_c0=[-delta * kappa],
        domain=_nonneg,
        name="nbar",
    )


def nbar_feld_components(params, u, h):
    """Closed-form state loading and constant of the NBAR FELD.

    Uses ``a^m(u) = L_m - L_{m-1}`` with ``L_j = log(1 + beta c_j (1 - e^{-u}))``
    and ``L_{-1} = -u`` (the natural extension ``beta c_{-1} = -1``), so the
    k = h-1 term involves the horizon-0 transform ``exp(-u Y)`` exactly.
    """
    u = _positive_u(u)
    rho, delta = params.rho, params.delta
    mu = params.stationary_mean
    L = params._log_terms(u, h)  # L[j + 1] <-> index j

    def comp(m):
        return L[m + 1] - L[m]

    alpha_total = np.array([u * rho**h - comp(h)])
    beta_total = u * mu * (1 - rho**h) - delta * L[h + 1]
    alpha_terms = np.empty((h, 1))
    beta_terms = np.empty(h)
    for k in range(h):
        cur, nxt = comp(h - k), comp(h - k - 1)
        alpha_terms[k, 0] = rho ** (k + 1) * nxt - rho**k * cur
        beta_terms[k] = (mu * (nxt - cur) + mu * (rho**k * cur - rho ** (k + 1) * nxt)
                         - delta * (L[h - k + 1] - L[h - k]))
    return FeldComponents(alpha_total, float(beta_total), alpha_terms, beta_terms)


def nbar_feld(params, u, y0, h):
    u = _positive_u(u)
    y0 = float(y0)
    terms, totals = {}, {}
    for hh in _horizons(h):
        comp = nbar_feld_components(params, u, hh)
        totals[hh] = comp.total([y0])
        terms[hh] = comp.terms([y0])
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": [u]},
                          state=[y0])


# ---------------------------------------------------------------------------
# bivariate NBAR
# ---------------------------------------------------------------------------

BINBAR_FIELDS = ("alpha1", "alpha2", "beta1", "beta2", "delta1", "delta2", "sigma1",
                 "sigma2", "delta")


@dataclass(frozen=True)
class BiNbarParams:
    """Bivariate NBAR with idiosyncratic and common gamma intensities.

    Measurement: ``Y_{j,t+1} ~ Poisson(alpha_j Z + beta_j X_j)`` with
    ``X_j ~ Gamma(delta_j + Y_{j,t})`` and
    ``Z ~ Gamma(delta + sigma_1 Y_{1,t} + sigma_2 Y_{2,t})`` (unit scales).
    Negative coefficients are allowed for the closed forms, which only need
    positive log arguments; the sampler requires a generative parameter set.
    """

    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    delta1: float
    delta2: float
    sigma1: float
    sigma2: float
    delta: float
    model_id = "nbar2"
    dim = 2

    def __post_init__(self):
        if min(self.delta1, self.delta2, self.delta) <= 0:
            raise ValidationError("bivariate NBAR shape parameters must be positive")
        c1 = 1 - self.alpha1 - self.sigma1 * self.beta1
        c2 = 1 - self.alpha2 - self.sigma2 * self.beta2
        if not (c1 > 0 and c2 > 0 and c1 * c2 > self.sigma1 * self.sigma2 * self.beta1 * self.beta2):
            raise ValidationError("bivariate NBAR stationarity conditions fail")
        _, A = binbar_var_representation(self)
        if not spectral_radius(A) < 1:
            raise ValidationError("bivariate NBAR mean dynamics are not stationary")

    @classmethod
    def from_vector(cls, theta):
        return cls(*[float(v) for v in theta])

    def to_vector(self):
        return np.array([getattr(self, f) for f in BINBAR_FIELDS])

    @property
    def is_generative(self):
        vals = (self.alpha1, self.alpha2, self.beta1, self.beta2, self.sigma1, self.sigma2)
        return min(vals) >= 0

    def affine(self):
        return binbar_affine(self)

    def log_laplace(self, u, h, states):
        u = np.asarray(u, dtype=float)
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -states @ u
        a1, a2, b = binbar_recursion(self, u, h)
        return -states @ np.array([a1, a2]) - b

    def mean(self, y, h):
        C, A = binbar_var_representation(self)
        mu = np.linalg.solve(np.eye(2) - A, C)
        return mu + matrix_power(A, h) @ (np.asarray(y, dtype=float) - mu)


def _binbar_logs(params, u1, u2):
    x1, x2 = -np.expm1(-u1), -np.expm1(-u2)
    args = (1 + params.beta1 * x1, 1 + params.beta2 * x2,
            1 + params.alpha1 * x1 + params.alpha2 * x2)
    if min(args) <= 0:
        raise DomainError(f"bivariate NBAR: nonpositive log argument at u=({u1}, {u2})")
    return np.log(args)


def binbar_one_step(params, u1, u2):
    """One-step exponents ``(a1, a2, b)``: ``E[e^{-u'Y_{t+1}}|Y_t] = exp(-a'Y_t - b)``."""
    l1, l2, lz = _binbar_logs(params, u1, u2)
    a1 = l1 + params.sigma1 * lz
    a2 = l2 + params.sigma2 * lz
    b = params.delta1 * l1 + params.delta2 * l2 + params.delta * lz
    return float(a1), float(a2), float(b)


def binbar_recursion(params, u, h):
    """h-step exponents with the intercept accumulated along the compound path."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    a1, a2 = float(u[0]), float(u[1])
    b = 0.0
    for step in range(1, h + 1):
        try:
            n1, n2, inc = binbar_one_step(params, a1, a2)
        except DomainError as exc:
            raise DomainError(f"bivariate NBAR recursion leaves the domain at step {step}") from exc
        a1, a2, b = n1, n2, b + inc
    return a1, a2, b


def binbar_var_representation(params):
    """Linear prediction ``E[Y_{t+1}|Y_t] = C + A Y_t``."""
    p = params
    C = np.array([p.alpha1 * p.delta + p.beta1 * p.delta1,
                  p.alpha2 * p.delta + p.beta2 * p.delta2])
    A = np.array([[p.alpha1 * p.sigma1 + p.beta1, p.alpha1 * p.sigma2],
                  [p.alpha2 * p.sigma1, p.alpha2 * p.sigma2 + p.beta2]])
    return C, A


def _binbar_domain(params):
    def check(u):
        if not np.all(np.isfinite(u)):
            return False
        x = -np.expm1(-np.asarray(u))
        return (1 + params.beta1 * x[0] > 0 and 1 + params.beta2 * x[1] > 0
                and 1 + params.alpha1 * x[0] + params.alpha2 * x[1] > 0)
    return check


def binbar_affine(params):
    C, A = binbar_var_representation(params)
    mu = np.linalg.solve(np.eye(2) - A, C)

    def a(u):
        a1, a2, _ = binbar_one_step(params, u[0], u[1])
        return np.array([a1, a2])

    return AffineModel(
        2,
        a=a,
        b=lambda u: -binbar_one_step(params, u[0], u[1])[2],
        grad_a0=A,
        grad_c0=-mu,
        domain=_binbar_domain(params),
        name="nbar2",
    )


def binbar_feld(params, u, y0, h):
    """FELD table from the exponent recursion and the linear mean dynamics."""
    u = np.asarray(u, dtype=float)
    if u.shape != (2,) or np.any(u < 0):
        raise ValidationError("bivariate NBAR argument must be a nonnegative 2-vector")
    y0 = np.asarray(y0, dtype=float)
    hs = _horizons(h)
    hmax = max(hs)
    C, A = binbar_var_representation(params)
    means = [y0]
    for _ in range(hmax):
        means.append(C + A @ means[-1])
    # exponents for horizons 0..hmax
    expo = [(u, 0.0)]
    for m in range(1, hmax + 1):
        a1, a2, b = binbar_recursion(params, u, m)
        expo.append((np.array([a1, a2]), b))

    def exp_log_psi(m, j):
        # E[log Psi(u, m | Y_{t+j}) | Y_t]
        coef, b = expo[m]
        return -coef @ means[j] - b

    terms, totals = {}, {}
    for hh in hs:
        totals[hh] = exp_log_psi(hh, 0) + u @ means[hh]
        terms[hh] = [exp_log_psi(hh - k, k) - exp_log_psi(hh - k - 1, k + 1) for k in range(hh)]
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": u.tolist()},
                          state=y0.tolist())


def binbar_feld_affine(params, u, y0, h):
    """Same table through the generic affine engine (used for cross-checks)."""
    return feld_table(binbar_affine(params), u, y0, h)
