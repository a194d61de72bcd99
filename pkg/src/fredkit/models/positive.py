"""Positive-valued processes: autoregressive gamma ARG(1) and Wishart WAR(1)."""
from dataclasses import dataclass

import numpy as np

from ..affine import AffineModel, FeldComponents, matrix_power, spectral_radius
from ..errors import NumericalError, ValidationError
from ..tables import assemble_table


def _horizons(h):
    return list(range(1, h + 1)) if np.isscalar(h) else list(h)


# ---------------------------------------------------------------------------
# ARG(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArgParams:
    """Autoregressive gamma process.

    ``E[exp(-u Y_{t+1}) | Y_t] = exp(-beta u Y_t / (1 + u)) (1 + u)^{-delta}``;
    the stationary law is ``(1 - beta) Y ~ Gamma(delta)``.
    """

    beta: float
    delta: float
    model_id = "arg"
    dim = 1

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ValidationError(f"ARG beta must lie in [0, 1), got {self.beta}")
        if not self.delta > 0:
            raise ValidationError(f"ARG delta must be positive, got {self.delta}")

    @property
    def stationary_mean(self):
        return self.delta / (1 - self.beta)

    def geometric_sum(self, m):
        """``(1 - beta^m) / (1 - beta)``."""
        return (1 - self.beta**m) / (1 - self.beta)

    def compound_a(self, u, h):
        return self.beta**h * u / (1 + u * self.geometric_sum(h))

    def c(self, u):
        return -self.delta * np.log1p(u / (1 - self.beta))

    def affine(self):
        return arg_affine(self)

    def log_laplace(self, u, h, states):
        u = float(np.atleast_1d(u)[0])
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -u * states
        ah = self.compound_a(u, h)
        return -ah * states + self.c(u) - self.c(ah)

    def mean(self, y, h):
        bh = self.beta**h
        return bh * np.asarray(y, dtype=float) + self.stationary_mean * (1 - bh)


def arg_affine(params):
    beta, delta = params.beta, params.delta
    floor = -(1 - beta)
    return AffineModel(
        1,
        a=lambda u: beta * u / (1 + u),
        c=lambda u: -delta * np.log1p(u[0] / (1 - beta)),
        grad_a0=[[beta]],
        grad_c0=[-delta / (1 - beta)],
        domain=lambda u: bool(np.all(np.isfinite(u)) and np.all(u > floor)),
        name="arg",
    )


def _check_k(h, k):
    if h < 1:
        raise ValidationError("h must be >= 1")
    if k is not None and not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")


def arg_feld_alpha(params, u, h, k=None):
    """State loading of the ARG FELD total (k None) or of term k."""
    _check_k(h, k)
    beta, s = params.beta, params.geometric_sum
    if k is None:
        return u * beta**h * (1 - 1 / (1 + u * s(h)))
    return u * beta**h * (1 / (1 + s(h - k - 1) * u) - 1 / (1 + s(h - k) * u))


def arg_feld_beta(params, u, h, k=None):
    """Constant part of the ARG FELD total (k None) or of term k."""
    _check_k(h, k)
    beta, mu = params.beta, params.stationary_mean
    comp, c = params.compound_a, params.c
    if k is None:
        return u * mu * (1 - beta**h) + c(u) - c(comp(u, h))
    cur, nxt = comp(u, h - k), comp(u, h - k - 1)
    return (-mu * (cur - nxt) - mu * (nxt * beta ** (k + 1) - cur * beta**k)
            + c(nxt) - c(cur))


def arg_feld_components(params, u, h):
    alpha_terms = np.array([[arg_feld_alpha(params, u, h, k)] for k in range(h)])
    beta_terms = np.array([arg_feld_beta(params, u, h, k) for k in range(h)])
    return FeldComponents(np.array([arg_feld_alpha(params, u, h)]),
                          float(arg_feld_beta(params, u, h)), alpha_terms, beta_terms)


def arg_feld(params, u, y0, h):
    u = float(np.atleast_1d(u)[0])
    if u < 0:
        raise ValidationError("ARG FELD argument must be >= 0")
    terms, totals = {}, {}
    for hh in _horizons(h):
        comp = arg_feld_components(params, u, hh)
        totals[hh] = comp.total([y0])
        terms[hh] = comp.terms([y0])
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": [u]},
                          state=[float(y0)])


def arg_crossing(h, beta):
    """Risk aversion at which the state loadings at horizons h and h+1 coincide.

    A negative value means the two loadings never cross for u > 0.
    """
    if not 0 < beta < 1:
        raise ValidationError("beta must lie in (0, 1)")
    if h < 1:
        raise ValidationError("h must be >= 1")
    bh, bh1 = beta**h, beta ** (h + 1)
    return (1 - beta) * (bh1 + bh - 1) / ((1 - bh) * (1 - bh1))


# ---------------------------------------------------------------------------
# WAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WarParams:
    """Wishart autoregression ``Y_t = sum_k x_{k,t} x_{k,t}'`` with
    ``x_{k,t} = M x_{k,t-1} + eps``, ``eps ~ N(0, Sigma)``.
    """

    m: np.ndarray
    sigma: np.ndarray
    k_dof: float
    model_id = "war"

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.m, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "sigma", sigma)
        n = m.shape[0]
        if m.shape != (n, n) or sigma.shape != (n, n):
            raise ValidationError("WAR M and Sigma must be square of equal size")
        if not spectral_radius(m) < 1:
            raise ValidationError("WAR M must have spectral radius below 1")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise ValidationError("WAR Sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(sigma)) < -1e-12:
            raise ValidationError("WAR Sigma must be positive semi-definite")
        if not self.k_dof > n - 1:
            raise ValidationError(f"WAR degrees of freedom must exceed {n - 1}")

    @property
    def n(self):
        return self.m.shape[0]

    @property
    def state_shape(self):
        return (self.n, self.n)

    def log_laplace(self, gamma, h, states):
        """Batch version of :func:`war_log_laplace` over states of shape (N, n, n)."""
        gamma = _check_gamma(self, gamma)
        states = np.asarray(states, dtype=float)
        if h == 0:
            return -np.einsum("ij,...ji->...", gamma, states)
        load, logdet = _war_pieces(self, gamma, h)
        return -np.einsum("ij,...ji->...", load, states) - 0.5 * self.k_dof * logdet

    def mean(self, y0, h):
        mh = matrix_power(self.m, h)
        return mh @ np.asarray(y0, dtype=float) @ mh.T + self.k_dof * war_sigma_h(self, h)


def war_sigma_h(params, h):
    """``Sigma + M Sigma M' + ... + M^{h-1} Sigma M^{h-1}'`` (zero at h = 0)."""
    out = np.zeros_like(params.sigma)
    for _ in range(h):
        out = params.sigma + params.m @ out @ params.m.T
    return out


def _check_gamma(params, gamma):
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    if gamma.shape != (params.n, params.n):
        raise ValidationError("Gamma has the wrong shape")
    if np.max(np.abs(gamma - gamma.T)) > 1e-12:
        raise ValidationError("Gamma must be symmetric")
    if np.min(np.linalg.eigvalsh(gamma)) < -1e-12:
        raise ValidationError("Gamma must be positive semi-definite")
    return gamma


def _war_pieces(params, gamma, m):
    """``(M^m)' Gamma (I + 2 Sigma_m Gamma)^{-1} M^m`` and ``log det(I + 2 Sigma_m Gamma)``."""
    n = params.n
    if m == 0:
        return gamma, 0.0
    sig = war_sigma_h(params, m)
    mat = np.eye(n) + 2 * sig @ gamma
    sign, logdet = np.linalg.slogdet(mat)
    if not sign > 0:
        raise NumericalError("I + 2 Sigma_h Gamma has a nonpositive determinant")
    # Gamma (I + 2 S Gamma)^{-1} = (I + 2 Gamma S)^{-1} Gamma, symmetric
    inner = np.linalg.solve(np.eye(n) + 2 * gamma @ sig, gamma)
    inner = 0.5 * (inner + inner.T)
    mm = matrix_power(params.m, m)
    return mm.T @ inner @ mm, float(logdet)


def war_log_laplace(params, gamma, y0, h):
    """log E[exp(-Tr(Gamma Y_{t+h})) | Y_t = y0]."""
    gamma = _check_gamma(params, gamma)
    load, logdet = _war_pieces(params, gamma, h)
    return float(-np.trace(load @ np.asarray(y0, dtype=float)) - 0.5 * params.k_dof * logdet)


def war_state_loading(params, gamma, y0, h, k):
    """State piece of term k: Tr{(M^h)' Gamma [(I+2S_{h-k-1}G)^{-1} - (I+2S_{h-k}G)^{-1}] M^h Y}."""
    gamma = _check_gamma(params, gamma)
    mh = matrix_power(params.m, h)
    inner = []
    for m in (h - k - 1, h - k):
        sig = war_sigma_h(params, m)
        inner.append(np.linalg.solve(np.eye(params.n) + 2 * gamma @ sig, gamma))
    return float(np.trace(mh.T @ (inner[0] - inner[1]) @ mh @ np.asarray(y0, dtype=float)))


def war_feld_term(params, gamma, y0, h, k):
    """Expected change of the log conditional Laplace transform from t+k to t+k+1."""
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    gamma = _check_gamma(params, gamma)
    y0 = np.asarray(y0, dtype=float)
    K = params.k_dof
    load_next, logdet_next = _war_pieces(params, gamma, h - k - 1)
    load_cur, logdet_cur = _war_pieces(params, gamma, h - k)
    state = war_state_loading(params, gamma, y0, h, k)
    noise = (K * np.trace(load_next @ war_sigma_h(params, k + 1))
             - K * np.trace(load_cur @ war_sigma_h(params, k)))
    return float(state + noise + 0.5 * K * (logdet_next - logdet_cur))


def war_feld_total(params, gamma, y0, h):
    gamma = _check_gamma(params, gamma)
    return war_log_laplace(params, gamma, y0, h) + float(np.trace(gamma @ params.mean(y0, h)))


def war_feld(params, gamma, y0, h):
    gamma = _check_gamma(params, gamma)
    terms, totals = {}, {}
    for hh in _horizons(h):
        totals[hh] = war_feld_total(params, gamma, y0, hh)
        terms[hh] = [war_feld_term(params, gamma, y0, hh, k) for k in range(hh)]
    return assemble_table("feld", terms, totals,
                          argument={"type": "matrix-laplace", "value": gamma.tolist()},
                          state=np.asarray(y0, dtype=float).tolist())
