"""Finite-state Markov chains.

Transition matrices are column-stochastic: ``p[i, j] = P(X_{t+1} = i | X_t = j)``
so that ``E[X_{t+1} | X_t] = P X_t`` for the indicator encoding of the
state. This is the transpose of the more common row convention.
"""
from dataclasses import dataclass

import numpy as np

from ..affine import matrix_power
from ..errors import DomainError, ValidationError
from ..tables import assemble_table


def _horizons(h):
    return list(range(1, h + 1)) if np.isscalar(h) else list(h)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Column-stochastic chain on states ``0..n-1`` with real state values.

    Parameters
    ----------
    p : (n, n) array
        ``p[i, j]`` is the probability of moving to i from j.
    values : (n,) array, optional
        Numeric value attached to each state, used by the variance
        decomposition. Defaults to ``0..n-1``.
    """

    p: np.ndarray
    values: np.ndarray = None
    model_id = "markov"

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        n = p.shape[0]
        if p.shape != (n, n):
            raise ValidationError("transition matrix must be square")
        if np.any(p < 0) or np.any(p > 1):
            raise ValidationError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=0) - 1)) > 1e-12:
            raise ValidationError("each column of the transition matrix must sum to 1")
        vals = np.arange(n, dtype=float) if self.values is None else np.asarray(self.values, float)
        if vals.shape != (n,):
            raise ValidationError("one value per state is required")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.p.shape[0]

    def power(self, h):
        return matrix_power(self.p, h)

    def distribution(self, x0, h):
        """Law of X_{t+h} given X_t = x0 (a state index)."""
        return self.power(h)[:, self._state(x0)]

    def stationary(self):
        vals, vecs = np.linalg.eig(self.p)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
        return v / v.sum()

    def _state(self, x):
        x = int(x)
        if not 0 <= x < self.n:
            raise ValidationError(f"state index {x} outside 0..{self.n - 1}")
        return x

    def log_density(self, y, h, states):
        """log P(X_{t+h} = y | X_t = j) for each j in ``states``."""
        ph = self.power(h)[self._state(y)]
        return _safe_log(ph, f"P^{h}[{y}, :]")[np.asarray(states, dtype=int)]

    def log_laplace(self, u, h, states):
        """log E[exp(-u_{X_{t+h}}) | X_t = j] with one argument per state."""
        u = _state_argument(self, u)
        row = np.exp(-u) @ self.power(h)
        return np.log(row)[np.asarray(states, dtype=int)]

    def mean(self, y, h):
        return self.values @ self.power(h)[:, np.asarray(y, dtype=int)]


def _safe_log(arr, label):
    arr = np.asarray(arr, dtype=float)
    if np.any(arr <= 0):
        idx = tuple(int(i) for i in np.argwhere(arr <= 0)[0])
        raise DomainError(f"zero transition probability in {label} at entry {idx}; log undefined")
    return np.log(arr)


def _state_argument(chain, u):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (chain.n,):
        raise ValidationError(f"Laplace argument needs one entry per state ({chain.n})")
    return u


@dataclass(frozen=True)
class BinaryChainParams:
    """Two-state chain with ``P(Y_{t+1} = 1 | Y_t) = pi + lambda (Y_t - pi)``."""

    pi: float
    lam: float
    model_id = "binary-chain"

    def __post_init__(self):
        if not 0 < self.pi < 1:
            raise ValidationError("pi must lie in (0, 1)")
        if not 0 <= self.lam < 1:
            raise ValidationError("lambda must lie in [0, 1)")

    def prob_one(self, y0, h):
        return self.pi + self.lam**h * (y0 - self.pi)

    @property
    def chain(self):
        return binary_to_transition(self)

    def log_density(self, y, h, states):
        return self.chain.log_density(y, h, states)

    def log_laplace(self, u, h, states):
        return self.chain.log_laplace(u, h, states)

    def mean(self, y, h):
        return self.prob_one(np.asarray(y, dtype=float), h)


def binary_to_transition(params):
    """Column-stochastic 2x2 matrix of a binary chain; state 1 has value 1."""
    pi, lam = params.pi, params.lam
    up0, up1 = pi * (1 - lam), pi + lam * (1 - pi)
    return MarkovChain(np.array([[1 - up0, 1 - up1], [up0, up1]]), values=[0.0, 1.0])


# -- FEKD --------------------------------------------------------------------

def _check_fekd_k(h, k):
    if not 0 <= k <= h - 2:
        raise ValidationError(f"k={k} outside 0..{h - 2}")


def mc_fekd_term(chain, y, x0, h, k):
    """Expected log ratio of the (h-k)- and (h-k-1)-step transition masses at y.

    ``[logP^{h-k}]_y P^k X_t - [logP^{h-k-1}]_y P^{k+1} X_t``.
    """
    _check_fekd_k(h, k)
    y, x0 = chain._state(y), chain._state(x0)
    cur = _safe_log(chain.power(h - k)[y], f"P^{h - k}[{y}, :]")
    nxt = _safe_log(chain.power(h - k - 1)[y], f"P^{h - k - 1}[{y}, :]")
    return float(cur @ chain.distribution(x0, k) - nxt @ chain.distribution(x0, k + 1))


def mc_fekd_total(chain, y, x0, h):
    if h < 1:
        raise ValidationError("h must be >= 1")
    if h == 1:
        return 0.0
    y, x0 = chain._state(y), chain._state(x0)
    direct = _safe_log(chain.power(h)[y, x0], f"P^{h}[{y}, {x0}]")
    one = _safe_log(chain.p[y], f"P[{y}, :]")
    return float(direct - one @ chain.distribution(x0, h - 1))


def mc_fekd(chain, y, x0, h):
    terms, totals = {}, {}
    for hh in _horizons(h):
        totals[hh] = mc_fekd_total(chain, y, x0, hh)
        for k in range(hh - 1):
            terms[(k, hh)] = mc_fekd_term(chain, y, x0, hh, k)
    return assemble_table("fekd", terms, totals, argument={"type": "density", "value": [int(y)]},
                          state=int(x0))


def binary_fekd_term(params, y0, h, k):
    """Closed-form FEKD term of a binary chain at the evaluation point y = 1."""
    _check_fekd_k(h, k)
    pi, lam = params.pi, params.lam

    def ratio(m):
        return np.log((pi + lam**m * (1 - pi)) / (pi * (1 - lam**m)))

    m_cur, m_next = h - k, h - k - 1
    return float(np.log((1 - lam**m_cur) / (1 - lam**m_next))
                 + ratio(m_cur) * params.prob_one(y0, k)
                 - ratio(m_next) * params.prob_one(y0, k + 1))


# -- FEVD --------------------------------------------------------------------

def mc_fevd_binary(params, y0, h, k):
    """Variance contribution of update k for a binary chain."""
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    pi, lam = params.pi, params.lam
    return float(pi * (1 - pi) * lam ** (2 * (h - k - 1)) * (1 - lam**2)
                 + (y0 - pi) * lam ** (2 * h - k - 1) * (1 - 2 * pi) * (1 - lam))


def mc_fevd_term(chain, x0, h, k, weights=None):
    """``E{V[E(v'X_{t+h} | X_{t+k+1}) | X_{t+k}] | X_t = x0}`` for state values v."""
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    v = chain.values if weights is None else np.asarray(weights, dtype=float)
    w = chain.power(h - k - 1).T @ v
    cond_var = w**2 @ chain.p - (w @ chain.p) ** 2
    return float(cond_var @ chain.distribution(x0, k))


def mc_fevd_total(chain, x0, h, weights=None):
    v = chain.values if weights is None else np.asarray(weights, dtype=float)
    dist = chain.distribution(x0, h)
    return float(v**2 @ dist - (v @ dist) ** 2)


def mc_fevd(chain, x0, h, weights=None):
    terms, totals = {}, {}
    for hh in _horizons(h):
        totals[hh] = mc_fevd_total(chain, x0, hh, weights)
        terms[hh] = [mc_fevd_term(chain, x0, hh, k, weights) for k in range(hh)]
    v = chain.values if weights is None else np.asarray(weights, dtype=float)
    return assemble_table("fevd", terms, totals, argument={"type": "weights", "value": v.tolist()},
                          state=int(x0))


# -- FELD --------------------------------------------------------------------

def _log_laplace_row(chain, u, m):
    # log E[exp(-u_{X_{s+m}}) | X_s = j] for every j
    return np.log(np.exp(-u) @ chain.power(m))


def mc_feld_term(chain, u, x0, h, k):
    """``[log(e^{-u} P^{h-k})] P^k X_t - [log(e^{-u} P^{h-k-1})] P^{k+1} X_t``, k = 0..h-1."""
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    u = _state_argument(chain, u)
    x0 = chain._state(x0)
    return float(_log_laplace_row(chain, u, h - k) @ chain.distribution(x0, k)
                 - _log_laplace_row(chain, u, h - k - 1) @ chain.distribution(x0, k + 1))


def mc_feld_total(chain, u, x0, h):
    u = _state_argument(chain, u)
    x0 = chain._state(x0)
    return float(_log_laplace_row(chain, u, h)[x0] + u @ chain.distribution(x0, h))


def mc_feld(chain, u, x0, h):
    u = _state_argument(chain, u)
    terms, totals = {}, {}
    for hh in _horizons(h):
        totals[hh] = mc_feld_total(chain, u, x0, hh)
        terms[hh] = [mc_feld_term(chain, u, x0, hh, k) for k in range(hh)]
    return assemble_table("feld", terms, totals, argument={"type": "laplace", "value": u.tolist()},
                          state=int(x0))
