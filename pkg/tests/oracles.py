"""Reference computations that share no code with the package.

Everything here is deliberately naive: explicit path enumeration for
finite chains, truncated transition matrices for count models and plain
loops for the Gaussian VAR moments.
"""
import itertools
import math

import numpy as np
from scipy import stats


# -- finite chains by path enumeration ------------------------------------------

def enumerate_paths(p, x0, h):
    """All paths (x0, x1, ..., xh) with their probabilities.

    ``p[i, j]`` is the probability of moving to i from j.
    """
    n = p.shape[0]
    out = []
    for tail in itertools.product(range(n), repeat=h):
        path = (x0,) + tail
        prob = 1.0
        for a, b in zip(path[:-1], path[1:]):
            prob *= p[b, a]
        if prob > 0:
            out.append((path, prob))
    return out


def prefix_expectations(paths, fn, h):
    """Map each prefix (length j + 1) to E[fn(path) | prefix], j = 0..h."""
    num, den = {}, {}
    for path, prob in paths:
        val = fn(path)
        for j in range(h + 1):
            key = path[: j + 1]
            num[key] = num.get(key, 0.0) + prob * val
            den[key] = den.get(key, 0.0) + prob
    return {key: num[key] / den[key] for key in num}


def brute_fred_terms(p, x0, h, z):
    """Kullback-type terms E[log E(Z|I_k) - log E(Z|I_{k+1})] for k = 0..h-1.

    ``z(path)`` must be a positive functional of the path.
    """
    paths = enumerate_paths(p, x0, h)
    cond = prefix_expectations(paths, z, h)
    terms = []
    for k in range(h):
        acc = 0.0
        for path, prob in paths:
            acc += prob * (math.log(cond[path[: k + 1]]) - math.log(cond[path[: k + 2]]))
        terms.append(acc)
    total = sum(prob * (math.log(cond[path[:1]]) - math.log(z(path))) for path, prob in paths)
    return np.array(terms), total


def brute_fevd_terms(p, x0, h, values):
    """E[Var(E(Y_h|I_{k+1}) | I_k)] for k = 0..h-1 and Var(Y_h)."""
    paths = enumerate_paths(p, x0, h)
    cond = prefix_expectations(paths, lambda path: values[path[-1]], h)
    terms = []
    for k in range(h):
        second = sum(prob * cond[path[: k + 2]] ** 2 for path, prob in paths)
        first = sum(prob * cond[path[: k + 1]] ** 2 for path, prob in paths)
        terms.append(second - first)
    mean = sum(prob * values[path[-1]] for path, prob in paths)
    var = sum(prob * (values[path[-1]] - mean) ** 2 for path, prob in paths)
    return np.array(terms), var


def random_stochastic(n, rng, floor=0.05):
    """Column-stochastic matrix with every entry at least ``floor / n``."""
    raw = rng.dirichlet(np.ones(n), size=n).T
    return (1 - floor) * raw + floor / n


def binary_matrix(pi, lam):
    up0, up1 = pi * (1 - lam), pi + lam * (1 - pi)
    return np.array([[1 - up0, 1 - up1], [up0, up1]])


# -- count models through truncated transition matrices ---------------------------

def inar_transition(p, lam, n_max):
    """Truncated column-stochastic INAR kernel on 0..n_max."""
    grid = np.arange(n_max + 1)
    mat = np.zeros((n_max + 1, n_max + 1))
    pois = stats.poisson.pmf(grid, lam)
    for y in grid:
        surv = stats.binom.pmf(np.arange(y + 1), y, p)
        mat[:, y] = np.convolve(surv, pois)[: n_max + 1]
    return mat


def nbar_transition(rho, delta, n_max):
    """Truncated NBAR kernel: Poisson-gamma mixture, shape delta + y and mean (delta + y) rho."""
    grid = np.arange(n_max + 1)
    mat = np.zeros((n_max + 1, n_max + 1))
    for y in grid:
        mat[:, y] = stats.nbinom.pmf(grid, delta + y, 1 / (1 + rho))
    return mat


def truncated_feld(mat, u, y0, h):
    """FELD terms and total of a chain whose state value is its index.

    Uses matrix products on the truncated kernel; the log-Laplace of m
    steps ahead from each state is ``log(e^{-u x} @ mat^m)``.
    """
    n = mat.shape[0]
    grid = np.arange(n)
    weights = np.exp(-u * grid)

    def log_lt(m):
        return np.log(weights @ np.linalg.matrix_power(mat, m))

    def dist(m):
        e = np.zeros(n)
        e[y0] = 1.0
        return np.linalg.matrix_power(mat, m) @ e

    terms = [log_lt(h - k) @ dist(k) - log_lt(h - k - 1) @ dist(k + 1) for k in range(h)]
    total = log_lt(h)[y0] + u * (grid @ dist(h))
    return np.array(terms), total


# -- Gaussian VAR by loops ------------------------------------------------------------

def gaussian_forecast_cov(phi, sigma, h):
    out = np.zeros_like(sigma)
    power = np.eye(phi.shape[0])
    for _ in range(h):
        out += power @ sigma @ power.T
        power = phi @ power
    return out


def gaussian_fevd_terms(phi, sigma, h, weights):
    """Contribution of the shock at t+k+1 to Var(w'Y_{t+h}), k = 0..h-1."""
    out = []
    for k in range(h):
        m = np.linalg.matrix_power(phi, h - k - 1)
        out.append(weights @ m @ sigma @ m.T @ weights)
    return np.array(out)


def gaussian_log_density(y, mean, cov):
    return float(stats.multivariate_normal(mean, cov).logpdf(y))


# -- ARG by direct Laplace transforms ------------------------------------------

def arg_log_laplace(beta, delta, u, y, h):
    """log E[exp(-u Y_{t+h}) | Y_t = y] for the ARG with unit scale, by iteration."""
    a, b = u, 0.0
    for _ in range(h):
        b += -delta * math.log1p(a)
        a = beta * a / (1 + a)
    return -a * y + b


def arg_feld_terms(beta, delta, u, y, h):
    """Terms through conditional means E(Y_{t+k}) = c + beta^k (y - c)."""
    c = delta / (1 - beta)

    def mean(k):
        return c + beta**k * (y - c)

    def log_lt_at_mean(m, k):
        a, b = u, 0.0
        for _ in range(m):
            b += -delta * math.log1p(a)
            a = beta * a / (1 + a)
        return -a * mean(k) + b

    terms = [log_lt_at_mean(h - k, k) - log_lt_at_mean(h - k - 1, k + 1) for k in range(h)]
    return np.array(terms), arg_log_laplace(beta, delta, u, y, h) + u * mean(h)


def gaussian_expected_log_density(y, load, cov, mean, var):
    """E[log N(y; load X, cov)] for X ~ N(mean, var)."""
    inv = np.linalg.inv(cov)
    base = gaussian_log_density(y, load @ mean, cov)
    return base - 0.5 * np.trace(inv @ load @ var @ load.T)


def cauchy_log_moment_exact(a, b, s):
    """E[log(s^2 + (a - b eps)^2)] for standard Cauchy eps.

    a - b eps is Cauchy with location a and scale |b|; the harmonic
    extension of log|x|^2 to the half plane gives log(a^2 + (s + |b|)^2).
    """
    return math.log(a * a + (s + abs(b)) ** 2)
