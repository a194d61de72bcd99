"""Estimation of count autoregressions and inference on decomposition terms.

Contents: OLS with heteroscedasticity-robust errors, maximum likelihood for
the NBAR(1), two-step GMM for the bivariate NBAR built on Laplace-transform
orthogonality conditions, delta-method bands for FELD terms and a
Nadaraya-Watson estimator of a single FELD term.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import expit, logit

from .affine import _central_hessian, _central_jacobian, feld_components
from .data import CountSeries
from .errors import NumericalError, ValidationError
from .models.counts import (BINBAR_FIELDS, BiNbarParams, NbarParams, binbar_one_step,
                            binbar_var_representation)

GRAD_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Point estimates with their covariance matrix.

    ``cov`` is the covariance of the estimator itself (already divided by
    the sample size), so ``std_errors = sqrt(diag(cov))``.
    """

    names: tuple
    theta_hat: np.ndarray
    cov: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.asarray(self.theta_hat, dtype=float)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (theta.size, theta.size):
            raise ValidationError("covariance shape does not match the parameter vector")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(cov))):
            raise NumericalError("estimated covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.min(np.linalg.eigvalsh(cov)) < -1e-8 * scale:
            raise NumericalError("estimated covariance is not positive semi-definite")
        object.__setattr__(self, "theta_hat", theta)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))

    def __getitem__(self, name):
        return float(self.theta_hat[self.names.index(name)])

    def se(self, name):
        return float(self.std_errors[self.names.index(name)])

    def to_dict(self):
        diag = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()}
        return {
            "method": self.method,
            "theta": dict(zip(self.names, self.theta_hat.tolist())),
            "se": dict(zip(self.names, self.std_errors.tolist())),
            "cov": self.cov.tolist(),
            "diagnostics": _plain(diag),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self):
        """Two-row table: estimates, then standard errors in parentheses."""
        head = ",".join(self.names)
        est = ",".join(f"{v:.3f}" for v in self.theta_hat)
        se = ",".join(f"({v:.3f})" for v in self.std_errors)
        return f"{head}\n{est}\n{se}\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _counts(series, n_cols):
    vals = series.values if isinstance(series, CountSeries) else np.asarray(series)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[1] != n_cols:
        raise ValidationError(f"expected a series with {n_cols} column(s), got {vals.shape[1]}")
    return vals.astype(float)


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

def ols_hc1(y, X):
    """Least squares with HC1 (heteroscedasticity-robust) covariance."""
    n, k = X.shape
    xtx = X.T @ X
    if np.linalg.matrix_rank(xtx) < k:
        raise ValidationError("degenerate regressor: X'X is singular")
    coef = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ coef
    bread = np.linalg.inv(xtx)
    meat = (X * resid[:, None] ** 2).T @ X
    cov = n / (n - k) * bread @ meat @ bread
    return coef, cov, resid


def nbar_ols(series):
    """Regression of Y_t on (1, Y_{t-1}): slope rho, intercept rho*delta.

    delta = intercept / slope, with its standard error from the delta
    method applied to the robust covariance of (intercept, slope).
    """
    y = _counts(series, 1)[:, 0]
    if y.size < 30:
        raise ValidationError("OLS needs at least 30 observations")
    if np.all(y[:-1] == y[0]):
        raise ValidationError("degenerate regressor: the lagged series is constant")
    X = np.column_stack([np.ones(y.size - 1), y[:-1]])
    coef, cov, resid = ols_hc1(y[1:], X)
    icpt, rho = coef
    grad = np.array([[0.0, 1.0], [1 / rho, -icpt / rho**2]])
    theta = np.array([rho, icpt / rho])
    return EstimationResult(("rho", "delta"), theta, grad @ cov @ grad.T, "ols",
                            {"intercept": icpt, "n_obs": int(y.size),
                             "r_squared": 1 - resid.var() / y[1:].var()})


def binbar_ols(series):
    """Equation-by-equation least squares of ``Y_t = C + A Y_{t-1} + e_t``.

    The covariance stacks both equations with a robust cross-equation meat.
    Parameters are ordered C1, A11, A12, C2, A21, A22.
    """
    y = _counts(series, 2)
    if y.shape[0] < 50:
        raise ValidationError("bivariate OLS needs at least 50 observations")
    X = np.column_stack([np.ones(y.shape[0] - 1), y[:-1]])
    n, k = X.shape
    if np.linalg.matrix_rank(X.T @ X) < k:
        raise ValidationError("degenerate regressor: X'X is singular")
    bread = np.linalg.inv(X.T @ X)
    coefs = bread @ X.T @ y[1:]
    resid = y[1:] - X @ coefs
    scores = np.concatenate([X * resid[:, [0]], X * resid[:, [1]]], axis=1)
    meat = scores.T @ scores
    big_bread = np.kron(np.eye(2), bread)
    cov = n / (n - k) * big_bread @ meat @ big_bread
    theta = np.concatenate([coefs[:, 0], coefs[:, 1]])
    A = np.array([[theta[1], theta[2]], [theta[4], theta[5]]])
    eig = np.linalg.eigvals(A)
    diag = {"C": [theta[0], theta[3]], "A": A, "eigenvalues": np.sort(np.abs(eig))[::-1],
            "spectral_radius": float(np.max(np.abs(eig))), "n_obs": int(y.shape[0])}
    return EstimationResult(("C1", "A11", "A12", "C2", "A21", "A22"), theta, cov, "ols", diag)


# ---------------------------------------------------------------------------
# NBAR maximum likelihood
# ---------------------------------------------------------------------------

def nbar_loglik(y, rho, delta):
    """Sum of the one-step log transition masses (first observation conditioned on)."""
    y = np.asarray(y, dtype=float)
    return float(np.sum(NbarParams(rho, delta).log_pmf(y[1:], y[:-1])))


def _to_free(rho, delta):
    return np.array([logit(rho), np.log(delta)])


def _from_free(z):
    return expit(z[0]), np.exp(z[1])


def nbar_mle(series, init=(0.5, 1.0)):
    """Maximum likelihood for (rho, delta).

    Nelder-Mead on (logit rho, log delta), then the covariance is the inverse
    of the numerical Hessian of the negative log-likelihood at the optimum.
    """
    y = _counts(series, 1)[:, 0]
    rho0, delta0 = init
    if not (0 < rho0 < 1 and delta0 > 0):
        raise ValidationError("init must lie in (0, 1) x (0, inf)")
    n = y.size - 1

    def nll(z):
        rho, delta = _from_free(z)
        if not (0 < rho < 1 and delta > 0):
            return np.inf
        return -nbar_loglik(y, rho, delta) / n

    z0 = _to_free(rho0, delta0)
    res = optimize.minimize(nll, z0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    rho, delta = _from_free(res.x)
    theta = np.array([rho, delta])
    # rho -> 0 with delta -> inf is the Poisson limit, outside the model
    at_boundary = not (1e-6 < rho < 1 - 1e-6 and 1e-6 < delta < 1e6)

    if at_boundary:
        raise NumericalError(f"MLE reached the parameter boundary at rho={rho}, delta={delta}")

    def nll_theta(t):
        return -nbar_loglik(y, t[0], t[1])

    # steps stay inside the parameter space
    step = min(1e-4 * max(1.0, float(np.min(theta))), 0.5 * (1 - rho), 0.5 * rho)
    hess = _central_hessian(nll_theta, theta, step)
    if not np.all(np.linalg.eigvalsh(hess) > 0):
        raise NumericalError("Hessian of the log-likelihood is not positive definite at the optimum")
    cov = np.linalg.inv(hess)
    grad = _central_jacobian(lambda t: np.array([nll_theta(t) / n]), theta, min(step, 1e-6))[0]
    ll, ll0 = -nll_theta(theta), nbar_loglik(y, rho0, delta0)
    diag = {"loglik": ll, "loglik_init": ll0, "iterations": int(res.nit),
            "grad_norm": float(np.linalg.norm(grad)),
            "converged": bool(res.success and np.linalg.norm(grad) < GRAD_TOL),
            "n_obs": int(y.size)}
    return EstimationResult(("rho", "delta"), theta, cov, "mle", diag)


# ---------------------------------------------------------------------------
# bivariate NBAR GMM
# ---------------------------------------------------------------------------

NAMED_QUADRUPLETS = ((0.41, 0.01, 0.41, 0.01), (0.41, 0.41, 0.01, 0.01))
# the named pair plus seven points of the {0.01, 0.41}^4 grid, added greedily
# to keep the Laplace block of the moment Jacobian well conditioned
DEFAULT_QUADRUPLETS = NAMED_QUADRUPLETS + (
    (0.41, 0.01, 0.01, 0.41),
    (0.01, 0.41, 0.01, 0.41),
    (0.41, 0.01, 0.01, 0.01),
    (0.01, 0.41, 0.01, 0.01),
    (0.01, 0.01, 0.01, 0.01),
    (0.01, 0.01, 0.41, 0.01),
    (0.01, 0.01, 0.01, 0.41),
)
N_OLS_MOMENTS = 6
_POSITIVE = ("delta1", "delta2", "delta")


def _theta_to_free(theta):
    z = np.array(theta, dtype=float)
    for f in _POSITIVE:
        i = BINBAR_FIELDS.index(f)
        z[i] = np.log(z[i])
    return z


def _free_to_theta(z):
    theta = np.array(z, dtype=float)
    for f in _POSITIVE:
        i = BINBAR_FIELDS.index(f)
        theta[i] = np.exp(theta[i])
    return theta


def _moment_builder(y, quadruplets):
    # theta-free pieces are computed once
    cur, lag = y[1:], y[:-1]
    U = np.array([q[:2] for q in quadruplets], dtype=float)
    V = np.array([q[2:] for q in quadruplets], dtype=float)
    lead = np.exp(-cur @ U.T)
    disc = np.exp(-lag @ V.T)
    inst = np.column_stack([np.ones(lag.shape[0]), lag])

    def moments(theta):
        params = BiNbarParams.from_vector(theta)
        expo = np.array([binbar_one_step(params, u1, u2) for u1, u2 in U])
        psi = np.exp(-lag @ expo[:, :2].T - expo[:, 2])
        C, A = binbar_var_representation(params)
        err = cur - C - lag @ A.T
        ols = np.concatenate([err[:, [0]] * inst, err[:, [1]] * inst], axis=1)
        return np.concatenate([(lead - psi) * disc, ols], axis=1)

    return moments


def binbar_moment_series(theta, y, quadruplets):
    """Per-observation moments, shape (T-1, len(quadruplets) + 6).

    Laplace conditions ``[exp(-u'Y_t) - Psi(u, 1 | Y_{t-1})] exp(-v'Y_{t-1})``
    followed by the linear-prediction errors times (1, Y_{1,t-1}, Y_{2,t-1}).
    """
    return _moment_builder(np.asarray(y, dtype=float), quadruplets)(theta)


def _dependent_quadruplets(jac, quadruplets, rtol=1e-9):
    # greedy rank build-up over the Laplace rows
    tol = rtol * max(np.linalg.norm(jac, 2), 1e-300)
    kept, dependent = [], []
    for i, q in enumerate(quadruplets):
        trial = kept + [jac[i]]
        if np.linalg.matrix_rank(np.array(trial), tol=tol) > len(kept):
            kept.append(jac[i])
        else:
            dependent.append(q)
    return len(kept), dependent


def binbar_gmm(series, quadruplets=DEFAULT_QUADRUPLETS, init=None, maxiter=4000):
    """Two-step GMM for the 9 bivariate NBAR parameters.

    Step one uses the identity weight, step two the inverse of the sample
    covariance of the moments at the step-one estimate. Standard errors come
    from the GMM sandwich. No HAC correction: at the truth the moments are
    martingale differences.
    """
    y = _counts(series, 2)
    quadruplets = [tuple(float(v) for v in q) for q in quadruplets]
    if any(len(q) != 4 for q in quadruplets):
        raise ValidationError("each quadruplet must be (u1, u2, v1, v2)")
    if init is None:
        init = _gmm_start(y)
    init = np.asarray(init, dtype=float)
    BiNbarParams.from_vector(init)
    n_laplace = len(quadruplets)
    n_mom = n_laplace + N_OLS_MOMENTS
    T = y.shape[0] - 1

    moment_series = _moment_builder(y, quadruplets)

    def mean_moments(theta):
        return moment_series(theta).mean(axis=0)

    jac0 = _central_jacobian(mean_moments, init, 1e-5)
    rank, dependent = _dependent_quadruplets(jac0[:n_laplace], quadruplets)
    if rank < len(BINBAR_FIELDS) or dependent:
        raise ValidationError(
            f"Laplace moment Jacobian has rank {rank} < 9 or dependent rows; "
            f"dependent quadruplets: {dependent}")

    def objective(z, weight):
        try:
            g = mean_moments(_free_to_theta(z))
        except (ValidationError, FloatingPointError):
            return 1e10
        if not np.all(np.isfinite(g)):
            return 1e10
        return float(T * g @ weight @ g)

    def fit(z_start, weight):
        # quasi-Newton to get close, simplex to escape flat spots, quasi-Newton polish
        runs = [optimize.minimize(objective, z_start, args=(weight,), method="BFGS")]
        runs.append(optimize.minimize(objective, runs[-1].x, args=(weight,), method="Nelder-Mead",
                                      options={"maxiter": maxiter, "maxfev": maxiter,
                                               "xatol": 1e-8, "fatol": 1e-10, "adaptive": True}))
        runs.append(optimize.minimize(objective, runs[-1].x, args=(weight,), method="BFGS",
                                      options={"gtol": 1e-8}))
        best = min(runs, key=lambda r: r.fun)
        return best, sum(r.nit for r in runs)

    eye = np.eye(n_mom)
    step1, it1 = fit(_theta_to_free(init), eye)
    theta1 = _free_to_theta(step1.x)
    g_t = moment_series(theta1)
    S = np.cov(g_t, rowvar=False, bias=True)
    weight = np.linalg.inv(S)
    obj1_in_w2 = objective(step1.x, weight)
    step2, it2 = fit(step1.x, weight)
    theta2 = _free_to_theta(step2.x)

    g_t = moment_series(theta2)
    S2 = np.cov(g_t, rowvar=False, bias=True)
    G = _central_jacobian(mean_moments, theta2, 1e-5)
    gwg = G.T @ weight @ G
    try:
        gwg_inv = np.linalg.inv(gwg)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("GMM information matrix is singular") from exc
    cov = gwg_inv @ G.T @ weight @ S2 @ weight @ G @ gwg_inv / T
    cov = 0.5 * (cov + cov.T)
    gbar = g_t.mean(axis=0)
    mom_se = g_t.std(axis=0, ddof=1) / np.sqrt(T)
    grad = _central_jacobian(lambda z: np.array([objective(z, weight) / T]), step2.x, 1e-6)[0]
    diag = {
        "objective_step1": float(step1.fun),
        "objective_step1_in_step2_metric": float(obj1_in_w2),
        "objective": float(step2.fun),
        "j_pvalue": float(stats.chi2.sf(step2.fun, n_mom - len(BINBAR_FIELDS))),
        "iterations": int(it1 + it2),
        "grad_norm": float(np.linalg.norm(grad)),
        "converged": bool(np.linalg.norm(grad) < GRAD_TOL),
        "moments": gbar,
        "moment_se": mom_se,
        "quadruplets": [list(q) for q in quadruplets],
        "n_obs": int(y.shape[0]),
    }
    return EstimationResult(BINBAR_FIELDS, theta2, cov, "gmm", diag)


def _gmm_start(y):
    # independent univariate NBAR fits by OLS give a feasible decoupled start
    theta = dict(alpha1=0.05, alpha2=0.05, sigma1=0.05, sigma2=0.05, delta=1.0)
    for j, (b, d) in enumerate((("beta1", "delta1"), ("beta2", "delta2"))):
        try:
            fit = nbar_ols(y[:, j])
            rho = float(np.clip(fit["rho"], 0.05, 0.9))
            delta = float(np.clip(fit["delta"], 0.1, 20))
        except (ValidationError, NumericalError):
            rho, delta = 0.3, 1.0
        theta[b], theta[d] = rho, delta
    return np.array([theta[f] for f in BINBAR_FIELDS])


# ---------------------------------------------------------------------------
# delta-method bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DeltaBand:
    """Point values, propagated variances and normal bands per horizon."""

    terms: dict
    totals: dict
    term_var: dict
    total_var: dict
    level: float

    def band(self, h):
        z = stats.norm.ppf(0.5 + self.level / 2)
        half = z * np.sqrt(self.total_var[h])
        return self.totals[h] - half, self.totals[h] + half


def _feld_vector(builder, theta, u, y0, horizons):
    model = builder(theta)
    out = []
    for h in horizons:
        comp = feld_components(model, u, h)
        out.extend(comp.terms(y0))
    return np.array(out)


def delta_band(theta_hat, cov, builder, u, y0, horizon, level=0.95, n_obs=1, step=1e-6):
    """Delta-method variances of FELD terms and totals.

    Parameters
    ----------
    theta_hat : array_like
    cov : array_like
        Covariance of ``theta_hat``; divided by ``n_obs`` (pass the asymptotic
        variance V and the sample size T, or an already scaled covariance
        and ``n_obs=1``).
    builder : callable
        theta -> AffineModel.
    """
    theta = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float)) / n_obs
    if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) < -1e-10 * max(1.0, np.max(np.abs(cov))):
        raise ValidationError("parameter covariance is not positive semi-definite")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    horizons = list(range(1, horizon + 1))
    keys = [(k, h) for h in horizons for k in range(h)]
    point = _feld_vector(builder, theta, u, y0, horizons)
    steps = step * np.maximum(1.0, np.abs(theta))
    cols = []
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = steps[j]
        cols.append((_feld_vector(builder, theta + e, u, y0, horizons)
                     - _feld_vector(builder, theta - e, u, y0, horizons)) / (2 * steps[j]))
    J = np.column_stack(cols)
    omega = J @ cov @ J.T
    omega = 0.5 * (omega + omega.T)
    if np.min(np.linalg.eigvalsh(omega)) < -1e-8 * max(1.0, np.max(np.abs(omega))):
        raise NumericalError("propagated covariance is not positive semi-definite")
    terms = dict(zip(keys, point))
    term_var = {key: float(omega[i, i]) for i, key in enumerate(keys)}
    totals, total_var = {}, {}
    for h in horizons:
        idx = [i for i, (k, hh) in enumerate(keys) if hh == h]
        totals[h] = float(point[idx].sum())
        total_var[h] = float(max(omega[np.ix_(idx, idx)].sum(), 0.0))
    return DeltaBand(terms, totals, term_var, total_var, level)


def compound_theta_jacobian(builder, theta, u, k, step=1e-6):
    """d a^k(u; theta) / d theta' by the chain rule along the compound path.

    ``a^k = a(a^{k-1})`` gives ``D_k = da/dtheta(a^{k-1}) + da/du(a^{k-1}) D_{k-1}``
    with ``D_0 = 0``; only one-step derivatives are differenced.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    model = builder(theta)
    path = model.compound_path(u, k)
    D = np.zeros((model.dim, theta.size))
    for j in range(1, k + 1):
        prev = path[j - 1]
        da_dtheta = _central_jacobian(lambda t: builder(t).a(prev), theta, step)
        da_du = _central_jacobian(model.a, prev, step)
        D = da_dtheta + da_du @ D
    return D


# ---------------------------------------------------------------------------
# Nadaraya-Watson FELD
# ---------------------------------------------------------------------------

def _gaussian_kernel(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


def _epanechnikov_kernel(z):
    return 0.75 * np.clip(1 - z * z, 0, None)


KERNELS = {"gaussian": _gaussian_kernel, "epanechnikov": _epanechnikov_kernel}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Symmetric kernel and bandwidth (a number or the ``"rule"`` tag).

    The rule bandwidth is ``1.06 * sd * T^{-1/5}``.
    """

    kernel: object = "gaussian"
    bandwidth: object = "rule"

    def __post_init__(self):
        fn = KERNELS.get(self.kernel) if isinstance(self.kernel, str) else self.kernel
        if fn is None:
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        mass = integrate.quad(fn, -np.inf, np.inf)[0]
        if abs(mass - 1) > 1e-6:
            raise ValidationError(f"kernel integrates to {mass}, not 1")
        grid = np.linspace(0.05, 4, 40)
        if np.max(np.abs(fn(grid) - fn(-grid))) > 1e-12:
            raise ValidationError("kernel must be symmetric")
        if not isinstance(self.bandwidth, str) and not self.bandwidth > 0:
            raise ValidationError("bandwidth must be positive")
        if isinstance(self.bandwidth, str) and self.bandwidth != "rule":
            raise ValidationError(f"unknown bandwidth rule {self.bandwidth!r}")
        object.__setattr__(self, "_fn", fn)

    def __call__(self, z):
        return self._fn(z)

    def resolve(self, x):
        if self.bandwidth == "rule":
            return 1.06 * float(np.std(x, ddof=1)) * len(x) ** (-0.2)
        return float(self.bandwidth)


def _nw_log_laplace(x, u, m, points, kern, bw, chunk=2048):
    """log of the kernel estimate of E[exp(-u Y_{s+m}) | Y_s = point]."""
    points = np.asarray(points, dtype=float)
    if m == 0:
        return -u * points
    lead = np.exp(-u * x[m:])
    base = x[:-m]
    out = np.empty(points.size)
    for s in range(0, points.size, chunk):
        w = kern((base[None, :] - points[s : s + chunk, None]) / bw)
        num, den = w @ lead, w.sum(axis=1)
        if np.any(den < 1e-12):
            raise NumericalError("empty kernel window in the first-stage smoother")
        out[s : s + chunk] = np.log(num / den)
    return out


def nw_feld(series, u, y, h, k, kernel=None):
    """Nonparametric estimate of FELD term k at horizon h given Y_t = y.

    Steps: (i) kernel ratio estimates of the m-step conditional Laplace
    transform, with m = 0 taken as ``exp(-u y)`` exactly; (ii) the log ratio
    between consecutive dates along the sample; (iii) a second kernel
    regression of that log ratio on Y_t at ``y``. Index ranges are the
    largest ones that stay inside the sample.
    """
    x = np.asarray(series.values[:, 0] if isinstance(series, CountSeries) else series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("nw_feld needs a univariate series")
    T = x.size
    if T < 200:
        raise ValidationError("nw_feld needs at least 200 observations")
    if not 0 <= k <= h - 1:
        raise ValidationError(f"k={k} outside 0..{h - 1}")
    lo, hi = np.percentile(x, [5, 95])
    if not lo <= y <= hi:
        raise ValidationError(f"y={y} is outside the 5%-95% sample range [{lo}, {hi}]")
    kernel = kernel or KernelSpec()
    bw = kernel.resolve(x)
    # outer smoother over t = 0..T-k-2 (needs Y_{t+k+1}) restricted to usable weights
    n_out = T - k - 1
    w_out = kernel((x[:n_out] - y) / bw)
    if w_out.sum() < 1e-12:
        raise NumericalError("empty kernel window in the second-stage smoother")
    use = np.nonzero(w_out > 1e-12 * w_out.max())[0]
    cur = _nw_log_laplace(x, u, h - k, x[use + k], kernel, bw)
    nxt = _nw_log_laplace(x, u, h - k - 1, x[use + k + 1], kernel, bw)
    w = w_out[use]
    return float(w @ (cur - nxt) / w.sum())
