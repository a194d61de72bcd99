"""Monte-Carlo estimates of FRED totals and terms from their definitions.

The total is ``E{log[E(Z_{t+h}|I_t) / Z_{t+h}] | I_t}`` and term k is
``E{log[E(Z_{t+h}|I_{t+k}) / E(Z_{t+h}|I_{t+k+1})] | I_t}``. Only the outer
path is simulated; the inner conditional functionals come from the model's
closed forms. For a density transform ``Z_{t+h} = f(y, 1 | Y_{t+h-1})`` so
that ``E(Z_{t+h}|I_{t+j}) = f(y, h-j | Y_{t+j})``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .simulation import simulate

TRANSFORM_KINDS = ("laplace", "density", "matrix-laplace")
MIN_PATHS = 100


@dataclass(frozen=True, eq=False)
class TransformSpec:
    """Positive transform ``Z`` of the process.

    Parameters
    ----------
    kind : {"laplace", "density", "matrix-laplace"}
    value : array_like
        Laplace argument u, density evaluation point y, or matrix argument Gamma.
    domain : callable, optional
        Extra predicate on ``value``. Laplace arguments of count and
        positive models must be componentwise nonnegative.
    """

    kind: str
    value: object
    domain: object = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValidationError(f"unknown transform kind {self.kind!r}")
        object.__setattr__(self, "value", np.asarray(self.value, dtype=float))
        if self.domain is not None and not self.domain(self.value):
            raise ValidationError(f"transform argument {self.value.tolist()} outside its domain")

    @classmethod
    def laplace(cls, u, nonnegative=False):
        dom = (lambda v: bool(np.all(v >= 0))) if nonnegative else None
        return cls("laplace", u, dom)

    @classmethod
    def density(cls, y):
        return cls("density", y)

    @classmethod
    def matrix_laplace(cls, gamma):
        return cls("matrix-laplace", gamma)

    @property
    def horizon_shift(self):
        # Z_{t+h} is known at t+h-1 for densities
        return 1 if self.kind == "density" else 0

    def log_functional(self, model, m, states):
        """log E(Z_{s+m+shift} | Y_s) at each of ``states``."""
        if self.kind == "density":
            return np.asarray(model.log_density(self._point(), m + 1, states), dtype=float)
        return np.asarray(model.log_laplace(self._arg(), m, states), dtype=float)

    def _point(self):
        return self.value.item() if self.value.size == 1 else self.value

    def _arg(self):
        return self.value


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    std_error: float
    n_paths: int
    seed: int

    def within(self, target, n_se=3.0):
        return abs(self.value - target) <= n_se * self.std_error + 1e-12


def _check_finite(arr, what):
    arr = np.asarray(arr, dtype=float)
    bad = ~np.isfinite(arr)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NumericalError(
            f"{what} is not finite on sampled path {idx} (transform vanishes there; for a "
            "density this signals an unsupported atom)")
    return arr


def _estimate(samples, n_paths, seed):
    samples = np.asarray(samples, dtype=float)
    se = float(samples.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else float("inf")
    return OracleEstimate(float(samples.mean()), se, int(n_paths), int(seed))


def _check_common(h, n_paths):
    if h < 1:
        raise ValidationError("h must be >= 1")
    if n_paths < MIN_PATHS:
        raise ValidationError(f"n_paths must be at least {MIN_PATHS}")


def fred_total_oracle(model, transform, y0, h, n_paths, seed, workers=1):
    """Monte-Carlo estimate of the FRED total at horizon h."""
    _check_common(h, n_paths)
    shift = transform.horizon_shift
    steps = h - shift
    if steps == 0:
        # density at h = 1: Z_{t+1} is known at t, the total is exactly 0
        return OracleEstimate(0.0, 0.0, int(n_paths), int(seed))
    lead = float(np.asarray(transform.log_functional(model, h - shift, y0)).reshape(-1)[0])
    if not np.isfinite(lead):
        raise NumericalError("conditional functional at the starting state is not finite")
    paths = simulate(model, y0, steps, n_paths, seed, workers=workers)
    end = paths.at(steps)
    log_z = _check_finite(transform.log_functional(model, 0, end), "log Z")
    return _estimate(lead - log_z, n_paths, seed)


def fred_term_oracle(model, transform, y0, h, k, n_paths, seed, workers=1):
    """Monte-Carlo estimate of FRED term k at horizon h."""
    _check_common(h, n_paths)
    shift = transform.horizon_shift
    kmax = h - 1 - shift
    if not 0 <= k <= kmax:
        raise ValidationError(f"k={k} outside 0..{kmax}")
    paths = simulate(model, y0, k + 1, n_paths, seed, workers=workers)
    cur = transform.log_functional(model, h - k - shift, paths.at(k))
    nxt = transform.log_functional(model, h - k - 1 - shift, paths.at(k + 1))
    cur = _check_finite(cur, "log E(Z | I_{t+k})")
    nxt = _check_finite(nxt, "log E(Z | I_{t+k+1})")
    return _estimate(cur - nxt, n_paths, seed)
