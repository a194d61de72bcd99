"""One entry point from (model, decomposition kind) to a table."""
import numpy as np

from .affine import fevd_table
from .errors import UnsupportedError, ValidationError
from .models import counts, linear, markov, positive
from .tables import KINDS

_REASONS = {
    ("cauchy", "fevd"): "the Cauchy AR(1) has no finite variance, so no variance decomposition "
                        "exists; use the density (fekd) decomposition",
    ("cauchy", "feld"): "the Cauchy AR(1) has no Laplace transform on the real line",
    ("war", "fekd"): "no closed-form density decomposition is implemented for the WAR(1)",
    ("war", "fevd"): "the variance decomposition needs a vector-valued state",
}


def supported_kinds(model):
    mid = model.model_id
    return tuple(k for k in KINDS if (mid, k) in _DISPATCH)


def _scalar(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.size != 1:
        raise ValidationError(f"{name} must be a scalar for this model")
    return float(arr[0])


def _affine_fevd(model, arg, state, h):
    return fevd_table(model.affine(), state, h, weights=arg)


_DISPATCH = {
    ("inar", "feld"): lambda m, a, s, h: counts.inar_feld(m, _scalar(a, "u"), _scalar(s, "state"), h),
    ("inar", "fevd"): _affine_fevd,
    ("nbar", "feld"): lambda m, a, s, h: counts.nbar_feld(m, _scalar(a, "u"), _scalar(s, "state"), h),
    ("nbar", "fevd"): _affine_fevd,
    ("nbar2", "feld"): lambda m, a, s, h: counts.binbar_feld(m, a, s, h),
    ("nbar2", "fevd"): _affine_fevd,
    ("arg", "feld"): lambda m, a, s, h: positive.arg_feld(m, _scalar(a, "u"), _scalar(s, "state"), h),
    ("arg", "fevd"): _affine_fevd,
    ("war", "feld"): lambda m, a, s, h: positive.war_feld(m, a, s, h),
    ("gauss-var", "feld"): lambda m, a, s, h: linear.var_feld(m, a, h, s),
    ("gauss-var", "fekd"): lambda m, a, s, h: linear.var_fekd(m, a, s, h)[0],
    ("gauss-var", "fevd"): lambda m, a, s, h: linear.var_fevd_table(m, s, h, a),
    ("cauchy", "fekd"): lambda m, a, s, h: linear.cauchy_fekd(
        m, _scalar(a, "y"), _scalar(s, "state"), h),
    ("markov", "fekd"): lambda m, a, s, h: markov.mc_fekd(m, int(_scalar(a, "y")), int(_scalar(s, "state")), h),
    ("markov", "feld"): lambda m, a, s, h: markov.mc_feld(m, a, int(_scalar(s, "state")), h),
    ("markov", "fevd"): lambda m, a, s, h: markov.mc_fevd(m, int(_scalar(s, "state")), h, a),
}
for _kind in KINDS:
    _DISPATCH[("binary-chain", _kind)] = (
        lambda f: lambda m, a, s, h: f(m.chain, a, s, h))(_DISPATCH[("markov", _kind)])


def _default_state(model):
    mid = model.model_id
    if mid == "war":
        return np.zeros(model.state_shape)
    if mid in ("gauss-var",):
        return np.zeros(model.dim)
    if mid == "nbar2":
        return np.zeros(2)
    return 0.0


def decompose(model, kind, argument=None, state=None, horizon=10):
    """Decomposition table of ``kind`` for horizons 1..horizon.

    Parameters
    ----------
    model : model object
        Any object from :mod:`fredkit.models`.
    kind : {"feld", "fekd", "fevd"}
    argument : array_like
        Laplace argument (feld), evaluation point (fekd) or projection
        weights (fevd, optional).
    state : array_like
        Conditioning value Y_t; defaults to zero.
    horizon : int

    Raises
    ------
    UnsupportedError
        The model has no such decomposition.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown decomposition kind {kind!r}")
    mid = model.model_id
    fn = _DISPATCH.get((mid, kind))
    if fn is None:
        reason = _REASONS.get((mid, kind), f"{kind} is not available for model {mid}")
        raise UnsupportedError(f"{mid}/{kind} unsupported: {reason}")
    if kind != "fevd" and argument is None:
        raise ValidationError(f"{kind} needs an argument")
    state = _default_state(model) if state is None else state
    if kind == "fevd" and argument is not None:
        argument = np.atleast_1d(np.asarray(argument, dtype=float))
    elif argument is not None and not np.isscalar(argument):
        argument = np.asarray(argument, dtype=float)
    return fn(model, argument, np.asarray(state, dtype=float), horizon)
