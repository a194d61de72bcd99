"""Exact-transition path samplers.

Paths are generated in fixed-size blocks. Block ``b`` draws from its own
Philox stream keyed by ``(seed, b)``, so the output does not depend on how
blocks are spread over workers or in which order they finish.
"""
import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedError, ValidationError
from .models.counts import BiNbarParams, InarParams, NbarParams
from .models.linear import CauchyArModel, GaussianVarModel
from .models.markov import BinaryChainParams, MarkovChain, binary_to_transition
from .models.positive import ArgParams, WarParams

BLOCK_SIZE = 4096
BURN_IN = 1000


def block_rng(seed, block):
    """Independent counter-based generator for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


# -- samplers ------------------------------------------------------------------
# Each sampler exposes init(y0, n) -> state, step(state, rng) -> (state, latent)
# and observe(state) -> observable array of shape (n, *obs_shape).

class _InarSampler:
    obs_shape = ()
    dtype = np.int64

    def __init__(self, params):
        self.params = params

    def init(self, y0, n):
        y0 = _count_state(y0, ())
        return np.full(n, y0, dtype=np.int64)

    def step(self, y, rng):
        p = self.params
        return rng.binomial(y, p.p) + rng.poisson(p.lam, size=y.shape), None

    def observe(self, y):
        return y


class _NbarSampler:
    obs_shape = ()
    dtype = np.int64

    def __init__(self, params):
        self.params = params

    def init(self, y0, n):
        return np.full(n, _count_state(y0, ()), dtype=np.int64)

    def step(self, y, rng):
        beta, c = self.params.intensity_scale
        x = rng.gamma(self.params.delta + y, c)
        return rng.poisson(beta * x), x

    def observe(self, y):
        return y


class _BiNbarSampler:
    obs_shape = (2,)
    dtype = np.int64

    def __init__(self, params):
        if not params.is_generative:
            raise UnsupportedError(
                "bivariate NBAR sampling needs nonnegative alpha, beta and sigma; "
                "negative values only define closed-form Laplace transforms")
        self.params = params

    def init(self, y0, n):
        return np.tile(_count_state(y0, (2,)), (n, 1))

    def step(self, y, rng):
        p = self.params
        n = y.shape[0]
        x1 = rng.gamma(p.delta1 + y[:, 0])
        x2 = rng.gamma(p.delta2 + y[:, 1])
        z = rng.gamma(p.delta + p.sigma1 * y[:, 0] + p.sigma2 * y[:, 1])
        y1 = rng.poisson(p.alpha1 * z + p.beta1 * x1)
        y2 = rng.poisson(p.alpha2 * z + p.beta2 * x2)
        out = np.empty((n, 2), dtype=np.int64)
        out[:, 0], out[:, 1] = y1, y2
        return out, np.column_stack([x1, x2, z])

    def observe(self, y):
        return y


class _ArgSampler:
    obs_shape = ()
    dtype = float

    def __init__(self, params):
        self.params = params

    def init(self, y0, n):
        y0 = float(y0)
        if y0 < 0:
            raise ValidationError("ARG state must be nonnegative")
        return np.full(n, y0)

    def step(self, y, rng):
        z = rng.poisson(self.params.beta * y)
        return rng.gamma(self.params.delta + z), z

    def observe(self, y):
        return y


class _GaussSampler:
    dtype = float

    def __init__(self, model):
        self.model = model
        self.chol = np.linalg.cholesky(model.sigma)
        self.obs_shape = (model.dim,)

    def init(self, y0, n):
        y0 = np.asarray(y0, dtype=float).reshape(self.model.dim)
        return np.tile(y0, (n, 1))

    def step(self, y, rng):
        eps = rng.standard_normal(y.shape) @ self.chol.T
        return y @ self.model.phi.T + eps, None

    def observe(self, y):
        return y


class _CauchySampler:
    obs_shape = ()
    dtype = float

    def __init__(self, model):
        self.model = model

    def init(self, y0, n):
        return np.full(n, float(y0))

    def step(self, y, rng):
        return self.model.phi * y + self.model.sigma * rng.standard_cauchy(y.shape), None

    def observe(self, y):
        return y


class _ChainSampler:
    obs_shape = ()
    dtype = np.int64

    def __init__(self, chain):
        self.chain = chain
        self.cum = np.cumsum(chain.p, axis=0)
        self.cum[-1] = 1.0

    def init(self, y0, n):
        return np.full(n, self.chain._state(y0), dtype=np.int64)

    def step(self, x, rng):
        draws = rng.random(x.shape)
        cols = self.cum[:, x]
        return np.sum(draws[None, :] >= cols, axis=0).astype(np.int64), None

    def observe(self, x):
        return x


class _WarSampler:
    """Outer products of K independent Gaussian VAR(1) factors."""

    dtype = float

    def __init__(self, params):
        k = float(params.k_dof)
        if k != int(k):
            raise UnsupportedError("WAR sampling needs an integer number of degrees of freedom")
        self.params = params
        self.k = int(k)
        self.obs_shape = params.state_shape
        self.chol = _psd_root(params.sigma)

    def init(self, y0, n):
        y0 = np.asarray(y0, dtype=float)
        if y0.shape != self.params.state_shape:
            raise ValidationError("WAR state has the wrong shape")
        vals, vecs = np.linalg.eigh(0.5 * (y0 + y0.T))
        if vals.min() < -1e-10:
            raise ValidationError("WAR state must be positive semi-definite")
        factors = np.zeros((self.k, self.params.n))
        order = np.argsort(vals)[::-1]
        rank = int(np.sum(vals > 1e-14))
        if rank > self.k:
            raise ValidationError(f"WAR state has rank {rank} above K={self.k}")
        for i, j in enumerate(order[:rank]):
            factors[i] = np.sqrt(vals[j]) * vecs[:, j]
        return np.tile(factors, (n, 1, 1))

    def step(self, x, rng):
        eps = rng.standard_normal(x.shape) @ self.chol.T
        return x @ self.params.m.T + eps, None

    def observe(self, x):
        return np.einsum("nki,nkj->nij", x, x)


def _psd_root(sigma):
    vals, vecs = np.linalg.eigh(sigma)
    return vecs * np.sqrt(np.clip(vals, 0, None))


def _count_state(y0, shape):
    arr = np.asarray(y0)
    if arr.shape != shape:
        raise ValidationError(f"count state must have shape {shape}")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise ValidationError("count state must be a nonnegative integer")
    return arr.astype(np.int64)


def sampler_for(model):
    if isinstance(model, InarParams):
        return _InarSampler(model)
    if isinstance(model, NbarParams):
        return _NbarSampler(model)
    if isinstance(model, BiNbarParams):
        return _BiNbarSampler(model)
    if isinstance(model, ArgParams):
        return _ArgSampler(model)
    if isinstance(model, GaussianVarModel):
        return _GaussSampler(model)
    if isinstance(model, CauchyArModel):
        return _CauchySampler(model)
    if isinstance(model, MarkovChain):
        return _ChainSampler(model)
    if isinstance(model, BinaryChainParams):
        return _ChainSampler(binary_to_transition(model))
    if isinstance(model, WarParams):
        return _WarSampler(model)
    raise UnsupportedError(f"no sampler for {type(model).__name__}")


def _resolve(model):
    if isinstance(model, (tuple, list)):
        from .registry import build_model
        return build_model(*model)
    return model


# -- path sets -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathSet:
    """Simulated paths ``paths[i, t]`` for t = 0..horizon (t = 0 is the start)."""

    model_id: str
    n_paths: int
    horizon: int
    seed: int
    paths: np.ndarray
    latent: np.ndarray = None

    def at(self, t):
        return self.paths[:, t]

    def to_csv(self, path=None):
        """Long format ``path,t,component,value``; matrix states use ``i_j`` components."""
        buf = io.StringIO()
        buf.write(f"# model={self.model_id}\n# seed={self.seed}\n")
        buf.write(f"# shape={json.dumps(list(self.paths.shape[2:]))}\n")
        buf.write(f"# dtype={self.paths.dtype.kind}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "t", "component", "value"])
        obs_shape = self.paths.shape[2:]
        comps = list(np.ndindex(*obs_shape)) if obs_shape else [()]
        labels = ["_".join(map(str, c)) if c else "0" for c in comps]
        fmt = (lambda v: str(int(v))) if self.paths.dtype.kind == "i" else (lambda v: repr(float(v)))
        for i in range(self.n_paths):
            for t in range(self.horizon + 1):
                for comp, label in zip(comps, labels):
                    writer.writerow([i, t, label, fmt(self.paths[(i, t) + comp])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text_or_path):
        text = text_or_path
        if "\n" not in text:
            with open(text_or_path) as fh:
                text = fh.read()
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.strip():
                body.append(line)
        rows = list(csv.DictReader(body))
        shape = tuple(json.loads(meta.get("shape", "[]")))
        n = max(int(r["path"]) for r in rows) + 1
        horizon = max(int(r["t"]) for r in rows)
        dtype = np.int64 if meta.get("dtype") == "i" else float
        paths = np.zeros((n, horizon + 1) + shape, dtype=dtype)
        for r in rows:
            comp = tuple(int(c) for c in r["component"].split("_")) if shape else ()
            paths[(int(r["path"]), int(r["t"])) + comp] = dtype(float(r["value"]))
        return cls(meta.get("model", ""), n, horizon, int(meta.get("seed", 0)), paths)


def _simulate_block(sampler, y0, horizon, n, seed, block, return_latent):
    rng = block_rng(seed, block)
    state = sampler.init(y0, n)
    obs = [sampler.observe(state)]
    lat = []
    for _ in range(horizon):
        state, latent = sampler.step(state, rng)
        obs.append(sampler.observe(state))
        if return_latent:
            lat.append(latent)
    out = np.stack(obs, axis=1)
    lat_arr = np.stack(lat, axis=1) if return_latent and lat and lat[0] is not None else None
    return out, lat_arr


def simulate(model, y0, horizon, n_paths, seed, workers=1, return_latent=False):
    """Simulate ``n_paths`` paths of length ``horizon`` from ``y0``.

    Parameters
    ----------
    model : model object or (model_id, params) pair
    y0 : state
        Common starting value.
    horizon : int
        Number of transitions, at least 1.
    seed : int
    workers : int
        Threads used to fill blocks; the result does not depend on it.
    return_latent : bool
        Keep the latent draws (NBAR intensities, ARG Poisson mixing counts).

    Returns
    -------
    PathSet
    """
    model = _resolve(model)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    sampler = sampler_for(model)
    sizes = [min(BLOCK_SIZE, n_paths - s) for s in range(0, n_paths, BLOCK_SIZE)]

    def run(b):
        return _simulate_block(sampler, y0, horizon, sizes[b], seed, b, return_latent)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    paths = np.concatenate([p[0] for p in parts], axis=0)
    latent = None
    if return_latent and parts[0][1] is not None:
        latent = np.concatenate([p[1] for p in parts], axis=0)
    return PathSet(getattr(model, "model_id", type(model).__name__), n_paths, horizon, int(seed),
                   paths, latent)


def step_from(model, states, seed, block=0):
    """One transition from each of the given states (used by the oracles)."""
    sampler = sampler_for(_resolve(model))
    rng = block_rng(seed, block)
    states = np.asarray(states)
    if isinstance(sampler, _WarSampler):
        internal = np.concatenate([sampler.init(s, 1) for s in states])
    else:
        internal = states.astype(sampler.dtype)
    nxt, _ = sampler.step(internal, rng)
    return sampler.observe(nxt)


def stationary_draw(model, n, seed, burn_in=BURN_IN):
    """Draws from the stationary law.

    Closed-form laws are used for the Gaussian VAR, INAR, NBAR and ARG;
    the other models start from a fixed point and run ``burn_in`` steps.
    """
    model = _resolve(model)
    rng = block_rng(seed, 0)
    if isinstance(model, GaussianVarModel):
        cov = model.stationary_cov()
        return rng.standard_normal((n, model.dim)) @ np.linalg.cholesky(cov).T
    if isinstance(model, InarParams):
        return rng.poisson(model.stationary_mean, size=n)
    if isinstance(model, NbarParams):
        kappa = model.rho / (1 - model.rho)
        return rng.poisson(rng.gamma(model.delta, kappa, size=n))
    if isinstance(model, ArgParams):
        return rng.gamma(model.delta, 1 / (1 - model.beta), size=n)
    if isinstance(model, (MarkovChain, BinaryChainParams)):
        start = 0
    elif isinstance(model, BiNbarParams):
        start = np.round(model.mean([0.0, 0.0], 50)).astype(int)
    elif isinstance(model, WarParams):
        start = np.zeros(model.state_shape)
    elif isinstance(model, CauchyArModel):
        start = 0.0
    else:
        raise UnsupportedError(f"no stationary sampler for {type(model).__name__}")
    sampler = sampler_for(model)
    state = sampler.init(start, n)
    for _ in range(burn_in):
        state, _ = sampler.step(state, rng)
    return sampler.observe(state)


__all__ = ["PathSet", "simulate", "stationary_draw", "step_from", "block_rng", "sampler_for"]
