"""String ids for the supported models and their JSON parameter schemas."""
import json

import jsonschema
import numpy as np

from .errors import ValidationError
from .models.counts import BINBAR_FIELDS, BiNbarParams, InarParams, NbarParams
from .models.linear import CauchyArModel, GaussianVarModel
from .models.markov import BinaryChainParams, MarkovChain
from .models.positive import ArgParams, WarParams

_NUM = {"type": "number"}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]}}


def _obj(props, required=None):
    return {"type": "object", "properties": props, "required": list(required or props),
            "additionalProperties": False}


SCHEMAS = {
    "inar": _obj({"p": _NUM, "lambda": _NUM}),
    "arg": _obj({"beta": _NUM, "delta": _NUM}),
    "nbar": _obj({"rho": _NUM, "delta": _NUM, "beta": _NUM, "c": _NUM}, ["rho", "delta"]),
    "nbar2": _obj({f: _NUM for f in BINBAR_FIELDS}),
    "gauss-var": _obj({"phi": _MATRIX, "sigma": _MATRIX}),
    "cauchy": _obj({"phi": _NUM, "sigma": _NUM}),
    "markov": _obj({"p": _MATRIX, "n": {"type": "integer", "minimum": 1},
                    "values": {"type": "array", "items": _NUM}}, ["p"]),
    "binary-chain": _obj({"pi": _NUM, "lambda": _NUM}),
    "war": _obj({"m": _MATRIX, "sigma": _MATRIX, "k_dof": _NUM}),
}


def _square(value, name, order="C"):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        n = int(round(np.sqrt(arr.size)))
        if n * n != arr.size:
            raise ValidationError(f"{name}: flat array length {arr.size} is not a square")
        arr = arr.reshape((n, n), order=order)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    return arr


def _markov(params):
    # flat arrays are column-major: the first n entries are the law out of state 0
    p = _square(params["p"], "p", order="F")
    if "n" in params and params["n"] != p.shape[0]:
        raise ValidationError("markov: n does not match the size of p")
    return MarkovChain(p, params.get("values"))


FACTORIES = {
    "inar": lambda q: InarParams(q["p"], q["lambda"]),
    "arg": lambda q: ArgParams(q["beta"], q["delta"]),
    "nbar": lambda q: NbarParams(q["rho"], q["delta"], q.get("beta"), q.get("c")),
    "nbar2": lambda q: BiNbarParams(**{f: q[f] for f in BINBAR_FIELDS}),
    "gauss-var": lambda q: GaussianVarModel(_square(q["phi"], "phi"), _square(q["sigma"], "sigma")),
    "cauchy": lambda q: CauchyArModel(q["phi"], q["sigma"]),
    "markov": _markov,
    "binary-chain": lambda q: BinaryChainParams(q["pi"], q["lambda"]),
    "war": lambda q: WarParams(_square(q["m"], "m"), _square(q["sigma"], "sigma"), q["k_dof"]),
}

MODEL_IDS = tuple(FACTORIES)


def build_model(model_id, params):
    """Validate ``params`` (dict or JSON text) against the schema and build the model."""
    if model_id not in FACTORIES:
        raise ValidationError(f"unknown model {model_id!r}; choose from {', '.join(MODEL_IDS)}")
    if isinstance(params, str):
        try:
            params = json.loads(params)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"parameters are not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(params, SCHEMAS[model_id])
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"{model_id} parameters: {exc.message}") from exc
    return FACTORIES[model_id](params)


def model_params(model):
    """Inverse of :func:`build_model` for the parameter objects in this package."""
    if isinstance(model, InarParams):
        return "inar", {"p": model.p, "lambda": model.lam}
    if isinstance(model, ArgParams):
        return "arg", {"beta": model.beta, "delta": model.delta}
    if isinstance(model, NbarParams):
        out = {"rho": model.rho, "delta": model.delta}
        if model.beta is not None:
            out.update(beta=model.beta, c=model.c)
        return "nbar", out
    if isinstance(model, BiNbarParams):
        return "nbar2", {f: getattr(model, f) for f in BINBAR_FIELDS}
    if isinstance(model, GaussianVarModel):
        return "gauss-var", {"phi": model.phi.tolist(), "sigma": model.sigma.tolist()}
    if isinstance(model, CauchyArModel):
        return "cauchy", {"phi": model.phi, "sigma": model.sigma}
    if isinstance(model, MarkovChain):
        return "markov", {"p": model.p.tolist(), "values": model.values.tolist()}
    if isinstance(model, BinaryChainParams):
        return "binary-chain", {"pi": model.pi, "lambda": model.lam}
    if isinstance(model, WarParams):
        return "war", {"m": model.m.tolist(), "sigma": model.sigma.tolist(), "k_dof": model.k_dof}
    raise ValidationError(f"no registry entry for {type(model).__name__}")
