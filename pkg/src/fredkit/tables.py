"""Decomposition tables.

A table stores, for a set of horizons h, the total risk measure gamma(h)
and its per-update terms gamma(k, h). Three kinds are supported:

``feld``
    log-Laplace decomposition, k = 0..h-1
``fekd``
    Kullback (density) decomposition, k = 0..h-2; the sum is empty at h = 1
``fevd``
    variance decomposition of a scalar projection, k = 0..h-1

Tables are immutable once assembled. :func:`assemble_table` is the only
constructor that checks the additive identity, so every table built by the
engines in this package has passed it.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IdentityError, NumericalError, ValidationError

KINDS = ("feld", "fekd", "fevd")
IDENTITY_RTOL = 1e-10


def term_range(kind, h):
    """Admissible update indices k for a horizon h."""
    if kind not in KINDS:
        raise ValidationError(f"unknown decomposition kind {kind!r}")
    if h < 1:
        raise ValidationError(f"horizon must be >= 1, got {h}")
    if kind == "fekd":
        return range(0, h - 1)
    return range(0, h)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class DecompositionTable:
    """Totals and per-update terms of a forecast error decomposition.

    Attributes
    ----------
    kind : str
        One of ``"feld"``, ``"fekd"``, ``"fevd"``.
    argument : dict
        Tagged transform argument, e.g. ``{"type": "laplace", "value": [1.0]}``.
    state : list or float
        Conditioning value Y_t.
    totals : dict
        Map h -> gamma(h).
    terms : dict
        Map (k, h) -> gamma(k, h).
    residuals : dict
        Map h -> gamma(h) - sum_k gamma(k, h) recorded at assembly.
    """

    kind: str
    argument: dict
    state: object
    totals: dict
    terms: dict
    residuals: dict = field(default_factory=dict)

    @property
    def horizons(self):
        return sorted(self.totals)

    def term_range(self, h):
        return term_range(self.kind, h)

    def terms_at(self, h):
        """Terms at horizon h ordered by k."""
        return np.array([self.terms[(k, h)] for k in self.term_range(h)], dtype=float)

    def total(self, h):
        return self.totals[h]

    def shares(self, h):
        """Normalized terms at horizon h (see :func:`normalized_shares`)."""
        out = normalized_shares(self, horizons=[h])
        return np.array([out[(k, h)] for k in self.term_range(h)])

    def rows(self):
        """Yield ``(h, k, term, total, share)``; k is None for empty horizons."""
        for h in self.horizons:
            tot = self.totals[h]
            ks = list(self.term_range(h))
            if not ks:
                yield h, None, None, tot, None
                continue
            for k in ks:
                term = self.terms[(k, h)]
                share = term / tot if tot > 0 else None
                yield h, k, term, tot, share

    # -- serialization -------------------------------------------------
    def to_dict(self):
        return {
            "kind": self.kind,
            "argument": _jsonable(self.argument),
            "state": _jsonable(self.state),
            "terms": [{"h": h, "k": k, "value": v} for (k, h), v in sorted(
                self.terms.items(), key=lambda kv: (kv[0][1], kv[0][0]))],
            "totals": [{"h": h, "value": self.totals[h]} for h in self.horizons],
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, obj):
        terms = {(int(r["k"]), int(r["h"])): float(r["value"]) for r in obj["terms"]}
        totals = {int(r["h"]): float(r["value"]) for r in obj["totals"]}
        return assemble_table(obj["kind"], terms, totals, argument=obj["argument"],
                              state=obj["state"])

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def to_csv(self, path=None):
        """CSV with header ``h,k,term,total,share``.

        Kind, argument and state are carried in leading ``#`` comment lines
        so that :meth:`from_csv` can rebuild an equal table.
        """
        buf = io.StringIO()
        buf.write(f"# kind={self.kind}\n")
        buf.write(f"# argument={json.dumps(_jsonable(self.argument))}\n")
        buf.write(f"# state={json.dumps(_jsonable(self.state))}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["h", "k", "term", "total", "share"])
        fmt = lambda x: "" if x is None else repr(float(x))
        for h, k, term, tot, share in self.rows():
            writer.writerow([h, "" if k is None else k, fmt(term), fmt(tot), fmt(share)])
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
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.strip():
                body.append(line)
        reader = csv.DictReader(body)
        terms, totals = {}, {}
        for row in reader:
            h = int(row["h"])
            totals[h] = float(row["total"])
            if row["k"] != "":
                terms[(int(row["k"]), h)] = float(row["term"])
        return assemble_table(meta.get("kind", "feld"), terms, totals,
                              argument=json.loads(meta.get("argument", "null")),
                              state=json.loads(meta.get("state", "null")))

    def __eq__(self, other):
        if not isinstance(other, DecompositionTable):
            return NotImplemented
        return (self.kind == other.kind and self.totals == other.totals
                and self.terms == other.terms
                and _jsonable(self.argument) == _jsonable(other.argument)
                and _jsonable(self.state) == _jsonable(other.state))


def _normalize_terms(terms):
    # accept {(k, h): v} or {h: [v_0, v_1, ...]}
    out = {}
    for key, val in terms.items():
        if isinstance(key, tuple):
            out[(int(key[0]), int(key[1]))] = val
        else:
            for k, v in enumerate(np.atleast_1d(val)):
                out[(k, int(key))] = v
    return out


def assemble_table(kind, terms, totals, argument=None, state=None, check_identity=True,
                   rtol=IDENTITY_RTOL):
    """Build a :class:`DecompositionTable` and check its invariants.

    Parameters
    ----------
    kind : str
        Decomposition kind.
    terms : dict
        ``{(k, h): value}`` or ``{h: sequence over k}``.
    totals : dict
        ``{h: value}``; the independently computed left-hand side.
    argument, state
        Metadata stored on the table.
    check_identity : bool
        When True (closed-form totals), reject residuals above
        ``rtol * max(1, |total|)``.

    Raises
    ------
    NumericalError
        A term or total is not finite; the message names (k, h).
    IdentityError
        The additive identity fails at some horizon.
    ValidationError
        The k-range does not match the decomposition kind.
    """
    terms = _normalize_terms(terms)
    clean_terms, clean_totals, residuals = {}, {}, {}
    for h in sorted(int(h) for h in totals):
        tot = float(totals[h])
        if not math.isfinite(tot):
            raise NumericalError(f"non-finite total at h={h}")
        expected = set(term_range(kind, h))
        present = {k for (k, hh) in terms if hh == h}
        if present != expected:
            raise ValidationError(
                f"{kind} table at h={h} needs k in {sorted(expected)}, got {sorted(present)}")
        s = 0.0
        for k in sorted(expected):
            v = float(terms[(k, h)])
            if not math.isfinite(v):
                raise NumericalError(f"non-finite term at (k={k}, h={h})")
            clean_terms[(k, h)] = v
            s += v
        resid = tot - s
        if check_identity:
            tol = rtol * max(1.0, abs(tot))
            if abs(resid) > tol:
                raise IdentityError(h, abs(resid), tol)
        clean_totals[h] = tot
        residuals[h] = resid
    stray = {key for key in terms if key[1] not in clean_totals}
    if stray:
        raise ValidationError(f"terms given for horizons without totals: {sorted(stray)}")
    return DecompositionTable(kind=kind, argument=argument, state=state,
                              totals=clean_totals, terms=clean_terms, residuals=residuals)


def normalized_shares(table, horizons=None):
    """Shares gamma(k, h) / gamma(h) for each requested horizon.

    Horizons with an empty term range (FEKD at h = 1) contribute nothing.

    Raises
    ------
    ValidationError
        A requested horizon with terms has a total that is not positive.
    """
    hs = table.horizons if horizons is None else horizons
    out = {}
    for h in hs:
        ks = list(table.term_range(h))
        if not ks:
            continue
        tot = table.totals[h]
        if not tot > 0:
            raise ValidationError(f"cannot normalize: total at h={h} is {tot}")
        vals = np.array([table.terms[(k, h)] for k in ks])
        # divide by the realized sum so the shares add to one to rounding
        shares = vals / vals.sum() if vals.sum() > 0 else vals / tot
        for k, s in zip(ks, shares):
            out[(k, h)] = float(s)
    return out
