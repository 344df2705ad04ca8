"""JSON instance files.

Three kinds share one document layout keyed by ``"kind"``::

    {"kind": "mean", "dim": 1, "states": [[0], [1]],
     "means": [{"point": [0.2], "prob": 0.5}, ...], "bound": 1.0}
    {"kind": "full_dist", "states": ["a", "b"],
     "posteriors": [{"vector": [0.3, 0.7], "prob": 0.5}, ...]}
    {"kind": "signal_model", "theta_grid": [...], "prior": [...], "likelihood": [[...], ...]}

A ``mean`` file may also carry ``"state_probs"`` (one per state) so that
expected scores under the prior can be reported.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bayes import SignalModel, posterior_mean_distribution
from .core import Box, FiniteDistribution
from .errors import ScoringError
from .full_dist import FullDistInstance, to_mean_instance
from .multi_dim import MeanElicitInstance

log = logging.getLogger(__name__)

KINDS = ("mean", "full_dist", "signal_model")
NORM_TOL = 1e-9
SILENT_TOL = 1e-12


class SchemaError(ScoringError, ValueError):
    """Malformed instance document; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise SchemaError(where + key, "missing")
    return doc[key]


def _real_array(value, field: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(field, "expected numbers") from None
    if arr.ndim != ndim or arr.size == 0:
        raise SchemaError(field, f"expected a nonempty {ndim}-d array of numbers")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(field, "contains non-finite values")
    return arr


def normalized(probs, field: str) -> np.ndarray:
    """Probability vector check: renormalize small drift, reject real errors."""
    p = _real_array(probs, field, 1)
    if np.any(p < 0):
        raise SchemaError(field, "negative probability")
    gap = abs(p.sum() - 1.0)
    if gap > NORM_TOL:
        raise SchemaError(field, f"probabilities sum to {p.sum():.12g}, not 1")
    if gap <= SILENT_TOL:
        return p
    log.warning("%s: probabilities sum to 1 %+.3g; renormalizing", field, p.sum() - 1.0)
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class Instance:
    """A parsed instance file of any kind."""

    kind: str
    data: MeanElicitInstance | FullDistInstance | SignalModel
    bound: float = 1.0
    state_probs: np.ndarray | None = None

    def with_bound(self, bound: float) -> "Instance":
        data = replace(self.data, bound=bound) if self.kind == "mean" else self.data
        return Instance(self.kind, data, bound, self.state_probs)

    def mean_instance(self) -> MeanElicitInstance:
        if self.kind == "mean":
            return self.data
        if self.kind == "full_dist":
            return to_mean_instance(self.data, self.bound)
        return MeanElicitInstance(self.box().corners(), self.posterior_means(), self.bound)

    def posterior_means(self) -> FiniteDistribution:
        if self.kind == "mean":
            return self.data.dist
        if self.kind == "full_dist":
            return self.mean_instance().dist
        return posterior_mean_distribution(self.data)

    def box(self) -> Box:
        """State box; signal-model states are probabilities, so their box covers ``[0, 1]``."""
        if self.kind == "signal_model":
            th = self.data.theta_grid
            return Box(np.minimum(th.min(axis=0), 0.0), np.maximum(th.max(axis=0), 1.0))
        S = self.mean_instance().states
        return Box(S.min(axis=0), S.max(axis=0))

    def state_prior(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(states, probs)`` of the prior over states, when the file determines it."""
        if self.kind == "signal_model":
            return self.data.theta_grid, self.data.prior
        if self.kind == "full_dist":
            return np.eye(self.data.num_states), self.data.prior()
        if self.state_probs is not None:
            return self.data.states, self.state_probs
        return None


def parse_instance(doc) -> Instance:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected a JSON object")
    kind = _require(doc, "kind")
    if kind not in KINDS:
        raise SchemaError("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    bound = doc.get("bound", 1.0)
    if not isinstance(bound, (int, float)) or isinstance(bound, bool) or not math.isfinite(bound) or bound <= 0:
        raise SchemaError("bound", "must be a positive number")
    bound = float(bound)
    try:
        if kind == "mean":
            return _parse_mean(doc, bound)
        if kind == "full_dist":
            return _parse_full(doc, bound)
        return _parse_signal(doc, bound)
    except ScoringError:
        raise
    except (ValueError, TypeError) as exc:
        raise SchemaError(kind, str(exc)) from exc


def _entries(doc, key, inner):
    items = _require(doc, key)
    if not isinstance(items, list) or not items:
        raise SchemaError(key, "expected a nonempty list")
    vals, probs = [], []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"{key}[{k}]", "expected an object")
        vals.append(_real_array(_require(item, inner, f"{key}[{k}]."), f"{key}[{k}].{inner}", 1))
        probs.append(_require(item, "prob", f"{key}[{k}]."))
    if len({v.size for v in vals}) != 1:
        raise SchemaError(f"{key}[*].{inner}", "entries have different lengths")
    return np.array(vals), normalized(probs, f"{key}[*].prob")


def _parse_mean(doc, bound) -> Instance:
    dim = _require(doc, "dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SchemaError("dim", "must be a positive integer")
    states = _real_array(_require(doc, "states"), "states", 2)
    if states.shape[1] != dim:
        raise SchemaError("states", f"points have {states.shape[1]} coordinates, dim is {dim}")
    points, probs = _entries(doc, "means", "point")
    if points.shape[1] != dim:
        raise SchemaError("means[*].point", f"points have {points.shape[1]} coordinates, dim is {dim}")
    state_probs = None
    if "state_probs" in doc:
        state_probs = normalized(doc["state_probs"], "state_probs")
        if state_probs.size != states.shape[0]:
            raise SchemaError("state_probs", "needs one probability per state")
    if np.all(probs > 0) and np.unique(points, axis=0).shape[0] == len(points):
        dist = FiniteDistribution(points, probs)  # keep file order so saving reproduces the file
    else:
        dist = FiniteDistribution.merged(points, probs, tol=0.0)
    return Instance("mean", MeanElicitInstance(states, dist, bound), bound, state_probs)


def _parse_full(doc, bound) -> Instance:
    labels = _require(doc, "states")
    if not isinstance(labels, list) or len(labels) < 2:
        raise SchemaError("states", "expected a list of at least two labels")
    if len(set(map(str, labels))) != len(labels):
        raise SchemaError("states", "labels must be distinct")
    vectors, probs = _entries(doc, "posteriors", "vector")
    if vectors.shape[1] != len(labels):
        raise SchemaError("posteriors[*].vector", f"expected {len(labels)} entries per vector")
    vectors = np.array([normalized(v, f"posteriors[{k}].vector") for k, v in enumerate(vectors)])
    return Instance("full_dist", FullDistInstance(tuple(labels), vectors, probs), bound)


def _parse_signal(doc, bound) -> Instance:
    raw = _require(doc, "theta_grid")
    nested = isinstance(raw, list) and bool(raw) and isinstance(raw[0], list)
    theta = _real_array(raw, "theta_grid", 2 if nested else 1)
    prior = normalized(_require(doc, "prior"), "prior")
    lik = _real_array(_require(doc, "likelihood"), "likelihood", 2)
    if prior.size != len(theta):
        raise SchemaError("prior", "needs one probability per grid point")
    if lik.shape[0] != len(theta):
        raise SchemaError("likelihood", "needs one row per grid point")
    lik = np.array([normalized(row, f"likelihood[{k}]") for k, row in enumerate(lik)])
    return Instance("signal_model", SignalModel(theta, prior, lik), bound)


def load_instance(path) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_instance(doc)


def instance_to_dict(inst: Instance | MeanElicitInstance | FullDistInstance | SignalModel, bound: float | None = None) -> dict:
    """Document that :func:`parse_instance` maps back to the same instance."""
    if not isinstance(inst, Instance):
        kind = {MeanElicitInstance: "mean", FullDistInstance: "full_dist", SignalModel: "signal_model"}[type(inst)]
        b = inst.bound if isinstance(inst, MeanElicitInstance) else (1.0 if bound is None else bound)
        inst = Instance(kind, inst, b)
    d = inst.data
    if inst.kind == "mean":
        doc = {
            "kind": "mean",
            "dim": int(d.dim),
            "states": d.states.tolist(),
            "means": [{"point": p.tolist(), "prob": float(q)} for p, q in zip(d.dist.support, d.dist.probs)],
            "bound": inst.bound,
        }
        if inst.state_probs is not None:
            doc["state_probs"] = inst.state_probs.tolist()
        return doc
    if inst.kind == "full_dist":
        return {
            "kind": "full_dist",
            "states": list(d.states),
            "posteriors": [{"vector": v.tolist(), "prob": float(q)} for v, q in zip(d.posteriors, d.probs)],
            "bound": inst.bound,
        }
    theta = d.theta_grid[:, 0].tolist() if d.theta_grid.shape[1] == 1 else d.theta_grid.tolist()
    return {
        "kind": "signal_model",
        "theta_grid": theta,
        "prior": d.prior.tolist(),
        "likelihood": d.likelihood.tolist(),
        "bound": inst.bound,
    }


def save_instance(path, inst, bound: float | None = None) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst, bound), indent=1) + "\n", encoding="utf-8")
