"""Global anchor prototypes: EMA tracking and prototype-comparison inference.

The store keeps one direction per anchor class (the low and high ends of
the ordinal scale). Each training batch nudges them toward the normalized
batch class means; at inference a query is scored by a two-way softmax
over its cosine similarities to the two anchors. Scores above 0.5 read as
the progressive outcome, everything else as stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadConfigError,
    DatasetIOError,
    DatasetParseError,
    DimMismatchError,
    OutOfRangeError,
    UntrainedStoreError,
    ZeroVectorError,
)
from .linalg import NORM_EPS, as_vector, cosine_similarity, normalize, softmax

STABLE = "stable"
PROGRESSIVE = "progressive"


@dataclass
class GlobalPrototypeStore:
    """EMA-tracked anchor directions for the two ends of the label scale.

    Anchors start as zero vectors and are bootstrapped by the first update.
    After the first update they are never zero again, but they are not
    unit norm either (the EMA is a convex combination of unit vectors).
    """

    dim: int
    sigma: float = 0.9
    anchor_classes: tuple[int, int] = (1, 3)
    anchor_low: np.ndarray = field(default=None)  # type: ignore[assignment]
    anchor_high: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dim < 1:
            raise BadConfigError("store dim must be >= 1")
        if not 0.0 < self.sigma < 1.0:
            raise BadConfigError(f"sigma must lie strictly inside (0, 1), got {self.sigma}")
        lo, hi = self.anchor_classes
        if lo == hi:
            raise BadConfigError("anchor classes must be distinct")
        for name in ("anchor_low", "anchor_high"):
            v = getattr(self, name)
            if v is None:
                v = np.zeros(self.dim, dtype=np.float64)
            else:
                v = np.asarray(v, dtype=np.float64)
                if v.shape != (self.dim,):
                    raise DimMismatchError(f"{name} must have shape ({self.dim},)")
            setattr(self, name, v)


def is_trained(store: GlobalPrototypeStore) -> bool:
    """True once both anchors have left their zero initialization."""
    return (
        float(np.linalg.norm(store.anchor_low)) > NORM_EPS
        and float(np.linalg.norm(store.anchor_high)) > NORM_EPS
    )


def _advance(p: np.ndarray, mu: np.ndarray, sigma: float) -> np.ndarray:
    mu_hat = normalize(mu, "class mean")
    if float(np.linalg.norm(p)) <= NORM_EPS:
        return mu_hat.copy()  # bootstrap: adopt the normalized mean
    p_hat = normalize(p, "anchor")
    delta = mu_hat - p_hat
    if not delta.any():
        return p_hat  # exact fixed point, skip the arithmetic entirely
    # Same value as sigma*p_hat + (1-sigma)*mu_hat, but exact when delta=0.
    return p_hat + (1.0 - sigma) * delta


def ema_update(store: GlobalPrototypeStore, mu_low, mu_high) -> GlobalPrototypeStore:
    """Move both anchors toward the normalized batch class means (in place)."""
    lo = as_vector(mu_low, "mu_low")
    hi = as_vector(mu_high, "mu_high")
    if lo.shape != (store.dim,) or hi.shape != (store.dim,):
        raise DimMismatchError(f"class means must have shape ({store.dim},)")
    store.anchor_low = _advance(store.anchor_low, lo, store.sigma)
    store.anchor_high = _advance(store.anchor_high, hi, store.sigma)
    return store


def predict_progression(query, store: GlobalPrototypeStore) -> float:
    """Two-way softmax over cosines to the anchors; the high-anchor share.

    Invariant to positive rescaling of the query and of either anchor.
    A query equidistant from both anchors scores exactly 0.5.
    """
    if not is_trained(store):
        raise UntrainedStoreError("prototype store has not been updated yet")
    q = as_vector(query, "query")
    if q.shape != (store.dim,):
        raise DimMismatchError(f"query must have shape ({store.dim},)")
    if float(np.linalg.norm(q)) <= NORM_EPS:
        raise ZeroVectorError("query has (near-)zero norm")
    c_high = cosine_similarity(q, store.anchor_high)
    c_low = cosine_similarity(q, store.anchor_low)
    return float(softmax(np.array([c_high, c_low]))[0])


def progression_scores(features: np.ndarray, store: GlobalPrototypeStore) -> np.ndarray:
    """predict_progression for every row of ``features``."""
    feats = np.asarray(features, dtype=np.float64)
    return np.array([predict_progression(z, store) for z in feats])


def classify(prob: float) -> str:
    """Map a progression score to its label: > 0.5 progressive, else stable."""
    p = float(prob)
    if not 0.0 <= p <= 1.0:
        raise OutOfRangeError(f"probability must lie in [0, 1], got {p}")
    return PROGRESSIVE if p > 0.5 else STABLE


def store_to_dict(store: GlobalPrototypeStore) -> dict:
    return {
        "dim": store.dim,
        "sigma": store.sigma,
        "anchor_classes": list(store.anchor_classes),
        "anchor_low": [float(x) for x in store.anchor_low],
        "anchor_high": [float(x) for x in store.anchor_high],
    }


def store_from_dict(payload: dict) -> GlobalPrototypeStore:
    try:
        return GlobalPrototypeStore(
            dim=int(payload["dim"]),
            sigma=float(payload["sigma"]),
            anchor_classes=tuple(int(c) for c in payload["anchor_classes"]),
            anchor_low=np.asarray(payload["anchor_low"], dtype=np.float64),
            anchor_high=np.asarray(payload["anchor_high"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetParseError(f"malformed prototype store payload: {exc}") from exc


def save_store(store: GlobalPrototypeStore, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(store_to_dict(store), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise DatasetIOError(f"cannot write prototype store: {exc}") from exc


def load_store(path) -> GlobalPrototypeStore:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DatasetIOError(f"cannot read prototype store: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"prototype store is not valid JSON: {exc}") from exc
    return store_from_dict(payload)
