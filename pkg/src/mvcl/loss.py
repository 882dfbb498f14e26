"""Temperature-scaled cosine similarity and the three contrastive losses.

All three heads are softmax cross-entropies over exponentiated cosine
similarities:

  sample level    anchors are subspace sample embeddings, positives are the
                  same sample seen in the other views, negatives are other
                  samples in the other views;
  feature level   anchors are subspace feature rows, the positive is the
                  same row index in the other (or same) view, negatives are
                  the remaining row indices;
  recovery level  anchors are original samples, candidates are cross-view
                  embeddings mapped back to the anchor view's ambient space.

Every expectation is an arithmetic mean over the anchor index and a plain
sum over view pairs, so loss magnitudes do not grow with n. Accumulation is
float64 with a fixed left-to-right ordering for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MultiViewDataset
from .errors import DimError

# Norms are floored rather than raised on, keeping the objective finite and
# differentiable at degenerate (zero-embedding) parameter values.
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class HyperParams:
    """Objective weights and temperatures.

    ``alpha`` weights the feature-level head, ``beta`` the recovery-level
    head; the three sigmas are the per-head temperatures (independent knobs,
    one default). ``fea_include_self_view`` keeps the same-view pair inside
    the feature-level sum; set False to restrict it to cross-view pairs.
    """

    d: int
    alpha: float = 1.0
    beta: float = 1.0
    sigma1: float = 0.1
    sigma2: float = 0.1
    sigma3: float = 0.1
    fea_include_self_view: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if min(self.sigma1, self.sigma2, self.sigma3) <= 0:
            raise ValueError("temperatures must be > 0")


def _check_mats(mats, what: str) -> tuple[np.ndarray, ...]:
    out = []
    for m, a in enumerate(mats):
        a = np.array(a, dtype=float)
        if a.ndim != 2:
            raise DimError(f"{what} {m} must be 2-D")
        if not np.isfinite(a).all():
            raise ValueError(f"{what} {m} contains non-finite entries")
        a.setflags(write=False)
        out.append(a)
    if not out:
        raise DimError(f"no {what} matrices given")
    return tuple(out)


@dataclass(frozen=True)
class ProjectionSet:
    """One D_m x d projection per view; columns span the shared subspace."""

    mats: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = _check_mats(self.mats, "projection")
        d = mats[0].shape[1]
        if d < 1:
            raise DimError("projections need at least one column")
        for m, a in enumerate(mats):
            if a.shape[1] != d:
                raise DimError(f"projection {m} has {a.shape[1]} columns, expected {d}")
        object.__setattr__(self, "mats", mats)

    @property
    def V(self) -> int:
        return len(self.mats)

    @property
    def d(self) -> int:
        return self.mats[0].shape[1]


@dataclass(frozen=True)
class RecoverySet:
    """One d x D_m map per view, from the subspace back to ambient space."""

    mats: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = _check_mats(self.mats, "recovery")
        d = mats[0].shape[0]
        for m, a in enumerate(mats):
            if a.shape[0] != d:
                raise DimError(f"recovery {m} has {a.shape[0]} rows, expected {d}")
        object.__setattr__(self, "mats", mats)

    @property
    def V(self) -> int:
        return len(self.mats)

    @property
    def d(self) -> int:
        return self.mats[0].shape[0]


@dataclass(frozen=True)
class EmbeddingSet:
    """Per-view d x n subspace embeddings."""

    embs: tuple[np.ndarray, ...]

    @property
    def V(self) -> int:
        return len(self.embs)


def _check_projections(P: ProjectionSet, ds: MultiViewDataset) -> None:
    if P.V != ds.V:
        raise DimError(f"{P.V} projections for {ds.V} views")
    for m, (a, D) in enumerate(zip(P.mats, ds.dims)):
        if a.shape[0] != D:
            raise DimError(f"projection {m} has {a.shape[0]} rows, view has {D} features")


def _check_recovery(F: RecoverySet, d: int, ds: MultiViewDataset) -> None:
    if F.V != ds.V:
        raise DimError(f"{F.V} recovery maps for {ds.V} views")
    for m, (a, D) in enumerate(zip(F.mats, ds.dims)):
        if a.shape != (d, D):
            raise DimError(f"recovery {m} has shape {a.shape}, expected ({d}, {D})")


def floored_col_norms(A: np.ndarray) -> np.ndarray:
    return np.maximum(np.linalg.norm(A, axis=0), NORM_FLOOR)


def exp_silent(S: np.ndarray) -> np.ndarray:
    """exp that is allowed to overflow to inf; callers test finiteness."""
    with np.errstate(over="ignore"):
        return np.exp(S)


def cosine_logits(A: np.ndarray, B: np.ndarray, sigma: float):
    """All-pairs temperature-scaled cosine between columns of A and of B.

    Returns (S, na, nb) where S[i, j] = (a_i . b_j) / (na_i * nb_j * sigma)
    and na, nb are the floored column norms.
    """
    na = floored_col_norms(A)
    nb = floored_col_norms(B)
    S = (A.T @ B) / (np.outer(na, nb) * sigma)
    return S, na, nb


def cosine_sim(u: np.ndarray, v: np.ndarray, sigma: float) -> float:
    """Cosine of two vectors divided by the temperature, in [-1/sigma, 1/sigma]."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DimError(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    nu = max(float(np.linalg.norm(u)), NORM_FLOOR)
    nv = max(float(np.linalg.norm(v)), NORM_FLOOR)
    return float(u @ v / (nu * nv * sigma))


def embeddings(P: ProjectionSet, ds: MultiViewDataset) -> list[np.ndarray]:
    """Per-view subspace embeddings P_m^T X^m (d x n each)."""
    _check_projections(P, ds)
    return [P.mats[m].T @ ds.views[m] for m in range(ds.V)]


def sample_level_loss(P: ProjectionSet, ds: MultiViewDataset, sigma1: float) -> float:
    """Cross-view sample contrast over subspace embeddings.

    For each anchor (view a, sample i) the positives are sample i in every
    other view, the negatives are all other samples in the other views;
    same-view pairs never enter. The per-anchor terms are averaged over i
    and summed over anchor views.
    """
    if sigma1 <= 0:
        raise ValueError("sigma1 must be > 0")
    Y = embeddings(P, ds)
    n = ds.n
    total = 0.0
    for a in range(ds.V):
        num = np.zeros(n)
        den = np.zeros(n)
        for v in range(ds.V):
            if v == a:
                continue
            S, _, _ = cosine_logits(Y[a], Y[v], sigma1)
            E = exp_silent(S)
            num += np.diagonal(E)
            den += E.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            total += float(np.mean(np.log(den) - np.log(num)))
    return total


def feature_level_loss(
    P: ProjectionSet,
    ds: MultiViewDataset,
    sigma3: float,
    include_self_view: bool = True,
) -> float:
    """Row-index contrast between subspace feature rows of view pairs.

    Row k of one view's embedding is contrasted against all d rows of the
    other view; only the matching row index counts as positive. This pushes
    distinct subspace dimensions apart, removing redundant coordinates.
    """
    if sigma3 <= 0:
        raise ValueError("sigma3 must be > 0")
    Y = embeddings(P, ds)
    d = P.d
    total = 0.0
    for m in range(ds.V):
        for v in range(ds.V):
            if v == m and not include_self_view:
                continue
            S, _, _ = cosine_logits(Y[m].T, Y[v].T, sigma3)
            E = exp_silent(S)
            with np.errstate(divide="ignore", invalid="ignore"):
                total += float(np.mean(np.log(E.sum(axis=1)) - np.log(np.diagonal(E))))
    return total


def recovery_level_loss(
    P: ProjectionSet, F: RecoverySet, ds: MultiViewDataset, sigma2: float
) -> float:
    """Contrast between original samples and cross-view recovered samples.

    The embedding of sample j in view v is mapped back into view m's ambient
    space by F_m; anchor x_i^m should match its own recovery (j = i) better
    than anyone else's. Captures information about view m that the other
    views' embeddings must retain.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    _check_projections(P, ds)
    _check_recovery(F, P.d, ds)
    Y = embeddings(P, ds)
    total = 0.0
    for m in range(ds.V):
        for v in range(ds.V):
            if v == m:
                continue
            Z = F.mats[m].T @ Y[v]
            S, _, _ = cosine_logits(ds.views[m], Z, sigma2)
            E = exp_silent(S)
            with np.errstate(divide="ignore", invalid="ignore"):
                total += float(np.mean(np.log(E.sum(axis=1)) - np.log(np.diagonal(E))))
    return total


def total_loss(
    P: ProjectionSet, F: RecoverySet, ds: MultiViewDataset, hp: HyperParams
) -> float:
    """sample + alpha * feature + beta * recovery; zero weights skip a head."""
    value = sample_level_loss(P, ds, hp.sigma1)
    if hp.alpha != 0.0:
        value += hp.alpha * feature_level_loss(P, ds, hp.sigma3, hp.fea_include_self_view)
    if hp.beta != 0.0:
        value += hp.beta * recovery_level_loss(P, F, ds, hp.sigma2)
    return value
