"""Convex predictor-domain geometry.

The non-crossing characterization works over the convex hull of the
observed, centered predictors.  Two pieces live here: the support-scale
map a(b, X) = sup_{x in X} (-x'b) / ||b|| (how far the domain extends
against a direction b), and the preprocessing step that translates the
raw predictor cloud so the origin sits comfortably inside its hull.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDomainError

_INTERIOR_DIRECTIONS = 256
_INTERIOR_SEED = 20240901


@dataclass(frozen=True)
class PredictorDomain:
    """Centered predictor cloud standing in for the convex domain.

    points : (n, p) centered predictors; the origin is interior to their
        convex hull.
    offset : (p,) the interior point subtracted from the raw rows.
    diameter : max pairwise distance of the cloud (informational).
    """

    points: np.ndarray
    offset: np.ndarray
    diameter: float

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def p(self):
        return self.points.shape[1]

    def raw(self):
        """Undo the centering."""
        return self.points + self.offset


def as_domain(points):
    """Wrap an already-centered cloud as a domain (offset zero)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return PredictorDomain(points=pts, offset=np.zeros(pts.shape[1]),
                           diameter=_diameter(pts))


def support_scale(b, domain):
    """a(b, X): max over domain points of (-x.b)/||b||; +inf at b = 0.

    Strictly positive for b != 0 whenever the origin is interior to the
    hull of the points, and invariant under positive rescaling of b.
    """
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.inf
    return float(np.max(domain.points @ (-b)) / nb)


def support_scales(directions, domain):
    """Row-wise a(v, X) for an (L, p) stack of directions.

    Zero rows map to +inf, mirroring :func:`support_scale`.
    """
    V = np.asarray(directions, dtype=float)
    norms = np.linalg.norm(V, axis=1)
    proj = domain.points @ V.T                    # (n, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.max(-proj, axis=0) / norms
    a[norms == 0.0] = np.inf
    return a


def pivoted_selection(points, rank, bandwidths=None):
    """Greedy landmark selection by conditional kernel variance.

    Runs a rank-``rank`` pivoted incomplete Cholesky factorization of the
    Gaussian kernel matrix K_ij = exp(-||D^-1 (x_i - x_j)||^2), where D is
    the diagonal matrix of per-coordinate bandwidths (the observed ranges
    by default).  The pivot at each step is the point with the largest
    residual diagonal, i.e. the largest kernel variance conditional on
    the points already selected.  Ties go to the lowest row index.

    Returns
    -------
    indices : selected row indices in selection order.
    scans : number of residual-diagonal entries examined (cost meter).
    """
    X = np.asarray(points, dtype=float)
    n, p = X.shape
    if bandwidths is None:
        bandwidths = X.max(axis=0) - X.min(axis=0)
    bandwidths = np.asarray(bandwidths, dtype=float)
    Xs = X / bandwidths

    rank = min(rank, n)
    d = np.ones(n)                   # residual diagonal; k(x, x) = 1
    G = np.zeros((n, rank))
    chosen = np.empty(rank, dtype=int)
    scans = 0
    for j in range(rank):
        scans += n
        piv = int(np.argmax(d))
        chosen[j] = piv
        dj = d[piv]
        if dj <= 0.0:
            # cloud is numerically rank-deficient under the kernel
            chosen = chosen[:j]
            break
        root = np.sqrt(dj)
        diff = Xs - Xs[piv]
        col = np.exp(-np.einsum("ij,ij->i", diff, diff))
        col = (col - G[:, :j] @ G[piv, :j]) / root
        G[:, j] = col
        d = d - col * col
        d[chosen[: j + 1]] = -np.inf   # never reselect
    return chosen, scans


def center_predictors(raw):
    """Translate raw predictors so the origin is interior to their hull.

    The interior point is the mean of p+1 landmark rows picked to be near
    the cloud boundary and far from each other: rows are pre-sorted by
    decreasing ||S^-1 (x - xbar)|| (S the sample covariance) and then fed
    to :func:`pivoted_selection` at rank p+1.  If the resulting offset
    fails a randomized interiority check, the cloud mean is used instead
    (with a warning).

    Raises
    ------
    DegenerateDomainError : if n < p+1 or some coordinate has zero range.
    """
    X = np.atleast_2d(np.asarray(raw, dtype=float))
    n, p = X.shape
    if n < p + 1:
        raise DegenerateDomainError(
            f"need at least p+1 = {p + 1} rows to center, got {n}")
    ranges = X.max(axis=0) - X.min(axis=0)
    flat = np.nonzero(ranges == 0.0)[0]
    if flat.size:
        raise DegenerateDomainError(
            f"coordinate {flat[0]} has zero range; drop constant columns")

    xbar = X.mean(axis=0)
    S = np.atleast_2d(np.cov(X, rowvar=False))
    Sinv = np.linalg.pinv(S)
    dist = np.linalg.norm((X - xbar) @ Sinv.T, axis=1)
    order = np.argsort(-dist, kind="stable")
    Xs = X[order]

    idx, _ = pivoted_selection(Xs, p + 1, bandwidths=ranges)
    selected = Xs[idx]
    offset = selected.mean(axis=0)

    centered = X - offset
    if not _origin_interior(centered):
        warnings.warn("landmark offset fell outside the hull; "
                      "falling back to the cloud mean", RuntimeWarning)
        offset = xbar
        centered = X - offset
    return PredictorDomain(points=centered, offset=offset,
                           diameter=_diameter(X))


def _origin_interior(centered, n_directions=_INTERIOR_DIRECTIONS):
    """Randomized necessary check that 0 is inside the hull.

    For each test direction u the cloud must reach positive projection;
    a failure certifies the origin outside (or on the boundary of) the
    hull, so false negatives only ever trigger the safe mean fallback.
    """
    rng = np.random.default_rng(_INTERIOR_SEED)
    p = centered.shape[1]
    U = rng.standard_normal((n_directions, p))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    reach = (centered @ U.T).max(axis=0)
    return bool(np.all(reach > 0.0))


def _diameter(X, block=1024):
    """Max pairwise distance, computed blockwise to bound memory."""
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    best = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))
