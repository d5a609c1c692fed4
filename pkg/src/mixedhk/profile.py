"""The confidence graph (profile) and its geometry.

The profile at time t joins distinct agents whose opinions are within epsilon.
This module finds its components, tests delta-triviality, measures convex-hull
distances and checks the component partition for delta-equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .dynamics import OpinionState, neighbor_mask, pairwise_distances
from .errors import ConfigurationError, UsageError

HULL_TOL = 1e-9


@dataclass(frozen=True)
class ProfileGraph:
    n: int
    edges: frozenset
    components: tuple

    @property
    def component_of(self):
        label = [0] * self.n
        for k, comp in enumerate(self.components):
            for i in comp:
                label[i] = k
        return label


@dataclass(frozen=True)
class HullSummary:
    component: int
    diameter: float
    points: np.ndarray


@dataclass(frozen=True)
class Triviality:
    per_component: tuple
    all_components: bool
    whole_set: bool


def components_from_mask(mask):
    """Sorted tuple of components (each a sorted tuple of agents) of a boolean adjacency."""
    n = mask.shape[0]
    _, labels = connected_components(csr_matrix(mask), directed=False)
    groups = {}
    for i, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(i)
    return tuple(sorted(tuple(g) for g in groups.values()))


def build_profile(state: OpinionState) -> ProfileGraph:
    mask = neighbor_mask(state.opinions, state.epsilon)
    np.fill_diagonal(mask, False)
    i, j = np.nonzero(np.triu(mask, k=1))
    edges = frozenset(zip(i.tolist(), j.tolist()))
    return ProfileGraph(state.n, edges, components_from_mask(mask))


def diameter(points) -> float:
    """Largest pairwise distance; equals the diameter of the points' convex hull."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) < 2:
        return 0.0
    return float(pairwise_distances(points).max())


def hull_summaries(graph: ProfileGraph, state: OpinionState) -> list[HullSummary]:
    out = []
    for k, comp in enumerate(graph.components):
        pts = state.opinions[list(comp)]
        out.append(HullSummary(k, diameter(pts), pts))
    return out


def is_delta_trivial(graph: ProfileGraph, state: OpinionState, delta) -> Triviality:
    """Component-wise and whole-set delta-triviality (inclusive ``<= delta``)."""
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    per = tuple(h.diameter <= delta for h in hull_summaries(graph, state))
    return Triviality(per, all(per), diameter(state.opinions) <= delta)


# --------------------------------------------------------------------------
# hull distance
# --------------------------------------------------------------------------

def _closest_on_simplex(W):
    """Point of ``conv(W)`` nearest the origin, and the vertices that carry it.

    Brute force over vertex subsets; ``W`` has at most ``d + 1`` rows.
    """
    best = None
    m = len(W)
    for r in range(1, m + 1):
        for idx in combinations(range(m), r):
            P = W[list(idx)]
            if r == 1:
                lam = np.ones(1)
            else:
                M = (P[1:] - P[0]).T
                mu, *_ = np.linalg.lstsq(M, -P[0], rcond=None)
                lam = np.concatenate([[1.0 - mu.sum()], mu])
                if np.any(lam < -1e-12):
                    continue
                lam = np.clip(lam, 0.0, None)
                lam /= lam.sum()
            p = lam @ P
            nrm = p @ p
            if best is None or nrm < best[0] - 1e-15:
                best = (nrm, p, P[lam > 0])
    return best[1], best[2]


def _gjk_distance(a, b, tol=HULL_TOL, max_iter=200):
    v = a[0] - b[0]
    W = np.empty((0, a.shape[1]))
    for _ in range(max_iter):
        vn = float(np.sqrt(v @ v))
        if vn <= tol:
            return 0.0
        # support point of the Minkowski difference a - b in direction -v
        w = a[np.argmin(a @ v)] - b[np.argmax(b @ v)]
        lower = float(v @ w) / vn
        if vn - max(lower, 0.0) <= tol:
            return vn
        if any(np.array_equal(w, u) for u in W):
            return vn
        W = np.vstack([W, w])
        v, W = _closest_on_simplex(W)
    return float(np.sqrt(v @ v))


def hull_distance(a, b) -> float:
    """Euclidean distance between the convex hulls of two finite point sets.

    Exact interval gap in one dimension; otherwise the Gilbert-Johnson-Keerthi
    iteration, stopped when its upper and lower bounds are within ``1e-9``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) == 0 or len(b) == 0:
        raise UsageError("hull_distance needs two nonempty point sets")
    if a.shape[1] != b.shape[1]:
        raise UsageError("point sets live in different dimensions")
    if a.shape[1] == 1:
        return float(max(b.min() - a.max(), a.min() - b.max(), 0.0))
    return _gjk_distance(a, b)


# --------------------------------------------------------------------------
# delta-equilibrium
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumVerdict:
    is_equilibrium: bool
    partition: tuple
    separation_failures: tuple  # (k, l, hull distance) with distance not > epsilon
    diameter_failures: tuple  # (k, diameter) with diameter > delta


def check_delta_equilibrium(state: OpinionState, delta) -> EquilibriumVerdict:
    """Test the profile-component partition as a delta-equilibrium witness.

    Only this one partition is tried.  In one dimension it is the only
    candidate that can work; in higher dimensions a ``False`` verdict does not
    rule out some other partition.
    """
    eps = state.epsilon
    if not 0 < delta <= eps:
        raise ConfigurationError(f"delta must satisfy 0 < delta <= epsilon, got {delta!r}")
    graph = build_profile(state)
    hulls = hull_summaries(graph, state)
    slack = 0.0 if state.d == 1 else HULL_TOL
    sep = []
    for k, l in combinations(range(len(hulls)), 2):
        dist = hull_distance(hulls[k].points, hulls[l].points)
        if not dist > eps + slack:
            sep.append((k, l, dist))
    diam = [(h.component, h.diameter) for h in hulls if h.diameter > delta]
    return EquilibriumVerdict(not sep and not diam, graph.components, tuple(sep), tuple(diam))
