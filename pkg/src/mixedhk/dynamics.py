"""Opinion state and one step of the mixed HK update.

Agent ``i`` moves to

    x_i(t+1) = alpha_i x_i(t) + (1 - alpha_i) * mean{x_j(t) : |x_i - x_j| <= eps}

with the Euclidean norm and an inclusive boundary.  Agents are indexed from 0.

The array kernels accept leading batch axes (``x`` of shape ``(..., n, d)``)
so the Monte Carlo driver can advance many trajectories at once and still get
results bitwise identical to the single-state path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OpinionState:
    """Opinions of ``n`` agents in ``R^d`` at step ``t``.

    ``opinions`` may be given as a flat sequence (taken as ``d = 1``) or as an
    ``(n, d)`` nested sequence.  The stored array is read-only.
    """

    opinions: np.ndarray
    epsilon: float
    t: int = 0

    def __post_init__(self):
        x = np.array(self.opinions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigurationError(f"opinions must have shape (n, d) with n, d >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigurationError("opinions must be finite")
        eps = float(self.epsilon)
        if not (np.isfinite(eps) and eps > 0):
            raise ConfigurationError(f"epsilon must be a positive finite number, got {self.epsilon!r}")
        if int(self.t) < 0:
            raise ConfigurationError("t must be nonnegative")
        x.setflags(write=False)
        object.__setattr__(self, "opinions", x)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "t", int(self.t))

    @property
    def n(self) -> int:
        return self.opinions.shape[0]

    @property
    def d(self) -> int:
        return self.opinions.shape[1]

    def with_opinions(self, opinions, t=None) -> "OpinionState":
        return OpinionState(opinions, self.epsilon, self.t if t is None else t)


@dataclass(frozen=True)
class StubbornnessAssignment:
    """Degrees of stubbornness for one step; ``open_set`` holds agents with alpha < 1."""

    alphas: np.ndarray
    open_set: frozenset = field(init=False)

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float).reshape(-1)
        if a.size == 0:
            raise ConfigurationError("alphas must be nonempty")
        if not np.all((a >= 0.0) & (a <= 1.0)):
            raise ConfigurationError("every alpha must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "open_set", frozenset(np.flatnonzero(a < 1.0).tolist()))

    def __len__(self):
        return self.alphas.size

    @classmethod
    def synchronous(cls, n):
        return cls(np.zeros(n))

    @classmethod
    def stubborn(cls, n):
        return cls(np.ones(n))


@dataclass(frozen=True)
class Neighborhood:
    agent: int
    members: frozenset

    def __len__(self):
        return len(self.members)


# --------------------------------------------------------------------------
# array kernels
# --------------------------------------------------------------------------

def pairwise_distances(x):
    """Euclidean distances between all agent pairs, shape ``(..., n, n)``.

    Coordinates are accumulated in a fixed order so the result does not depend
    on how many batch axes are present.
    """
    x = np.asarray(x, dtype=float)
    diff = x[..., :, None, :] - x[..., None, :, :]
    if x.shape[-1] == 1:
        return np.abs(diff[..., 0])
    sq = diff[..., 0] * diff[..., 0]
    for k in range(1, x.shape[-1]):
        sq = sq + diff[..., k] * diff[..., k]
    return np.sqrt(sq)


def neighbor_mask(x, epsilon):
    """Boolean ``(..., n, n)`` matrix with ``[i, j]`` true iff ``|x_i - x_j| <= epsilon``."""
    return pairwise_distances(x) <= epsilon


def neighbor_sums(x, mask):
    """Sum of neighbor opinions, accumulated in ascending neighbor index.

    Non-neighbors contribute an exact ``+0.0``, so the result equals a plain
    left-to-right sum over the members.
    """
    n = x.shape[-2]
    acc = np.zeros(np.broadcast_shapes(mask.shape[:-1] + (1,), x.shape), dtype=float)
    for j in range(n):
        acc = acc + np.where(mask[..., :, j, None], x[..., None, j, :], 0.0)
    return acc


def neighbor_means(x, mask):
    """Neighborhood averages: ascending-order sum divided by the count.

    A coordinate on which every neighbor agrees averages to that common value
    exactly (``3 * 0.2 / 3`` would otherwise come out one ulp high and a
    consensus would creep).
    """
    counts = mask.sum(axis=-1)[..., None].astype(float)
    avg = neighbor_sums(x, mask) / counts
    m = mask[..., :, :, None]
    xs = x[..., None, :, :]
    lo = np.where(m, xs, np.inf).min(axis=-2)
    hi = np.where(m, xs, -np.inf).max(axis=-2)
    return np.where(lo == hi, lo, avg)


def mixed_update(x, alpha, epsilon, mask=None):
    """Vectorized mixed HK step on raw arrays.

    ``x`` has shape ``(..., n, d)`` and ``alpha`` shape ``(..., n)``.  When the
    neighborhood average coincides with an agent's own coordinate the agent
    keeps it exactly, so isolated agents and merged clusters do not drift by
    rounding.
    """
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)[..., None]
    if mask is None:
        mask = neighbor_mask(x, epsilon)
    avg = neighbor_means(x, mask)
    mixed = alpha * x + (1.0 - alpha) * avg
    return np.where(avg == x, x, mixed)


# --------------------------------------------------------------------------
# state-level operations
# --------------------------------------------------------------------------

def compute_neighborhoods(state: OpinionState) -> list[Neighborhood]:
    mask = neighbor_mask(state.opinions, state.epsilon)
    return [Neighborhood(i, frozenset(np.flatnonzero(row).tolist())) for i, row in enumerate(mask)]


def _check_alpha(state, alpha):
    if not isinstance(alpha, StubbornnessAssignment):
        alpha = StubbornnessAssignment(alpha)
    if len(alpha) != state.n:
        raise ConfigurationError(f"alpha has length {len(alpha)} but state has {state.n} agents")
    return alpha


def step(state: OpinionState, alpha) -> OpinionState:
    """Advance ``state`` by one step of the mixed model; the input is untouched."""
    alpha = _check_alpha(state, alpha)
    new = mixed_update(state.opinions, alpha.alphas, state.epsilon)
    return OpinionState(new, state.epsilon, state.t + 1)


def transition_matrix(state: OpinionState, alpha) -> np.ndarray:
    """Row-stochastic matrix ``diag(alpha) + (I - diag(alpha)) A`` for this step."""
    alpha = _check_alpha(state, alpha)
    mask = neighbor_mask(state.opinions, state.epsilon)
    A = mask / mask.sum(axis=1, keepdims=True)
    D = np.diag(alpha.alphas)
    return D + (np.eye(state.n) - D) @ A


def step_matrix(state: OpinionState, alpha) -> OpinionState:
    """Same step as :func:`step`, computed through the matrix form."""
    W = transition_matrix(state, alpha)
    return OpinionState(W @ state.opinions, state.epsilon, state.t + 1)


def detect_merge(prev: OpinionState, next: OpinionState) -> list[tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, that are bitwise equal in ``next`` but not in ``prev``."""
    if next.t != prev.t + 1:
        raise ConfigurationError(f"states are not consecutive (t={prev.t} -> t={next.t})")
    return merged_pairs(prev.opinions, next.opinions)


def merged_pairs(x_prev, x_next):
    x_prev = np.asarray(x_prev)
    x_next = np.asarray(x_next)
    same_next = np.all(x_next[:, None, :] == x_next[None, :, :], axis=-1)
    same_prev = np.all(x_prev[:, None, :] == x_prev[None, :, :], axis=-1)
    i, j = np.nonzero(np.triu(same_next & ~same_prev, k=1))
    return list(zip(i.tolist(), j.tolist()))
