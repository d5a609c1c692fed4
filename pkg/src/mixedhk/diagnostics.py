"""Energy, descent bound, stubbornness summaries and per-agent convergence sums."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import OpinionState, StubbornnessAssignment, neighbor_mask, pairwise_distances

SLACK = 1e-9


def energy_array(x, epsilon):
    """Capped pair energy for raw opinion arrays ``(..., n, d)``."""
    dist = pairwise_distances(x)
    return np.minimum(dist * dist, epsilon * epsilon).sum(axis=(-2, -1))


def energy(state: OpinionState) -> float:
    """Z = sum over ordered pairs (i, j), diagonal included, of min(|x_i - x_j|^2, eps^2)."""
    return float(energy_array(state.opinions, state.epsilon))


def nl8_bound_array(x_prev, x_next, alpha, epsilon):
    """Lower bound on the energy decrement of one step (raw arrays).

    Agents with alpha = 1 contribute nothing; the alpha / (1 - alpha) factor is
    only evaluated where alpha < 1.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    counts = neighbor_mask(x_prev, epsilon).sum(axis=-1)
    disp = x_next - x_prev
    sq = (disp * disp).sum(axis=-1)
    is_open = alpha < 1.0
    ratio = np.divide(alpha, 1.0 - alpha, out=np.zeros_like(alpha), where=is_open)
    weight = np.where(is_open, 1.0 + counts * ratio, 0.0)
    return 4.0 * (weight * sq).sum(axis=-1)


def nl8_decrement_bound(prev: OpinionState, next: OpinionState, alpha) -> float:
    if isinstance(alpha, StubbornnessAssignment):
        alpha = alpha.alphas
    return float(nl8_bound_array(prev.opinions, next.opinions, alpha, prev.epsilon))


@dataclass(frozen=True)
class EnergyRecord:
    t: int
    Z: float
    decrement: float
    nl8_bound: float

    @property
    def ok(self):
        return self.decrement >= -SLACK and self.decrement >= self.nl8_bound - SLACK


def energy_record(prev: OpinionState, next: OpinionState, alpha) -> EnergyRecord:
    z0, z1 = energy(prev), energy(next)
    return EnergyRecord(prev.t, z0, z0 - z1, nl8_decrement_bound(prev, next, alpha))


def beta(alpha, n=None) -> float:
    """max over (i, j) with alpha_i >= alpha_j of alpha_i - (alpha_i - alpha_j) / n.

    Pairs with ``i == j`` are admitted, so this always equals ``max(alpha)``.
    """
    a = np.asarray(getattr(alpha, "alphas", alpha), dtype=float)
    n = a.size if n is None else n
    diff = a[:, None] - a[None, :]
    vals = np.where(diff >= 0, a[:, None] - diff / n, -np.inf)
    return float(vals.max())


def beta_strict(alpha, n=None) -> float:
    """As :func:`beta` but over distinct agents only (needs ``n >= 2``)."""
    a = np.asarray(getattr(alpha, "alphas", alpha), dtype=float)
    if a.size < 2:
        raise ValueError("beta_strict needs at least two agents")
    n = a.size if n is None else n
    diff = a[:, None] - a[None, :]
    admissible = (diff >= 0) & ~np.eye(a.size, dtype=bool)
    vals = np.where(admissible, a[:, None] - diff / n, -np.inf)
    return float(vals.max())


@dataclass(frozen=True)
class ConvergenceTracker:
    """Running sum of (1 - alpha_i)(1 - 1/|N_i|) d_t^i for one agent.

    ``last_opinions`` keeps a short window of recent opinions and
    ``displacement_sum`` the total distance travelled, for Cauchy checks.
    """

    agent: int
    partial_sum: float = 0.0
    last_increment: float = 0.0
    displacement_sum: float = 0.0
    steps: int = 0
    window: int = 8
    last_opinions: tuple = field(default=())


def convergence_summand(state: OpinionState, alpha, neighborhoods, agent) -> float:
    a = float(getattr(alpha, "alphas", alpha)[agent])
    members = sorted(neighborhoods[agent].members)
    size = len(members)
    if a == 1.0 or size == 1:
        return 0.0
    x = state.opinions
    d_i = float(np.max(np.linalg.norm(x[members] - x[agent], axis=1)))
    return (1.0 - a) * (1.0 - 1.0 / size) * d_i


def track_convergence(tracker: ConvergenceTracker, state: OpinionState, alpha, neighborhoods) -> ConvergenceTracker:
    inc = convergence_summand(state, alpha, neighborhoods, tracker.agent)
    x_i = tuple(state.opinions[tracker.agent].tolist())
    window = deque(tracker.last_opinions, maxlen=tracker.window)
    disp = tracker.displacement_sum
    if window:
        disp += float(np.linalg.norm(np.subtract(x_i, window[-1])))
    window.append(x_i)
    return replace(
        tracker,
        partial_sum=tracker.partial_sum + inc,
        last_increment=inc,
        displacement_sum=disp,
        steps=tracker.steps + 1,
        last_opinions=tuple(window),
    )
