"""Stopping times along a stored trajectory.

All "for every later step" statements are checked up to the trajectory's last
step only; verdicts are horizon-relative by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import pairwise_distances
from .profile import build_profile
from .trajectory import Trajectory

M_MIN = 4
M_MAX = 16


class ProfileSeries:
    """Profile graphs and largest component diameters of a trajectory, computed once."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.graphs = [build_profile(s) for s in traj]
        self.max_diameter = np.array([_max_component_diameter(g, x) for g, x in zip(self.graphs, traj.states)])

    def first_trivial(self, delta):
        hits = np.flatnonzero(self.max_diameter <= delta)
        return int(hits[0]) if hits.size else None


def _max_component_diameter(graph, x):
    worst = 0.0
    for comp in graph.components:
        if len(comp) > 1:
            worst = max(worst, float(pairwise_distances(x[list(comp)]).max()))
    return worst


def _series(traj_or_series):
    if isinstance(traj_or_series, ProfileSeries):
        return traj_or_series
    return ProfileSeries(traj_or_series)


def detect_tau_delta(trajectory, delta):
    """First step (t = 0 included) where every profile component is delta-trivial, else None."""
    return _series(trajectory).first_trivial(delta)


def tau_hat(trajectory, m_range=(M_MIN, M_MAX)) -> dict:
    s = _series(trajectory)
    eps = s.traj.epsilon
    return {m: s.first_trivial(eps / m) for m in range(m_range[0], m_range[1] + 1)}


@dataclass(frozen=True)
class FreezeVerdict:
    M: int | None
    start: int | None  # tau_hat_M
    horizon: int
    tau_hat: dict = field(default_factory=dict)

    @property
    def frozen(self):
        return self.M is not None


def detect_freeze(trajectory, m_range=(M_MIN, M_MAX)) -> FreezeVerdict:
    """Smallest M in ``m_range`` whose tau_hat_M starts an unchanging edge set.

    The edge set must be identical at every stored step from tau_hat_M to the
    end of the trajectory.
    """
    s = _series(trajectory)
    edges = [g.edges for g in s.graphs]
    last_change = 0
    for t in range(1, len(edges)):
        if edges[t] != edges[t - 1]:
            last_change = t
    hats = tau_hat(s, m_range)
    for m in range(m_range[0], m_range[1] + 1):
        start = hats[m]
        if start is not None and start >= last_change:
            return FreezeVerdict(m, start, s.traj.horizon, hats)
    return FreezeVerdict(None, None, s.traj.horizon, hats)


@dataclass(frozen=True)
class EquivalenceViolation:
    t: int
    some_component_delta_nontrivial: bool  # condition (1), at t + 1
    components_interact: bool  # condition (2)
    some_component_half_eps_nontrivial: bool  # condition (3), at t + 1


def check_interaction_equivalences(trajectory, delta) -> list[EquivalenceViolation]:
    """Steps where all components are delta-trivial yet the three next-step conditions disagree.

    For ``delta <= epsilon / 4`` the three conditions (a component of the next
    profile is delta-nontrivial; two current components gain an edge; a
    component of the next profile is epsilon/2-nontrivial) should always agree.
    """
    s = _series(trajectory)
    eps = s.traj.epsilon
    if not 0 < delta <= eps / 4:
        raise ValueError(f"delta must satisfy 0 < delta <= epsilon / 4, got {delta!r}")
    out = []
    for t in range(s.traj.horizon):
        if s.max_diameter[t] > delta:
            continue
        label = s.graphs[t].component_of
        c1 = bool(s.max_diameter[t + 1] > delta)
        c2 = any(label[i] != label[j] for i, j in s.graphs[t + 1].edges)
        c3 = bool(s.max_diameter[t + 1] > eps / 2)
        if not (c1 == c2 == c3):
            out.append(EquivalenceViolation(t, c1, c2, c3))
    return out


def detect_termination(trajectory: Trajectory):
    """Start of the final run of bitwise-identical states, or None.

    A run consisting of the last stored state alone is no evidence of a
    steady state and yields None.
    """
    x = trajectory.states
    t = len(x) - 1
    while t > 0 and np.array_equal(x[t - 1], x[t]):
        t -= 1
    return t if t < len(x) - 1 else None


def merge_times(trajectory: Trajectory) -> list[tuple[int, tuple[int, int]]]:
    return [(t, pair) for t, pairs in enumerate(trajectory.merges) for pair in pairs]


@dataclass(frozen=True)
class StoppingReport:
    delta: float
    horizon: int
    tau_delta: int | None
    tau_hat: dict
    merge_times: list
    freeze: FreezeVerdict
    termination_time: int | None
    equivalence_violations: list

    def to_dict(self):
        return {
            "delta": self.delta,
            "horizon": self.horizon,
            "horizon_relative": True,
            "tau_delta": self.tau_delta,
            "tau_hat": {str(m): v for m, v in self.tau_hat.items()},
            "merge_times": [[t, list(p)] for t, p in self.merge_times],
            "freeze": {"M": self.freeze.M, "tau_hat_M": self.freeze.start},
            "termination_time": self.termination_time,
            "equivalence_violations": [v.t for v in self.equivalence_violations],
        }


def stopping_report(trajectory: Trajectory, delta, m_range=(M_MIN, M_MAX)) -> StoppingReport:
    s = ProfileSeries(trajectory)
    eps = trajectory.epsilon
    violations = check_interaction_equivalences(s, delta) if delta <= eps / 4 else []
    return StoppingReport(
        delta=delta,
        horizon=trajectory.horizon,
        tau_delta=detect_tau_delta(s, delta),
        tau_hat=tau_hat(s, m_range),
        merge_times=merge_times(trajectory),
        freeze=detect_freeze(s, m_range),
        termination_time=detect_termination(trajectory),
        equivalence_violations=violations,
    )
