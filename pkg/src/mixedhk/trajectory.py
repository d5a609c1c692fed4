"""Single-trajectory driver and the stored trajectory record."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .diagnostics import energy_array, nl8_bound_array
from .dynamics import OpinionState, StubbornnessAssignment, merged_pairs, mixed_update, neighbor_mask, neighbor_means
from .profile import components_from_mask
from .schedules import ScheduleSpec, make_stream, next_assignment


@dataclass
class Trajectory:
    """States ``x(0..T)`` and the alphas ``alpha(0..T-1)`` that produced them."""

    epsilon: float
    states: np.ndarray  # (T + 1, n, d)
    alphas: np.ndarray  # (T, n)

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def d(self) -> int:
        return self.states.shape[2]

    def state(self, t) -> OpinionState:
        return OpinionState(self.states[t], self.epsilon, t)

    def assignment(self, t) -> StubbornnessAssignment:
        return StubbornnessAssignment(self.alphas[t])

    def __iter__(self):
        return (self.state(t) for t in range(len(self.states)))

    @cached_property
    def energies(self) -> np.ndarray:
        return np.array([energy_array(x, self.epsilon) for x in self.states])

    @cached_property
    def nl8_bounds(self) -> np.ndarray:
        return np.array(
            [nl8_bound_array(self.states[t], self.states[t + 1], self.alphas[t], self.epsilon) for t in range(self.horizon)]
        )

    @property
    def decrements(self) -> np.ndarray:
        z = self.energies
        return z[:-1] - z[1:]

    @cached_property
    def merges(self) -> list:
        """``merges[t]`` lists the pairs that merged on arriving at step ``t`` (empty at t=0)."""
        out = [[]]
        for t in range(1, len(self.states)):
            out.append(merged_pairs(self.states[t - 1], self.states[t]))
        return out

    @cached_property
    def graph_counts(self) -> list:
        """``(edge count, component count)`` per step."""
        out = []
        for x in self.states:
            mask = neighbor_mask(x, self.epsilon)
            edges = (int(mask.sum()) - len(x)) // 2
            out.append((edges, len(components_from_mask(mask))))
        return out

    def rows(self):
        """Per-step records as plain dicts (the JSONL schema)."""
        z = self.energies
        bounds = self.nl8_bounds
        for t, x in enumerate(self.states):
            last = t == self.horizon
            alphas = None if last else self.alphas[t]
            edges, comps = self.graph_counts[t]
            yield {
                "t": t,
                "epsilon": self.epsilon,
                "opinions": x.tolist(),
                "alphas": None if last else alphas.tolist(),
                "open_set": None if last else np.flatnonzero(alphas < 1.0).tolist(),
                "edges": edges,
                "components": comps,
                "Z": float(z[t]),
                "decrement": None if last else float(z[t] - z[t + 1]),
                "nl8_bound": None if last else float(bounds[t]),
                "merges": [list(p) for p in self.merges[t]],
            }


def is_fixed_point(x, epsilon) -> bool:
    """True when every agent already sits at its neighborhood average.

    Such a state is left unchanged by every stubbornness assignment, so it is a
    certified termination regardless of the schedule.
    """
    mask = neighbor_mask(x, epsilon)
    avg = neighbor_means(x, mask)
    return bool(np.all(avg == x))


def simulate(
    initial: OpinionState,
    schedule: ScheduleSpec,
    horizon: int,
    seed: int | None = None,
    stop_on_termination: bool = False,
) -> Trajectory:
    """Run one trajectory for ``horizon`` steps.

    ``seed`` overrides ``schedule.seed``.  With ``stop_on_termination`` the run
    ends early once the state is a fixed point of every possible update.
    """
    n = initial.n
    schedule.validate(n)
    rng = make_stream(schedule, n, seed) if schedule.is_random else None
    states = [np.array(initial.opinions)]
    alphas = []
    x = states[0]
    for t in range(horizon):
        if stop_on_termination and is_fixed_point(x, initial.epsilon):
            break
        a = next_assignment(schedule, t, n, rng).alphas
        x = mixed_update(x, a, initial.epsilon)
        states.append(x)
        alphas.append(np.array(a))
    return Trajectory(initial.epsilon, np.array(states), np.array(alphas).reshape(len(alphas), n))
