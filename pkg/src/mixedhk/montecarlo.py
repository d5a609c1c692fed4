"""Ensembles of stochastic-schedule trajectories and the expected stopping-time bound.

Runs are advanced together as one batched array.  Each run owns its random
stream (seeded from the master seed and its run index) so the results do not
depend on how runs are batched, and run ``r`` reproduces exactly the single
trajectory that :func:`mixedhk.trajectory.simulate` gives for the same seed.

Per-run statistics are gathered on the fly, so nothing of size ``horizon`` is
kept in memory:

* the largest in-component diameter D(t), giving tau_delta and
  tau_hat_m = tau_{eps/m};
* the last step at which the edge set changed (freeze detection);
* at every step where all components are delta-trivial, the three next-step
  interaction conditions, counted when they disagree;
* for each m, whether some component is eps/m-nontrivial strictly between
  tau_hat_m and tau_hat_{m+1} (the set whose size the second bound controls).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import mixed_update, pairwise_distances
from .errors import HypothesisViolation, UsageError
from .schedules import ASYNCHRONOUS, STOCHASTIC_SUPPORT, AssignmentSampler, RngStream, derive_seed, gamma_bound, min_partition_probability
from .stopping import M_MAX, M_MIN

DEFAULT_HORIZON_CAP = 100_000


def _check_hypotheses(gamma, min_partition_prob):
    if gamma is None or not 0.0 <= gamma < 1.0:
        raise HypothesisViolation(f"gamma must satisfy 0 <= gamma < 1, got {gamma!r}")
    if not min_partition_prob > 0.0:
        raise HypothesisViolation(f"partition probabilities must be positive, got {min_partition_prob!r}")


def co1_bound(n, epsilon, delta, gamma, min_partition_prob) -> float:
    """Upper bound on E(tau_delta): n^10 / (8 (1-gamma)^2 p_min) * (eps/delta)^2."""
    _check_hypotheses(gamma, min_partition_prob)
    if not delta > 0:
        raise HypothesisViolation("delta must be positive")
    return n**10 / (8.0 * (1.0 - gamma) ** 2 * min_partition_prob) * (epsilon / delta) ** 2


def a_set_bound(n, gamma, min_partition_prob) -> float:
    """Upper bound on the expected number of late eps/m-nontrivial windows: n^10 / (2 (1-gamma)^2 p_min)."""
    _check_hypotheses(gamma, min_partition_prob)
    return n**10 / (2.0 * (1.0 - gamma) ** 2 * min_partition_prob)


def schedule_constants(spec, n):
    """``(gamma, min_partition_probability)`` for a random schedule."""
    if spec.kind == ASYNCHRONOUS:
        return 0.0, 1.0 / n
    if spec.kind == STOCHASTIC_SUPPORT:
        return gamma_bound(spec), min_partition_probability(spec)
    raise UsageError(f"ensembles need an asynchronous or stochastic_support schedule, got {spec.kind}")


@dataclass
class EnsembleResult:
    runs: int
    horizon: int
    delta: float
    gamma: float
    min_partition_prob: float
    tau_samples: list  # int per run, None if not reached
    mean_tau: float | None
    confidence: float | None  # standard error of mean_tau
    reached_fraction: float
    co1_bound: float
    a_set_bound: float
    tau_hat: list = field(default_factory=list)  # per run: {m: step or None}
    freeze_M: list = field(default_factory=list)  # per run: M or None
    equivalence_violations: list = field(default_factory=list)  # per run count
    a_set_sizes: list = field(default_factory=list)  # per run, m in [4, m_max - 1] only
    m_range: tuple = (M_MIN, M_MAX)

    @property
    def horizon_insufficient(self) -> bool:
        return self.reached_fraction < 1.0

    @property
    def bound_ratio(self) -> float | None:
        return None if self.mean_tau is None else self.mean_tau / self.co1_bound

    def summary(self) -> dict:
        a = self.a_set_sizes
        return {
            "runs": self.runs,
            "horizon": self.horizon,
            "delta": self.delta,
            "gamma": self.gamma,
            "min_partition_prob": self.min_partition_prob,
            "mean_tau": self.mean_tau,
            "stderr_tau": self.confidence,
            "reached_fraction": self.reached_fraction,
            "horizon_insufficient": self.horizon_insufficient,
            "co1_bound": self.co1_bound,
            "mean_tau_over_bound": self.bound_ratio,
            "a_set_bound": self.a_set_bound,
            "mean_a_set_size_partial": float(np.mean(a)) if a else None,
            "a_set_m_range": [self.m_range[0], self.m_range[1] - 1],
            "frozen_fraction": sum(m is not None for m in self.freeze_M) / self.runs,
            "equivalence_violations": int(sum(self.equivalence_violations)),
        }

    def rows(self):
        """One dict per run (the CSV schema)."""
        for r in range(self.runs):
            yield {
                "run": r,
                "tau_delta": self.tau_samples[r],
                "freeze_M": self.freeze_M[r],
                "tau_hat_M": None if self.freeze_M[r] is None else self.tau_hat[r][self.freeze_M[r]],
                "equivalence_violations": self.equivalence_violations[r],
                "a_set_size": self.a_set_sizes[r],
            }


def _reachability(adj):
    reach = adj
    n = adj.shape[-1]
    for _ in range(max(0, math.ceil(math.log2(n)))):
        r = reach.astype(np.float32)
        reach = (r @ r) > 0
    return reach


def simulate_batch(x0, epsilon, delta, sampler, seeds, horizon, m_range=(M_MIN, M_MAX), chunk=1024):
    """Advance ``len(seeds)`` runs from initial opinions ``x0`` (shape ``(R, n, d)``).

    Returns a dict of per-run statistic arrays (see the module docstring).
    """
    x = np.array(x0, dtype=float)
    R, n, _ = x.shape
    ms = np.arange(m_range[0], m_range[1] + 1)
    thresholds = np.concatenate([[delta], epsilon / ms])
    first_hit = np.full((R, thresholds.size), -1, dtype=np.int64)
    last_change = np.zeros(R, dtype=np.int64)
    violations = np.zeros(R, dtype=np.int64)
    a_flags = np.zeros((R, ms.size - 1), dtype=bool)
    streams = [RngStream(int(s), n + 1) for s in seeds]
    rows = np.arange(R)

    prev_adj = prev_reach = prev_D = None
    block = None
    for t in range(horizon + 1):
        dist = pairwise_distances(x)
        adj = dist <= epsilon
        reach = _reachability(adj)
        D = np.where(reach, dist, 0.0).max(axis=(-2, -1))

        if t > 0:
            last_change[np.any(adj != prev_adj, axis=(-2, -1))] = t
            quiet = prev_D <= delta
            c1 = D > delta
            c2 = np.any(adj & ~prev_reach, axis=(-2, -1))
            c3 = D > epsilon / 2
            violations += quiet & ~((c1 == c2) & (c2 == c3))
            # window (tau_hat_m, tau_hat_{m+1}) with an eps/m-nontrivial component
            hat = first_hit[:, 1:]
            inside = (hat[:, :-1] >= 0) & (hat[:, :-1] < t) & (hat[:, 1:] < 0)
            a_flags |= inside & (D[:, None] > epsilon / ms[None, :-1])

        hit = (D[:, None] <= thresholds[None, :]) & (first_hit < 0)
        first_hit[hit] = t

        if t == horizon:
            break
        k = t % chunk
        if k == 0:
            steps = min(chunk, horizon - t)
            block = np.stack([s.block(t, steps) for s in streams])
        alpha = sampler(block[rows, k])
        x = mixed_update(x, alpha, epsilon, mask=adj)
        prev_adj, prev_reach, prev_D = adj, reach, D

    hats = first_hit[:, 1:]
    freeze = np.full(R, -1, dtype=np.int64)
    for r in range(R):
        for col, m in enumerate(ms):
            if 0 <= last_change[r] <= hats[r, col] and hats[r, col] >= 0:
                freeze[r] = m
                break
    return {
        "tau_delta": first_hit[:, 0],
        "tau_hat": hats,
        "m_values": ms,
        "last_change": last_change,
        "freeze_M": freeze,
        "violations": violations,
        "a_set_size": a_flags.sum(axis=1),
        "final": x,
    }


def run_ensemble(scenario, runs, horizon=None, *, delta=None, m_max=None, batch_size=512) -> EnsembleResult:
    """Run ``runs`` independent seeded trajectories of ``scenario`` and summarize tau_delta.

    ``horizon`` defaults to ``min(10 * co1_bound, scenario.horizon)``.
    """
    spec = scenario.schedule
    n = scenario.n
    if runs < 1:
        raise UsageError("runs must be >= 1")
    gamma, p_min = schedule_constants(spec, n)
    delta = scenario.delta if delta is None else delta
    m_max = getattr(scenario, "m_max", M_MAX) if m_max is None else m_max
    bound = co1_bound(n, scenario.epsilon, delta, gamma, p_min)
    if horizon is None:
        horizon = int(min(10 * bound, scenario.horizon))
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    sampler = AssignmentSampler(spec, n)
    m_range = (M_MIN, m_max)

    parts = []
    for start in range(0, runs, batch_size):
        idx = range(start, min(runs, start + batch_size))
        x0 = np.stack([scenario.initial_opinions(r) for r in idx])
        seeds = [derive_seed(spec.seed, r) for r in idx]
        parts.append(simulate_batch(x0, scenario.epsilon, delta, sampler, seeds, horizon, m_range))

    def cat(key):
        return np.concatenate([p[key] for p in parts])

    tau = cat("tau_delta")
    hats = cat("tau_hat")
    ms = parts[0]["m_values"].tolist()
    reached = tau[tau >= 0].astype(float)
    mean = float(reached.mean()) if reached.size else None
    stderr = float(reached.std(ddof=1) / math.sqrt(reached.size)) if reached.size > 1 else None
    return EnsembleResult(
        runs=runs,
        horizon=horizon,
        delta=delta,
        gamma=gamma,
        min_partition_prob=p_min,
        tau_samples=[int(v) if v >= 0 else None for v in tau],
        mean_tau=mean,
        confidence=stderr,
        reached_fraction=reached.size / runs,
        co1_bound=bound,
        a_set_bound=a_set_bound(n, gamma, p_min),
        tau_hat=[{m: (int(v) if v >= 0 else None) for m, v in zip(ms, row)} for row in hats],
        freeze_M=[int(v) if v >= 0 else None for v in cat("freeze_M")],
        equivalence_violations=cat("violations").astype(int).tolist(),
        a_set_sizes=cat("a_set_size").astype(int).tolist(),
        m_range=m_range,
    )
