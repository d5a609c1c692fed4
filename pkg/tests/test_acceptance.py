"""Acceptance criteria, one test each.

Run ``pytest tests/test_acceptance.py`` to get the PASS/FAIL table in the
terminal summary.
"""

import math
import time

import numpy as np
import pytest

from mixedhk import ConvergenceTracker, OpinionState, ScheduleSpec, compute_neighborhoods, run_ensemble, simulate, step, track_convergence
from mixedhk.diagnostics import energy_array, nl8_bound_array
from mixedhk.dynamics import mixed_update
from mixedhk.scenario import analyze_trajectory, export_trajectory, load_trajectory, parse_scenario
from mixedhk.stopping import detect_termination
from mixedhk.profile import diameter

SLACK = 1e-9


@pytest.fixture
def criterion(record_property):
    def mark(name, detail=""):
        record_property("criterion", name)
        record_property("detail", detail)

    return mark


def random_alphas(rng, n):
    a = rng.uniform(0, 1, n)
    r = rng.uniform(0, 1, n)
    a[r < 0.2] = 0.0
    a[r > 0.8] = 1.0
    return a


def test_c1_energy_descent(criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    steps = violations = 0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        d = int(rng.choice([1, 2, 3]))
        eps = float(rng.uniform(0.05, 0.6))
        x = rng.uniform(0, 1, (n, d))
        z = energy_array(x, eps)
        for _ in range(100):
            a = random_alphas(rng, n)
            x1 = mixed_update(x, a, eps)
            z1 = energy_array(x1, eps)
            bound = nl8_bound_array(x, x1, a, eps)
            if not (z1 <= z + SLACK and z - z1 >= bound - SLACK):
                violations += 1
            x, z = x1, z1
            steps += 1
    elapsed = time.perf_counter() - start
    criterion("C1 energy descent", f"{steps} steps, {violations} violations, {elapsed:.1f}s")
    assert violations == 0
    assert elapsed < 60


def test_c2_merging_example(criterion):
    tr = simulate(OpinionState([0.0, 0.5], 0.5), ScheduleSpec.from_rows([[0.0, 0.0]]), 1)
    criterion("C2 merging example", f"x(1)={tr.states[1].ravel().tolist()} merges={tr.merges[1]}")
    assert tr.states[1].ravel().tolist() == [0.25, 0.25]
    assert tr.merges == [[], [(0, 1)]]


def test_c3_depart_after_merge(criterion):
    s0 = OpinionState([0.0, 0.0, 1.0], 1.0)
    s1 = step(s0, [1.0, 0.0, 1.0])
    x1 = s1.opinions.ravel().tolist()
    criterion("C3 depart after merge", f"x(1)={x1}")
    assert x1 == [0.0, 1 / 3, 1.0]
    assert s0.opinions[0, 0] == s0.opinions[1, 0]
    assert s1.opinions[0, 0] != s1.opinions[1, 0]


def plain_hk_step(x, eps):
    """Synchronous HK in plain Python: every agent moves to its neighbors' mean.

    Neighbors are summed in index order; a coordinate shared by every neighbor
    is its own mean.
    """
    n, d = len(x), len(x[0])

    def dist(a, b):
        if d == 1:
            return abs(a[0] - b[0])
        sq = (a[0] - b[0]) * (a[0] - b[0])
        for k in range(1, d):
            sq = sq + (a[k] - b[k]) * (a[k] - b[k])
        return math.sqrt(sq)

    out = []
    for i in range(n):
        nb = [j for j in range(n) if dist(x[i], x[j]) <= eps]
        row = []
        for k in range(d):
            vals = [x[j][k] for j in nb]
            if min(vals) == max(vals):
                row.append(vals[0])
                continue
            s = 0.0
            for v in vals:
                s += v
            row.append(s / len(vals))
        out.append(row)
    return out


def test_c4_synchronous_reduction(criterion):
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(2, 12))
        d = int(rng.choice([1, 2]))
        eps = float(rng.uniform(0.1, 0.4))
        x0 = rng.uniform(0, 1, (n, d))
        tr = simulate(OpinionState(x0, eps), ScheduleSpec.synchronous(), 50)
        ref = x0.tolist()
        for t in range(1, 51):
            ref = plain_hk_step(ref, eps)
            if not np.array_equal(np.array(ref), tr.states[t]):
                mismatches += 1
                break
    criterion("C4 synchronous reduction", f"50 scenarios x 50 steps, {mismatches} mismatching scenarios")
    assert mismatches == 0


def test_c5_asynchronous_equivalence(criterion):
    rng = np.random.default_rng(5)
    mismatches = 0
    for k in range(20):
        n = int(rng.integers(2, 10))
        x0 = OpinionState(rng.uniform(0, 1, (n, int(rng.choice([1, 2])))), float(rng.uniform(0.1, 0.5)))
        seed = int(rng.integers(0, 2**63))
        a = simulate(x0, ScheduleSpec.asynchronous(seed), 200)
        b = simulate(x0, ScheduleSpec.singletons(n, 0.0, seed), 200)
        if not (np.array_equal(a.states, b.states) and np.array_equal(a.alphas, b.alphas)):
            mismatches += 1
    criterion("C5 asynchronous equivalence", f"20 scenarios x 200 steps, {mismatches} mismatches")
    assert mismatches == 0


TWO_BLOCK_SCENARIO = {
    "n": 5,
    "d": 1,
    "epsilon": 0.1,
    "delta": 0.01,
    "horizon": 100_000,
    "initial_opinions": {"generator": "uniform-box", "low": 0.0, "high": 0.3, "seed": 6},
    "schedule": {
        "kind": "stochastic_support",
        "support": [[0, 1], [2, 3, 4]],
        "probabilities": [0.5, 0.5],
        "partition_indices": [0, 1],
        "open_alpha": [0.0, 0.5],
    },
    "master_seed": 2006,
}


@pytest.fixture(scope="module")
def two_block_ensemble():
    sc = parse_scenario(TWO_BLOCK_SCENARIO)
    start = time.perf_counter()
    res = run_ensemble(sc, 500, 100_000)
    return res, time.perf_counter() - start


@pytest.mark.slow
def test_c6_expected_stopping_time(two_block_ensemble, criterion):
    res, elapsed = two_block_ensemble
    expected_bound = 5**10 / (8 * 0.5**2 * 0.5) * 10**2
    criterion(
        "C6 E(tau) bound",
        f"reached {res.reached_fraction:.0%}, mean tau {res.mean_tau:.3f} +- {res.confidence:.3f}, "
        f"bound {res.co1_bound:.4g}, ratio {res.bound_ratio:.3g}, {elapsed:.0f}s",
    )
    assert res.co1_bound == pytest.approx(expected_bound, rel=1e-12)
    assert res.gamma == 0.5 and res.min_partition_prob == 0.5
    assert res.reached_fraction == 1.0
    assert res.mean_tau <= res.co1_bound
    assert elapsed < 300


def test_c7_epsilon_trivial_consensus(criterion):
    eps = 0.2
    x0 = np.array([0.0, 0.07, 0.13, 0.2])
    alpha = 0.9
    d0 = float(np.ptp(x0))
    # complete graph: every pairwise gap contracts by exactly alpha per step
    k = math.ceil(math.log(1e-6 / d0) / math.log(alpha)) + 1
    tr = simulate(OpinionState(x0, eps), ScheduleSpec.from_rows([[alpha] * 4] * k), k)
    diam = [diameter(x) for x in tr.states]
    hit = next(t for t, v in enumerate(diam) if v < 1e-6)
    trivial = all(diam[t] <= eps for t in range(k + 1))
    decreasing = all(diam[t + 1] < diam[t] for t in range(hit))
    criterion("C7 eps-trivial consensus", f"diameter < 1e-6 at step {hit} (computed limit {k})")
    assert trivial and decreasing and hit <= k


def test_c8_summable_openness(criterion):
    eps, horizon = 0.5, 50  # 1 - 2^-t stays below 1.0 in float64 only up to t = 53
    x0 = OpinionState([0.0, 0.3, 0.7], eps)
    rows = [[1.0 - 2.0**-t] * 3 for t in range(horizon)]
    tr = simulate(x0, ScheduleSpec.from_rows(rows), horizon)
    trackers = [ConvergenceTracker(i) for i in range(3)]
    increments = []
    for t in range(horizon):
        s = tr.state(t)
        nbs = compute_neighborhoods(s)
        trackers = [track_convergence(c, s, rows[t], nbs) for c in trackers]
        increments.append(max(c.last_increment for c in trackers))
    small_from = next(t for t in range(horizon) if all(v < 1e-12 for v in increments[t:]))

    disp = np.linalg.norm(np.diff(tr.states, axis=0), axis=-1)  # (horizon, n)
    # past the horizon an agent moves at most 2^-t times the current diameter per step
    remainder = 2.0 ** (1 - horizon) * diameter(tr.states[-1])
    tail_from = next(t for t in range(horizon) if disp[t:].sum(axis=0).max() + remainder < 1e-8)
    moved_every_step = all(not np.array_equal(tr.states[t], tr.states[t + 1]) for t in range(horizon))
    term = detect_termination(tr)
    criterion(
        "C8 summable openness",
        f"increments < 1e-12 from step {small_from}, tail < 1e-8 from step {tail_from}, "
        f"termination {'none' if term is None else term} in {horizon} steps",
    )
    assert small_from <= 60
    assert all(c.partial_sum < 1.0 for c in trackers)
    assert moved_every_step and term is None


@pytest.mark.slow
def test_c9_interaction_equivalences(two_block_ensemble, criterion):
    res, _ = two_block_ensemble
    total = sum(res.equivalence_violations)
    criterion("C9 interaction equivalences", f"{total} violations over {res.runs} runs x {res.horizon} steps")
    assert total == 0


@pytest.mark.slow
def test_c10_freeze(two_block_ensemble, criterion):
    res, _ = two_block_ensemble
    ok = [m is not None and 4 <= m <= 16 for m in res.freeze_M]
    Ms = sorted({m for m in res.freeze_M if m is not None})
    criterion("C10 freeze detection", f"{sum(ok)}/{res.runs} runs frozen, M values {Ms}")
    assert all(ok)


def test_c11_equivariance(criterion):
    rng = np.random.default_rng(11)
    worst = {"permutation": 0.0, "translation": 0.0, "scaling": 0.0}
    for _ in range(200):
        n = int(rng.integers(1, 9))
        d = int(rng.choice([1, 2, 3]))
        eps = float(rng.uniform(0.1, 0.6))
        x = rng.uniform(0, 1, (n, d))
        a = random_alphas(rng, n)
        base = step(OpinionState(x, eps), a).opinions

        p = rng.permutation(n)
        permuted = step(OpinionState(x[p], eps), a[p]).opinions
        worst["permutation"] = max(worst["permutation"], float(np.abs(permuted - base[p]).max()))

        c = rng.uniform(-5, 5, d)
        shifted = step(OpinionState(x + c, eps), a).opinions
        worst["translation"] = max(worst["translation"], float(np.abs(shifted - (base + c)).max()))

        lam = float(rng.uniform(0.25, 4.0))
        scaled = step(OpinionState(lam * x, lam * eps), a).opinions
        worst["scaling"] = max(worst["scaling"], float(np.abs(scaled - lam * base).max()))
    criterion("C11 equivariance", ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert all(v <= 1e-12 for v in worst.values())


def test_c12_round_trip(criterion, tmp_path):
    rng = np.random.default_rng(12)
    mismatches = 0
    for k in range(20):
        n = int(rng.integers(2, 8))
        d = int(rng.choice([1, 2, 3]))
        spec = ScheduleSpec.singletons(n, open_alpha=(0.0, 0.9), seed=int(rng.integers(0, 2**32)))
        tr = simulate(OpinionState(rng.uniform(0, 1, (n, d)), float(rng.uniform(0.1, 0.5))), spec, 60)
        back, rows = load_trajectory(export_trajectory(tr, tmp_path / f"t{k}.jsonl"))
        stored_z = np.array([r["Z"] for r in rows])
        stored_dec = np.array([r["decrement"] for r in rows[:-1]])
        stored_bound = np.array([r["nl8_bound"] for r in rows[:-1]])
        same = (
            np.array_equal(stored_z, back.energies)
            and np.array_equal(stored_dec, back.decrements)
            and np.array_equal(stored_bound, back.nl8_bounds)
            and analyze_trajectory(back, rows).ok
        )
        mismatches += not same
    criterion("C12 export round trip", f"20 trajectories, {mismatches} mismatches")
    assert mismatches == 0
