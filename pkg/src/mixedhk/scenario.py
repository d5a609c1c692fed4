"""Scenario files and trajectory exports.

Scenario file (JSON)::

    {
      "n": 5, "d": 1,
      "epsilon": 0.1,          # confidence bound, opinion units
      "delta": 0.01,           # triviality threshold, opinion units
      "horizon": 1000,         # steps
      "initial_opinions": [[0.0], [0.05], ...]
          # or {"generator": "uniform-box", "low": 0.0, "high": 1.0, "seed": 7}
      "schedule": {
          "kind": "synchronous" | "asynchronous" | "scripted" | "stochastic_support",
          "alphas": [[...], ...],              # scripted: one row per step
          "support": [[0, 1], [2, 3, 4]],      # stochastic_support: agent subsets
          "probabilities": [0.5, 0.5],
          "partition_indices": [0, 1],         # support elements forming a partition
          "open_alpha": 0.0 | [lo, hi]         # hi < 1
      },
      "outputs": ["trajectory", "energy", "stopping_report", "ensemble_summary"],
      "master_seed": 0,
      "m_max": 16
    }

Agent indices are 0-based.  Trajectory exports are JSON lines (one object per
step, see :meth:`mixedhk.trajectory.Trajectory.rows`) or CSV with columns
``t, x_<agent>_<coord>..., alpha_<agent>..., Z, decrement, nl8_bound, merges``
where the column labels count agents and coordinates from 1.  Floats are
written in shortest round-trip form.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import SLACK
from .dynamics import OpinionState, merged_pairs, mixed_update
from .errors import ConfigurationError
from .schedules import KINDS, SCRIPTED, STOCHASTIC_SUPPORT, ScheduleSpec, derive_seed
from .stopping import M_MAX
from .trajectory import Trajectory

OUTPUTS = ("trajectory", "energy", "stopping_report", "ensemble_summary")


@dataclass
class ScenarioConfig:
    n: int
    d: int
    epsilon: float
    delta: float
    horizon: int
    schedule: ScheduleSpec
    initial: np.ndarray | dict
    outputs: tuple = ("trajectory", "stopping_report")
    master_seed: int = 0
    m_max: int = M_MAX
    extra: dict = field(default_factory=dict)

    def initial_opinions(self, run=0) -> np.ndarray:
        """Initial ``(n, d)`` opinions for run ``run``.

        Explicit opinions are shared by every run; a uniform-box generator draws
        fresh opinions per run from ``(generator seed, run)``.
        """
        if isinstance(self.initial, dict):
            g = self.initial
            rng = np.random.default_rng(derive_seed(g["seed"], run))
            return rng.uniform(g["low"], g["high"], size=(self.n, self.d))
        return np.array(self.initial, dtype=float)

    def initial_state(self, run=0) -> OpinionState:
        return OpinionState(self.initial_opinions(run), self.epsilon)


def _need(data, key, path=""):
    if key not in data:
        raise ConfigurationError("missing required field", f"{path}{key}")
    return data[key]


def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigurationError(f"expected a finite number, got {value!r}", path)
    if positive and not value > 0:
        raise ConfigurationError("must be positive", path)
    return value


def _integer(value, path, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"expected an integer, got {value!r}", path)
    if value < minimum:
        raise ConfigurationError(f"must be >= {minimum}", path)
    return value


def parse_schedule(data, n, seed) -> ScheduleSpec:
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", "schedule")
    kind = _need(data, "kind", "schedule.")
    if kind not in KINDS:
        raise ConfigurationError(f"unknown kind {kind!r}; expected one of {list(KINDS)}", "schedule.kind")
    kwargs = {"seed": seed}
    if kind == SCRIPTED:
        kwargs["scripted"] = _need(data, "alphas", "schedule.")
    elif kind == STOCHASTIC_SUPPORT:
        kwargs["support"] = _need(data, "support", "schedule.")
        kwargs["probabilities"] = _need(data, "probabilities", "schedule.")
        kwargs["partition_indices"] = _need(data, "partition_indices", "schedule.")
        kwargs["open_alpha"] = data.get("open_alpha", 0.0)
    try:
        spec = ScheduleSpec(kind, **kwargs)
        spec.validate(n)
    except ConfigurationError as exc:
        if exc.path:
            raise
        raise ConfigurationError(str(exc), "schedule") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), "schedule") from None
    return spec


def parse_scenario(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")
    n = _integer(_need(data, "n"), "n", 1)
    d = _integer(data.get("d", 1), "d", 1)
    eps = _number(_need(data, "epsilon"), "epsilon", positive=True)
    delta = _number(data.get("delta", eps / 4), "delta", positive=True)
    horizon = _integer(_need(data, "horizon"), "horizon", 1)
    seed = _integer(data.get("master_seed", 0), "master_seed", 0)
    m_max = _integer(data.get("m_max", M_MAX), "m_max", 5)

    init = _need(data, "initial_opinions")
    if isinstance(init, dict):
        if init.get("generator") != "uniform-box":
            raise ConfigurationError("only the 'uniform-box' generator is supported", "initial_opinions.generator")
        low = _number(init.get("low", 0.0), "initial_opinions.low")
        high = _number(init.get("high", 1.0), "initial_opinions.high")
        if not high >= low:
            raise ConfigurationError("high must be >= low", "initial_opinions.high")
        gseed = _integer(init.get("seed", seed), "initial_opinions.seed", 0)
        initial = {"low": low, "high": high, "seed": gseed}
    else:
        try:
            arr = np.array(init, dtype=float)
        except (TypeError, ValueError):
            raise ConfigurationError("opinions must be numbers", "initial_opinions") from None
        if arr.ndim == 1 and d == 1:
            arr = arr[:, None]
        if arr.shape != (n, d):
            raise ConfigurationError(f"expected shape ({n}, {d}), got {arr.shape}", "initial_opinions")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("opinions must be finite", "initial_opinions")
        initial = arr

    outputs = tuple(data.get("outputs", ("trajectory", "stopping_report")))
    for o in outputs:
        if o not in OUTPUTS:
            raise ConfigurationError(f"unknown output {o!r}; expected one of {list(OUTPUTS)}", "outputs")

    schedule = parse_schedule(_need(data, "schedule"), n, seed)
    known = {"n", "d", "epsilon", "delta", "horizon", "initial_opinions", "schedule", "outputs", "master_seed", "m_max"}
    extra = {k: v for k, v in data.items() if k not in known}
    return ScenarioConfig(n, d, float(eps), float(delta), horizon, schedule, initial, outputs, seed, m_max, extra)


def load_scenario(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", str(path)) from None
    return parse_scenario(data)


# --------------------------------------------------------------------------
# trajectory export / import
# --------------------------------------------------------------------------

def csv_header(n, d):
    cols = ["t"]
    cols += [f"x_{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
    cols += [f"alpha_{i + 1}" for i in range(n)]
    cols += ["Z", "decrement", "nl8_bound", "merges"]
    return cols


def _fmt(v):
    return "" if v is None else repr(float(v))


def export_trajectory(traj: Trajectory, path, format="jsonl"):
    path = Path(path)
    if format == "jsonl":
        with path.open("w") as fh:
            for row in traj.rows():
                fh.write(json.dumps(row) + "\n")
    elif format == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(csv_header(traj.n, traj.d))
            for row in traj.rows():
                x = [_fmt(v) for point in row["opinions"] for v in point]
                a = [_fmt(v) for v in row["alphas"]] if row["alphas"] is not None else [""] * traj.n
                merges = " ".join(f"{i}-{j}" for i, j in row["merges"])
                w.writerow([row["t"], *x, *a, _fmt(row["Z"]), _fmt(row["decrement"]), _fmt(row["nl8_bound"]), merges])
    else:
        raise ConfigurationError(f"unknown export format {format!r}")
    return path


def load_trajectory(path, epsilon=None):
    """Read a JSONL or CSV export.

    Returns ``(trajectory, stored_rows)`` where ``stored_rows`` holds the
    recorded Z / decrement / nl8_bound values.  CSV files carry no epsilon, so
    it must be supplied.
    """
    path = Path(path)
    if path.suffix == ".csv":
        if epsilon is None:
            raise ConfigurationError("CSV trajectories need an explicit epsilon")
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n = sum(c.startswith("alpha_") for c in header)
            d = sum(c.startswith("x_") for c in header) // n
            raw = list(reader)
        rows = []
        for r in raw:
            x = [float(v) for v in r[1 : 1 + n * d]]
            a = r[1 + n * d : 1 + n * d + n]
            z, dec, bnd = r[1 + n * d + n : 4 + n * d + n]
            rows.append(
                {
                    "t": int(r[0]),
                    "opinions": np.array(x).reshape(n, d).tolist(),
                    "alphas": None if a[0] == "" else [float(v) for v in a],
                    "Z": float(z),
                    "decrement": None if dec == "" else float(dec),
                    "nl8_bound": None if bnd == "" else float(bnd),
                    "merges": [list(map(int, p.split("-"))) for p in r[-1].split()],
                }
            )
    else:
        with path.open() as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        if epsilon is None:
            epsilon = rows[0]["epsilon"]
    if not rows:
        raise ConfigurationError("trajectory file is empty", str(path))
    for k, r in enumerate(rows):
        if r["t"] != k:
            raise ConfigurationError(f"steps are not contiguous at line {k + 1}", str(path))
    states = np.array([r["opinions"] for r in rows], dtype=float)
    alphas = np.array([r["alphas"] for r in rows[:-1]], dtype=float).reshape(len(rows) - 1, states.shape[1])
    return Trajectory(float(epsilon), states, alphas), rows


@dataclass
class AnalysisReport:
    steps: int
    violations: list  # (t, description)

    @property
    def ok(self):
        return not self.violations


def analyze_trajectory(traj: Trajectory, stored_rows=None) -> AnalysisReport:
    """Recompute diagnostics and check invariants of a stored trajectory.

    Checks: each step reproduces the update rule bit for bit; energy is
    nonincreasing and dominates the descent bound; energy lies in
    ``[0, n^2 eps^2]``; recorded merges match; and, when ``stored_rows`` is
    given, the stored Z / decrement / nl8_bound equal the recomputed ones.
    """
    eps = traj.epsilon
    n = traj.n
    z = traj.energies
    dec = traj.decrements
    bounds = traj.nl8_bounds
    bad = []
    cap = n * n * eps * eps
    for t in range(len(traj.states)):
        if not (0.0 <= z[t] <= cap + SLACK):
            bad.append((t, f"energy {z[t]!r} outside [0, n^2 eps^2]"))
    for t in range(traj.horizon):
        a = traj.alphas[t]
        if np.any((a < 0) | (a > 1)):
            bad.append((t, "alpha outside [0, 1]"))
            continue
        if not np.array_equal(mixed_update(traj.states[t], a, eps), traj.states[t + 1]):
            bad.append((t, "state does not follow the update rule"))
        if dec[t] < -SLACK:
            bad.append((t, f"energy increased by {-dec[t]!r}"))
        if dec[t] < bounds[t] - SLACK:
            bad.append((t, f"decrement {dec[t]!r} below bound {bounds[t]!r}"))
    if stored_rows is not None:
        for t, row in enumerate(stored_rows):
            if row["Z"] != z[t]:
                bad.append((t, "stored Z differs from recomputed"))
            if t < traj.horizon:
                if row["decrement"] != dec[t]:
                    bad.append((t, "stored decrement differs from recomputed"))
                if row["nl8_bound"] != bounds[t]:
                    bad.append((t, "stored nl8_bound differs from recomputed"))
            recorded = sorted(tuple(p) for p in row.get("merges", []))
            expected = merged_pairs(traj.states[t - 1], traj.states[t]) if t else []
            if recorded != sorted(expected):
                bad.append((t, "stored merges differ from recomputed"))
    return AnalysisReport(traj.horizon, bad)
