"""Stubbornness schedules: which agents are open at each step and how open.

Four kinds are supported:

``synchronous``
    every agent has alpha = 0 (plain synchronous HK);
``asynchronous``
    one uniformly drawn agent has alpha = 0, the rest alpha = 1;
``scripted``
    an explicit list of alpha rows, one per step;
``stochastic_support``
    the open set U_t is drawn i.i.d. from a finite support of agent subsets;
    open agents get alpha from ``open_alpha`` (a constant, or ``(lo, hi)``
    sampled uniformly per open agent), closed agents get alpha = 1.

Random draws come from an :class:`RngStream`.  Every step consumes a block of
``n + 1`` uniforms: slot 0 selects the support element (or the asynchronous
agent), slot ``1 + i`` supplies agent ``i``'s alpha under an interval policy.
The fixed stride makes draw ``t`` a pure function of ``(seed, t)`` and lets a
``stochastic_support`` schedule over singletons replay an ``asynchronous`` one
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import StubbornnessAssignment
from .errors import ConfigurationError, UsageError

SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"
SCRIPTED = "scripted"
STOCHASTIC_SUPPORT = "stochastic_support"
KINDS = (SYNCHRONOUS, ASYNCHRONOUS, SCRIPTED, STOCHASTIC_SUPPORT)

#: returned by :func:`gamma_bound` when no constant gamma < 1 exists
NO_GAMMA = None

PROBABILITY_TOL = 1e-12


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str
    scripted: tuple = ()
    support: tuple = ()
    probabilities: tuple = ()
    partition_indices: tuple = ()
    open_alpha: float | tuple = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "scripted", tuple(tuple(float(a) for a in row) for row in self.scripted))
        object.__setattr__(self, "support", tuple(frozenset(int(i) for i in s) for s in self.support))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        object.__setattr__(self, "partition_indices", tuple(int(k) for k in self.partition_indices))
        oa = self.open_alpha
        if isinstance(oa, (list, tuple)):
            oa = tuple(float(v) for v in oa)
        else:
            oa = float(oa)
        object.__setattr__(self, "open_alpha", oa)
        object.__setattr__(self, "seed", int(self.seed))
        if self.kind == STOCHASTIC_SUPPORT:
            self._check_support()
        elif self.kind == SCRIPTED:
            for t, row in enumerate(self.scripted):
                if not all(0.0 <= a <= 1.0 for a in row):
                    raise ConfigurationError(f"scripted row {t} has alpha outside [0, 1]")

    # -- constructors ------------------------------------------------------

    @classmethod
    def synchronous(cls):
        return cls(SYNCHRONOUS)

    @classmethod
    def asynchronous(cls, seed=0):
        return cls(ASYNCHRONOUS, seed=seed)

    @classmethod
    def from_rows(cls, rows):
        return cls(SCRIPTED, scripted=rows)

    @classmethod
    def singletons(cls, n, open_alpha=0.0, seed=0):
        """Uniform support over ``{{0}, ..., {n-1}}``: the asynchronous model as a support."""
        return cls(
            STOCHASTIC_SUPPORT,
            support=[[i] for i in range(n)],
            probabilities=[1.0 / n] * n,
            partition_indices=range(n),
            open_alpha=open_alpha,
            seed=seed,
        )

    # -- validation --------------------------------------------------------

    def _check_support(self):
        if not self.support:
            raise ConfigurationError("support must be nonempty", "schedule.support")
        if len(self.probabilities) != len(self.support):
            raise ConfigurationError("one probability per support element is required", "schedule.probabilities")
        if any(not (p > 0.0) for p in self.probabilities):
            raise ConfigurationError("probabilities must be strictly positive", "schedule.probabilities")
        total = sum(self.probabilities)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ConfigurationError(f"probabilities sum to {total!r}, not 1", "schedule.probabilities")
        if not self.partition_indices:
            raise ConfigurationError("partition_indices must designate a partition", "schedule.partition_indices")
        for k in self.partition_indices:
            if not 0 <= k < len(self.support):
                raise ConfigurationError(f"partition index {k} out of range", "schedule.partition_indices")
        if len(set(self.partition_indices)) != len(self.partition_indices):
            raise ConfigurationError("partition indices repeat", "schedule.partition_indices")
        seen = set()
        for k in self.partition_indices:
            block = self.support[k]
            if not block:
                raise ConfigurationError("partition blocks must be nonempty", "schedule.partition_indices")
            if seen & block:
                raise ConfigurationError("partition not disjoint", "schedule.partition_indices")
            seen |= block
        oa = self.open_alpha
        if isinstance(oa, tuple):
            if len(oa) != 2 or not (0.0 <= oa[0] <= oa[1] < 1.0):
                raise ConfigurationError("open_alpha interval must satisfy 0 <= lo <= hi < 1", "schedule.open_alpha")
        elif not (0.0 <= oa < 1.0):
            raise ConfigurationError("open_alpha constant must lie in [0, 1)", "schedule.open_alpha")

    def validate(self, n):
        """Check the schedule against an agent count ``n``; returns ``self``."""
        if self.kind == STOCHASTIC_SUPPORT:
            for k, s in enumerate(self.support):
                bad = [i for i in s if not 0 <= i < n]
                if bad:
                    raise ConfigurationError(f"support element {k} references agent {bad[0]} >= n={n}", "schedule.support")
            covered = set().union(*(self.support[k] for k in self.partition_indices))
            if covered != set(range(n)):
                raise ConfigurationError("partition does not cover all agents", "schedule.partition_indices")
        elif self.kind == SCRIPTED:
            for t, row in enumerate(self.scripted):
                if len(row) != n:
                    raise ConfigurationError(f"scripted row {t} has {len(row)} entries, expected {n}", "schedule.alphas")
        return self

    @property
    def is_random(self):
        return self.kind in (ASYNCHRONOUS, STOCHASTIC_SUPPORT)


@dataclass
class RngStream:
    """Reproducible uniform draws indexed by step.

    ``uniforms(t)`` returns the block for step ``t``; sequential access is
    cheap, random access re-seeds and jumps ahead.
    """

    seed: int
    width: int
    counter: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self.counter = 0

    def _seek(self, t):
        bits = np.random.PCG64(self.seed)
        bits.advance(t * self.width)
        self._gen = np.random.Generator(bits)
        self.counter = t

    def uniforms(self, t):
        if t != self.counter:
            self._seek(t)
        self.counter = t + 1
        return self._gen.random(self.width)

    def block(self, t, steps):
        """Draws for steps ``t .. t+steps-1`` as a ``(steps, width)`` array."""
        if t != self.counter:
            self._seek(t)
        self.counter = t + steps
        return self._gen.random((steps, self.width))


def derive_seed(master_seed, index):
    """Independent 64-bit seed for trajectory ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_stream(spec: ScheduleSpec, n, seed=None):
    return RngStream(spec.seed if seed is None else seed, n + 1)


def _cdf(probs):
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf[-1] = 1.0
    return cdf


def _selection_cdf(spec, n):
    if spec.kind == ASYNCHRONOUS:
        return _cdf(np.full(n, 1.0 / n))
    return _cdf(spec.probabilities)


def _support_mask(spec, n):
    if spec.kind == ASYNCHRONOUS:
        return np.eye(n, dtype=bool)
    mask = np.zeros((len(spec.support), n), dtype=bool)
    for k, s in enumerate(spec.support):
        mask[k, sorted(s)] = True
    return mask


class AssignmentSampler:
    """Turns uniform blocks into alpha arrays for a random schedule.

    Works on any leading batch shape; the single-step :func:`next_assignment`
    goes through the same code so batched and single runs agree exactly.
    """

    def __init__(self, spec: ScheduleSpec, n):
        if not spec.is_random:
            raise UsageError(f"{spec.kind} schedules draw no random numbers")
        spec.validate(n)
        self.spec = spec
        self.n = n
        self.cdf = _selection_cdf(spec, n)
        self.mask = _support_mask(spec, n)

    def select(self, u0):
        idx = np.searchsorted(self.cdf, u0, side="right")
        return np.minimum(idx, len(self.cdf) - 1)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        open_ = self.mask[self.select(u[..., 0])]
        if self.spec.kind == ASYNCHRONOUS:
            return np.where(open_, 0.0, 1.0)
        oa = self.spec.open_alpha
        if isinstance(oa, tuple):
            lo, hi = oa
            values = lo + (hi - lo) * u[..., 1:]
        else:
            values = oa
        return np.where(open_, values, 1.0)


def next_assignment(spec: ScheduleSpec, t, n, rng: RngStream | None = None) -> StubbornnessAssignment:
    """Stubbornness assignment for step ``t``."""
    if spec.kind == SYNCHRONOUS:
        return StubbornnessAssignment(np.zeros(n))
    if spec.kind == SCRIPTED:
        if t >= len(spec.scripted):
            raise ConfigurationError(f"scripted schedule has {len(spec.scripted)} rows, step {t} requested")
        row = spec.scripted[t]
        if len(row) != n:
            raise ConfigurationError(f"scripted row {t} has {len(row)} entries, expected {n}")
        return StubbornnessAssignment(row)
    if rng is None:
        rng = make_stream(spec, n)
    if rng.width != n + 1:
        raise ConfigurationError(f"rng stream width {rng.width} does not match n + 1 = {n + 1}")
    return StubbornnessAssignment(AssignmentSampler(spec, n)(rng.uniforms(t)))


def min_partition_probability(spec: ScheduleSpec) -> float:
    """``min_j P(U_0 = K_j)`` over the designated partition blocks."""
    if spec.kind != STOCHASTIC_SUPPORT:
        raise UsageError(f"min_partition_probability needs a stochastic_support schedule, got {spec.kind}")
    return min(spec.probabilities[k] for k in spec.partition_indices)


def gamma_bound(spec: ScheduleSpec):
    """Smallest constant the schedule guarantees as an upper bound on open-agent alphas.

    Returns :data:`NO_GAMMA` when the open alphas can approach 1.
    """
    if spec.kind in (SYNCHRONOUS, ASYNCHRONOUS):
        return 0.0
    if spec.kind == STOCHASTIC_SUPPORT:
        oa = spec.open_alpha
        return oa[1] if isinstance(oa, tuple) else oa
    open_alphas = [a for row in spec.scripted for a in row if a < 1.0]
    if not open_alphas:
        return 0.0
    sup = max(open_alphas)
    return sup if sup < 1.0 else NO_GAMMA
