"""Random telegraph noise: trajectories, noise phases, Monte Carlo moments.

The noise is a dichotomous process X(t) = +-1 flipping at Poisson rate
``gamma``; its autocorrelation is exp(-2*gamma*t).  A qubit coupled to X
through a dephasing interaction accumulates the noise phase
phi(t) = integral of X(s) ds, and ensemble coherences reduce to averages
of exp(i*m*phi(t)).

Jumps are sampled as exact event times (exponential waiting times, or
equivalently uniform order statistics given a Poisson count), so phase
integrals carry no time-step discretization error.

Reproducibility: all randomness derives from numpy's PCG64 generator,
seeded via SeedSequence(master_seed, spawn_key=(stream_index, ...)).
Spawn-key derivation is collision-free by construction, so distinct
stream indices give statistically independent streams and the same
(master_seed, stream_index) pair is always bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .series import MONTE_CARLO, CoherenceSeries

# Ensemble reductions accumulate per-realization values in fixed-size chunks,
# in ascending realization order.  The chunk size is a module constant, not a
# tunable: changing it changes the floating-point reduction order and
# therefore the bit pattern of results.
_REDUCE_CHUNK = 16384


@dataclass(frozen=True)
class RtnParams:
    """Switching rate, time horizon and initial-sign bias of the noise.

    ``p_plus`` is the probability of starting in the +1 state.  The default
    1/2 is the stationary ensemble; a fixed initial sign (p_plus = 0 or 1)
    is exposed for non-stationary studies but every closed-form moment in
    :mod:`ltgsim.analytic` assumes the stationary choice.
    """

    gamma: float
    t_max: float
    p_plus: float = 0.5

    def __post_init__(self):
        if not self.gamma >= 0.0:
            raise ValueError(f"switching rate gamma must be >= 0, got {self.gamma}")
        if not self.t_max > 0.0:
            raise ValueError(f"horizon t_max must be > 0, got {self.t_max}")
        if not 0.0 <= self.p_plus <= 1.0:
            raise ValueError(f"p_plus must lie in [0, 1], got {self.p_plus}")


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream index selecting one independent substream."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def sequence(self, *branch: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_index, *branch)
        )

    def generator(self, *branch: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(*branch)))


@dataclass(frozen=True)
class Trajectory:
    """One noise realization: initial sign plus ordered jump times.

    X(t) = initial_sign * (-1)**(number of jumps at or before t).
    """

    initial_sign: int
    jump_times: np.ndarray
    t_max: float

    def __post_init__(self):
        object.__setattr__(
            self, "jump_times", np.asarray(self.jump_times, dtype=float)
        )
        if self.initial_sign not in (-1, 1):
            raise ValueError("initial_sign must be +1 or -1")
        jt = self.jump_times
        if jt.size:
            if jt[0] <= 0.0 or jt[-1] > self.t_max:
                raise ValueError("jump times must lie in (0, t_max]")
            if np.any(np.diff(jt) <= 0.0):
                raise ValueError("jump times must be strictly increasing")

    def value(self, t) -> np.ndarray:
        """X(t), vectorized over t."""
        t = np.asarray(t, dtype=float)
        n = np.searchsorted(self.jump_times, t, side="right")
        return self.initial_sign * np.where(n % 2 == 0, 1, -1)

    def mirrored(self) -> "Trajectory":
        """The sign-flipped twin (phi -> -phi), same jump times."""
        return Trajectory(-self.initial_sign, self.jump_times, self.t_max)


@dataclass(frozen=True)
class PhaseSample:
    """Noise phase phi(t) = integral_0^t X(s) ds at a single time."""

    t: float
    phi: float

    def __post_init__(self):
        if abs(self.phi) > self.t + 1e-12:
            raise ValueError("noise phase cannot exceed elapsed time in magnitude")


def sample_trajectory(params: RtnParams, seed: SeedSpec) -> Trajectory:
    """Draw one trajectory; deterministic given (params, seed).

    Waiting times between jumps are exponential with rate gamma; the
    initial sign is +1 with probability ``params.p_plus``.
    """
    rng = seed.generator()
    sign = 1 if rng.random() < params.p_plus else -1
    if params.gamma == 0.0:
        return Trajectory(sign, np.empty(0), params.t_max)
    jumps = []
    t = rng.exponential(1.0 / params.gamma)
    while t <= params.t_max:
        jumps.append(t)
        t += rng.exponential(1.0 / params.gamma)
    return Trajectory(sign, np.array(jumps), params.t_max)


def accumulate_phase(traj: Trajectory, t: float) -> PhaseSample:
    """Exact piecewise-linear integral of X(s) from 0 to t."""
    if not 0.0 <= t <= traj.t_max:
        raise ValueError(f"t={t} outside [0, {traj.t_max}]")
    return PhaseSample(t, float(phase_on_grid(traj, np.array([t]))[0]))


def phase_on_grid(traj: Trajectory, times: np.ndarray) -> np.ndarray:
    """Noise phase phi at every grid time, exactly.

    Uses phi(t) = s * (t + 2 * sum_i (-1)^i * max(t - tau_i, 0)) where
    tau_i are the jump times (i starting at 1); each jump flips the slope.
    """
    times = np.asarray(times, dtype=float)
    jt = traj.jump_times
    if jt.size == 0:
        return traj.initial_sign * times
    alt = np.where(np.arange(jt.size) % 2 == 0, -1.0, 1.0)
    dt = np.clip(times[:, None] - jt[None, :], 0.0, None)
    return traj.initial_sign * (times + 2.0 * (dt * alt[None, :]).sum(axis=1))


# ---------------------------------------------------------------------------
# Batched sampling.  Distributionally identical to sample_trajectory but
# draws the whole ensemble from one derived stream: given the Poisson jump
# count on [0, t_max], jump times are sorted iid uniforms.
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryBatch:
    """Column-padded ensemble of trajectories (padding value +inf)."""

    signs: np.ndarray       # (R,) +-1
    jump_times: np.ndarray  # (R, max_jumps), row-sorted, padded with +inf
    t_max: float

    def __len__(self) -> int:
        return self.signs.size

    def phases_at(self, t: float) -> np.ndarray:
        """phi(t) for every realization (exact, vectorized)."""
        jt = self.jump_times
        if jt.shape[1] == 0:
            return self.signs * t
        alt = np.where(np.arange(jt.shape[1]) % 2 == 0, -1.0, 1.0)
        dt = t - jt
        np.clip(dt, 0.0, None, out=dt)
        return self.signs * (t + 2.0 * (dt * alt[None, :]).sum(axis=1))


def sample_batch(params: RtnParams, n_real: int, seed: SeedSpec) -> TrajectoryBatch:
    """Draw ``n_real`` independent trajectories from one derived stream.

    Draw order (fixed, part of the reproducibility contract): jump counts,
    then all jump positions, then initial signs.
    """
    rng = seed.generator()
    counts = rng.poisson(params.gamma * params.t_max, n_real)
    width = int(counts.max()) if n_real else 0
    jumps = rng.random((n_real, width)) * params.t_max
    jumps[np.arange(width)[None, :] >= counts[:, None]] = np.inf
    jumps.sort(axis=1)
    signs = np.where(rng.random(n_real) < params.p_plus, 1.0, -1.0)
    return TrajectoryBatch(signs, jumps, params.t_max)


def mc_exponential_moment(
    params: RtnParams,
    order: int,
    times: np.ndarray,
    n_real: int,
    seed: SeedSpec,
    antithetic: bool = False,
) -> CoherenceSeries:
    """Monte Carlo estimate of < exp(i * order * phi(t)) > on a time grid.

    With ``antithetic`` set, realizations come in mirrored (phi, -phi)
    pairs, each pair contributing cos(order * phi) with an identically
    zero imaginary part; this is the balanced-realization selection that
    keeps the estimate real for every switching rate.

    The reduction runs over realizations in ascending index order with a
    fixed chunk size, so the result is bit-reproducible regardless of how
    the caller parallelizes around it.
    """
    times = np.asarray(times, dtype=float)
    if n_real < 2:
        raise ValueError("n_real must be >= 2")
    if order < 1 or int(order) != order:
        raise ValueError("moment order must be a positive integer")
    if antithetic and n_real % 2:
        raise ValueError("antithetic pairing requires an even n_real")
    if times.size and (times.min() < 0.0 or times.max() > params.t_max):
        raise ValueError("time grid must lie within [0, t_max]")

    n_draw = n_real // 2 if antithetic else n_real
    batch = sample_batch(params, n_draw, seed)

    if antithetic:
        mean, se = _reduce(lambda phi: np.cos(order * phi), batch, times)
        values = mean.astype(complex)  # imaginary part exactly zero
    else:
        mean_re, se = _reduce(lambda phi: np.cos(order * phi), batch, times)
        mean_im, _ = _reduce(lambda phi: np.sin(order * phi), batch, times)
        values = mean_re + 1j * mean_im

    return CoherenceSeries(
        times,
        values,
        MONTE_CARLO,
        params={
            "gamma": params.gamma,
            "order": order,
            "n_real": n_real,
            "antithetic": antithetic,
            "p_plus": params.p_plus,
            "master_seed": seed.master_seed,
            "stream_index": seed.stream_index,
        },
        stderr=se,
    )


def _reduce(func, batch: TrajectoryBatch, times: np.ndarray):
    """Mean and standard error of func(phi) over the batch, per grid time.

    Accumulation is chunked with _REDUCE_CHUNK in ascending realization
    order (deterministic bit pattern).
    """
    n = len(batch)
    total = np.zeros(times.size)
    total_sq = np.zeros(times.size)
    for start in range(0, n, _REDUCE_CHUNK):
        sub = TrajectoryBatch(
            batch.signs[start : start + _REDUCE_CHUNK],
            batch.jump_times[start : start + _REDUCE_CHUNK],
            batch.t_max,
        )
        for g, t in enumerate(times):
            v = func(sub.phases_at(t))
            total[g] += v.sum()
            total_sq[g] += (v * v).sum()
    mean = total / n
    var = np.clip(total_sq / n - mean**2, 0.0, None)
    se = np.sqrt(var / max(n - 1, 1))
    return mean, se


def moment_from_trajectories(
    trajectories: Sequence[Trajectory],
    order: int,
    times: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> CoherenceSeries:
    """Weighted ensemble moment over an explicit trajectory list.

    This is the same estimator as :func:`mc_exponential_moment` but on
    caller-supplied realizations, so kernel-sum constructions can be
    checked against the moment machinery on identical trajectories.
    ``weights`` default to uniform and are normalized to unit sum.
    """
    times = np.asarray(times, dtype=float)
    n = len(trajectories)
    if n == 0:
        raise ValueError("need at least one trajectory")
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("weights must be non-negative, one per trajectory")
        w = w / w.sum()
    values = np.zeros(times.size, dtype=complex)
    for wi, traj in zip(w, trajectories):
        values += wi * np.exp(1j * order * phase_on_grid(traj, times))
    return CoherenceSeries(
        times, values, MONTE_CARLO, params={"order": order, "n_real": n}
    )
