"""Elliptic diffusion simulation and reaction-time estimation.

A diffusion is watched on the boundaries of two metastable sets A and B
with a separating surface between them.  The embedded chain of
successive boundary hits (with an intermediate visit to the surface)
reduces the reaction time to a discrete accumulation problem, which is
estimated two ways: directly, from the raw process, and through the
local-equilibrium shortcut (mean loop duration, rare escape probability,
mean reactive duration).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUp, ConfigError, TooFewEvents
from .splitting import SplittingConfig, Trajectory, ams_run, stream_rng

_DEFAULT_CHUNK = 4096


# ----------------------------------------------------------------------
# system description
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionSystem:
    """Drift/diffusion fields with the A/B/surface geometry.

    ``level_a`` and ``level_b`` are smooth level representations of the
    metastable sets (nonpositive exactly on the closed sets); the
    separating surface is the zero set of ``level_sigma`` and must be
    crossed on every passage between A and B.  ``diffusion`` may return
    a scalar (isotropic) or a ``(d, k)`` matrix.
    """

    dimension: int
    drift: object
    diffusion: object
    level_a: object
    level_b: object
    level_sigma: object
    dt: float
    seed: int = 0
    guard_radius: float = 1e6
    t_max: float = 1e7
    ellipticity_bounds: tuple = None
    boundary_start_a: object = None
    boundary_start_b: object = None
    probe_points: tuple = ()
    name: str = "custom"

    def in_a(self, x):
        return self.level_a(x) <= 0.0

    def in_b(self, x):
        return self.level_b(x) <= 0.0

    def with_dt(self, dt):
        return replace(self, dt=float(dt))


def double_well_1d(beta=3.0, dt=1e-3, a_interval=(-2.0, -0.9),
                   b_interval=(0.9, 2.0), sigma_x=-0.5, seed=0,
                   guard_radius=25.0, t_max=1e7):
    """Quartic double well ``V(x) = (x^2 - 1)^2`` at inverse temperature
    ``beta``, with interval sets and a point separating surface.

    The left well is the source, the right well the sink; the default
    geometry puts the surface on the saddle-facing side of the source.
    """
    a_lo, a_hi = map(float, a_interval)
    b_lo, b_hi = map(float, b_interval)
    sigma_x = float(sigma_x)
    if not a_hi < sigma_x < b_lo:
        raise ConfigError("surface must separate the two sets")
    amplitude = math.sqrt(2.0 / beta)

    def drift(x):
        return -4.0 * x * (x * x - 1.0)

    return DiffusionSystem(
        dimension=1,
        drift=drift,
        diffusion=lambda x: amplitude,
        level_a=lambda x: max(a_lo - x, x - a_hi),
        level_b=lambda x: max(b_lo - x, x - b_hi),
        level_sigma=lambda x: x - sigma_x,
        dt=float(dt),
        seed=int(seed),
        guard_radius=float(guard_radius),
        t_max=float(t_max),
        ellipticity_bounds=(2.0 / beta, 2.0 / beta),
        boundary_start_a=a_hi,
        boundary_start_b=b_lo,
        probe_points=(a_lo, a_hi, sigma_x, b_lo, b_hi,
                      0.5 * (a_hi + sigma_x), 0.5 * (sigma_x + b_lo)),
        name=f"double_well_1d(beta={beta})",
    )


def entropic_switch_2d(beta=2.0, dt=2e-3, radius=0.4, sigma_x=-0.4, seed=0):
    """Planar double well with circular sets; used in the demos.

    ``V(x, y) = (x^2 - 1)^2 + 2 y^2`` with disks of the given radius
    around the two minima and a vertical separating line.
    """
    amplitude = math.sqrt(2.0 / beta)
    r2 = radius * radius

    def drift(x):
        return np.array([-4.0 * x[0] * (x[0] * x[0] - 1.0), -4.0 * x[1]])

    return DiffusionSystem(
        dimension=2,
        drift=drift,
        diffusion=lambda x: amplitude,
        level_a=lambda x: (x[0] + 1.0) ** 2 + x[1] ** 2 - r2,
        level_b=lambda x: (x[0] - 1.0) ** 2 + x[1] ** 2 - r2,
        level_sigma=lambda x: x[0] - sigma_x,
        dt=float(dt),
        seed=int(seed),
        guard_radius=25.0,
        ellipticity_bounds=(2.0 / beta, 2.0 / beta),
        boundary_start_a=np.array([-1.0 + radius, 0.0]),
        boundary_start_b=np.array([1.0 - radius, 0.0]),
        name=f"entropic_switch_2d(beta={beta})",
    )


def validate_geometry(system, extra_points=()):
    """Check on probe points that A, B and the surface do not touch.

    Points near the surface must be strictly outside both closed sets,
    and points on either boundary strictly away from the surface.
    """
    eps = 1e-9
    points = list(system.probe_points) + list(extra_points)
    for x in points:
        on_sigma = abs(system.level_sigma(x)) <= eps
        if on_sigma and (system.level_a(x) <= eps or system.level_b(x) <= eps):
            raise ConfigError(f"surface touches a metastable set near {x!r}")
        if abs(system.level_a(x)) <= eps and system.level_b(x) <= eps:
            raise ConfigError(f"sets A and B touch near {x!r}")
    return True


def check_ellipticity(system, points, bounds=None):
    """Sampled two-sided bound on the diffusion matrix ``g g^T``.

    Returns the observed (min, max) eigenvalue range over ``points`` and
    verifies it against declared bounds when available.
    """
    bounds = bounds or system.ellipticity_bounds
    lows, highs = [], []
    for x in points:
        g = system.diffusion(x)
        if np.isscalar(g):
            gram = np.array([[float(g) ** 2]])
        else:
            g = np.atleast_2d(np.asarray(g, dtype=float))
            gram = g @ g.T
        eigs = np.linalg.eigvalsh(gram)
        lows.append(eigs.min())
        highs.append(eigs.max())
    low, high = float(min(lows)), float(max(highs))
    if bounds is not None:
        lam, big = bounds
        if low < lam - 1e-9 or high > big + 1e-9:
            raise ConfigError(
                f"sampled diffusion eigenvalues [{low}, {high}] leave the "
                f"declared range [{lam}, {big}]"
            )
    return low, high


# ----------------------------------------------------------------------
# integration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HitResult:
    """Outcome of integrating until a target fires (or not).

    ``status`` is ``"hit"`` or ``"timeout"``; timeouts are reported, not
    raised.  The hit point and time are localized by linear
    interpolation of the target level between the last two steps, while
    ``state`` keeps the raw endpoint of the crossing step (grid time
    ``state_time``) so that a follow-up leg can continue the underlying
    path exactly instead of restarting on the boundary.
    """

    status: str
    target: int
    point: object
    time: float
    n_steps: int
    state: object = None
    state_time: float = 0.0

    @property
    def time_credit(self):
        """Time between the localized hit and the continuation state."""
        return self.state_time - self.time


@dataclass(frozen=True)
class RestartState:
    """A localized boundary hit plus the exact state to continue from.

    ``point`` is the interpolated boundary point (reported as the chain
    position); ``state`` the raw endpoint of the crossing step;
    ``offset`` the time already elapsed between the two.
    """

    point: object
    state: object
    offset: float = 0.0


def _as_restart(start):
    if isinstance(start, RestartState):
        return start
    return RestartState(start, start, 0.0)


def _as_levels(system, targets):
    levels = []
    for t in targets:
        if callable(t):
            levels.append(t)
        elif t == "A":
            levels.append(system.level_a)
        elif t == "B":
            levels.append(system.level_b)
        else:
            raise ValueError(f"unknown target {t!r}")
    return levels


def integrate_to_hit(system, x0, targets, t_max=None, rng=None, record=False):
    """Euler-Maruyama integration until one target level turns nonpositive.

    Parameters
    ----------
    system : DiffusionSystem
    x0 : float or ndarray
        Start point (outside the targets, or exactly on one boundary, in
        which case the hit is immediate).
    targets : sequence
        Level callables (fire when the value drops to 0 or below), or
        the shorthands ``"A"``/``"B"``.
    t_max : float, optional
        Time budget for this leg; defaults to ``system.t_max``.
    rng : numpy Generator, optional
        Defaults to a stream derived from the system seed.
    record : bool
        Also return the grid path (through the raw endpoint of the
        crossing step) with its grid times; needed for splitting
        branches.

    Returns
    -------
    HitResult, or (HitResult, path, times) when ``record`` is set.

    Raises
    ------
    BlowUp
        If the trajectory leaves the guard radius.
    """
    levels = _as_levels(system, targets)
    if rng is None:
        rng = stream_rng(system.seed, 0)
    t_max = system.t_max if t_max is None else float(t_max)
    if system.dimension == 1:
        return _leg_1d(system, float(x0), levels, t_max, rng, record)
    return _leg_nd(system, np.asarray(x0, dtype=float), levels, t_max, rng, record)


def _leg_1d(system, x, levels, t_max, rng, record):
    dt = system.dt
    sqrt_dt = math.sqrt(dt)
    drift = system.drift
    diffusion = system.diffusion
    guard = system.guard_radius
    max_steps = int(t_max / dt)

    values = [lvl(x) for lvl in levels]
    for i, v in enumerate(values):
        if v <= 0.0:
            result = HitResult("hit", i, x, 0.0, 0, x, 0.0)
            return (result, [x], [0.0]) if record else result

    path = [x] if record else None
    noise = rng.standard_normal(_DEFAULT_CHUNK)
    cursor = 0
    steps = 0
    while steps < max_steps:
        if cursor == noise.size:
            noise = rng.standard_normal(_DEFAULT_CHUNK)
            cursor = 0
        x_new = x + drift(x) * dt + diffusion(x) * sqrt_dt * noise[cursor]
        cursor += 1
        steps += 1
        for i, lvl in enumerate(levels):
            v_new = lvl(x_new)
            if v_new <= 0.0:
                v_old = values[i]
                frac = 1.0 if v_old <= v_new else v_old / (v_old - v_new)
                x_hit = x + frac * (x_new - x)
                t_hit = (steps - 1 + frac) * dt
                result = HitResult("hit", i, x_hit, t_hit, steps,
                                   x_new, steps * dt)
                if record:
                    path.append(x_new)
                    times = [k * dt for k in range(len(path))]
                    return result, path, times
                return result
            values[i] = v_new
        if abs(x_new) > guard:
            raise BlowUp(f"trajectory reached |x|={abs(x_new):.3g}")
        x = x_new
        if record:
            path.append(x)
    result = HitResult("timeout", -1, x, steps * dt, steps, x, steps * dt)
    if record:
        times = [k * dt for k in range(len(path))]
        return result, path, times
    return result


def _leg_nd(system, x, levels, t_max, rng, record):
    dt = system.dt
    sqrt_dt = math.sqrt(dt)
    guard = system.guard_radius
    max_steps = int(t_max / dt)

    values = [lvl(x) for lvl in levels]
    for i, v in enumerate(values):
        if v <= 0.0:
            result = HitResult("hit", i, x.copy(), 0.0, 0, x.copy(), 0.0)
            return (result, [x.copy()], [0.0]) if record else result

    path = [x.copy()] if record else None
    steps = 0
    while steps < max_steps:
        g = system.diffusion(x)
        if np.isscalar(g):
            kick = float(g) * sqrt_dt * rng.standard_normal(x.size)
        else:
            g = np.asarray(g, dtype=float)
            kick = sqrt_dt * (g @ rng.standard_normal(g.shape[1]))
        x_new = x + np.asarray(system.drift(x), dtype=float) * dt + kick
        steps += 1
        for i, lvl in enumerate(levels):
            v_new = lvl(x_new)
            if v_new <= 0.0:
                v_old = values[i]
                frac = 1.0 if v_old <= v_new else v_old / (v_old - v_new)
                x_hit = x + frac * (x_new - x)
                t_hit = (steps - 1 + frac) * dt
                result = HitResult("hit", i, x_hit, t_hit, steps,
                                   x_new.copy(), steps * dt)
                if record:
                    path.append(x_new.copy())
                    times = [k * dt for k in range(len(path))]
                    return result, path, times
                return result
            values[i] = v_new
        if np.linalg.norm(x_new) > guard:
            raise BlowUp(f"trajectory reached |x|={np.linalg.norm(x_new):.3g}")
        x = x_new
        if record:
            path.append(x.copy())
    result = HitResult("timeout", -1, x, steps * dt, steps, x, steps * dt)
    if record:
        times = [k * dt for k in range(len(path))]
        return result, path, times
    return result


def _signed_sigma(system, x_start):
    """Surface level oriented so it is positive at the leg start."""
    sign = 1.0 if system.level_sigma(x_start) > 0.0 else -1.0
    return lambda x: sign * system.level_sigma(x)


# ----------------------------------------------------------------------
# the embedded chain
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ChainSample:
    """One embedded-chain point: boundary position, side, elapsed time.

    ``crossings`` counts surface crossings during the step (at least
    one: the step is defined by a surface visit before the next
    boundary hit).
    """

    position: object
    side: str
    elapsed_time: float
    crossings: int


def _chain_step(system, restart, rng, t_max=None, count_crossings=False):
    """Run one chain step: to the surface, then to the A/B boundary.

    ``restart`` carries the exact continuation state of the underlying
    path, so consecutive chain steps reproduce the raw process; the
    reported sample positions and elapsed times use the localized
    boundary hits.  Returns ``(sample_or_None, hit2, next_restart)``;
    a timeout in either leg yields ``sample_or_None = None``.
    """
    restart = _as_restart(restart)
    sigma = _signed_sigma(system, restart.state)
    first = integrate_to_hit(system, restart.state, [sigma], t_max=t_max,
                             rng=rng)
    if first.status != "hit":
        return None, first, None

    crossings = 1
    if count_crossings:
        second, path2, _ = integrate_to_hit(system, first.state, ["A", "B"],
                                            t_max=t_max, rng=rng, record=True)
        if second.status == "hit":
            signs = np.sign([system.level_sigma(p) for p in path2])
            nonzero = signs[signs != 0]
            crossings += int(np.sum(nonzero[1:] != nonzero[:-1]))
    else:
        second = integrate_to_hit(system, first.state, ["A", "B"],
                                  t_max=t_max, rng=rng)
    if second.status != "hit":
        return None, second, None

    elapsed = restart.offset + first.state_time + second.time
    side = "A" if second.target == 0 else "B"
    sample = ChainSample(second.point, side, elapsed, crossings)
    next_restart = RestartState(second.point, second.state,
                                second.time_credit)
    return sample, second, next_restart


def extract_chain(system, x0, n_steps, seed=None, t_max=None):
    """Embedded chain of boundary hits with intermediate surface visits.

    Parameters
    ----------
    system : DiffusionSystem
    x0 : point on the A or B boundary
    n_steps : int
        Number of chain samples requested.
    seed : int, optional
        Defaults to the system seed; the sample sequence is bit-stable
        for a fixed seed.

    Returns
    -------
    list of ChainSample
        Shorter than ``n_steps`` only if a leg times out.
    """
    rng = stream_rng(system.seed if seed is None else seed, 1)
    samples = []
    restart = _as_restart(x0)
    for _ in range(int(n_steps)):
        sample, hit, restart = _chain_step(system, restart, rng, t_max=t_max,
                                           count_crossings=True)
        if sample is None:
            break
        samples.append(sample)
    return samples


# ----------------------------------------------------------------------
# reaction-time estimators
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReactionTimeEstimate:
    """Mean reaction time with its standard error and method tag.

    For the local-equilibrium method the three components are reported:
    ``mean = loop_mean * (1/p_hat - 1) + reactive_mean``.
    """

    mean: float
    std_error: float
    n_events: int
    method: str
    loop_mean: float = None
    p_hat: float = None
    reactive_mean: float = None
    details: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        out = {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_events": self.n_events,
            "method": self.method,
        }
        if self.method == "hill_qsd":
            out.update({"loop_mean": self.loop_mean, "p_hat": self.p_hat,
                        "reactive_mean": self.reactive_mean})
        return out


def _batch_means_se(values, n_batches=10):
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return 0.0
    n_batches = max(2, min(n_batches, n // 2))
    batches = np.array_split(values, n_batches)
    means = np.array([b.mean() for b in batches])
    weights = np.array([b.size for b in batches], dtype=float) / n
    grand = values.mean()
    variance = float(weights @ (means - grand) ** 2) * n_batches / (n_batches - 1)
    return math.sqrt(variance / n_batches)


def direct_reaction_time(system, n_transitions, x0=None, seed=None,
                         t_max=None, histogram_bins=20):
    """Mean reaction time from the raw process.

    Simulates the diffusion through ``n_transitions`` complete passages
    (enter A coming from B, then reach B), averaging the passage
    durations with a batch-means standard error.  The entrance points
    into A are returned as an empirical reference for the entrance
    distribution.

    Raises
    ------
    TooFewEvents
        If fewer than 10 transitions complete within the time budget.
    """
    rng = stream_rng(system.seed if seed is None else seed, 2)
    x = system.boundary_start_a if x0 is None else x0
    if x is None:
        raise ConfigError("no start point available on the A boundary")
    t_max = system.t_max if t_max is None else float(t_max)

    durations = []
    entrances = []
    # One uninterrupted path; passage durations are differences of the
    # localized entrance times.  The opening A->B leg is discarded (the
    # start point is not an equilibrium entrance).
    leg = integrate_to_hit(system, x, ["B"], t_max=t_max, rng=rng)
    while leg.status == "hit" and len(durations) < int(n_transitions):
        back = integrate_to_hit(system, leg.state, ["A"], t_max=t_max, rng=rng)
        if back.status != "hit":
            break
        entrances.append(back.point)
        leg = integrate_to_hit(system, back.state, ["B"], t_max=t_max, rng=rng)
        if leg.status != "hit":
            break
        durations.append(back.time_credit + leg.time)

    if len(durations) < 10:
        raise TooFewEvents(
            f"only {len(durations)} of {n_transitions} transitions completed"
        )
    durations = np.array(durations)
    first_coord = np.array([p if system.dimension == 1 else p[0]
                            for p in entrances[: len(durations)]])
    counts, edges = np.histogram(first_coord, bins=histogram_bins)
    return ReactionTimeEstimate(
        mean=float(durations.mean()),
        std_error=_batch_means_se(durations),
        n_events=durations.size,
        method="direct",
        details={
            "entrance_histogram": {"counts": counts.tolist(),
                                   "edges": edges.tolist()},
            "entrance_points": entrances[: len(durations)],
            "durations": durations,
        },
    )


@dataclass(frozen=True)
class LoopSampleResult:
    """Retained loop endpoints (a local-equilibrium sample) and durations.

    ``endpoints`` holds the localized boundary points; ``restart_states``
    the matching exact continuation states, which downstream estimators
    use as excursion starts so that the chain decomposition stays
    faithful to the raw discretized path.
    ``retained + discarded + timed_out == n_loops`` exactly.  A discard
    fraction above 10% sets ``frequent_escape``: the surface is too far
    out for loop recycling to approximate the local equilibrium well.
    """

    endpoints: list
    durations: np.ndarray
    loop_mean: float
    loop_se: float
    n_loops: int
    retained: int
    discarded: int
    timed_out: int
    burn_in: int
    restart_states: list = field(default_factory=list, repr=False)

    @property
    def escape_fraction(self):
        return self.discarded / self.n_loops if self.n_loops else 0.0

    @property
    def frequent_escape(self):
        return self.escape_fraction > 0.10


def qsd_loop_sampler(system, n_loops, burn_in=None, x0=None, seed=None,
                     t_max=None):
    """Sample the local equilibrium on the A boundary by loop recycling.

    Runs chain steps from the A boundary; loops returning to A are
    retained (their endpoints approximate the quasi-stationary law and
    their durations its conditional mean loop time), excursions reaching
    B are discarded and counted, and the walker retries from its last
    boundary point.  The first ``burn_in`` loops (default 10% of the
    budget) are excluded from the statistics.
    """
    rng = stream_rng(system.seed if seed is None else seed, 3)
    x = system.boundary_start_a if x0 is None else x0
    if x is None:
        raise ConfigError("no start point available on the A boundary")
    if burn_in is None:
        burn_in = int(0.1 * n_loops)

    endpoints = []
    restarts = []
    durations = []
    retained = discarded = timed_out = 0
    current = _as_restart(x)
    for loop in range(int(n_loops)):
        sample, hit, next_restart = _chain_step(system, current, rng,
                                                t_max=t_max)
        if sample is None:
            timed_out += 1
            continue
        if sample.side == "B":
            discarded += 1
            continue
        retained += 1
        current = next_restart
        if loop >= burn_in:
            endpoints.append(sample.position)
            restarts.append(next_restart)
            durations.append(sample.elapsed_time)

    durations = np.array(durations)
    if durations.size:
        loop_mean = float(durations.mean())
        loop_se = float(durations.std(ddof=1) / math.sqrt(durations.size)) \
            if durations.size > 1 else 0.0
    else:
        loop_mean, loop_se = math.nan, math.nan
    return LoopSampleResult(endpoints, durations, loop_mean, loop_se,
                            int(n_loops), retained, discarded, timed_out,
                            int(burn_in), restarts)


class DiffusionChainDynamics:
    """One chain step of a diffusion as a recorded, branchable excursion.

    The reaction coordinate defaults to the surface level extended
    monotonically toward B (for one-dimensional systems, the position
    itself).  Used by the splitting estimator.
    """

    def __init__(self, system, xi=None, t_max=None):
        self.system = system
        if xi is None:
            if system.dimension == 1:
                xi = lambda x: float(x)
            else:
                xi = lambda x: float(system.level_sigma(x))
        self.xi = xi
        self.t_max = t_max

    def default_stop_level(self):
        start = self.system.boundary_start_b
        if start is None:
            raise ConfigError("system does not declare a B boundary point")
        return float(self.xi(start))

    def _wrap(self, path, times, crossed_flags, success):
        xi = np.array([self.xi(p) for p in path])
        return Trajectory(
            np.asarray(path, dtype=float), np.asarray(times, dtype=float),
            xi, np.asarray(crossed_flags, dtype=bool), bool(success),
        )

    def _run(self, state, offset, crossed, rng):
        """Record from ``state`` to the next boundary hit, tracking the
        surface-crossed flag; a timeout counts as a failed excursion.
        The recorded points are grid states (exactly resumable), plus a
        final localized boundary point; ``offset`` is the time credit
        inherited from the previous localized hit."""
        points, times, flags = [state], [offset], [bool(crossed)]
        if not crossed:
            sigma = _signed_sigma(self.system, state)
            hit, path1, times1 = integrate_to_hit(
                self.system, state, [sigma], t_max=self.t_max, rng=rng,
                record=True)
            points = list(path1)
            times = [offset + t for t in times1]
            if hit.status != "hit":
                flags = [False] * len(points)
                return self._wrap(points, times, flags, False)
            flags = [False] * (len(points) - 1) + [True]
            state = hit.state
        hit, path2, times2 = integrate_to_hit(
            self.system, state, ["A", "B"], t_max=self.t_max, rng=rng,
            record=True)
        base = times[-1]
        success = hit.status == "hit" and hit.target == 1
        if hit.status == "hit":
            # Keep grid states up to the crossing step, then end the
            # excursion at the localized boundary hit.
            points += list(path2[1:-1]) + [hit.point]
            times += [base + t for t in times2[1:-1]] + [base + hit.time]
            flags += [True] * (len(path2) - 1)
        else:
            points += list(path2[1:])
            times += [base + t for t in times2[1:]]
            flags += [True] * (len(path2) - 1)
        return self._wrap(points, times, flags, success)

    def simulate(self, start, rng):
        start = _as_restart(start)
        state = start.state
        if self.system.dimension > 1:
            state = np.asarray(state, dtype=float)
        else:
            state = float(state)
        return self._run(state, start.offset, False, rng)

    def resume(self, trajectory, index, rng):
        if index >= len(trajectory.points) - 1:
            # Terminal point: the excursion is already decided.
            return Trajectory(trajectory.points[-1:], np.zeros(1),
                              trajectory.xi[-1:], trajectory.crossed[-1:],
                              trajectory.success)
        point = trajectory.points[index]
        if self.system.dimension > 1:
            point = np.asarray(point, dtype=float)
        else:
            point = float(point)
        return self._run(point, 0.0, bool(trajectory.crossed[index]), rng)


def hill_qsd_estimator(system, n_loops, splitting, burn_in=None, seed=None,
                       xi=None, t_max=None, splitting_repeats=4):
    """Reaction time through the local-equilibrium decomposition.

    Combines loop recycling (mean loop duration and a sample of the
    quasi-stationary law on the A boundary), a splitting estimate of the
    rare escape probability, and the mean reactive duration:
    ``loop_mean * (1/p_hat - 1) + reactive_mean``.  The first term
    typically dominates.  Standard errors combine by the delta method;
    the splitting stage runs ``splitting_repeats`` independent times and
    uses the empirical spread (the single-run theoretical plug-in
    understates the genealogical correlations).

    Parameters
    ----------
    system : DiffusionSystem
    n_loops : int
        Loop-recycling budget.
    splitting : SplittingConfig or dict
        Splitting parameters; a dict is completed with the default
        reaction coordinate and stop level.
    splitting_repeats : int
        Independent splitting repetitions (empirical standard errors
        from their spread when at least two).
    """
    seed = system.seed if seed is None else seed
    loops = qsd_loop_sampler(system, n_loops, burn_in=burn_in, seed=seed,
                             t_max=t_max)
    if loops.endpoints:
        start_pool = loops.restart_states
        loop_mean, loop_se = loops.loop_mean, loops.loop_se
    elif loops.discarded == loops.n_loops and system.boundary_start_a is not None:
        # No metastability at all: every excursion escaped, the loop term
        # vanishes and excursions start from the boundary point itself.
        start_pool = [system.boundary_start_a]
        loop_mean, loop_se = 0.0, 0.0
    else:
        raise TooFewEvents("loop sampler retained no endpoint")

    if xi is None and isinstance(splitting, SplittingConfig):
        xi = splitting.reaction_coordinate
    if xi is None and isinstance(splitting, dict):
        xi = splitting.get("reaction_coordinate")
    dynamics = DiffusionChainDynamics(system, xi=xi, t_max=t_max)
    if isinstance(splitting, dict):
        cfg = dict(splitting)
        cfg.pop("reaction_coordinate", None)
        splitting_repeats = cfg.pop("repeats", splitting_repeats)
        cfg.setdefault("stop_level", dynamics.default_stop_level())
        cfg.setdefault("seed", seed + 1)
        splitting = SplittingConfig(**cfg)

    runs = []
    for repeat in range(max(1, int(splitting_repeats))):
        cfg_r = replace(splitting, seed=splitting.seed + 7919 * repeat)
        runs.append(ams_run(dynamics, start_pool, cfg_r))

    p_values = np.array([r.p_hat for r in runs])
    p_hat = float(p_values.mean())
    if not 0.0 < p_hat <= 1.0:
        raise TooFewEvents(f"splitting produced p_hat={p_hat}; no escape observed")
    reactive_values = np.array([r.reactive_mean for r in runs
                                if not math.isnan(r.reactive_mean)])
    if reactive_values.size == 0:
        raise TooFewEvents("no successful excursion across splitting repeats")
    reactive_mean = float(reactive_values.mean())
    if len(runs) >= 2:
        se_p = float(p_values.std(ddof=1) / math.sqrt(p_values.size))
        reactive_se = float(reactive_values.std(ddof=1)
                            / math.sqrt(reactive_values.size)) \
            if reactive_values.size >= 2 else runs[0].reactive_se
    else:
        se_p = p_hat * runs[0].log_p_hat_se
        reactive_se = runs[0].reactive_se

    loop_factor = 1.0 / p_hat - 1.0
    mean = loop_mean * loop_factor + reactive_mean
    variance = (
        (loop_factor * loop_se) ** 2
        + (loop_mean / p_hat ** 2 * se_p) ** 2
        + reactive_se ** 2
    )
    return ReactionTimeEstimate(
        mean=float(mean),
        std_error=math.sqrt(variance),
        n_events=sum(r.n_replicas for r in runs),
        method="hill_qsd",
        loop_mean=loop_mean,
        p_hat=p_hat,
        reactive_mean=reactive_mean,
        details={"loops": loops, "splitting": runs[0], "splitting_runs": runs},
    )


# ----------------------------------------------------------------------
# experiment configuration
# ----------------------------------------------------------------------

_SAFE_FUNCS = {name: getattr(math, name)
               for name in ("sqrt", "exp", "log", "sin", "cos", "tanh")}


def _compile_expr(expr, var="x"):
    code = compile(expr, "<config>", "eval")
    names = set(code.co_names) - set(_SAFE_FUNCS) - {var}
    if names:
        raise ConfigError(f"unknown names in expression {expr!r}: {sorted(names)}")

    def fn(x):
        return float(eval(code, {"__builtins__": {}},
                          {**_SAFE_FUNCS, var: float(x)}))

    return fn


def system_from_config(cfg):
    """Build a diffusion system from an experiment configuration mapping.

    Supports the bundled preset (``{"preset": "double_well_1d", ...}``)
    or a one-dimensional potential/drift expression with interval sets.
    Underdamped (position-velocity) dynamics are out of scope and
    rejected explicitly.
    """
    cfg = dict(cfg)
    kind = cfg.pop("dynamics", "overdamped")
    if kind in ("underdamped", "langevin", "kinetic"):
        raise ConfigError(
            "underdamped (position-velocity) dynamics are not supported by "
            "this package; only overdamped/elliptic diffusions are in scope"
        )
    if kind != "overdamped":
        raise ConfigError(f"unknown dynamics kind {kind!r}")

    preset = cfg.pop("preset", None)
    if preset == "double_well_1d":
        allowed = {"beta", "dt", "a_interval", "b_interval", "sigma_x",
                   "seed", "guard_radius", "t_max"}
        unknown = set(cfg) - allowed
        if unknown:
            raise ConfigError(f"unknown double_well_1d options: {sorted(unknown)}")
        return double_well_1d(**cfg)
    if preset == "entropic_switch_2d":
        return entropic_switch_2d(**cfg)
    if preset is not None:
        raise ConfigError(f"unknown preset {preset!r}")

    if "potential" in cfg:
        potential = _compile_expr(cfg.pop("potential"))
        h = 1e-6

        def drift(x):
            return -(potential(x + h) - potential(x - h)) / (2.0 * h)
    elif "drift" in cfg:
        drift = _compile_expr(cfg.pop("drift"))
    else:
        raise ConfigError("config needs a preset, potential, or drift")

    beta = float(cfg.pop("beta", 1.0))
    amplitude = math.sqrt(2.0 / beta)
    a_lo, a_hi = map(float, cfg.pop("A"))
    b_lo, b_hi = map(float, cfg.pop("B"))
    sigma_x = float(cfg.pop("sigma"))
    if not a_hi < sigma_x < b_lo:
        raise ConfigError("surface must separate the two sets")
    system = DiffusionSystem(
        dimension=1,
        drift=drift,
        diffusion=lambda x: amplitude,
        level_a=lambda x: max(a_lo - x, x - a_hi),
        level_b=lambda x: max(b_lo - x, x - b_hi),
        level_sigma=lambda x: x - sigma_x,
        dt=float(cfg.pop("dt", 1e-3)),
        seed=int(cfg.pop("seed", 0)),
        guard_radius=float(cfg.pop("guard_radius", 1e3)),
        t_max=float(cfg.pop("t_max", 1e7)),
        ellipticity_bounds=(2.0 / beta, 2.0 / beta),
        boundary_start_a=a_hi,
        boundary_start_b=b_lo,
        probe_points=(a_lo, a_hi, sigma_x, b_lo, b_hi),
        name="custom_1d",
    )
    if cfg:
        raise ConfigError(f"unknown configuration keys: {sorted(cfg)}")
    validate_geometry(system)
    return system
