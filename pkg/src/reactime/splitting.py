"""Adaptive multilevel splitting for the rare one-step escape event.

The estimator targets the probability that one excursion from the source
boundary (through the separating surface) reaches the sink set rather
than returning, together with the mean duration of the successful
excursions.  Replicas carry whole excursion trajectories scored by the
maximum of a reaction coordinate; each round kills every replica tied at
the lowest score, rebranches them from surviving trajectories strictly
above that level, and multiplies the estimator by the surviving
fraction.  Killing all tied replicas keeps the estimator unbiased for
discrete-valued scores as well.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSuccess
from .measures import DiscreteMeasure


def stream_rng(seed, *path):
    """Deterministic counter-based generator keyed by (seed, *path).

    Independent streams for distinct paths make results reproducible
    regardless of execution order or worker count.
    """
    key = np.random.SeedSequence([int(seed) & 0x7FFFFFFF, *[int(p) for p in path]])
    return np.random.Generator(np.random.Philox(key))


# ----------------------------------------------------------------------
# trajectories
# ----------------------------------------------------------------------

@dataclass
class Trajectory:
    """One excursion: points, cumulative times, scores, terminal status.

    ``xi[i]`` is the reaction coordinate at ``points[i]``; ``times[0]``
    is 0.  ``crossed[i]`` records whether the separating surface was
    reached by index ``i`` (dynamics-specific bookkeeping used when a
    branch resumes mid-excursion).
    """

    points: np.ndarray
    times: np.ndarray
    xi: np.ndarray
    crossed: np.ndarray
    success: bool

    @property
    def score(self):
        return float(self.xi.max())

    @property
    def duration(self):
        return float(self.times[-1])

    def branch_index(self, level):
        """First index strictly above ``level``; None if never above."""
        above = np.flatnonzero(self.xi > level)
        return int(above[0]) if above.size else None

    def spliced(self, index, continuation):
        """Copy up to ``index`` and append a resumed continuation.

        ``continuation.points[0]`` must coincide with ``points[index]``.
        """
        return Trajectory(
            np.concatenate([self.points[: index + 1], continuation.points[1:]]),
            np.concatenate([self.times[: index + 1],
                            self.times[index] + continuation.times[1:]]),
            np.concatenate([self.xi[: index + 1], continuation.xi[1:]]),
            np.concatenate([self.crossed[: index + 1], continuation.crossed[1:]]),
            continuation.success,
        )


# ----------------------------------------------------------------------
# configuration and result records
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SplittingConfig:
    """Parameters of one splitting run.

    ``reaction_coordinate`` may be None when the dynamics provides its
    own scores.  ``stop_level`` marks the sink: an excursion succeeds
    once its score reaches it.  ``k_min`` replicas are killed per round
    (more when tied).
    """

    n_replicas: int
    stop_level: float
    k_min: int = 1
    reaction_coordinate: object = None
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n_replicas < 2:
            raise ValueError("need at least two replicas")
        if not 1 <= self.k_min < self.n_replicas:
            raise ValueError("k_min must satisfy 1 <= k_min < n_replicas")


@dataclass(frozen=True)
class SplittingResult:
    """Outcome of one splitting run.

    ``p_hat`` is the product of the per-round surviving fractions times
    the final success fraction; ``log_p_hat_se`` the idealized
    large-sample standard error of ``log p_hat``.  ``reactive_mean`` and
    ``reactive_se`` summarize the durations of the successful
    excursions.  ``extinction`` flags a collapsed run (all replicas tied
    at the same score); the estimate is then partial.
    """

    p_hat: float
    log_p_hat_se: float
    reactive_mean: float
    reactive_se: float
    n_iterations: int
    extinction: bool
    factors: tuple
    final_success_fraction: float
    trace: tuple = field(repr=False)
    n_replicas: int = 0

    def p_hat_se(self):
        """Delta-method standard error of ``p_hat`` itself."""
        return self.p_hat * self.log_p_hat_se

    def as_dict(self):
        return {
            "p_hat": self.p_hat,
            "log_p_hat_se": self.log_p_hat_se,
            "reactive_mean": self.reactive_mean,
            "reactive_se": self.reactive_se,
            "n_iterations": self.n_iterations,
            "extinction": self.extinction,
            "final_success_fraction": self.final_success_fraction,
            "n_replicas": self.n_replicas,
        }


# ----------------------------------------------------------------------
# the splitting loop
# ----------------------------------------------------------------------

def _initial_points(qsd_samples, n, rng):
    if isinstance(qsd_samples, DiscreteMeasure):
        support = np.asarray(qsd_samples.support)
        draws = rng.choice(support.size, size=n, p=qsd_samples.weights)
        return [int(support[i]) for i in draws]
    samples = list(qsd_samples)
    if not samples:
        raise ValueError("qsd_samples must be nonempty")
    return [samples[int(i)] for i in rng.integers(len(samples), size=n)]


def ams_run(dynamics, qsd_samples, cfg):
    """Estimate the one-step escape probability by adaptive splitting.

    Parameters
    ----------
    dynamics : object
        Provides ``simulate(start, rng) -> Trajectory`` and
        ``resume(trajectory, index, rng) -> Trajectory`` (continuation
        whose first point repeats ``trajectory.points[index]``).
    qsd_samples : sequence or DiscreteMeasure
        Pool of start points on the source boundary (resampled with
        replacement), or an explicit start distribution.
    cfg : SplittingConfig

    Returns
    -------
    SplittingResult
    """
    n = cfg.n_replicas
    selection = stream_rng(cfg.seed, 0xA5)
    branch_counter = np.zeros(n, dtype=int)

    starts = _initial_points(qsd_samples, n, selection)
    replicas = [dynamics.simulate(starts[r], stream_rng(cfg.seed, r, 0))
                for r in range(n)]
    start_levels = [float(t.xi[0]) for t in replicas]
    if max(start_levels) >= cfg.stop_level:
        raise ValueError("stop_level must exceed every initial replica level")

    factors = []
    trace = []
    extinction = False
    iterations = 0
    while iterations < cfg.max_iterations:
        scores = np.array([t.score for t in replicas])
        if np.all(scores >= cfg.stop_level):
            break
        level = float(np.partition(scores, cfg.k_min - 1)[cfg.k_min - 1])
        if level >= cfg.stop_level:
            break
        killed = [r for r in range(n) if scores[r] <= level]
        survivors = [r for r in range(n) if scores[r] > level]
        if not survivors:
            extinction = True
            break
        factors.append(1.0 - len(killed) / n)
        trace.append({"iteration": iterations, "level": level,
                      "factor": factors[-1], "survivors": len(survivors),
                      "total_weight": float(n)})
        for r in killed:
            parent = replicas[int(survivors[selection.integers(len(survivors))])]
            index = parent.branch_index(level)
            branch_counter[r] += 1
            rng = stream_rng(cfg.seed, r, branch_counter[r])
            continuation = dynamics.resume(parent, index, rng)
            replicas[r] = parent.spliced(index, continuation)
        iterations += 1

    scores = np.array([t.score for t in replicas])
    success_fraction = float(np.mean(scores >= cfg.stop_level))
    p_hat = float(np.prod(factors)) * success_fraction if factors else success_fraction
    killed_total = sum(round(n * (1.0 - f)) for f in factors)
    log_se = math.sqrt(killed_total) / n

    successful = [t for t in replicas if t.score >= cfg.stop_level and t.success]
    if successful:
        stats = reactive_stats([t.duration for t in successful])
        reactive_mean, reactive_se = stats["reactive_mean"], stats["reactive_se"]
    else:
        reactive_mean, reactive_se = math.nan, math.nan

    return SplittingResult(
        p_hat=p_hat,
        log_p_hat_se=log_se,
        reactive_mean=reactive_mean,
        reactive_se=reactive_se,
        n_iterations=iterations,
        extinction=extinction,
        factors=tuple(factors),
        final_success_fraction=success_fraction,
        trace=tuple(trace),
        n_replicas=n,
    )


def reactive_stats(durations, weights=None, bins=20):
    """Weighted summary of successful-excursion durations.

    Returns the weighted mean, its standard error (0, flagged undefined,
    for a single sample) and a histogram for reporting.

    Raises
    ------
    NoSuccess
        If no duration is supplied.
    """
    durations = np.asarray(list(durations), dtype=float)
    if durations.size == 0:
        raise NoSuccess("no successful excursion to summarize")
    if weights is None:
        weights = np.ones_like(durations)
    else:
        weights = np.asarray(list(weights), dtype=float)
    weights = weights / weights.sum()

    mean = float(weights @ durations)
    if durations.size > 1:
        variance = float(weights @ (durations - mean) ** 2)
        n_eff = 1.0 / float(weights @ weights)
        se = math.sqrt(variance / max(n_eff - 1.0, 1.0))
        se_defined = True
    else:
        se = 0.0
        se_defined = False
    counts, edges = np.histogram(durations, bins=min(bins, max(1, durations.size)))
    return {
        "reactive_mean": mean,
        "reactive_se": se,
        "se_defined": se_defined,
        "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
    }


# ----------------------------------------------------------------------
# discrete surrogate dynamics
# ----------------------------------------------------------------------

class KernelStepDynamics:
    """One step of a finite kernel viewed as a two-point excursion.

    Used to calibrate the splitting estimator against exact linear
    algebra: the escape event is a single jump into the B block, and the
    reaction coordinate defaults to 1 on B and to an increasing ramp on
    the A states.
    """

    def __init__(self, kernel, xi=None):
        self.kernel = kernel
        if xi is None:
            n_a = kernel.n_a
            levels = np.ones(kernel.n_states)
            levels[:n_a] = (1.0 + np.arange(n_a)) / (n_a + 1.0)
            xi = levels.__getitem__
        self.xi = xi

    @property
    def stop_level(self):
        return 1.0

    def _terminal(self, state):
        return Trajectory(
            np.array([state]), np.zeros(1), np.array([float(self.xi(state))]),
            np.array([True]), bool(state >= self.kernel.n_a),
        )

    def simulate(self, start, rng):
        row = self.kernel.matrix[start]
        nxt = int(rng.choice(self.kernel.n_states, p=row))
        return Trajectory(
            np.array([start, nxt]),
            np.array([0.0, 1.0]),
            np.array([float(self.xi(start)), float(self.xi(nxt))]),
            np.array([False, True]),
            bool(nxt >= self.kernel.n_a),
        )

    def resume(self, trajectory, index, rng):
        state = int(trajectory.points[index])
        if trajectory.crossed[index]:
            return self._terminal(state)
        return self.simulate(state, rng)
