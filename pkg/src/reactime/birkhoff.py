"""Certified quasi-stationary distributions through projective-metric
contraction.

A strictly positive sub-Markov block contracts the projective metric on
positive measures.  When a two-sided envelope ``s(x) pi(dy) <= K(x, dy)
<= R s(x) pi(dy)`` exists, the contraction factor is at most
``tanh(delta / 4)`` with ``delta <= 2 ln R``, which turns normalized
power iteration into a fixed-point scheme with a provable
total-variation error bound at every step.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoCertificate, NonPositiveIterate, ReactimeError, ZeroMeasure
from .measures import DiscreteMeasure, tv_norm

ENVELOPE_SLACK = 1e-12


def _block(kernel_or_block):
    """Sub-Markov block as an array; accepts a partitioned kernel."""
    block = getattr(kernel_or_block, "k_a", kernel_or_block)
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise ValueError("expected a square sub-Markov block")
    if np.any(block < 0) or np.any(block.sum(axis=1) > 1.0 + 1e-9):
        raise ValueError("block must be nonnegative with row sums at most one")
    return block


def _positive_vector(measure, n=None):
    if isinstance(measure, DiscreteMeasure):
        vec = measure.dense(n if n is not None else 1 + max(measure.support))
    else:
        vec = np.asarray(measure, dtype=float)
    if np.any(vec < 0):
        raise ZeroMeasure("measure must be nonnegative")
    if vec.sum() <= 0.0:
        raise ZeroMeasure("measure must be nonzero")
    return vec


# ----------------------------------------------------------------------
# projective metric
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HilbertGeometry:
    """Sandwich constants of one positive vector against another.

    ``c_lower`` is the largest ``c`` with ``c * lam <= nu`` and
    ``c_upper`` the smallest ``C`` with ``nu <= C * lam``; ``theta =
    ln(c_upper / c_lower)`` is the projective distance, infinite when
    the supports differ.
    """

    c_lower: float
    c_upper: float
    theta: float


def hilbert_metric(lam, nu):
    """Projective distance between two nonzero nonnegative vectors.

    Scaling either argument leaves the distance unchanged, and it
    vanishes exactly on proportional pairs.

    Raises
    ------
    ZeroMeasure
        If either vector is zero or has negative entries.
    """
    lam_vec = _positive_vector(lam)
    nu_vec = _positive_vector(nu, n=lam_vec.size)
    if lam_vec.size != nu_vec.size:
        raise ValueError("vectors must have equal length")

    lam_support = lam_vec > 0.0
    ratios = nu_vec[lam_support] / lam_vec[lam_support]
    c_lower = float(ratios.min())
    if np.any(nu_vec[~lam_support] > 0.0):
        c_upper = math.inf
    else:
        c_upper = float(ratios.max())

    if c_upper == math.inf or c_lower == 0.0:
        theta = math.inf
    else:
        theta = math.log(c_upper / c_lower)
        theta = max(theta, 0.0)
    return HilbertGeometry(c_lower, c_upper, theta)


# ----------------------------------------------------------------------
# two-sided envelope
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TwoSidedCertificate:
    """Concrete envelope ``s(x) pi <= K(x, .) <= R s(x) pi``.

    ``delta_bound = 2 ln R`` bounds the projective diameter of the image
    of the block, and ``rho = tanh(delta_bound / 4)`` the contraction
    factor of normalized iteration.
    """

    s: np.ndarray
    pi: np.ndarray
    ratio: float
    delta_bound: float
    rho: float


def two_sided_constants(kernel_or_block):
    """Build a two-sided envelope from columnwise minima.

    The reference measure is the normalized vector of columnwise minima,
    ``s(x)`` the smallest entry-to-reference ratio in row ``x``, and the
    ratio ``R`` the largest envelope violation.  A zero entry in any
    column that is not identically zero makes a strictly positive
    envelope impossible.

    Raises
    ------
    NoCertificate
        If the block has such a zero entry (callers may fall back to
        uncertified power iteration).
    """
    block = _block(kernel_or_block)
    if np.any(block.sum(axis=1) <= 0.0):
        raise NoCertificate("a row of the block is identically zero")

    col_min = block.min(axis=0)
    col_max = block.max(axis=0)
    spoiled = (col_min <= 0.0) & (col_max > 0.0)
    if np.any(spoiled):
        j = int(np.flatnonzero(spoiled)[0])
        raise NoCertificate(
            f"column {j} has a zero entry but is not identically zero; "
            "no strictly positive envelope exists"
        )

    support = col_min > 0.0
    pi = np.zeros_like(col_min)
    pi[support] = col_min[support] / col_min[support].sum()

    s = (block[:, support] / pi[support]).min(axis=1)
    ratio = float((block[:, support] / (s[:, None] * pi[support])).max())
    ratio = max(ratio, 1.0)

    lower = s[:, None] * pi[None, :]
    upper = ratio * lower
    if np.any(block < lower - ENVELOPE_SLACK) or np.any(block > upper + ENVELOPE_SLACK):
        raise NoCertificate("envelope construction failed its own sandwich check")

    delta = 2.0 * math.log(ratio)
    return TwoSidedCertificate(s, pi, ratio, delta, math.tanh(delta / 4.0))


# ----------------------------------------------------------------------
# certified fixed-point iteration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CertifiedQsd:
    """Fixed point of normalized iteration with its error certificate.

    ``tv_error_bound`` is the proven total-variation distance to the
    exact fixed point after ``iterations`` steps; ``bound_trace`` holds
    the bound at every step for plotting.  Uncertified results (no
    envelope) carry an infinite bound.
    """

    measure: DiscreteMeasure
    eigenvalue: float
    iterations: int
    tv_error_bound: float
    bound_trace: tuple
    certified: bool
    certificate: TwoSidedCertificate | None = None

    def as_dict(self, labels=None):
        measure = self.measure.as_dict(labels)
        return {
            "measure": measure,
            "eigenvalue": self.eigenvalue,
            "iterations": self.iterations,
            "tv_error_bound": None if math.isinf(self.tv_error_bound)
            else self.tv_error_bound,
            "bound_trace": list(self.bound_trace),
            "certified": self.certified,
        }


def _normalized_step(vec, block):
    image = vec @ block
    mass = float(image.sum())
    if not math.isfinite(mass) or mass <= 0.0:
        raise NonPositiveIterate("iteration produced a non-positive vector")
    return image / mass, mass


def certified_qsd(kernel_or_block, lam0=None, target_tv=1e-8, max_iterations=100_000):
    """Quasi-stationary distribution with a proven total-variation bound.

    Iterates ``nu -> nu K / (nu K 1)`` and stops once the contraction
    bound ``(theta1 / (1 - rho)) exp(theta1 / (1 - rho)) rho^n`` falls
    below ``target_tv``, where ``theta1`` is the projective distance
    between the first two iterates and ``rho`` comes from the two-sided
    envelope.

    Raises
    ------
    NoCertificate
        If no strictly positive envelope exists.
    NonPositiveIterate
        On numerical underflow of the iteration.
    """
    block = _block(kernel_or_block)
    certificate = two_sided_constants(block)
    rho = certificate.rho

    if lam0 is None:
        lam0 = np.full(block.shape[0], 1.0 / block.shape[0])
    current = _positive_vector(lam0, n=block.shape[0])
    current = current / current.sum()

    first, mass = _normalized_step(current, block)
    theta1 = hilbert_metric(first, current).theta
    if math.isinf(theta1):
        # The start vector has mismatched support; one step lands inside
        # the positive cone, so measure the contraction from there.
        current = first
        first, mass = _normalized_step(current, block)
        theta1 = hilbert_metric(first, current).theta
    scale = theta1 / (1.0 - rho)
    prefactor = scale * math.exp(scale)

    bound_trace = [prefactor]
    iterations = 0
    while bound_trace[-1] > target_tv:
        if iterations >= max_iterations:
            raise ReactimeError(
                f"certified iteration did not reach {target_tv} within "
                f"{max_iterations} steps (rho={rho})"
            )
        current, _ = _normalized_step(current, block)
        iterations += 1
        bound_trace.append(prefactor * rho ** iterations)

    eigenvalue = float((current @ block).sum())
    return CertifiedQsd(
        DiscreteMeasure(tuple(range(block.shape[0])), current, normalized=True),
        float(eigenvalue),
        iterations,
        float(bound_trace[-1]),
        tuple(bound_trace),
        True,
        certificate,
    )


def uncertified_qsd(kernel_or_block, lam0=None, tol=1e-13, max_iterations=1_000_000):
    """Plain normalized power iteration with residual-based stopping.

    Fallback for blocks with zero entries, where no envelope exists.
    The result carries no certificate: ``tv_error_bound`` is infinite.
    """
    block = _block(kernel_or_block)
    if lam0 is None:
        lam0 = np.full(block.shape[0], 1.0 / block.shape[0])
    current = _positive_vector(lam0, n=block.shape[0])
    current = current / current.sum()

    eigenvalue = 0.0
    for iteration in range(1, max_iterations + 1):
        nxt, eigenvalue = _normalized_step(current, block)
        residual = tv_norm(current @ block - eigenvalue * current)
        current = nxt
        if residual <= tol:
            break
    else:
        raise ReactimeError(f"power iteration did not converge within "
                            f"{max_iterations} steps")
    return CertifiedQsd(
        DiscreteMeasure(tuple(range(block.shape[0])), current, normalized=True),
        float(eigenvalue),
        iteration,
        math.inf,
        (),
        False,
        None,
    )


# ----------------------------------------------------------------------
# contraction audit
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionAudit:
    """Worst observed contraction ratio against the certified factor."""

    max_ratio: float
    contraction_factor: float
    n_pairs: int
    n_skipped: int


def contraction_audit(kernel_or_block, trials=1000, seed=0):
    """Check the projective contraction factor on random vector pairs.

    Draws random nonnegative pairs (some with zeroed entries), skips
    pairs at zero or infinite distance, and returns the worst ratio of
    image distance to input distance.  With a certificate the ratio must
    stay below ``tanh(delta / 4)``; without one the audit uses the
    trivial factor 1.
    """
    block = _block(kernel_or_block)
    try:
        factor = two_sided_constants(block).rho
    except NoCertificate:
        factor = 1.0

    rng = np.random.default_rng(seed)
    n = block.shape[0]
    max_ratio = 0.0
    used = 0
    skipped = 0
    for _ in range(int(trials)):
        lam = rng.exponential(size=n)
        nu = rng.exponential(size=n)
        if n > 1 and rng.random() < 0.15:
            lam[rng.integers(n)] = 0.0
        theta = hilbert_metric(lam, nu).theta
        if not 0.0 < theta < math.inf:
            skipped += 1
            continue
        image_theta = hilbert_metric(lam @ block, nu @ block).theta
        max_ratio = max(max_ratio, image_theta / theta)
        used += 1
    return ContractionAudit(max_ratio, factor, used, skipped)
