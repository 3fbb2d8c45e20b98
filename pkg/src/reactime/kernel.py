"""Exact linear algebra for finite row-stochastic kernels split into two
metastable blocks.

A :class:`PartitionedKernel` holds a row-stochastic matrix whose states
are tagged ``A`` (source side) or ``B`` (sink side).  Everything in this
module is a pure function of the kernel: stationary and entrance
distributions, Poisson solves, quasi-stationary distributions of the
killed block, the return-process machinery behind the Hill identity, and
the relative-bias bound with its two timescales (worst one-step escape
probability versus relaxation time of the return process).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ComplexDominant,
    DegenerateKilling,
    EmptyPartitionSide,
    Extinct,
    InvariantViolation,
    NoAccess,
    NonStochasticRow,
    Reducible,
    SingularSystem,
    ZeroMean,
)
from .measures import DiscreteMeasure, condition_measure, tv_norm

ROW_SUM_TOL = 1e-9
IDENTITY_TOL = 1e-10
CONSISTENCY_TOL = 1e-9
POWER_ITERATION_THRESHOLD = 2000


# ----------------------------------------------------------------------
# kernel container
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionedKernel:
    """Row-stochastic kernel with states reordered so the A block leads.

    ``matrix`` is stored with the ``n_a`` A-states first, so the four
    blocks are genuine array views into one matrix, never copies.
    ``labels`` gives the state labels in stored order.
    """

    labels: tuple
    n_a: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_states(self):
        return self.matrix.shape[0]

    @property
    def n_b(self):
        return self.n_states - self.n_a

    @property
    def a_states(self):
        return range(self.n_a)

    @property
    def b_states(self):
        return range(self.n_a, self.n_states)

    # The four blocks are slices of the stored matrix (views).
    @property
    def k_a(self):
        return self.matrix[: self.n_a, : self.n_a]

    @property
    def k_ab(self):
        return self.matrix[: self.n_a, self.n_a:]

    @property
    def k_ba(self):
        return self.matrix[self.n_a:, : self.n_a]

    @property
    def k_b(self):
        return self.matrix[self.n_a:, self.n_a:]

    def escape_probabilities(self):
        """One-step probability of jumping to B, per A state."""
        return self.k_ab.sum(axis=1)

    def p_plus(self):
        """Worst-case one-step escape probability from A to B."""
        return float(self.escape_probabilities().max())

    def swapped(self):
        """The same kernel with the roles of A and B exchanged."""
        order = list(self.b_states) + list(self.a_states)
        matrix = self.matrix[np.ix_(order, order)]
        labels = tuple(self.labels[i] for i in order)
        return PartitionedKernel(labels, self.n_b, matrix)

    def state_index(self, label):
        return self.labels.index(label)

    def to_dict(self):
        """JSON-ready description (labels, partition, matrix)."""
        return {
            "labels": list(self.labels),
            "partition": {
                "A": [self.labels[i] for i in self.a_states],
                "B": [self.labels[i] for i in self.b_states],
            },
            "matrix": self.matrix.tolist(),
        }


_EXPR_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log}


def kernel_from_dict(data, params=None):
    """Build a kernel from its JSON description.

    The schema is ``{"labels": [...], "partition": {"A": [...], "B":
    [...]}, "matrix": [[...]]}``.  Matrix entries may be arithmetic
    expressions in the names declared under ``"parameters"``; ``params``
    overrides those defaults.
    """
    parameters = dict(data.get("parameters", {}))
    parameters.update(params or {})

    def entry(value):
        if isinstance(value, str):
            code = compile(value, "<kernel>", "eval")
            unknown = set(code.co_names) - set(parameters) - set(_EXPR_FUNCS)
            if unknown:
                raise ValueError(f"unknown names {sorted(unknown)} in {value!r}")
            return float(eval(code, {"__builtins__": {}},
                              {**_EXPR_FUNCS, **parameters}))
        return float(value)

    matrix = [[entry(v) for v in row] for row in data["matrix"]]
    return validate_kernel(matrix, data["partition"], labels=data.get("labels"))


def validate_kernel(raw_matrix, partition, labels=None):
    """Validate a raw transition matrix and build a partitioned kernel.

    Parameters
    ----------
    raw_matrix : (n, n) array_like
        Nonnegative matrix; every row must sum to one within 1e-9.
    partition : mapping
        ``{"A": [...], "B": [...]}`` with disjoint label (or index)
        lists covering all states.
    labels : sequence, optional
        State labels in the order of ``raw_matrix`` rows.  Defaults to
        ``0..n-1``.

    Returns
    -------
    PartitionedKernel

    Raises
    ------
    NonStochasticRow, EmptyPartitionSide, NoAccess
    """
    matrix = np.asarray(raw_matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("transition matrix must be square")
    n = matrix.shape[0]
    if np.any(matrix < 0):
        raise NonStochasticRow("transition matrix has negative entries")
    row_sums = matrix.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise NonStochasticRow(
            f"row {bad[0]} sums to {row_sums[bad[0]]!r}, not 1 within {ROW_SUM_TOL}"
        )

    if labels is None:
        labels = list(range(n))
    labels = list(labels)
    if len(labels) != n:
        raise ValueError("labels must match the matrix size")
    index_of = {label: i for i, label in enumerate(labels)}

    def resolve(side):
        out = []
        for item in partition[side]:
            if item in index_of:
                out.append(index_of[item])
            elif isinstance(item, int) and 0 <= item < n:
                out.append(item)
            else:
                raise ValueError(f"unknown state {item!r} in partition {side!r}")
        return out

    a_idx = resolve("A")
    b_idx = resolve("B")
    if not a_idx or not b_idx:
        raise EmptyPartitionSide("both partition sides must be nonempty")
    if set(a_idx) & set(b_idx):
        raise ValueError("partition sides must be disjoint")
    if set(a_idx) | set(b_idx) != set(range(n)):
        raise ValueError("partition must cover every state")

    order = list(a_idx) + list(b_idx)
    reordered = matrix[np.ix_(order, order)]
    kernel = PartitionedKernel(tuple(labels[i] for i in order), len(a_idx), reordered)

    # Accessibility: each side must be reachable from the other in one step.
    if kernel.k_ab.sum() <= 0.0:
        raise NoAccess("block A -> B is identically zero")
    if kernel.k_ba.sum() <= 0.0:
        raise NoAccess("block B -> A is identically zero")
    return kernel


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------

def _a_weights(kernel, measure):
    """Weights of a probability measure on the A block as a dense vector."""
    if isinstance(measure, DiscreteMeasure):
        vec = np.zeros(kernel.n_a)
        for i, w in zip(measure.support, measure.weights):
            if not 0 <= i < kernel.n_a:
                raise ValueError("measure support must lie in the A block")
            vec[i] += w
        return vec
    vec = np.asarray(measure, dtype=float)
    if vec.shape != (kernel.n_a,):
        raise ValueError("expected a weight vector over the A block")
    return vec.copy()


def _a_function(kernel, g):
    """Test function on the A block as a dense vector."""
    if callable(g):
        return np.array([float(g(kernel.labels[i])) for i in kernel.a_states])
    vec = np.asarray(g, dtype=float)
    if vec.shape != (kernel.n_a,):
        raise ValueError("expected a function vector over the A block")
    return vec


def _a_measure(kernel, weights, normalized=False):
    return DiscreteMeasure(tuple(kernel.a_states), np.maximum(weights, 0.0),
                           normalized=normalized)


def _solve_block(block, rhs, transpose=False):
    """Solve ``(I - block) x = rhs`` (or the transposed system)."""
    n = block.shape[0]
    system = np.eye(n) - block
    try:
        sol = scipy.linalg.solve(system.T if transpose else system, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"(I - block) is singular: {exc}") from None
    residual = (system.T if transpose else system) @ sol - rhs
    if np.max(np.abs(residual)) > 1e-8 * max(1.0, np.max(np.abs(rhs))):
        raise SingularSystem("(I - block) solve did not converge; the block "
                             "has no escape route")
    return sol


# ----------------------------------------------------------------------
# stationary and conditioned measures
# ----------------------------------------------------------------------

def stationary_distribution(kernel):
    """Unique stationary probability measure of the full kernel.

    Solves ``pi (K - I) = 0`` with the normalization constraint by a
    dense linear solve; kernels beyond 2000 states fall back to power
    iteration.  The kernel must be irreducible.

    Raises
    ------
    Reducible
        If the state graph is not strongly connected.
    """
    matrix = kernel.matrix
    n = kernel.n_states
    n_components, _ = connected_components(
        csr_matrix(matrix > 0), directed=True, connection="strong"
    )
    if n_components > 1:
        raise Reducible(f"kernel has {n_components} strongly connected components")

    if n > POWER_ITERATION_THRESHOLD:
        pi = _stationary_power(matrix)
    else:
        # Replace one equation of (K^T - I) x = 0 by the normalization.
        system = matrix.T - np.eye(n)
        system[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pi = scipy.linalg.solve(system, rhs)
        except scipy.linalg.LinAlgError:
            pi = _stationary_power(matrix)
        if np.any(pi < -1e-10):
            pi = _stationary_power(matrix)
    pi = np.maximum(pi, 0.0)
    pi = pi / pi.sum()
    residual = tv_norm(pi @ matrix - pi)
    if residual > 1e-11 * n:
        raise InvariantViolation(f"stationary residual {residual:.3e} too large")
    return DiscreteMeasure(tuple(range(n)), pi, normalized=True)


def _stationary_power(matrix, tol=1e-15, max_iter=10_000_000):
    n = matrix.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ matrix
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi


def stationary_conditioned_a(kernel):
    """Stationary measure conditioned to the A block, as an A-block vector."""
    pi0 = stationary_distribution(kernel)
    cond = condition_measure(pi0, kernel.a_states)
    return _a_weights(kernel, cond)


# ----------------------------------------------------------------------
# Poisson solves and hitting times
# ----------------------------------------------------------------------

def poisson_solve(kernel, g):
    """Solve ``(I - K_A) r = g`` on the A block.

    The solution is the expected accumulated value of ``g`` along the
    chain before it first enters B.

    Parameters
    ----------
    kernel : PartitionedKernel
    g : array_like or callable
        Test function on the A block.

    Returns
    -------
    ndarray
        ``r`` over the A states.
    """
    g_vec = _a_function(kernel, g)
    return _solve_block(kernel.k_a, g_vec)


def mean_hitting_time(kernel, from_measure):
    """Expected number of steps to reach B, started from ``from_measure``.

    Always at least ``1 / p_plus`` where ``p_plus`` is the worst
    one-step escape probability.
    """
    weights = _a_weights(kernel, from_measure)
    expected = float(weights @ poisson_solve(kernel, np.ones(kernel.n_a)))
    lower = 1.0 / kernel.p_plus()
    if expected < lower - 1e-9 * lower:
        raise InvariantViolation(
            f"mean hitting time {expected} below the lower bound {lower}"
        )
    return expected


def killed_conditional_law(kernel, mu, n):
    """Law of the chain after ``n`` surviving steps, plus survival probability.

    Returns the conditional law ``L(Y_n | T_B > n)`` started from ``mu``
    together with ``P_mu(T_B > n)``.

    Raises
    ------
    Extinct
        If the survival probability underflows below 1e-300.
    """
    weights = _a_weights(kernel, mu)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("initial measure must have positive mass")
    weights = weights / total
    survival = 1.0
    for _ in range(int(n)):
        weights = weights @ kernel.k_a
        step_mass = weights.sum()
        survival *= step_mass
        if survival < 1e-300 or step_mass <= 0.0:
            raise Extinct(f"survival probability underflowed after {n} steps")
        weights = weights / step_mass
    return _a_measure(kernel, weights, normalized=True), float(survival)


# ----------------------------------------------------------------------
# quasi-stationary distributions of the killed block
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class QsdRecord:
    """A quasi-stationary distribution of the killed A block.

    ``measure`` is the left eigenmeasure (a probability on A), ``theta``
    its eigenvalue, and ``p = 1 - theta`` the killing probability per
    step; the time to leave A from the QSD is geometric with parameter
    ``p``.  ``principal`` flags the eigenmeasure of largest ``theta``.
    """

    measure: DiscreteMeasure
    theta: float
    p: float
    principal: bool = False


def _check_qsd(kernel, weights, theta):
    residual = np.max(np.abs(weights @ kernel.k_a - theta * weights))
    if residual > IDENTITY_TOL:
        return None
    p = float(weights @ kernel.escape_probabilities())
    if abs(p - (1.0 - theta)) > IDENTITY_TOL:
        return None
    return p


def as_qsd(kernel, weights, principal=False):
    """Wrap a weight vector as a quasi-stationary distribution record.

    Raises
    ------
    InvariantViolation
        If the vector is not a left eigenmeasure of the killed block.
    """
    weights = _a_weights(kernel, weights)
    weights = weights / weights.sum()
    theta = float((weights @ kernel.k_a).sum())
    p = _check_qsd(kernel, weights, theta)
    if p is None or theta <= 0.0:
        raise InvariantViolation("vector is not a quasi-stationary distribution")
    return QsdRecord(_a_measure(kernel, weights, normalized=True), theta, p, principal)


def qsd_spectrum(kernel, clip=1e-10):
    """All quasi-stationary distributions of the killed A block.

    Runs a dense left eigendecomposition of the killed block and keeps
    every real eigenpair whose eigenvector can be scaled to a
    nonnegative probability vector (entries above ``-clip``, then
    clipped).  Records are sorted by decreasing eigenvalue; the first is
    flagged principal.  Several records are possible: the killed block
    may genuinely admit more than one quasi-stationary distribution.

    Raises
    ------
    DegenerateKilling
        If some state jumps to B with probability one.
    ComplexDominant
        If the dominant eigenvalue is not real.
    """
    k_a = kernel.k_a
    stay = k_a.sum(axis=1)
    if np.any(stay <= 0.0):
        state = int(np.argmin(stay))
        raise DegenerateKilling(
            f"state {kernel.labels[state]!r} leaves A with probability one"
        )

    values, vectors = scipy.linalg.eig(k_a.T)
    max_mod = np.abs(values).max()
    dominant = np.abs(np.abs(values) - max_mod) <= 1e-12 + 1e-12 * max_mod
    if not np.any(np.abs(values[dominant].imag) <= 1e-10 * (1.0 + max_mod)):
        raise ComplexDominant("dominant eigenvalue of the killed block is complex")

    records = []
    for value, vector in zip(values, vectors.T):
        if abs(value.imag) > 1e-10 * (1.0 + abs(value)):
            continue
        theta = float(value.real)
        if theta <= 0.0:
            continue
        vec = vector.real if np.max(np.abs(vector.imag)) <= 1e-10 else None
        if vec is None:
            continue
        total = vec.sum()
        if abs(total) < 1e-14 * np.abs(vec).max():
            continue
        vec = vec / total
        if vec.min() < -clip:
            continue
        vec = np.clip(vec, 0.0, None)
        vec = vec / vec.sum()
        p = _check_qsd(kernel, vec, theta)
        if p is None:
            continue
        if any(tv_norm(vec - r.measure.weights) < 1e-8 for r in records):
            continue
        records.append(QsdRecord(_a_measure(kernel, vec, normalized=True), theta, p))

    if not records:
        raise InvariantViolation("no nonnegative eigenmeasure found")
    records.sort(key=lambda r: -r.theta)
    records[0] = QsdRecord(records[0].measure, records[0].theta, records[0].p, True)
    return records


def principal_qsd(kernel):
    """The quasi-stationary distribution with the largest eigenvalue."""
    return qsd_spectrum(kernel)[0]


# ----------------------------------------------------------------------
# entrance process and return process
# ----------------------------------------------------------------------

def entrance_kernel(kernel):
    """Transition matrix of the process watched at re-entries into A.

    ``K_E = (I - K_A)^{-1} K_AB (I - K_B)^{-1} K_BA``; each row is the
    law of the next entrance point into A after an excursion through B.
    """
    first_leg = _solve_block(kernel.k_a, np.asarray(kernel.k_ab))
    second_leg = _solve_block(kernel.k_b, np.asarray(kernel.k_ba))
    k_e = first_leg @ second_leg
    row_err = np.max(np.abs(k_e.sum(axis=1) - 1.0))
    if row_err > IDENTITY_TOL:
        raise InvariantViolation(f"entrance kernel rows sum to 1 +- {row_err:.3e}")
    return k_e


def entrance_distribution(kernel, side="A"):
    """Stationary law of the entrance points into one side at equilibrium.

    For side A this is ``pi0|A (I - K_A)`` normalized by the stationary
    flux into B.  The result is verified to be stationary for the
    entrance kernel and to invert back to the conditioned stationary
    measure.
    """
    if side == "B":
        swapped = kernel.swapped()
        nu = entrance_distribution(swapped, side="A")
        return DiscreteMeasure(
            tuple(kernel.n_a + i for i in nu.support), nu.weights, normalized=True
        )
    pi0_a = stationary_conditioned_a(kernel)
    flux = float(pi0_a @ kernel.escape_probabilities())
    if flux <= 0.0:
        raise NoAccess("stationary flux from A to B vanishes")
    nu_e = pi0_a @ (np.eye(kernel.n_a) - kernel.k_a) / flux

    k_e = entrance_kernel(kernel)
    if tv_norm(nu_e @ k_e - nu_e) > IDENTITY_TOL:
        raise InvariantViolation("entrance distribution is not stationary for "
                                 "the entrance kernel")
    # Inverse relation: conditioned stationary = nu_e (I-K_A)^{-1} / E[T_B].
    occupation = _solve_block(kernel.k_a, nu_e, transpose=True)
    back = occupation / occupation.sum()
    if tv_norm(back - pi0_a) > IDENTITY_TOL:
        raise InvariantViolation("entrance distribution does not invert back to "
                                 "the conditioned stationary measure")
    return _a_measure(kernel, nu_e, normalized=True)


def return_stationary(kernel, pi):
    """Stationary law of the process re-injected through ``pi`` after
    each visit to B.

    ``R(pi) = pi (I - K_A)^{-1} / E_pi[T_B]``.  Verified to be invariant
    for the return kernel ``K_A + (escape) x pi``.
    """
    pi_vec = _a_weights(kernel, pi)
    occupation = _solve_block(kernel.k_a, pi_vec, transpose=True)
    expected_time = occupation.sum()
    r_pi = occupation / expected_time

    return_kernel = kernel.k_a + np.outer(kernel.escape_probabilities(), pi_vec)
    if tv_norm(r_pi @ return_kernel - r_pi) > IDENTITY_TOL:
        raise InvariantViolation("return-process stationary law failed its "
                                 "fixed-point check")
    return _a_measure(kernel, r_pi, normalized=True)


def hill_identity(kernel, pi, f):
    """Both sides of the occupation identity for the return process.

    The left side is the expected accumulated value of ``f`` before
    reaching B started from ``pi``; the right side divides the
    stationary average of ``f`` under the return process by the
    stationary flux into B.  The two are computed through independent
    solves and must agree to 1e-9 relative.

    Returns
    -------
    dict
        ``{"lhs": float, "rhs": float, "residual": float,
        "relative_residual": float}``
    """
    pi_vec = _a_weights(kernel, pi)
    f_vec = _a_function(kernel, f)

    lhs = float(pi_vec @ poisson_solve(kernel, f_vec))

    r_pi = return_stationary(kernel, pi_vec).weights
    flux = float(r_pi @ kernel.escape_probabilities())
    rhs = float(r_pi @ f_vec) / flux

    residual = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    relative = residual / scale if residual else 0.0
    if relative > CONSISTENCY_TOL and residual > CONSISTENCY_TOL:
        raise InvariantViolation(
            f"occupation identity failed: lhs={lhs!r} rhs={rhs!r}"
        )
    return {"lhs": lhs, "rhs": rhs, "residual": residual,
            "relative_residual": relative}


# ----------------------------------------------------------------------
# relaxation times and the bias bound
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Relaxation:
    """Relaxation operator of the QSD-return process and its two norms.

    ``h_q`` maps a test function to the accumulated deviation of the
    return process from the QSD average.  ``t_qe`` measures it from the
    entrance distribution, ``t_q`` uniformly over starting points.
    """

    h_q: np.ndarray
    t_qe: float
    t_q: float


def hq_relaxation(kernel, qsd, nu_e=None):
    """Relaxation times toward a QSD, seen from the entrance law and
    uniformly.

    ``H_Q = (I - K_A)^{-1}(I - 1 x nu_Q)``; ``t_qe`` is the L1 norm of
    ``nu_E H_Q`` and ``t_q`` the maximal row L1 norm.  ``t_qe <= t_q``
    always, and ``nu_Q H_Q = 0``.
    """
    nu_q = _a_weights(kernel, qsd.measure if isinstance(qsd, QsdRecord) else qsd)
    n_a = kernel.n_a
    centered = np.eye(n_a) - np.outer(np.ones(n_a), nu_q)
    h_q = _solve_block(kernel.k_a, centered)

    if tv_norm(nu_q @ h_q) > IDENTITY_TOL:
        raise InvariantViolation("QSD does not annihilate its relaxation operator")

    if nu_e is None:
        nu_e = entrance_distribution(kernel)
    nu_e_vec = _a_weights(kernel, nu_e)
    t_qe = tv_norm(nu_e_vec @ h_q)
    t_q = float(np.abs(h_q).sum(axis=1).max())
    if t_qe > t_q + IDENTITY_TOL:
        raise InvariantViolation("entrance relaxation time exceeds the uniform one")
    return Relaxation(h_q, float(t_qe), t_q)


@dataclass(frozen=True)
class BiasReport:
    """Exact relative bias of the QSD shortcut and its a-priori bound.

    ``exact_bias`` compares the accumulated-``f`` functional started
    from the entrance law with the one started from the QSD.  The bound
    ``(p+ t_qe / (1 - p+ t_qe)) (1 + |f|_inf / |pi0|A f|)`` holds
    whenever ``valid`` (i.e. ``p_plus * t_qe < 1``).
    """

    p_plus: float
    t_qe: float
    t_q: float
    exact_bias: float
    bound: float
    valid: bool
    test_function: tuple


def bias_report(kernel, qsd, f, nu_e=None):
    """Exact relative biasing error and the timescale-separation bound.

    Parameters
    ----------
    kernel : PartitionedKernel
    qsd : QsdRecord
        The quasi-stationary distribution used as a re-injection law.
    f : array_like or callable
        Test function on the A block.
    nu_e : DiscreteMeasure, optional
        Entrance distribution, recomputed if omitted.

    Raises
    ------
    ZeroMean
        If the conditioned stationary average of ``f`` vanishes.
    """
    f_vec = _a_function(kernel, f)
    pi0_a = stationary_conditioned_a(kernel)
    flux_pi = float(pi0_a @ kernel.escape_probabilities())
    flux_q = qsd.p
    pi0_f = float(pi0_a @ f_vec)
    nu_q_f = float(qsd.measure.weights @ f_vec)
    if abs(pi0_f) <= 1e-14 * max(1.0, np.abs(f_vec).max()):
        raise ZeroMean("test function averages to zero under the conditioned "
                       "stationary measure; relative quantities are undefined")
    exact = abs(1.0 - flux_pi * nu_q_f / (flux_q * pi0_f))

    relaxation = hq_relaxation(kernel, qsd, nu_e=nu_e)
    p_plus = kernel.p_plus()
    product = p_plus * relaxation.t_qe
    valid = product < 1.0
    if valid:
        bound = product / (1.0 - product) * (1.0 + np.abs(f_vec).max() / abs(pi0_f))
        if exact > bound + IDENTITY_TOL:
            raise InvariantViolation(
                f"exact bias {exact} exceeds its bound {bound}"
            )
    else:
        bound = math.inf
    return BiasReport(p_plus, relaxation.t_qe, relaxation.t_q, exact, bound,
                      valid, tuple(float(v) for v in f_vec))


# ----------------------------------------------------------------------
# ergodicity scan
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ErgodicityScan:
    """Decay of the conditioned law toward a QSD, with a fitted envelope.

    ``distances[n]`` is the worst total-variation distance between the
    law conditioned on survival for ``n`` steps and the QSD.  ``rho`` is
    fitted on the tail, ``alpha`` inflated so ``alpha * rho**n``
    dominates the whole observed sequence.  ``eta_sum`` is the partial
    sum of the distances (an empirical stand-in for the summed-decay
    constant).  ``bound`` combines the direct geometric-series bound
    with a stopping-time bound; when the envelope certifies the decay,
    ``t_q`` must not exceed it.
    """

    distances: np.ndarray
    alpha: float
    rho: float
    bound: float
    eta_sum: float
    t_q: float
    certified: bool
    non_convergent: bool
    bound_holds: bool


def _envelope_bound(alpha, rho):
    """min of alpha/(1-rho) and the stopping-time bound over cutoffs."""
    direct = alpha / (1.0 - rho)
    best = direct
    for steps in range(1, 20000):
        if 2.0 * steps >= best:
            break
        c = alpha * rho ** steps
        if c >= 1.0:
            continue
        best = min(best, 2.0 * steps / (1.0 - c))
    return best


def ergodicity_scan(kernel, qsd, n_max, nu_e=None):
    """Scan the conditioned-law decay toward a QSD and fit its envelope.

    Computes ``d_n = max_x || L^x(Y_n | T_B > n) - nu_Q ||`` for
    ``n = 0..n_max``, fits ``rho`` by least squares on the tail (last
    half, at least five points), inflates ``alpha`` to make the envelope
    pointwise, and evaluates the resulting upper bound on the uniform
    relaxation time.  A sequence that fails to decay (several QSDs, for
    instance) is reported with ``non_convergent=True`` and no fit.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    nu_q = qsd.measure.weights
    n_a = kernel.n_a

    rows = np.eye(n_a)
    distances = np.empty(n_max + 1)
    distances[0] = np.abs(rows - nu_q).sum(axis=1).max()
    for n in range(1, n_max + 1):
        rows = rows @ kernel.k_a
        rows /= rows.sum(axis=1, keepdims=True)
        distances[n] = np.abs(rows - nu_q).sum(axis=1).max()

    relaxation = hq_relaxation(kernel, qsd, nu_e=nu_e)
    eta_sum = float(distances.sum())
    zero_floor = 1e-280

    if distances.max() <= IDENTITY_TOL:
        # Degenerate block (single state): already at the QSD.
        return ErgodicityScan(distances, 0.0, 0.0, 0.0, eta_sum,
                              relaxation.t_q, True, False, relaxation.t_q <= 1e-9)

    # Distances below ~1e-9 suffer cancellation against near-unit
    # components; fit and inflate the envelope on the trusted range only.
    trust_floor = 1e-9
    trusted = np.flatnonzero(distances > trust_floor)
    trusted_fit = trusted[trusted >= 1]
    tail_start = max(1, n_max // 2)
    tail = trusted_fit[trusted_fit >= tail_start]
    if tail.size < 5:
        tail = trusted_fit[-5:]

    if tail.size < 2:
        if distances[n_max] <= trust_floor:
            # Converged to the QSD within a few observed steps.
            alpha = float(distances.max())
            certified = bool(np.all(distances[1:] <= trust_floor))
            bound = _envelope_bound(alpha, 0.0)
            return ErgodicityScan(distances, alpha, 0.0, bound, eta_sum,
                                  relaxation.t_q, certified, False,
                                  relaxation.t_q <= bound + 1e-9)
        return ErgodicityScan(distances, math.nan, math.nan, math.inf, eta_sum,
                              relaxation.t_q, False, True, False)

    decayed = distances[n_max] <= trust_floor or \
        distances[tail[-1]] < distances[tail[0]] * (1.0 - 1e-9)
    if not decayed:
        return ErgodicityScan(distances, math.nan, math.nan, math.inf, eta_sum,
                              relaxation.t_q, False, True, False)

    slope, _ = np.polyfit(tail, np.log(distances[tail]), 1)
    rho = float(np.exp(slope))
    if not 0.0 < rho < 1.0:
        return ErgodicityScan(distances, math.nan, rho, math.inf, eta_sum,
                              relaxation.t_q, False, True, False)

    # Inflate the prefactor so the envelope dominates every trusted d_n.
    log_ratio = np.log(distances[trusted]) - trusted * math.log(rho)
    alpha = float(np.exp(log_ratio.max()))
    envelope = alpha * np.exp(np.arange(n_max + 1) * math.log(rho))
    certified = bool(np.all(distances <= envelope + 1e-12))
    bound = _envelope_bound(alpha, rho)
    return ErgodicityScan(distances, alpha, rho, bound, eta_sum, relaxation.t_q,
                          certified, False, relaxation.t_q <= bound + 1e-9)


# ----------------------------------------------------------------------
# reassembling the stationary law from both entrance laws
# ----------------------------------------------------------------------

def reconstruct_pi0(kernel, nu_e_a, nu_e_b):
    """Rebuild the stationary law from the two entrance distributions.

    Combines the expected occupation measures of both excursion types,
    normalized by the total round-trip time.  Must agree with
    :func:`stationary_distribution` within 1e-9 total variation.
    """
    nu_a = _a_weights(kernel, nu_e_a)
    occupation_a = _solve_block(kernel.k_a, nu_a, transpose=True)

    if isinstance(nu_e_b, DiscreteMeasure):
        nu_b = np.zeros(kernel.n_b)
        for i, w in zip(nu_e_b.support, nu_e_b.weights):
            nu_b[i - kernel.n_a] += w
    else:
        nu_b = np.asarray(nu_e_b, dtype=float)
    occupation_b = _solve_block(kernel.k_b, nu_b, transpose=True)

    total_time = occupation_a.sum() + occupation_b.sum()
    pi0 = np.concatenate([occupation_a, occupation_b]) / total_time

    reference = stationary_distribution(kernel)
    mismatch = tv_norm(pi0 - reference.weights)
    if mismatch > CONSISTENCY_TOL:
        raise InvariantViolation(
            f"reconstructed stationary law off by {mismatch:.3e} in TV"
        )
    return DiscreteMeasure(tuple(range(kernel.n_states)), np.maximum(pi0, 0.0),
                           normalized=True)
