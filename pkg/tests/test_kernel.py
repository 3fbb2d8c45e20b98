import math

import numpy as np
import pytest

from conftest import random_partitioned_kernel
from reactime.errors import (
    ComplexDominant,
    DegenerateKilling,
    Extinct,
    NoAccess,
    NonStochasticRow,
    Reducible,
    ZeroMean,
)
from reactime.kernel import (
    PartitionedKernel,
    bias_report,
    entrance_distribution,
    entrance_kernel,
    ergodicity_scan,
    hill_identity,
    hq_relaxation,
    kernel_from_dict,
    killed_conditional_law,
    mean_hitting_time,
    poisson_solve,
    principal_qsd,
    qsd_spectrum,
    reconstruct_pi0,
    return_stationary,
    stationary_conditioned_a,
    stationary_distribution,
    validate_kernel,
)
from reactime.measures import tv_norm
from reactime.toys import (
    graph_entrance_closed_form,
    toy_kernel_a1,
    toy_kernel_a2,
    toy_kernel_a2_qsd_closed_form,
    toy_kernel_graph,
)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

def test_validate_rejects_absorbing_identity():
    with pytest.raises(NoAccess):
        validate_kernel(np.eye(2), {"A": [0], "B": [1]})


def test_validate_accepts_first_toy():
    kernel = toy_kernel_a1(0.1, 0.5, 0.2)
    assert kernel.n_a == 2 and kernel.n_b == 1


def test_validate_rejects_nonstochastic_row():
    matrix = [[0.5, 0.6, 0.0], [0.3, 0.3, 0.4], [0.2, 0.2, 0.6]]
    with pytest.raises(NonStochasticRow):
        validate_kernel(matrix, {"A": [0, 1], "B": [2]})


def test_validate_rejects_empty_side():
    from reactime.errors import EmptyPartitionSide
    with pytest.raises(EmptyPartitionSide):
        validate_kernel(np.full((2, 2), 0.5), {"A": [0, 1], "B": []})


def test_blocks_are_views_not_copies():
    kernel = toy_kernel_a1()
    assert kernel.k_a.base is kernel.matrix
    assert kernel.k_ab.base is kernel.matrix
    # row-wise block consistency: (I - K_A) 1 == K_AB 1
    lhs = np.ones(kernel.n_a) - kernel.k_a @ np.ones(kernel.n_a)
    rhs = kernel.k_ab @ np.ones(kernel.n_b)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_kernel_from_dict_with_parameters():
    spec = {
        "labels": [1, 2, 3],
        "partition": {"A": [1, 2], "B": [3]},
        "parameters": {"p": 0.2},
        "matrix": [["1-p", 0, "p"], [0.5, 0.5, 0], [0, 0.2, 0.8]],
    }
    kernel = kernel_from_dict(spec, params={"p": 0.1})
    assert kernel.matrix[0, 0] == pytest.approx(0.9)


# ----------------------------------------------------------------------
# stationary distribution
# ----------------------------------------------------------------------

def test_stationary_second_toy_closed_form():
    a, b = 0.2, 0.02
    kernel = toy_kernel_a2(a, b)
    expected = np.array([5 * b, 7 * a, 6 * b]) / (7 * a + 11 * b)
    pi0 = stationary_distribution(kernel)
    assert np.abs(pi0.weights - expected).max() < 1e-12


def test_stationary_doubly_stochastic_is_uniform():
    matrix = np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1, 2]})
    pi0 = stationary_distribution(kernel)
    assert np.abs(pi0.weights - 1.0 / 3.0).max() < 1e-12


def test_stationary_matches_long_power_iteration(rng):
    # Oracle: one million plain power-iteration steps.
    kernel = random_partitioned_kernel(rng, n_min=20, n_max=20)
    pi = np.full(20, 0.05)
    for _ in range(1_000_000):
        pi = pi @ kernel.matrix
        pi /= pi.sum()
    pi0 = stationary_distribution(kernel)
    assert tv_norm(pi0.weights @ kernel.matrix - pi0.weights) < 1e-12
    assert tv_norm(pi0.weights - pi) < 1e-10


def test_reducible_kernel_rejected():
    matrix = np.array([
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.5, 0.5],
    ])
    kernel = validate_kernel(matrix, {"A": [0, 2], "B": [1, 3]})
    with pytest.raises(Reducible):
        stationary_distribution(kernel)


def test_conditioned_stationary_second_toy():
    kernel = toy_kernel_a2(0.2, 0.02)
    pi0_a = stationary_conditioned_a(kernel)
    assert np.abs(pi0_a - np.array([1.0, 14.0]) / 15.0).max() < 1e-12


# ----------------------------------------------------------------------
# Poisson solves and hitting times
# ----------------------------------------------------------------------

def test_poisson_solve_gives_expected_visits():
    p, q = 0.1, 0.5
    kernel = toy_kernel_a1(p, q, 0.2)
    r = poisson_solve(kernel, np.ones(2))
    nu_e = entrance_distribution(kernel)
    assert nu_e.weights @ r == pytest.approx(1 / p + 1 / q, abs=1e-10)


def test_poisson_solve_zero_function():
    kernel = toy_kernel_a1()
    assert np.all(poisson_solve(kernel, np.zeros(2)) == 0.0)


def test_poisson_solve_matches_neumann_series(rng):
    # Oracle: truncated Neumann sum of the killed block.
    kernel = random_partitioned_kernel(rng, n_min=20, n_max=20)
    g = rng.uniform(-1.0, 1.0, kernel.n_a)
    total = np.zeros_like(g)
    term = g.copy()
    power = np.eye(kernel.n_a)
    while np.abs(power).sum(axis=1).max() >= 1e-14:
        total += power @ g
        power = power @ kernel.k_a
    assert np.abs(poisson_solve(kernel, g) - total).max() < 1e-10


def test_mean_hitting_time_first_toy():
    p, q = 0.1, 0.5
    kernel = toy_kernel_a1(p, q, 0.2)
    nu_e = entrance_distribution(kernel)
    assert mean_hitting_time(kernel, nu_e) == pytest.approx(12.0, abs=1e-10)
    assert mean_hitting_time(kernel, np.array([1.0, 0.0])) == pytest.approx(1 / p)


def test_mean_hitting_time_monte_carlo_oracle(rng):
    # Oracle: simulate the chain from a fixed state on a 10-state kernel.
    kernel = random_partitioned_kernel(rng, n_min=10, n_max=10)
    start = np.zeros(kernel.n_a)
    start[0] = 1.0
    exact = mean_hitting_time(kernel, start)
    assert exact >= 1.0 / kernel.p_plus() - 1e-9

    cumulative = kernel.matrix.cumsum(axis=1)
    n_a, samples = kernel.n_a, 4000
    times = np.empty(samples)
    for k in range(samples):
        state, steps = 0, 0
        while state < n_a:
            state = int(np.searchsorted(cumulative[state], rng.random()))
            steps += 1
        times[k] = steps
    se = times.std(ddof=1) / math.sqrt(samples)
    assert abs(times.mean() - exact) < 3 * se


def test_killed_conditional_law_point_mass_stays():
    kernel = toy_kernel_a1(0.1, 0.5, 0.2)
    for n in (1, 5, 40):
        law, survival = killed_conditional_law(kernel, np.array([1.0, 0.0]), n)
        assert np.abs(law.weights - [1.0, 0.0]).max() < 1e-12
        assert survival == pytest.approx(0.9 ** n, abs=1e-12)


def test_killed_conditional_law_zero_steps_returns_input():
    kernel = toy_kernel_a1()
    mu = np.array([0.3, 0.7])
    law, survival = killed_conditional_law(kernel, mu, 0)
    assert np.abs(law.weights - mu).max() < 1e-12
    assert survival == 1.0


def test_killed_conditional_law_closed_form():
    # Explicit two-mode formula for the lower-triangular killed block.
    p, q, n = 0.1, 0.5, 5
    kernel = toy_kernel_a1(p, q, 0.2)
    law, survival = killed_conditional_law(kernel, np.array([0.0, 1.0]), n)
    c = q / (q - p)
    weights = np.array([c * ((1 - p) ** n - (1 - q) ** n), (1 - q) ** n])
    expected_survival = weights.sum()
    assert survival == pytest.approx(expected_survival, abs=1e-12)
    assert np.abs(law.weights - weights / expected_survival).max() < 1e-12


def test_killed_conditional_law_extinction():
    matrix = np.array([[1e-3, 0.0, 1.0 - 1e-3],
                       [0.0, 1e-3, 1.0 - 1e-3],
                       [0.3, 0.3, 0.4]])
    kernel = validate_kernel(matrix, {"A": [0, 1], "B": [2]})
    with pytest.raises(Extinct):
        killed_conditional_law(kernel, np.array([0.5, 0.5]), 200)


# ----------------------------------------------------------------------
# quasi-stationary distributions
# ----------------------------------------------------------------------

def test_qsd_unique_when_escape_is_slower():
    kernel = toy_kernel_a1(0.1, 0.5, 0.2)
    records = qsd_spectrum(kernel)
    assert len(records) == 1
    assert np.abs(records[0].measure.weights - [1.0, 0.0]).max() < 1e-10
    assert records[0].theta == pytest.approx(0.9, abs=1e-12)
    assert records[0].principal


def test_two_qsds_in_the_reversed_regime():
    p, q = 0.5, 0.1
    records = qsd_spectrum(toy_kernel_a1(p, q, 0.2))
    assert len(records) == 2
    principal, secondary = records
    assert principal.principal and not secondary.principal
    assert np.abs(principal.measure.weights - [q / p, 1 - q / p]).max() < 1e-10
    assert principal.theta == pytest.approx(1 - q, abs=1e-12)
    assert np.abs(secondary.measure.weights - [1.0, 0.0]).max() < 1e-10
    assert secondary.theta == pytest.approx(1 - p, abs=1e-12)


def test_qsd_second_toy_closed_form():
    a, b = 0.2, 0.02
    records = qsd_spectrum(toy_kernel_a2(a, b))
    assert len(records) == 1
    weights, p = toy_kernel_a2_qsd_closed_form(a, b)
    assert np.abs(records[0].measure.weights - weights).max() < 1e-10
    assert records[0].p == pytest.approx(p, abs=1e-10)


def test_degenerate_killing_detected():
    matrix = np.array([[0.0, 0.0, 1.0], [0.4, 0.4, 0.2], [0.3, 0.3, 0.4]])
    kernel = validate_kernel(matrix, {"A": [0, 1], "B": [2]})
    with pytest.raises(DegenerateKilling):
        qsd_spectrum(kernel)


def test_complex_dominant_guard():
    # Invalid (signed) block built directly, bypassing validation: the
    # guard exists to catch modeling errors of exactly this kind.
    matrix = np.array([
        [0.5, -0.3, 0.8],
        [0.3, 0.5, 0.2],
        [0.3, 0.3, 0.4],
    ])
    kernel = PartitionedKernel((0, 1, 2), 2, matrix)
    with pytest.raises(ComplexDominant):
        qsd_spectrum(kernel)


def test_geometric_killing_from_qsd():
    kernel = toy_kernel_a2(0.2, 0.02)
    record = principal_qsd(kernel)
    for n in (1, 7, 50):
        _, survival = killed_conditional_law(kernel, record.measure, n)
        assert survival == pytest.approx((1 - record.p) ** n, abs=1e-10)


# ----------------------------------------------------------------------
# entrance process
# ----------------------------------------------------------------------

def test_entrance_kernel_graph_chain_exact():
    # Frozen from exact rational arithmetic and confirmed by direct
    # Monte Carlo of the entrance process (see the asymmetry test): the
    # entries share the closed-form numerators with denominator 1393.
    kernel = toy_kernel_graph(1.0, 2.0, 3.0, 4.0)
    k_e = entrance_kernel(kernel)
    assert k_e[2, 1] == pytest.approx(114.0 / 1393.0, abs=1e-12)
    assert k_e[1, 2] == pytest.approx(78.0 / 1393.0, abs=1e-12)
    assert np.abs(k_e.sum(axis=1) - 1.0).max() < 1e-12


def test_entrance_kernel_symmetric_when_weights_match():
    k_e = entrance_kernel(toy_kernel_graph(2.0, 2.0, 3.0, 4.0))
    assert abs(k_e[2, 1] - k_e[1, 2]) < 1e-12


def test_entrance_kernel_single_entry_point():
    matrix = np.array([[0.7, 0.3], [0.4, 0.6]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1]})
    assert entrance_kernel(kernel) == pytest.approx(np.array([[1.0]]))


def test_entrance_kernel_monte_carlo_oracle(rng):
    # Oracle: tally the entrance process of a simulated chain.
    kernel = random_partitioned_kernel(rng, n_min=6, n_max=6)
    k_e = entrance_kernel(kernel)
    assert np.abs(k_e.sum(axis=1) - 1.0).max() < 1e-10

    cumulative = kernel.matrix.cumsum(axis=1)
    n_a = kernel.n_a
    counts = np.zeros((n_a, n_a))
    state, previous_entry, seen_b = 0, None, False
    for _ in range(300_000):
        state = int(np.searchsorted(cumulative[state], rng.random()))
        if state >= n_a:
            seen_b = True
        elif seen_b:
            if previous_entry is not None:
                counts[previous_entry, state] += 1
            previous_entry, seen_b = state, False
    empirical = counts / counts.sum(axis=1, keepdims=True)
    rows = counts.sum(axis=1)
    worst = np.max(np.abs(empirical - k_e))
    assert worst < 4.0 * math.sqrt(0.25 / rows.min())


def test_entrance_distribution_golden_values():
    assert np.abs(entrance_distribution(toy_kernel_a1()).weights
                  - [0.0, 1.0]).max() < 1e-12
    assert np.abs(entrance_distribution(toy_kernel_a2()).weights
                  - [0.5, 0.5]).max() < 1e-12
    c, d = 3.0, 4.0
    nu = entrance_distribution(toy_kernel_graph(1.0, 2.0, c, d))
    assert np.abs(nu.weights - np.array([2 * d, c, c]) / (2 * (c + d))).max() < 1e-12


def test_entrance_distribution_b_side():
    kernel = toy_kernel_a2(0.2, 0.02)
    nu_b = entrance_distribution(kernel, side="B")
    assert nu_b.support == (2,)
    assert nu_b.weights[0] == pytest.approx(1.0)


# ----------------------------------------------------------------------
# return process and occupation identity
# ----------------------------------------------------------------------

def test_return_of_entrance_is_conditioned_stationary():
    kernel = toy_kernel_a2(0.2, 0.02)
    nu_e = entrance_distribution(kernel)
    r = return_stationary(kernel, nu_e)
    assert tv_norm(r.weights - stationary_conditioned_a(kernel)) < 1e-10


def test_qsd_is_return_fixed_point():
    kernel = toy_kernel_a2(0.2, 0.02)
    record = principal_qsd(kernel)
    r = return_stationary(kernel, record.measure)
    assert tv_norm(r.weights - record.measure.weights) < 1e-10


def test_return_single_state_source():
    matrix = np.array([[0.7, 0.3], [0.4, 0.6]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1]})
    r = return_stationary(kernel, np.array([1.0]))
    assert r.weights[0] == pytest.approx(1.0)


def test_hill_identity_mean_time_from_qsd():
    p = 0.1
    kernel = toy_kernel_a1(p, 0.5, 0.2)
    record = principal_qsd(kernel)
    out = hill_identity(kernel, record.measure.weights, np.ones(2))
    assert out["lhs"] == pytest.approx(1 / p, abs=1e-10)
    assert out["rhs"] == pytest.approx(1 / p, abs=1e-10)


def test_hill_identity_zero_function():
    kernel = toy_kernel_a1()
    out = hill_identity(kernel, np.array([0.5, 0.5]), np.zeros(2))
    assert out["lhs"] == 0.0 and out["rhs"] == 0.0 and out["residual"] == 0.0


def test_hill_identity_random_kernels(rng):
    for _ in range(100):
        kernel = random_partitioned_kernel(rng, n_min=3, n_max=20)
        pi = rng.dirichlet(np.ones(kernel.n_a))
        f = rng.uniform(-2.0, 2.0, kernel.n_a)
        out = hill_identity(kernel, pi, f)
        assert out["relative_residual"] < 1e-9


# ----------------------------------------------------------------------
# relaxation operator and bias bound
# ----------------------------------------------------------------------

def test_relaxation_first_toy_closed_form():
    p, q = 0.1, 0.5
    kernel = toy_kernel_a1(p, q, 0.2)
    record = principal_qsd(kernel)
    rel = hq_relaxation(kernel, record)
    expected = np.array([[0.0, 0.0], [-1.0 / q, 1.0 / q]])
    assert np.abs(rel.h_q - expected).max() < 1e-12
    assert rel.t_qe == pytest.approx(2 / q, abs=1e-10)
    assert rel.t_q == pytest.approx(2 / q, abs=1e-10)


def test_relaxation_reversed_regime():
    p, q = 0.5, 0.1
    kernel = toy_kernel_a1(p, q, 0.2)
    principal = qsd_spectrum(kernel)[0]
    rel = hq_relaxation(kernel, principal)
    assert rel.t_qe == pytest.approx(2 * q / p ** 2, abs=1e-10)
    assert rel.t_q == pytest.approx(2 / p * max(1 - q / p, q / p), abs=1e-10)


def test_relaxation_second_toy_closed_form():
    a, b = 0.2, 0.02
    kernel = toy_kernel_a2(a, b)
    _, p = toy_kernel_a2_qsd_closed_form(a, b)
    rel = hq_relaxation(kernel, principal_qsd(kernel))
    expected = (12 * a * b - p * (7 * a + 5 * b)) / (6 * a * b * (a - b))
    assert rel.t_qe == pytest.approx(expected, abs=1e-10)


def test_bias_report_first_toy():
    p, q = 0.1, 0.5
    report = bias_report(toy_kernel_a1(p, q, 0.2), principal_qsd(toy_kernel_a1(p, q, 0.2)),
                         np.ones(2))
    assert report.exact_bias == pytest.approx(p / (p + q), abs=1e-10)
    assert report.bound == pytest.approx(4 * p / (q - 2 * p), abs=1e-10)
    assert report.valid and report.t_qe <= report.t_q


def test_bias_zero_for_single_state_source():
    matrix = np.array([[0.7, 0.3], [0.4, 0.6]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1]})
    report = bias_report(kernel, principal_qsd(kernel), np.ones(1))
    assert report.exact_bias == pytest.approx(0.0, abs=1e-12)
    assert report.t_qe == pytest.approx(0.0, abs=1e-12)


def test_bias_second_toy_flux_ratio():
    a, b = 0.2, 0.02
    kernel = toy_kernel_a2(a, b)
    record = principal_qsd(kernel)
    report = bias_report(kernel, record, np.ones(2))
    flux = 12 * a * b / (7 * a + 5 * b)
    assert flux == pytest.approx(0.032, abs=1e-12)
    assert report.exact_bias == pytest.approx(flux / record.p - 1.0, abs=1e-10)


def test_bias_zero_mean_function_raises():
    kernel = toy_kernel_a2(0.2, 0.02)
    pi0_a = stationary_conditioned_a(kernel)
    f = np.array([1.0, -pi0_a[0] / pi0_a[1]])
    with pytest.raises(ZeroMean):
        bias_report(kernel, principal_qsd(kernel), f)


# ----------------------------------------------------------------------
# ergodicity scan
# ----------------------------------------------------------------------

def test_ergodicity_scan_first_toy_envelope():
    p, q = 0.1, 0.5
    kernel = toy_kernel_a1(p, q, 0.2)
    scan = ergodicity_scan(kernel, principal_qsd(kernel), 200)
    assert not scan.non_convergent and scan.certified
    assert scan.rho == pytest.approx((1 - q) / (1 - p), abs=1e-6)
    assert scan.alpha == pytest.approx(2.0, abs=1e-8)
    assert scan.bound_holds
    # explicit decay formula for the distance from the slow state
    ratio = (1 - p) / (1 - q)
    c = q / (q - p)
    for n in (1, 10, 50):
        expected = 2.0 / (1.0 + c * (ratio ** n - 1.0))
        assert scan.distances[n] == pytest.approx(expected, abs=1e-10)


def test_ergodicity_scan_single_state_source():
    matrix = np.array([[0.7, 0.3], [0.4, 0.6]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1]})
    scan = ergodicity_scan(kernel, principal_qsd(kernel), 10)
    assert np.all(scan.distances == 0.0)
    assert scan.bound == 0.0 and scan.certified


def test_ergodicity_scan_second_toy_asymptotics():
    a = 0.2
    b = a / 100.0
    kernel = toy_kernel_a2(a, b)
    scan = ergodicity_scan(kernel, principal_qsd(kernel), 600)
    lam1 = 1 - (4 * a + 3 * b - math.sqrt(16 * a ** 2 + 9 * b ** 2)) / 2
    lam2 = 1 - (4 * a + 3 * b + math.sqrt(16 * a ** 2 + 9 * b ** 2)) / 2
    assert scan.rho == pytest.approx(lam2 / lam1, abs=1e-8)
    assert scan.rho == pytest.approx(1 - 4 * a, abs=0.02)
    assert scan.alpha == pytest.approx(8.0 / 3.0, abs=0.15)


def test_ergodicity_scan_non_convergent_with_wrong_qsd():
    # Second (non-principal) quasi-stationary law in the two-QSD regime:
    # the conditioned law converges to the principal one instead.
    kernel = toy_kernel_a1(0.5, 0.1, 0.2)
    secondary = qsd_spectrum(kernel)[1]
    scan = ergodicity_scan(kernel, secondary, 80)
    assert scan.non_convergent
    assert math.isnan(scan.alpha)


# ----------------------------------------------------------------------
# stationary reconstruction
# ----------------------------------------------------------------------

def test_reconstruct_second_toy():
    kernel = toy_kernel_a2(0.2, 0.02)
    pi0 = reconstruct_pi0(kernel,
                          entrance_distribution(kernel),
                          entrance_distribution(kernel, side="B"))
    expected = stationary_distribution(kernel)
    assert tv_norm(pi0.weights - expected.weights) < 1e-9


def test_reconstruct_symmetric_two_state():
    matrix = np.array([[0.5, 0.5], [0.5, 0.5]])
    kernel = validate_kernel(matrix, {"A": [0], "B": [1]})
    pi0 = reconstruct_pi0(kernel,
                          entrance_distribution(kernel),
                          entrance_distribution(kernel, side="B"))
    assert np.abs(pi0.weights - 0.5).max() < 1e-12


def test_reconstruct_random_kernels(rng):
    for _ in range(100):
        kernel = random_partitioned_kernel(rng, n_min=3, n_max=15)
        pi0 = reconstruct_pi0(kernel,
                              entrance_distribution(kernel),
                              entrance_distribution(kernel, side="B"))
        reference = stationary_distribution(kernel)
        assert tv_norm(pi0.weights - reference.weights) < 1e-9
