"""Acceptance gate: one test per criterion, at full sample sizes.

Each test runs the corresponding check from qheat.verify, prints its
pass/fail line (visible with ``pytest -s`` or on failure) and asserts
both the outcome and, where the criterion states one, the runtime
budget. ``qheat verify`` runs the same checks from the command line.
"""

from qheat import verify


def run(check, budget=None):
    result = check(seed=verify.DEFAULT_SEED, quick=False)
    print(result.line())
    assert result.passed, result.line()
    if budget is not None:
        assert result.elapsed < budget, f"{result.name} took {result.elapsed:.1f}s (budget {budget}s)"
    return result


def test_criterion_01_jarzynski_identity():
    # Thermal initial state: the exponential heat average is 1 for every
    # waiting-time model, exactly on the enumeration route and within
    # three standard errors on the Monte Carlo route.
    run(verify.check_jarzynski, budget=60.0)


def test_criterion_02_unitality():
    # The averaged measurement channel fixes the identity for random
    # Hamiltonians and bases in dimensions 2, 3 and 4.
    run(verify.check_unitality, budget=10.0)


def test_criterion_03_triple_agreement():
    # Closed forms, exact enumeration and Monte Carlo coincide on the
    # reference parameter sets (five measurements, unit splitting and
    # inverse temperature, bimodal disorder 0.01/3 with weight 0.3).
    run(verify.check_triple_agreement, budget=300.0)


def test_criterion_04_thermal_crossing():
    # The exponential average is affine in the initial population and all
    # mixing angles cross 1 at the thermal population (about 0.1192).
    run(verify.check_thermal_crossing)


def test_criterion_05_mean_heat_structure():
    # Exact zeros at half filling and at commuting measurement bases;
    # annealed transfer dominates quenched on the parameter grid; the
    # peak over populations equals the zero-filling value and never
    # exceeds half the splitting.
    run(verify.check_mean_heat_structure, budget=30.0)


def test_criterion_06_limit_slope():
    # The population sensitivity of the exponential average approaches
    # its infinite-count value by one hundred measurements, while at zero
    # mixing it stays exactly zero for every count (the discontinuity).
    run(verify.check_limit_slope)


def test_criterion_07_small_tau_quenched_rule():
    # Rapid-measurement regime: quenched disorder beats the fixed
    # protocol exactly when the waiting-time variance is positive, in
    # every non-degenerate grid case, consistent with the exact
    # alternating-channel margin.
    run(verify.check_small_tau_criterion, budget=10.0)


def test_criterion_08_resonance_structure():
    # Degenerate disorder pins the peak mean heat to the frozen-dynamics
    # floor exactly at even-pi splitting-mean products (full evolution
    # periods); odd-pi products are maximal-hop points, and genuine
    # disorder keeps the peak strictly above the floor across the band.
    run(verify.check_resonance)


def test_criterion_09_moment_consistency():
    # Derivative-route moments agree with distribution-route moments to
    # 1e-6 relative for orders 1 through 4 across random configurations.
    run(verify.check_moment_consistency, budget=30.0)


def test_criterion_10_cli_determinism():
    # A seeded simulate run produces byte-identical CSV when repeated.
    run(verify.check_cli_determinism)
