"""Tests for the two-point measurement engine."""

import itertools
import math

import numpy as np
import pytest

from qheat import engine, tls
from qheat.disorder import Annealed, DiscreteWaitingDist, Fixed, Quenched
from qheat.engine import (
    HeatDistribution,
    ProtocolConfig,
    characteristic_function,
    empirical_distribution,
    exact_distribution,
    heat_moment,
    jarzynski_estimate,
    run_trajectory,
    sample_heats,
    sample_heats_chunk,
    unitality_residual,
)
from qheat.exceptions import EnumerationTooLargeError
from qheat.operators import (
    DensityMatrix,
    MeasurementBasis,
    OutcomeSequence,
    measurement_sequence_operator,
    spectral_decompose,
)
from qheat.verify import random_basis, random_hermitian


def bimodal(tau1=0.01, tau2=3.0, p1=0.3):
    return DiscreteWaitingDist.bimodal(tau1, tau2, p1)


def tls_config(a_sq=0.25, c1=0.3, m=3, model=None, beta=1.0, seed=0, energy=1.0):
    p = tls.TwoLevelParams(energy=energy, a_sq=a_sq, excited_pop=c1, n_meas=m, beta=beta)
    return tls.to_protocol_config(p, model or Fixed(0.7), seed=seed)


def energy_basis_config(m=4, seed=0):
    h = spectral_decompose(np.diag([-1.0, 1.0]))
    return ProtocolConfig(
        h=h,
        basis=MeasurementBasis.energy_basis(h),
        rho0=DensityMatrix.thermal(h, 1.0),
        model=Fixed(0.9),
        beta=1.0,
        seed=seed,
        m_count=m,
    )


class TestProtocolConfig:
    def test_requires_exactly_one_schedule(self):
        h = spectral_decompose(np.diag([-1.0, 1.0]))
        basis = MeasurementBasis.energy_basis(h)
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            ProtocolConfig(h=h, basis=basis, rho0=rho, model=Fixed(1.0))
        with pytest.raises(ValueError):
            ProtocolConfig(
                h=h, basis=basis, rho0=rho, model=Fixed(1.0), m_count=3, total_time=2.0
            )

    def test_rejects_dimension_mismatch(self):
        h = spectral_decompose(np.diag([-1.0, 0.0, 1.0]))
        basis = MeasurementBasis.energy_basis(spectral_decompose(np.diag([-1.0, 1.0])))
        with pytest.raises(ValueError):
            ProtocolConfig(
                h=h,
                basis=basis,
                rho0=DensityMatrix.maximally_mixed(3),
                model=Fixed(1.0),
                m_count=2,
            )


class TestRunTrajectory:
    def test_energy_basis_gives_zero_heat(self):
        config = energy_basis_config()
        rng = np.random.default_rng(1)
        for _ in range(50):
            rec = run_trajectory(config, rng)
            assert rec.q == 0.0
            assert rec.m == rec.n

    def test_record_is_consistent(self):
        config = tls_config(m=5, model=Annealed(bimodal()))
        rng = np.random.default_rng(2)
        rec = run_trajectory(config, rng)
        assert len(rec.ks) == 5
        assert len(rec.taus) == 5
        assert rec.q == config.h.eigenvalues[rec.m] - config.h.eigenvalues[rec.n]
        assert set(np.unique(rec.taus)).issubset({0.01, 3.0})

    def test_fixed_total_time_counts(self):
        config = tls_config(model=Fixed(1.0))
        config = ProtocolConfig(
            h=config.h,
            basis=config.basis,
            rho0=config.rho0,
            model=Fixed(1.0),
            beta=1.0,
            total_time=5.0,
        )
        rng = np.random.default_rng(3)
        rec = run_trajectory(config, rng)
        assert len(rec.ks) == 5

    def test_heat_support_is_energy_gaps(self):
        config = tls_config(m=4, model=Quenched(bimodal()))
        rng = np.random.default_rng(4)
        gaps = {
            float(b - a)
            for a in config.h.eigenvalues
            for b in config.h.eigenvalues
        }
        for _ in range(100):
            assert run_trajectory(config, rng).q in gaps


class TestSampling:
    def test_chunk_partition_contract(self):
        config = tls_config(m=4, model=Annealed(bimodal()), seed=11)
        whole = sample_heats(config, 2500)
        parts = [
            sample_heats_chunk(config, c, size)
            for c, size in enumerate([1024, 1024, 452])
        ]
        assert np.array_equal(whole, np.concatenate(parts))

    def test_thread_count_does_not_change_results(self):
        config = tls_config(m=4, model=Quenched(bimodal()), seed=12)
        assert np.array_equal(
            sample_heats(config, 3000, threads=1), sample_heats(config, 3000, threads=4)
        )

    def test_same_seed_reproduces(self):
        config = tls_config(m=3, seed=13)
        assert np.array_equal(sample_heats(config, 1000), sample_heats(config, 1000))


class TestExactDistribution:
    def test_energy_basis_single_zero_atom(self):
        h = spectral_decompose(np.diag([-1.0, 1.0]))
        config = ProtocolConfig(
            h=h,
            basis=MeasurementBasis.energy_basis(h),
            rho0=DensityMatrix.thermal(h, 1.0),
            model=Fixed(0.4),
            beta=1.0,
            m_count=1,
        )
        dist = exact_distribution(config)
        assert dist.atoms == [(0.0, pytest.approx(1.0, abs=1e-14))]

    def test_probabilities_sum_to_one(self):
        for model in (Fixed(0.7), Quenched(bimodal()), Annealed(bimodal())):
            dist = exact_distribution(tls_config(m=4, model=model))
            assert dist.probs.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.all(dist.probs >= 0)

    def test_thermal_jarzynski_sum(self):
        c1 = tls.thermal_excited_pop(1.0, 1.0)
        for model in (Fixed(0.7), Quenched(bimodal()), Annealed(bimodal())):
            dist = exact_distribution(tls_config(c1=c1, m=5, model=model))
            assert dist.exp_average(1.0) == pytest.approx(1.0, abs=1e-10)

    def test_atoms_live_on_energy_gaps(self):
        config = tls_config(m=3, model=Annealed(bimodal()))
        gaps = {
            float(b - a)
            for a in config.h.eigenvalues
            for b in config.h.eigenvalues
        }
        for q, _ in exact_distribution(config).atoms:
            assert q in gaps

    def test_annealed_is_mixture_of_frozen_disorder(self):
        # Independent oracle: per-realization distributions built from the
        # public sequence-operator API, mixed with the disorder weights.
        config = tls_config(m=3, model=Annealed(bimodal(0.2, 1.3, 0.4)))
        from qheat.disorder import enumerate_realizations
        from qheat.operators import energy_populations

        populations = energy_populations(config.rho0, config.h)
        acc = {}
        for real in enumerate_realizations(config.model, 3):
            for ks in itertools.product(range(2), repeat=3):
                op = measurement_sequence_operator(
                    config.basis, config.h, OutcomeSequence(ks=np.array(ks), taus=real.taus)
                )
                amps = config.h.eigenvectors.conj().T @ op @ config.h.eigenvectors
                for n in range(2):
                    for m in range(2):
                        q = float(config.h.eigenvalues[m] - config.h.eigenvalues[n])
                        w = real.weight * populations[n] * abs(amps[m, n]) ** 2
                        acc[q] = acc.get(q, 0.0) + w
        dist = exact_distribution(config)
        for q, p in dist.atoms:
            assert p == pytest.approx(acc[q], abs=1e-12)

    def test_requires_m_count_schedule(self):
        config = tls_config()
        timed = ProtocolConfig(
            h=config.h,
            basis=config.basis,
            rho0=config.rho0,
            model=Fixed(1.0),
            total_time=4.0,
        )
        with pytest.raises(ValueError):
            exact_distribution(timed)

    def test_enumeration_cap(self):
        with pytest.raises(EnumerationTooLargeError):
            exact_distribution(tls_config(m=25, model=Annealed(bimodal())))
        with pytest.raises(EnumerationTooLargeError):
            exact_distribution(tls_config(m=23, model=Quenched(bimodal())))

    def test_monte_carlo_converges_to_exact(self):
        config = tls_config(m=5, model=Fixed(0.7), seed=21)
        exact = exact_distribution(config)
        n = 100_000
        emp = empirical_distribution(config, n)
        assert exact.total_variation(emp) < 0.02
        for q, p in exact.atoms:
            hit = np.flatnonzero(np.abs(emp.qs - q) <= 1e-12)
            p_emp = float(emp.probs[hit].sum()) if hit.size else 0.0
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            assert abs(p_emp - p) < 4 * sigma


class TestCharacteristicFunction:
    def test_normalization_at_zero(self):
        for model in (Fixed(0.7), Quenched(bimodal()), Annealed(bimodal())):
            g = characteristic_function(tls_config(m=4, model=model), 0.0)
            assert g == pytest.approx(1.0, abs=1e-12)

    def test_thermal_fluctuation_point(self):
        c1 = tls.thermal_excited_pop(1.0, 1.0)
        for model in (Fixed(0.7), Quenched(bimodal()), Annealed(bimodal())):
            g = characteristic_function(tls_config(c1=c1, m=5, model=model), 1j)
            assert abs(g - 1.0) < 1e-10

    def test_fourier_consistency_with_atoms(self):
        for model in (Fixed(0.7), Quenched(bimodal()), Annealed(bimodal())):
            config = tls_config(m=4, model=model, a_sq=0.37, c1=0.8)
            dist = exact_distribution(config)
            for u in (-2.0, -1.0, 0.0, 1.0, 2.0):
                direct = characteristic_function(config, u)
                assert abs(direct - dist.char_fn(u)) < 1e-10

    def test_energy_coherences_do_not_matter(self):
        # A state with off-diagonal energy coherences gives the same
        # statistics as its dephased diagonal.
        config = tls_config(m=3)
        coherent = DensityMatrix(np.array([[0.7, 0.3], [0.3, 0.3]], dtype=complex))
        dephased = DensityMatrix(np.diag([0.7, 0.3]).astype(complex))
        a = characteristic_function(
            ProtocolConfig(
                h=config.h,
                basis=config.basis,
                rho0=coherent,
                model=config.model,
                m_count=3,
            ),
            0.9,
        )
        b = characteristic_function(
            ProtocolConfig(
                h=config.h,
                basis=config.basis,
                rho0=dephased,
                model=config.model,
                m_count=3,
            ),
            0.9,
        )
        assert abs(a - b) < 1e-13

    def test_matches_general_dimension_oracle(self):
        # d = 3 cross-check against the Fourier sum of the exact atoms.
        rng = np.random.default_rng(31)
        h = random_hermitian(3, rng)
        config = ProtocolConfig(
            h=h,
            basis=random_basis(3, rng),
            rho0=DensityMatrix.thermal(h, 0.8),
            model=Annealed(bimodal(0.3, 1.1, 0.5)),
            beta=0.8,
            m_count=3,
        )
        dist = exact_distribution(config)
        for u in (0.7, -1.3):
            assert abs(characteristic_function(config, u) - dist.char_fn(u)) < 1e-10
        assert abs(characteristic_function(config, 0.8j) - 1.0) < 1e-10


class TestJarzynskiEstimate:
    def test_energy_basis_is_exact(self):
        est, err = jarzynski_estimate(energy_basis_config(), 200)
        assert est == 1.0
        assert err == 0.0

    def test_thermal_within_three_sigma(self):
        c1 = tls.thermal_excited_pop(1.0, 1.0)
        config = tls_config(c1=c1, m=5, model=Fixed(0.7), seed=23)
        est, err = jarzynski_estimate(config, 10_000)
        assert abs(est - 1.0) <= 3 * err

    def test_non_thermal_matches_closed_form(self):
        p = tls.TwoLevelParams(energy=1.0, a_sq=0.25, excited_pop=0.9, n_meas=5, beta=1.0)
        config = tls.to_protocol_config(p, Fixed(0.7), seed=29)
        target = tls.char_fn_fixed(p, 1j, 0.7).real
        est, err = jarzynski_estimate(config, 20_000)
        assert abs(est - target) <= 3 * err


class TestUnitality:
    def test_single_measurement_is_projector_completeness(self):
        assert unitality_residual(tls_config(m=1)) < 1e-14

    def test_annealed_five_measurements(self):
        assert unitality_residual(tls_config(m=5, model=Annealed(bimodal()))) < 1e-10

    def test_independent_of_initial_state(self):
        base = tls_config(m=3, model=Quenched(bimodal()))
        other = ProtocolConfig(
            h=base.h,
            basis=base.basis,
            rho0=DensityMatrix.maximally_mixed(2),
            model=base.model,
            m_count=3,
        )
        assert unitality_residual(base) == unitality_residual(other)


class TestMoments:
    def test_half_filling_has_zero_mean(self):
        config = tls_config(c1=0.5, m=4, model=Annealed(bimodal()))
        assert abs(exact_distribution(config).moment(1)) < 1e-12

    def test_energy_basis_moments_vanish(self):
        config = energy_basis_config()
        for order in (1, 2, 3, 4):
            assert heat_moment(config, order) == 0.0

    def test_routes_agree_on_random_configs(self):
        rng = np.random.default_rng(37)
        for _ in range(5):
            config = tls_config(
                a_sq=float(rng.uniform(0.05, 0.95)),
                c1=float(rng.uniform(0, 1)),
                m=int(rng.integers(1, 5)),
                model=Annealed(bimodal(0.2, 1.7, 0.4)),
            )
            for order in (1, 2, 3, 4):
                direct = engine.moment_via_distribution(config, order)
                derived = engine.moment_via_char_fn(config, order)
                assert abs(direct - derived) <= 1e-6 * max(1.0, abs(direct))
                heat_moment(config, order)

    def test_rejects_unsupported_order(self):
        with pytest.raises(ValueError):
            heat_moment(tls_config(), 5)


class TestHeatDistribution:
    def test_atom_merging(self):
        dist = HeatDistribution.from_atoms([(0.0, 0.3), (1e-13, 0.2), (2.0, 0.5)])
        assert len(dist.atoms) == 2
        assert dist.probs[0] == pytest.approx(0.5)

    def test_from_samples_counts(self):
        dist = HeatDistribution.from_samples(np.array([0.0, 0.0, 2.0, -2.0]))
        assert dist.kind == "empirical"
        assert dist.n_samples == 4
        assert dist.atoms == [(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]

    def test_exp_average_and_char_fn(self):
        dist = HeatDistribution.from_atoms([(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)])
        beta = 0.7
        expected = 0.25 * math.exp(2 * beta) + 0.5 + 0.25 * math.exp(-2 * beta)
        assert dist.exp_average(beta) == pytest.approx(expected, abs=1e-14)
        assert dist.char_fn(0.0) == pytest.approx(1.0, abs=1e-15)

    def test_exact_kind_validates_total(self):
        with pytest.raises(ValueError):
            HeatDistribution(
                qs=np.array([0.0]), probs=np.array([0.5]), kind="exact"
            )
