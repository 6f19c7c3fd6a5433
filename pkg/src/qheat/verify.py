"""Built-in verification suite.

Each check exercises one acceptance-level property of the package end to
end and returns a CheckResult; ``run_all`` executes the complete gate.
The same functions back the ``qheat verify`` command and the pytest
acceptance module, so there is a single source of truth for what
"working" means.

All randomness is drawn from an explicit master seed, so a verification
run is reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import engine, tls
from .disorder import Annealed, DiscreteWaitingDist, Fixed, Quenched
from .exceptions import MomentMismatchError
from .operators import (
    DensityMatrix,
    MeasurementBasis,
    spectral_decompose,
)

DEFAULT_SEED = 20260811


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} ({self.elapsed:.1f}s): {self.detail}"


def _timed(name: str, passed: bool, detail: str, start: float) -> CheckResult:
    return CheckResult(name=name, passed=passed, detail=detail, elapsed=time.perf_counter() - start)


def random_hermitian(dim: int, rng: np.random.Generator):
    """Random dense Hermitian operator (distinct spectrum almost surely)."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return spectral_decompose(0.5 * (x + x.conj().T))


def random_basis(dim: int, rng: np.random.Generator) -> MeasurementBasis:
    """Haar-random orthonormal measurement basis."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(x)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return MeasurementBasis.from_vectors(q)


def _random_model(rng: np.random.Generator):
    kind = rng.integers(3)
    if kind == 0:
        return Fixed(float(rng.uniform(0.05, 3.0)))
    tau1 = float(rng.uniform(0.01, 0.5))
    tau2 = float(rng.uniform(0.6, 3.0))
    p1 = float(rng.uniform(0.05, 0.95))
    dist = DiscreteWaitingDist.bimodal(tau1, tau2, p1)
    return Quenched(dist) if kind == 1 else Annealed(dist)


def _random_thermal_tls(rng: np.random.Generator, m_max: int = 8):
    energy = float(rng.uniform(0.5, 2.0))
    beta = float(rng.uniform(0.2, 1.5))
    p = tls.TwoLevelParams(
        energy=energy,
        a_sq=float(rng.uniform(0.0, 1.0)),
        excited_pop=tls.thermal_excited_pop(energy, beta),
        n_meas=int(rng.integers(1, m_max + 1)),
        beta=beta,
    )
    return p, _random_model(rng)


def check_jarzynski(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 1: exponential heat average equals 1 for thermal states.

    Exact route across randomized configs of every waiting-time model;
    Monte Carlo route on a stratified subset within three standard
    errors.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    n_exact = 30 if quick else 120
    n_mc = 3 if quick else 12
    n_traj = 2000 if quick else 10_000

    worst_exact = 0.0
    configs = []
    for _ in range(n_exact):
        p, model = _random_thermal_tls(rng)
        config = tls.to_protocol_config(p, model, seed=int(rng.integers(2**31)))
        configs.append(config)
        value = engine.characteristic_function(config, 1j * p.beta)
        worst_exact = max(worst_exact, abs(value - 1.0))
    exact_ok = worst_exact < 1e-10

    worst_z = 0.0
    for config in configs[:n_mc]:
        est, err = engine.jarzynski_estimate(config, n_traj)
        z = abs(est - 1.0) / err if err > 0 else 0.0
        worst_z = max(worst_z, z)
    mc_ok = worst_z <= 3.0

    return _timed(
        "jarzynski_identity",
        exact_ok and mc_ok,
        f"{n_exact} exact configs, max |G(i*beta)-1| = {worst_exact:.2e}; "
        f"{n_mc} MC configs (N={n_traj}), max |z| = {worst_z:.2f}",
        start,
    )


def check_unitality(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 2: the averaged channel fixes the identity, d = 2, 3, 4."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed + 1)
    reps = 1 if quick else 3
    worst = 0.0
    count = 0
    for dim in (2, 3, 4):
        for _ in range(reps):
            h = random_hermitian(dim, rng)
            basis = random_basis(dim, rng)
            rho0 = DensityMatrix.maximally_mixed(dim)
            for model in (
                Fixed(float(rng.uniform(0.1, 2.0))),
                Quenched(DiscreteWaitingDist.bimodal(0.1, 1.3, 0.4)),
                Annealed(DiscreteWaitingDist.bimodal(0.2, 2.1, 0.6)),
            ):
                config = engine.ProtocolConfig(
                    h=h, basis=basis, rho0=rho0, model=model, m_count=3
                )
                worst = max(worst, engine.unitality_residual(config))
                count += 1
    # The paper-scale case: five measurements with annealed disorder.
    p = tls.TwoLevelParams(energy=1.0, a_sq=0.3, excited_pop=0.4, n_meas=5, beta=1.0)
    config = tls.to_protocol_config(p, Annealed(DiscreteWaitingDist.bimodal(0.01, 3.0, 0.3)))
    worst = max(worst, engine.unitality_residual(config))
    return _timed(
        "unitality",
        worst < 1e-10,
        f"{count + 1} configs, max Frobenius residual = {worst:.2e}",
        start,
    )


def _figure_points():
    """The two published parameter sets: fixed times and bimodal disorder."""
    dist = DiscreteWaitingDist.bimodal(0.01, 3.0, 0.3)
    for model in (Fixed(1.0), Quenched(dist), Annealed(dist)):
        for a in (0.0, 0.1, 0.5):
            for c1 in (0.0, 0.5, 1.0):
                p = tls.TwoLevelParams(
                    energy=1.0, a_sq=a * a, excited_pop=c1, n_meas=5, beta=1.0
                )
                yield p, model


def check_triple_agreement(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 3: closed forms, exact enumeration and Monte Carlo agree."""
    start = time.perf_counter()
    n_traj = 5000 if quick else 100_000
    worst_exact = 0.0
    worst_z = 0.0
    for i, (p, model) in enumerate(_figure_points()):
        analytic = tls.char_fn(p, model, 1j * p.beta)
        config = tls.to_protocol_config(p, model, seed=seed + 100 + i)
        numeric = engine.characteristic_function(config, 1j * p.beta)
        worst_exact = max(worst_exact, abs(analytic - numeric))
        est, err = engine.jarzynski_estimate(config, n_traj)
        z = abs(est - analytic.real) / err if err > 0 else abs(est - analytic.real) / 1e-15
        worst_z = max(worst_z, z)
    return _timed(
        "triple_agreement",
        worst_exact < 1e-10 and worst_z <= 4.0,
        f"27 points: max |analytic-exact| = {worst_exact:.2e}, "
        f"max MC |z| = {worst_z:.2f} (N={n_traj})",
        start,
    )


def check_thermal_crossing(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 4: exponential average is affine in the initial population
    and crosses 1 exactly at the thermal point for every mixing angle."""
    start = time.perf_counter()
    c_th = tls.thermal_excited_pop(1.0, 1.0)
    ok = abs(c_th - 0.1192) < 1e-4
    worst_affine = 0.0
    worst_cross = 0.0
    worst_flat = 0.0
    for a in (0.0, 0.1, 0.5):
        base = tls.TwoLevelParams(energy=1.0, a_sq=a * a, excited_pop=0.0, n_meas=5, beta=1.0)
        u = 1j * base.beta

        def g(c1, base=base, u=u):
            return tls.char_fn_fixed(replace(base, excited_pop=c1), u, 1.0).real

        lo, mid, hi = g(0.0), g(0.37), g(1.0)
        worst_affine = max(worst_affine, abs(mid - (0.63 * lo + 0.37 * hi)))
        worst_cross = max(worst_cross, abs(g(c_th) - 1.0))
        if a == 0.0:
            for c1 in np.linspace(0.0, 1.0, 5):
                worst_flat = max(worst_flat, abs(g(float(c1)) - 1.0))
    passed = ok and worst_affine < 1e-12 and worst_cross < 1e-10 and worst_flat < 1e-12
    return _timed(
        "thermal_crossing",
        passed,
        f"thermal population {c_th:.6f}; affine residual {worst_affine:.2e}, "
        f"crossing residual {worst_cross:.2e}, commuting-case flatness {worst_flat:.2e}",
        start,
    )


def check_mean_heat_structure(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 5: zeros of the mean heat, annealed >= quenched, and the
    ceiling at the half-filled-population maximum."""
    start = time.perf_counter()
    a_grid = np.linspace(0.05, 0.95, 4 if quick else 10)
    p_grid = np.linspace(0.05, 0.95, 4 if quick else 10)
    m_grid = (2, 5, 8) if quick else (2, 3, 5, 8, 13)

    exact_zero = True
    ordering_ok = True
    ceiling_ok = True
    for a2 in a_grid:
        for p1 in p_grid:
            dist = DiscreteWaitingDist.bimodal(0.01, 3.0, float(p1))
            for m in m_grid:
                p = tls.TwoLevelParams(
                    energy=1.0, a_sq=float(a2), excited_pop=0.0, n_meas=int(m), beta=1.0
                )
                for model in (Quenched(dist), Annealed(dist)):
                    half = tls.mean_heat(replace(p, excited_pop=0.5), model)
                    if half != 0.0:
                        exact_zero = False
                    for edge in (0.0, 1.0):
                        if tls.mean_heat(replace(p, a_sq=edge), model) != 0.0:
                            exact_zero = False
                q_an = abs(tls.mean_heat(p, Annealed(dist)))
                q_qu = abs(tls.mean_heat(p, Quenched(dist)))
                if q_an < q_qu - 1e-12:
                    ordering_ok = False
                phi = tls.max_mean_heat(p, Annealed(dist))
                if phi > p.energy + 1e-12:
                    ceiling_ok = False
                peak = max(
                    tls.mean_heat(replace(p, excited_pop=float(c)), Annealed(dist))
                    for c in np.linspace(0.0, 1.0, 11)
                )
                if abs(peak - phi) > 1e-12:
                    ceiling_ok = False
    passed = exact_zero and ordering_ok and ceiling_ok
    return _timed(
        "mean_heat_structure",
        passed,
        f"zeros exact: {exact_zero}, annealed >= quenched: {ordering_ok}, "
        f"peak equals ceiling <= splitting/2: {ceiling_ok}",
        start,
    )


def check_limit_slope(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 6: population sensitivity converges to the
    infinite-measurement value, except in the commuting case where it is
    identically zero (the limit is discontinuous there)."""
    start = time.perf_counter()
    dist = DiscreteWaitingDist.bimodal(0.5, 1.5, 0.3)
    base = tls.TwoLevelParams(energy=1.0, a_sq=0.2, excited_pop=0.0, n_meas=100, beta=1.0)
    u = 1j * base.beta
    asym = (
        tls.char_fn_limit(replace(base, excited_pop=1.0), u)
        - tls.char_fn_limit(replace(base, excited_pop=0.0), u)
    ).real
    slope_100 = tls.char_fn_slope_c1(base, Quenched(dist), u).real
    conv_ok = abs(slope_100 - asym) < 1e-2

    flat_ok = True
    for m in (1, 2, 5, 10, 100):
        p0 = replace(base, a_sq=0.0, n_meas=m)
        if abs(tls.char_fn_slope_c1(p0, Quenched(dist), u)) > 1e-12:
            flat_ok = False
    return _timed(
        "limit_slope",
        conv_ok and flat_ok,
        f"|slope(M=100) - asymptote| = {abs(slope_100 - asym):.2e} "
        f"(asymptote {asym:.4f}); commuting-case slope stays 0: {flat_ok}",
        start,
    )


def check_small_tau_criterion(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 7: in the rapid-measurement regime, quenched disorder
    transfers at least as much heat as the regular protocol exactly when
    the waiting-time variance is positive.

    The sign of the heat difference is also cross-checked against the
    alternating-channel margin, which is the exact criterion at any
    speed.
    """
    start = time.perf_counter()
    total = 0
    matches = 0
    margin_matches = 0
    for tau1 in (0.005, 0.010, 0.015):
        for tau2 in (0.0075, 0.0125, 0.02, 0.025):
            if tau2 <= tau1:
                continue
            for p1 in (0.2, 0.5, 0.8):
                dist = DiscreteWaitingDist.bimodal(tau1, tau2, p1)
                for m in (2, 3, 5, 8):
                    for a2 in (0.1, 0.3, 0.45):
                        p = tls.TwoLevelParams(
                            energy=1.0, a_sq=a2, excited_pop=0.0, n_meas=m, beta=1.0
                        )
                        diff = abs(tls.mean_heat(p, Quenched(dist))) - abs(
                            tls.mean_heat(p, Fixed(dist.mean()))
                        )
                        if abs(diff) <= 1e-14:
                            continue
                        total += 1
                        variance = dist.second_moment() - dist.mean() ** 2
                        if math.copysign(1.0, diff) == math.copysign(1.0, variance):
                            matches += 1
                        margin = tls.quenched_vs_fixed_margin(p, dist)
                        if math.copysign(1.0, diff) == math.copysign(1.0, margin):
                            margin_matches += 1
    passed = total > 0 and matches == total and margin_matches == total
    return _timed(
        "small_tau_criterion",
        passed,
        f"{matches}/{total} sign agreements with the variance rule, "
        f"{margin_matches}/{total} with the exact channel margin",
        start,
    )


def check_resonance(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 8: at degenerate disorder the peak mean heat drops to the
    frozen-dynamics floor exactly where every support value completes
    whole evolution periods (splitting times mean waiting time equal to
    even multiples of pi), and with genuine disorder the floor is never
    reached on the scanned band.

    Odd multiples of pi are maximal-hop points of the propagator matrix
    element, not resonances; this is pinned here as well.
    """
    start = time.perf_counter()
    p = tls.TwoLevelParams(energy=1.0, a_sq=0.2, excited_pop=0.0, n_meas=1, beta=1.0)
    total_time = 25.0
    floor = tls.zeno_floor(p)

    res_ok = True
    anti_ok = True
    for p1 in (0.0, 1.0):
        dist = DiscreteWaitingDist.bimodal(0.1, 0.5, p1)
        for k in (1, 2):
            phi = tls.peak_mean_heat_annealed(p, dist, 2.0 * math.pi * k, total_time)
            if abs(phi - floor) > 1e-9:
                res_ok = False
        for k in (1, 3):
            phi = tls.peak_mean_heat_annealed(p, dist, math.pi * k, total_time)
            if phi - floor < 1e-2:
                anti_ok = False

    dist = DiscreteWaitingDist.bimodal(0.1, 0.5, 0.5)
    scan = np.linspace(0.1, 4.0 * math.pi, 150 if quick else 400)
    excess = np.array(
        [tls.peak_mean_heat_annealed(p, dist, float(x), total_time) - floor for x in scan]
    )
    mixed_ok = excess.min() > 1e-4
    return _timed(
        "resonance_structure",
        res_ok and anti_ok and mixed_ok,
        f"floor {floor:.3f} reached at even-pi points: {res_ok}; "
        f"odd-pi points stay off the floor: {anti_ok}; "
        f"disordered scan min excess = {excess.min():.2e}",
        start,
    )


def check_moment_consistency(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 9: derivative-route moments match distribution-route
    moments to 1e-6 relative for orders 1 to 4."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed + 9)
    n_configs = 10 if quick else 50
    worst = 0.0
    for _ in range(n_configs):
        p = tls.TwoLevelParams(
            energy=float(rng.uniform(0.5, 1.5)),
            a_sq=float(rng.uniform(0.05, 0.95)),
            excited_pop=float(rng.uniform(0.0, 1.0)),
            n_meas=int(rng.integers(1, 5)),
            beta=1.0,
        )
        model = _random_model(rng)
        config = tls.to_protocol_config(p, model)
        for order in (1, 2, 3, 4):
            direct = engine.moment_via_distribution(config, order)
            derived = engine.moment_via_char_fn(config, order)
            rel = abs(direct - derived) / max(1.0, abs(direct))
            worst = max(worst, rel)
            try:
                engine.heat_moment(config, order)
            except MomentMismatchError:
                worst = max(worst, 1.0)
    return _timed(
        "moment_consistency",
        worst < 1e-6,
        f"{n_configs} configs x 4 orders, max relative route deviation = {worst:.2e}",
        start,
    )


def check_cli_determinism(seed: int = DEFAULT_SEED, quick: bool = False) -> CheckResult:
    """Criterion 10: a seeded simulate run writes byte-identical output."""
    import json
    import tempfile
    from pathlib import Path

    from . import cli

    start = time.perf_counter()
    spec = {
        "system": {"kind": "tls", "energy": 1.0, "a_sq": 0.25, "excited_pop": 0.3},
        "model": {"kind": "fixed", "tau_bar": 1.0},
        "schedule": {"m_count": 5},
        "beta": 1.0,
        "seed": int(seed) % 2**31,
        "n_traj": 500 if quick else 2000,
    }
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "spec.json"
        cfg.write_text(json.dumps(spec))
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = Path(tmp) / name
            code = cli.main(["simulate", "--config", str(cfg), "--out", str(out)])
            if code != 0:
                return _timed("cli_determinism", False, f"simulate exited with {code}", start)
            outputs.append(out.read_bytes())
    identical = outputs[0] == outputs[1]
    return _timed(
        "cli_determinism",
        identical,
        f"two runs, {len(outputs[0])} bytes each, identical: {identical}",
        start,
    )


ALL_CHECKS = (
    check_jarzynski,
    check_unitality,
    check_triple_agreement,
    check_thermal_crossing,
    check_mean_heat_structure,
    check_limit_slope,
    check_small_tau_criterion,
    check_resonance,
    check_moment_consistency,
    check_cli_determinism,
)


def run_all(seed: int = DEFAULT_SEED, quick: bool = False) -> list[CheckResult]:
    """Run the complete verification gate and return every result."""
    return [check(seed=seed, quick=quick) for check in ALL_CHECKS]
