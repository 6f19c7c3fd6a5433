"""Two-point measurement engine for quantum-heat statistics.

The protocol: a projective energy measurement prepares an eigenstate,
a sequence of projective measurements of an arbitrary observable is
applied at (possibly random) waiting times, and a closing energy
measurement is taken. The heat is the energy difference between the two
energy readouts; this module computes its statistics three ways:

* Monte Carlo over measurement trajectories (``run_trajectory``,
  ``sample_heats``),
* exact enumeration over disorder realizations and outcome sequences
  (``exact_distribution``, ``characteristic_function``), and
* moments via numerical differentiation of the characteristic function,
  cross-checked against the distribution route (``heat_moment``).

Internally everything is expressed in the energy eigenbasis, where the
free propagator is diagonal. Trajectories track a normalized pure state
vector: the opening energy measurement purifies the state, so density
matrices are never needed along a trajectory.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .disorder import (
    WaitingTimeModel,
    enumerate_realizations,
    sample_until_total_time,
    sample_waiting_times,
)
from .exceptions import EnumerationTooLargeError, MomentMismatchError
from .operators import (
    DensityMatrix,
    HermitianOperator,
    MeasurementBasis,
    energy_populations,
)

DEFAULT_TERM_CAP = 10**7
ATOM_MERGE_TOL = 1e-12
# Trajectories are seeded in fixed-size blocks so that results do not
# depend on how blocks are distributed over threads.
CHUNK_SIZE = 1024


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Full description of one measurement experiment.

    Exactly one of ``m_count`` (fixed number of measurements) and
    ``total_time`` (fixed protocol duration, measurement count random)
    must be given.
    """

    h: HermitianOperator
    basis: MeasurementBasis
    rho0: DensityMatrix
    model: WaitingTimeModel
    beta: float = 0.0
    seed: int = 0
    m_count: int | None = None
    total_time: float | None = None

    def __post_init__(self):
        if self.h.dim != self.basis.dim or self.h.dim != self.rho0.dim:
            raise ValueError("Hamiltonian, basis and state dimensions differ")
        if (self.m_count is None) == (self.total_time is None):
            raise ValueError("specify exactly one of m_count and total_time")
        if self.m_count is not None and self.m_count < 1:
            raise ValueError("m_count must be >= 1")
        if self.total_time is not None and not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True, eq=False)
class HeatRecord:
    """Outcome of a single protocol run."""

    n: int
    ks: np.ndarray
    taus: np.ndarray
    m: int
    q: float


@dataclass(frozen=True, eq=False)
class HeatDistribution:
    """Discrete distribution of the exchanged heat.

    ``kind`` is "exact" for enumerated distributions and "empirical" for
    Monte Carlo frequencies (then ``n_samples`` is set).
    """

    qs: np.ndarray
    probs: np.ndarray
    kind: str
    n_samples: int | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "empirical"):
            raise ValueError("kind must be 'exact' or 'empirical'")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        if self.kind == "exact" and abs(self.probs.sum() - 1.0) > 1e-10:
            raise ValueError("exact probabilities must sum to 1")

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(q), float(p)) for q, p in zip(self.qs, self.probs)]

    def moment(self, order: int) -> float:
        return float(np.sum(self.probs * self.qs**order))

    def exp_average(self, beta: float) -> float:
        """Average of exp(-beta * q) over the distribution."""
        return float(np.sum(self.probs * np.exp(-beta * self.qs)))

    def char_fn(self, u: complex) -> complex:
        """Fourier sum over atoms, sum of p * exp(i*u*q)."""
        return complex(np.sum(self.probs * np.exp(1j * u * self.qs)))

    def total_variation(self, other: "HeatDistribution") -> float:
        qs = np.unique(np.concatenate([self.qs, other.qs]))
        diff = 0.0
        for q in qs:
            p1 = self.probs[np.abs(self.qs - q) <= ATOM_MERGE_TOL].sum()
            p2 = other.probs[np.abs(other.qs - q) <= ATOM_MERGE_TOL].sum()
            diff += abs(p1 - p2)
        return 0.5 * diff

    @classmethod
    def from_atoms(cls, pairs, kind="exact", n_samples=None) -> "HeatDistribution":
        qs = np.array([q for q, _ in pairs], dtype=float)
        probs = np.array([p for _, p in pairs], dtype=float)
        qs, probs = _merge_atoms(qs, probs)
        return cls(qs=qs, probs=probs, kind=kind, n_samples=n_samples)

    @classmethod
    def from_samples(cls, heats: np.ndarray) -> "HeatDistribution":
        values, counts = np.unique(np.asarray(heats, dtype=float), return_counts=True)
        n = int(counts.sum())
        return cls(qs=values, probs=counts / n, kind="empirical", n_samples=n)


def _merge_atoms(qs: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort atoms by location and coalesce values closer than the merge tolerance."""
    order = np.argsort(qs)
    merged_q: list[float] = []
    merged_p: list[float] = []
    for q, p in zip(qs[order], probs[order]):
        if merged_q and q - merged_q[-1] <= ATOM_MERGE_TOL:
            merged_p[-1] += p
        else:
            merged_q.append(float(q))
            merged_p.append(float(p))
    keep = [i for i, p in enumerate(merged_p) if p > 0.0]
    return np.array([merged_q[i] for i in keep]), np.array([merged_p[i] for i in keep])


class _EnergyFrame:
    """Per-config working data in the energy eigenbasis.

    The free propagator is diagonal here, so a trajectory step costs one
    elementwise phase multiplication plus one small matvec.
    """

    def __init__(self, config: ProtocolConfig):
        h = config.h
        self.evals = h.eigenvalues
        self.dim = h.dim
        # Measurement vectors expressed in the energy basis, one column each.
        self.basis_cols = h.eigenvectors.conj().T @ config.basis.vectors
        self.basis_rows = np.ascontiguousarray(self.basis_cols.conj().T)
        self.populations = energy_populations(config.rho0, config.h)
        self._pop_list = [float(p) for p in self.populations]
        self._phase_cache: dict[float, np.ndarray] = {}

    def phases(self, tau: float) -> np.ndarray:
        cached = self._phase_cache.get(tau)
        if cached is None:
            cached = np.exp(-1j * self.evals * tau)
            self._phase_cache[tau] = cached
        return cached


def _draw(rng: np.random.Generator, probs) -> int:
    """Sample an index from a small probability vector.

    Only indices with strictly positive probability can be returned: the
    running total does not advance on zero entries and the uniform draw
    is strictly below it at selection time.
    """
    r = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p > 0.0:
            last = i
            acc += p
            if r < acc:
                return i
    return last


def _run_steps(config: ProtocolConfig, rng: np.random.Generator, frame: _EnergyFrame):
    """Single trajectory; returns (n, ks, taus, m, q)."""
    n = _draw(rng, frame._pop_list)
    if config.total_time is not None:
        m_count, taus = sample_until_total_time(config.model, config.total_time, rng)
        remainder = config.total_time - taus.sum()
    else:
        taus = sample_waiting_times(config.model, config.m_count, rng)
        m_count = config.m_count
        remainder = None

    state = np.zeros(frame.dim, dtype=complex)
    state[n] = 1.0
    ks = np.empty(m_count, dtype=int)
    for i in range(m_count):
        state = frame.phases(taus[i]) * state
        amps = frame.basis_rows @ state
        born = amps.real**2 + amps.imag**2
        k = _draw(rng, born)
        ks[i] = k
        state = frame.basis_cols[:, k]
    if remainder is not None and remainder > 0:
        # Free evolution after the last measurement commutes with the
        # closing energy measurement; kept for fidelity to the protocol.
        state = frame.phases(remainder) * state
    final = state.real**2 + state.imag**2
    m = _draw(rng, final)
    q = float(frame.evals[m] - frame.evals[n])
    return n, ks, taus, m, q


def run_trajectory(
    config: ProtocolConfig, rng: np.random.Generator, *, _frame: _EnergyFrame | None = None
) -> HeatRecord:
    """Run one protocol realization and record the exchanged heat.

    The opening energy measurement samples a level from the state's
    energy populations; each observable measurement samples an outcome
    with its Born probability and collapses the (pure) state onto the
    corresponding basis vector; the closing energy measurement yields the
    final level. Sampling only ever selects outcomes with positive
    probability.
    """
    frame = _frame if _frame is not None else _EnergyFrame(config)
    n, ks, taus, m, q = _run_steps(config, rng, frame)
    return HeatRecord(n=n, ks=ks, taus=taus, m=m, q=q)


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Generator for one trajectory block, derived from the master seed.

    Blocks are the unit of the parallel partition contract: block
    ``chunk_index`` always produces the same trajectories no matter which
    thread runs it.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))


def sample_heats_chunk(
    config: ProtocolConfig,
    chunk_index: int,
    count: int,
    *,
    _frame: _EnergyFrame | None = None,
) -> np.ndarray:
    """Heat values of one seeded trajectory block."""
    frame = _frame if _frame is not None else _EnergyFrame(config)
    rng = chunk_rng(config.seed, chunk_index)
    out = np.empty(count)
    for i in range(count):
        out[i] = _run_steps(config, rng, frame)[4]
    return out


def sample_heats(config: ProtocolConfig, n_traj: int, threads: int = 1) -> np.ndarray:
    """Heat values of ``n_traj`` independent trajectories.

    Trajectories are generated in fixed-size seeded blocks; the result is
    bitwise independent of ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    frame = _EnergyFrame(config)
    n_chunks = (n_traj + CHUNK_SIZE - 1) // CHUNK_SIZE
    sizes = [
        min(CHUNK_SIZE, n_traj - c * CHUNK_SIZE) for c in range(n_chunks)
    ]
    if threads <= 1:
        parts = [
            sample_heats_chunk(config, c, sizes[c], _frame=frame) for c in range(n_chunks)
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(sample_heats_chunk, config, c, sizes[c], _frame=frame)
                for c in range(n_chunks)
            ]
            parts = [f.result() for f in futures]
    return np.concatenate(parts)


def empirical_distribution(
    config: ProtocolConfig, n_traj: int, threads: int = 1
) -> HeatDistribution:
    """Monte Carlo histogram of the heat over ``n_traj`` trajectories."""
    return HeatDistribution.from_samples(sample_heats(config, n_traj, threads=threads))


def jarzynski_estimate(
    config: ProtocolConfig, n_traj: int, threads: int = 1
) -> tuple[float, float]:
    """Trajectory average of exp(-beta*q) with its standard error.

    For a thermal initial state the exact value is 1 regardless of the
    waiting-time model; the estimate should be consistent with that
    within a few standard errors.
    """
    if n_traj < 2:
        raise ValueError("n_traj must be >= 2")
    heats = sample_heats(config, n_traj, threads=threads)
    x = np.exp(-config.beta * heats)
    mean = float(x.mean())
    stderr = float(x.std(ddof=1) / math.sqrt(n_traj))
    return mean, stderr


def _require_m_count(config: ProtocolConfig) -> int:
    if config.m_count is None:
        raise ValueError(
            "exact enumeration requires an m_count schedule "
            "(fixed-total-time protocols are Monte Carlo only)"
        )
    return config.m_count


def _check_term_cap(config: ProtocolConfig, cap: int) -> list:
    m = _require_m_count(config)
    realizations = enumerate_realizations(config.model, m, cap=cap)
    terms = len(realizations) * config.basis.size**m
    if terms > cap:
        raise EnumerationTooLargeError(
            f"exact enumeration needs {terms} terms, cap is {cap}"
        )
    return realizations


def _leaf_operators(basis_cols: np.ndarray, phase_list: list[np.ndarray]):
    """All sequence operators for one waiting-time vector, in the energy basis.

    Depth-first over outcome prefixes so partial products are shared; at
    depth i the running matrix is P_{k_i} U(tau_i) ... P_{k_1} U(tau_1).
    """
    dim, n_outcomes = basis_cols.shape

    def recurse(depth: int, mat: np.ndarray):
        if depth == len(phase_list):
            yield mat
            return
        evolved = phase_list[depth][:, None] * mat
        for k in range(n_outcomes):
            row = basis_cols[:, k].conj() @ evolved
            yield from recurse(depth + 1, np.outer(basis_cols[:, k], row))

    yield from recurse(0, np.eye(dim, dtype=complex))


def exact_distribution(config: ProtocolConfig, cap: int = DEFAULT_TERM_CAP) -> HeatDistribution:
    """Exact heat distribution by enumerating disorder and outcomes.

    Accumulates initial-population times disorder-weight times squared
    transition amplitude over every realization and outcome sequence.
    Feasibility is guarded by ``cap`` on the total term count.
    """
    realizations = _check_term_cap(config, cap)
    frame = _EnergyFrame(config)
    acc = np.zeros((frame.dim, frame.dim))
    for real in realizations:
        phase_list = [frame.phases(tau) for tau in real.taus]
        for op in _leaf_operators(frame.basis_cols, phase_list):
            acc += real.weight * (op.real**2 + op.imag**2)
    pairs = []
    for n in range(frame.dim):
        pn = frame.populations[n]
        for m in range(frame.dim):
            pairs.append((frame.evals[m] - frame.evals[n], pn * acc[m, n]))
    dist = HeatDistribution.from_atoms(pairs, kind="exact")
    return dist


def characteristic_function(
    config: ProtocolConfig, u: complex, cap: int = DEFAULT_TERM_CAP
) -> complex:
    """Exact characteristic function of the heat at complex argument ``u``.

    Evaluates the disorder-averaged trace of
    exp(i*u*H) V exp(-i*u*H) rho V(dagger) summed over outcome
    sequences, with the initial state dephased in the energy basis (the
    opening measurement erases energy coherences, so only populations
    enter). At real ``u`` this equals the Fourier sum over the atoms of
    ``exact_distribution``; at ``u = i*beta`` with a thermal state it
    equals 1 identically, because the averaged channel is unital.
    """
    u = complex(u)
    realizations = _check_term_cap(config, cap)
    frame = _EnergyFrame(config)
    eu = np.exp(1j * u * frame.evals)
    euinv = np.exp(-1j * u * frame.evals)
    weighted_euinv = euinv * frame.populations
    terms_re: list[float] = []
    terms_im: list[float] = []
    for real in realizations:
        phase_list = [frame.phases(tau) for tau in real.taus]
        for op in _leaf_operators(frame.basis_cols, phase_list):
            # Tr[diag(eu) V diag(euinv) diag(p) V+] with V in the energy basis.
            val = real.weight * np.sum(
                (eu[:, None] * op) * weighted_euinv[None, :] * op.conj()
            )
            terms_re.append(val.real)
            terms_im.append(val.imag)
    return complex(math.fsum(terms_re), math.fsum(terms_im))


def unitality_residual(config: ProtocolConfig, cap: int = DEFAULT_TERM_CAP) -> float:
    """Frobenius distance of the averaged channel's image of identity from identity.

    Sums V V(dagger) over outcome sequences and disorder realizations;
    completeness of the projectors and unitarity of the propagators make
    this the identity exactly, so the residual is pure round-off. The
    initial state plays no role.
    """
    realizations = _check_term_cap(config, cap)
    frame = _EnergyFrame(config)
    acc = np.zeros((frame.dim, frame.dim), dtype=complex)
    for real in realizations:
        phase_list = [frame.phases(tau) for tau in real.taus]
        for op in _leaf_operators(frame.basis_cols, phase_list):
            acc += real.weight * (op @ op.conj().T)
    return float(np.linalg.norm(acc - np.eye(frame.dim)))


# Central finite-difference configuration per derivative order: base step
# (scaled down by the spectral spread when it exceeds 1) and number of
# Richardson extrapolation levels. The steps grow with the order because
# round-off in a 1/h^n stencil would otherwise swamp the small default
# step; values validated against the distribution route in the tests.
_FD_PLAN = {1: (1e-2, 1), 2: (1e-2, 1), 3: (5e-2, 1), 4: (1e-1, 2)}


def _fd_derivative(g, order: int, h: float, levels: int) -> complex:
    """Richardson-extrapolated central difference of ``g`` at 0."""

    def stencil(step: float) -> complex:
        if order == 1:
            return (g(step) - g(-step)) / (2 * step)
        if order == 2:
            return (g(step) - 2 * g(0.0) + g(-step)) / step**2
        if order == 3:
            return (g(2 * step) - 2 * g(step) + 2 * g(-step) - g(-2 * step)) / (
                2 * step**3
            )
        if order == 4:
            return (
                g(2 * step) - 4 * g(step) + 6 * g(0.0) - 4 * g(-step) + g(-2 * step)
            ) / step**4
        raise ValueError("order must be in 1..4")

    estimates = [stencil(h / 2**i) for i in range(levels + 1)]
    # Each Richardson pass removes the next even error term (h^2, h^4, ...).
    power = 4.0
    while len(estimates) > 1:
        estimates = [
            (power * fine - coarse) / (power - 1.0)
            for coarse, fine in zip(estimates, estimates[1:])
        ]
        power *= 4.0
    return estimates[0]


def moment_via_distribution(config: ProtocolConfig, order: int) -> float:
    """Heat moment as a direct sum over the exact atoms."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    return exact_distribution(config).moment(order)


def moment_via_char_fn(config: ProtocolConfig, order: int) -> float:
    """Heat moment from derivatives of the characteristic function at zero."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    cache: dict[float, complex] = {}

    def g(x: float) -> complex:
        if x not in cache:
            cache[x] = characteristic_function(config, x)
        return cache[x]

    h0, levels = _FD_PLAN[order]
    spread = float(config.h.eigenvalues[-1] - config.h.eigenvalues[0])
    h = h0 / max(1.0, spread)
    derivative = _fd_derivative(g, order, h, levels)
    return ((-1j) ** order * derivative).real


def heat_moment(config: ProtocolConfig, order: int) -> float:
    """Heat moment computed two independent ways and cross-checked.

    The distribution route is returned; if the derivative route disagrees
    beyond 1e-6 relative to max(1, |moment|), MomentMismatchError is
    raised, which indicates a bug rather than a user error.
    """
    direct = moment_via_distribution(config, order)
    derived = moment_via_char_fn(config, order)
    tol = 1e-6 * max(1.0, abs(direct))
    if abs(direct - derived) > tol:
        raise MomentMismatchError(
            f"order-{order} moment routes disagree: {direct!r} vs {derived!r}"
        )
    return direct
