"""Time evolution, circuit application, and Monte Carlo quantum trajectories.

Hamiltonians are stored in ordinary-frequency units (MHz); propagation uses
exp(-i 2pi H t) with t in microseconds.  Decay rates are probabilities per
microsecond and carry no 2pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse

from .hilbert import BasisMap, Bipartition, StateVector, is_blockade_legal
from .models import CircuitSpec, RydbergSpec, build_rydberg
from .samples import SampleSet

TWO_PI = 2.0 * np.pi

DENSE_EVOLVE_THRESHOLD = 2048


class KrylovError(RuntimeError):
    """Krylov propagation failed to converge; carries step and residual."""

    def __init__(self, message: str, step: int, residual: float):
        super().__init__(message)
        self.step = step
        self.residual = residual


# ---------------------------------------------------------------------------
# results

@dataclass
class EvolutionResult:
    """States and optional per-time observables on a strictly increasing
    time (or depth) grid."""

    times: np.ndarray
    states: list[StateVector] | None = None
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass
class Trajectory:
    jumps: list[tuple[float, int]]
    disorder: dict
    final: StateVector | None = None


@dataclass
class TrajectoryResult:
    times: np.ndarray
    probs: np.ndarray                 # (n_times, dim) trajectory-averaged
    observables: dict                 # name -> (mean, stderr) arrays
    n_traj: int
    basis: BasisMap
    fidelity: np.ndarray | None = None      # vs the clean reference, per time
    fidelity_err: np.ndarray | None = None
    trajectories: list[Trajectory] | None = None


# ---------------------------------------------------------------------------
# Krylov propagation

def _lanczos_expv(matvec, v: np.ndarray, phase: float, m: int, tol: float):
    """One Lanczos approximation of exp(-1j * phase * H) v, ||v|| = 1.

    Returns (w, err_estimate).  ``phase`` already contains the 2pi factor.
    """
    dim = v.shape[0]
    m = min(m, dim)
    basis_vecs = np.empty((m, dim), dtype=np.complex128)
    alphas = np.zeros(m)
    betas = np.zeros(max(m - 1, 1))
    basis_vecs[0] = v
    w = matvec(v)
    alphas[0] = np.real(np.vdot(basis_vecs[0], w))
    w = w - alphas[0] * basis_vecs[0]
    n_vec = 1
    exhausted = False
    for k in range(1, m):
        b = np.linalg.norm(w)
        if b < 1e-14:
            exhausted = True
            break
        betas[k - 1] = b
        basis_vecs[k] = w / b
        w = matvec(basis_vecs[k])
        alphas[k] = np.real(np.vdot(basis_vecs[k], w))
        w = w - alphas[k] * basis_vecs[k] - betas[k - 1] * basis_vecs[k - 1]
        n_vec = k + 1
    evals, evecs = scipy.linalg.eigh_tridiagonal(alphas[:n_vec], betas[: n_vec - 1])
    small = evecs @ (np.exp(-1j * phase * evals) * evecs[0].conj())
    out = small @ basis_vecs[:n_vec]
    if exhausted or n_vec >= dim:
        err = 0.0  # invariant subspace reached, projection is exact
    else:
        err = float(abs(np.linalg.norm(w) * small[-1]))
    return out, err


def krylov_propagate(h, v: np.ndarray, t: float, m: int = 30, tol: float = 1e-11,
                     max_splits: int = 24) -> np.ndarray:
    """exp(-i 2pi H t) v via adaptive Lanczos stepping (H Hermitian, MHz)."""
    matvec = (lambda x: h @ x) if not callable(h) else h
    nrm = np.linalg.norm(v)
    v = v / nrm
    remaining = float(t)
    dt = remaining
    step = 0
    while abs(remaining) > 1e-15 * max(1.0, abs(t)):
        dt = math.copysign(min(abs(dt), abs(remaining)), remaining)
        w, err = _lanczos_expv(matvec, v, TWO_PI * dt, m, tol)
        splits = 0
        while err > tol:
            dt /= 2
            splits += 1
            step += 1
            if splits > max_splits:
                raise KrylovError(
                    f"Krylov step failed to converge at step {step}", step, err
                )
            w, err = _lanczos_expv(matvec, v, TWO_PI * dt, m, tol)
        v = w / np.linalg.norm(w)
        remaining -= dt
        step += 1
        if err < tol / 16:
            dt *= 2
    return v * nrm


def _one_norm_estimate(h) -> float:
    if scipy.sparse.issparse(h):
        return float(np.max(np.abs(h).sum(axis=1)))
    return float(np.max(np.sum(np.abs(h), axis=1)))


def evolve_exact(h, psi0: StateVector, times, dense_threshold: int = DENSE_EVOLVE_THRESHOLD,
                 check: bool = True) -> EvolutionResult:
    """Evolve a state under a time-independent Hamiltonian.

    Uses a single eigendecomposition below ``dense_threshold`` and adaptive
    Krylov stepping above.  Post-conditions (unit norm to 1e-10, energy
    conservation to 1e-8 relative to the Hamiltonian scale) are verified
    when ``check`` is set.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    basis = psi0.basis
    dim = basis.dim
    states: list[StateVector] = []
    if dim <= dense_threshold:
        dense = h.toarray() if scipy.sparse.issparse(h) else np.asarray(h)
        evals, evecs = np.linalg.eigh(dense)
        coeff = evecs.conj().T @ psi0.amps
        for t in times:
            amps = evecs @ (np.exp(-1j * TWO_PI * evals * t) * coeff)
            states.append(StateVector(basis, amps))
    else:
        if np.any(times < 0):
            raise ValueError("Krylov path requires non-negative times")
        order = np.argsort(times)
        amps = psi0.amps.copy()
        t_prev = 0.0
        out: dict[int, np.ndarray] = {}
        for idx in order:
            t = times[idx]
            if t > t_prev:
                amps = krylov_propagate(h, amps, t - t_prev)
                t_prev = t
            out[idx] = amps.copy()
        states = [StateVector(basis, out[i]) for i in range(times.size)]
    if check:
        e0 = None
        scale = max(1.0, _one_norm_estimate(h))
        for i, sv in enumerate(states):
            nrm = float(np.sum(np.abs(sv.amps) ** 2))
            if abs(nrm - 1.0) > 1e-10:
                raise KrylovError(f"norm drift {abs(nrm - 1):.2e} at time index {i}", i, abs(nrm - 1))
            e = float(np.real(np.vdot(sv.amps, h @ sv.amps)))
            if e0 is None:
                e0 = e
            elif abs(e - e0) > 1e-8 * scale:
                raise KrylovError(
                    f"energy drift {abs(e - e0):.3e} MHz exceeds tolerance", i, abs(e - e0)
                )
    return EvolutionResult(times=times, states=states)


# ---------------------------------------------------------------------------
# gate application kernels (batched over a leading axis)

def _apply_two_qubit(t: np.ndarray, gate: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    ts = t.reshape((-1,) + (2,) * n)
    ts = np.moveaxis(ts, (i, j), (n - 1, n))
    shape = ts.shape
    flat = ts.reshape(-1, 4) @ gate.T
    ts = np.moveaxis(flat.reshape(shape), (n - 1, n), (i, j))
    return np.ascontiguousarray(ts).reshape(t.shape)


def _apply_one_qubit(t: np.ndarray, gate: np.ndarray, i: int, n: int) -> np.ndarray:
    ts = t.reshape((-1,) + (2,) * n)
    ts = np.moveaxis(ts, i, n)
    shape = ts.shape
    flat = ts.reshape(-1, 2) @ gate.T
    ts = np.moveaxis(flat.reshape(shape), n, i)
    return np.ascontiguousarray(ts).reshape(t.shape)


def _apply_layer(t: np.ndarray, layer, n: int) -> np.ndarray:
    if layer.rotations is not None:
        for site, rot in enumerate(layer.rotations, start=1):
            t = _apply_one_qubit(t, rot, site, n)
    for (i, j), gate in zip(layer.pairs, layer.gates):
        t = _apply_two_qubit(t, gate, i, j, n)
    return t


def apply_circuit(circuit: CircuitSpec, psi0: StateVector) -> EvolutionResult:
    """Apply a materialized circuit, returning the state after every layer.

    The depth axis plays the role of time: entry d is the state after d
    layers (entry 0 is the input state).
    """
    if psi0.basis.constraint != "full":
        raise ValueError("circuits act on the full basis")
    if not circuit.layers and circuit.depth > 0:
        raise ValueError("circuit gates are not materialized; call build_circuit")
    n = circuit.n
    amps = psi0.amps[None, :].copy()
    states = [psi0]
    for layer in circuit.layers:
        amps = _apply_layer(amps, layer, n)
        states.append(StateVector(psi0.basis, amps[0].copy()))
    return EvolutionResult(times=np.arange(len(states), dtype=float), states=states)


# ---------------------------------------------------------------------------
# noise model

@dataclass(frozen=True)
class NoiseModel:
    """Parametric error channels for analog and digital evolution.

    Global drifts are Ornstein-Uhlenbeck traces (std amplitude in MHz,
    correlation time in us) held piecewise constant on the ``drift_dt``
    grid; site disorder and position scatter are static per realization;
    ``decay_rate`` is the per-site |1> -> |0> jump rate in 1/us; SPAM
    fields act on bitstrings; ``pauli_rate`` is the digital per-qubit
    per-layer error probability.
    """

    rabi_drift_amp: float = 0.0
    rabi_drift_tau: float = 1.0
    detuning_drift_amp: float = 0.0
    detuning_drift_tau: float = 1.0
    site_rabi_std: float = 0.0
    site_detuning_std: float = 0.0
    position_std: float = 0.0
    decay_rate: float = 0.0
    prep_error: float = 0.0
    readout_0to1: float = 0.0
    readout_1to0: float = 0.0
    pauli_rate: float = 0.0
    drift_dt: float = 0.01

    def __post_init__(self):
        for name in ("rabi_drift_amp", "detuning_drift_amp", "site_rabi_std",
                     "site_detuning_std", "position_std", "decay_rate", "pauli_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("prep_error", "readout_0to1", "readout_1to0"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.drift_dt <= 0:
            raise ValueError("drift_dt must be positive")

    @property
    def has_drift(self) -> bool:
        return self.rabi_drift_amp > 0 or self.detuning_drift_amp > 0

    @property
    def has_site_disorder(self) -> bool:
        return self.site_rabi_std > 0 or self.site_detuning_std > 0 or self.position_std > 0


def ou_trace(amp: float, tau: float, n_steps: int, dt: float,
             rng: np.random.Generator) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck samples on a uniform grid."""
    if amp == 0:
        return np.zeros(n_steps)
    rho = math.exp(-dt / tau)
    out = np.empty(n_steps)
    out[0] = amp * rng.standard_normal()
    innov = amp * math.sqrt(1.0 - rho * rho) * rng.standard_normal(n_steps - 1)
    for k in range(1, n_steps):
        out[k] = out[k - 1] * rho + innov[k - 1]
    return out


# ---------------------------------------------------------------------------
# Monte Carlo wavefunction trajectories

def _lowering_maps(basis: BasisMap):
    """Per-site index maps for the |0><1| jump operator."""
    n = basis.n
    codes = basis.states
    maps = []
    for i in range(n):
        bit = np.int64(1) << (n - 1 - i)
        src = np.nonzero((codes & bit) != 0)[0]
        tgt = np.searchsorted(codes, codes[src] ^ bit)
        maps.append((src, tgt))
    return maps


def _occupation_matrix(basis: BasisMap) -> np.ndarray:
    return basis.bits().astype(float)


def _sample_disordered_spec(spec: RydbergSpec, noise: NoiseModel,
                            rng: np.random.Generator) -> tuple[RydbergSpec, dict]:
    disorder: dict = {}
    kwargs = {}
    if noise.site_rabi_std > 0:
        d = rng.normal(0.0, noise.site_rabi_std, size=spec.n)
        kwargs["omega_offsets"] = tuple(d)
        disorder["omega_offsets"] = d
    if noise.site_detuning_std > 0:
        d = rng.normal(0.0, noise.site_detuning_std, size=spec.n)
        kwargs["delta_offsets"] = tuple(d)
        disorder["delta_offsets"] = d
    if noise.position_std > 0:
        d = rng.normal(0.0, noise.position_std, size=spec.n)
        kwargs["site_displacements"] = tuple(d)
        disorder["site_displacements"] = d
    return replace(spec, **kwargs), disorder


def _run_single_trajectory(spec, basis, noise, psi0_amps, times, rng,
                           h_unit_omega, h_unit_delta, occ, low_maps):
    """Propagate one stochastic wavefunction; returns (amps per time, jumps, disorder)."""
    traj_spec, disorder = _sample_disordered_spec(spec, noise, rng)
    h_base = build_rydberg(traj_spec, basis)
    n_times = len(times)
    t_max = float(times[-1])
    gamma = noise.decay_rate
    out = np.empty((n_times, basis.dim), dtype=np.complex128)
    jumps: list[tuple[float, int]] = []

    if not noise.has_drift and gamma == 0:
        # static Hamiltonian, unitary: one dense eigendecomposition
        evals, evecs = np.linalg.eigh(h_base.toarray())
        coeff = evecs.conj().T @ psi0_amps
        for k, t in enumerate(times):
            out[k] = evecs @ (np.exp(-1j * TWO_PI * evals * t) * coeff)
        return out, jumps, disorder

    dt = noise.drift_dt
    n_ticks = max(1, math.ceil(t_max / dt - 1e-12))
    # step boundaries: uniform drift ticks joined with the requested times,
    # so outputs are emitted at their exact times
    ticks = np.linspace(0.0, t_max, n_ticks + 1)
    grid = np.unique(np.concatenate([ticks, times, [0.0]]))
    d_omega = ou_trace(noise.rabi_drift_amp, noise.rabi_drift_tau, n_ticks, dt, rng)
    d_delta = ou_trace(noise.detuning_drift_amp, noise.detuning_drift_tau, n_ticks, dt, rng)
    tick_width = ticks[1] - ticks[0] if n_ticks >= 1 else dt

    occ_total = occ.sum(axis=1)
    prop_cache: dict[float, np.ndarray] = {}
    h_dense = None
    if not noise.has_drift:
        h_dense = h_base.toarray().astype(np.complex128)

    def fixed_propagator(step: float) -> np.ndarray:
        key = round(step, 15)
        if key not in prop_cache:
            gen = -1j * TWO_PI * h_dense * step
            if gamma > 0:
                gen = gen - np.diag(0.5 * gamma * occ_total * step)
            prop_cache[key] = scipy.linalg.expm(gen)
        return prop_cache[key]

    def segment_h(t_lo):
        if h_dense is not None:
            return None
        tick_idx = min(int(t_lo / tick_width), n_ticks - 1)
        h_t = h_base
        if d_omega[tick_idx] != 0:
            h_t = h_t + d_omega[tick_idx] * h_unit_omega
        if d_delta[tick_idx] != 0:
            h_t = h_t + d_delta[tick_idx] * h_unit_delta
        return h_t

    def prop(psi, step, h_t):
        if h_dense is not None:
            return fixed_propagator(step) @ psi
        if gamma > 0:
            psi = np.exp(-0.25 * gamma * occ_total * step) * psi
        psi = krylov_propagate(h_t, psi, step, m=20, tol=1e-11)
        if gamma > 0:
            psi = np.exp(-0.25 * gamma * occ_total * step) * psi
        return psi

    def apply_jump(psi, t_now):
        nonlocal r_jump
        probs = np.abs(psi) ** 2
        weights = probs @ occ
        total = weights.sum()
        if total > 0:
            site = int(rng.choice(spec.n, p=weights / total))
            src, tgt = low_maps[site]
            new = np.zeros_like(psi)
            new[tgt] = psi[src]
            psi = new / np.linalg.norm(new)
            jumps.append((float(t_now), site + 1))
        r_jump = rng.random()
        return psi

    psi = psi0_amps.astype(np.complex128).copy()
    r_jump = rng.random()
    next_out = 0
    while next_out < n_times and times[next_out] <= 1e-15:
        out[next_out] = psi / np.linalg.norm(psi)
        next_out += 1
    for k in range(grid.size - 1):
        t_lo, t_hi = grid[k], grid[k + 1]
        h_t = segment_h(t_lo)
        # propagate the segment, bisecting to locate norm-threshold crossings
        # (quantum jumps) to a fraction of the segment width
        remaining = t_hi - t_lo
        t_now = t_lo
        while remaining > 1e-15:
            trial = prop(psi, remaining, h_t)
            if gamma == 0 or float(np.real(np.vdot(trial, trial))) > r_jump:
                psi = trial
                t_now += remaining
                remaining = 0.0
                break
            width = remaining
            min_width = remaining / 128
            while width > min_width:
                half = width / 2
                trial = prop(psi, half, h_t)
                if float(np.real(np.vdot(trial, trial))) > r_jump:
                    psi = trial
                    t_now += half
                    remaining -= half
                width = half
            psi = apply_jump(psi, t_now)
        while next_out < n_times and times[next_out] <= t_hi + 1e-12:
            out[next_out] = psi / np.linalg.norm(psi)
            next_out += 1
    while next_out < n_times:
        out[next_out] = psi / np.linalg.norm(psi)
        next_out += 1
    return out, jumps, disorder


def run_trajectories(spec: RydbergSpec, basis: BasisMap, noise: NoiseModel,
                     psi0: StateVector, times, n_traj: int, seed: int,
                     reference: EvolutionResult | None = None,
                     keep_trajectories: bool = False,
                     threads: int = 1) -> TrajectoryResult:
    """Average noisy quantum trajectories of a driven Rydberg chain.

    Each trajectory resamples static site disorder and global drift traces
    and unravels decay as quantum jumps.  ``reference`` (a clean
    ``evolve_exact`` result on the same time grid) enables the per-time
    model fidelity <psi_0(t)| rho(t) |psi_0(t)>.

    Results are averaged in trajectory-index order, so they are
    reproducible for a fixed (seed, n_traj) regardless of thread count.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    h_unit_omega = build_rydberg(replace(spec, omega=1.0, delta=0.0, c6=0.0), basis)
    h_unit_delta = build_rydberg(replace(spec, omega=0.0, delta=1.0, c6=0.0), basis)
    occ = _occupation_matrix(basis)
    low_maps = _lowering_maps(basis)
    ref_amps = None
    if reference is not None:
        ref_amps = np.stack([sv.amps for sv in reference.states])

    def one(idx: int):
        rng = np.random.default_rng([seed, idx])
        return _run_single_trajectory(
            spec, basis, noise, psi0.amps, times, rng,
            h_unit_omega, h_unit_delta, occ, low_maps,
        )

    results: list = [None] * n_traj
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for idx, res in enumerate(pool.map(one, range(n_traj))):
                results[idx] = res
    else:
        for idx in range(n_traj):
            results[idx] = one(idx)

    dim = basis.dim
    n_times = times.size
    prob_sum = np.zeros((n_times, dim))
    occ_sum = np.zeros((n_times, spec.n))
    occ_sq = np.zeros((n_times, spec.n))
    fid_sum = np.zeros(n_times)
    fid_sq = np.zeros(n_times)
    blk_sum = np.zeros(n_times)
    blk_sq = np.zeros(n_times)
    legal = np.fromiter((is_blockade_legal(int(c)) for c in basis.states), bool, dim)
    trajectories: list[Trajectory] = []
    for amps_t, jumps, disorder in results:
        probs = np.abs(amps_t) ** 2
        prob_sum += probs
        occs = probs @ occ
        occ_sum += occs
        occ_sq += occs**2
        blk = probs[:, legal].sum(axis=1)
        blk_sum += blk
        blk_sq += blk**2
        if ref_amps is not None:
            f = np.abs(np.sum(ref_amps.conj() * amps_t, axis=1)) ** 2
            fid_sum += f
            fid_sq += f**2
        if keep_trajectories:
            trajectories.append(
                Trajectory(jumps=jumps, disorder=disorder,
                           final=StateVector(basis, amps_t[-1]))
            )

    def mean_err(total, total_sq, m):
        mean = total / m
        var = np.maximum(total_sq / m - mean**2, 0.0)
        err = np.sqrt(var / m) if m > 1 else np.zeros_like(mean)
        return mean, err

    observables = {
        "occupations": mean_err(occ_sum, occ_sq, n_traj),
        "blockade_weight": mean_err(blk_sum, blk_sq, n_traj),
    }
    fid = fid_err = None
    if ref_amps is not None:
        fid, fid_err = mean_err(fid_sum, fid_sq, n_traj)
    return TrajectoryResult(
        times=times, probs=prob_sum / n_traj, observables=observables,
        n_traj=n_traj, basis=basis, fidelity=fid, fidelity_err=fid_err,
        trajectories=trajectories if keep_trajectories else None,
    )


# ---------------------------------------------------------------------------
# noisy circuits (digital Pauli errors)

_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


@dataclass
class NoisyCircuitResult:
    depths: np.ndarray
    probs: np.ndarray          # (n_depths, dim) averaged bitstring distribution
    fidelity: np.ndarray       # <psi_ideal| rho |psi_ideal> per depth
    ideal_probs: np.ndarray    # (n_depths, dim) error-free |<z|psi>|^2
    n_traj: int


def run_noisy_circuit(circuit: CircuitSpec, gamma_err: float, psi0: StateVector,
                      n_traj: int, seed: int, chunk: int = 256) -> NoisyCircuitResult:
    """Stochastic Pauli-error unfolding of a layered circuit.

    After every layer each qubit independently suffers a uniformly chosen
    Pauli with probability ``gamma_err``.  Averaging >= 10^4 trajectories
    approximates the density matrix; the default chunk size batches
    trajectories through the gate kernels.
    """
    if gamma_err < 0:
        raise ValueError("gamma_err must be >= 0")
    n = circuit.n
    ideal = apply_circuit(circuit, psi0)
    ideal_amps = np.stack([sv.amps for sv in ideal.states])
    depth = len(circuit.layers)
    dim = psi0.basis.dim
    if gamma_err == 0:
        probs = np.abs(ideal_amps) ** 2
        return NoisyCircuitResult(
            depths=np.arange(depth + 1), probs=probs,
            fidelity=np.ones(depth + 1), ideal_probs=probs, n_traj=n_traj,
        )
    prob_sum = np.zeros((depth + 1, dim))
    fid_sum = np.zeros(depth + 1)
    done = 0
    chunk_idx = 0
    while done < n_traj:
        b = min(chunk, n_traj - done)
        rng = np.random.default_rng([seed, chunk_idx])
        t = np.broadcast_to(psi0.amps, (b, dim)).copy()
        prob_sum[0] += b * np.abs(psi0.amps) ** 2
        fid_sum[0] += b
        for d, layer in enumerate(circuit.layers, start=1):
            t = _apply_layer(t, layer, n)
            hit = rng.random((b, n)) < gamma_err
            kinds = rng.integers(0, 3, size=(b, n))
            for site in range(1, n + 1):
                for p in range(3):
                    rows = np.nonzero(hit[:, site - 1] & (kinds[:, site - 1] == p))[0]
                    if rows.size:
                        t[rows] = _apply_one_qubit(t[rows], _PAULIS[p], site, n)
            prob_sum[d] += np.sum(np.abs(t) ** 2, axis=0)
            fid_sum[d] += np.sum(np.abs(t @ ideal_amps[d].conj()) ** 2)
        done += b
        chunk_idx += 1
    return NoisyCircuitResult(
        depths=np.arange(depth + 1),
        probs=prob_sum / n_traj,
        fidelity=fid_sum / n_traj,
        ideal_probs=np.abs(ideal_amps) ** 2,
        n_traj=n_traj,
    )


# ---------------------------------------------------------------------------
# SPAM and sampling

def apply_spam(samples: SampleSet, noise: NoiseModel, seed: int) -> SampleSet:
    """Apply preparation loss (forced 0) and readout bit flips to samples."""
    n = samples.n
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = ((samples.codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    rng = np.random.default_rng(seed)
    if noise.prep_error > 0:
        lost = rng.random(bits.shape) < noise.prep_error
        bits[lost] = 0
    flip01 = (bits == 0) & (rng.random(bits.shape) < noise.readout_0to1)
    flip10 = (bits == 1) & (rng.random(bits.shape) < noise.readout_1to0)
    bits = bits ^ flip01 ^ flip10
    codes = (bits.astype(np.int64) << shifts[None, :]).sum(axis=1)
    meta = dict(samples.meta)
    meta["spam"] = {
        "prep_error": noise.prep_error,
        "readout_0to1": noise.readout_0to1,
        "readout_1to0": noise.readout_1to0,
        "seed": seed,
    }
    return SampleSet(n=n, codes=codes, basis=samples.basis, meta=meta)


def sample_bitstrings(source, m: int, seed: int) -> SampleSet:
    """Draw i.i.d. bitstring samples from a state or distribution.

    ``source`` is a StateVector, a (BasisMap, probs) pair, or any object
    with ``basis`` and ``probs`` attributes.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if isinstance(source, StateVector):
        basis, probs = source.basis, source.probabilities()
    elif isinstance(source, tuple):
        basis, probs = source
    else:
        basis, probs = source.basis, np.asarray(source.probs)
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(basis.dim, size=m, p=probs)
    return SampleSet(
        n=basis.n, codes=basis.states[idx],
        meta={"seed": seed, "constraint": basis.constraint},
    )


# ---------------------------------------------------------------------------
# observables

def half_chain_bipartition(n: int) -> Bipartition:
    return Bipartition.contiguous(n, n // 2)


def entanglement_entropy(state: StateVector, part: Bipartition | None = None) -> float:
    """Bipartite entanglement entropy in bits (base-2, Schmidt spectrum)."""
    basis = state.basis
    if part is None and basis.n < 2:
        return 0.0
    part = part or half_chain_bipartition(basis.n)
    la, lb = part.len_a, part.len_b
    if la + lb > 26:
        raise ValueError("bipartition too large for a dense Schmidt decomposition")
    mat = np.zeros((1 << la, 1 << lb), dtype=np.complex128)
    rows = np.empty(basis.dim, dtype=np.int64)
    cols = np.empty(basis.dim, dtype=np.int64)
    for k, code in enumerate(basis.states):
        ca, cb = part.split_code(int(code))
        rows[k], cols[k] = ca, cb
    mat[rows, cols] = state.amps
    sing = scipy.linalg.svd(mat, compute_uv=False)
    lam = sing[sing > 1e-12] ** 2
    return float(-np.sum(lam * np.log2(lam)))


def observables(state: StateVector, part: Bipartition | None = None) -> dict:
    """Standard diagnostics: half-chain entropy (bits), site occupations,
    blockade weight, and site-reversal parity expectation."""
    basis = state.basis
    probs = state.probabilities()
    occ = probs @ basis.bits().astype(float)
    legal = np.fromiter((is_blockade_legal(int(c)) for c in basis.states), bool, basis.dim)
    parity = np.nan
    if basis.sector == "all":
        perm = basis.reversal_permutation()
        parity = float(np.real(np.sum(state.amps.conj()[perm] * state.amps)))
    return {
        "entropy_halfchain": entanglement_entropy(state, part),
        "occupations": occ,
        "blockade_weight": float(probs[legal].sum()),
        "parity_expectation": parity,
    }
