import numpy as np
import pytest
import scipy.linalg
import scipy.sparse
from scipy.integrate import solve_ivp

from projens import evolve as ev
from projens import hilbert as hb
from projens import models as md

RYD_PARAMS = dict(omega=4.7, delta=0.9, c6=249e3, spacing=3.75)


def rydberg_basis_h(n, constraint="blockade", **overrides):
    params = {**RYD_PARAMS, **overrides}
    spec = md.RydbergSpec(n=n, **params)
    basis = hb.build_basis(n, constraint)
    return spec, basis, md.build_rydberg(spec, basis)


# ---------------------------------------------------------------------------
# exact evolution

def test_pi_pulse_single_qubit():
    omega = 5.0
    spec = md.RydbergSpec(n=1, omega=omega, delta=0.0)
    basis = hb.build_basis(1)
    h = md.build_rydberg(spec, basis)
    t_pi = np.pi / (2 * np.pi * omega)
    res = ev.evolve_exact(h, hb.StateVector.zero_state(basis), [t_pi])
    assert np.isclose(res.states[0].probabilities()[basis.index("1")], 1.0, atol=1e-10)


def test_zero_hamiltonian_is_identity():
    basis = hb.build_basis(3)
    h = scipy.sparse.csr_matrix((8, 8), dtype=complex)
    psi0 = hb.StateVector.from_unnormalized(basis, np.arange(1, 9, dtype=complex))
    res = ev.evolve_exact(h, psi0, [0.3, 0.7, 2.0])
    for sv in res.states:
        assert np.allclose(sv.amps, psi0.amps, atol=1e-12)


def test_krylov_matches_dense():
    rng = np.random.default_rng(5)
    dim = 240
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (a + a.conj().T) / 8
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    for t in (0.05, 0.7):
        expected = scipy.linalg.expm(-1j * ev.TWO_PI * h * t) @ v
        got = ev.krylov_propagate(h, v, t)
        assert np.linalg.norm(got - expected) < 1e-8


def test_evolve_exact_krylov_path_matches_dense_path():
    spec, basis, h = rydberg_basis_h(9)
    psi0 = hb.StateVector.zero_state(basis)
    times = [0.1, 0.35, 0.8]
    dense = ev.evolve_exact(h, psi0, times)
    krylov = ev.evolve_exact(h, psi0, times, dense_threshold=1)
    for a, b in zip(dense.states, krylov.states):
        assert np.abs(np.abs(a.overlap(b)) - 1) < 1e-8


def test_norm_and_energy_conserved():
    spec, basis, h = rydberg_basis_h(8)
    psi0 = hb.StateVector.zero_state(basis)
    times = np.linspace(0.05, 2.0, 12)
    res = ev.evolve_exact(h, psi0, times)
    e = [np.real(np.vdot(s.amps, h @ s.amps)) for s in res.states]
    assert np.max(np.abs(np.diff(e))) < 1e-8 * max(1.0, abs(e[0]))
    for s in res.states:
        assert abs(np.sum(s.probabilities()) - 1) < 1e-10


def test_parity_conserved_from_symmetric_start():
    for n in (6, 10):
        spec, basis, h = rydberg_basis_h(n, omega=5.3, delta=0.5)
        psi0 = hb.StateVector.zero_state(basis)
        res = ev.evolve_exact(h, psi0, [0.2, 0.9, 1.7])
        for s in res.states:
            assert abs(ev.observables(s)["parity_expectation"] - 1.0) < 1e-8


def test_times_must_increase():
    with pytest.raises(ValueError):
        ev.EvolutionResult(times=np.array([0.2, 0.1]))


# ---------------------------------------------------------------------------
# circuits

def test_apply_circuit_identity():
    spec = md.CircuitSpec(n=3, depth=2, seed=0)
    spec = md.build_circuit(spec)
    for layer in spec.layers:
        layer.gates = [np.eye(4, dtype=complex) for _ in layer.pairs]
    basis = hb.build_basis(3)
    psi0 = hb.StateVector.zero_state(basis)
    res = ev.apply_circuit(spec, psi0)
    assert np.allclose(res.states[-1].amps, psi0.amps)


def test_single_su4_gives_first_column():
    spec = md.build_circuit(md.CircuitSpec(n=2, depth=1, seed=9))
    basis = hb.build_basis(2)
    res = ev.apply_circuit(spec, hb.StateVector.zero_state(basis))
    u = spec.layers[0].gates[0]
    assert np.allclose(res.states[-1].amps, u[:, 0])
    assert np.isclose(np.linalg.norm(res.states[-1].amps), 1.0)


def test_gate_kernel_matches_kron():
    rng = np.random.default_rng(3)
    n = 4
    basis = hb.build_basis(n)
    psi = hb.StateVector.from_unnormalized(
        basis, rng.normal(size=16) + 1j * rng.normal(size=16)
    )
    gate = md.sample_su4(rng)
    out = ev._apply_two_qubit(psi.amps[None, :], gate, 2, 3, n)[0]
    full = np.kron(np.kron(np.eye(2), gate), np.eye(2))
    assert np.allclose(out, full @ psi.amps, atol=1e-12)
    rot = ev._PAULIS[1]
    out1 = ev._apply_one_qubit(psi.amps[None, :], rot, 4, n)[0]
    full1 = np.kron(np.eye(8), rot)
    assert np.allclose(out1, full1 @ psi.amps, atol=1e-12)


def test_circuit_entropy_reaches_page_regime():
    spec = md.build_circuit(md.CircuitSpec(n=8, gate_set="su4", depth=24, seed=21))
    basis = hb.build_basis(8)
    res = ev.apply_circuit(spec, hb.StateVector.zero_state(basis))
    s = ev.entanglement_entropy(res.states[-1])
    assert 2.6 < s < 4.0  # Page value for n=8 is 3.28 bits


# ---------------------------------------------------------------------------
# trajectories

def test_trajectories_noiseless_equal_exact():
    spec, basis, h = rydberg_basis_h(6)
    psi0 = hb.StateVector.zero_state(basis)
    times = [0.2, 0.5]
    exact = ev.evolve_exact(h, psi0, times)
    traj = ev.run_trajectories(
        spec, basis, ev.NoiseModel(), psi0, times, n_traj=3, seed=1
    )
    for k, sv in enumerate(exact.states):
        assert np.allclose(traj.probs[k], sv.probabilities(), atol=1e-10)


def test_single_qubit_decay_oracle():
    # survival of |1> under pure decay follows exp(-Gamma t)
    gamma = 1.3
    spec = md.RydbergSpec(n=1, omega=0.0, delta=0.0)
    basis = hb.build_basis(1)
    psi0 = hb.StateVector.basis_state(basis, "1")
    times = [0.25, 0.6, 1.0]
    n_traj = 10_000
    noise = ev.NoiseModel(decay_rate=gamma, drift_dt=0.05)
    res = ev.run_trajectories(spec, basis, noise, psi0, times, n_traj=n_traj, seed=7)
    occ, occ_err = res.observables["occupations"]
    for k, t in enumerate(times):
        p = np.exp(-gamma * t)
        sigma = max(np.sqrt(p * (1 - p) / n_traj), 1e-4)
        assert abs(occ[k, 0] - p) < 3 * sigma + 0.003


def test_two_qubit_lindblad_oracle():
    # trajectory-averaged projectors vs dense Lindblad integration
    spec = md.RydbergSpec(n=2, omega=2.0, delta=1.0, c6=50.0, spacing=1.0)
    basis = hb.build_basis(2)
    h = md.build_rydberg(spec, basis).toarray()
    gamma = 0.5
    t_final = 0.8

    lowering = []
    for i in range(2):
        l = np.zeros((4, 4))
        for k, code in enumerate(basis.states):
            bit = 1 << (1 - i)
            if code & bit:
                l[basis.index(int(code) ^ bit), k] = 1.0
        lowering.append(l)

    def rhs(_, y):
        rho = y.reshape(4, 4)
        out = -1j * ev.TWO_PI * (h @ rho - rho @ h)
        for l in lowering:
            out += gamma * (l @ rho @ l.T - 0.5 * (l.T @ l @ rho + rho @ l.T @ l))
        return out.ravel()

    psi0 = hb.StateVector.from_unnormalized(basis, np.array([1, 1, 1, 0], complex))
    rho0 = np.outer(psi0.amps, psi0.amps.conj())
    sol = solve_ivp(rhs, (0, t_final), rho0.ravel().astype(complex),
                    rtol=1e-10, atol=1e-12)
    rho_exact = sol.y[:, -1].reshape(4, 4)

    n_traj = 100_000
    noise = ev.NoiseModel(decay_rate=gamma, drift_dt=0.04)
    res = ev.run_trajectories(spec, basis, noise, psi0, [t_final],
                              n_traj=n_traj, seed=3, keep_trajectories=True)
    rho_mc = np.zeros((4, 4), dtype=complex)
    for traj in res.trajectories:
        rho_mc += np.outer(traj.final.amps, traj.final.amps.conj())
    rho_mc /= n_traj
    dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho_mc - rho_exact)))
    assert dist <= 0.01


def test_trajectories_with_drift_stay_normalized():
    spec, basis, h = rydberg_basis_h(4)
    psi0 = hb.StateVector.zero_state(basis)
    noise = ev.NoiseModel(rabi_drift_amp=0.3, rabi_drift_tau=0.5,
                          detuning_drift_amp=0.2, site_detuning_std=0.1,
                          drift_dt=0.02)
    res = ev.run_trajectories(spec, basis, noise, psi0, [0.1, 0.4], n_traj=4, seed=2)
    assert np.allclose(res.probs.sum(axis=1), 1.0, atol=1e-9)
    # static disorder must change the outcome relative to clean evolution
    clean = ev.evolve_exact(h, psi0, [0.1, 0.4])
    assert not np.allclose(res.probs[1], clean.states[1].probabilities(), atol=1e-4)


def test_trajectories_threads_deterministic():
    spec, basis, _ = rydberg_basis_h(4)
    psi0 = hb.StateVector.zero_state(basis)
    noise = ev.NoiseModel(site_detuning_std=0.3, decay_rate=0.2)
    a = ev.run_trajectories(spec, basis, noise, psi0, [0.3], n_traj=6, seed=11, threads=1)
    b = ev.run_trajectories(spec, basis, noise, psi0, [0.3], n_traj=6, seed=11, threads=3)
    assert np.array_equal(a.probs, b.probs)


# ---------------------------------------------------------------------------
# noisy circuits

def test_noisy_circuit_zero_rate_matches_ideal():
    circ = md.build_circuit(md.CircuitSpec(n=4, depth=3, seed=5))
    basis = hb.build_basis(4)
    res = ev.run_noisy_circuit(circ, 0.0, hb.StateVector.zero_state(basis), 10, seed=0)
    assert np.allclose(res.probs, res.ideal_probs)
    assert np.allclose(res.fidelity, 1.0)


def test_noisy_circuit_full_depolarization_oracle():
    # one qubit, depth 1, gamma = 1: uniform Pauli gives p = (1/3, 2/3)
    circ = md.build_circuit(md.CircuitSpec(n=1, depth=1, seed=5))
    basis = hb.build_basis(1)
    res = ev.run_noisy_circuit(circ, 1.0, hb.StateVector.zero_state(basis),
                               30_000, seed=1)
    assert abs(res.probs[1][0] - 1 / 3) < 0.01
    assert abs(res.probs[1][1] - 2 / 3) < 0.01


def test_noisy_circuit_fidelity_decays():
    circ = md.build_circuit(md.CircuitSpec(n=6, depth=6, seed=2))
    basis = hb.build_basis(6)
    res = ev.run_noisy_circuit(circ, 0.02, hb.StateVector.zero_state(basis),
                               2000, seed=4)
    assert res.fidelity[0] == 1.0
    assert np.all(np.diff(res.fidelity) < 0.02)
    assert res.fidelity[-1] < 0.7


# ---------------------------------------------------------------------------
# SPAM and sampling

def test_spam_identity():
    samples = ev.SampleSet(n=4, codes=np.array([3, 9, 0]))
    out = ev.apply_spam(samples, ev.NoiseModel(), seed=0)
    assert np.array_equal(out.codes, samples.codes)


def test_spam_forced_readout():
    samples = ev.SampleSet(n=4, codes=np.array([15, 7, 1]))
    out = ev.apply_spam(samples, ev.NoiseModel(readout_1to0=1.0), seed=0)
    assert np.array_equal(out.codes, np.zeros(3, dtype=np.int64))
    out2 = ev.apply_spam(samples, ev.NoiseModel(readout_0to1=1.0), seed=0)
    assert np.array_equal(out2.codes, np.full(3, 15, dtype=np.int64))


def test_spam_prep_error_rate():
    rng_codes = np.full(20_000, 0b1111, dtype=np.int64)
    samples = ev.SampleSet(n=4, codes=rng_codes)
    out = ev.apply_spam(samples, ev.NoiseModel(prep_error=0.25), seed=3)
    bits = ((out.codes[:, None] >> np.arange(3, -1, -1)) & 1)
    assert abs(bits.mean() - 0.75) < 0.01


def test_sample_deterministic_state():
    basis = hb.build_basis(5, "blockade")
    psi = hb.StateVector.zero_state(basis)
    s = ev.sample_bitstrings(psi, 50, seed=0)
    assert np.array_equal(s.codes, np.zeros(50, dtype=np.int64))


@pytest.mark.parametrize("n", [2, 4])
def test_sample_frequencies_concentrate(n):
    rng = np.random.default_rng(n)
    basis = hb.build_basis(n)
    psi = hb.StateVector.from_unnormalized(
        basis, rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    )
    m = 40_000
    s = ev.sample_bitstrings(psi, m, seed=1)
    freq = np.bincount(s.codes, minlength=basis.dim) / m
    assert np.max(np.abs(freq - psi.probabilities())) <= 4 / np.sqrt(m)


def test_sample_reproducible():
    basis = hb.build_basis(3)
    psi = hb.StateVector.from_unnormalized(basis, np.arange(1.0, 9.0))
    a = ev.sample_bitstrings(psi, 100, seed=42)
    b = ev.sample_bitstrings(psi, 100, seed=42)
    assert np.array_equal(a.codes, b.codes)


# ---------------------------------------------------------------------------
# observables

def test_entropy_product_state():
    basis = hb.build_basis(4)
    assert ev.entanglement_entropy(hb.StateVector.zero_state(basis)) < 1e-10


def test_entropy_bell_state():
    basis = hb.build_basis(2)
    amps = np.zeros(4, complex)
    amps[basis.index("00")] = amps[basis.index("11")] = 1 / np.sqrt(2)
    assert np.isclose(ev.entanglement_entropy(hb.StateVector(basis, amps)), 1.0)


def test_blockade_weight_short_time():
    spec, basis, h = rydberg_basis_h(10, constraint="full")
    psi0 = hb.StateVector.zero_state(basis)
    res = ev.evolve_exact(h, psi0, [0.05, 0.2])
    for sv in res.states:
        assert ev.observables(sv)["blockade_weight"] >= 0.99


def test_ou_trace_statistics():
    rng = np.random.default_rng(0)
    amp, tau, dt = 0.7, 0.4, 0.02
    traces = np.stack([ev.ou_trace(amp, tau, 400, dt, rng) for _ in range(200)])
    assert abs(np.std(traces) - amp) < 0.05
    lag = int(tau / dt)
    corr = np.mean(traces[:, :-lag] * traces[:, lag:]) / np.var(traces)
    assert abs(corr - np.exp(-1.0)) < 0.08
