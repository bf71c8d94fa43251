import numpy as np
import pytest

from projens import analysis as an


def synthetic_entropy_traces(m1=2.0, sizes=(10, 14, 18)):
    traces = {}
    for n in sizes:
        tc = 0.05 * n - 0.04
        m2 = 0.015
        t = np.linspace(0.02, 1.4, 60)
        s = np.where(t <= tc, m1 * t, m1 * tc + m2 * (t - tc))
        traces[n] = (t, s)
    return traces


# ---------------------------------------------------------------------------
# entanglement-time fit

def test_piecewise_fit_exact_recovery():
    traces = synthetic_entropy_traces()
    fit = an.fit_entanglement_time(traces, c=1.35)
    assert abs(fit.m1 - 2.0) < 1e-6
    for n in traces:
        assert abs(fit.t_c[n] - (0.05 * n - 0.04)) < 1e-6
        assert abs(fit.m2[n] - 0.015) < 1e-6
        assert np.isclose(fit.t_ent[n], 1.35 * fit.t_c[n])
    assert abs(fit.alpha1 - 1.35 * 0.05) < 1e-6
    assert abs(fit.alpha0 - 1.35 * (-0.04)) < 1e-6
    assert fit.t_ent_at(12) == pytest.approx(fit.alpha0 + 12 * fit.alpha1)


def test_piecewise_fit_needs_three_sizes():
    traces = synthetic_entropy_traces(sizes=(10, 12))
    with pytest.raises(ValueError):
        an.fit_entanglement_time(traces)


def test_piecewise_fit_rejects_nonmonotone():
    traces = synthetic_entropy_traces()
    t, s = traces[10]
    s = s.copy()
    s[30] = 0.1 * s.max()
    traces[10] = (t, s)
    with pytest.raises(ValueError, match="not monotone"):
        an.fit_entanglement_time(traces)


def test_t_ent_increasing_for_positive_slopes():
    fit = an.fit_entanglement_time(synthetic_entropy_traces())
    sizes = sorted(fit.t_ent)
    assert all(fit.t_ent[a] < fit.t_ent[b] for a, b in zip(sizes, sizes[1:]))


def test_saturated_entropy_fit():
    traces = synthetic_entropy_traces()
    fit = an.fit_entanglement_time(traces, c=1.35)
    s0, s1, s0_err, s1_err = an.fit_saturated_entropy(traces, fit)
    # at t_ent the synthetic profile is m1 tc + m2 (0.35 tc)
    expected = {n: 2.0 * tc + 0.015 * 0.35 * tc for n, tc in fit.t_c.items()}
    slope = np.polyfit(sorted(expected), [expected[n] for n in sorted(expected)], 1)[0]
    assert abs(s1 - slope) < 1e-6


# ---------------------------------------------------------------------------
# fidelity decay

def test_decay_fit_exact():
    t = np.linspace(0.1, 2.0, 25)
    traces = {n: (t, 0.9 * np.exp(-(0.12 + 0.017 * n) * t)) for n in (10, 14, 18, 22)}
    fit = an.fit_fidelity_decay(traces)
    for n in traces:
        assert abs(fit.gammas[n] - (0.12 + 0.017 * n)) < 1e-6
    assert abs(fit.gamma0 - 0.12) < 1e-6
    assert abs(fit.gamma1 - 0.017) < 1e-6
    assert fit.gamma_at(16) == pytest.approx(0.12 + 0.017 * 16)


def test_decay_fit_single_rate():
    t = np.linspace(0.0, 3.0, 20)
    traces = {n: (t, np.exp(-0.3 * t)) for n in (8, 10, 12)}
    fit = an.fit_fidelity_decay(traces)
    assert abs(fit.gammas[8] - 0.3) < 1e-6


def test_decay_fit_rejects_nonpositive():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        an.fit_fidelity_decay({8: (t, np.array([1.0, 0.5, 0.0, 0.2, 0.1]))})


def test_predicted_fidelity():
    traces = {n: (np.linspace(0.1, 2, 20), np.exp(-(0.1 + 0.02 * n) * np.linspace(0.1, 2, 20)))
              for n in (8, 10, 12)}
    decay = an.fit_fidelity_decay(traces)
    tent = an.fit_entanglement_time(synthetic_entropy_traces(sizes=(8, 10, 12)))
    n = 10
    expected = 0.997**n * np.exp(-decay.gamma_at(n) * tent.t_ent_at(n))
    assert np.isclose(an.predicted_fidelity(n, decay, tent), expected)


# ---------------------------------------------------------------------------
# Page equivalence and cycle fidelity

def test_page_constants():
    assert abs(an.PAGE_INTERCEPT + 0.7213475) < 1e-6
    assert an.PAGE_SLOPE == 0.5


def test_page_equivalence_reference_map():
    slope, intercept = an.page_map_coefficients(0.16, 0.26)
    assert abs(slope - 0.52) < 0.005
    assert abs(intercept - 1.76) < 0.005
    assert np.isclose(an.page_equivalence(0.16, 0.26, 10), slope * 10 + intercept)


PAPER_GAMMA = (0.12, 0.017)
PAPER_TENT = (-0.0580, 0.05404)
PAPER_PAGE = (0.16, 0.26)
PAPER_DENT_FSIM = (-0.395, 0.557)
PAPER_DENT_SU4 = (-3.18, 2.261)


def test_cycle_fidelity_reference_values():
    # tolerance-banded regression against the published cycle fidelities
    for n in (10, 15, 20):
        fsim = an.cycle_fidelity(n, PAPER_GAMMA, PAPER_TENT, PAPER_DENT_FSIM, PAPER_PAGE)
        assert abs(fsim.f_cycle - 0.987) < 0.002
        su4 = an.cycle_fidelity(n, PAPER_GAMMA, PAPER_TENT, PAPER_DENT_SU4, PAPER_PAGE)
        assert abs(su4.f_cycle - 0.9965) < 0.001
    values = [
        an.cycle_fidelity(n, PAPER_GAMMA, PAPER_TENT, PAPER_DENT_FSIM, PAPER_PAGE).f_cycle
        for n in range(10, 23, 2)
    ]
    assert max(values) - min(values) < 0.002  # nearly size-independent


def test_cycle_fidelity_zero_decay_limit():
    rep = an.cycle_fidelity(12, (0.0, 0.0), PAPER_TENT, PAPER_DENT_SU4, PAPER_PAGE)
    assert rep.f_cycle == 1.0


def test_cycle_fidelity_uncertainty_scales():
    errors_full = {"gamma0": 0.04, "gamma1": 0.003, "alpha0": 0.0002,
                   "alpha1": 0.00001, "beta0": 0.017, "beta1": 0.001,
                   "sigma0": 0.04, "sigma1": 0.03}
    sigmas = []
    for scale in (1.0, 0.5, 0.1):
        errs = {k: scale * v for k, v in errors_full.items()}
        rep = an.cycle_fidelity(14, PAPER_GAMMA, PAPER_TENT, PAPER_DENT_FSIM,
                                PAPER_PAGE, errors=errs)
        sigmas.append(rep.sigma)
    assert sigmas[0] > sigmas[1] > sigmas[2] > 0
