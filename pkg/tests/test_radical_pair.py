import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from decohere import radical_pair as rp
from decohere.radical_pair import RadicalPairModel


def omega_a(a_mt):
    return rp.OMEGA_PER_MT * a_mt


def zero_field_ps(a_mt, t):
    """One spin-1/2 nucleus on electron 1, isotropic coupling, no field."""
    return 5 / 8 + 3 / 8 * np.cos(omega_a(a_mt) * t)


def zero_field_yield(a_mt, k, horizon):
    w = omega_a(a_mt)
    osc = k * np.real((1 - np.exp((-k + 1j * w) * horizon)) / (k - 1j * w))
    return 5 / 8 * (1 - np.exp(-k * horizon)) + 3 / 8 * osc


RESONANT = RadicalPairModel(a_iso=0.5, b_static=(0, 0, 50.0), rf_amplitude=1.0, rf_frequency=1.4e6,
                            rf_axis=(1.0, 0.0, 0.0), k_s=1e5, k_t=1e5)


# --- Hamiltonian ---------------------------------------------------------------------------

def test_null_hamiltonian():
    assert not np.any(rp.build_hamiltonian(RadicalPairModel()).data)


def test_zeeman_spectrum():
    h = rp.build_hamiltonian(RadicalPairModel(b_static=(0, 0, 50.0)))
    w = rp.OMEGA_PER_MT * 0.05
    assert np.allclose(np.linalg.eigvalsh(h.data), w * np.array([-1, -1, 0, 0, 0, 0, 1, 1]), atol=1e-6)


def test_isotropic_coupling_conserves_electron_nucleus_spin():
    h = rp.build_hamiltonian(RadicalPairModel(a_iso=0.7)).data
    total = [rp.S1[k] + rp.IN[k] for k in range(3)]
    s2 = sum(m @ m for m in total)
    assert np.max(np.abs(h @ s2 - s2 @ h)) < 1e-10 * np.max(np.abs(h))


def test_hamiltonian_hermitian_with_rf():
    h = rp.build_hamiltonian(RESONANT, 1.7e-7)
    assert h.is_hermitian(1e-6)


def test_rf_needs_positive_frequency():
    with pytest.raises(ValueError):
        rp.build_hamiltonian(replace(RESONANT, rf_frequency=0.0))


def test_resonances_include_electron_two_larmor():
    f = rp.resonance_frequencies(replace(RESONANT, rf_amplitude=0.0))
    assert np.min(np.abs(f - rp.GAMMA_E * 1e6 * 0.05)) < 1.0


# --- singlet probability --------------------------------------------------------------------------

def test_null_model_stays_singlet():
    p = rp.singlet_probability(RadicalPairModel(), np.linspace(0, 1e-6, 11))
    assert np.allclose(p, 1.0, atol=1e-15)


def test_field_only_stays_singlet():
    p = rp.singlet_probability(RadicalPairModel(b_static=(10.0, -20.0, 40.0)), np.linspace(0, 1e-5, 21))
    assert np.allclose(p, 1.0, atol=1e-12)


def test_hyperfine_oscillation_matches_diagonalization_oracle():
    m = RadicalPairModel(a_iso=0.3, b_static=(0, 0, 30.0))
    t = np.linspace(0, 2e-7, 41)
    p = rp.singlet_probability(m, t)
    h = rp.build_hamiltonian(m).data
    ref = []
    for tk in t:
        u = expm(-1j * h * tk)
        ref.append(np.real(np.trace(rp.Q_S @ u @ rp.RHO0 @ u.conj().T)))
    assert np.max(np.abs(p - ref)) < 1e-8


def test_zero_field_closed_form():
    t = np.linspace(0, 1e-6, 301)
    assert np.max(np.abs(rp.singlet_probability(RadicalPairModel(a_iso=0.1), t) - zero_field_ps(0.1, t))) < 1e-12


def test_rf_probability_matches_fine_stepping():
    m = replace(RESONANT, k_s=0.0, k_t=0.0)
    t = np.linspace(0, 2e-6, 5)
    coarse = rp.singlet_probability(m, t, steps_per_period=64)
    fine = rp.singlet_probability(m, t, steps_per_period=256)
    assert np.max(np.abs(coarse - fine)) < 1e-4


def test_probability_rejects_recombination():
    with pytest.raises(ValueError):
        rp.singlet_probability(RESONANT, [0.0])


@given(st.floats(0.0, 1.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_probability_bounded_and_starts_at_one(a, bx, bz):
    p = rp.singlet_probability(RadicalPairModel(a_iso=a, b_static=(bx, 0.0, bz)), np.linspace(0, 1e-6, 51))
    assert p[0] == pytest.approx(1.0, abs=1e-14)
    assert np.all(p >= -1e-12) and np.all(p <= 1 + 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_isotropic_model_rotation_invariant(seed):
    b = np.array([0.0, 0.0, 45.0])
    rot = Rotation.random(random_state=seed).as_matrix()
    t = np.linspace(0, 5e-7, 26)
    p0 = rp.singlet_probability(RadicalPairModel(a_iso=0.4, b_static=tuple(b)), t)
    p1 = rp.singlet_probability(RadicalPairModel(a_iso=0.4, b_static=tuple(rot @ b)), t)
    assert np.max(np.abs(p0 - p1)) < 1e-8


# --- yields -----------------------------------------------------------------------------------------

def test_null_model_yield_is_one():
    y = rp.singlet_yield(RadicalPairModel(k_s=1e6, k_t=1e6))
    assert y.singlet_yield == pytest.approx(1 - y.surviving, abs=1e-12)
    assert y.singlet_yield > 1 - 1e-4


def test_zero_field_yield_closed_form():
    k = 3e7
    y = rp.singlet_yield(RadicalPairModel(a_iso=0.1, k_s=k, k_t=k))
    assert y.singlet_yield == pytest.approx(zero_field_yield(0.1, k, y.horizon), abs=1e-10)


def test_field_changes_yield():
    base = RadicalPairModel(a_iso=0.5, k_s=1e6, k_t=1e6)
    y0 = rp.singlet_yield(base).singlet_yield
    y50 = rp.singlet_yield(replace(base, b_static=(0, 0, 50.0))).singlet_yield
    assert y0 == pytest.approx(0.625, abs=1e-3)
    assert y50 == pytest.approx(0.389, abs=1e-3)


def test_single_open_channel():
    y = rp.singlet_yield(RadicalPairModel(a_iso=0.5, k_s=1e6, k_t=0.0), max_surviving=None)
    assert y.triplet_yield == pytest.approx(0.0, abs=1e-14)
    assert y.singlet_yield <= 1
    assert y.singlet_yield == pytest.approx(1 - y.surviving, abs=1e-10)


def test_short_horizon_flagged():
    with pytest.raises(rp.HorizonTooShort):
        rp.singlet_yield(RadicalPairModel(a_iso=0.5, k_s=1e6, k_t=1e6), horizon=1e-7)


def test_yield_needs_a_rate():
    with pytest.raises(ValueError):
        rp.singlet_yield(RadicalPairModel(a_iso=0.5))


def test_bookkeeping_closes_with_rf():
    y = rp.singlet_yield(RESONANT)
    assert y.singlet_yield + y.triplet_yield + y.surviving == pytest.approx(1.0, abs=1e-6)


def test_zero_amplitude_rf_is_static_bit_for_bit():
    static = rp.singlet_yield(replace(RESONANT, rf_amplitude=0.0))
    off = rp.singlet_yield(replace(RESONANT, rf_amplitude=0.0, rf_frequency=3e6))
    assert static == off


def test_rf_step_doubling_converged():
    a = rp.singlet_yield(RESONANT, steps_per_period=64).singlet_yield
    b = rp.singlet_yield(RESONANT, steps_per_period=128).singlet_yield
    assert abs(a - b) < 1e-4


@given(st.floats(0.0, 1.0), st.floats(0.0, 100.0), st.floats(1e5, 1e7), st.floats(1e5, 1e7))
def test_bookkeeping_and_monotone_decay(a, b, ks, kt):
    m = RadicalPairModel(a_iso=a, b_static=(0, 0, b), k_s=ks, k_t=kt)
    full = rp.default_horizon(m)
    survs = []
    for frac in (0.1, 0.3, 1.0):
        y = rp.singlet_yield(m, horizon=frac * full, max_surviving=None)
        assert y.singlet_yield + y.triplet_yield + y.surviving == pytest.approx(1.0, abs=1e-6)
        survs.append(y.surviving)
    assert survs[0] >= survs[1] - 1e-12 and survs[1] >= survs[2] - 1e-12


# --- sweeps -------------------------------------------------------------------------------------------

def test_zero_amplitude_scan_is_flat():
    s = rp.rf_disruption_scan(replace(RESONANT, rf_amplitude=0.0), [1e6, 2e6])
    assert np.all(s.yields == s.baseline)


def test_scan_extremum_near_splitting():
    grid = np.arange(0.5e6, 3.0e6 + 1, 0.1e6)
    s = rp.rf_disruption_scan(RESONANT, grid)
    split = rp.GAMMA_E * 1e6 * 0.05
    assert abs(s.extremum() - split) <= 0.1e6
    far = rp.rf_disruption_scan(RESONANT, [10 * split])
    assert abs(far.deviation[0]) < 0.1 * np.max(np.abs(s.deviation))


def test_orientation_isotropic_flat():
    m = RadicalPairModel(a_iso=0.5, b_static=(0, 0, 50.0), k_s=1e5, k_t=1e5)
    s = rp.orientation_sweep(m, np.linspace(0, np.pi, 5))
    assert np.ptp(s.yields) < 1e-8


def test_orientation_axial_values():
    m = RadicalPairModel(a_iso=0.5, a_axial=0.3, b_static=(0, 0, 50.0), k_s=1e5, k_t=1e5)
    s = rp.orientation_sweep(m, [0.0, np.pi / 2, 0.3, np.pi - 0.3])
    assert s.yields[0] == pytest.approx(0.37624, abs=1e-5)
    assert s.yields[1] == pytest.approx(0.26325, abs=1e-5)
    assert abs(s.yields[2] - s.yields[3]) < 1e-8


def test_sweep_csv_header():
    s = rp.Sweep(np.array([1.0, 2.0]), np.array([0.3, 0.4]))
    assert s.to_csv().splitlines() == ["param,yield", "1.0,0.3", "2.0,0.4"]
