import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from orbital_lab.ensembles import deterministic_diag, gaussian_complex, gaussian_hermitian, rank_one, scalar, zero
from orbital_lab.haar import (
    Observable,
    as_generator,
    haar_frames,
    haar_unitaries,
    haar_unitary,
    observable,
    orbital_average,
    orbital_sample_h,
    orbital_sample_z,
    orbital_values,
    orbital_windows,
)
from orbital_lab.matrix_core import COMPLEX, as_prefix, corner


def test_n1_is_a_phase():
    u = haar_unitaries(1, 20000, 5)[:, 0, 0]
    assert np.max(np.abs(np.abs(u) - 1)) < 1e-12
    ang = (np.angle(u) + np.pi) / (2 * np.pi)
    assert stats.kstest(ang, "uniform").statistic < 0.03


@pytest.mark.parametrize("n", [1, 2, 8, 33])
def test_unitarity(n):
    for u in haar_unitaries(n, 50, n):
        assert np.max(np.abs(u.conj().T @ u - np.eye(n))) < 1e-10
    assert haar_unitary(n, 0).entries.shape == (n, n)


def test_u11_beta_marginal():
    # Oracle: |u11|^2 ~ Beta(1, n-1), sampled independently by scipy.
    n = 16
    x = np.abs(haar_unitaries(n, 20000, 1)[:, 0, 0]) ** 2
    assert stats.kstest(x, stats.beta(1, n - 1).cdf).statistic < 0.03
    ref = stats.beta(1, n - 1).rvs(20000, random_state=2)
    assert stats.ks_2samp(x, ref).statistic < 0.03


def test_unfixed_qr_is_detectably_not_haar():
    # Sanity check that the Beta oracle has power: raw QR biases diag phases.
    g = as_generator(3)
    z = (g.standard_normal((20000, 2, 2)) + 1j * g.standard_normal((20000, 2, 2))) / np.sqrt(2)
    q, _ = np.linalg.qr(z)
    fixed = haar_unitaries(2, 20000, 3)
    assert abs(np.mean(q[:, 0, 0].real)) > 0.3
    assert abs(np.mean(fixed[:, 0, 0].real)) < 0.03


@pytest.mark.parametrize("n", [4, 32])
def test_left_invariance(n):
    v = haar_unitary(n, 99).entries
    a = haar_unitaries(n, 20000, 10)
    b = haar_unitaries(n, 20000, 11)
    stat = stats.ks_2samp(np.abs((v @ a)[:, 0, 0]) ** 2, np.abs(b[:, 0, 0]) ** 2).statistic
    assert stat < 0.03


def test_frames_are_leading_columns():
    # Same Gaussian draws: a reduced QR equals the leading columns of the full QR.
    g = as_generator(4).standard_normal((3, 9, 9, 2))
    z = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2)
    from orbital_lab.haar import _phase_fixed_q
    full = _phase_fixed_q(z)
    part = _phase_fixed_q(z[..., :3])
    assert np.allclose(full[..., :3], part, atol=1e-12)
    f = haar_frames(9, 3, 5, 0)
    assert f.shape == (5, 9, 3)
    assert np.allclose(np.conj(np.swapaxes(f, -1, -2)) @ f, np.eye(3), atol=1e-12)
    with pytest.raises(ValueError):
        haar_frames(3, 4, 1, 0)


def test_orbital_sample_h_examples():
    c = corner(scalar(2.5), 6).entries
    for s in range(5):
        assert np.allclose(orbital_sample_h(scalar(2.5), 6, s).entries, c, atol=1e-12)
    p = gaussian_hermitian(1.0, 3)
    assert orbital_sample_h(p, 1, 0) == corner(p, 1)
    out = orbital_sample_h(p, 20, 1)
    assert out.hermitian
    assert np.allclose(np.linalg.eigvalsh(out.entries), np.linalg.eigvalsh(corner(p, 20).entries), atol=1e-9)


def test_orbital_sample_z_examples():
    assert not np.any(orbital_sample_z(zero(COMPLEX), 5, 0).entries)
    p = gaussian_complex(1.0, 3)
    out = orbital_sample_z(p, 20, 1)
    sv = np.linalg.svd(corner(p, 20).entries, compute_uv=False)
    assert np.allclose(np.linalg.svd(out.entries, compute_uv=False), sv, rtol=1e-9)
    one = as_prefix(np.array([[1.0 + 0j]]))
    vals = np.array([orbital_sample_z(one, 1, s).entries[0, 0] for s in range(4000)])
    assert np.max(np.abs(np.abs(vals) - 1)) < 1e-12
    assert stats.kstest((np.angle(vals) + np.pi) / (2 * np.pi), "uniform").statistic < 0.05


def test_orbital_sample_kind_errors():
    with pytest.raises(ValueError):
        orbital_sample_h(gaussian_complex(1.0, 0), 3, 0)
    with pytest.raises(ValueError):
        orbital_sample_z(gaussian_hermitian(1.0, 0), 3, 0)


def test_windows_match_full_samples_in_law():
    # The frame shortcut against full conjugation: compare laws of Re h11.
    p = rank_one(2.0, 6)
    fast = orbital_windows(p, 12, 1, 4000, 1)[:, 0, 0].real
    slow = np.array([orbital_sample_h(p, 12, g).entries[0, 0].real for g in as_generator(2).spawn(4000)])
    assert stats.ks_2samp(fast, slow).pvalue > 1e-3
    z = gaussian_complex(1.0, 6)
    fast = np.abs(orbital_windows(z, 10, 1, 4000, 1)[:, 0, 0])
    slow = np.array([abs(orbital_sample_z(z, 10, g).entries[0, 0]) for g in as_generator(2).spawn(4000)])
    assert stats.ks_2samp(fast, slow).pvalue > 1e-3


def test_windows_keep_hermitian_symmetry():
    w = orbital_windows(gaussian_hermitian(1.0, 0), 10, 3, 50, 0)
    assert np.array_equal(w, np.conj(np.swapaxes(w, -1, -2)))


def test_orbital_average_examples():
    one = observable("constant", value=1.0)
    assert orbital_average(one, gaussian_hermitian(1.0, 1), 8, 100, 0) == (1.0, 0.0)
    avg = orbital_average(observable("coord-re"), scalar(-3.0), 10, 200, 0)
    assert avg.mean == pytest.approx(-3.0, abs=1e-12)
    assert avg.stderr < 1e-12


@pytest.mark.parametrize("make", [lambda: gaussian_hermitian(1.0, 7), lambda: rank_one(2.0, 7),
                                  lambda: deterministic_diag("index")])
def test_orbital_mean_matches_normalized_trace(make):
    p = make()
    n = 12
    avg = orbital_average(observable("coord-re"), p, n, 5000, 3)
    target = np.trace(corner(p, n).entries).real / n
    assert abs(avg.mean - target) < 3 * avg.stderr + 1e-12


def test_window_larger_than_n_rejected():
    with pytest.raises(ValueError):
        orbital_average(observable("coord-re", i=3, j=1), gaussian_hermitian(1.0, 0), 2, 10, 0)
    with pytest.raises(ValueError):
        orbital_values(observable("constant"), gaussian_hermitian(1.0, 0), 2, 0, 0)


@settings(max_examples=30, deadline=None)
@given(i=st.integers(1, 3), j=st.integers(1, 3), noise=st.floats(-1e3, 1e3))
def test_observables_ignore_entries_outside_window(i, j, noise):
    x = as_generator(i * 7 + j).standard_normal((6, 6)) + 0j
    for f in (observable("coord-re", i=i, j=j), observable("inv-abs", i=i, j=j),
              observable("psi-distance", k=2.0, reference="identity", window=max(i, j))):
        y = x.copy()
        y[f.window:, :] += noise
        y[:, f.window:] -= noise
        assert f(y) == f(x)
        assert abs(f(x)) <= f.bound


def test_coord_re_is_clamped():
    f = observable("coord-re", bound=10.0)
    assert f(np.array([[1e9]])) == 10.0
    assert f(np.array([[-1e9]])) == -10.0


def test_unknown_observable():
    with pytest.raises(ValueError):
        observable("bessel")
    with pytest.raises(ValueError):
        Observable("x", 0, lambda a: a)


def test_doubling_samples_halves_stderr():
    f = observable("coord-re")
    p = gaussian_hermitian(1.0, 2)
    ratios = []
    for s in range(5):
        a = orbital_average(f, p, 8, 4000, 2 * s).stderr
        b = orbital_average(f, p, 8, 16000, 2 * s + 1).stderr
        ratios.append(a / b)
    # Quadrupling the sample count halves the stderr twice over.
    assert np.mean(ratios) == pytest.approx(2.0, rel=0.1)
