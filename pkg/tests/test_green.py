import numpy as np
import pytest

import coeffs
import green
from utils import ChartError, ConfigError, UnsupportedKernelError


def _disc(rng, radius, size):
    return radius * np.sqrt(rng.uniform(size=size)) * np.exp(2j * np.pi * rng.uniform(size=size))


def test_sphere_green_closed_form(sphere):
    assert green.green_eval(sphere, 0, 1) == pytest.approx(np.log(1 / np.sqrt(2)), rel=1e-14)


def test_coincident_points(sphere, torus):
    for kernel in (sphere, torus):
        with pytest.raises(ChartError):
            green.green_eval(kernel, 0.2j, 0.2j)


def test_torus_period_is_singular(torus):
    with pytest.raises(ChartError):
        green.green_eval(torus, 0.1 + 1j, 0.1)


def test_synthetic_green_unsupported():
    kernel = green.SyntheticKernel(coeffs.table_from_dict({(0, 0): 1}))
    with pytest.raises(UnsupportedKernelError):
        green.green_eval(kernel, 0.1, 0.2)
    with pytest.raises(UnsupportedKernelError):
        green.renormalized_eval(kernel, 0.1, 0.2)


def test_torus_even(torus, rng):
    for u in _disc(rng, 0.9, 20):
        assert green.green_eval(torus, u, 0) == pytest.approx(green.green_eval(torus, -u, 0), abs=1e-12)


def test_torus_square_symmetry(torus):
    assert green.green_eval(torus, 0.5, 0) == pytest.approx(green.green_eval(torus, 0.5j, 0), abs=1e-12)


def test_torus_periodic(torus):
    P, Q = 0.23 - 0.1j, 0.05j
    ref = green.green_eval(torus, P, Q)
    for shift in (1, 1j, 2 - 1j):
        assert green.green_eval(torus, P + shift, Q) == pytest.approx(ref, abs=1e-12)


def test_torus_zero_mean(torus):
    n = 64
    s = (np.arange(n) + 0.5) / n
    P = (s[None, :] + 1j * s[:, None]).ravel()
    # the singularity is integrable; a midpoint grid offset from it is good to a few 1e-4
    assert np.mean(torus.green(P, np.zeros_like(P))) == pytest.approx(0, abs=1e-3)


def test_green_symmetric(sphere, torus, rng):
    for kernel in (sphere, torus):
        P = _disc(rng, 0.9, 50)
        Q = _disc(rng, 0.9, 50)
        np.testing.assert_allclose(kernel.green(P, Q), kernel.green(Q, P), atol=1e-10)


def test_green_matches_theta_oracle(torus, rng):
    u = _disc(rng, 0.45, 10)
    offsets = [green.green_eval(torus, x, 0) - green.torus_green_theta(1j, x) for x in u]
    assert np.ptp(offsets) <= 1e-10


def test_green_matches_theta_oracle_skewed(rng):
    tau = 0.3 + 1.2j
    kernel = green.TorusKernel(tau)
    u = _disc(rng, 0.45, 10)
    offsets = [green.green_eval(kernel, x, 0) - green.torus_green_theta(tau, x) for x in u]
    assert np.ptp(offsets) <= 1e-10


def test_torus_rejects_lower_half_plane():
    with pytest.raises(ConfigError):
        green.TorusKernel(1 - 0.5j)


def test_plane_renormalized_zero():
    kernel = green.PlaneKernel()
    assert green.renormalized_eval(kernel, 0.3, 0.3) == 0
    assert green.renormalized_eval(kernel, 0.3, -0.1j) == 0


def test_sphere_renormalized_origin(sphere):
    assert green.renormalized_eval(sphere, 0, 0) == 0


def test_renormalized_is_green_minus_log(sphere, torus, rng):
    for kernel in (sphere, torus):
        for z, t in zip(_disc(rng, 0.4, 10), _disc(rng, 0.4, 10)):
            assert green.renormalized_eval(kernel, z, t) == pytest.approx(
                green.green_eval(kernel, z, t) - np.log(abs(z - t)), abs=1e-12)


def test_torus_renormalized_finer_cutoff(torus):
    finer = green.TorusKernel(1j, cutoff=50.)
    assert green.renormalized_eval(torus, 0, 0) == pytest.approx(green.renormalized_eval(finer, 0, 0), abs=1e-8)


@pytest.mark.parametrize('eps', [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
def test_renormalized_continuous_at_diagonal(torus, eps):
    z = 0.1 - 0.2j
    step = abs(green.renormalized_eval(torus, z, z + eps * np.exp(0.7j)) - green.renormalized_eval(torus, z, z))
    # Lipschitz in |eps|, no log blow-up
    assert step <= 5 * eps


def test_derivative_kernel_closed_forms(sphere, torus):
    assert green.derivative_kernel(sphere, 0.3, -0.2j) == 0
    assert green.derivative_kernel(torus, 0.1, 0.3j) == pytest.approx(np.pi / 2)
    synthetic = green.SyntheticKernel(coeffs.table_from_dict({(1, 2): 1}))
    assert green.derivative_kernel(synthetic, 0.1, 0.2) == pytest.approx(0.004, rel=1e-14)


def test_derivative_kernel_finite_difference(sphere, torus):
    assert abs(green.derivative_kernel(sphere, 0.3, -0.2j, method='finite_difference')) <= 1e-10
    fd = green.derivative_kernel(torus, 0.1, 0.3j, method='finite_difference')
    assert fd == pytest.approx(np.pi / 2, abs=1e-6)


def test_derivative_kernel_outside_chart(sphere):
    with pytest.raises(ChartError):
        green.derivative_kernel(sphere, 1.2, 0)


def test_derivative_kernel_bad_method(sphere):
    with pytest.raises(ConfigError):
        green.derivative_kernel(sphere, 0.1, 0, method='spectral')


def test_closed_form_matches_finite_difference(sphere, torus, rng):
    table = coeffs.make_table(0, 0, rng.randn(4, 3) + 1j * rng.randn(4, 3))
    synthetic = green.SyntheticKernel(table)
    for kernel, radius in ((sphere, 0.9), (torus, 0.3), (synthetic, 0.9)):
        z = _disc(rng, radius, 100)
        t = _disc(rng, radius, 100)
        np.testing.assert_allclose(green.mixed_fd(kernel, z, t), kernel.mixed(z, t), atol=1e-6)


def test_synthetic_negative_window_has_no_potential():
    kernel = green.SyntheticKernel(coeffs.table_from_dict({(-1, 0): 1}))
    with pytest.raises(UnsupportedKernelError):
        green.derivative_kernel(kernel, 0.1, 0.2, method='finite_difference')


def test_conjugate_symmetry(sphere, torus, rng):
    z = _disc(rng, 0.3, 20)
    t = _disc(rng, 0.3, 20)
    for kernel in (sphere, torus):
        np.testing.assert_allclose(kernel.mixed(t, z), np.conj(kernel.mixed(z, t)), atol=1e-8)
    np.testing.assert_allclose(green.mixed_fd(torus, t, z), np.conj(green.mixed_fd(torus, z, t)), atol=1e-8)


def test_laplace_torus(torus):
    report = green.verify_laplace(torus, green.GridSpec(64))
    assert report['laplace_residual'] <= 1e-5
    assert report['mixed_deviation'] <= 1e-6
    assert report['skipped'] > 0


def test_laplace_sphere(sphere):
    report = green.verify_laplace(sphere, green.GridSpec(64))
    assert report['laplace_residual'] <= 1e-5
    assert report['mixed_max'] <= 1e-8


def test_laplace_plane():
    report = green.verify_laplace(green.PlaneKernel(), green.GridSpec(32))
    assert report['laplace_residual'] <= 1e-5
    assert report['mixed_max'] == 0


def test_laplace_synthetic_unsupported():
    with pytest.raises(UnsupportedKernelError):
        green.verify_laplace(green.SyntheticKernel(coeffs.table_from_dict({(0, 0): 1})))


def test_reproducing_torus(torus):
    report = green.verify_reproducing(torus, grid=green.GridSpec(64))
    assert report['residual'] <= 1e-4
    assert report['point_residual'] <= 1e-4
    assert report['calibration'] == pytest.approx(-2 / np.pi, abs=1e-6)
    assert report['calibration_gap'] <= 1e-6


class _ScaledTorus(green.TorusKernel):
    def potential(self, z, t):
        return 1.01 * super().potential(z, t)


def test_reproducing_detects_scaled_kernel():
    # a 1% error in the smooth part must show up in the residual, not be absorbed by the calibration
    report = green.verify_reproducing(_ScaledTorus(1j), grid=green.GridSpec(32))
    assert report['residual'] == pytest.approx(0.01 * 1.01 * np.pi / 2, rel=0.05)
    assert report['point_residual'] >= 1e-3
    assert report['calibration_gap'] >= 1e-3


def test_reproducing_unsupported(sphere):
    with pytest.raises(UnsupportedKernelError):
        green.verify_reproducing(sphere)


def test_kernel_json(tmp_path):
    table = coeffs.table_from_dict({(1, 2): 1})
    coeffs.save_table(str(tmp_path / 'table.json'), table)
    kernel = green.kernel_from_json({'kind': 'synthetic', 'table': 'table.json'}, base_dir=str(tmp_path))
    assert kernel.table.nonzero_entries() == table.nonzero_entries()

    torus = green.kernel_from_json(green.kernel_to_json(green.TorusKernel(0.5 + 2j)))
    assert torus.tau == 0.5 + 2j
    assert isinstance(green.kernel_from_json({'kind': 'sphere'}), green.SphereKernel)
    inline = green.kernel_from_json(green.kernel_to_json(kernel))
    assert inline.table.nonzero_entries() == table.nonzero_entries()


@pytest.mark.parametrize('obj', [
    {},
    {'kind': 'hyperbolic'},
    {'kind': 'torus'},
    {'kind': 'torus', 'tau': [0, -1]},
    {'kind': 'synthetic'},
])
def test_kernel_json_errors(obj):
    with pytest.raises(ConfigError):
        green.kernel_from_json(obj)
