"""Verification suites run by `cli.py verify <suite>`. Each suite returns a list of Check records."""

from typing import NamedTuple, Optional

import numpy as np
from absl import logging

import coeffs
import green
import mls
import pairing
from configs import get_tolerance


class Check(NamedTuple):
    suite: str
    name: str
    measured: float
    tolerance: float
    detail: str = ''

    @property
    def passed(self):
        # NaN never passes
        return bool(self.measured <= self.tolerance)


class VerifyOptions(NamedTuple):
    tau: complex = 1j
    seed: int = 0
    cases: int = 100
    nodes: int = 512
    samples: int = 256
    radius: float = 0.35
    nmax: int = 16
    grid: Optional[int] = None  # overrides the per-suite grid size
    tol: Optional[float] = None  # overrides every tolerance of the suite
    bump: tuple = (0.3, 0.6)
    order: int = 2


def _check(suite, name, measured, key, opts, detail=''):
    tol = get_tolerance(key, opts.tol) if isinstance(key, str) else float(key)
    return Check(suite, name, float(measured), tol, detail)


def _random_disc(rng, radius, size):
    return radius * np.sqrt(rng.uniform(size=size)) * np.exp(2j * np.pi * rng.uniform(size=size))


def suite_moments(opts):
    indices = range(-8, 9)
    M = pairing.moment_table(indices, opts.nodes)
    err = np.max(np.abs(M - pairing.expected_moments(indices)))
    spot = abs(pairing.moment_integral(1, 1, 0, 0, opts.nodes) - pairing.FOUR_PI_SQ)
    return [_check('moments', 'delta pattern, indices in [-8, 8]', err, 'moments', opts),
            _check('moments', 'moment (1, 1, 0, 0) = (2 pi)^2', spot, 'moments', opts)]


def suite_roundtrip(opts):
    rng = np.random.RandomState(opts.seed)
    roundtrip, radius_dev, alias_dev = 0., 0., 0.
    for _ in range(5):
        table = pairing.random_synthetic_case(rng)[0]
        kernel = green.SyntheticKernel(table)
        scale = max(1., float(np.max(np.abs(table.a))))

        def extract_at(rz, rt, samples=opts.samples):
            return coeffs.extract(kernel, table.nmax, table.mmax, rz, rt, samples)

        got = extract_at(opts.radius, opts.radius)
        z = _random_disc(rng, opts.radius, 100)
        t = _random_disc(rng, opts.radius, 100)
        diff = coeffs.synthesize(got, z, t) - coeffs.synthesize(table, z, t)
        roundtrip = max(roundtrip, float(np.max(np.abs(diff))) / scale)

        radii = (0.2, 0.5, 0.8)
        ref = extract_at(radii[0], radii[0]).a
        for rz in radii:
            for rt in radii:
                radius_dev = max(radius_dev, float(np.max(np.abs(extract_at(rz, rt).a - ref))) / scale)
        doubled = extract_at(opts.radius, opts.radius, 2 * opts.samples)
        alias_dev = max(alias_dev, float(np.max(np.abs(doubled.a - got.a))) / scale)
    return [_check('roundtrip', 'synthesize(extract(T)) at 100 bidisc points', roundtrip, 'roundtrip', opts),
            _check('roundtrip', 'radius independence over {0.2, 0.5, 0.8}^2', radius_dev,
                   'radius-independence', opts),
            _check('roundtrip', 'doubling samples', alias_dev, 'roundtrip', opts)]


def _random_pairs(rng, count, max_rank=4, exponents=(-4, 8)):
    lo, hi = exponents
    for _ in range(count):
        rank = rng.randint(1, max_rank + 1)
        pair = []
        for _ in range(2):
            lead = rng.randint(lo, hi + 1)
            pair.append(pairing.random_series(rng, rank, lead, rng.randint(lead, hi + 1)))
        yield pair


def suite_sphere_null(opts):
    rng = np.random.RandomState(opts.seed)
    kernel = green.SphereKernel()
    table = coeffs.extract(kernel, opts.nmax, opts.nmax, opts.radius, opts.radius, opts.samples)
    z = _random_disc(rng, 0.9, 100)
    t = _random_disc(rng, 0.9, 100)
    fd = np.max(np.abs(green.mixed_fd(kernel, z, t)))
    worst = 0.
    for f1, f2 in _random_pairs(rng, 20):
        worst = max(worst, abs(pairing.omega_series(table, f1, f2).value),
                    abs(pairing.omega_quadrature(kernel, f1, f2, opts.nodes).value))
    return [_check('sphere-null', 'max |a_nm|, n, m <= %d' % opts.nmax, np.max(np.abs(table.a)),
                   'sphere-null', opts),
            _check('sphere-null', 'finite-difference |K| at 100 points', fd, 'sphere-null', opts),
            _check('sphere-null', 'max |omega| over 20 pairs, both paths', worst, 'sphere-pair', opts)]


def suite_torus_const(opts):
    rng = np.random.RandomState(opts.seed)
    kernel = green.TorusKernel(opts.tau)
    expected = np.pi / (2 * kernel.area)
    table = coeffs.extract(kernel, opts.nmax, opts.nmax, opts.radius, opts.radius, opts.samples)
    a00 = table.entry(0, 0)
    off = np.abs(np.array(table.a))
    off[0 - table.nmin, 0 - table.mmin] = 0.
    checks = [
        _check('torus-const', 'a_00 = pi / (2A), relative', abs(a00 - expected) / expected, 'torus-const', opts,
               'a_00=%.10f' % a00.real),
        _check('torus-const', 'max |a_nm| off (0, 0)', np.max(off), 'torus-offdiag', opts),
        _check('torus-const', 'a_mn = conj(a_nm)', np.max(np.abs(table.a - np.conj(table.a.T))),
               'torus-offdiag', opts),
    ]

    fd = green.derivative_kernel(kernel, 0.1, 0.3j, method='finite_difference')
    z = _random_disc(rng, 0.3, 100)
    t = _random_disc(rng, 0.3, 100)
    fd_dev = np.max(np.abs(green.mixed_fd(kernel, z, t) - kernel.mixed(z, t)))
    checks += [
        _check('torus-const', 'finite-difference K(0.1, 0.3i), relative', abs(fd - expected) / expected,
               'torus-const', opts, 'K=%.10f' % fd.real),
        _check('torus-const', 'finite difference vs closed form at 100 points', fd_dev, 'torus-const', opts),
    ]

    finer = green.TorusKernel(opts.tau, cutoff=50.)
    two_res = abs(green.renormalized_eval(kernel, 0, 0) - green.renormalized_eval(finer, 0, 0))
    u = _random_disc(rng, 0.45, 10)
    offsets = [green.green_eval(kernel, x, 0) - green.torus_green_theta(opts.tau, x) for x in u]
    checks += [
        _check('torus-const', ':h:(0, 0) against a finer lattice cutoff', two_res, 'torus-offdiag', opts),
        _check('torus-const', 'lattice sum minus theta oracle is constant', np.ptp(offsets), 'torus-offdiag',
               opts, 'offset=%.10f' % np.mean(offsets)),
    ]

    f = mls.scalar_series(-1, [1.])
    target = pairing.FOUR_PI_SQ * expected
    series = pairing.omega_series(table, f, f)
    quad = pairing.omega_quadrature(kernel, f, f, opts.nodes)
    checks += [
        _check('torus-const', 'omega_series(1/z, 1/z) = (2 pi)^2 pi / (2A)', abs(series.value - target) / target,
               'torus-pair', opts, 'value=%.8f' % series.value),
        _check('torus-const', 'omega_quadrature(1/z, 1/z)', abs(quad.value - target) / target, 'torus-pair', opts,
               'value=%.8f' % quad.value),
    ]
    return checks


def suite_laplace(opts):
    n = opts.grid or None
    grid = green.GridSpec(n) if n else None
    checks = []
    torus = green.verify_laplace(green.TorusKernel(opts.tau), grid)
    checks.append(_check('laplace', 'torus Laplacian residual', torus['laplace_residual'], 'laplace', opts))
    checks.append(_check('laplace', 'torus mixed derivative across the diagonal vs pi / (2A)',
                         torus['mixed_deviation'], 'torus-const', opts))
    sphere = green.verify_laplace(green.SphereKernel(), grid)
    checks.append(_check('laplace', 'sphere Laplacian residual', sphere['laplace_residual'], 'laplace', opts))
    checks.append(_check('laplace', 'sphere mixed derivative across the diagonal', sphere['mixed_max'],
                         'laplace-mixed', opts))
    plane = green.verify_laplace(green.PlaneKernel(), grid)
    checks.append(_check('laplace', 'plane Laplacian residual', plane['laplace_residual'], 'laplace', opts))
    return checks


def suite_reproducing(opts):
    from configs import reproducing_grid

    kernel = green.TorusKernel(opts.tau)
    n = opts.grid or reproducing_grid
    report = green.verify_reproducing(kernel, grid=green.GridSpec(n))
    sweep = [green.verify_reproducing(kernel, grid=green.GridSpec(m), point_check=False)['calibration']
             for m in (64, 128, 256)]
    detail = 'lambda=%.10f' % report['calibration']
    return [
        _check('reproducing', 'composition residual on %dx%d' % (n, n), report['residual'], 'reproducing', opts),
        _check('reproducing', 'composition at (P, Q\')', report['point_residual'], 'reproducing', opts),
        _check('reproducing', 'calibration over 64/128/256 grids', np.ptp(sweep), 'calibration', opts, detail),
        _check('reproducing', 'Fourier vs delta calibration', report['calibration_gap'], 'calibration', opts),
    ]


def suite_reduce(opts):
    rng = np.random.RandomState(opts.seed)
    bump = pairing.make_bump(opts.bump[0], opts.bump[1], opts.order)
    torus = green.TorusKernel(opts.tau)
    sphere = green.SphereKernel()
    const = mls.make_series(2, 0, [rng.randn(2, 2) + 1j * rng.randn(2, 2)])
    inv_z = mls.scalar_series(-1, [1.])

    narrow = green.GridSpec(8, extent=0.1)
    a = pairing.reduce_cocycle(torus, inv_z, pairing.make_bump(0.3, 0.6, opts.order), narrow)
    b = pairing.reduce_cocycle(torus, inv_z, pairing.make_bump(0.2, 0.8, opts.order), narrow)
    # only the 1/z coefficient survives the angular integral: phi = -2 pi i * pi / (2A)
    expected = -1j * np.pi ** 2 / torus.area
    return [
        _check('reduce', 'torus, constant cocycle', pairing.reduce_cocycle(torus, const, bump).max_norm(),
               'reduce', opts),
        _check('reduce', 'sphere, constant cocycle', pairing.reduce_cocycle(sphere, const, bump).max_norm(),
               'reduce', opts),
        _check('reduce', 'sphere, 1/z', pairing.reduce_cocycle(sphere, inv_z, bump).max_norm(), 'reduce', opts),
        _check('reduce', 'torus, 1/z, bumps (0.3, 0.6) vs (0.2, 0.8)', pairing.form_difference(a, b), 'reduce',
               opts),
        _check('reduce', 'torus, 1/z against its closed form', np.max(np.abs(a.values - expected)), 'reduce',
               opts),
    ]


def suite_oracle(opts):
    rng = np.random.RandomState(opts.seed)
    worst = 0.
    for _ in range(opts.cases):
        table, f1, f2 = pairing.random_synthetic_case(rng)
        series = pairing.omega_series(table, f1, f2)
        quad = pairing.omega_quadrature(green.SyntheticKernel(table), f1, f2, opts.nodes)
        worst = max(worst, pairing.relative_deviation(quad, series))
    return [_check('oracle', 'series vs quadrature, %d cases (seed %d)' % (opts.cases, opts.seed), worst,
                   'oracle', opts)]


def suite_bilinearity(opts):
    rng = np.random.RandomState(opts.seed)
    additive, homogeneous, window = 0., 0., 0.
    for _ in range(10):
        table, f, h = pairing.random_synthetic_case(rng)
        g = pairing.random_series(rng, f.rank, f.lead, f.last)
        c = rng.uniform(-3, 3)
        kernel = green.SyntheticKernel(table)
        paths = (lambda x, y: pairing.omega_series(table, x, y),
                 lambda x, y: pairing.omega_quadrature(kernel, x, y, opts.nodes))
        for omega in paths:
            wf, wg = omega(f, h).complex_value, omega(g, h).complex_value
            scale = max(abs(wf) + abs(wg), 1e-300)
            additive = max(additive, abs(omega(f + g, h).complex_value - wf - wg) / scale)
            homogeneous = max(homogeneous, abs(omega(c * f, h).complex_value - c * wf) / max(abs(c * wf), 1e-300))
        padded = coeffs.pad_table(table, table.nmin - 2, table.mmin - 3, table.nmax + 4, table.mmax + 5)
        window = max(window, abs(pairing.omega_series(padded, f, h).complex_value
                                 - pairing.omega_series(table, f, h).complex_value))
    return [_check('bilinearity', 'omega(f + g, h) = omega(f, h) + omega(g, h)', additive, 'bilinearity', opts),
            _check('bilinearity', 'omega(c f, h) = c omega(f, h)', homogeneous, 'bilinearity', opts),
            _check('bilinearity', 'enlarged table window', window, 0., opts)]


def suite_derham(opts):
    from configs import derham_grids

    kernel = green.TorusKernel(opts.tau)
    bump = pairing.make_bump(opts.bump[0], opts.bump[1], opts.order)
    inv_z = mls.scalar_series(-1, [1.])
    mixed = mls.make_series(2, -1, [np.array([[1, 2j], [0, -1]]), np.eye(2), np.array([[0, 1], [1, 0]])])
    grids = (opts.grid,) * 3 if opts.grid else derham_grids

    report = pairing.derham_ratio(kernel, inv_z, inv_z, bump, grids)
    other = pairing.derham_ratio(kernel, mixed, mixed, bump, grids[-1:])
    const = pairing.omega_derham(kernel, mls.identity_series(1), inv_z, bump, green.GridSpec(grids[0]))
    wide = pairing.omega_derham(kernel, inv_z, inv_z, pairing.make_bump(0.2, 0.8, opts.order),
                                green.GridSpec(grids[0]))
    narrow = pairing.omega_derham(kernel, inv_z, inv_z, pairing.make_bump(0.3, 0.6, opts.order),
                                  green.GridSpec(grids[0]))
    calibration = report['calibration']
    return [
        _check('derham', 'ratio to omega_series over grids %s' % (list(grids),), report['spread'], 'derham', opts,
               'calibration=%.8f%+.8fi' % (calibration.real, calibration.imag)),
        _check('derham', 'ratio for a second input', abs(other['calibration'] - calibration), 'derham', opts),
        _check('derham', 'constant f1', abs(const.complex_value), 'derham', opts),
        _check('derham', 'bump variation', pairing.relative_deviation(wide, narrow), 'derham-bump', opts),
    ]


SUITES = {
    'moments': suite_moments,
    'roundtrip': suite_roundtrip,
    'sphere-null': suite_sphere_null,
    'torus-const': suite_torus_const,
    'laplace': suite_laplace,
    'reproducing': suite_reproducing,
    'reduce-consistency': suite_reduce,
    'oracle': suite_oracle,
    'bilinearity': suite_bilinearity,
    'derham': suite_derham,
}


def run_suite(name, opts=VerifyOptions()):
    names = list(SUITES) if name == 'all' else [name]
    checks = []
    for suite in names:
        logging.info('Running suite %s', suite)
        checks.extend(SUITES[suite](opts))
    return checks


def format_checks(checks):
    lines = []
    for c in checks:
        lines.append('{} {:<12} {:<60} {:.3e} (tol {:.0e}) {}'.format(
            'PASS' if c.passed else 'FAIL', c.suite, c.name, c.measured, c.tolerance, c.detail).rstrip())
    passed = sum(c.passed for c in checks)
    lines.append('{}/{} checks passed'.format(passed, len(checks)))
    return '\n'.join(lines)


def checks_to_json(checks):
    return [{'suite': c.suite, 'name': c.name, 'measured': c.measured, 'tolerance': c.tolerance,
             'passed': c.passed, 'detail': c.detail} for c in checks]
