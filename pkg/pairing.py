"""
The pairing omega_e(f1, f2) = (2 pi)^2 Re sum_{n,m} a_{n,m} tr(f1_{n-1}^* f2_{m-1}), its contour-integral
oracle, the reduction of a Laurent cocycle to its harmonic representative, and the surface-integral
cross-check on the torus.

Measure convention for the circle integrals: dzbar in the first variable and dt in the second, i.e.
    int int z^n conj(t)^m conj(z)^r t^l dzbar dt = (2 pi)^2 delta_{n-1,r} delta_{m-1,l}
on the unit circles. moment_integral() checks this numerically.
"""

import math
from typing import NamedTuple

import numpy as np
from absl import logging
from scipy.special import comb

import coeffs
import mls
from green import GridSpec, SphereKernel, TorusKernel
from utils import (ChartError, ConfigError, NumericalError, UnsupportedKernelError, complex_from_json,
                   complex_to_json, read_json, write_json)

FOUR_PI_SQ = (2 * np.pi) ** 2
METHODS = ('series', 'quadrature', 'derham')


class PairingResult(NamedTuple):
    value: float  # Re(complex_value)
    complex_value: complex
    truncation_estimate: float
    method: str


def make_result(complex_value, truncation_estimate, method):
    complex_value = complex(complex_value)
    if not np.isfinite(complex_value):
        raise NumericalError('non-finite %s pairing value' % method)
    return PairingResult(complex_value.real, complex_value, max(float(truncation_estimate), 0.), method)


def result_to_json(res):
    return {'value': res.value, 'complex': complex_to_json(res.complex_value),
            'trunc': res.truncation_estimate, 'method': res.method}


def result_from_json(obj):
    if not isinstance(obj, dict):
        raise ConfigError('pairing result must be a JSON object')
    for key in ('complex', 'trunc', 'method'):
        if key not in obj:
            raise ConfigError("pairing result is missing field '%s'" % key)
    if obj['method'] not in METHODS:
        raise ConfigError("Field 'method': expected one of %s, got %r" % (METHODS, obj['method']))
    return make_result(complex_from_json(obj['complex'], 'complex'), float(obj['trunc']), obj['method'])


def relative_deviation(a, b):
    """|a - b| / |b| on the complex values; absolute when b vanishes."""
    a = a.complex_value if isinstance(a, PairingResult) else complex(a)
    b = b.complex_value if isinstance(b, PairingResult) else complex(b)
    scale = abs(b)
    return abs(a - b) / scale if scale > 0 else abs(a - b)


class BumpProfile(NamedTuple):
    """
    Radial cutoff: 1 on |z| <= r0, 0 on |z| >= r1, and 1 - S((|z| - r0) / (r1 - r0)) in between, with S the
    smoothstep polynomial of the given order (C^order at both ends).
    """
    r0: float
    r1: float
    order: int = 2

    def _x(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0), 0., 1.)

    def value(self, r):
        x = self._x(r)
        p = self.order
        s = sum(comb(p + k, k) * comb(2 * p + 1, p - k) * (-x) ** k for k in range(p + 1)) * x ** (p + 1)
        return 1. - s

    def radial_derivative(self, r):
        x = self._x(r)
        p = self.order
        # S'(x) = (p + 1) C(2p + 1, p) x^p (1 - x)^p
        return -(p + 1) * comb(2 * p + 1, p) * x ** p * (1 - x) ** p / (self.r1 - self.r0)

    def dbar(self, z):
        """d rho / d zbar = rho'(r) z / (2 r)."""
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        with np.errstate(invalid='ignore', divide='ignore'):
            out = self.radial_derivative(r) * z / (2 * r)
        return np.where(r > 0, out, 0.)


def make_bump(r0, r1, order=2):
    if not 0 < r0 < r1 < 1:
        raise ConfigError('bump radii must satisfy 0 < r0 < r1 < 1, got (%g, %g)' % (r0, r1))
    if int(order) != order or order < 2:
        raise ConfigError('bump order must be an integer >= 2, got %r' % (order,))
    return BumpProfile(float(r0), float(r1), int(order))


class AnnulusRule(NamedTuple):
    radial: int  # Gauss-Legendre nodes across [r0, r1]
    angular: int  # trapezoid nodes around the circle


class SampledForm(NamedTuple):
    """phi(Q) sampled at target points; values[..., i, j] is the matrix entry (i, j)."""
    points: np.ndarray  # complex, grid shape
    values: np.ndarray  # complex, grid shape + (rank, rank)
    bump: BumpProfile
    kernel: str

    @property
    def rank(self):
        return self.values.shape[-1]

    @property
    def harmonic(self):
        # alpha = Re(phi)
        return self.values.real

    def max_norm(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.


def form_to_json(form):
    return {
        'kernel': form.kernel,
        'bump': [form.bump.r0, form.bump.r1, form.bump.order],
        'shape': list(form.values.shape),
        'points': [complex_to_json(p) for p in form.points.ravel()],
        'values': [complex_to_json(v) for v in form.values.ravel()],
    }


def form_from_json(obj):
    if not isinstance(obj, dict):
        raise ConfigError('sampled form must be a JSON object')
    for key in ('kernel', 'bump', 'shape', 'points', 'values'):
        if key not in obj:
            raise ConfigError("sampled form is missing field '%s'" % key)
    shape = tuple(int(s) for s in obj['shape'])
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise ConfigError("Field 'shape': expected grid dimensions followed by (rank, rank), got %s" % (shape,))
    values = np.array([complex_from_json(v, 'values[%d]' % i) for i, v in enumerate(obj['values'])])
    points = np.array([complex_from_json(p, 'points[%d]' % i) for i, p in enumerate(obj['points'])])
    if values.size != int(np.prod(shape)) or points.size != int(np.prod(shape[:-2])):
        raise ConfigError("Field 'shape': %s does not match the number of entries" % (shape,))
    if not np.all(np.isfinite(values)):
        raise NumericalError('sampled form has non-finite entries')
    if not isinstance(obj['bump'], list) or len(obj['bump']) != 3:
        raise ConfigError("Field 'bump': expected [r0, r1, order], got %r" % (obj['bump'],))
    r0, r1, order = obj['bump']
    return SampledForm(points.reshape(shape[:-2]), values.reshape(shape), make_bump(r0, r1, order), obj['kernel'])


def save_form(path, form):
    write_json(path, form_to_json(form))


def load_form(path):
    return form_from_json(read_json(path))


def circle_rule(nodes, radius=1.):
    """
    Uniform trapezoid nodes on |z| = radius with the weights of both circle measures.
    :return: (points, weights for dzbar, weights for dt)
    """
    if nodes < 1:
        raise ConfigError('need at least one quadrature node, got %d' % nodes)
    theta = 2 * np.pi * np.arange(nodes) / nodes
    pts = radius * np.exp(1j * theta)
    dtheta = 2 * np.pi / nodes
    w_zbar = -1j * np.conj(pts) * dtheta  # dzbar = -i zbar dtheta
    w_t = 1j * pts * dtheta  # dt = i t dtheta
    return pts, w_zbar, w_t


def _circle_moments(exps_a, exps_b, nodes, w_first):
    pts, w_zbar, w_t = circle_rule(nodes)
    if w_first:
        # sum_j z^n conj(z)^r dzbar, rows n, cols r
        return ((pts[None, :] ** np.asarray(exps_a)[:, None]) * w_zbar) @ (
            np.conj(pts)[:, None] ** np.asarray(exps_b)[None, :])
    # sum_k conj(t)^m t^l dt, rows m, cols l
    return ((np.conj(pts)[None, :] ** np.asarray(exps_a)[:, None]) * w_t) @ (
        pts[:, None] ** np.asarray(exps_b)[None, :])


def moment_integral(n, m, r, l, nodes):
    """Trapezoid value of int int z^n conj(t)^m conj(z)^r t^l dzbar dt over the unit circles."""
    if not (nodes > abs(n) + abs(r) + 1 and nodes > abs(m) + abs(l) + 1):
        raise ConfigError('%d nodes cannot resolve the moment (n, m, r, l) = (%d, %d, %d, %d)'
                          % (nodes, n, m, r, l))
    first = _circle_moments([n], [r], nodes, w_first=True)[0, 0]
    second = _circle_moments([m], [l], nodes, w_first=False)[0, 0]
    return complex(first * second)


def moment_table(indices, nodes):
    """
    All moments with n, m, r, l drawn from `indices`.
    :return: complex array M[n, m, r, l] (positions in `indices`)
    """
    indices = list(indices)
    span = max(abs(i) for i in indices)
    if nodes <= 2 * span + 1:
        raise ConfigError('%d nodes cannot resolve moments with indices up to %d' % (nodes, span))
    first = _circle_moments(indices, indices, nodes, w_first=True)
    second = _circle_moments(indices, indices, nodes, w_first=False)
    return np.einsum('nr,ml->nmrl', first, second)


def expected_moments(indices):
    """(2 pi)^2 delta_{n-1,r} delta_{m-1,l} on the same layout as moment_table()."""
    idx = np.asarray(list(indices))
    delta = (idx[:, None] - 1 == idx[None, :]).astype(float)
    return FOUR_PI_SQ * np.einsum('nr,ml->nmrl', delta, delta)


def _zero_result(method):
    return PairingResult(0., 0j, 0., method)


def omega_series(c, f1, f2):
    """
    (2 pi)^2 sum_{n,m} a_{n,m} tr(f1_{n-1}^* f2_{m-1}) over the table window.
    Terms are accumulated with math.fsum, so zero entries (e.g. from padding the window) leave the result
    bit-for-bit unchanged.
    """
    if f1.rank != f2.rank:
        raise ConfigError('rank mismatch: f1 has rank %d, f2 has rank %d' % (f1.rank, f2.rank))
    if f1.is_zero() or f2.is_zero():
        return _zero_result('series')

    terms = [a * mls.trace_pair(mls.coefficient(f1, n - 1), mls.coefficient(f2, m - 1))
             for n, m, a in c.nonzero_entries()]
    total = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))

    trunc = 0.
    if c.samples:
        # extracted tables stop at the requested window; a table given directly is the kernel itself
        report = coeffs.decay_report(c)
        trunc = FOUR_PI_SQ * report['tail_bound'] * mls.coefficient_norm(f1) * mls.coefficient_norm(f2)
    return make_result(FOUR_PI_SQ * total, trunc, 'series')


def _contour_integral(kernel, f1, f2, nodes, radius):
    pts, w_zbar, w_t = circle_rule(nodes, radius)
    F1 = mls.evaluate_many(f1, pts).reshape(nodes, -1)
    F2 = mls.evaluate_many(f2, pts).reshape(nodes, -1)
    traces = np.conj(F1) @ F2.T  # [j, k] = tr(f1(z_j)^* f2(t_k))
    K = kernel.mixed_grid(pts, pts)
    return complex(w_zbar @ (traces * K) @ w_t)


def _rescale_for_radius(f, radius):
    # f_r -> f_r radius^(-2 (r + 1)) cancels the radius powers picked up by the moment at r
    if radius == 1.:
        return f
    weights = radius ** (-2. * (f.exponents + 1))
    return mls.make_series(f.rank, f.lead, f.coeffs * weights[:, None, None])


def omega_quadrature(kernel, f1, f2, nodes, radius=1.):
    """
    Trapezoid evaluation of (int over |z| = radius) (int over |t| = radius) tr(f1(z)^* f2(t)) K(z, t) dzbar dt.

    On circles of radius rho the (n, m) term carries rho^(2n + 2m); the series are rescaled so the result
    is directly comparable with omega_series. The truncation estimate is the change under halving the
    node count.
    """
    if f1.rank != f2.rank:
        raise ConfigError('rank mismatch: f1 has rank %d, f2 has rank %d' % (f1.rank, f2.rank))
    if not 0 < radius <= 1:
        raise ConfigError('contour radius must lie in (0, 1], got %g' % radius)
    if f1.is_zero() or f2.is_zero():
        return _zero_result('quadrature')
    span = max(mls.max_exponent(f1), mls.max_exponent(f2))
    needed = 2 * span + kernel.effective_degree + 1
    if nodes <= needed:
        raise ConfigError('%d nodes are insufficient: exponents up to %d and kernel degree %d need more than %d'
                          % (nodes, span, kernel.effective_degree, needed))

    g1 = _rescale_for_radius(f1, radius)
    g2 = _rescale_for_radius(f2, radius)
    value = _contour_integral(kernel, g1, g2, nodes, radius)
    coarse = _contour_integral(kernel, g1, g2, nodes // 2, radius) if nodes >= 4 else value
    return make_result(value, abs(value - coarse), 'quadrature')


def omega_swapped(f1, f2, method='series', table=None, kernel=None, nodes=None, radius=1.):
    """omega(f2, f1) on the chosen path; the formula is not assumed antisymmetric."""
    if method == 'series':
        return omega_series(table, f2, f1)
    if method == 'quadrature':
        return omega_quadrature(kernel, f2, f1, nodes, radius)
    raise ConfigError("unknown method '%s' for swapped pairing" % method)


def annulus_nodes(bump, rule):
    """Gauss-Legendre (radius) x trapezoid (angle) nodes on r0 <= |z| <= r1 with area weights."""
    x, wx = np.polynomial.legendre.leggauss(rule.radial)
    half = 0.5 * (bump.r1 - bump.r0)
    r = bump.r0 + half * (x + 1)
    theta = 2 * np.pi * np.arange(rule.angular) / rule.angular
    P = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    w = ((half * wx * r)[:, None] * np.full(rule.angular, 2 * np.pi / rule.angular)[None, :]).ravel()
    return P, w


def _check_reducible(kernel):
    if not isinstance(kernel, (SphereKernel, TorusKernel)):
        raise UnsupportedKernelError("reduction needs a sphere or torus kernel, got '%s'" % kernel.kind)


def _reduce_at(kernel, f, bump, rule, Q, block=512):
    # phi(Q) = 2i int f(P) dbar rho(P) K(P, Q) dA(P); dPbar ^ dP = 2i dA
    P, w = annulus_nodes(bump, rule)
    weights = 2j * w * bump.dbar(P)
    F = mls.evaluate_many(f, P).reshape(len(P), -1)
    Q = np.asarray(Q, dtype=complex).ravel()
    out = np.empty((len(Q), F.shape[1]), dtype=complex)
    for lo in range(0, len(Q), block):
        K = kernel.mixed_grid(P, Q[lo:lo + block])  # [p, q]
        out[lo:lo + block] = (K * weights[:, None]).T @ F
    if not np.all(np.isfinite(out)):
        raise NumericalError('non-finite values in the reduced form')
    return out.reshape(len(Q), f.rank, f.rank)


def target_grid(targets):
    """targets.n x targets.n points spanning [-extent, extent]^2, centred at the marked point."""
    s = np.linspace(-targets.extent, targets.extent, targets.n)
    return s[None, :] + 1j * s[:, None]


def check_targets(Q, bump):
    """Raises ChartError if any target point lies in the closed annulus r0 <= |Q| <= r1."""
    r = np.abs(np.asarray(Q, dtype=complex))
    inside = (r >= bump.r0) & (r <= bump.r1)
    if np.any(inside):
        raise ChartError('%d target points lie inside the bump annulus [%g, %g]; the reduction integral is '
                         'singular there' % (int(np.sum(inside)), bump.r0, bump.r1))


def reduce_cocycle(kernel, f, bump, targets=None, rule=None):
    """
    phi(Q) = int_P f(P) dbar rho(P) ^ d_P dbar_Q h(P, Q), integrated over the annulus where dbar rho != 0.
    Off the diagonal d_P dbar_Q h equals the renormalized kernel K, so the integrand is smooth.
    :param targets: GridSpec of target points; all must avoid the closed annulus r0 <= |Q| <= r1
    :param rule: AnnulusRule
    :return: SampledForm; its `harmonic` property is alpha = Re(phi)
    """
    from configs import annulus_angular_nodes, annulus_radial_nodes, reduce_extent, reduce_targets

    _check_reducible(kernel)
    if targets is None:
        targets = GridSpec(reduce_targets, extent=reduce_extent)
    if rule is None:
        rule = AnnulusRule(annulus_radial_nodes, annulus_angular_nodes)
    Q = target_grid(targets)
    check_targets(Q, bump)
    values = _reduce_at(kernel, f, bump, rule, Q).reshape(Q.shape + (f.rank, f.rank))
    logging.info('Reduced cocycle on %s kernel: %d targets, max |phi| = %.3e', kernel.kind, Q.size,
                 float(np.max(np.abs(values))))
    return SampledForm(Q, values, bump, kernel.kind)


def form_difference(a, b):
    """max |phi_a - phi_b| over a common target grid."""
    if a.values.shape != b.values.shape or not np.array_equal(a.points, b.points):
        raise ConfigError('sampled forms live on different grids')
    return float(np.max(np.abs(a.values - b.values)))


def _fundamental_cells(kernel, n):
    s = (np.arange(n) + 0.5) / n - 0.5
    return s[None, :] + s[:, None] * kernel.tau


def omega_derham(kernel, f1, f2, bump, grid, rule=None):
    """
    int over the torus of tr(phi1^* phi2) dA, from the reduced forms on an n x n grid of the fundamental
    cell centred at the marked point. Cells inside the bump annulus are excluded and the integral is
    extended by the mean over the remaining cells; on the flat torus the reduced forms are constant, so
    this extension is exact.
    """
    from configs import annulus_angular_nodes, annulus_radial_nodes

    if not isinstance(kernel, TorusKernel):
        raise UnsupportedKernelError('the surface-integral pairing is implemented on the torus only')
    if f1.rank != f2.rank:
        raise ConfigError('rank mismatch: f1 has rank %d, f2 has rank %d' % (f1.rank, f2.rank))
    if rule is None:
        rule = AnnulusRule(annulus_radial_nodes, annulus_angular_nodes)
    Q = _fundamental_cells(kernel, grid.n).ravel()
    r = np.abs(Q)
    Q = Q[(r < bump.r0) | (r > bump.r1)]
    if Q.size == 0:
        raise ChartError('no grid cell lies outside the bump annulus; refine the grid')
    phi1 = _reduce_at(kernel, f1, bump, rule, Q)
    phi2 = _reduce_at(kernel, f2, bump, rule, Q)
    density = np.einsum('qij,qij->q', np.conj(phi1), phi2)
    value = kernel.area * np.mean(density)
    # spread of the density measures how far the forms are from constant on the cell
    trunc = kernel.area * float(np.max(np.abs(density - np.mean(density))))
    return make_result(value, trunc, 'derham')


def derham_ratio(kernel, f1, f2, bump, grids, table=None):
    """
    Surface-integral pairing against omega_series on several grid resolutions.
    :param table: coefficient table for the series side; extracted from the kernel when omitted
    :return: dict with per-grid values and ratios, the finest-grid ratio as 'calibration' and the spread
    """
    from configs import extract_radius, extract_samples

    if table is None:
        top = max(f1.last, f2.last, 0) + 1
        table = coeffs.extract(kernel, top, top, extract_radius, extract_radius, extract_samples)
    series = omega_series(table, f1, f2)
    values, ratios = [], []
    for n in grids:
        res = omega_derham(kernel, f1, f2, bump, GridSpec(n))
        values.append(res.complex_value)
        ratios.append(res.complex_value / series.complex_value if series.complex_value != 0 else complex('nan'))
    finite = [r for r in ratios if np.isfinite(r)]
    spread = float(max(abs(a - b) for a in finite for b in finite)) if finite else float('nan')
    report = {
        'grids': list(grids),
        'series': series.complex_value,
        'derham': values,
        'ratio': ratios,
        'calibration': ratios[-1] if ratios else complex('nan'),
        'spread': spread,
    }
    logging.info('De Rham ratio over grids %s: %s (spread %.3e)', list(grids), ratios, spread)
    return report


def random_series(rng, rank, lo, hi):
    """Random complex series with exponents lo..hi (both ends nonzero)."""
    mats = rng.randn(hi - lo + 1, rank, rank) + 1j * rng.randn(hi - lo + 1, rank, rank)
    return mls.make_series(rank, lo, list(mats))


def random_synthetic_case(rng, max_degree=8, max_rank=4, exponents=(-4, 8)):
    """
    One case of the randomized oracle suite: a synthetic table with entries on n + m <= max_degree
    (n, m >= 0) and two series whose exponent windows overlap the ones the table selects.
    :param rng: np.random.RandomState
    :return: (table, f1, f2)
    """
    lo, hi = exponents
    rank = rng.randint(1, max_rank + 1)
    nmax = rng.randint(0, max_degree + 1)
    mmax = rng.randint(0, max_degree - nmax + 1)
    a = rng.randn(nmax + 1, mmax + 1) + 1j * rng.randn(nmax + 1, mmax + 1)
    table = coeffs.make_table(0, 0, a)

    def series_for(top):
        # the table reads exponents -1 .. top - 1
        lead = rng.randint(lo, max(min(top - 1, hi), lo) + 1)
        last = rng.randint(max(lead, -1), hi + 1)
        return random_series(rng, rank, lead, last)

    return table, series_for(nmax), series_for(mmax)
