"""Double-series coefficients a_{n,m} of a derivative kernel K(z, t) = sum a_{n,m} z^n conj(t)^m.

Coefficients are extracted with the Cauchy formula on the torus of circles |z| = rho_z, |t| = rho_t, using
uniform angles and a two-dimensional FFT (trapezoidal rule, exact for band-limited integrands).
"""

from typing import NamedTuple

import numpy as np
from absl import logging

from utils import ConfigError, NumericalError, complex_from_json, complex_to_json, read_json, write_json


class KernelCoefficients(NamedTuple):
    """Table a[n - nmin, m - mmin] plus the sampling metadata it was produced with."""
    nmin: int
    mmin: int
    a: np.ndarray  # complex, shape (num_n, num_m)
    rho_z: float = 0.
    rho_t: float = 0.
    samples: int = 0

    @property
    def nmax(self):
        return self.nmin + self.a.shape[0] - 1

    @property
    def mmax(self):
        return self.mmin + self.a.shape[1] - 1

    @property
    def n_indices(self):
        return np.arange(self.nmin, self.nmax + 1)

    @property
    def m_indices(self):
        return np.arange(self.mmin, self.mmax + 1)

    def entry(self, n, m):
        i, j = n - self.nmin, m - self.mmin
        if 0 <= i < self.a.shape[0] and 0 <= j < self.a.shape[1]:
            return complex(self.a[i, j])
        return 0j

    def nonzero_entries(self):
        """[(n, m, a_{n,m})] in ascending (n, m) order, skipping exact zeros."""
        rows, cols = np.nonzero(self.a)
        return [(int(self.nmin + i), int(self.mmin + j), complex(self.a[i, j])) for i, j in zip(rows, cols)]

    @property
    def degree(self):
        # largest index magnitude in the window
        return int(max(abs(self.nmin), abs(self.nmax), abs(self.mmin), abs(self.mmax)))


def make_table(nmin, mmin, a, rho_z=0., rho_t=0., samples=0):
    a = np.array(np.atleast_2d(a), dtype=complex)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ConfigError('coefficient table must be a non-empty 2D array, got shape %s' % (a.shape,))
    if not np.all(np.isfinite(a)):
        raise NumericalError('coefficient table has non-finite entries')
    for name, rho in (('rho_z', rho_z), ('rho_t', rho_t)):
        if rho and not 0 < rho < 1:
            raise ConfigError('%s must lie in (0, 1), got %g' % (name, rho))
    a.flags.writeable = False
    return KernelCoefficients(int(nmin), int(mmin), a, float(rho_z), float(rho_t), int(samples))


def table_from_dict(entries, nmin=None, mmin=None, nmax=None, mmax=None):
    """
    Build a table from {(n, m): a_{n,m}}; the window defaults to the bounding box of the entries and (0, 0).
    """
    ns = [n for n, _ in entries] + [0]
    ms = [m for _, m in entries] + [0]
    nmin = min(ns) if nmin is None else nmin
    mmin = min(ms) if mmin is None else mmin
    nmax = max(ns) if nmax is None else nmax
    mmax = max(ms) if mmax is None else mmax
    a = np.zeros((nmax - nmin + 1, mmax - mmin + 1), dtype=complex)
    for (n, m), val in entries.items():
        a[n - nmin, m - mmin] = val
    return make_table(nmin, mmin, a)


def pad_table(c, nmin, mmin, nmax, mmax):
    """Same coefficients on a larger window, filled with zeros."""
    if nmin > c.nmin or mmin > c.mmin or nmax < c.nmax or mmax < c.mmax:
        raise ConfigError('padded window must contain the original window')
    a = np.zeros((nmax - nmin + 1, mmax - mmin + 1), dtype=complex)
    a[c.nmin - nmin:c.nmax - nmin + 1, c.mmin - mmin:c.mmax - mmin + 1] = c.a
    return make_table(nmin, mmin, a, c.rho_z, c.rho_t, c.samples)


def extract(kernel, nmax, mmax, rho_z, rho_t, samples, nmin=0, mmin=0, noise_floor=None):
    """
    Cauchy-formula extraction of a_{n,m} for nmin <= n <= nmax, mmin <= m <= mmax.

    a_{n,m} = 1 / (S^2 rho_z^n rho_t^m) sum_{j,k} K(rho_z e^{i theta_j}, rho_t e^{i phi_k}) e^{-i n theta_j} e^{+i m phi_k}

    The +i sign on the t index picks out the conj(t)^m dependence. The double sum is one forward FFT along
    the z axis and one inverse FFT along the t axis.
    :param kernel: anything with a mixed_grid(zs, ts) method (green.SurfaceKernel)
    :param samples: angles per circle; must exceed 2 * max(|index|) + 1
    :param noise_floor: Fourier samples below noise_floor * max|F| become exact zeros before rescaling
    :return: KernelCoefficients
    """
    from configs import coeff_noise_floor

    for name, rho in (('rho_z', rho_z), ('rho_t', rho_t)):
        if not 0 < rho < 1:
            raise ConfigError('%s must lie in (0, 1), got %g' % (name, rho))
    if nmax < nmin or mmax < mmin:
        raise ConfigError('empty index window n in [%d, %d], m in [%d, %d]' % (nmin, nmax, mmin, mmax))
    degree = max(abs(nmin), abs(nmax), abs(mmin), abs(mmax))
    if samples <= 2 * degree + 1:
        raise ConfigError('samples = %d too small for degree %d; need more than %d'
                          % (samples, degree, 2 * degree + 1))
    if noise_floor is None:
        noise_floor = coeff_noise_floor

    angles = 2 * np.pi * np.arange(samples) / samples
    zs = rho_z * np.exp(1j * angles)
    ts = rho_t * np.exp(1j * angles)
    K = kernel.mixed_grid(zs, ts)
    if not np.all(np.isfinite(K)):
        raise NumericalError('non-finite kernel samples on the extraction circles')

    # F[n, m] = 1/S^2 sum_jk K_jk e^{-i n theta_j} e^{+i m phi_k}
    F = np.fft.fft(np.fft.ifft(K, axis=1), axis=0) / samples
    scale = np.max(np.abs(F))
    if scale > 0:
        F[np.abs(F) <= noise_floor * scale] = 0.

    n_idx = np.arange(nmin, nmax + 1)
    m_idx = np.arange(mmin, mmax + 1)
    a = F[np.ix_(n_idx % samples, m_idx % samples)]
    a = a / (rho_z ** n_idx.astype(float))[:, None] / (rho_t ** m_idx.astype(float))[None, :]
    amplification = rho_z ** -float(max(nmax, 0)) * rho_t ** -float(max(mmax, 0))
    if amplification * np.finfo(float).eps > 1:
        logging.warning('Radius scaling amplifies round-off by %.1e; the highest coefficients are noise. '
                        'Use larger radii or a smaller window.', amplification)
    logging.info('Extracted %dx%d table at rho_z=%g rho_t=%g with %d samples', len(n_idx), len(m_idx),
                 rho_z, rho_t, samples)
    return make_table(nmin, mmin, a, rho_z, rho_t, samples)


def synthesize(c, z, t):
    """
    sum a_{n,m} z^n conj(t)^m over the stored table, elementwise over broadcast z and t.
    Outside |z| <= rho_z, |t| <= rho_t the truncated series may be far from the kernel; that is the caller's risk.
    """
    z, t = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(t, dtype=complex))
    zp = z[..., None] ** c.n_indices
    tp = np.conj(t)[..., None] ** c.m_indices
    out = np.einsum('...n,nm,...m->...', zp, c.a, tp)
    if out.ndim == 0:
        return complex(out)
    return out


def synthesize_grid(c, zs, ts):
    """Outer-product evaluation: out[j, k] = synthesize(c, zs[j], ts[k])."""
    zp = np.asarray(zs, dtype=complex)[:, None] ** c.n_indices
    tp = np.conj(np.asarray(ts, dtype=complex))[:, None] ** c.m_indices
    return zp @ c.a @ tp.T


def decay_report(c):
    """
    Decay diagnostics of a table along antidiagonals d = (n - nmin) + (m - mmin).
    :return: dict with
        'antidiagonal_max': max |a_{n,m}| per antidiagonal,
        'rate': fitted geometric decay rate r (max_d ~ C r^d, least squares on log max_d over nonzero antidiagonals),
        'tail_bound': estimate of sum |a_{n,m}| over the antidiagonals beyond the table,
        'last_nonzero': index of the last nonzero antidiagonal (-1 for an all-zero table).
    """
    num_n, num_m = c.a.shape
    absa = np.abs(c.a)
    num_d = num_n + num_m - 1
    diag = np.zeros(num_d)
    for i in range(num_n):
        diag[i:i + num_m] = np.maximum(diag[i:i + num_m], absa[i])

    nonzero = np.flatnonzero(diag > 0)
    report = {'antidiagonal_max': diag.tolist(), 'rate': 0., 'tail_bound': 0.,
              'last_nonzero': int(nonzero[-1]) if nonzero.size else -1}
    if nonzero.size < 2:
        # a single antidiagonal (or nothing) has no measurable decay and nothing beyond it
        return report

    slope, intercept = np.polyfit(nonzero.astype(float), np.log(diag[nonzero]), 1)
    rate = float(np.exp(slope))
    report['rate'] = rate
    if rate >= 1:
        report['tail_bound'] = float('inf')
        return report
    # antidiagonal d holds at most d + 1 entries
    D = num_d - 1
    last = np.exp(intercept + slope * D)
    report['tail_bound'] = float(last * ((D + 1) * rate / (1 - rate) + rate / (1 - rate) ** 2))
    return report


def format_decay_report(report):
    lines = ['antidiagonal  max|a|']
    for d, val in enumerate(report['antidiagonal_max']):
        lines.append('{:>12d}  {:.3e}'.format(d, val))
    lines.append('rate: {:0.4f}'.format(report['rate']))
    lines.append('tail bound: {:.3e}'.format(report['tail_bound']))
    return '\n'.join(lines)


def table_to_json(c):
    return {'nmin': c.nmin, 'mmin': c.mmin, 'a': [[complex_to_json(x) for x in row] for row in c.a],
            'rho_z': c.rho_z, 'rho_t': c.rho_t, 'samples': c.samples}


def _int_field(obj, key, default=None, minimum=None):
    v = obj.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or (minimum is not None and v < minimum):
        kind = 'an integer' if minimum is None else 'an integer >= %d' % minimum
        raise ConfigError("Field '%s': expected %s, got %r" % (key, kind, v))
    return v


def _real_field(obj, key, default=0.):
    v = obj.get(key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError("Field '%s': expected a number, got %r" % (key, v))
    return float(v)


def table_from_json(obj):
    if not isinstance(obj, dict):
        raise ConfigError('coefficient table must be a JSON object')
    for key in ('nmin', 'mmin', 'a'):
        if key not in obj:
            raise ConfigError("coefficient table is missing field '%s'" % key)
    nmin, mmin = _int_field(obj, 'nmin'), _int_field(obj, 'mmin')
    samples = _int_field(obj, 'samples', default=0, minimum=0)
    rho_z, rho_t = _real_field(obj, 'rho_z'), _real_field(obj, 'rho_t')
    rows = obj['a']
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) and r for r in rows):
        raise ConfigError("Field 'a': expected a non-empty list of non-empty rows")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("Field 'a': rows have different lengths")
    a = [[complex_from_json(x, 'a[%d][%d]' % (i, j)) for j, x in enumerate(row)] for i, row in enumerate(rows)]
    return make_table(nmin, mmin, a, rho_z, rho_t, samples)


def load_table(path):
    return table_from_json(read_json(path))


def save_table(path, c):
    write_json(path, table_to_json(c))
