"""Matrix-valued Laurent series f(z) = sum_r f_r z^r over a finite window of exponents.

These are the tangent vectors to the double quotient SL_n(K) \\ SL_n((z)) / SL_n[[z]] at the identity.
A series stores its coefficients for exponents lead, lead + 1, ..., lead + len - 1 as one read-only
(len, rank, rank) complex array. Every constructor returns the canonical form, with all-zero leading and
trailing coefficients trimmed; the zero series is lead = 0 with a single zero matrix.
"""

import numpy as np

from utils import ConfigError, ChartError, matrix_from_json, matrix_to_json, read_json, write_json


def as_matrix(mat, rank=None, name='matrix'):
    """Returns mat as a square complex array, checking the rank if given."""
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise ConfigError('%s must be a non-empty square matrix, got shape %s' % (name, mat.shape))
    if rank is not None and mat.shape[0] != rank:
        raise ConfigError('%s has rank %d, expected %d' % (name, mat.shape[0], rank))
    return mat


class MatrixLaurentSeries:

    def __init__(self, rank, lead, coeffs):
        """
        Use make_series() from outside this module; the constructor trusts its arguments.
        :param rank: matrix size n
        :param lead: exponent of coeffs[0]
        :param coeffs: complex array of shape (len, rank, rank), already canonical
        """
        coeffs = np.array(coeffs, dtype=complex)
        coeffs.flags.writeable = False
        self._rank = int(rank)
        self._lead = int(lead)
        self._coeffs = coeffs

    @property
    def rank(self):
        return self._rank

    @property
    def lead(self):
        return self._lead

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def last(self):
        # highest stored exponent
        return self._lead + len(self._coeffs) - 1

    @property
    def exponents(self):
        return np.arange(self._lead, self.last + 1)

    def is_zero(self):
        return not np.any(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    def __eq__(self, other):
        if not isinstance(other, MatrixLaurentSeries):
            return NotImplemented
        return (self.rank == other.rank and self.lead == other.lead
                and self.coeffs.shape == other.coeffs.shape and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.rank, self.lead, self.coeffs.tobytes()))

    def __repr__(self):
        return 'MatrixLaurentSeries(rank=%d, lead=%d, len=%d)' % (self.rank, self.lead, len(self))

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __neg__(self):
        return scale(self, -1.)

    def __mul__(self, c):
        if isinstance(c, MatrixLaurentSeries):
            return NotImplemented
        return scale(self, c)

    __rmul__ = __mul__

    # numpy scalars on the left defer to __rmul__
    __array_ufunc__ = None


def _canonical(rank, lead, coeffs):
    nonzero = np.flatnonzero(np.any(coeffs.reshape(len(coeffs), -1) != 0, axis=1))
    if nonzero.size == 0:
        return MatrixLaurentSeries(rank, 0, np.zeros((1, rank, rank), dtype=complex))
    lo, hi = nonzero[0], nonzero[-1]
    return MatrixLaurentSeries(rank, lead + lo, coeffs[lo:hi + 1])


def make_series(rank, lead, coeffs):
    """
    Build a canonical series from coefficient matrices for exponents lead, lead + 1, ...
    :param rank: positive integer
    :param lead: lowest exponent q
    :param coeffs: non-empty list of rank x rank matrices (a 1x1 matrix may be given as a scalar or [x])
    :return: MatrixLaurentSeries with leading/trailing zero coefficients trimmed
    """
    rank = int(rank)
    if rank < 1:
        raise ConfigError('rank must be positive, got %d' % rank)
    if coeffs is None or len(coeffs) == 0:
        raise ConfigError('coefficient list is empty')
    mats = [as_matrix(c, rank, name='coeffs[%d]' % i) for i, c in enumerate(coeffs)]
    return _canonical(rank, int(lead), np.stack(mats))


def zero_series(rank):
    return make_series(rank, 0, [np.zeros((rank, rank))])


def scalar_series(lead, values):
    """1x1 series from scalar coefficients, e.g. scalar_series(-1, [1]) is z^-1."""
    return make_series(1, lead, [[[v]] for v in values])


def identity_series(rank, power=0):
    """I_rank * z^power."""
    return make_series(rank, power, [np.eye(rank)])


def coefficient(f, r):
    """f_r, or the zero matrix when r is outside the stored window."""
    idx = int(r) - f.lead
    if 0 <= idx < len(f):
        return f.coeffs[idx]
    return np.zeros((f.rank, f.rank), dtype=complex)


def evaluate(f, z):
    """sum_r f_r z^r over the stored window."""
    z = complex(z)
    if z == 0:
        if f.lead < 0 and not f.is_zero():
            raise ChartError('cannot evaluate a series with negative lead %d at z = 0' % f.lead)
        return np.array(coefficient(f, 0))
    powers = z ** f.exponents.astype(float)
    return np.tensordot(powers, f.coeffs, axes=(0, 0))


def evaluate_many(f, zs):
    """
    Evaluate at an array of points.
    :param f: MatrixLaurentSeries
    :param zs: complex array of any shape
    :return: complex array of shape zs.shape + (rank, rank)
    """
    zs = np.asarray(zs, dtype=complex)
    if f.lead < 0 and np.any(zs == 0) and not f.is_zero():
        raise ChartError('cannot evaluate a series with negative lead %d at z = 0' % f.lead)
    powers = zs[..., None] ** f.exponents
    return np.tensordot(powers, f.coeffs, axes=(-1, 0))


def trace_pair(A, B):
    """tr(A^* B) with A^* the conjugate transpose; equals sum_ij conj(A_ij) B_ij."""
    A = as_matrix(A, name='A')
    B = as_matrix(B, name='B')
    if A.shape != B.shape:
        raise ConfigError('rank mismatch in trace pairing: %d vs %d' % (A.shape[0], B.shape[0]))
    return complex(np.vdot(A, B))


def _check_ranks(f, g):
    if f.rank != g.rank:
        raise ConfigError('rank mismatch: %d vs %d' % (f.rank, g.rank))


def add(f, g):
    _check_ranks(f, g)
    lead = min(f.lead, g.lead)
    last = max(f.last, g.last)
    out = np.zeros((last - lead + 1, f.rank, f.rank), dtype=complex)
    out[f.lead - lead:f.last - lead + 1] += f.coeffs
    out[g.lead - lead:g.last - lead + 1] += g.coeffs
    return _canonical(f.rank, lead, out)


def subtract(f, g):
    return add(f, scale(g, -1.))


def scale(f, c):
    return _canonical(f.rank, f.lead, complex(c) * f.coeffs)


def max_exponent(f):
    """Largest exponent magnitude present; 0 for the zero series."""
    if f.is_zero():
        return 0
    return max(abs(f.lead), abs(f.last))


def coefficient_norm(f):
    """Largest Frobenius norm over the stored coefficients."""
    return float(np.max(np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=(1, 2)))))


def series_to_json(f):
    return {'rank': f.rank, 'lead': f.lead, 'coeffs': [matrix_to_json(c) for c in f.coeffs]}


def series_from_json(obj):
    if not isinstance(obj, dict):
        raise ConfigError('series file must hold a JSON object')
    for key in ('rank', 'lead', 'coeffs'):
        if key not in obj:
            raise ConfigError("series file is missing field '%s'" % key)
    rank, lead = obj['rank'], obj['lead']
    if not isinstance(rank, int) or isinstance(rank, bool) or rank < 1:
        raise ConfigError("Field 'rank': expected a positive integer, got %r" % (rank,))
    if not isinstance(lead, int) or isinstance(lead, bool):
        raise ConfigError("Field 'lead': expected an integer, got %r" % (lead,))
    if not isinstance(obj['coeffs'], list) or not obj['coeffs']:
        raise ConfigError("Field 'coeffs': expected a non-empty list of matrices")
    mats = [matrix_from_json(c, field='coeffs[%d]' % i) for i, c in enumerate(obj['coeffs'])]
    for i, mat in enumerate(mats):
        if mat.shape[0] != rank:
            raise ConfigError("Field 'coeffs[%d]': matrix has rank %d but 'rank' is %d" % (i, mat.shape[0], rank))
    return make_series(rank, lead, mats)


def load_series(path):
    return series_from_json(read_json(path))


def save_series(path, f):
    write_json(path, series_to_json(f))
