import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


class LoopformError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(LoopformError, ValueError):
    """Invalid parameters or malformed input files."""


class UnsupportedKernelError(ConfigError):
    """Operation applied to a kernel variant outside its declared domain."""


class ChartError(ConfigError):
    """Point outside the chart, at a pole, or on a singular locus."""


class NumericalError(LoopformError, ArithmeticError):
    """Non-finite samples or results."""


def parse_complex(text):
    """Parses 're,im' (or a bare real 're') as used on the command line."""
    parts = [p.strip() for p in str(text).split(',')]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError("Expected a complex number as 're,im', got '%s'." % text)


def parse_float_pair(text):
    parts = [p.strip() for p in str(text).split(',')]
    try:
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
    except ValueError:
        pass
    raise ConfigError("Expected two reals as 'a,b', got '%s'." % text)


def complex_to_json(z):
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(obj, field='value'):
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        try:
            return complex(float(obj[0]), float(obj[1]))
        except (TypeError, ValueError):
            pass
    raise ConfigError("Field '%s': expected [re, im], got %r." % (field, obj))


def matrix_to_json(mat):
    """rank x rank complex matrix -> rank rows of [re, im] pairs."""
    return [[complex_to_json(x) for x in row] for row in np.asarray(mat)]


def matrix_from_json(obj, field='matrix'):
    if not isinstance(obj, (list, tuple)) or not obj:
        raise ConfigError("Field '%s': expected a non-empty list of rows." % field)
    rows = []
    for i, row in enumerate(obj):
        if not isinstance(row, (list, tuple)):
            raise ConfigError("Field '%s[%d]': expected a row of [re, im] entries." % (field, i))
        rows.append([complex_from_json(x, '%s[%d][%d]' % (field, i, j)) for j, x in enumerate(row)])
    lengths = {len(row) for row in rows}
    if len(lengths) != 1 or lengths.pop() != len(rows):
        raise ConfigError("Field '%s': matrix is not square." % field)
    return np.asarray(rows, dtype=complex)


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError("Cannot read '%s': %s" % (path, e))
    except ValueError as e:
        raise ConfigError("'%s' is not valid JSON: %s" % (path, e))


def write_json(path, obj):
    """Writes obj with sorted keys, so identical inputs give byte-identical files."""
    out_dir = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(out_dir):
        os.makedirs(out_dir)
    with open(path, 'w') as f:  # will overwrite existing
        json.dump(obj, f, indent=4, sort_keys=True)
        f.write('\n')


def get_runname(args_dict, record_keys=('kernel', 'nmax', 'radius'), prefix=''):
    """
    Given a dictionary of cmdline arguments, return a string that identifies the run.
    :param args_dict:
    :param record_keys: keys whose values are recorded, in order; missing or None values are skipped
    :param prefix: usually the subcommand name
    :return:
    """
    config_strs = []  # ['key1=val1', 'key2=val2', ...]
    for key in record_keys:
        val = args_dict.get(key)
        if val is None:
            continue
        if isinstance(val, (list, tuple)):
            val = '_'.join(map(str, val))
        config_strs.append('%s=%s' % (key, val))

    return '-'.join([prefix] + config_strs)


def evaluate_chunked(fn, *arrays, num_threads=None, chunk_size=16384):
    """
    Evaluate an elementwise function over broadcast arrays in chunks, spread over a thread pool.
    numpy releases the GIL inside the vectorized kernels, so threads give real parallelism here.
    Chunk results are concatenated in order, so the output does not depend on the thread count.
    :param fn: callable taking flat arrays and returning a flat array of the same length
    :param arrays: arrays broadcastable to a common shape
    :param num_threads: defaults to configs.get_num_threads()
    :param chunk_size: number of points per task
    :return: array of the broadcast shape
    """
    from configs import get_num_threads

    arrays = np.broadcast_arrays(*[np.asarray(a) for a in arrays])
    shape = arrays[0].shape
    flat = [a.ravel() for a in arrays]
    size = flat[0].size
    if num_threads is None:
        num_threads = get_num_threads()
    if size <= chunk_size or num_threads <= 1:
        return np.asarray(fn(*flat)).reshape(shape)

    bounds = [(lo, min(lo + chunk_size, size)) for lo in range(0, size, chunk_size)]
    with ThreadPoolExecutor(max_workers=num_threads) as pool:
        parts = list(pool.map(lambda b: np.asarray(fn(*[a[b[0]:b[1]] for a in flat])), bounds))
    return np.concatenate(parts).reshape(shape)
