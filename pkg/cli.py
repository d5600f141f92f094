"""
Command-line front end.

    python cli.py coeffs --kernel torus --tau 0,1 --nmax 16 --out table.json
    python cli.py pair --kernel synthetic --table table.json --f1 f1.json --f2 f2.json --method both
    python cli.py reduce --kernel torus --f1 f.json --bump 0.3,0.6 --bump2 0.2,0.8
    python cli.py verify oracle --cases 100 --seed 7

Exit codes: 0 success, 1 numerical failure or failing verification check, 2 invalid configuration.
"""

import os
import sys
from typing import NamedTuple, Optional

from absl import app
from absl import logging

import configs
from utils import ConfigError, LoopformError, NumericalError, get_runname, parse_complex, parse_float_pair

KERNEL_KINDS = ('sphere', 'torus', 'plane', 'synthetic')


class RunConfig(NamedTuple):
    command: str
    kernel: str = 'sphere'  # a kind from KERNEL_KINDS or a path to a kernel descriptor
    tau: complex = 1j
    table: Optional[str] = None
    f1: Optional[str] = None
    f2: Optional[str] = None
    nmax: int = configs.extract_nmax
    mmax: Optional[int] = None
    radius: float = configs.extract_radius
    samples: int = configs.extract_samples
    nodes: int = configs.quadrature_nodes
    rho: float = configs.contour_radius
    method: str = 'series'
    bump: tuple = configs.bump
    bump2: Optional[tuple] = None
    order: int = configs.bump_order
    grid: Optional[int] = None
    extent: float = configs.reduce_extent
    seed: int = configs.seed
    cases: int = configs.oracle_cases
    tol: Optional[float] = None
    suite: Optional[str] = None
    out: Optional[str] = None
    verbose: bool = False


def build_config(args):
    """
    Turns parsed arguments into a validated RunConfig.
    :raises ConfigError: on out-of-range values or missing input files
    """
    raw = {k: v for k, v in vars(args).items() if k in RunConfig._fields and v is not None}
    for key in ('tau',):
        if isinstance(raw.get(key), str):
            raw[key] = parse_complex(raw[key])
    for key in ('bump', 'bump2'):
        if isinstance(raw.get(key), str):
            raw[key] = parse_float_pair(raw[key])
    config = RunConfig(**raw)

    if config.mmax is None:
        config = config._replace(mmax=config.nmax)
    if not 0 < config.radius < 1:
        raise ConfigError('--radius must lie in (0, 1), got %g' % config.radius)
    if not 0 < config.rho <= 1:
        raise ConfigError('--rho must lie in (0, 1], got %g' % config.rho)
    for key in ('samples', 'nodes', 'cases', 'order'):
        if getattr(config, key) < 1:
            raise ConfigError('--%s must be positive, got %d' % (key, getattr(config, key)))
    if config.nmax < 0 or config.mmax < 0:
        raise ConfigError('--nmax and --mmax must be non-negative')
    if config.grid is not None and config.grid < 2:
        raise ConfigError('--grid must be at least 2, got %d' % config.grid)
    if config.extent <= 0:
        raise ConfigError('--extent must be positive, got %g' % config.extent)
    if config.kernel not in KERNEL_KINDS and not os.path.isfile(config.kernel):
        raise ConfigError("--kernel must be one of %s or a kernel descriptor file, got '%s'"
                          % (', '.join(KERNEL_KINDS), config.kernel))
    for key in ('table', 'f1', 'f2'):
        path = getattr(config, key)
        if path is not None and not os.path.isfile(path):
            raise ConfigError("--%s: no such file '%s'" % (key, path))
    return config


def load_kernel(config):
    import coeffs
    import green

    if config.kernel not in KERNEL_KINDS:
        return green.load_kernel(config.kernel)
    table = coeffs.load_table(config.table) if config.kernel == 'synthetic' and config.table else None
    return green.make_kernel(config.kernel, tau=config.tau, table=table)


def _require(config, *keys):
    for key in keys:
        if getattr(config, key) is None:
            raise ConfigError("'%s' needs --%s" % (config.command, key))


def _output_path(config, record_keys):
    if config.out:
        return config.out
    record = config._asdict()
    record['kernel'] = os.path.splitext(os.path.basename(config.kernel))[0]
    return get_runname(record, record_keys=record_keys, prefix=config.command) + '.json'


def cmd_coeffs(config):
    """Extracts a coefficient table, writes it as JSON and prints the decay summary."""
    import coeffs

    kernel = load_kernel(config)
    table = coeffs.extract(kernel, config.nmax, config.mmax, config.radius, config.radius, config.samples)
    out = _output_path(config, ('kernel', 'nmax', 'radius'))
    coeffs.save_table(out, table)
    print(coeffs.format_decay_report(coeffs.decay_report(table)))
    print('a_00: {:0.10f}{:+0.10f}i'.format(table.entry(0, 0).real, table.entry(0, 0).imag))
    print('Saved coefficient table to', out)
    return 0


def _pairing_table(config, kernel, f1, f2):
    import coeffs
    import green
    import mls

    if config.table:
        return coeffs.load_table(config.table)
    if isinstance(kernel, green.SyntheticKernel):
        return kernel.table
    # the series reads a_{n,m} with n - 1, m - 1 in the exponent windows of f1, f2
    nmax = max(config.nmax, mls.max_exponent(f1) + 1)
    mmax = max(config.mmax, mls.max_exponent(f2) + 1)
    samples = max(config.samples, 2 * max(nmax, mmax) + 2)
    return coeffs.extract(kernel, nmax, mmax, config.radius, config.radius, samples)


def cmd_pair(config):
    """Writes the PairingResult of one method, or both results and their relative deviation."""
    import mls
    import pairing
    from utils import write_json

    _require(config, 'f1', 'f2')
    if config.method not in ('series', 'quadrature', 'both'):
        raise ConfigError("--method must be series, quadrature or both, got '%s'" % config.method)
    f1 = mls.load_series(config.f1)
    f2 = mls.load_series(config.f2)
    if f1.rank != f2.rank:
        raise ConfigError('rank mismatch: %s has rank %d, %s has rank %d' % (config.f1, f1.rank, config.f2, f2.rank))
    kernel = load_kernel(config)

    results = {}
    if config.method in ('series', 'both'):
        table = _pairing_table(config, kernel, f1, f2)
        results['series'] = pairing.omega_series(table, f1, f2)
        swapped = pairing.omega_swapped(f1, f2, 'series', table=table)
        print('omega_series: {:0.10f} (swapped order: {:0.10f})'.format(results['series'].value, swapped.value))
    if config.method in ('quadrature', 'both'):
        results['quadrature'] = pairing.omega_quadrature(kernel, f1, f2, config.nodes, config.rho)
        swapped = pairing.omega_swapped(f1, f2, 'quadrature', kernel=kernel, nodes=config.nodes, radius=config.rho)
        print('omega_quadrature: {:0.10f} (swapped order: {:0.10f})'.format(results['quadrature'].value,
                                                                            swapped.value))

    out = _output_path(config, ('kernel', 'method'))
    if config.method == 'both':
        deviation = pairing.relative_deviation(results['quadrature'], results['series'])
        print('relative deviation: {:.3e}'.format(deviation))
        write_json(out, {'series': pairing.result_to_json(results['series']),
                         'quadrature': pairing.result_to_json(results['quadrature']),
                         'deviation': deviation})
    else:
        write_json(out, pairing.result_to_json(results[config.method]))
    print('Saved pairing result to', out)
    return 0


def cmd_reduce(config):
    """Writes the reduced form phi on the target grid; with --bump2 also reports the bump difference."""
    import green
    import mls
    import pairing

    _require(config, 'f1')
    kernel = load_kernel(config)
    f = mls.load_series(config.f1)
    targets = green.GridSpec(config.grid or configs.reduce_targets, extent=config.extent)
    bumps = [pairing.make_bump(config.bump[0], config.bump[1], config.order)]
    if config.bump2 is not None:
        bumps.append(pairing.make_bump(config.bump2[0], config.bump2[1], config.order))
    # every target must clear every annulus before anything is written
    for bump in bumps:
        pairing.check_targets(pairing.target_grid(targets), bump)

    forms = [pairing.reduce_cocycle(kernel, f, bump, targets) for bump in bumps]
    out = _output_path(config, ('kernel', 'bump'))
    pairing.save_form(out, forms[0])
    print('max |phi|: {:.3e}'.format(forms[0].max_norm()))
    if len(forms) > 1:
        print('bump difference: {:.3e}'.format(pairing.form_difference(forms[0], forms[1])))
    print('Saved reduced form to', out)
    return 0


def cmd_verify(config):
    """Runs a suite and prints pass/fail per check; exit code 1 if any check fails."""
    import verify
    from utils import write_json

    if config.suite != 'all' and config.suite not in verify.SUITES:
        raise ConfigError("unknown suite '%s'; expected one of %s or all" % (config.suite, ', '.join(verify.SUITES)))
    opts = verify.VerifyOptions(tau=config.tau, seed=config.seed, cases=config.cases, nodes=config.nodes,
                                samples=config.samples, radius=config.radius, nmax=config.nmax, grid=config.grid,
                                tol=config.tol, bump=config.bump, order=config.order)
    checks = verify.run_suite(config.suite, opts)
    print(verify.format_checks(checks))
    if config.out:
        write_json(config.out, verify.checks_to_json(checks))
    return 0 if all(c.passed for c in checks) else 1


COMMANDS = {'coeffs': cmd_coeffs, 'pair': cmd_pair, 'reduce': cmd_reduce, 'verify': cmd_verify}


def parse_args(argv):
    """Parses command line arguments."""
    import argparse
    from absl.flags import argparse_flags

    parser = argparse_flags.ArgumentParser(
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    # High-level options.
    parser.add_argument(
        "--verbose", "-V", action="store_true",
        help="Log extraction parameters, lattice sizes and calibration constants.")
    subparsers = parser.add_subparsers(
        title="commands", dest="command",
        help="What to do: 'coeffs' extracts the kernel's double-series coefficients, 'pair' evaluates the "
             "pairing of two series files, 'reduce' samples the reduced form of a series, 'verify' runs a "
             "verification suite. Invoke '<command> -h' for more information.")

    coeffs_cmd = subparsers.add_parser(
        "coeffs",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Extracts the coefficient table a_{n,m} of a kernel and writes it as JSON.")
    pair_cmd = subparsers.add_parser(
        "pair",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Evaluates omega(f1, f2) from a coefficient table and/or by contour quadrature.")
    reduce_cmd = subparsers.add_parser(
        "reduce",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Samples the reduced form phi(Q) of a series on a target grid.")
    verify_cmd = subparsers.add_parser(
        "verify",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Runs a verification suite; exits 1 if any check fails.")

    # Arguments shared by the kernel-based commands.
    for cmd in (coeffs_cmd, pair_cmd, reduce_cmd):
        cmd.add_argument(
            "--kernel", default="sphere",
            help="Kernel kind (%s) or path to a kernel descriptor JSON file." % ", ".join(KERNEL_KINDS))
        cmd.add_argument(
            "--table",
            help="Coefficient table file; the synthetic kernel, or the series side of 'pair'.")
        cmd.add_argument(
            "--out",
            help="Output file; defaults to a name built from the run config.")
    for cmd in (coeffs_cmd, pair_cmd, reduce_cmd, verify_cmd):
        cmd.add_argument(
            "--tau", default="0,1",
            help="Torus modulus as 're,im' with im > 0.")
    for cmd in (coeffs_cmd, pair_cmd, verify_cmd):
        cmd.add_argument(
            "--nmax", type=int, default=configs.extract_nmax,
            help="Largest holomorphic index of the extracted table.")
        cmd.add_argument(
            "--radius", type=float, default=configs.extract_radius,
            help="Sampling radius of both extraction circles.")
        cmd.add_argument(
            "--samples", type=int, default=configs.extract_samples,
            help="Uniform angles per extraction circle.")
    for cmd in (coeffs_cmd, pair_cmd):
        cmd.add_argument(
            "--mmax", type=int,
            help="Largest antiholomorphic index; defaults to --nmax.")
    for cmd in (pair_cmd, verify_cmd):
        cmd.add_argument(
            "--nodes", type=int, default=configs.quadrature_nodes,
            help="Trapezoid nodes per circle for the contour quadrature.")
    for cmd in (pair_cmd, reduce_cmd):
        cmd.add_argument(
            "--f1",
            help="Series file (JSON) of the first argument.")
    for cmd in (reduce_cmd, verify_cmd):
        cmd.add_argument(
            "--bump", default="%g,%g" % configs.bump,
            help="Cutoff radii 'r0,r1' with 0 < r0 < r1 < 1.")
        cmd.add_argument(
            "--order", type=int, default=configs.bump_order,
            help="Smoothstep order of the cutoff profile (>= 2).")
        cmd.add_argument(
            "--grid", type=int,
            help="Grid size; the target grid of 'reduce', or overrides the suite's grid in 'verify'.")

    pair_cmd.add_argument(
        "--f2",
        help="Series file (JSON) of the second argument.")
    pair_cmd.add_argument(
        "--method", default="series", choices=("series", "quadrature", "both"),
        help="'both' also reports the relative deviation between the two paths.")
    pair_cmd.add_argument(
        "--rho", type=float, default=configs.contour_radius,
        help="Common radius of the two quadrature circles.")

    reduce_cmd.add_argument(
        "--bump2",
        help="Second cutoff 'r0,r1'; the max difference between the two reduced forms is reported.")
    reduce_cmd.add_argument(
        "--extent", type=float, default=configs.reduce_extent,
        help="Half-width of the square target grid around the marked point.")

    verify_cmd.add_argument(
        "suite",
        help="Suite name: moments, roundtrip, sphere-null, torus-const, laplace, reproducing, "
             "reduce-consistency, oracle, bilinearity, derham, or all.")
    verify_cmd.add_argument(
        "--seed", type=int, default=configs.seed,
        help="Seed of the randomized suites.")
    verify_cmd.add_argument(
        "--cases", type=int, default=configs.oracle_cases,
        help="Number of random cases in the oracle suite.")
    verify_cmd.add_argument(
        "--tol", type=float,
        help="Overrides every tolerance of the suite.")
    verify_cmd.add_argument(
        "--out",
        help="Write the check table as JSON.")

    # Parse arguments.
    args = parser.parse_args(argv[1:])
    if args.command is None:
        parser.print_usage()
        sys.exit(2)
    return args


def main(args):
    if args.verbose:
        logging.set_verbosity(logging.INFO)
    else:
        logging.set_verbosity(logging.ERROR)

    # Invoke subcommand.
    try:
        config = build_config(args)
        return COMMANDS[config.command](config)
    except ConfigError as e:
        print('Error: %s' % e, file=sys.stderr)
        return 2
    except NumericalError as e:
        print('Numerical failure: %s' % e, file=sys.stderr)
        return 1
    except LoopformError as e:
        print('Error: %s' % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    app.run(main, flags_parser=parse_args)
