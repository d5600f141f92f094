import os

# Defaults table. Every value here can be overridden from the command line.

# coefficient extraction
extract_radius = 0.35  # sampling radius for both rho_z and rho_t; inside the chart disc with margin
extract_samples = 256  # uniform angles per circle; must exceed 2 * max degree + 1
extract_nmax = 16
extract_mmax = 16
coeff_noise_floor = 1e-13  # relative to max |F|; Fourier samples below this are reported as exact zeros

# pairing
quadrature_nodes = 512  # trapezoid nodes per circle
contour_radius = 1.  # common radius of the two circles in the contour oracle
bump = (0.3, 0.6)  # (r0, r1) of the cutoff profile
bump_order = 2  # smoothstep order; 2 gives the C^2 quintic 6x^5 - 15x^4 + 10x^3
annulus_radial_nodes = 32  # Gauss-Legendre nodes across [r0, r1]
annulus_angular_nodes = 64  # trapezoid nodes around the annulus
reduce_targets = 8  # target grid is reduce_targets x reduce_targets
reduce_extent = 0.1  # half-width of the target square around the marked point; must stay below every bump's r0

# green
fd_step = 2e-3  # finite-difference step, Richardson-extrapolated with 2 * fd_step
laplace_step = 1e-4  # five-point stencil step for the Laplacian residual
diagonal_exclusion = 0.25  # grid points closer than this to a singularity are skipped
ewald_cutoff = 36.  # lattice terms are kept while the Gaussian exponent is below this (e^-36 ~ 2e-16)
laplace_grid = 64
reproducing_grid = 128

# verification
seed = 0
oracle_cases = 100
derham_grids = (32, 64, 128)
suite_tolerances = {
    'moments': 1e-12,
    'oracle': 1e-8,
    'sphere-null': 1e-10,
    'sphere-pair': 1e-8,
    'torus-const': 1e-6,
    'torus-offdiag': 1e-8,
    'torus-pair': 1e-5,
    'roundtrip': 1e-10,
    'radius-independence': 1e-9,
    'laplace': 1e-5,
    'laplace-mixed': 1e-8,
    'reproducing': 1e-4,
    'calibration': 1e-6,
    'reduce': 1e-6,
    'bilinearity': 1e-10,
    'derham': 1e-3,
    'derham-bump': 1e-4,
}


def get_num_threads():
    """Parallelism cap from LOOPFORM_THREADS; 0 or unset means one thread per CPU."""
    try:
        num_threads = int(os.environ.get('LOOPFORM_THREADS', '0'))
    except ValueError:
        num_threads = 0
    if num_threads <= 0:
        num_threads = os.cpu_count() or 1
    return num_threads


def get_tolerance(name, override=None):
    if override is not None:
        return float(override)
    return suite_tolerances[name]
