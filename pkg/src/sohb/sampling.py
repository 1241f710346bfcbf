"""Von Mises distributions on SO(3) and on the unit quaternions.

The density on SO(3) centered at a rotation L with noise intensity D is
proportional to exp(mat_dot(A, L) / D). Writing A = L R(n, theta) (axis n,
angle theta), the density of the rotation angle theta of L^T A is

    angle_density(theta, D) = exp((1/D) (1/2 + cos theta)) * sin^2(theta/2)

on [0, pi], with the axis independent and uniform on the sphere. Sampling
is exact-in-law by inverse-CDF lookup on a tabulated angle marginal plus a
Gaussian-normalized uniform axis, which keeps the number of RNG draws per
sample fixed (reproducible counted streams).

The quaternion-side distribution (density proportional to
exp((2/D)((qbar . q)^2 - 1/4))) is sampled by pushing the same (theta, n)
construction through the half-angle map, with an extra fair sign flip so
both preimages of each rotation are produced.
"""

import numpy as np

from .quadrature import adaptive_simpson, gauss_legendre
from .rotations import quat_from_axis_angle, quat_mul, rotation_from_axis_angle

#: Number of inverse-CDF table intervals.
TABLE_SIZE = 4096

#: Below this noise level the angle variable is rescaled by sqrt(D) before
#: quadrature/tabulation to resolve the concentration peak at theta = 0.
SMALL_D = 1e-3


def angle_density(theta, d):
    """Unnormalized density of the rotation angle between sample and center.

    Args:
        theta: angle(s) in [0, pi].
        d: noise intensity D > 0.

    Returns:
        exp((1/D)(1/2 + cos theta)) * sin^2(theta/2). Overflows to inf for
        very small D; internal consumers use a rescaled form, this is the
        reference formula.
    """
    theta = np.asarray(theta, dtype=np.float64)
    return np.exp((0.5 + np.cos(theta)) / d) * np.square(np.sin(0.5 * theta))


def _angle_density_shifted(theta, d):
    """angle_density times exp(-3/(2D)): same shape, overflow-safe.

    The shift is the maximum of the exponent (at theta = 0), so values lie
    in [0, 1]; every internal use is scale-invariant (normalized marginals
    or ratios of integrals).
    """
    theta = np.asarray(theta, dtype=np.float64)
    return np.exp((np.cos(theta) - 1.0) / d) * np.square(np.sin(0.5 * theta))


class AngleTable:
    """Tabulated inverse CDF of the angle marginal for one noise level D.

    The table is immutable after construction and shareable across threads.

    Attributes:
        d: noise intensity.
        theta: grid of TABLE_SIZE + 1 angles, [0, theta_max].
        cdf: normalized cumulative values on the grid (cdf[0] = 0,
            cdf[-1] = 1, nondecreasing).
    """

    def __init__(self, d, size=TABLE_SIZE):
        if d <= 0.0:
            raise ValueError(f"noise intensity must be positive, got {d}")
        self.d = float(d)
        # For very small D the density is concentrated near 0 like
        # exp(-theta^2 / (2 D)); a uniform grid to pi would waste the table.
        if d < SMALL_D:
            theta_max = min(np.pi, 40.0 * np.sqrt(d))
        else:
            theta_max = np.pi
        self.theta = np.linspace(0.0, theta_max, size + 1)
        dens = _angle_density_shifted(self.theta, self.d)
        inc = 0.5 * (dens[1:] + dens[:-1]) * np.diff(self.theta)
        cdf = np.concatenate([[0.0], np.cumsum(inc)])
        self.cdf = cdf / cdf[-1]

    def sample(self, rng, size):
        """Draw angles by linear-interpolated inverse-CDF lookup (one uniform each)."""
        u = rng.random(size)
        return np.interp(u, self.cdf, self.theta)

    def cdf_at(self, theta):
        """CDF evaluated by interpolation (angles past theta_max saturate at 1)."""
        return np.interp(np.asarray(theta, dtype=np.float64), self.theta, self.cdf)

    def mean_angle(self):
        """Mean of the tabulated angle marginal (diagnostic)."""
        dens = _angle_density_shifted(self.theta, self.d)
        num = np.trapz(self.theta * dens, self.theta)
        den = np.trapz(dens, self.theta)
        return num / den


_TABLE_CACHE = {}


def get_angle_table(d):
    """Shared per-D table cache (tables are immutable)."""
    key = float(d)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = AngleTable(key)
    return _TABLE_CACHE[key]


def _uniform_axis(rng, size):
    """Uniform direction on the unit sphere from a normalized 3D Gaussian."""
    v = rng.standard_normal((int(size), 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def draw_angle_axis(d, rng, size, table=None):
    """Draw (theta, axis) pairs of the centered distribution M_{I}.

    Exposed so paired matrix/quaternion samples can be built from the same
    underlying draws. Per sample: one uniform (angle) and three Gaussians
    (axis).
    """
    table = table or get_angle_table(d)
    theta = table.sample(rng, size)
    axis = _uniform_axis(rng, size)
    return theta, axis


def sample_vonmises_rot(center, d, rng, size=None, table=None):
    """Sample rotation(s) from the von Mises distribution centered at ``center``.

    By left invariance the sample is center @ B with B distributed around
    the identity; B is built from an inverse-CDF angle and a uniform axis.

    Args:
        center: center rotation, shape (3, 3).
        d: noise intensity D > 0.
        rng: numpy Generator.
        size: None for a single (3, 3) sample, else the number of samples.
        table: optional pre-built AngleTable for this D.

    Returns:
        Array of shape (3, 3) or (size, 3, 3).
    """
    center = np.asarray(center, dtype=np.float64)
    n = 1 if size is None else int(size)
    theta, axis = draw_angle_axis(d, rng, n, table)
    b = rotation_from_axis_angle(axis, theta)
    out = center @ b
    return out[0] if size is None else out


def sample_vonmises_quat(center, d, rng, size=None, table=None):
    """Sample unit quaternion(s) whose image under Phi is M_{Phi(center)}.

    Uses the same (theta, axis) construction as the matrix sampler composed
    through the half-angle map, plus one fair sign flip per sample so that
    both preimages q and -q of each rotation occur (the law on the
    quaternion sphere is symmetric).

    Args:
        center: unit quaternion, shape (4,).
        d: noise intensity D > 0.
        rng: numpy Generator.
        size: None for a single (4,) sample, else the number of samples.
        table: optional pre-built AngleTable.

    Returns:
        Array of shape (4,) or (size, 4).
    """
    center = np.asarray(center, dtype=np.float64)
    n = 1 if size is None else int(size)
    theta, axis = draw_angle_axis(d, rng, n, table)
    r = quat_from_axis_angle(axis, theta)
    sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    out = quat_mul(center, r) * sign[:, None]
    return out[0] if size is None else out


def sample_uniform_quat(rng, size=None):
    """Haar-uniform unit quaternion(s) (normalized 4D Gaussian)."""
    n = 1 if size is None else int(size)
    v = rng.standard_normal((n, 4))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v[0] if size is None else v


def sample_uniform_rot(rng, size=None):
    """Haar-uniform rotation(s) via the quaternion double cover."""
    from .rotations import quat_to_rot

    return quat_to_rot(sample_uniform_quat(rng, size))


def _angle_moment(g, d, method):
    """Integrals (num, den) of g * weight and weight, weight = m sin^2(theta/2).

    Uses the overflow-safe shifted weight (the shift cancels in every ratio).
    For D < SMALL_D the substitution theta = sqrt(D) phi tames the peak.
    """
    if d < SMALL_D:
        s = np.sqrt(d)
        hi = min(np.pi / s, 40.0)

        def num(phi):
            return g(s * phi) * _angle_density_shifted(s * phi, d)

        def den(phi):
            return _angle_density_shifted(s * phi, d)

        a, b = 0.0, hi
    else:
        def num(theta):
            return g(theta) * _angle_density_shifted(theta, d)

        def den(theta):
            return _angle_density_shifted(theta, d)

        a, b = 0.0, np.pi

    if method == "simpson":
        return (
            adaptive_simpson(num, a, b, rel_tol=1e-11),
            adaptive_simpson(den, a, b, rel_tol=1e-11),
        )
    if method == "gauss":
        return gauss_legendre(num, a, b), gauss_legendre(den, a, b)
    raise ValueError(f"unknown quadrature method: {method!r}")


def c1(d, method="simpson"):
    """Consistency constant c1(D) = (2/3) <1/2 + cos theta> in (0, 1).

    The average is over the angle marginal weight m(theta) sin^2(theta/2).
    c1 -> 1 as D -> 0 (perfect alignment) and -> 0 as D -> infinity
    (the weight tends to plain sin^2(theta/2), against which
    1/2 + cos theta integrates to zero).

    Args:
        d: noise intensity D > 0.
        method: "simpson" (adaptive) or "gauss" (fixed Gauss-Legendre).
    """
    if d <= 0.0:
        raise ValueError(f"noise intensity must be positive, got {d}")
    num, den = _angle_moment(lambda t: 0.5 + np.cos(t), d, method)
    return (2.0 / 3.0) * num / den
