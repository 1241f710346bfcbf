"""Generalized collision invariant pipeline and the macroscopic constants.

The pipeline has three stages:

1. ``solve_h``: the radial profile h of the gradual-model invariant solves a
   second-order ODE on (-1, 1) that degenerates at both endpoints; the
   bounded solution is unique and odd, and is computed here by least-squares
   collocation on an odd Chebyshev basis. In divided (polynomial-coefficient)
   form the equation reads

       (1 - r^2) h'' + (-5 r + (4 r / d)(1 - r^2)) h' - (3 + 4 r^2 / d) h = r,

   which is the weighted form

       d/dr[(1-r^2)^{5/2} e^{2r^2/d} h'] + (1-r^2)^{3/2} e^{2r^2/d} (-4r^2/d - 3) h
           = r (1-r^2)^{3/2} e^{2r^2/d}

   divided by (1-r^2)^{3/2} e^{2r^2/d}. Residuals are reported in the
   weighted form. The jump model needs no solve: its profile is hbar(r) = r.

2. ``constants``: the hydrodynamic coefficients are angle averages against
   the weight w(theta) = m(theta) sin^4(theta/2) hbar(cos(theta/2))
   cos(theta/2), with m(theta) = exp((1/2 + cos theta)/D):

       c1 = (2/3) <1/2 + cos theta>   (weight m sin^2(theta/2)),
       c2 = (1/5) <2 + 3 cos theta>_w,
       c2' = (1/5) <1 + 4 cos theta>_w,
       c3 = D / 2 (exact),
       c4 = (1/5) <1 - cos theta>_w.

   The identity c2 - c2' = c4 holds for any profile by linearity and ties
   the matrix and quaternion macroscopic systems together.

3. ``verify_adjoint_jump``: for the jump model the adjoint of the collision
   operator is psi -> integral(psi M) - psi, so psi(A) = P . (L0^T A) solves
   the invariant equation iff integral(psi M_{L0}) = 0; the residual of that
   integral is evaluated by generic quadrature over the angle/axis class
   decomposition.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import DomainError, NoConvergence
from .quadrature import adaptive_simpson, gauss_legendre
from .rotations import hat, mat_dot, rotation_from_axis_angle
from .sampling import SMALL_D, _angle_density_shifted, c1 as sampling_c1

GRADUAL = "gradual"
JUMP = "jump"

#: Mode-count ladder for the spectral solve.
LADDER = (16, 24, 32, 48, 64, 96, 128, 192)

#: Interior residual tolerance for the h solve (weighted form, max norm).
H_TOL = 1e-6


@dataclass(frozen=True)
class GciProfile:
    """Radial invariant profile hbar for one model and noise level.

    Attributes:
        model: "gradual" or "jump".
        d: noise intensity.
        coeffs: full Chebyshev coefficient vector of h (gradual; None for jump).
        residual: max weighted-form ODE residual on the check grid (gradual;
            0.0 for the jump profile, which is exact).
    """

    model: str
    d: float
    coeffs: np.ndarray | None
    residual: float

    def hbar(self, r):
        """Profile value: the ODE solution h (gradual) or r itself (jump)."""
        r = np.asarray(r, dtype=np.float64)
        if self.model == JUMP:
            return r.copy()
        return cheb.chebval(r, self.coeffs)

    def hbar_over_r(self, r):
        """hbar(r)/r with the removable singularity at r = 0 filled by h'(0)."""
        r = np.asarray(r, dtype=np.float64)
        if self.model == JUMP:
            return np.ones_like(r)
        small = np.abs(r) < 1e-9
        safe = np.where(small, 1.0, r)
        out = cheb.chebval(r, self.coeffs) / safe
        if np.any(small):
            dh0 = cheb.chebval(0.0, cheb.chebder(self.coeffs))
            out = np.where(small, dh0, out)
        return out


def _ode_rows(r, d, n_modes):
    """Collocation rows of the divided-form operator on the odd basis.

    Returns the design matrix L[T_{2k+1}](r) for k < n_modes and the
    right-hand side r.
    """
    r = np.asarray(r, dtype=np.float64)
    a = 1.0 - r * r
    beta = -5.0 * r + (4.0 * r / d) * a
    gamma = -(3.0 + 4.0 * r * r / d)
    cols = []
    for k in range(n_modes):
        e = np.zeros(2 * k + 2)
        e[-1] = 1.0
        phi = cheb.chebval(r, e)
        dphi = cheb.chebval(r, cheb.chebder(e))
        ddphi = cheb.chebval(r, cheb.chebder(e, 2))
        cols.append(a * ddphi + beta * dphi + gamma * phi)
    return np.stack(cols, axis=-1), r


def _weighted_residual(profile_coeffs, d, r):
    """Original (weighted-form) ODE residual |LHS - RHS| at the points r."""
    a = 1.0 - r * r
    h = cheb.chebval(r, profile_coeffs)
    dh = cheb.chebval(r, cheb.chebder(profile_coeffs))
    ddh = cheb.chebval(r, cheb.chebder(profile_coeffs, 2))
    divided = a * ddh + (-5.0 * r + (4.0 * r / d) * a) * dh - (3.0 + 4.0 * r * r / d) * h
    weight = np.power(a, 1.5) * np.exp(2.0 * r * r / d)
    return np.abs(weight * (divided - r))


def _check_grid(n=2048, margin=1e-4):
    """Chebyshev-distributed check points on [-1 + margin, 1 - margin]."""
    nodes = np.cos(np.pi * np.arange(n) / (n - 1))
    return nodes * (1.0 - margin)


def solve_h(d, tol=H_TOL, ladder=LADDER):
    """Solve the radial ODE for the gradual-model profile h.

    Strategy: collocate the divided form at Chebyshev-Lobatto points on
    [0, 1] (oddness makes the negative half redundant; the endpoint row,
    where the leading coefficient vanishes, supplies the natural boundary
    condition) over the odd basis T_1, T_3, ..., solve in the least-squares
    sense, and accept once the weighted-form residual on a 2048-point check
    grid is below tolerance, walking a mode ladder otherwise.

    Args:
        d: noise intensity D > 0 (the equation parameter).
        tol: residual tolerance (max norm, weighted form).
        ladder: increasing mode counts to try.

    Returns:
        GciProfile for the gradual model.

    Raises:
        NoConvergence: if the largest ladder entry still misses ``tol``.
    """
    if d <= 0.0:
        raise ValueError(f"noise intensity must be positive, got {d}")
    check = _check_grid()
    # Walk the ladder until the residual is comfortably converged (well past
    # tol), not merely under it — spectral accuracy is cheap here and a wide
    # margin keeps downstream constants insensitive to the mode count.
    early = min(tol * 1e-3, 1e-9)
    best = None
    for n_modes in ladder:
        npts = 2 * n_modes + 8
        # Lobatto points on [0, 1]: endpoint r = 1 carries the natural BC.
        pts = 0.5 * (1.0 + np.cos(np.pi * np.arange(npts) / (npts - 1)))
        design, rhs = _ode_rows(pts, d, n_modes)
        sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        coeffs = np.zeros(2 * n_modes)
        coeffs[1::2] = sol
        res = float(np.max(_weighted_residual(coeffs, d, check)))
        if best is None or res < best[1]:
            best = (coeffs, res)
        if res <= early:
            break
    coeffs, res = best
    if res > tol:
        raise NoConvergence(
            f"h solve residual {res:.3e} > {tol:.1e} after ladder {ladder}"
        )
    return GciProfile(model=GRADUAL, d=float(d), coeffs=coeffs, residual=res)


def jump_profile(d):
    """The exact jump-model profile hbar(r) = r."""
    return GciProfile(model=JUMP, d=float(d), coeffs=None, residual=0.0)


def get_profile(d, model):
    if model == GRADUAL:
        return solve_h(d)
    if model == JUMP:
        return jump_profile(d)
    raise ValueError(f"unknown model: {model!r}")


def kbar(s, profile):
    """The invariant weight kbar(s) = hbar(r)/r at r = sqrt(2s + 1)/2.

    Designed so that kbar(1/2 + cos theta) = hbar(cos(theta/2))/cos(theta/2).
    Identically 1 for the jump model; negative on the interior for the
    gradual model. The endpoint s = 3/2 (theta = 0) is the limit value.

    Args:
        s: scalar or array in (-1/2, 3/2] (endpoints by continuous limit).
        profile: GciProfile.

    Raises:
        DomainError: outside [-1/2, 3/2].
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < -0.5 - 1e-12) or np.any(s > 1.5 + 1e-12):
        raise DomainError(f"kbar argument outside [-1/2, 3/2]: {s}")
    r = 0.5 * np.sqrt(np.clip(2.0 * s + 1.0, 0.0, None))
    out = profile.hbar_over_r(r)
    return float(out) if np.isscalar(s) or s.ndim == 0 else out


@dataclass(frozen=True)
class GciConstants:
    """The coefficient tuple of the macroscopic systems for one (D, model)."""

    c1: float
    c2: float
    c2_prime: float
    c3: float
    c4: float
    d: float
    model: str

    def csv_row(self):
        return (
            f"{self.d!r},{self.model},{self.c1!r},{self.c2!r},"
            f"{self.c2_prime!r},{self.c3!r},{self.c4!r}"
        )


def _profile_moment(g, d, profile, method):
    """(num, den): integrals of g*w and w with the invariant-profile weight.

    w(theta) = m(theta) sin^4(theta/2) hbar(cos(theta/2)) cos(theta/2), with
    the overflow-safe shifted m (the shift cancels in the ratio). For tiny D
    the angle is rescaled by sqrt(D).
    """

    def w(theta):
        half = 0.5 * theta
        return (
            _angle_density_shifted(theta, d)
            * np.square(np.sin(half))
            * profile.hbar(np.cos(half))
            * np.cos(half)
        )

    if d < SMALL_D:
        s = np.sqrt(d)
        hi = min(np.pi / s, 40.0)
        num = lambda phi: g(s * phi) * w(s * phi)  # noqa: E731
        den = lambda phi: w(s * phi)  # noqa: E731
        a, b = 0.0, hi
    else:
        num = lambda theta: g(theta) * w(theta)  # noqa: E731
        den = w
        a, b = 0.0, np.pi
    if method == "simpson":
        return (
            adaptive_simpson(num, a, b, rel_tol=1e-11),
            adaptive_simpson(den, a, b, rel_tol=1e-11),
        )
    if method == "gauss":
        return gauss_legendre(num, a, b), gauss_legendre(den, a, b)
    raise ValueError(f"unknown quadrature method: {method!r}")


def constants(d, model, method="simpson", profile=None):
    """Hydrodynamic constants (c1, c2, c2', c3, c4) for one noise level and model.

    Args:
        d: noise intensity D > 0.
        model: "gradual" or "jump".
        method: quadrature route, "simpson" or "gauss" (dual routes exist so
            they can be cross-checked).
        profile: optional pre-solved GciProfile (saves the ODE solve).
    """
    profile = profile or get_profile(d, model)
    if profile.model != model or profile.d != float(d):
        raise ValueError("profile does not match the requested (d, model)")
    c2_num, den = _profile_moment(lambda t: 2.0 + 3.0 * np.cos(t), d, profile, method)
    c2p_num, _ = _profile_moment(lambda t: 1.0 + 4.0 * np.cos(t), d, profile, method)
    c4_num, _ = _profile_moment(lambda t: 1.0 - np.cos(t), d, profile, method)
    return GciConstants(
        c1=sampling_c1(d, method),
        c2=0.2 * c2_num / den,
        c2_prime=0.2 * c2p_num / den,
        c3=0.5 * d,
        c4=0.2 * c4_num / den,
        d=float(d),
        model=model,
    )


def vonmises_class_average(fn, center, d, n_theta=64, n_mu=16, n_phi=32):
    """Integral of fn(A) against the von Mises law at ``center`` by quadrature.

    Decomposes A = center @ R(axis, theta): Gauss-Legendre nodes in theta
    weighted by the normalized angle marginal, and a product sphere rule
    (Gauss-Legendre in cos(polar), trapezoid in azimuth) for the axis.

    Args:
        fn: vectorized map from rotation stacks (..., 3, 3) to scalars (...,).
        center: rotation (3, 3).
        d: noise intensity.

    Returns:
        The quadrature value of integral fn dM.
    """
    center = np.asarray(center, dtype=np.float64)
    t_nodes, t_weights = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (t_nodes + 1.0)
    w_theta = 0.5 * np.pi * t_weights * _angle_density_shifted(theta, d)
    w_theta /= np.sum(w_theta)
    mu, w_mu = np.polynomial.legendre.leggauss(n_mu)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    sin_pol = np.sqrt(1.0 - mu * mu)
    axis = np.stack(
        [
            sin_pol[:, None] * np.cos(phi)[None, :],
            sin_pol[:, None] * np.sin(phi)[None, :],
            np.broadcast_to(mu[:, None], (n_mu, n_phi)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    w_axis = np.repeat(w_mu / (2.0 * n_phi), n_phi)  # normalized sphere rule
    total = 0.0
    for t, wt in zip(theta, w_theta):
        rots = center @ rotation_from_axis_angle(axis, np.full(axis.shape[0], t))
        total += wt * float(np.sum(w_axis * fn(rots)))
    return total


def verify_adjoint_jump(center, p_axial, d, **quad_sizes):
    """Residual of the jump-model invariant equation for psi(A) = P . (L0^T A).

    For the jump mechanism the adjoint acts as psi -> integral(psi M) - psi,
    so psi solves the invariant equation (with the opposite antisymmetric
    matrix) exactly when integral(psi M_{L0}) vanishes. This evaluates that
    integral by the generic class-decomposition quadrature and returns its
    absolute value.

    Args:
        center: the center rotation L0, shape (3, 3).
        p_axial: axial vector of the antisymmetric matrix P, shape (3,).
        d: noise intensity.

    Returns:
        |integral psi dM_{L0}| (should be ~1e-16; anything <= 1e-8 verifies
        the invariant equation at quadrature accuracy).
    """
    center = np.asarray(center, dtype=np.float64)
    p = hat(np.asarray(p_axial, dtype=np.float64))

    def psi(rots):
        return mat_dot(p, center.T @ rots)

    return abs(vonmises_class_average(psi, center, d, **quad_sizes))
