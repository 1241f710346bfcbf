"""Neighbor interaction: observation kernel, periodic cell grid, target orientations.

A particle's target orientation is computed from the kernel-weighted average
of its neighbors' orientations (itself included):

* matrix route:  Jbar_n = (1/N) sum_m K(X_m - X_n) A_m, target = polar rotation;
* quaternion route: Qbar_n = (1/N) sum_m K(X_m - X_n) (q_m (x) q_m - I4/4),
  target = leading unit eigenvector.

Both routes agree through the double cover whenever neither is degenerate.
The cell grid makes the neighbor query O(N) at fixed density; distances are
always minimum-image in the periodic box.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BoxTooSmall, DegenerateAverage
from .rotations import (
    DELTA_DET,
    DELTA_GAP,
    max_eigvec,
    max_eigvec_or_mask,
    polar_rotation,
    polar_rotation_or_mask,
    qtensor,
)


@dataclass(frozen=True)
class KernelConfig:
    """Radially symmetric observation kernel, normalized to unit mass in R^3.

    Attributes:
        radius: interaction radius R > 0; influence is exactly zero beyond it.
        shape: "indicator" (constant inside the ball) or "smooth-bump"
            (C-infinity bump exp(-1 / (1 - (r/R)^2)) inside the ball).
    """

    radius: float
    shape: str = "indicator"
    _bump_norm: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"kernel radius must be positive, got {self.radius}")
        if self.shape not in ("indicator", "smooth-bump"):
            raise ValueError(f"unknown kernel shape: {self.shape!r}")
        if self.shape == "smooth-bump":
            # Normalize numerically: integral of the bump over the ball.
            s = np.linspace(0.0, 1.0, 4097)[:-1]
            prof = np.exp(-1.0 / (1.0 - s * s))
            mass = 4.0 * np.pi * self.radius**3 * np.trapz(prof * s * s, s)
            object.__setattr__(self, "_bump_norm", 1.0 / mass)

    def weight(self, r):
        """Kernel value at distance(s) ``r`` (zero at and beyond the radius)."""
        r = np.asarray(r, dtype=np.float64)
        inside = r < self.radius
        if self.shape == "indicator":
            w = 3.0 / (4.0 * np.pi * self.radius**3)
            return np.where(inside, w, 0.0)
        s2 = np.square(np.where(inside, r / self.radius, 0.0))
        with np.errstate(divide="ignore"):
            prof = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - s2, 1.0)), 0.0)
        return self._bump_norm * prof


@dataclass(frozen=True)
class CellGrid:
    """Frozen cell-list decomposition of a periodic box.

    Attributes:
        box: periodic box edge lengths, shape (3,).
        ncells: cells per axis, shape (3,) (each cell at least R wide).
        cell_of: flat cell id per particle, shape (N,).
        order: particle indices sorted by cell id, shape (N,).
        starts: CSR offsets into ``order`` per flat cell id, shape (prod+1,).
        positions: wrapped particle positions the grid was built from.
    """

    box: np.ndarray
    ncells: np.ndarray
    cell_of: np.ndarray
    order: np.ndarray
    starts: np.ndarray
    positions: np.ndarray


def wrap_positions(x, box):
    """Map positions into [0, box) per axis."""
    x = np.asarray(x, dtype=np.float64)
    box = np.asarray(box, dtype=np.float64)
    return np.mod(x, box)


def minimum_image(d, box):
    """Shift separation vectors to their nearest periodic image."""
    return d - box * np.rint(d / box)


def build_grid(positions, box, radius):
    """Build the cell grid for neighbor queries of the given radius.

    Args:
        positions: particle positions, shape (N, 3) (wrapped internally).
        box: periodic box edge lengths (scalar or length-3).
        radius: interaction radius R.

    Raises:
        BoxTooSmall: if any box edge is shorter than 2R (a 27-cell stencil
            could then miss or double-count neighbors).
    """
    box = np.broadcast_to(np.asarray(box, dtype=np.float64), (3,)).copy()
    if np.any(box < 2.0 * radius):
        raise BoxTooSmall(
            f"box {box.tolist()} has an edge below 2R = {2.0 * radius}"
        )
    x = wrap_positions(positions, box)
    ncells = np.maximum(np.floor(box / radius).astype(np.int64), 1)
    coords = np.minimum((x / (box / ncells)).astype(np.int64), ncells - 1)
    flat = (coords[:, 0] * ncells[1] + coords[:, 1]) * ncells[2] + coords[:, 2]
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=int(np.prod(ncells)))
    starts = np.concatenate([[0], np.cumsum(counts)])
    return CellGrid(
        box=box,
        ncells=ncells,
        cell_of=flat,
        order=order,
        starts=starts,
        positions=x,
    )


def _stencil_offsets(ncells):
    """Unique neighbor-cell offsets, collapsing aliases on tiny grids.

    For ncells >= 3 per axis this is the usual 27-cell stencil; with 1 or 2
    cells on an axis the offsets -1 and +1 alias the same cell and must be
    visited once only.
    """
    per_axis = []
    for n in ncells:
        per_axis.append(np.unique(np.array([-1, 0, 1]) % n))
    grids = np.meshgrid(*per_axis, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def neighbor_pairs(grid, radius):
    """All ordered pairs (i, j) within ``radius``, including the self pair (i, i).

    Returns:
        (i, j, dist): index arrays and minimum-image distances, one entry
        per ordered pair with dist <= radius. Every pair appears exactly
        once regardless of grid size.
    """
    x = grid.positions
    n = x.shape[0]
    ncells = grid.ncells
    coords = np.stack(
        [
            grid.cell_of // (ncells[1] * ncells[2]),
            (grid.cell_of // ncells[2]) % ncells[1],
            grid.cell_of % ncells[2],
        ],
        axis=-1,
    )
    counts_per_cell = np.diff(grid.starts)
    # One vectorized pass over the whole (particle, stencil-offset) product:
    # gather candidate js cell by cell through the CSR layout, then a single
    # minimum-image distance filter.
    offsets = _stencil_offsets(ncells)
    ncoords = (coords[:, None, :] + offsets[None, :, :]) % ncells
    nid = (ncoords[..., 0] * ncells[1] + ncoords[..., 1]) * ncells[2] + ncoords[..., 2]
    nid = nid.ravel()
    cnt = counts_per_cell[nid]
    total = int(cnt.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)
    cum = np.concatenate([[0], np.cumsum(cnt)])
    within = np.arange(total) - np.repeat(cum[:-1], cnt)
    j = grid.order[np.repeat(grid.starts[nid], cnt) + within]
    i = np.repeat(np.repeat(np.arange(n), offsets.shape[0]), cnt)
    sep = minimum_image(x[i] - x[j], grid.box)
    sq = np.einsum("ij,ij->i", sep, sep)
    keep = sq <= radius * radius
    return i[keep], j[keep], np.sqrt(sq[keep])


def _weighted_sums(grid, kernel, values):
    """Kernel-weighted neighbor sums (1/N) sum_j K(d_ij) values[j] for all i.

    Accumulation runs per tensor component through bincount, which is much
    faster than scattered in-place adds for the pair counts seen here.
    """
    n = values.shape[0]
    i, j, dist = neighbor_pairs(grid, kernel.radius)
    w = kernel.weight(dist) / n
    flat = values.reshape(n, -1)
    gathered = w[:, None] * flat[j]
    out = np.empty((n, flat.shape[1]), dtype=np.float64)
    for k in range(flat.shape[1]):
        out[:, k] = np.bincount(i, weights=gathered[:, k], minlength=n)
    return out.reshape(values.shape)


def average_rotation_matrix(grid, kernel, rotations):
    """Jbar for every particle: kernel-weighted mean orientation matrices."""
    return _weighted_sums(grid, kernel, np.asarray(rotations, dtype=np.float64))


def average_qtensor(grid, kernel, quats):
    """Qbar for every particle: kernel-weighted mean Q-tensors."""
    return _weighted_sums(grid, kernel, qtensor(np.asarray(quats, dtype=np.float64)))


def target_rotation(n, positions, box, rotations, kernel, det_floor=DELTA_DET):
    """Target orientation of particle ``n`` via the polar-rotation route.

    Direct O(N) evaluation against every particle — no cell grid involved —
    so it doubles as the reference for the batched variant.

    Raises:
        DegenerateAverage: when det(Jbar_n) <= det_floor; the caller decides
            the fallback policy.
    """
    x = np.asarray(positions, dtype=np.float64)
    sep = minimum_image(x - x[n], box)
    dist = np.linalg.norm(sep, axis=-1)
    w = kernel.weight(dist) / x.shape[0]
    jbar = np.einsum("m,mab->ab", w, np.asarray(rotations, dtype=np.float64))
    return polar_rotation(jbar, det_floor)


def target_quaternion(n, positions, box, quats, kernel, gap_floor=DELTA_GAP):
    """Target orientation of particle ``n`` via the leading-eigenvector route.

    Direct O(N) evaluation; reference for the batched variant.

    Raises:
        DegenerateAverage: when the top eigenvalue gap of Qbar_n is
            <= gap_floor.
    """
    x = np.asarray(positions, dtype=np.float64)
    sep = minimum_image(x - x[n], box)
    dist = np.linalg.norm(sep, axis=-1)
    w = kernel.weight(dist) / x.shape[0]
    qbar = np.einsum("m,mab->ab", w, qtensor(np.asarray(quats, dtype=np.float64)))
    return max_eigvec(qbar, gap_floor)


def target_rotations_all(grid, kernel, rotations, det_floor=DELTA_DET):
    """Targets for every particle at once (matrix route).

    Returns:
        (targets, ok): rotation array (N, 3, 3) and a mask; where ``ok`` is
        False the average was degenerate and ``targets`` holds a placeholder
        the caller must replace per its fallback policy.
    """
    jbar = average_rotation_matrix(grid, kernel, rotations)
    return polar_rotation_or_mask(jbar, det_floor)


def target_quaternions_all(grid, kernel, quats, gap_floor=DELTA_GAP):
    """Targets for every particle at once (quaternion route); see above."""
    qbar = average_qtensor(grid, kernel, quats)
    return max_eigvec_or_mask(qbar, gap_floor)
