"""Microscopic particle dynamics in both orientation representations.

Two mechanisms drive alignment toward the neighborhood target orientation:

* gradual: a stochastic flow integrated with synchronous Euler tangent steps
  — the increment is projected onto the tangent space at the current
  orientation and the result is retracted back onto the manifold (polar
  factor for matrices, normalization for quaternions). Matrix noise enters
  as 2 sqrt(D) dB per entry and quaternion noise as sqrt(D/2) dB; the factor
  asymmetry is intrinsic to the two representations (the double cover halves
  angular increments) and must not be altered.
* jump: a piecewise deterministic process — each particle carries an
  exponential(1) clock; between events all positions move ballistically at
  unit speed along the body's first axis while orientations stay frozen; at
  an event the particle redraws its orientation from the von Mises
  distribution centered at its current neighborhood target.

Degenerate neighborhood averages (no well-defined target) fall back to the
particle's current orientation and are counted in the state, never fatal.
"""

import heapq
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import (
    KernelConfig,
    build_grid,
    target_quaternion,
    target_quaternions_all,
    target_rotation,
    target_rotations_all,
    wrap_positions,
)
from .errors import DegenerateAverage
from .rotations import (
    project_tangent,
    quat_e1,
    quat_normalize,
    quat_to_rot,
    retract,
    rot_to_quat,
)
from .sampling import (
    get_angle_table,
    sample_uniform_quat,
    sample_uniform_rot,
    sample_vonmises_quat,
    sample_vonmises_rot,
)

MATRIX = "matrix"
QUATERNION = "quaternion"
GRADUAL = "gradual"
JUMP = "jump"


@dataclass
class SimParams:
    """Parameters of one particle run.

    Attributes:
        n_particles: number of particles N >= 1.
        d: noise intensity D > 0.
        box: periodic box edge lengths (scalar broadcast to 3 axes).
        radius: interaction radius of the observation kernel.
        kernel: kernel shape, "indicator" or "smooth-bump".
        dt: time step (gradual model only).
        model: "gradual" or "jump".
        representation: "matrix" or "quaternion".
        seed: master RNG seed recorded with runs.
    """

    n_particles: int = 128
    d: float = 1.0
    box: float = 10.0
    radius: float = 1.0
    kernel: str = "indicator"
    dt: float = 2e-3
    model: str = GRADUAL
    representation: str = MATRIX
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.d <= 0.0:
            raise ValueError("noise intensity d must be positive")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.model not in (GRADUAL, JUMP):
            raise ValueError(f"unknown model: {self.model!r}")
        if self.representation not in (MATRIX, QUATERNION):
            raise ValueError(f"unknown representation: {self.representation!r}")

    def kernel_config(self):
        return KernelConfig(radius=self.radius, shape=self.kernel)

    def box_array(self):
        return np.broadcast_to(np.asarray(self.box, dtype=np.float64), (3,)).copy()


@dataclass
class ParticleState:
    """Positions and orientations of N particles at one instant.

    Attributes:
        t: current time.
        x: positions, shape (N, 3), wrapped into the box.
        orient: (N, 3, 3) rotations or (N, 4) unit quaternions, per ``kind``.
        kind: "matrix" or "quaternion".
        next_jump: next event time per particle (jump model only).
        degenerate_count: number of degenerate-target fallbacks so far.
    """

    t: float
    x: np.ndarray
    orient: np.ndarray
    kind: str
    next_jump: np.ndarray | None = None
    degenerate_count: int = 0

    @property
    def n(self):
        return self.x.shape[0]

    def headings(self):
        """Unit direction of motion per particle (the body's first axis)."""
        if self.kind == MATRIX:
            return self.orient[:, :, 0]
        return quat_e1(self.orient)


def initial_state(params, rng, align_center=None, align_d=None):
    """Random initial condition: uniform positions, Haar or von Mises orientations.

    Args:
        params: SimParams.
        rng: numpy Generator.
        align_center: optional (3, 3) rotation; if given, orientations are
            sampled from the von Mises distribution around it with noise
            ``align_d`` instead of uniformly.
        align_d: concentration noise for the aligned initial condition.
    """
    n = params.n_particles
    box = params.box_array()
    x = rng.random((n, 3)) * box
    if align_center is not None:
        if params.representation == MATRIX:
            orient = sample_vonmises_rot(align_center, align_d, rng, size=n)
        else:
            qc = rot_to_quat(align_center)
            orient = sample_vonmises_quat(qc, align_d, rng, size=n)
    else:
        if params.representation == MATRIX:
            orient = sample_uniform_rot(rng, size=n)
        else:
            orient = sample_uniform_quat(rng, size=n)
    state = ParticleState(t=0.0, x=x, orient=orient, kind=params.representation)
    if params.model == JUMP:
        state.next_jump = rng.exponential(1.0, size=n)
    return state


def _targets(state, params):
    """Neighborhood targets for all particles with the fallback policy applied.

    Returns:
        (targets, n_degenerate): target orientations per particle; entries
        whose average was degenerate keep the particle's current orientation.
    """
    grid = build_grid(state.x, params.box_array(), params.radius)
    kernel = params.kernel_config()
    if state.kind == MATRIX:
        tgt, ok = target_rotations_all(grid, kernel, state.orient)
    else:
        tgt, ok = target_quaternions_all(grid, kernel, state.orient)
    if not np.all(ok):
        tgt = np.where(ok[:, None, None] if tgt.ndim == 3 else ok[:, None],
                       tgt, state.orient)
    return tgt, int(np.sum(~ok))


def step_gradual_matrix(state, params, rng):
    """One synchronous Euler-retract step of the matrix-valued flow.

    Order of operations: freeze the configuration and compute every target;
    form the tangent increment P_T(Abar dt + 2 sqrt(D) dB) with dB a 3x3
    matrix of N(0, dt) entries; retract to the polar factor; advance
    positions along the new first axis.
    """
    dt = params.dt
    a = state.orient
    abar, fallbacks = _targets(state, params)
    db = rng.standard_normal((state.n, 3, 3)) * np.sqrt(dt)
    incr = abar * dt + 2.0 * np.sqrt(params.d) * db
    a_new = retract(a + project_tangent(a, incr))
    x_new = wrap_positions(state.x + dt * a_new[:, :, 0], params.box_array())
    return replace(
        state,
        t=state.t + dt,
        x=x_new,
        orient=a_new,
        degenerate_count=state.degenerate_count + fallbacks,
    )


def step_gradual_quat(state, params, rng):
    """One synchronous Euler-renormalize step of the quaternion-valued flow.

    The drift (qbar (x) qbar - I4/4) q equals (qbar . q) qbar - q/4; the
    increment is projected onto the orthogonal complement of q and the sum
    is renormalized.
    """
    dt = params.dt
    q = state.orient
    qbar, fallbacks = _targets(state, params)
    dots = np.sum(qbar * q, axis=-1, keepdims=True)
    drift = dots * qbar - 0.25 * q
    db = rng.standard_normal((state.n, 4)) * np.sqrt(dt)
    incr = drift * dt + np.sqrt(0.5 * params.d) * db
    incr -= np.sum(incr * q, axis=-1, keepdims=True) * q
    q_new = quat_normalize(q + incr)
    x_new = wrap_positions(state.x + dt * quat_e1(q_new), params.box_array())
    return replace(
        state,
        t=state.t + dt,
        x=x_new,
        orient=q_new,
        degenerate_count=state.degenerate_count + fallbacks,
    )


def step_gradual(state, params, rng):
    if state.kind == MATRIX:
        return step_gradual_matrix(state, params, rng)
    return step_gradual_quat(state, params, rng)


def run_gradual(state, params, rng, t_end, on_frame=None, save_every=1):
    """Advance the gradual model to t_end with fixed steps.

    Args:
        on_frame: optional callback(state) invoked on the initial state and
            then after every ``save_every``-th step (and on the final step).
    """
    nsteps = int(round((t_end - state.t) / params.dt))
    if on_frame is not None:
        on_frame(state)
    for k in range(nsteps):
        state = step_gradual(state, params, rng)
        if on_frame is not None and ((k + 1) % save_every == 0 or k == nsteps - 1):
            on_frame(state)
    return state


def run_jump(state, params, rng, t_end, on_event=None):
    """Event-driven loop of the jump process until t_end.

    Maintains a binary min-heap of per-particle next-jump times (ties broken
    by particle index). At each event every position is transported
    ballistically to the event time, the jumping particle's target is
    computed from the transported configuration, its orientation is redrawn
    from the von Mises distribution centered at that target, and a fresh
    exponential(1) clock is armed.

    Returns:
        (state, events): final state at t_end and the full event log as a
        list of (time, particle_index) tuples.
    """
    if state.next_jump is None:
        state = replace(state, next_jump=state.t + rng.exponential(1.0, size=state.n))
    x = state.x.copy()
    orient = state.orient.copy()
    next_jump = state.next_jump.copy()
    t = state.t
    fallbacks = state.degenerate_count
    box = params.box_array()
    kernel = params.kernel_config()
    table = get_angle_table(params.d)
    heap = [(float(next_jump[i]), i) for i in range(state.n)]
    heapq.heapify(heap)
    events = []
    is_matrix = state.kind == MATRIX

    while heap and heap[0][0] <= t_end:
        t_ev, n = heapq.heappop(heap)
        if t_ev != next_jump[n]:
            continue  # stale entry
        # Ballistic transport of every particle to the event time.
        head = orient[:, :, 0] if is_matrix else quat_e1(orient)
        x = wrap_positions(x + (t_ev - t) * head, box)
        t = t_ev
        # Only the jumping particle needs a target: the direct O(N) route is
        # cheaper per event than a cell-grid pass over all particles.
        try:
            if is_matrix:
                center = target_rotation(n, x, box, orient, kernel)
            else:
                center = target_quaternion(n, x, box, orient, kernel)
        except DegenerateAverage:
            center = orient[n]
            fallbacks += 1
        if is_matrix:
            orient[n] = sample_vonmises_rot(center, params.d, rng, table=table)
        else:
            orient[n] = sample_vonmises_quat(center, params.d, rng, table=table)
        events.append((t, n))
        if on_event is not None:
            on_event(t, n, orient[n])
        next_jump[n] = t + rng.exponential(1.0)
        heapq.heappush(heap, (float(next_jump[n]), n))

    head = orient[:, :, 0] if is_matrix else quat_e1(orient)
    x = wrap_positions(x + (t_end - t) * head, box)
    return (
        replace(
            state,
            t=t_end,
            x=x,
            orient=orient,
            next_jump=next_jump,
            degenerate_count=fallbacks,
        ),
        events,
    )


def run_single_in_field(
    model,
    representation,
    field,
    d,
    rng,
    t_end=None,
    dt=None,
    replicas=1,
    init="center",
    n_jumps=None,
):
    """Single particle relaxing toward a constant prescribed orientation field.

    The stationary orientation law is the von Mises distribution centered at
    the field for both mechanisms — exactly for the jump process, and in the
    dt -> 0 limit for the gradual flow. This is the law-validation harness.

    Args:
        model: "gradual" or "jump".
        representation: "matrix" or "quaternion".
        field: the prescribed rotation (3, 3); quaternion runs lift it.
        d: noise intensity.
        rng: numpy Generator.
        t_end: horizon (gradual; also jump when n_jumps is None).
        dt: step (gradual only).
        replicas: number of independent copies integrated in parallel
            (gradual only); replica r uses the r-th row of each batched draw.
        init: "center" (start at the field) or "stationary" (start from an
            exact sample of the stationary law).
        n_jumps: jump model: stop after exactly this many events instead of
            at t_end.

    Returns:
        Gradual: array of final orientations, shape (replicas, 3, 3) or
        (replicas, 4). Jump: (times, orients) — event times and post-jump
        orientations, shapes (M,) and (M, 3, 3) / (M, 4).
    """
    field = np.asarray(field, dtype=np.float64)
    if model == JUMP:
        if n_jumps is None:
            # Draw clocks in growing chunks until the horizon is passed.
            gaps = [rng.exponential(1.0, size=max(16, int(2 * t_end) + 8))]
            while np.sum(np.concatenate(gaps)) <= t_end:
                gaps.append(rng.exponential(1.0, size=len(gaps[-1]) * 2))
            times = np.cumsum(np.concatenate(gaps))
            times = times[times <= t_end]
            m = times.shape[0]
        else:
            m = int(n_jumps)
            times = np.cumsum(rng.exponential(1.0, size=m))
        if representation == MATRIX:
            orients = sample_vonmises_rot(field, d, rng, size=max(m, 1))[:m]
        else:
            orients = sample_vonmises_quat(rot_to_quat(field), d, rng, size=max(m, 1))[:m]
        return times, orients

    if model != GRADUAL:
        raise ValueError(f"unknown model: {model!r}")
    nsteps = int(round(t_end / dt))
    r = int(replicas)
    if representation == MATRIX:
        if init == "stationary":
            a = sample_vonmises_rot(field, d, rng, size=r)
        else:
            a = np.broadcast_to(field, (r, 3, 3)).copy()
        for _ in range(nsteps):
            db = rng.standard_normal((r, 3, 3)) * np.sqrt(dt)
            incr = field * dt + 2.0 * np.sqrt(d) * db
            a = retract(a + project_tangent(a, incr))
        return a
    qf = rot_to_quat(field)
    if init == "stationary":
        q = sample_vonmises_quat(qf, d, rng, size=r)
    else:
        q = np.broadcast_to(qf, (r, 4)).copy()
    for _ in range(nsteps):
        dots = np.sum(qf * q, axis=-1, keepdims=True)
        drift = dots * qf - 0.25 * q
        db = rng.standard_normal((r, 4)) * np.sqrt(dt)
        incr = drift * dt + np.sqrt(0.5 * d) * db
        incr -= np.sum(incr * q, axis=-1, keepdims=True) * q
        q = quat_normalize(q + incr)
    return q
