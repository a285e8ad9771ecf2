"""Batched planar articulated-body dynamics.

Reduced coordinates: ``qpos = [root_x, root_z, root_pitch, joint_0 ...]``.
Angles are measured counterclockwise in the x-z plane, so a link at angle
``theta`` points along ``(cos theta, sin theta)``. Accelerations come from a
recursive Newton-Euler inverse-dynamics pass (mass matrix assembled one unit
acceleration at a time), ground contact and joint limits are penalty forces,
and integration is semi-implicit Euler over ``spec.substeps`` sub-intervals.

All batched entry points are pure: they return fresh state and never touch
hidden globals, so stepping one env inside a batch of 1000 is bit-identical
to stepping it alone. Internal multithreading only partitions the batch into
disjoint env ranges, which keeps results independent of the schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .models import ModelSpec
from .prng import Key, fold_in, normal, split, uniform
from .threading_utils import parallel_over_ranges

__all__ = [
    "SystemState",
    "forward_kinematics",
    "step_dynamics",
    "compute_reward",
    "check_termination",
    "reset_state",
    "mechanical_energy",
]

GRAVITY = 9.81

# Penalty-contact and joint-limit constants.
CONTACT_SPRING = 4000.0  # N/m
CONTACT_DAMPING = 40.0  # N*s/m
FRICTION_GAIN = 40.0  # N*s/m, tangential velocity gain
FRICTION_MU = 0.8
LIMIT_SPRING = 300.0  # N*m/rad
LIMIT_DAMPING = 2.0  # N*m*s/rad
JOINT_DAMPING = 0.1  # N*m*s/rad, unconditional viscous term
VEL_CLAMP = 100.0  # m/s or rad/s, last-resort per-substep bound
DIVERGED = 1e8  # |coordinate| beyond this counts as divergence


@dataclass
class SystemState:
    """Batched generalized state plus episode bookkeeping."""

    qpos: np.ndarray  # (batch, dof) float64
    qvel: np.ndarray  # (batch, dof) float64
    step_count: np.ndarray  # (batch,) int64
    done: np.ndarray  # (batch,) bool

    @property
    def batch(self) -> int:
        return self.qpos.shape[0]

    def copy(self) -> "SystemState":
        return SystemState(
            self.qpos.copy(), self.qvel.copy(), self.step_count.copy(), self.done.copy()
        )


def _capsule_inertia(mass: float, length: float, radius: float) -> float:
    # Rod-with-end-caps approximation about the center, axis out of plane.
    return mass * (length * length / 12.0 + radius * radius / 4.0)


class ModelArrays:
    """ModelSpec flattened into the numpy arrays the kernels consume."""

    def __init__(self, spec: ModelSpec):
        spec.validate()
        nl = spec.n_links
        self.spec = spec
        self.parent = np.full(nl, -1, dtype=np.int64)
        self.anchor_dist = np.zeros(nl, dtype=np.float64)
        self.length = np.array([l.length for l in spec.links], dtype=np.float64)
        self.mass = np.array([l.mass for l in spec.links], dtype=np.float64)
        self.radius = np.array([l.radius for l in spec.links], dtype=np.float64)
        self.inertia = np.array(
            [_capsule_inertia(l.mass, l.length, l.radius) for l in spec.links],
            dtype=np.float64,
        )
        for j, joint in enumerate(spec.joints):
            self.parent[j + 1] = joint.parent
            self.anchor_dist[j + 1] = joint.anchor * spec.links[joint.parent].length
        self.limit_lo = np.array([j.limit_lo for j in spec.joints], dtype=np.float64)
        self.limit_hi = np.array([j.limit_hi for j in spec.joints], dtype=np.float64)
        self.torque_max = np.array([j.torque_max for j in spec.joints], dtype=np.float64)


_MODEL_CACHE: dict[int, ModelArrays] = {}


def model_arrays(spec: ModelSpec) -> ModelArrays:
    arrs = _MODEL_CACHE.get(id(spec))
    if arrs is None or arrs.spec is not spec:
        arrs = ModelArrays(spec)
        _MODEL_CACHE[id(spec)] = arrs
    return arrs


# --------------------------------------------------------------------------
# kinematics


def forward_kinematics(spec: ModelSpec, qpos: np.ndarray) -> np.ndarray:
    """Per-link world poses, shape (batch, n_links, 3) as [x, z, pitch].

    Position is the link origin (its proximal joint anchor); the link body
    extends from there along (cos pitch, sin pitch) for its length.
    """
    qpos = np.asarray(qpos, dtype=np.float64)
    if qpos.ndim != 2 or qpos.shape[1] != spec.dof:
        raise ValueError(
            f"qpos must be (batch, {spec.dof}), got {qpos.shape}"
        )
    m = model_arrays(spec)
    batch = qpos.shape[0]
    poses = np.zeros((batch, spec.n_links, 3), dtype=np.float64)
    poses[:, 0, 0] = qpos[:, 0]
    poses[:, 0, 1] = qpos[:, 1]
    poses[:, 0, 2] = qpos[:, 2]
    for i in range(1, spec.n_links):
        p = m.parent[i]
        th_p = poses[:, p, 2]
        poses[:, i, 0] = poses[:, p, 0] + m.anchor_dist[i] * np.cos(th_p)
        poses[:, i, 1] = poses[:, p, 1] + m.anchor_dist[i] * np.sin(th_p)
        poses[:, i, 2] = th_p + qpos[:, 3 + i - 1]
    return poses


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def _kinematics_pass(q, qd, parent, adist, length, theta, omega, ox, oz, vox, voz):
    nl = parent.shape[0]
    theta[0] = q[2]
    omega[0] = qd[2]
    ox[0] = q[0]
    oz[0] = q[1]
    vox[0] = qd[0]
    voz[0] = qd[1]
    for i in range(1, nl):
        p = parent[i]
        c = np.cos(theta[p])
        s = np.sin(theta[p])
        a = adist[i]
        ox[i] = ox[p] + a * c
        oz[i] = oz[p] + a * s
        vox[i] = vox[p] + omega[p] * a * (-s)
        voz[i] = voz[p] + omega[p] * a * c
        theta[i] = theta[p] + q[3 + i - 1]
        omega[i] = omega[p] + qd[3 + i - 1]


@njit(cache=True, nogil=True)
def _rnea(
    q, qd, qdd, grav, parent, adist, length, mass, inertia,
    fex, fez, tex, use_ext,
    theta, omega, alpha, ox, oz, vox, voz, aox, aoz,
    fx, fz, nq, out,
):
    """Inverse dynamics: generalized forces required to realize ``qdd``.

    With ``qdd = 0`` this yields the bias (Coriolis + gravity + external)
    term; with zero velocity, no gravity, and a unit ``qdd`` it yields one
    mass-matrix column.
    """
    nl = parent.shape[0]
    theta[0] = q[2]
    omega[0] = qd[2]
    alpha[0] = qdd[2]
    ox[0] = q[0]
    oz[0] = q[1]
    vox[0] = qd[0]
    voz[0] = qd[1]
    aox[0] = qdd[0]
    aoz[0] = qdd[1]
    for i in range(1, nl):
        p = parent[i]
        c = np.cos(theta[p])
        s = np.sin(theta[p])
        a = adist[i]
        ox[i] = ox[p] + a * c
        oz[i] = oz[p] + a * s
        vox[i] = vox[p] + omega[p] * a * (-s)
        voz[i] = voz[p] + omega[p] * a * c
        aox[i] = aox[p] + alpha[p] * a * (-s) - omega[p] * omega[p] * a * c
        aoz[i] = aoz[p] + alpha[p] * a * c - omega[p] * omega[p] * a * s
        theta[i] = theta[p] + q[3 + i - 1]
        omega[i] = omega[p] + qd[3 + i - 1]
        alpha[i] = alpha[p] + qdd[3 + i - 1]
    # Backward pass: net force and moment each link transmits to its parent.
    for i in range(nl):
        fx[i] = 0.0
        fz[i] = 0.0
        nq[i] = 0.0
    for i in range(nl - 1, -1, -1):
        h = 0.5 * length[i]
        c = np.cos(theta[i])
        s = np.sin(theta[i])
        # COM kinematics.
        acx = aox[i] + alpha[i] * h * (-s) - omega[i] * omega[i] * h * c
        acz = aoz[i] + alpha[i] * h * c - omega[i] * omega[i] * h * s
        gfx = mass[i] * acx
        gfz = mass[i] * (acz + grav)
        fx[i] += gfx
        fz[i] += gfz
        # Moment about the link origin; cross2(a, b) = a.x*b.z - a.z*b.x.
        nq[i] += inertia[i] * alpha[i] + (h * c) * gfz - (h * s) * gfx
        if use_ext:
            fx[i] -= fex[i]
            fz[i] -= fez[i]
            nq[i] -= tex[i]
        p = parent[i]
        if p >= 0:
            cp = np.cos(theta[p])
            sp = np.sin(theta[p])
            rx = adist[i] * cp
            rz = adist[i] * sp
            fx[p] += fx[i]
            fz[p] += fz[i]
            nq[p] += nq[i] + rx * fz[i] - rz * fx[i]
    out[0] = fx[0]
    out[1] = fz[0]
    out[2] = nq[0]
    for i in range(1, nl):
        out[2 + i] = nq[i]


@njit(cache=True, nogil=True)
def _solve_spd(M, rhs, x, active0, n):
    """Cholesky solve of M[active0:n, active0:n] x = rhs; inactive dofs -> 0."""
    k = n - active0
    # In-place Cholesky on the active block.
    for i in range(active0, n):
        for j in range(active0, i + 1):
            acc = M[i, j]
            for t in range(active0, j):
                acc -= M[i, t] * M[j, t]
            if i == j:
                if acc < 1e-12:
                    acc = 1e-12
                M[i, i] = np.sqrt(acc)
            else:
                M[i, j] = acc / M[j, j]
    for i in range(active0):
        x[i] = 0.0
    for i in range(active0, n):
        acc = rhs[i]
        for t in range(active0, i):
            acc -= M[i, t] * x[t]
        x[i] = acc / M[i, i]
    for i in range(n - 1, active0 - 1, -1):
        acc = x[i]
        for t in range(i + 1, n):
            acc -= M[t, i] * x[t]
        x[i] = acc / M[i, i]
    return k


@njit(cache=True, nogil=True)
def _step_batch(
    q, qd, step_count, done, actions,
    parent, adist, length, mass, inertia,
    limit_lo, limit_hi, torque_max,
    substeps, h, fixed_root, ep_len, min_h, has_min_h,
):
    batch, nd = q.shape
    nl = parent.shape[0]
    nj = nd - 3
    active0 = 3 if fixed_root else 0
    # Scratch reused across envs.
    theta = np.empty(nl)
    omega = np.empty(nl)
    alpha = np.empty(nl)
    ox = np.empty(nl)
    oz = np.empty(nl)
    vox = np.empty(nl)
    voz = np.empty(nl)
    aox = np.empty(nl)
    aoz = np.empty(nl)
    fxs = np.empty(nl)
    fzs = np.empty(nl)
    nqs = np.empty(nl)
    fex = np.empty(nl)
    fez = np.empty(nl)
    tex = np.empty(nl)
    M = np.empty((nd, nd))
    bias = np.empty(nd)
    col = np.empty(nd)
    tau = np.empty(nd)
    rhs = np.empty(nd)
    qdd = np.empty(nd)
    zeros = np.zeros(nd)
    unit = np.zeros(nd)
    qb = np.empty(nd)
    qdb = np.empty(nd)
    q0 = np.empty(nd)
    for b in range(batch):
        for d in range(nd):
            qb[d] = q[b, d]
            qdb[d] = qd[b, d]
            q0[d] = q[b, d]
        for _ in range(substeps):
            _kinematics_pass(
                qb, qdb, parent, adist, length, theta, omega, ox, oz, vox, voz
            )
            # Ground contact at both capsule endpoints (penalty spring-damper
            # with velocity-proportional friction capped at mu * normal).
            for i in range(nl):
                fex[i] = 0.0
                fez[i] = 0.0
                tex[i] = 0.0
            for i in range(nl):
                c = np.cos(theta[i])
                s = np.sin(theta[i])
                for end in range(2):
                    if end == 0:
                        px = ox[i]
                        pz = oz[i]
                        vx = vox[i]
                        vz = voz[i]
                    else:
                        px = ox[i] + length[i] * c
                        pz = oz[i] + length[i] * s
                        vx = vox[i] + omega[i] * length[i] * (-s)
                        vz = voz[i] + omega[i] * length[i] * c
                    if pz < 0.0:
                        fn = -CONTACT_SPRING * pz - CONTACT_DAMPING * vz
                        if fn < 0.0:
                            fn = 0.0
                        ft = -FRICTION_GAIN * vx
                        cap = FRICTION_MU * fn
                        if ft > cap:
                            ft = cap
                        elif ft < -cap:
                            ft = -cap
                        fex[i] += ft
                        fez[i] += fn
                        rx = px - ox[i]
                        rz = pz - oz[i]
                        tex[i] += rx * fn - rz * ft
            # Generalized applied torques: actuation plus joint-limit penalty.
            for d in range(nd):
                tau[d] = 0.0
            for j in range(nj):
                a = actions[b, j]
                if a > 1.0:
                    a = 1.0
                elif a < -1.0:
                    a = -1.0
                t = a * torque_max[j]
                qj = qb[3 + j]
                if qj < limit_lo[j]:
                    t += LIMIT_SPRING * (limit_lo[j] - qj) - LIMIT_DAMPING * qdb[3 + j]
                elif qj > limit_hi[j]:
                    t -= LIMIT_SPRING * (qj - limit_hi[j]) + LIMIT_DAMPING * qdb[3 + j]
                t -= JOINT_DAMPING * qdb[3 + j]
                tau[3 + j] = t
            _rnea(
                qb, qdb, zeros, GRAVITY, parent, adist, length, mass, inertia,
                fex, fez, tex, True,
                theta, omega, alpha, ox, oz, vox, voz, aox, aoz,
                fxs, fzs, nqs, bias,
            )
            for j in range(nd):
                unit[j] = 0.0
            for j in range(active0, nd):
                unit[j] = 1.0
                _rnea(
                    qb, zeros, unit, 0.0, parent, adist, length, mass, inertia,
                    fex, fez, tex, False,
                    theta, omega, alpha, ox, oz, vox, voz, aox, aoz,
                    fxs, fzs, nqs, col,
                )
                unit[j] = 0.0
                for i in range(nd):
                    M[i, j] = col[i]
            for d in range(nd):
                rhs[d] = tau[d] - bias[d]
            _solve_spd(M, rhs, qdd, active0, nd)
            for d in range(nd):
                v = qdb[d] + h * qdd[d]
                if v > VEL_CLAMP:
                    v = VEL_CLAMP
                elif v < -VEL_CLAMP:
                    v = -VEL_CLAMP
                qdb[d] = v
                qb[d] += h * v
        # Non-finite guard: one diverging env must not poison the batch.
        finite = True
        for d in range(nd):
            if not (np.isfinite(qb[d]) and np.isfinite(qdb[d])):
                finite = False
            elif qb[d] > DIVERGED or qb[d] < -DIVERGED:
                finite = False
        if not finite:
            for d in range(nd):
                qb[d] = q0[d]
                qdb[d] = 0.0
            done[b] = True
        for d in range(nd):
            q[b, d] = qb[d]
            qd[b, d] = qdb[d]
        step_count[b] += 1
        if step_count[b] >= ep_len:
            done[b] = True
        if has_min_h and q[b, 1] < min_h:
            done[b] = True


# --------------------------------------------------------------------------
# public batched operations


def step_dynamics(
    spec: ModelSpec,
    state: SystemState,
    actions: np.ndarray,
    key: Key | None = None,
    threads: int = 1,
) -> SystemState:
    """Advance every env by one control step of ``spec.dt`` seconds.

    Deterministic: the ``key`` argument is carried for future stochastic
    dynamics but the current dynamics are a pure function of (spec, state,
    actions). Out-of-range actions behave as their clamped values.
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape != (state.batch, spec.n_joints):
        raise ValueError(
            f"actions must be {(state.batch, spec.n_joints)}, got {actions.shape}"
        )
    if state.qpos.shape != (state.batch, spec.dof):
        raise ValueError(
            f"qpos must be {(state.batch, spec.dof)}, got {state.qpos.shape}"
        )
    m = model_arrays(spec)
    out = state.copy()
    h = spec.dt / spec.substeps
    min_h = spec.min_root_height if spec.min_root_height is not None else 0.0

    def run(lo: int, hi: int) -> None:
        _step_batch(
            out.qpos[lo:hi], out.qvel[lo:hi], out.step_count[lo:hi], out.done[lo:hi],
            actions[lo:hi],
            m.parent, m.anchor_dist, m.length, m.mass, m.inertia,
            m.limit_lo, m.limit_hi, m.torque_max,
            spec.substeps, h, spec.fixed_root, spec.episode_length,
            min_h, spec.min_root_height is not None,
        )

    parallel_over_ranges(state.batch, threads, run)
    return out


def compute_reward(
    spec: ModelSpec, prev: SystemState, next: SystemState, actions: np.ndarray
) -> np.ndarray:
    """forward_weight * root velocity minus quadratic control cost."""
    actions = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
    if actions.shape[0] != prev.batch or prev.batch != next.batch:
        raise ValueError("batch sizes disagree")
    forward = (next.qpos[:, 0] - prev.qpos[:, 0]) / spec.dt
    ctrl = np.sum(actions * actions, axis=1)
    return spec.forward_weight * forward - spec.ctrl_cost * ctrl


def check_termination(spec: ModelSpec, state: SystemState) -> np.ndarray:
    """True where the root dropped below the configured minimum height."""
    if spec.min_root_height is None:
        return np.zeros(state.batch, dtype=bool)
    return state.qpos[:, 1] < spec.min_root_height


def reset_state(
    spec: ModelSpec, key: Key, batch: int, env_offset: int = 0
) -> SystemState:
    """Fresh episodes: rest pose plus bounded noise, one subkey per env.

    ``env_offset`` shifts the per-env key indices so a small batch can
    reproduce a slice of a larger one exactly.
    """
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    dof = spec.dof
    rest = spec.rest()
    keys = split(key, env_offset + batch)[env_offset:]
    qpos = np.empty((batch, dof), dtype=np.float64)
    qvel = np.empty((batch, dof), dtype=np.float64)
    for i, k in enumerate(keys):
        qpos[i] = rest + uniform(fold_in(k, 0), dof, -0.1, 0.1)
        qvel[i] = normal(fold_in(k, 1), dof) * 0.05
    return SystemState(
        qpos=qpos,
        qvel=qvel,
        step_count=np.zeros(batch, dtype=np.int64),
        done=np.zeros(batch, dtype=bool),
    )


def mechanical_energy(spec: ModelSpec, state: SystemState) -> np.ndarray:
    """Total kinetic + gravitational potential energy per env (test aid)."""
    m = model_arrays(spec)
    poses = forward_kinematics(spec, state.qpos)
    batch = state.batch
    energy = np.zeros(batch, dtype=np.float64)
    omega = np.zeros((batch, spec.n_links))
    vx = np.zeros((batch, spec.n_links))
    vz = np.zeros((batch, spec.n_links))
    omega[:, 0] = state.qvel[:, 2]
    vx[:, 0] = state.qvel[:, 0]
    vz[:, 0] = state.qvel[:, 1]
    for i in range(1, spec.n_links):
        p = m.parent[i]
        th_p = poses[:, p, 2]
        a = m.anchor_dist[i]
        vx[:, i] = vx[:, p] - omega[:, p] * a * np.sin(th_p)
        vz[:, i] = vz[:, p] + omega[:, p] * a * np.cos(th_p)
        omega[:, i] = omega[:, p] + state.qvel[:, 3 + i - 1]
    for i in range(spec.n_links):
        h = 0.5 * m.length[i]
        th = poses[:, i, 2]
        cx = poses[:, i, 0] + h * np.cos(th)
        cz = poses[:, i, 1] + h * np.sin(th)
        vcx = vx[:, i] - omega[:, i] * h * np.sin(th)
        vcz = vz[:, i] + omega[:, i] * h * np.cos(th)
        energy += 0.5 * m.mass[i] * (vcx**2 + vcz**2)
        energy += 0.5 * m.inertia[i] * omega[:, i] ** 2
        energy += m.mass[i] * GRAVITY * cz
    return energy
