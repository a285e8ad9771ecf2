"""Articulated-model descriptions.

A model is a planar tree of capsule links. Link 0 is the root (torso); its
pose occupies the first three generalized coordinates (x, z, pitch). Every
other link hangs off its parent through a single revolute joint placed at a
fractional ``anchor`` position along the parent capsule, so dof = 3 + n_joints.

Specs are plain data and can be written to / read from a line-oriented
key-value text format (see ``save_model`` / ``load_model``), letting new
models be added without code changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinkSpec",
    "JointSpec",
    "ModelSpec",
    "builtin_model",
    "BUILTIN_MODELS",
    "load_model",
    "save_model",
]


@dataclass(frozen=True)
class LinkSpec:
    length: float  # m
    mass: float  # kg
    radius: float  # m, capsule radius (display + contact offset)


@dataclass(frozen=True)
class JointSpec:
    parent: int  # parent link index
    limit_lo: float  # rad
    limit_hi: float  # rad
    torque_max: float  # N*m
    anchor: float = 1.0  # fraction along parent capsule (0 = origin, 1 = tip)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    links: tuple[LinkSpec, ...]
    joints: tuple[JointSpec, ...]
    dt: float = 0.01
    substeps: int = 5
    forward_weight: float = 1.0
    ctrl_cost: float = 0.1
    min_root_height: float | None = None  # early termination threshold, m
    episode_length: int = 1000
    fixed_root: bool = False  # pin the root frame (pendulum-style tests)
    rest_qpos: tuple[float, ...] = ()

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def dof(self) -> int:
        return 3 + len(self.joints)

    def rest(self) -> np.ndarray:
        if self.rest_qpos:
            return np.array(self.rest_qpos, dtype=np.float64)
        return np.zeros(self.dof, dtype=np.float64)

    def validate(self) -> None:
        if self.n_links < 1:
            raise ValueError("model needs at least one link")
        if self.n_joints != self.n_links - 1:
            raise ValueError(
                f"{self.name}: expected {self.n_links - 1} joints for "
                f"{self.n_links} links, got {self.n_joints}"
            )
        for i, link in enumerate(self.links):
            if link.length <= 0 or link.mass <= 0 or link.radius <= 0:
                raise ValueError(f"{self.name}: link {i} has non-positive dimensions")
        for j, joint in enumerate(self.joints):
            child = j + 1
            if not 0 <= joint.parent < child:
                raise ValueError(
                    f"{self.name}: joint {j} parent {joint.parent} must be < {child}"
                )
            if not joint.limit_lo < joint.limit_hi:
                raise ValueError(f"{self.name}: joint {j} has empty limit range")
            if not 0.0 <= joint.anchor <= 1.0:
                raise ValueError(f"{self.name}: joint {j} anchor outside [0, 1]")
            if joint.torque_max <= 0:
                raise ValueError(f"{self.name}: joint {j} torque_max must be > 0")
        if self.dt <= 0 or self.substeps < 1 or self.episode_length < 1:
            raise ValueError(f"{self.name}: bad time parameters")
        if self.rest_qpos and len(self.rest_qpos) != self.dof:
            raise ValueError(f"{self.name}: rest_qpos length must equal dof")


_HALF_PI = float(np.pi / 2)
_PI = float(np.pi)


def _leg(parent: int, anchor: float, dims, rests, torques, knee_range=(-1.5, 0.1)):
    """Thigh/shin/foot joint+link triple used by the biped builtins."""
    (lt, ls, lf) = dims
    (rt, rs, rf) = rests
    (tt, ts, tf) = torques
    links = (
        LinkSpec(lt, 1.5, 0.05),
        LinkSpec(ls, 1.2, 0.04),
        LinkSpec(lf, 0.5, 0.03),
    )
    joints = (
        JointSpec(parent, rt - 1.0, rt + 1.0, tt, anchor),
        JointSpec(-1, rs + knee_range[0], rs + knee_range[1], ts, 1.0),
        JointSpec(-1, rf - 0.6, rf + 0.6, tf, 1.0),
    )
    return links, joints, (rt, rs, rf)


def _cheetah_lite() -> ModelSpec:
    links = (
        LinkSpec(1.0, 6.0, 0.08),  # torso
        LinkSpec(0.34, 1.5, 0.05),  # back thigh
        LinkSpec(0.30, 1.2, 0.04),  # back shin
        LinkSpec(0.16, 0.5, 0.03),  # back foot
        LinkSpec(0.30, 1.4, 0.05),  # front thigh
        LinkSpec(0.28, 1.1, 0.04),  # front shin
        LinkSpec(0.14, 0.4, 0.03),  # front foot
    )
    rests = (-2.1, 0.8, 0.7, -1.1, 0.9, 0.5)
    parents = (0, 1, 2, 0, 4, 5)
    anchors = (0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    torques = (60.0, 45.0, 20.0, 60.0, 45.0, 20.0)
    joints = tuple(
        JointSpec(p, r - 0.9, r + 0.9, t, a)
        for p, a, r, t in zip(parents, anchors, rests, torques)
    )
    return ModelSpec(
        name="cheetah_lite",
        links=links,
        joints=joints,
        min_root_height=None,
        rest_qpos=(0.0, 0.58, 0.0) + rests,
    )


def _walker_lite() -> ModelSpec:
    torso = LinkSpec(0.5, 4.0, 0.07)
    links = (torso,)
    joints: tuple[JointSpec, ...] = ()
    rests = [0.0, 0.98, _HALF_PI]
    for parent_fix in (0, 0):
        leg_links, leg_joints, leg_rests = _leg(
            parent_fix, 0.0,
            dims=(0.45, 0.50, 0.20),
            rests=(-_PI, 0.0, _HALF_PI),
            torques=(60.0, 40.0, 20.0),
        )
        base = len(links)
        links = links + leg_links
        fixed = tuple(
            JointSpec(
                j.parent if k == 0 else base + k - 1,
                j.limit_lo, j.limit_hi, j.torque_max, j.anchor,
            )
            for k, j in enumerate(leg_joints)
        )
        joints = joints + fixed
        rests.extend(leg_rests)
    return ModelSpec(
        name="walker_lite",
        links=links,
        joints=joints,
        min_root_height=0.8,
        rest_qpos=tuple(rests),
    )


def _hopper_lite() -> ModelSpec:
    links = (
        LinkSpec(0.40, 3.5, 0.06),  # torso
        LinkSpec(0.40, 1.8, 0.05),  # thigh
        LinkSpec(0.45, 1.2, 0.04),  # shin
        LinkSpec(0.25, 0.8, 0.04),  # foot
    )
    rests = (-_PI, 0.0, _HALF_PI)
    joints = (
        JointSpec(0, rests[0] - 1.0, rests[0] + 1.0, 60.0, 0.0),
        JointSpec(1, rests[1] - 1.5, rests[1] + 0.1, 40.0, 1.0),
        JointSpec(2, rests[2] - 0.6, rests[2] + 0.6, 25.0, 1.0),
    )
    return ModelSpec(
        name="hopper_lite",
        links=links,
        joints=joints,
        min_root_height=0.7,
        rest_qpos=(0.0, 0.92, _HALF_PI) + rests,
    )


BUILTIN_MODELS = ("cheetah_lite", "walker_lite", "hopper_lite")

_BUILDERS = {
    "cheetah_lite": _cheetah_lite,
    "walker_lite": _walker_lite,
    "hopper_lite": _hopper_lite,
}


def builtin_model(name: str) -> ModelSpec:
    """Return the fixed spec for one of the built-in models."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; builtins are {', '.join(BUILTIN_MODELS)}"
        ) from None
    spec = builder()
    spec.validate()
    return spec


def save_model(spec: ModelSpec, path) -> None:
    """Write a spec in the line-oriented key-value model format."""
    lines = [
        f"name = {spec.name}",
        f"dt = {spec.dt!r}",
        f"substeps = {spec.substeps}",
        f"episode_length = {spec.episode_length}",
        f"forward_weight = {spec.forward_weight!r}",
        f"ctrl_cost = {spec.ctrl_cost!r}",
        "min_root_height = "
        + ("none" if spec.min_root_height is None else repr(spec.min_root_height)),
        f"fixed_root = {str(spec.fixed_root).lower()}",
    ]
    for link in spec.links:
        lines.append(f"link = {link.length!r} {link.mass!r} {link.radius!r}")
    for j in spec.joints:
        lines.append(
            f"joint = {j.parent} {j.limit_lo!r} {j.limit_hi!r} "
            f"{j.torque_max!r} {j.anchor!r}"
        )
    if spec.rest_qpos:
        lines.append("rest_qpos = " + " ".join(repr(v) for v in spec.rest_qpos))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_model(path) -> ModelSpec:
    """Parse a spec from the key-value model format; validates before returning."""
    fields: dict[str, str] = {}
    links: list[LinkSpec] = []
    joints: list[JointSpec] = []
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "link":
                parts = value.split()
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: link needs 3 numbers")
                links.append(LinkSpec(*(float(p) for p in parts)))
            elif key == "joint":
                parts = value.split()
                if len(parts) not in (4, 5):
                    raise ValueError(f"{path}:{lineno}: joint needs 4 or 5 numbers")
                joints.append(
                    JointSpec(
                        int(parts[0]),
                        float(parts[1]),
                        float(parts[2]),
                        float(parts[3]),
                        float(parts[4]) if len(parts) == 5 else 1.0,
                    )
                )
            else:
                fields[key] = value
    mrh = fields.get("min_root_height", "none")
    spec = ModelSpec(
        name=fields.get("name", "unnamed"),
        links=tuple(links),
        joints=tuple(joints),
        dt=float(fields.get("dt", 0.01)),
        substeps=int(fields.get("substeps", 5)),
        forward_weight=float(fields.get("forward_weight", 1.0)),
        ctrl_cost=float(fields.get("ctrl_cost", 0.1)),
        min_root_height=None if mrh == "none" else float(mrh),
        episode_length=int(fields.get("episode_length", 1000)),
        fixed_root=fields.get("fixed_root", "false") == "true",
        rest_qpos=tuple(
            float(v) for v in fields.get("rest_qpos", "").split()
        ),
    )
    spec.validate()
    return spec
