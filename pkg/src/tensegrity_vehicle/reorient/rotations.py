"""Face-to-face rotation specifications on the icosahedron shell.

All geometry here lives in the shell (build) frame with the origin moved to
the center of mass; ``VehicleParams.mount_rotation`` maps these vectors into
the body frame used by the controller and thrust allocation.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidGeometryError, InvalidPairError
from ..model import VehicleParams, compute_inertia
from ..rotationmath import minimal_rotation_between, rotvec_to_matrix


@dataclass(frozen=True)
class RotationSpec:
    """One rotation between neighboring contact faces.

    ``axis`` is signed so that rotating the outward normal of ``from_face``
    by ``+angle`` about it gives the outward normal of ``to_face``. The body
    itself rolls about the opposite axis (see ``roll_axis``): tipping the
    vehicle onto the neighbor face carries the *new* contact normal onto the
    old downward direction, which is the inverse rotation of the normal map.
    """

    from_face: int
    to_face: int
    rotation_point: np.ndarray   # shared-edge midpoint, COM-origin shell frame
    axis: np.ndarray             # unit vector along the shared edge
    angle: float                 # (0, pi)
    contact_nodes: tuple         # shared-edge node indices
    contact_points: np.ndarray   # (2, 3) shared-edge node positions
    ground_normal: np.ndarray    # v_a: unit up vector while resting on from_face
    edge_kind: str               # 'rod' | 'string'

    def __post_init__(self):
        for name in ("rotation_point", "axis", "contact_points", "ground_normal"):
            getattr(self, name).setflags(write=False)

    @property
    def roll_axis(self):
        """Axis the body physically rotates about when tipping onto to_face."""
        return -self.axis


def face_adjacency(model):
    """Neighbor pairs: faces sharing two nodes, with the shared edge kind."""
    if not model.faces:
        raise InvalidGeometryError("model has no face topology")
    rod_edges = set()
    for i, j in model.rod_axes():
        rod_edges.add((min(i, j), max(i, j)))
    pairs = []
    faces = model.faces
    for a in range(len(faces)):
        for b in range(a + 1, len(faces)):
            shared = sorted(set(faces[a]) & set(faces[b]))
            if len(shared) == 2:
                edge = (shared[0], shared[1])
                kind = "rod" if edge in rod_edges else "string"
                pairs.append((a, b, edge, kind))
    return pairs


def rotation_spec(model, from_face, to_face):
    """Build the RotationSpec for one neighboring face pair."""
    shared = sorted(set(model.faces[from_face]) & set(model.faces[to_face]))
    if len(shared) != 2:
        raise InvalidPairError(
            f"faces {from_face} and {to_face} do not share an edge")
    com = model.com()
    p1 = model.positions[shared[0]] - com
    p2 = model.positions[shared[1]] - com
    midpoint = 0.5 * (p1 + p2)
    axis = p2 - p1
    axis = axis / np.linalg.norm(axis)
    n_a = model.face_normals[from_face]
    n_b = model.face_normals[to_face]
    angle = float(np.arccos(np.clip(np.dot(n_a, n_b), -1.0, 1.0)))
    if np.abs(rotvec_to_matrix(axis * angle) @ n_a - n_b).max() > 1e-9:
        if np.abs(rotvec_to_matrix(-axis * angle) @ n_a - n_b).max() > 1e-9:
            raise InvalidGeometryError(
                "no edge rotation maps one outward normal onto the other")
        axis = -axis
    rod_edges = {tuple(sorted(e)) for e in model.rod_axes()}
    kind = "rod" if tuple(shared) in rod_edges else "string"
    return RotationSpec(
        from_face=from_face,
        to_face=to_face,
        rotation_point=midpoint,
        axis=axis,
        angle=angle,
        contact_nodes=(shared[0], shared[1]),
        contact_points=np.stack([p1, p2]),
        ground_normal=-n_a,
        edge_kind=kind,
    )


def vehicle_from_model(model, f_max, f_min=None, torque_coeff=0.01,
                       mount_rotation=None, gravity=9.81):
    """Rigid-body vehicle parameters of a built shell model.

    The default mount rotation aligns the thrust axis (body z) with the
    outward normal of one antipodal pair of all-string faces, so that resting
    on either face of the pair points the propellers straight up or down.
    """
    if f_min is None:
        f_min = -0.5 * f_max
    if mount_rotation is None:
        target = np.ones(3) / np.sqrt(3.0)
        mount_rotation = minimal_rotation_between(target, np.array([0.0, 0.0, 1.0]))
    com = model.com()
    inertia_shell = compute_inertia(model, com)
    quad = np.array(model.quad_node_ids, dtype=int)
    prop_shell = model.positions[quad] - com
    # X-layout: diagonal propeller pairs share handedness, adjacent ones differ
    handed = np.where(prop_shell[:, 0] * prop_shell[:, 1] > 0.0, 1.0, -1.0)
    return VehicleParams(
        total_mass=model.total_mass(),
        inertia_com=mount_rotation @ inertia_shell @ mount_rotation.T,
        prop_positions=prop_shell @ mount_rotation.T,
        prop_handedness=handed,
        torque_coeff=torque_coeff,
        f_min=f_min,
        f_max=f_max,
        gravity=gravity,
        mount_rotation=np.asarray(mount_rotation, dtype=float),
    )


def thrust_axis_in_shell(vehicle):
    """The body z (thrust) axis expressed in the shell frame."""
    return vehicle.mount_rotation.T @ np.array([0.0, 0.0, 1.0])


def default_goal_faces(model, vehicle, tol=1e-6):
    """Faces whose outward normal is (anti)parallel to the thrust axis."""
    axis = thrust_axis_in_shell(vehicle)
    goals = [idx for idx, n in enumerate(model.face_normals)
             if abs(abs(float(np.dot(n, axis))) - 1.0) < tol]
    if not goals:
        raise InvalidGeometryError(
            "no face normal is parallel to the thrust axis; pass goal faces "
            "explicitly or adjust mount_rotation")
    return tuple(goals)


def body_geometry(spec, vehicle):
    """Rotation-spec vectors mapped into the body frame."""
    rot = vehicle.mount_rotation
    return {
        "rotation_point": rot @ spec.rotation_point,
        "axis": rot @ spec.axis,
        "roll_axis": rot @ spec.roll_axis,
        "contact_points": spec.contact_points @ rot.T,
        "ground_normal": rot @ spec.ground_normal,
    }
