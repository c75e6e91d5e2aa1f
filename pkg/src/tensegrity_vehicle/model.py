"""Point-mass stress-network models of protected quadcopter frames.

Two vehicle frames are built here:

* a six-rod orthogonal icosahedron tensegrity shell carrying four quadcopter
  mass nodes on its two x-parallel rods, and
* a planar propeller guard (hub, four arms, discretized outer ring).

Both are represented by the same ``StructureModel``: point masses connected
by axial spring-damper elements (rods, strings) and torsional spring-damper
joints between collinear or perpendicular rod segments.
"""

import json
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .exceptions import (
    EquilibriumFailureError,
    InfeasibleGeometryError,
    InvalidConfigError,
    InvalidGeometryError,
)

MODEL_SCHEMA_VERSION = 1

# geometric string length of the orthogonal icosahedron, per unit rod length
STRING_LENGTH_FACTOR = np.sqrt(6.0) / 4.0


@dataclass(frozen=True)
class MaterialSpec:
    """Homogeneous material: density [kg/m^3], Young's modulus [Pa], yield strength [Pa]."""

    density: float
    youngs_modulus: float
    yield_strength: float

    def __post_init__(self):
        for name in ("density", "youngs_modulus", "yield_strength"):
            if not getattr(self, name) > 0.0:
                raise InvalidConfigError(f"MaterialSpec.{name} must be strictly positive")


@dataclass(frozen=True)
class ElementSpec:
    """One structural element.

    kind 'rod' or 'string': an axial spring-damper between ``nodes=(i, j)``
    with stiffness ``spring_const`` [N/m] and damping [N s/m].

    kind 'joint': a torsional spring-damper at hinge node j of
    ``nodes=(i, j, k)`` with stiffness [N m/rad], damping [N m s/rad] and a
    zero-moment angle ``rest_angle`` [rad] between the arms j->i and j->k.
    """

    kind: str
    nodes: tuple
    spring_const: float
    damping_const: float
    rest_length: float = 0.0
    rest_angle: float = 0.0
    cross_section_area: float = 0.0
    second_moment_area: float = 0.0
    outer_radius: float = 0.0


@dataclass(frozen=True)
class StructureModel:
    """Immutable point-mass network model of one vehicle."""

    kind: str                      # 'icosahedron' | 'propeller_guard'
    positions: np.ndarray          # (n, 3) node coordinates [m], build frame
    masses: np.ndarray             # (n,) lumped node masses [kg]
    roles: tuple                   # per node: tensegrity|quadcopter|hub|ring
    elements: tuple                # ElementSpec, axial elements and joints
    faces: tuple                   # triangles (i, j, k) over shell nodes
    face_normals: np.ndarray       # (n_faces, 3) outward unit normals
    quad_node_ids: tuple           # the four quadcopter mass nodes
    frame_axes: np.ndarray = field(default_factory=lambda: np.eye(3))
    pretension: float = 0.0        # string tension at the build geometry [N]
    damping_mode: str = "fixed"    # 'fixed' | 'critical'

    def __post_init__(self):
        for name in ("positions", "masses", "face_normals", "frame_axes"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return self.positions.shape[0]

    def total_mass(self):
        return float(self.masses.sum())

    def com(self):
        """Center of mass in the build frame."""
        return self.masses @ self.positions / self.total_mass()

    def axial_elements(self):
        return tuple(e for e in self.elements if e.kind in ("rod", "string"))

    def joint_elements(self):
        return tuple(e for e in self.elements if e.kind == "joint")

    def shell_node_ids(self):
        return tuple(i for i, r in enumerate(self.roles) if r == "tensegrity")

    def rod_axes(self):
        """Full rod axes as (i, j) shell-node pairs (segments merged)."""
        segs = [e.nodes for e in self.elements if e.kind == "rod"]
        adj = {}
        for i, j in segs:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
        ends = [i for i, nb in adj.items() if len(nb) == 1]
        axes = []
        seen = set()
        for start in sorted(ends):
            if start in seen:
                continue
            prev, cur = None, start
            while len(adj[cur]) > 1 or prev is None:
                nxt = [n for n in adj[cur] if n != prev]
                if not nxt:
                    break
                prev, cur = cur, nxt[0]
            seen.update((start, cur))
            axes.append((min(start, cur), max(start, cur)))
        return tuple(sorted(set(axes)))

    def indicator_tables(self):
        """Rod and string connectivity indicators N_r, N_s over all nodes."""
        n = self.n_nodes
        nr = np.zeros((n, n), dtype=int)
        ns = np.zeros((n, n), dtype=int)
        for e in self.elements:
            if e.kind == "rod":
                i, j = e.nodes
                nr[i, j] = nr[j, i] = 1
            elif e.kind == "string":
                i, j = e.nodes
                ns[i, j] = ns[j, i] = 1
        return nr, ns


@dataclass(frozen=True)
class VehicleParams:
    """Rigid-body and actuation parameters used by the re-orientation stack.

    The body frame has its origin at the center of mass; ``mount_rotation``
    maps shell (build-frame) vectors into the body frame. All four propellers
    thrust along the body z axis.
    """

    total_mass: float              # [kg]
    inertia_com: np.ndarray        # (3, 3) about the COM, body frame [kg m^2]
    prop_positions: np.ndarray     # (4, 3) body frame [m]
    prop_handedness: np.ndarray    # (4,) +1 / -1
    torque_coeff: float            # drag torque per unit thrust [m]
    f_min: float                   # [N], negative (reversed props)
    f_max: float                   # [N]
    gravity: float = 9.81          # [m/s^2]
    mount_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not (self.f_min < 0.0 < self.f_max):
            raise InvalidConfigError("thrust range must satisfy f_min < 0 < f_max")
        j = self.inertia_com
        if np.abs(j - j.T).max() > 1e-9 * max(np.abs(j).max(), 1e-30):
            raise InvalidConfigError("inertia tensor must be symmetric")
        if np.linalg.eigvalsh(j).min() <= 0.0:
            raise InvalidConfigError("inertia tensor must be positive definite")
        if int(round(float(self.prop_handedness.sum()))) != 0:
            raise InvalidConfigError("propeller handedness values must sum to zero")
        for name in ("inertia_com", "prop_positions", "prop_handedness", "mount_rotation"):
            getattr(self, name).setflags(write=False)

    def inertia_about(self, point):
        """Inertia about an arbitrary body-frame point (parallel axis)."""
        q = -np.asarray(point, dtype=float)  # COM relative to the point
        m, eye = self.total_mass, np.eye(3)
        return self.inertia_com + m * (np.dot(q, q) * eye - np.outer(q, q))


def jessen_nodes(rod_length):
    """The 12 shell nodes: cyclic permutations of (0, +-L/2, +-L/4)."""
    half, quarter = rod_length / 2.0, rod_length / 4.0
    pts = []
    for sy in (1.0, -1.0):
        for sz in (1.0, -1.0):
            base = (0.0, sy * half, sz * quarter)
            pts.append(base)
            pts.append((base[2], base[0], base[1]))
            pts.append((base[1], base[2], base[0]))
    return np.array(sorted(pts))


def _icosahedron_topology(nodes, rod_length):
    """Rod pairs, string pairs and triangular faces of the shell graph."""
    dist = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    tol = 1e-9 * rod_length
    rods = [(i, j) for i, j in combinations(range(12), 2)
            if abs(dist[i, j] - rod_length) < tol]
    string_len = STRING_LENGTH_FACTOR * rod_length
    strings = [(i, j) for i, j in combinations(range(12), 2)
               if abs(dist[i, j] - string_len) < tol]
    if len(rods) != 6 or len(strings) != 24:
        raise InvalidGeometryError("node set is not an orthogonal icosahedron")
    adjacency = {i: set() for i in range(12)}
    for i, j in rods + strings:
        adjacency[i].add(j)
        adjacency[j].add(i)
    faces = [tri for tri in combinations(range(12), 3)
             if tri[1] in adjacency[tri[0]]
             and tri[2] in adjacency[tri[0]]
             and tri[2] in adjacency[tri[1]]]
    return rods, strings, faces


def outward_face_normals(positions, faces, center=None):
    """Unit normals oriented away from the node centroid."""
    pos = np.asarray(positions, dtype=float)
    center = pos.mean(axis=0) if center is None else center
    normals = []
    for (i, j, k) in faces:
        n = np.cross(pos[j] - pos[i], pos[k] - pos[i])
        norm = np.linalg.norm(n)
        if norm < 1e-15:
            raise InvalidGeometryError(f"degenerate face {(i, j, k)}")
        n = n / norm
        centroid = (pos[i] + pos[j] + pos[k]) / 3.0
        if np.dot(n, centroid - center) < 0.0:
            n = -n
        normals.append(n)
    return np.array(normals)


def _critical_axial_damping(spring_const, m_i, m_j):
    mu = m_i * m_j / (m_i + m_j)
    return 2.0 * np.sqrt(spring_const * mu)


def _critical_joint_damping(joint_const, m_i, arm_i, m_k, arm_k):
    inertia_i = m_i * arm_i**2
    inertia_k = m_k * arm_k**2
    reduced = inertia_i * inertia_k / (inertia_i + inertia_k)
    return 2.0 * np.sqrt(joint_const * reduced)


def _rod_section(total_rod_mass, density, total_length, tube_outer_radius=None):
    """Cross-section area, second moment and outer radius from a mass budget."""
    area = total_rod_mass / (density * total_length)
    if area <= 0.0:
        raise InfeasibleGeometryError("rod mass budget gives non-positive section area")
    if tube_outer_radius is None:
        outer = np.sqrt(area / np.pi)
        second = np.pi * outer**4 / 4.0
        return area, second, outer
    inner_sq = tube_outer_radius**2 - area / np.pi
    if inner_sq < 0.0:
        raise InfeasibleGeometryError(
            "tube outer radius too small for the required section area")
    second = np.pi * (tube_outer_radius**4 - inner_sq**2) / 4.0
    return area, second, tube_outer_radius


def build_icosahedron(rod_length, rod_material, string_material,
                      m_structure, m_quad, mass_ratio,
                      pretension=0.0, quad_offset=0.25,
                      tube_outer_radius=None,
                      damping_mode="fixed", axial_damping=500.0,
                      joint_damping=10.0):
    """Build the tensegrity shell model with quadcopter nodes mounted.

    The shell carries ``m_structure`` split between rods and strings in the
    ratio ``mass_ratio`` (rods / strings). The quadcopter mass ``m_quad`` is
    lumped in four nodes placed at ``+-quad_offset * rod_length`` from the
    centers of the two x-parallel rods, splitting each into three short rod
    segments coupled by torsional joints with straight rest angle.

    ``damping_mode`` selects the damper constants: 'fixed' uses
    ``axial_damping`` [N s/m] on every rod and string and ``joint_damping``
    [N m s/rad] on every joint (strongly overdamped at this scale, matching
    production collision models of such shells); 'critical' derives each
    constant from the element stiffness and its end-node masses.
    """
    if rod_length <= 0.0:
        raise InvalidConfigError("rod_length must be positive")
    if m_structure <= 0.0 or m_quad < 0.0:
        raise InvalidConfigError("masses must be positive")
    if mass_ratio <= 0.0:
        raise InvalidConfigError("rod/string mass ratio must be positive")
    if pretension < 0.0:
        raise InvalidConfigError("pretension must be non-negative")
    if not 0.0 < quad_offset < 0.5:
        raise InvalidConfigError("quad_offset must lie in (0, 0.5)")

    shell = jessen_nodes(rod_length)
    rods, strings, faces = _icosahedron_topology(shell, rod_length)
    string_len = STRING_LENGTH_FACTOR * rod_length

    m_rods = m_structure * mass_ratio / (1.0 + mass_ratio)
    m_strings = m_structure / (1.0 + mass_ratio)
    rod_area, rod_second, rod_outer = _rod_section(
        m_rods, rod_material.density, 6.0 * rod_length, tube_outer_radius)
    string_area = m_strings / (string_material.density * 24.0 * string_len)

    # lump half of each full rod and half of each string at the shell nodes
    masses = np.zeros(12)
    per_rod = m_rods / 6.0
    per_string = m_strings / 24.0
    for i, j in rods:
        masses[i] += per_rod / 2.0
        masses[j] += per_rod / 2.0
    for i, j in strings:
        masses[i] += per_string / 2.0
        masses[j] += per_string / 2.0

    positions = [p for p in shell]
    roles = ["tensegrity"] * 12
    masses = list(masses)
    quad_ids = []
    elements = []

    def add_axial(kind, i, j, length, area, second=0.0, outer=0.0,
                  modulus=0.0):
        k = modulus * area / length
        if damping_mode == "critical":
            c = _critical_axial_damping(k, masses[i], masses[j])
        else:
            c = axial_damping
        elements.append(ElementSpec(
            kind=kind, nodes=(i, j), spring_const=k, damping_const=c,
            rest_length=length, cross_section_area=area,
            second_moment_area=second, outer_radius=outer))

    x_rods = [(i, j) for (i, j) in rods
              if abs(shell[i][0] - shell[j][0]) > 0.9 * rod_length]
    plain_rods = [p for p in rods if p not in x_rods]

    for i, j in plain_rods:
        add_axial("rod", i, j, rod_length, rod_area, rod_second, rod_outer,
                  rod_material.youngs_modulus)

    joint_triples = []
    for i, j in sorted(x_rods):
        if shell[i][0] > shell[j][0]:
            i, j = j, i
        center = (shell[i] + shell[j]) / 2.0
        axis = (shell[j] - shell[i]) / rod_length
        qa = len(positions)
        positions.append(center - axis * quad_offset * rod_length)
        masses.append(m_quad / 4.0)
        roles.append("quadcopter")
        qb = len(positions)
        positions.append(center + axis * quad_offset * rod_length)
        masses.append(m_quad / 4.0)
        roles.append("quadcopter")
        quad_ids += [qa, qb]
        outer_len = (0.5 - quad_offset) * rod_length
        inner_len = 2.0 * quad_offset * rod_length
        add_axial("rod", i, qa, outer_len, rod_area, rod_second, rod_outer,
                  rod_material.youngs_modulus)
        add_axial("rod", qa, qb, inner_len, rod_area, rod_second, rod_outer,
                  rod_material.youngs_modulus)
        add_axial("rod", qb, j, outer_len, rod_area, rod_second, rod_outer,
                  rod_material.youngs_modulus)
        joint_triples.append((i, qa, qb))
        joint_triples.append((qa, qb, j))

    positions = np.array(positions)
    masses = np.array(masses)

    for (i, j, k) in joint_triples:
        arm_i = np.linalg.norm(positions[i] - positions[j])
        arm_k = np.linalg.norm(positions[k] - positions[j])
        stiff = rod_material.youngs_modulus * rod_second / (arm_i + arm_k)
        if damping_mode == "critical":
            damp = _critical_joint_damping(stiff, masses[i], arm_i,
                                           masses[k], arm_k)
        else:
            damp = joint_damping
        elements.append(ElementSpec(
            kind="joint", nodes=(i, j, k), spring_const=stiff,
            damping_const=damp, rest_angle=np.pi,
            cross_section_area=rod_area, second_moment_area=rod_second,
            outer_radius=rod_outer))

    for i, j in strings:
        add_axial("string", i, j, string_len, string_area,
                  modulus=string_material.youngs_modulus)

    model = StructureModel(
        kind="icosahedron",
        positions=positions,
        masses=masses,
        roles=tuple(roles),
        elements=tuple(elements),
        faces=tuple(faces),
        face_normals=outward_face_normals(shell, faces),
        quad_node_ids=tuple(quad_ids),
        damping_mode=damping_mode,
    )
    if pretension > 0.0:
        model = init_pretension(model, pretension)
    return model


def _element_modulus(element):
    """Young's modulus recovered from K = E A / L0."""
    return element.spring_const * element.rest_length / element.cross_section_area


def init_pretension(model, string_tension):
    """Set rest lengths so self-stress balances every node at the build geometry.

    String rest lengths are shortened so each string carries
    ``string_tension`` at its geometric length; rod segment rest lengths are
    then lengthened to carry the unique compression field that zeroes the net
    force on every node. Spring constants and critical damping are refreshed
    for the new rest lengths.
    """
    if model.kind != "icosahedron":
        raise InvalidConfigError("pretension only applies to the icosahedron shell")
    pos = model.positions
    masses = model.masses

    new_elements = []
    string_forces = np.zeros((model.n_nodes, 3))
    rod_list = []
    for e in model.elements:
        if e.kind == "string":
            geom_len = float(np.linalg.norm(pos[e.nodes[1]] - pos[e.nodes[0]]))
            stiff_ea = _element_modulus(e) * e.cross_section_area
            rest = geom_len / (1.0 + string_tension / stiff_ea)
            k = stiff_ea / rest
            if model.damping_mode == "critical":
                c = _critical_axial_damping(k, masses[e.nodes[0]],
                                            masses[e.nodes[1]])
            else:
                c = e.damping_const
            new_elements.append(replace(e, rest_length=rest, spring_const=k,
                                        damping_const=c))
            i, j = e.nodes
            unit = (pos[j] - pos[i]) / geom_len
            string_forces[i] += string_tension * unit
            string_forces[j] -= string_tension * unit
        elif e.kind == "rod":
            rod_list.append(e)
        else:
            new_elements.append(e)

    # per-segment compressions from the node force balance (least squares)
    n_seg = len(rod_list)
    a_mat = np.zeros((3 * model.n_nodes, n_seg))
    for col, e in enumerate(rod_list):
        i, j = e.nodes
        unit = pos[j] - pos[i]
        unit = unit / np.linalg.norm(unit)
        a_mat[3 * i:3 * i + 3, col] = -unit   # compression pushes i away from j
        a_mat[3 * j:3 * j + 3, col] = unit
    b_vec = -string_forces.ravel()
    comp, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    residual = np.abs(a_mat @ comp - b_vec).max()
    scale = max(string_tension, 1.0)
    if residual > 1e-8 * scale:
        raise EquilibriumFailureError(
            f"static pre-stress balance residual {residual:.3e} N")

    for e, c_force in zip(rod_list, comp):
        geom_len = float(np.linalg.norm(pos[e.nodes[1]] - pos[e.nodes[0]]))
        stiff_ea = _element_modulus(e) * e.cross_section_area
        if c_force >= stiff_ea:
            raise EquilibriumFailureError("rod compression exceeds axial stiffness")
        rest = geom_len / (1.0 - c_force / stiff_ea)
        k = stiff_ea / rest
        if model.damping_mode == "critical":
            c = _critical_axial_damping(k, masses[e.nodes[0]],
                                        masses[e.nodes[1]])
        else:
            c = e.damping_const
        new_elements.append(replace(e, rest_length=rest, spring_const=k,
                                    damping_const=c))

    # keep the original element ordering: rebuild by matching (kind, nodes)
    by_key = {(e.kind, e.nodes): e for e in new_elements}
    ordered = tuple(by_key[(e.kind, e.nodes)] for e in model.elements)
    return replace(model, elements=ordered, pretension=float(string_tension))


def build_propeller_guard(prop_diameter, arm_radius, ring_segments,
                          rod_material, m_structure, m_quad,
                          clearance=0.0, damping_mode="fixed",
                          axial_damping=500.0, joint_damping=10.0):
    """Build the planar propeller-guard model.

    Hub at the origin, four arms along +-x / +-y to motor nodes at
    ``arm_radius``, and one outer ring whose inscribed radius is
    ``arm_radius + prop_diameter/2 + clearance``. The ring polygon has
    ``ring_segments`` sides; the four arm junctions are inserted at the
    mid-edges aligned with the arms, so the ring runs straight through each
    junction (rest angle pi) while the arm meets it at exactly pi/2.
    """
    if ring_segments < 8 or ring_segments % 4:
        raise InvalidConfigError("ring_segments must be >= 8 and divisible by 4")
    if arm_radius <= prop_diameter / 2.0:
        raise InvalidConfigError("arm_radius must exceed the propeller radius")
    if m_structure <= 0.0 or m_quad < 0.0:
        raise InvalidConfigError("masses must be positive")

    ring_inradius = arm_radius + prop_diameter / 2.0 + clearance
    circumradius = ring_inradius / np.cos(np.pi / ring_segments)

    positions = [np.zeros(3)]
    roles = ["hub"]
    arm_dirs = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                np.array([-1.0, 0, 0]), np.array([0, -1.0, 0])]
    motor_ids = []
    for d in arm_dirs:
        motor_ids.append(len(positions))
        positions.append(d * arm_radius)
        roles.append("quadcopter")

    # polygon vertices offset by half a side so arm directions hit mid-edges
    vertex_ids = []
    step = 2.0 * np.pi / ring_segments
    for k in range(ring_segments):
        ang = (k + 0.5) * step
        vertex_ids.append(len(positions))
        positions.append(circumradius * np.array([np.cos(ang), np.sin(ang), 0.0]))
        roles.append("ring")

    junction_ids = []
    junction_edges = {}
    for a, d in enumerate(arm_dirs):
        junction_ids.append(len(positions))
        positions.append(d * ring_inradius)
        roles.append("ring")
        # the polygon edge whose midpoint this is: vertex k sits at (k+0.5)*step,
        # so the mid-edge at m*step joins vertices m-1 and m
        ang = np.arctan2(d[1], d[0]) % (2.0 * np.pi)
        k = (int(round(ang / step)) - 1) % ring_segments
        junction_edges[(k, (k + 1) % ring_segments)] = junction_ids[-1]

    positions = np.array(positions)
    n = len(positions)

    rod_pairs = []
    for m, j in zip(motor_ids, junction_ids):
        rod_pairs.append((0, m))
        rod_pairs.append((m, j))
    ring_chain = []  # ordered node chain around the ring, for joints
    for k in range(ring_segments):
        i, j = vertex_ids[k], vertex_ids[(k + 1) % ring_segments]
        mid = junction_edges.get((k, (k + 1) % ring_segments))
        if mid is None:
            rod_pairs.append((i, j))
            ring_chain.append(i)
        else:
            rod_pairs.append((i, mid))
            rod_pairs.append((mid, j))
            ring_chain.extend([i, mid])

    total_length = sum(np.linalg.norm(positions[j] - positions[i])
                       for i, j in rod_pairs)
    area, second, outer = _rod_section(m_structure, rod_material.density,
                                       total_length)

    masses = np.zeros(n)
    for i, j in rod_pairs:
        seg_mass = rod_material.density * area * np.linalg.norm(
            positions[j] - positions[i])
        masses[i] += seg_mass / 2.0
        masses[j] += seg_mass / 2.0
    masses[motor_ids] += m_quad / 4.0

    elements = []
    for i, j in rod_pairs:
        length = float(np.linalg.norm(positions[j] - positions[i]))
        k = rod_material.youngs_modulus * area / length
        if damping_mode == "critical":
            c = _critical_axial_damping(k, masses[i], masses[j])
        else:
            c = axial_damping
        elements.append(ElementSpec(
            kind="rod", nodes=(i, j), spring_const=k, damping_const=c,
            rest_length=length, cross_section_area=area,
            second_moment_area=second, outer_radius=outer))

    def add_joint(i, j, k):
        arm_i = np.linalg.norm(positions[i] - positions[j])
        arm_k = np.linalg.norm(positions[k] - positions[j])
        ang = _included_angle(positions[i], positions[j], positions[k])
        stiff = rod_material.youngs_modulus * second / (arm_i + arm_k)
        if damping_mode == "critical":
            damp = _critical_joint_damping(stiff, masses[i], arm_i,
                                           masses[k], arm_k)
        else:
            damp = joint_damping
        elements.append(ElementSpec(
            kind="joint", nodes=(i, j, k), spring_const=stiff,
            damping_const=damp, rest_angle=ang, cross_section_area=area,
            second_moment_area=second, outer_radius=outer))

    # straight-through joints at motors, perpendicular arm-ring joints, and
    # ring bending joints at every chain node (rest at the as-built angle)
    for m, j in zip(motor_ids, junction_ids):
        add_joint(0, m, j)
    chain_len = len(ring_chain)
    for idx, node in enumerate(ring_chain):
        prev_node = ring_chain[idx - 1]
        next_node = ring_chain[(idx + 1) % chain_len]
        add_joint(prev_node, node, next_node)
        if node in junction_ids:
            motor = motor_ids[junction_ids.index(node)]
            add_joint(motor, node, prev_node)
            add_joint(motor, node, next_node)

    return StructureModel(
        kind="propeller_guard",
        positions=positions,
        masses=masses,
        roles=tuple(roles),
        elements=tuple(elements),
        faces=(),
        face_normals=np.zeros((0, 3)),
        quad_node_ids=tuple(motor_ids),
        damping_mode=damping_mode,
    )


def _included_angle(p_i, p_j, p_k):
    a = p_i - p_j
    b = p_k - p_j
    cosv = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cosv, -1.0, 1.0)))


def quad_positions_for(rod_length, quad_offset=0.25):
    """The four quadcopter node positions of the shell build, z = 0 plane."""
    return np.array([[sx * quad_offset * rod_length, sy * rod_length / 4.0, 0.0]
                     for sx in (1.0, -1.0) for sy in (1.0, -1.0)])


def _hull_margin(rod_length, prop_diameter, quad_offset, n_angles=128, n_radii=6):
    """Worst containment margin of the four propeller disks in the node hull."""
    from scipy.spatial import ConvexHull

    nodes = jessen_nodes(rod_length)
    hull = ConvexHull(nodes)
    a_mat = hull.equations[:, :3]
    b_vec = hull.equations[:, 3]          # a @ x + b <= 0 inside
    centers = quad_positions_for(rod_length, quad_offset)
    radius = prop_diameter / 2.0
    angles = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    radii = np.linspace(0.0, radius, n_radii)[1:] if radius > 0 else np.array([0.0])
    ring = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=1)
    samples = [centers]
    for r in radii:
        samples.append((centers[:, None, :] + r * ring[None, :, :]).reshape(-1, 3))
    pts = np.concatenate(samples, axis=0)
    return float((-(pts @ a_mat.T + b_vec)).min())


def min_enclosing_rod_length(prop_diameter, quad_offset=0.25, clearance=0.0,
                             tol=1e-7):
    """Smallest rod length whose shell hull contains the four propeller disks.

    The disks lie in the plane of the x-parallel rods, centered on the
    quadcopter nodes. Containment (with ``clearance`` margin) is monotone in
    the rod length, so the minimum is found by bisection over a disk sample
    grid tested against the hull facets.
    """
    if prop_diameter < 0.0 or clearance < 0.0:
        raise InvalidConfigError("prop_diameter and clearance must be non-negative")
    if prop_diameter == 0.0 and clearance == 0.0:
        return 0.0
    lo = 1e-9
    hi = max(8.0 * (prop_diameter + clearance), 1e-6)
    while _hull_margin(hi, prop_diameter, quad_offset) < clearance:
        hi *= 2.0
        if hi > 1e4:
            raise InfeasibleGeometryError("enclosure search diverged")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _hull_margin(mid, prop_diameter, quad_offset) >= clearance:
            hi = mid
        else:
            lo = mid
    return hi


def point_mass_inertia(masses, positions, about_point):
    """Inertia tensor of a point-mass set about ``about_point``."""
    masses = np.asarray(masses, dtype=float)
    rel = np.asarray(positions, dtype=float) - np.asarray(about_point, dtype=float)
    eye = np.eye(3)
    sq = np.einsum("ni,ni->n", rel, rel)
    return np.einsum("n,nij->ij",
                     masses,
                     sq[:, None, None] * eye - rel[:, None, :] * rel[:, :, None])


def compute_inertia(model, about_point):
    """Point-mass inertia tensor of a model about ``about_point`` (build frame)."""
    if model.n_nodes == 0:
        raise InvalidGeometryError("model has no nodes")
    return point_mass_inertia(model.masses, model.positions, about_point)


def face_stability(model):
    """Per-face stability: COM projection strictly inside the face triangle."""
    if not model.faces:
        raise InvalidGeometryError("model has no face topology")
    com = model.com()
    pos = model.positions
    stable = []
    for (i, j, k), normal in zip(model.faces, model.face_normals):
        a, b, c = pos[i], pos[j], pos[k]
        area2 = np.linalg.norm(np.cross(b - a, c - a))
        if area2 < 1e-15:
            raise InvalidGeometryError(f"degenerate face {(i, j, k)}")
        foot = com + normal * np.dot(a - com, normal)
        bary = _barycentric(foot, a, b, c)
        stable.append(bool(np.all(bary > 1e-9)))
    return np.array(stable, dtype=bool)


def _barycentric(p, a, b, c):
    v0, v1, v2 = b - a, c - a, p - a
    d00, d01, d11 = np.dot(v0, v0), np.dot(v0, v1), np.dot(v1, v1)
    d20, d21 = np.dot(v2, v0), np.dot(v2, v1)
    denom = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    return np.array([1.0 - v - w, v, w])


_MODEL_UNITS = {
    "length": "m", "mass": "kg", "force": "N", "stiffness": "N/m or N*m/rad",
    "damping": "N*s/m or N*m*s/rad", "area": "m^2", "second_moment": "m^4",
    "angle": "rad",
}


def model_to_json(model):
    """Serialize a model to a schema-versioned JSON document string."""
    doc = {
        "schema": MODEL_SCHEMA_VERSION,
        "units": _MODEL_UNITS,
        "kind": model.kind,
        "pretension": model.pretension,
        "damping_mode": model.damping_mode,
        "nodes": [
            {"position": list(map(float, p)), "mass": float(m), "role": r}
            for p, m, r in zip(model.positions, model.masses, model.roles)
        ],
        "elements": [
            {
                "kind": e.kind, "nodes": list(e.nodes),
                "spring_const": e.spring_const, "damping_const": e.damping_const,
                "rest_length": e.rest_length, "rest_angle": e.rest_angle,
                "cross_section_area": e.cross_section_area,
                "second_moment_area": e.second_moment_area,
                "outer_radius": e.outer_radius,
            }
            for e in model.elements
        ],
        "faces": [list(f) for f in model.faces],
        "face_normals": [list(map(float, n)) for n in model.face_normals],
        "quad_node_ids": list(model.quad_node_ids),
        "frame_axes": [list(map(float, row)) for row in model.frame_axes],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text):
    doc = json.loads(text)
    if doc.get("schema") != MODEL_SCHEMA_VERSION:
        raise InvalidConfigError(
            f"unsupported model schema {doc.get('schema')!r}")
    elements = tuple(
        ElementSpec(
            kind=e["kind"], nodes=tuple(e["nodes"]),
            spring_const=e["spring_const"], damping_const=e["damping_const"],
            rest_length=e["rest_length"], rest_angle=e["rest_angle"],
            cross_section_area=e["cross_section_area"],
            second_moment_area=e["second_moment_area"],
            outer_radius=e["outer_radius"])
        for e in doc["elements"])
    return StructureModel(
        kind=doc["kind"],
        positions=np.array([n["position"] for n in doc["nodes"]]),
        masses=np.array([n["mass"] for n in doc["nodes"]]),
        roles=tuple(n["role"] for n in doc["nodes"]),
        elements=elements,
        faces=tuple(tuple(f) for f in doc["faces"]),
        face_normals=np.array(doc["face_normals"]).reshape(-1, 3),
        quad_node_ids=tuple(doc["quad_node_ids"]),
        frame_axes=np.array(doc["frame_axes"]),
        pretension=doc.get("pretension", 0.0),
        damping_mode=doc.get("damping_mode", "fixed"),
    )
