"""Stress histories and component design checks for collision traces.

Axial stresses are force over section area; joint bending stress is the
surface stress M*r/I of the rod section under the joint moment; the combined
joint stress adds the worst incident axial rod stress at each instant.
Design verdicts compare factored stresses against yield (strings, joints)
and against the smaller of yield and Euler buckling (rods), all as strict
inequalities.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import CompiledForces
from .exceptions import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class DesignLimits:
    """Safety factors, strength limits and the exposure distance threshold."""

    eta_string: float = 1.5
    eta_rod: float = 1.5
    sigma_string_yield: float = 9.0e8   # [Pa]
    sigma_rod_yield: float = 1.2e9      # [Pa]
    exposure_threshold: float = 0.0     # [m]; 0 skips the exposure criterion

    def __post_init__(self):
        if self.eta_string < 1.0 or self.eta_rod < 1.0:
            raise InvalidConfigError("safety factors must be >= 1")
        if self.sigma_string_yield <= 0.0 or self.sigma_rod_yield <= 0.0:
            raise InvalidConfigError("yield strengths must be positive")
        if self.exposure_threshold < 0.0:
            raise InvalidConfigError("exposure threshold must be non-negative")


@dataclass
class StressTrace:
    """Stress time histories per element category.

    ``string_stress`` and ``rod_stress`` align with the string / rod entries
    of ``model.axial_elements()``; joint arrays align with
    ``model.joint_elements()``. Rod stress is signed with compression
    positive; string stress is non-negative by the slack rule.
    """

    times: np.ndarray
    string_stress: np.ndarray     # (k, n_strings) [Pa]
    rod_stress: np.ndarray        # (k, n_rods) [Pa]
    joint_bending: np.ndarray     # (k, n_joints) [Pa]
    joint_combined: np.ndarray    # (k, n_joints) [Pa]
    string_ids: tuple
    rod_ids: tuple

    def peak(self, which):
        """(value, time, element_column) of the maximum of one category."""
        arr = getattr(self, which)
        if arr.size == 0:
            return 0.0, 0.0, -1
        flat = int(np.argmax(arr))
        row, col = np.unravel_index(flat, arr.shape)
        return float(arr[row, col]), float(self.times[row]), int(col)

    def max_stress(self):
        """Largest stress across strings, rods and combined joint stress."""
        candidates = [0.0]
        for arr in (self.string_stress, self.rod_stress, self.joint_combined):
            if arr.size:
                candidates.append(float(arr.max()))
        return max(candidates)


def extract_stresses(model, trace):
    """Evaluate the stress histories of a simulated trace."""
    if trace.positions.shape[1] != model.n_nodes:
        raise InvalidInputError("trace node count does not match the model")
    ev = CompiledForces(model)
    axial = model.axial_elements()
    joints = model.joint_elements()
    string_cols = [idx for idx, e in enumerate(axial) if e.kind == "string"]
    rod_cols = [idx for idx, e in enumerate(axial) if e.kind == "rod"]
    areas = np.array([e.cross_section_area for e in axial])
    j_ratio = np.array([e.outer_radius / e.second_moment_area for e in joints]) \
        if joints else np.zeros(0)

    # map each joint to the incident rod columns at its hinge node
    incident = []
    for e in joints:
        hinge = e.nodes[1]
        cols = [rod_cols.index(idx) for idx in rod_cols
                if hinge in axial[idx].nodes]
        incident.append(cols)

    # material stresses come from the elastic member forces alone: axial
    # stress is the spring force over the area, bending stress the spring
    # moment at the rod surface (damper terms model dissipation, not load)
    k = trace.times.size
    s_stress = np.zeros((k, len(string_cols)))
    r_stress = np.zeros((k, len(rod_cols)))
    b_stress = np.zeros((k, len(joints)))
    c_stress = np.zeros((k, len(joints)))
    for row in range(k):
        x = trace.positions[row]
        _, _, tension, compression, _ = ev.axial_state(x)
        s_stress[row] = tension[string_cols] / areas[string_cols]
        r_stress[row] = compression[rod_cols] / areas[rod_cols]
        if joints:
            _, _, moment, _ = ev.joint_state(x)
            b_stress[row] = np.abs(moment) * j_ratio
            for jn, cols in enumerate(incident):
                c_stress[row, jn] = b_stress[row, jn] + r_stress[row, cols].max()
    return StressTrace(
        times=trace.times.copy(),
        string_stress=s_stress,
        rod_stress=r_stress,
        joint_bending=b_stress,
        joint_combined=c_stress,
        string_ids=tuple(axial[i].nodes for i in string_cols),
        rod_ids=tuple(axial[i].nodes for i in rod_cols),
    )


def buckling_strength(rod_element):
    """Euler critical buckling stress pi^2 E I / (A L^2) of one rod segment."""
    if rod_element.kind != "rod":
        raise InvalidInputError("buckling strength is defined for rods")
    area = rod_element.cross_section_area
    length = rod_element.rest_length
    if area <= 0.0 or length <= 0.0 or rod_element.second_moment_area <= 0.0:
        raise InvalidInputError("rod element needs positive geometric fields")
    modulus = rod_element.spring_const * length / area
    return np.pi**2 * modulus * rod_element.second_moment_area / (area * length**2)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    margin: float            # limit / factored demand; > 1 passes
    worst_value: float       # worst factored demand [Pa] or distance [m]
    limit: float
    worst_element: str = ""
    worst_time: float = 0.0


@dataclass
class DesignReport:
    criteria: list
    overall_pass: bool
    exposure_min_distance: float | None = None

    def to_json(self):
        doc = {
            "overall_pass": self.overall_pass,
            "exposure_min_distance_m": self.exposure_min_distance,
            "criteria": [vars(c) for c in self.criteria],
            "units": {"stress": "Pa", "distance": "m"},
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_table(self):
        rows = [f"{'criterion':<22} {'pass':<6} {'margin':>10} {'worst':>14} "
                f"{'limit':>14}  worst element / time"]
        for c in self.criteria:
            margin = "inf" if np.isinf(c.margin) else f"{c.margin:10.3f}"
            rows.append(f"{c.name:<22} {str(c.passed):<6} {margin:>10} "
                        f"{c.worst_value:14.6g} {c.limit:14.6g}  "
                        f"{c.worst_element} @ {c.worst_time * 1e3:.3f} ms")
        rows.append(f"overall: {'PASS' if self.overall_pass else 'FAIL'}")
        return "\n".join(rows)


def _stress_criterion(name, times, arr, factor, limits_per_col, ids):
    """Strict check: factor * stress < limit, worst case over time/columns."""
    if arr.size == 0:
        return CriterionResult(name, True, np.inf, 0.0,
                               float(np.min(limits_per_col)) if np.size(limits_per_col) else 0.0)
    demand = factor * arr
    ratio = demand / np.asarray(limits_per_col)[None, :]
    flat = int(np.argmax(ratio))
    row, col = np.unravel_index(flat, ratio.shape)
    worst = float(demand[row, col])
    limit = float(np.asarray(limits_per_col)[col])
    margin = np.inf if worst <= 0.0 else limit / worst
    return CriterionResult(
        name=name, passed=bool(worst < limit), margin=float(margin),
        worst_value=worst, limit=limit,
        worst_element=str(ids[col]) if ids else "", worst_time=float(times[row]))


def design_check(stress, limits, model, trace=None):
    """Evaluate all design criteria on a stress trace.

    The exposure criterion (quadcopter nodes keeping a minimum distance from
    the deforming shell surface) needs the node-state ``trace`` and a model
    with face topology; it is skipped when either is missing or the
    threshold is zero.
    """
    axial = model.axial_elements()
    rods = [e for e in axial if e.kind == "rod"]
    criteria = [
        _stress_criterion("string-yield", stress.times, stress.string_stress,
                          limits.eta_string,
                          np.full(max(stress.string_stress.shape[1], 1),
                                  limits.sigma_string_yield),
                          stress.string_ids),
        _stress_criterion("rod-axial", stress.times, stress.rod_stress,
                          limits.eta_rod,
                          np.array([min(limits.sigma_rod_yield, buckling_strength(e))
                                    for e in rods]) if rods else np.zeros(0),
                          stress.rod_ids),
        _stress_criterion("joint-combined", stress.times, stress.joint_combined,
                          limits.eta_rod,
                          np.full(max(stress.joint_combined.shape[1], 1),
                                  limits.sigma_rod_yield),
                          tuple(e.nodes for e in model.joint_elements())),
    ]
    exposure_min = None
    if trace is not None and model.faces and limits.exposure_threshold > 0.0:
        exposure_min = exposure_min_distance(model, trace)
        criteria.append(CriterionResult(
            name="exposure", passed=bool(exposure_min > limits.exposure_threshold),
            margin=float(exposure_min / limits.exposure_threshold),
            worst_value=float(exposure_min), limit=limits.exposure_threshold))
    return DesignReport(
        criteria=criteria,
        overall_pass=all(c.passed for c in criteria),
        exposure_min_distance=exposure_min,
    )


def exposure_min_distance(model, trace):
    """Minimum distance from any quadcopter node to the deformed shell.

    The shell surface is the set of instantaneous face triangles spanned by
    the shell nodes at each sample.
    """
    faces = np.array(model.faces, dtype=int)
    quads = np.array(model.quad_node_ids, dtype=int)
    best = np.inf
    for pos in trace.positions:
        tri_a = pos[faces[:, 0]]
        tri_b = pos[faces[:, 1]]
        tri_c = pos[faces[:, 2]]
        for q in quads:
            d = point_triangle_distances(pos[q], tri_a, tri_b, tri_c).min()
            best = min(best, float(d))
    return best


def point_triangle_distances(point, tri_a, tri_b, tri_c):
    """Distances from one point to a batch of triangles (closest-point test)."""
    p = np.asarray(point, dtype=float)
    ab = tri_b - tri_a
    ac = tri_c - tri_a
    ap = p - tri_a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - tri_b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - tri_c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    closest = np.empty_like(tri_a)
    done = np.zeros(tri_a.shape[0], dtype=bool)

    def assign(mask, value):
        use = mask & ~done
        closest[use] = value[use] if value.ndim == 2 else value
        done[use] = True

    assign((d1 <= 0) & (d2 <= 0), tri_a)                       # vertex A
    assign((d3 >= 0) & (d4 <= d3), tri_b)                      # vertex B
    assign((d6 >= 0) & (d5 <= d6), tri_c)                      # vertex C
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), tri_a + v_ab[:, None] * ab)
    vb = d5 * d2 - d1 * d6
    with np.errstate(divide="ignore", invalid="ignore"):
        w_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), tri_a + w_ac[:, None] * ac)
    va = d3 * d6 - d5 * d4
    with np.errstate(divide="ignore", invalid="ignore"):
        w_bc = np.where((d4 - d3) + (d5 - d6) != 0,
                        (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0)
    assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
           tri_b + w_bc[:, None] * (tri_c - tri_b))
    denom = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
    interior = tri_a + v[:, None] * ab + w[:, None] * ac
    assign(np.ones_like(done), interior)
    return np.linalg.norm(closest - p[None, :], axis=1)
