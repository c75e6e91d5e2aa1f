"""Quasi-static feasibility of one face-to-face rotation.

A rotation is feasible when thrusts and two contact reactions exist that
balance all forces and the moments about the rotation point at the instant
the third contact leaves the ground, while the reactions stay inside the
friction cone with non-negative normal components and every thrust stays in
its box. The friction cone is replaced by an inscribed polyhedral cone, so a
reported witness always satisfies the exact cone as well.

The same linear program, extended with a payload variable added at the
center of mass, yields the largest extra mass an edge can carry.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..exceptions import SolverError
from ..rotationmath import any_perpendicular, skew
from .allocation import thrust_torque_map
from .rotations import body_geometry

PAYLOAD_CAP = 10.0  # [kg] upper bound on the payload variable

_LP_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class FeasibilityWitness:
    feasible: bool
    thrusts: np.ndarray | None       # (4,) [N]
    reactions: np.ndarray | None     # (2, 3) [N], body frame
    payload: float = 0.0             # [kg] extra mass at the COM


def _cone_facets(ground_normal, mu, n_facets):
    """Half-space rows of the inscribed polyhedral friction cone.

    Rows g satisfy: the exact cone constraint holds whenever g . r <= 0 for
    all rows (inner approximation by the inscribed regular polygon).
    """
    t1 = any_perpendicular(ground_normal)
    t2 = np.cross(ground_normal, t1)
    shrink = np.cos(np.pi / n_facets)
    rows = []
    for k in range(n_facets):
        phi = (2 * k + 1) * np.pi / n_facets
        rows.append(np.cos(phi) * t1 + np.sin(phi) * t2
                    - mu * shrink * ground_normal)
    return np.array(rows)


def _assemble(spec, vehicle, mu, n_facets, zero_thrust_sum, payload):
    """Equality/inequality blocks of the feasibility LP.

    Variables: [f1..f4, r1(3), r2(3)] plus a trailing payload column when
    ``payload`` is 'max' (bounded variable) rather than a fixed float.
    """
    geo = body_geometry(spec, vehicle)
    n_r = geo["rotation_point"]
    v_a = geo["ground_normal"]
    contacts = geo["contact_points"]
    e_z = np.array([0.0, 0.0, 1.0])
    mass = vehicle.total_mass
    grav = vehicle.gravity
    torque_map = thrust_torque_map(vehicle, about_point=n_r)  # (3, 4)

    n_var = 11 if payload == "max" else 10
    a_eq = np.zeros((6 + (1 if zero_thrust_sum else 0), n_var))
    b_eq = np.zeros(a_eq.shape[0])

    # force balance: e_z sum(f) + r1 + r2 - m_add g v_a = m g v_a
    a_eq[0:3, 0:4] = e_z[:, None]
    a_eq[0:3, 4:7] = np.eye(3)
    a_eq[0:3, 7:10] = np.eye(3)
    b_eq[0:3] = mass * grav * v_a

    # moments about n_r: sum f_i m_ri + S(p_j - n_r) r_j + m_add g S(n_r) v_a
    #                    = -m g S(n_r) v_a
    a_eq[3:6, 0:4] = torque_map
    a_eq[3:6, 4:7] = skew(contacts[0] - n_r)
    a_eq[3:6, 7:10] = skew(contacts[1] - n_r)
    b_eq[3:6] = -mass * grav * (skew(n_r) @ v_a)

    if payload == "max":
        a_eq[0:3, 10] = -grav * v_a
        a_eq[3:6, 10] = grav * (skew(n_r) @ v_a)
    elif payload:
        b_eq[0:3] += payload * grav * v_a
        b_eq[3:6] += -payload * grav * (skew(n_r) @ v_a)

    if zero_thrust_sum:
        a_eq[6, 0:4] = 1.0

    rows = [np.zeros((0, n_var))]
    for j, col in enumerate((4, 7)):
        block = np.zeros((1, n_var))
        block[0, col:col + 3] = -v_a   # normal component must be >= 0
        rows.append(block)
        if np.isfinite(mu):
            facets = _cone_facets(v_a, mu, n_facets)
            block = np.zeros((facets.shape[0], n_var))
            block[:, col:col + 3] = facets
            rows.append(block)
    a_ub = np.vstack(rows)
    b_ub = np.zeros(a_ub.shape[0])

    bounds = [(vehicle.f_min, vehicle.f_max)] * 4 + [(None, None)] * 6
    if payload == "max":
        bounds.append((0.0, PAYLOAD_CAP))
    return a_eq, b_eq, a_ub, b_ub, bounds


def _solve(spec, vehicle, mu, n_facets, zero_thrust_sum, payload):
    a_eq, b_eq, a_ub, b_ub, bounds = _assemble(
        spec, vehicle, mu, n_facets, zero_thrust_sum, payload)
    cost = np.zeros(len(bounds))
    if payload == "max":
        cost[-1] = -1.0
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs", options=_LP_OPTIONS)
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverError(f"feasibility LP failed (status {res.status}): "
                          f"{res.message}")
    return res.x


def check_rotation_feasibility(spec, vehicle, mu, n_facets=16,
                               zero_thrust_sum=False, payload=0.0):
    """Decide feasibility and return a witness (thrusts, reactions)."""
    if mu < 0.0:
        raise SolverError("friction coefficient must be non-negative")
    x = _solve(spec, vehicle, mu, n_facets, zero_thrust_sum, payload)
    if x is None:
        return FeasibilityWitness(feasible=False, thrusts=None, reactions=None)
    return FeasibilityWitness(
        feasible=True,
        thrusts=x[0:4].copy(),
        reactions=x[4:10].reshape(2, 3).copy(),
        payload=float(payload) if payload != "max" else 0.0,
    )


def edge_payload_capacity(spec, vehicle, mu, n_facets=16,
                          zero_thrust_sum=False):
    """Largest extra COM mass for which the rotation stays feasible.

    Returns None when the rotation is infeasible for the bare vehicle.
    """
    base = _solve(spec, vehicle, mu, n_facets, zero_thrust_sum, 0.0)
    if base is None:
        return None
    x = _solve(spec, vehicle, mu, n_facets, zero_thrust_sum, "max")
    if x is None:
        return 0.0
    return float(x[-1])


def verify_witness(spec, vehicle, mu, witness, payload=0.0, tol=1e-8):
    """Substitute a witness into the exact balance and cone conditions.

    Returns a residual report; ``ok`` is true when the force and moment
    residuals are below ``tol`` [N, N m] and every inequality holds with at
    most ``tol`` violation against the exact (quadratic) friction cone.
    """
    geo = body_geometry(spec, vehicle)
    n_r = geo["rotation_point"]
    v_a = geo["ground_normal"]
    contacts = geo["contact_points"]
    e_z = np.array([0.0, 0.0, 1.0])
    mass = vehicle.total_mass + payload
    weight = -mass * vehicle.gravity * v_a
    f = witness.thrusts
    r = witness.reactions

    force_residual = e_z * f.sum() + r.sum(axis=0) + weight
    torque_map = thrust_torque_map(vehicle, about_point=n_r)
    moment_residual = (torque_map @ f
                       + skew(contacts[0] - n_r) @ r[0]
                       + skew(contacts[1] - n_r) @ r[1]
                       - skew(n_r) @ weight)
    normals = r @ v_a
    tangentials = np.linalg.norm(r - np.outer(normals, v_a), axis=1)
    if np.isfinite(mu):
        cone_slack = mu * normals - tangentials
    else:
        cone_slack = np.full(2, np.inf)
    box_slack = min(float((f - vehicle.f_min).min()),
                    float((vehicle.f_max - f).min()))
    ok = (np.abs(force_residual).max() < tol
          and np.abs(moment_residual).max() < tol
          and normals.min() > -tol
          and cone_slack.min() > -tol
          and box_slack > -tol)
    return {
        "ok": bool(ok),
        "force_residual": float(np.abs(force_residual).max()),
        "moment_residual": float(np.abs(moment_residual).max()),
        "min_normal": float(normals.min()),
        "min_cone_slack": float(min(cone_slack.min(), np.inf)),
        "min_box_slack": box_slack,
    }
