"""Closed-loop simulation of one rotation about the contact edge.

The vehicle is a rigid body hinged on the shared contact edge, leaving one
rotational degree of freedom about the roll axis. The tracking controller
runs at a fixed rate with zero-order-hold thrusts; the hinge dynamics
integrate between ticks with classical Runge-Kutta substeps.

Thrust allocation on the ground differs from flight: the two edge contacts
supply whatever transverse moments they can, but only within the friction
cone and without pulling. The default allocator therefore solves, each tick,
for thrusts and admissible reactions that realize the desired hinge-axis
acceleration exactly (minimizing total |thrust|), which generalizes the
static feasibility witness to nonzero commanded acceleration. The
torque-converter allocator (minimum-norm / least-error on the full torque
command) is available as an alternative and as a per-tick fallback; ticks
whose thrusts admit no in-cone reactions are flagged as lift-off / slip
warnings rather than stopping the run.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..rotationmath import rotvec_to_matrix, skew
from .allocation import thrust_torque_map, torque_to_thrust
from .control import desired_acceleration, tracking_step
from .feasibility import _LP_OPTIONS, _cone_facets
from .rotations import body_geometry


@dataclass(frozen=True)
class NoiseConfig:
    gyro_std: float = 0.0        # [rad/s]
    attitude_std: float = 0.0    # [rad]
    seed: int = 0


@dataclass
class PivotTrace:
    times: np.ndarray
    angle: np.ndarray            # hinge angle theta [rad]
    rate: np.ndarray             # theta_dot [rad/s]
    thrusts: np.ndarray          # (k, 4) [N]
    reactions: np.ndarray        # (k, 2, 3) body frame [N]
    desired_torque: np.ndarray   # (k, 3) [N m], full tracking command
    target_angle: float
    liftoff_warnings: list = field(default_factory=list)
    slip_warnings: list = field(default_factory=list)
    fallback_ticks: int = 0      # ticks served by the torque converter
    reached_target: bool = False

    @property
    def final_angle_error(self):
        return abs(self.angle[-1] - self.target_angle)


class _HingeModel:
    """Per-edge constants of the hinged rigid body."""

    def __init__(self, spec, vehicle, traj, mu, n_facets):
        geo = body_geometry(spec, vehicle)
        self.axis = geo["roll_axis"]
        self.n_r = geo["rotation_point"]
        self.contacts = geo["contact_points"]
        self.r_start = traj.start_rotation
        self.mass = vehicle.total_mass
        self.gravity = vehicle.gravity
        self.j_r = vehicle.inertia_about(self.n_r)
        self.j_axis = float(self.axis @ self.j_r @ self.axis)
        self.m_map = thrust_torque_map(vehicle, about_point=self.n_r)
        self.q_com = -self.n_r
        self.mu = mu
        self.n_facets = n_facets
        self.f_min = vehicle.f_min
        self.f_max = vehicle.f_max
        self.weight_world = np.array([0.0, 0.0, -self.mass * self.gravity])
        self.lever1 = skew(self.contacts[0] - self.n_r)
        self.lever2 = skew(self.contacts[1] - self.n_r)

    def attitude(self, theta):
        return self.r_start @ rotvec_to_matrix(theta * self.axis)

    def weight_body(self, theta):
        return self.attitude(theta).T @ self.weight_world

    def gravity_axis_torque(self, theta):
        return float(self.axis @ np.cross(self.q_com, self.weight_body(theta)))

    def hinge_accel(self, theta, thrust_axis_torque):
        return (thrust_axis_torque + self.gravity_axis_torque(theta)) / self.j_axis

    def balance_rhs(self, theta, theta_dot, theta_ddot, thrusts_sum, m_f):
        """Force and moment balance right-hand sides for the reactions."""
        w_b = self.weight_body(theta)
        omega = theta_dot * self.axis
        a_com = theta_ddot * np.cross(self.axis, self.q_com) \
            + np.cross(omega, np.cross(omega, self.q_com))
        e_z = np.array([0.0, 0.0, 1.0])
        force = self.mass * a_com - w_b - e_z * thrusts_sum
        moment = (self.j_r @ (theta_ddot * self.axis)
                  + np.cross(omega, self.j_r @ omega)
                  - m_f - np.cross(self.q_com, w_b))
        return force, moment


def _allocate_contact_aware(hinge, theta, theta_dot, accel_desired,
                            thrust_weight=1e-4):
    """Thrusts and in-cone reactions tracking the axis acceleration demand.

    The hinge supplies the transverse moment components through the
    reactions, so only the hinge-axis acceleration is demanded of the
    thrusts. Contact constraints are hard; the acceleration demand is soft:
    the LP realizes the achievable acceleration closest to the demand and,
    among those, the smallest total |thrust|. Returns (thrusts, reactions,
    realized acceleration) or None when even the relaxed problem fails.
    """
    up = hinge.attitude(theta).T @ np.array([0.0, 0.0, 1.0])
    w_b = hinge.weight_body(theta)
    omega = theta_dot * hinge.axis
    centripetal = np.cross(omega, np.cross(omega, hinge.q_com))
    e_z = np.array([0.0, 0.0, 1.0])

    # variables: f(4), r1(3), r2(3), |f| slacks(4), alpha, |alpha - demand|
    n_var = 16
    a_eq = np.zeros((6, n_var))
    a_eq[0:3, 0:4] = e_z[:, None]
    a_eq[0:3, 4:7] = np.eye(3)
    a_eq[0:3, 7:10] = np.eye(3)
    a_eq[0:3, 14] = -hinge.mass * np.cross(hinge.axis, hinge.q_com)
    a_eq[3:6, 0:4] = hinge.m_map
    a_eq[3:6, 4:7] = hinge.lever1
    a_eq[3:6, 7:10] = hinge.lever2
    a_eq[3:6, 14] = -(hinge.j_r @ hinge.axis)
    b_eq = np.concatenate([
        hinge.mass * centripetal - w_b,
        np.cross(omega, hinge.j_r @ omega) - np.cross(hinge.q_com, w_b),
    ])

    rows, rhs = [], []
    for col in (4, 7):
        row = np.zeros(n_var)
        row[col:col + 3] = -up
        rows.append(row)
        rhs.append(0.0)
        if np.isfinite(hinge.mu):
            for facet in _cone_facets(up, hinge.mu, hinge.n_facets):
                row = np.zeros(n_var)
                row[col:col + 3] = facet
                rows.append(row)
                rhs.append(0.0)
    for i in range(4):   # |f_i| <= s_i
        row = np.zeros(n_var)
        row[i], row[10 + i] = 1.0, -1.0
        rows.append(row)
        rhs.append(0.0)
        row = np.zeros(n_var)
        row[i], row[10 + i] = -1.0, -1.0
        rows.append(row)
        rhs.append(0.0)
    row = np.zeros(n_var)   # alpha - e <= demand
    row[14], row[15] = 1.0, -1.0
    rows.append(row)
    rhs.append(accel_desired)
    row = np.zeros(n_var)   # -alpha - e <= -demand
    row[14], row[15] = -1.0, -1.0
    rows.append(row)
    rhs.append(-accel_desired)

    cost = np.zeros(n_var)
    cost[15] = 1.0
    cost[10:14] = thrust_weight
    bounds = [(hinge.f_min, hinge.f_max)] * 4 + [(None, None)] * 6 \
        + [(0.0, None)] * 4 + [(None, None), (0.0, None)]
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs),
                  A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs",
                  options=_LP_OPTIONS)
    if res.status != 0:
        return None
    return res.x[0:4].copy(), res.x[4:10].reshape(2, 3).copy(), float(res.x[14])


def _admissible_reactions(hinge, theta, theta_dot, theta_ddot, thrusts):
    """In-cone reactions balancing the given thrusts, or None."""
    up = hinge.attitude(theta).T @ np.array([0.0, 0.0, 1.0])
    m_f = hinge.m_map @ thrusts
    force_rhs, moment_rhs = hinge.balance_rhs(
        theta, theta_dot, theta_ddot, float(thrusts.sum()), m_f)
    a_eq = np.zeros((6, 6))
    a_eq[0:3, 0:3] = np.eye(3)
    a_eq[0:3, 3:6] = np.eye(3)
    a_eq[3:6, 0:3] = hinge.lever1
    a_eq[3:6, 3:6] = hinge.lever2
    b_eq = np.concatenate([force_rhs, moment_rhs])
    rows, rhs = [], []
    for col in (0, 3):
        row = np.zeros(6)
        row[col:col + 3] = -up
        rows.append(row)
        rhs.append(0.0)
        if np.isfinite(hinge.mu):
            for facet in _cone_facets(up, hinge.mu, hinge.n_facets):
                row = np.zeros(6)
                row[col:col + 3] = facet
                rows.append(row)
                rhs.append(0.0)
    res = linprog(np.zeros(6), A_ub=np.array(rows), b_ub=np.array(rhs),
                  A_eq=a_eq, b_eq=b_eq,
                  bounds=[(None, None)] * 6, method="highs",
                  options=_LP_OPTIONS)
    if res.status != 0:
        return None
    return res.x.reshape(2, 3).copy()


def _forced_reactions(hinge, theta, theta_dot, theta_ddot, thrusts):
    """Least-squares reactions of the balance, ignoring the cone."""
    m_f = hinge.m_map @ thrusts
    force_rhs, moment_rhs = hinge.balance_rhs(
        theta, theta_dot, theta_ddot, float(thrusts.sum()), m_f)
    a_mat = np.zeros((6, 6))
    a_mat[0:3, 0:3] = np.eye(3)
    a_mat[0:3, 3:6] = np.eye(3)
    a_mat[3:6, 0:3] = hinge.lever1
    a_mat[3:6, 3:6] = hinge.lever2
    sol, *_ = np.linalg.lstsq(a_mat, np.concatenate([force_rhs, moment_rhs]),
                              rcond=None)
    return sol.reshape(2, 3)


def simulate_pivot(spec, vehicle, traj, gains, mu=0.2, noise=None,
                   control_rate=500.0, t_end_factor=1.5, substeps=4,
                   n_facets=16, allocator="contact_aware", contact_tol=1e-6):
    """Run the closed-loop pivot and return the sampled trace.

    Terminates when the hinge angle reaches the rotation angle of ``spec``
    or at ``t_end_factor`` times the trajectory duration.
    """
    noise = noise or NoiseConfig()
    rng = np.random.default_rng(noise.seed)
    hinge = _HingeModel(spec, vehicle, traj, mu, n_facets)
    axis = hinge.axis

    dt = 1.0 / control_rate
    t_end = t_end_factor * traj.duration
    theta, theta_dot = 0.0, 0.0
    t = 0.0

    times, angles, rates = [], [], []
    thrusts_log, torque_log, reaction_log = [], [], []
    liftoff, slip = [], []
    fallback_ticks = 0
    reached = False

    while True:
        rot = hinge.attitude(theta)
        omega_meas = theta_dot * axis
        if noise.gyro_std:
            omega_meas = omega_meas + rng.normal(0.0, noise.gyro_std, 3)
        rot_meas = rot
        if noise.attitude_std:
            rot_meas = rot @ rotvec_to_matrix(rng.normal(0.0, noise.attitude_std, 3))
        tau_d = tracking_step(rot_meas, omega_meas, traj, t, gains, vehicle, spec)
        accel_d = float(axis @ desired_acceleration(rot_meas, omega_meas,
                                                    traj, t, gains))

        result = None
        if allocator == "contact_aware":
            result = _allocate_contact_aware(hinge, theta, theta_dot, accel_d)
        if result is not None:
            f, reactions, _ = result
        else:
            fallback_ticks += 1
            f = torque_to_thrust(tau_d, vehicle, about_point=hinge.n_r).thrusts
            thrust_axis_torque = float(axis @ (hinge.m_map @ f))
            theta_ddot = hinge.hinge_accel(theta, thrust_axis_torque)
            reactions = _admissible_reactions(hinge, theta, theta_dot,
                                              theta_ddot, f)
            if reactions is None:
                reactions = _forced_reactions(hinge, theta, theta_dot,
                                              theta_ddot, f)
                up = rot.T @ np.array([0.0, 0.0, 1.0])
                normals = reactions @ up
                tangentials = np.linalg.norm(
                    reactions - np.outer(normals, up), axis=1)
                scale = hinge.mass * hinge.gravity
                if normals.min() < -contact_tol * scale:
                    liftoff.append(t)
                if np.any(tangentials > mu * np.maximum(normals, 0.0)
                          + contact_tol * scale):
                    slip.append(t)

        thrust_axis_torque = float(axis @ (hinge.m_map @ f))

        times.append(t)
        angles.append(theta)
        rates.append(theta_dot)
        thrusts_log.append(f.copy())
        torque_log.append(tau_d.copy())
        reaction_log.append(reactions.copy())

        if theta >= spec.angle:
            reached = True
            break
        if t >= t_end:
            break

        # integrate the hinge DOF over one control period (thrusts held)
        h = dt / substeps
        for _ in range(substeps):
            k1v = hinge.hinge_accel(theta, thrust_axis_torque)
            k1x = theta_dot
            k2v = hinge.hinge_accel(theta + 0.5 * h * k1x, thrust_axis_torque)
            k2x = theta_dot + 0.5 * h * k1v
            k3v = hinge.hinge_accel(theta + 0.5 * h * k2x, thrust_axis_torque)
            k3x = theta_dot + 0.5 * h * k2v
            k4v = hinge.hinge_accel(theta + h * k3x, thrust_axis_torque)
            k4x = theta_dot + h * k3v
            theta += h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
            theta_dot += h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
        t += dt

    return PivotTrace(
        times=np.array(times),
        angle=np.array(angles),
        rate=np.array(rates),
        thrusts=np.array(thrusts_log),
        reactions=np.array(reaction_log),
        desired_torque=np.array(torque_log),
        target_angle=float(spec.angle),
        liftoff_warnings=liftoff,
        slip_warnings=slip,
        fallback_ticks=fallback_ticks,
        reached_target=reached,
    )


def pivot_trace_to_csv(trace):
    lines = ["time_s,theta_rad,theta_dot_rad_s,f1_n,f2_n,f3_n,f4_n,"
             "r1x_n,r1y_n,r1z_n,r2x_n,r2y_n,r2z_n"]
    for i, t in enumerate(trace.times):
        f = trace.thrusts[i]
        r = trace.reactions[i].ravel()
        vals = [t, trace.angle[i], trace.rate[i], *f, *r]
        lines.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"
