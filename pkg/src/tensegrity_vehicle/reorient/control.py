"""Attitude tracking controller for the ground rotation.

The controller closes the loop as a second-order system on the rotation
error and adds the feedforward reference acceleration; the torque command
combines the rigid-body terms about the rotation point with the gravity
offset torque.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidConfigError
from ..rotationmath import check_rotation, matrix_to_rotvec
from .rotations import body_geometry


@dataclass(frozen=True)
class ControllerGains:
    damping_ratio: float = 1.0
    natural_freq: float = 10.0   # [rad/s]

    def __post_init__(self):
        if self.damping_ratio <= 0.0 or self.natural_freq <= 0.0:
            raise InvalidConfigError("controller gains must be positive")


def attitude_error(rotation, rotation_ref):
    """Rotation vector (body frame) taking the attitude to the reference."""
    check_rotation(rotation)
    return matrix_to_rotvec(rotation.T @ rotation_ref)


def desired_acceleration(rotation, omega_meas, traj, t, gains):
    """Second-order error dynamics plus the reference feedforward."""
    _, omega_ref, alpha_ref, rot_ref = traj.state(t)
    delta = attitude_error(rotation, rot_ref)
    return (alpha_ref
            + 2.0 * gains.damping_ratio * gains.natural_freq * (omega_ref - omega_meas)
            + gains.natural_freq**2 * delta)


def gravity_torque(rotation, vehicle, rotation_point):
    """Torque of the vehicle weight about the rotation point, body frame."""
    weight_body = rotation.T @ np.array([0.0, 0.0, -vehicle.total_mass * vehicle.gravity])
    return np.cross(-rotation_point, weight_body)


def tracking_step(rotation, omega_meas, traj, t, gains, vehicle, spec):
    """Desired torque about the rotation point for one controller tick.

    rotation: current body-to-world attitude; omega_meas: rate measurement
    in the body frame. The command is the inertial torque for the desired
    angular acceleration plus the gyroscopic term, minus the gravity offset.
    """
    check_rotation(rotation)
    geo = body_geometry(spec, vehicle)
    n_r = geo["rotation_point"]
    alpha_d = desired_acceleration(rotation, omega_meas, traj, t, gains)
    j_r = vehicle.inertia_about(n_r)
    tau_g = gravity_torque(rotation, vehicle, n_r)
    return j_r @ alpha_d + np.cross(omega_meas, j_r @ omega_meas) - tau_g
