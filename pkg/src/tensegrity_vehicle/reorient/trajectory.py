"""Bang-bang reference trajectory for one face-to-face rotation.

The reference accelerates at constant magnitude for the first half of the
duration and decelerates for the second half, so the acceleration magnitude
is fixed by the total angle and duration alone: 4 * angle / duration^2.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidConfigError
from ..rotationmath import minimal_rotation_between, rotvec_to_matrix
from .rotations import body_geometry


@dataclass(frozen=True)
class TrajectoryRef:
    duration: float            # [s]
    angle: float               # total rotation angle [rad]
    axis: np.ndarray           # body-frame roll axis (unit)
    start_rotation: np.ndarray  # R_s, body -> world at trajectory start

    def __post_init__(self):
        self.axis.setflags(write=False)
        self.start_rotation.setflags(write=False)

    @property
    def accel_magnitude(self):
        return 4.0 * self.angle / self.duration**2

    def scalars(self, t):
        """(theta, theta_dot, theta_ddot) of the profile at time t."""
        a = self.accel_magnitude
        half = self.duration / 2.0
        if t <= 0.0:
            return 0.0, 0.0, a if self.angle > 0.0 else 0.0
        if t < half:
            return 0.5 * a * t**2, a * t, a
        if t < self.duration:
            remain = self.duration - t
            return self.angle - 0.5 * a * remain**2, a * remain, -a
        return self.angle, 0.0, 0.0

    def state(self, t):
        """Reference rotation vector, rate, acceleration and attitude at t."""
        theta, theta_dot, theta_ddot = self.scalars(t)
        vec = theta * self.axis
        return (vec, theta_dot * self.axis, theta_ddot * self.axis,
                self.start_rotation @ rotvec_to_matrix(vec))


def start_attitude(spec, vehicle):
    """Body-to-world attitude while resting on the start face.

    Chosen as the minimal rotation taking the body-frame ground normal to
    the world vertical; any rotation about the vertical would do equally.
    """
    up_body = body_geometry(spec, vehicle)["ground_normal"]
    return minimal_rotation_between(up_body, np.array([0.0, 0.0, 1.0]))


def reference_trajectory(spec, duration, vehicle, start_rotation=None):
    """Bang-bang trajectory rolling the vehicle from spec.from_face to to_face."""
    if duration <= 0.0:
        raise InvalidConfigError("trajectory duration must be positive")
    if start_rotation is None:
        start_rotation = start_attitude(spec, vehicle)
    axis = body_geometry(spec, vehicle)["roll_axis"]
    return TrajectoryRef(
        duration=float(duration),
        angle=float(spec.angle),
        axis=axis,
        start_rotation=np.asarray(start_rotation, dtype=float),
    )
