"""Reference configurations used by the CLI, the scripts and the test suite.

The comparison-study presets mirror the key-parameter table of the
desk-scale study (carbon rods, nylon strings, 63 mm propellers, 5 m/s into
a 4.7e7 N/m wall). The re-orientation presets describe an
experimental-style 300 g vehicle (95 g shell on 20 cm rods, 2.8 N peak
thrust per motor, bi-directional ESCs). Quantities the source hardware does
not pin down (motor placement along the rods, propeller drag-torque
coefficient, reverse-thrust limit) are set here to values that give the
vehicle enough authority to re-orient from every face on a mu = 0.2 floor;
they are ordinary configuration, not measured data.
"""

from .model import build_icosahedron
from .montecarlo import (
    TABLE_ROD,
    TABLE_STRING,
    GuardBuildSpec,
    SimOptions,
    StudyConfig,
    TensegrityBuildSpec,
)
from .reorient import ControllerGains, default_goal_faces, vehicle_from_model

DEFAULT_MU = 0.2
DEFAULT_PIVOT_DURATION = 1.2     # [s]
DEFAULT_CONTROL_RATE = 500.0     # [Hz]

REORIENT_ROD_LENGTH = 0.2        # [m]
REORIENT_SHELL_MASS = 0.095      # [kg]
REORIENT_QUAD_MASS = 0.205       # [kg]
REORIENT_QUAD_OFFSET = 0.40      # fraction of rod length from rod center
REORIENT_TORQUE_COEFF = 0.025    # [m]
REORIENT_F_MAX = 2.8             # [N]


def comparison_study_config(n_samples=200, seed=0, workers=1):
    """Desk-scale tensegrity vs propeller-guard comparison configuration."""
    return StudyConfig(
        n_samples=n_samples,
        seed=seed,
        speed=5.0,
        wall_stiffness=4.7e7,
        tensegrity=TensegrityBuildSpec(),
        guard=GuardBuildSpec(),
        sim=SimOptions(),
        workers=workers,
    )


def reorientation_model():
    """Shell model of the experimental-style re-orientation vehicle."""
    return build_icosahedron(
        REORIENT_ROD_LENGTH, TABLE_ROD, TABLE_STRING,
        REORIENT_SHELL_MASS, REORIENT_QUAD_MASS, 20.0,
        pretension=20.0, quad_offset=REORIENT_QUAD_OFFSET)


def reorientation_vehicle(model=None):
    if model is None:
        model = reorientation_model()
    return vehicle_from_model(model, f_max=REORIENT_F_MAX,
                              torque_coeff=REORIENT_TORQUE_COEFF)


def reorientation_setup():
    """(model, vehicle, goal_faces) triple with the default mount."""
    model = reorientation_model()
    vehicle = reorientation_vehicle(model)
    return model, vehicle, default_goal_faces(model, vehicle)


def default_gains():
    return ControllerGains()
