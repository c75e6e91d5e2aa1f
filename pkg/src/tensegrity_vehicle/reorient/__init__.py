"""Ground re-orientation stack: rotation specs, feasibility, planning,
trajectories, tracking control, thrust allocation and the pivot simulation."""

from .allocation import (
    ErrorRateMap,
    ThrustAllocation,
    box_least_squares,
    convert_pinv_clamp,
    convert_zero_sum_clamp,
    converter_error_map,
    thrust_torque_map,
    torque_to_thrust,
)
from .control import ControllerGains, tracking_step
from .feasibility import (
    FeasibilityWitness,
    check_rotation_feasibility,
    edge_payload_capacity,
    verify_witness,
)
from .graph import (
    FaceGraph,
    PayloadMargin,
    ReorientPlan,
    build_face_graph,
    payload_margin,
    plan_paths,
)
from .pivot import NoiseConfig, PivotTrace, pivot_trace_to_csv, simulate_pivot
from .rotations import (
    RotationSpec,
    body_geometry,
    default_goal_faces,
    face_adjacency,
    rotation_spec,
    thrust_axis_in_shell,
    vehicle_from_model,
)
from .trajectory import TrajectoryRef, reference_trajectory, start_attitude

__all__ = [name for name in dir() if not name.startswith("_")]
