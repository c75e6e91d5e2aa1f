"""Random-orientation wall-collision comparison and scale study.

Each sample draws a direction uniformly on the unit sphere restricted to the
non-negative octant (the symmetry group of both vehicles), rotates the
vehicle so that direction faces the wall, simulates the impact for both the
tensegrity and the propeller-guard build, and records the peak structural
stress of each. The scale study repeats the comparison with all lengths
scaled linearly and all masses and forces cubically.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import CollisionScenario, ContactModel, run_collision
from .exceptions import InvalidConfigError, TensegrityError
from .model import (
    MaterialSpec,
    build_icosahedron,
    build_propeller_guard,
    min_enclosing_rod_length,
)
from .rotationmath import minimal_rotation_between
from .stress import extract_stresses

WALL_NORMAL = np.array([1.0, 0.0, 0.0])  # world frame; wall plane x = 0

TABLE_ROD = MaterialSpec(density=2000.0, youngs_modulus=3.2e10,
                         yield_strength=1.2e9)
TABLE_STRING = MaterialSpec(density=1150.0, youngs_modulus=4.1e9,
                            yield_strength=9.0e8)


def sample_octant_direction(rng):
    """Uniform direction on the non-negative octant of the unit sphere."""
    while True:
        v = rng.standard_normal(3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return np.abs(v) / norm


def orientation_from_direction(direction, wall_normal=WALL_NORMAL):
    """Minimal rotation mapping the body direction into the wall.

    The returned body-to-world rotation R satisfies
    ``R @ direction == -wall_normal``; when the direction already faces the
    wall it is the identity, and the antiparallel case rotates by pi about a
    deterministically chosen perpendicular axis.
    """
    return minimal_rotation_between(np.asarray(direction, dtype=float),
                                    -np.asarray(wall_normal, dtype=float))


@dataclass(frozen=True)
class TensegrityBuildSpec:
    """Inputs of the shell build; rod_length=None sizes the smallest enclosure."""

    prop_diameter: float = 0.063
    rod_length: float | None = None
    quad_offset: float = 0.25
    clearance: float = 0.0
    m_structure: float = 0.050
    m_quad: float = 0.250
    mass_ratio: float = 20.0
    pretension: float = 20.0
    rod_material: MaterialSpec = TABLE_ROD
    string_material: MaterialSpec = TABLE_STRING
    damping_mode: str = "fixed"
    axial_damping: float = 500.0
    joint_damping: float = 10.0

    def build(self):
        length = self.rod_length
        if length is None:
            length = min_enclosing_rod_length(self.prop_diameter,
                                              self.quad_offset, self.clearance)
        return build_icosahedron(
            length, self.rod_material, self.string_material,
            self.m_structure, self.m_quad, self.mass_ratio,
            pretension=self.pretension, quad_offset=self.quad_offset,
            damping_mode=self.damping_mode, axial_damping=self.axial_damping,
            joint_damping=self.joint_damping)

    def scaled(self, factor):
        return replace(
            self,
            prop_diameter=self.prop_diameter * factor,
            rod_length=None if self.rod_length is None else self.rod_length * factor,
            clearance=self.clearance * factor,
            m_structure=self.m_structure * factor**3,
            m_quad=self.m_quad * factor**3,
            pretension=self.pretension * factor**3,
        )


@dataclass(frozen=True)
class GuardBuildSpec:
    """Inputs of the propeller-guard build; arm_radius=None packs the props."""

    prop_diameter: float = 0.063
    arm_radius: float | None = None
    ring_segments: int = 16
    clearance: float = 0.0
    m_structure: float = 0.050
    m_quad: float = 0.250
    rod_material: MaterialSpec = TABLE_ROD
    damping_mode: str = "fixed"
    axial_damping: float = 500.0
    joint_damping: float = 10.0

    def build(self):
        arm = self.arm_radius
        if arm is None:
            # motors 90 deg apart: props just clear each other diagonally
            arm = self.prop_diameter / np.sqrt(2.0) * (1.0 + 1e-9)
        return build_propeller_guard(
            self.prop_diameter, arm, self.ring_segments,
            self.rod_material, self.m_structure, self.m_quad,
            clearance=self.clearance, damping_mode=self.damping_mode,
            axial_damping=self.axial_damping, joint_damping=self.joint_damping)

    def scaled(self, factor):
        return replace(
            self,
            prop_diameter=self.prop_diameter * factor,
            arm_radius=None if self.arm_radius is None else self.arm_radius * factor,
            clearance=self.clearance * factor,
            m_structure=self.m_structure * factor**3,
            m_quad=self.m_quad * factor**3,
        )


@dataclass(frozen=True)
class SimOptions:
    t_max: float = 0.03
    rel_tol: float = 1e-5
    abs_tol: float = 1e-8
    sample_dt: float = 5e-5
    separation_window: float = 2e-3

    def scaled(self, factor):
        slow = factor * max(1.0, np.sqrt(factor))   # wall bounce ~ lambda^1.5
        fast = factor * min(1.0, np.sqrt(factor))
        return SimOptions(
            t_max=self.t_max * slow,
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            sample_dt=self.sample_dt * fast,
            separation_window=self.separation_window * factor,
        )


@dataclass(frozen=True)
class StudyConfig:
    n_samples: int = 200
    seed: int = 0
    speed: float = 5.0               # [m/s]
    wall_stiffness: float = 4.7e7    # [N/m]
    tensegrity: TensegrityBuildSpec = field(default_factory=TensegrityBuildSpec)
    guard: GuardBuildSpec = field(default_factory=GuardBuildSpec)
    sim: SimOptions = field(default_factory=SimOptions)
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidConfigError("n_samples must be >= 1")
        if self.speed < 0.0:
            raise InvalidConfigError("speed must be non-negative")

    def models(self):
        return self.tensegrity.build(), self.guard.build()

    def scaled(self, factor):
        if factor <= 0.0:
            raise InvalidConfigError("scale factor must be positive")
        return replace(
            self,
            tensegrity=self.tensegrity.scaled(factor),
            guard=self.guard.scaled(factor),
            sim=self.sim.scaled(factor),
        )


@dataclass
class StudyResult:
    directions: np.ndarray        # (n_ok, 3) sampled body directions
    stress_tensegrity: np.ndarray  # (n_ok,) [Pa]
    stress_guard: np.ndarray       # (n_ok,) [Pa]
    sample_ids: np.ndarray         # original sample indices
    failed_ids: tuple              # samples excluded by integration failures
    config: StudyConfig

    @property
    def ratio(self):
        return self.stress_guard / self.stress_tensegrity

    def aggregates(self):
        ratio = self.ratio
        quantiles = {f"ratio_q{int(q * 100):02d}": float(np.quantile(ratio, q))
                     for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
        return {
            "n_requested": self.config.n_samples,
            "n_completed": int(self.sample_ids.size),
            "n_failed": len(self.failed_ids),
            "mean_max_stress_tensegrity_pa": float(self.stress_tensegrity.mean()),
            "mean_max_stress_guard_pa": float(self.stress_guard.mean()),
            "mean_ratio": float(ratio.mean()),
            "frac_ratio_ge_2": float(np.mean(ratio >= 2.0)),
            "frac_guard_superior": float(np.mean(ratio < 1.0)),
            **quantiles,
        }

    def to_csv(self):
        lines = ["sample,ux,uy,uz,max_stress_tensegrity_pa,max_stress_guard_pa,ratio"]
        for idx, u, st, sg in zip(self.sample_ids, self.directions,
                                  self.stress_tensegrity, self.stress_guard):
            lines.append(f"{idx},{u[0]!r},{u[1]!r},{u[2]!r},{st!r},{sg!r},"
                         f"{(sg / st)!r}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(self.aggregates(), indent=2, sort_keys=True)


def collision_max_stress(model, direction, speed, wall_stiffness, sim):
    """Peak structural stress of one oriented wall impact."""
    scenario = CollisionScenario(
        model=model,
        orientation=orientation_from_direction(direction),
        speed=speed,
        contact=ContactModel(wall_normal=WALL_NORMAL, wall_offset=0.0,
                             stiffness=wall_stiffness),
        t_max=sim.t_max,
        rel_tol=sim.rel_tol,
        abs_tol=sim.abs_tol,
        sample_dt=sim.sample_dt,
        separation_window=sim.separation_window,
    )
    trace = run_collision(scenario)
    return extract_stresses(model, trace).max_stress()


def _run_one(args):
    index, direction, tenseg, guard, config = args
    try:
        st = collision_max_stress(tenseg, direction, config.speed,
                                  config.wall_stiffness, config.sim)
        sg = collision_max_stress(guard, direction, config.speed,
                                  config.wall_stiffness, config.sim)
        return index, st, sg, None
    except TensegrityError as err:
        return index, np.nan, np.nan, str(err)


def run_study(config, progress=None):
    """Run the full comparison study; reproducible from the seed alone."""
    rng = np.random.default_rng(config.seed)
    directions = np.array([sample_octant_direction(rng)
                           for _ in range(config.n_samples)])
    tenseg, guard = config.models()
    jobs = [(i, directions[i], tenseg, guard, config)
            for i in range(config.n_samples)]

    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        raw = []
        for job in jobs:
            raw.append(_run_one(job))
            if progress is not None:
                progress(len(raw), config.n_samples)
    raw.sort(key=lambda r: r[0])

    failed = tuple(i for i, _, _, err in raw if err is not None)
    if len(failed) > 0.05 * config.n_samples:
        raise TensegrityError(
            f"{len(failed)} of {config.n_samples} samples failed to integrate")
    ok = [r for r in raw if r[3] is None]
    ids = np.array([r[0] for r in ok], dtype=int)
    return StudyResult(
        directions=directions[ids],
        stress_tensegrity=np.array([r[1] for r in ok]),
        stress_guard=np.array([r[2] for r in ok]),
        sample_ids=ids,
        failed_ids=failed,
        config=config,
    )


@dataclass
class ScaleStudyResult:
    factors: tuple
    mean_ratios: tuple
    studies: tuple

    def to_csv(self):
        lines = ["scale_factor,mean_ratio,mean_max_stress_tensegrity_pa,"
                 "mean_max_stress_guard_pa,n_completed"]
        for lam, study in zip(self.factors, self.studies):
            agg = study.aggregates()
            lines.append(
                f"{lam!r},{agg['mean_ratio']!r},"
                f"{agg['mean_max_stress_tensegrity_pa']!r},"
                f"{agg['mean_max_stress_guard_pa']!r},{agg['n_completed']}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps({
            "scale_factors": list(self.factors),
            "mean_ratios": list(self.mean_ratios),
        }, indent=2, sort_keys=True)


def scale_study(config, factors, progress=None):
    """Rerun the comparison at each linear scale factor (same seed)."""
    studies = []
    for lam in factors:
        scaled = config.scaled(float(lam))
        studies.append(run_study(scaled, progress=progress))
    return ScaleStudyResult(
        factors=tuple(float(f) for f in factors),
        mean_ratios=tuple(float(s.aggregates()["mean_ratio"]) for s in studies),
        studies=tuple(studies),
    )
