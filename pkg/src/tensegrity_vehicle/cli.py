"""Batch command-line front end.

Subcommands (all take ``--config <json>``, ``--out <dir>``, ``--seed <int>``):

* ``design-check``  build a shell, run the canonical collision set, evaluate
  the stress and exposure criteria (exit 1 on any failure)
* ``collide``       one oriented wall collision, full trace export
* ``montecarlo``    random-orientation comparison study
* ``scale-study``   the comparison study across linear scale factors
* ``reorient-plan`` feasibility graph, shortest paths and payload margins
* ``pivot-sim``     closed-loop pivot simulation of planned rotations
* ``thrust-map``    torque-to-thrust conversion error-rate grid

Every command writes its result files plus a ``manifest.json`` recording the
config hash, seed, tool version, wall-clock time and result file hashes.
Result files are byte-identical across reruns with the same config and seed.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, presets
from .dynamics import CollisionScenario, ContactModel, run_collision, trace_summary, trace_to_csv
from .exceptions import TensegrityError
from .model import MaterialSpec, build_icosahedron, min_enclosing_rod_length
from .montecarlo import (
    GuardBuildSpec,
    SimOptions,
    StudyConfig,
    TensegrityBuildSpec,
    orientation_from_direction,
    run_study,
    scale_study,
)
from .reorient import (
    ControllerGains,
    NoiseConfig,
    build_face_graph,
    converter_error_map,
    default_goal_faces,
    payload_margin,
    pivot_trace_to_csv,
    plan_paths,
    reference_trajectory,
    simulate_pivot,
    vehicle_from_model,
)
from .stress import DesignLimits, design_check, extract_stresses

CONFIG_SCHEMA = 1


class ConfigError(Exception):
    """Invalid run configuration; message names the offending field."""


# ---------------------------------------------------------------------------
# config handling

def _expect(cfg, path, kind, default=None, required=False):
    """Fetch cfg[path...] with type checking; dotted path in error messages."""
    node = cfg
    parts = path.split(".")
    for i, key in enumerate(parts):
        if not isinstance(node, dict) or key not in node:
            if required:
                raise ConfigError(f"missing required field '{path}'")
            return default
        node = node[key]
    if kind is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(
            f"field '{path}' must be {getattr(kind, '__name__', kind)}, "
            f"got {type(node).__name__}")
    return node


def _material(cfg, path, default):
    node = _expect(cfg, path, dict, default=None)
    if node is None:
        return default
    return MaterialSpec(
        density=_expect(cfg, path + ".density", float, default.density),
        youngs_modulus=_expect(cfg, path + ".youngs_modulus", float,
                               default.youngs_modulus),
        yield_strength=_expect(cfg, path + ".yield_strength", float,
                               default.yield_strength),
    )


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    schema = cfg.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"field 'schema' must be {CONFIG_SCHEMA}, got {schema}")
    return cfg


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def _workers(cfg):
    env = os.environ.get("TENSEG_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as err:
            raise ConfigError("TENSEG_WORKERS must be an integer") from err
    return _expect(cfg, "workers", int, 1)


class OutputWriter:
    """Collects result files, writes them atomically with a manifest."""

    def __init__(self, out_dir, command, config, seed):
        self.out_dir = out_dir
        self.command = command
        self.config = config
        self.seed = seed
        self.files = {}
        self.t0 = time.time()

    def add(self, name, text):
        self.files[name] = text

    def commit(self):
        os.makedirs(self.out_dir, exist_ok=True)
        written = []
        try:
            hashes = {}
            for name, text in sorted(self.files.items()):
                path = os.path.join(self.out_dir, name)
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                written.append(path)
                hashes[name] = _sha256(text)
            manifest = {
                "schema": CONFIG_SCHEMA,
                "command": self.command,
                "config_hash": _sha256(_canonical_json(self.config)),
                "seed": self.seed,
                "tool_version": __version__,
                "wall_clock_s": round(time.time() - self.t0, 3),
                "outputs": hashes,
            }
            path = os.path.join(self.out_dir, "manifest.json")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(json.dumps(manifest, indent=2, sort_keys=True))
        except BaseException:
            for path in written:
                try:
                    os.remove(path)
                except OSError:
                    pass
            raise


# ---------------------------------------------------------------------------
# shared builders

def _tensegrity_spec(cfg, prefix="tensegrity"):
    return TensegrityBuildSpec(
        prop_diameter=_expect(cfg, f"{prefix}.prop_diameter", float, 0.063),
        rod_length=_expect(cfg, f"{prefix}.rod_length", float, None),
        quad_offset=_expect(cfg, f"{prefix}.quad_offset", float, 0.25),
        clearance=_expect(cfg, f"{prefix}.clearance", float, 0.0),
        m_structure=_expect(cfg, f"{prefix}.m_structure", float, 0.050),
        m_quad=_expect(cfg, f"{prefix}.m_quad", float, 0.250),
        mass_ratio=_expect(cfg, f"{prefix}.mass_ratio", float, 20.0),
        pretension=_expect(cfg, f"{prefix}.pretension", float, 20.0),
        rod_material=_material(cfg, f"{prefix}.rod_material",
                               TensegrityBuildSpec().rod_material),
        string_material=_material(cfg, f"{prefix}.string_material",
                                  TensegrityBuildSpec().string_material),
    )


def _guard_spec(cfg, prefix="guard"):
    return GuardBuildSpec(
        prop_diameter=_expect(cfg, f"{prefix}.prop_diameter", float, 0.063),
        arm_radius=_expect(cfg, f"{prefix}.arm_radius", float, None),
        ring_segments=_expect(cfg, f"{prefix}.ring_segments", int, 16),
        clearance=_expect(cfg, f"{prefix}.clearance", float, 0.0),
        m_structure=_expect(cfg, f"{prefix}.m_structure", float, 0.050),
        m_quad=_expect(cfg, f"{prefix}.m_quad", float, 0.250),
        rod_material=_material(cfg, f"{prefix}.rod_material",
                               GuardBuildSpec().rod_material),
    )


def _sim_options(cfg, prefix="sim"):
    base = SimOptions()
    return SimOptions(
        t_max=_expect(cfg, f"{prefix}.t_max", float, base.t_max),
        rel_tol=_expect(cfg, f"{prefix}.rel_tol", float, base.rel_tol),
        abs_tol=_expect(cfg, f"{prefix}.abs_tol", float, base.abs_tol),
        sample_dt=_expect(cfg, f"{prefix}.sample_dt", float, base.sample_dt),
        separation_window=_expect(cfg, f"{prefix}.separation_window", float,
                                  base.separation_window),
    )


def _named_direction(name, spec):
    """Canonical collision directions of the shell build (body frame)."""
    if isinstance(name, list):
        u = np.asarray(name, dtype=float)
        return u / np.linalg.norm(u)
    table = {
        "rod-perpendicular": np.array([1.0, 0.0, 0.0]),
        "node-first": np.array([0.0, 2.0, 1.0]) / np.sqrt(5.0),
        "string-face-first": np.ones(3) / np.sqrt(3.0),
    }
    if name not in table:
        raise ConfigError(f"unknown orientation '{name}' in 'collision.orientations'")
    return table[name]


def _reorient_setup(cfg):
    rod_length = _expect(cfg, "vehicle.rod_length", float,
                         presets.REORIENT_ROD_LENGTH)
    model = build_icosahedron(
        rod_length,
        _material(cfg, "vehicle.rod_material", TensegrityBuildSpec().rod_material),
        _material(cfg, "vehicle.string_material", TensegrityBuildSpec().string_material),
        _expect(cfg, "vehicle.m_structure", float, presets.REORIENT_SHELL_MASS),
        _expect(cfg, "vehicle.m_quad", float, presets.REORIENT_QUAD_MASS),
        _expect(cfg, "vehicle.mass_ratio", float, 20.0),
        pretension=_expect(cfg, "vehicle.pretension", float, 20.0),
        quad_offset=_expect(cfg, "vehicle.quad_offset", float,
                            presets.REORIENT_QUAD_OFFSET),
    )
    f_max = _expect(cfg, "vehicle.f_max", float, presets.REORIENT_F_MAX)
    vehicle = vehicle_from_model(
        model, f_max=f_max,
        f_min=_expect(cfg, "vehicle.f_min", float, None),
        torque_coeff=_expect(cfg, "vehicle.torque_coeff", float,
                             presets.REORIENT_TORQUE_COEFF))
    mu = _expect(cfg, "vehicle.mu", float, presets.DEFAULT_MU)
    goals = _expect(cfg, "goal_faces", list, None)
    goals = tuple(goals) if goals else default_goal_faces(model, vehicle)
    return model, vehicle, mu, goals


# ---------------------------------------------------------------------------
# commands

def cmd_design_check(cfg, out):
    spec = _tensegrity_spec(cfg, prefix="build")
    model = spec.build()
    limits = DesignLimits(
        eta_string=_expect(cfg, "limits.eta_string", float, 1.5),
        eta_rod=_expect(cfg, "limits.eta_rod", float, 1.5),
        sigma_string_yield=spec.string_material.yield_strength,
        sigma_rod_yield=spec.rod_material.yield_strength,
        exposure_threshold=_expect(cfg, "limits.exposure_threshold", float,
                                   spec.prop_diameter / 2.0),
    )
    speed = _expect(cfg, "collision.speed", float, 5.0)
    stiffness = _expect(cfg, "collision.wall_stiffness", float, 4.7e7)
    orientations = _expect(cfg, "collision.orientations", list,
                           ["rod-perpendicular", "node-first", "string-face-first"])
    sim = _sim_options(cfg, "collision.sim")
    reports = {}
    all_pass = True
    for name in orientations:
        direction = _named_direction(name, spec)
        scenario = CollisionScenario(
            model=model,
            orientation=orientation_from_direction(direction),
            speed=speed,
            contact=ContactModel(wall_normal=np.array([1.0, 0.0, 0.0]),
                                 stiffness=stiffness),
            t_max=sim.t_max, rel_tol=sim.rel_tol, abs_tol=sim.abs_tol,
            sample_dt=sim.sample_dt, separation_window=sim.separation_window)
        trace = run_collision(scenario)
        stress = extract_stresses(model, trace)
        report = design_check(stress, limits, model, trace=trace)
        key = name if isinstance(name, str) else "custom-" + ",".join(map(str, name))
        reports[key] = report
        all_pass = all_pass and report.overall_pass

    doc = {
        "overall_pass": all_pass,
        "orientations": {k: json.loads(r.to_json()) for k, r in reports.items()},
    }
    out.add("design_report.json", json.dumps(doc, indent=2, sort_keys=True))
    table = []
    for key, report in sorted(reports.items()):
        table.append(f"== orientation: {key}")
        table.append(report.to_table())
        table.append("")
    table.append(f"combined: {'PASS' if all_pass else 'FAIL'}")
    text = "\n".join(table)
    out.add("design_report.txt", text + "\n")
    print(text)
    return 0 if all_pass else 1


def cmd_collide(cfg, out):
    which = _expect(cfg, "vehicle_kind", str, "tensegrity")
    if which == "tensegrity":
        model = _tensegrity_spec(cfg, prefix="build").build()
    elif which == "propeller_guard":
        model = _guard_spec(cfg, prefix="build").build()
    else:
        raise ConfigError("field 'vehicle_kind' must be 'tensegrity' or 'propeller_guard'")
    direction = _named_direction(
        _expect(cfg, "collision.orientation", None, "string-face-first"), None)
    sim = _sim_options(cfg, "collision.sim")
    scenario = CollisionScenario(
        model=model,
        orientation=orientation_from_direction(direction),
        speed=_expect(cfg, "collision.speed", float, 5.0),
        contact=ContactModel(wall_normal=np.array([1.0, 0.0, 0.0]),
                             stiffness=_expect(cfg, "collision.wall_stiffness",
                                               float, 4.7e7)),
        t_max=sim.t_max, rel_tol=sim.rel_tol, abs_tol=sim.abs_tol,
        sample_dt=sim.sample_dt, separation_window=sim.separation_window)
    trace = run_collision(scenario)
    stress = extract_stresses(model, trace)
    summary = trace_summary(trace, scenario)
    summary["max_stress_pa"] = stress.max_stress()
    out.add("trace.csv", trace_to_csv(trace))
    out.add("summary.json", json.dumps(summary, indent=2, sort_keys=True))
    print(f"collision simulated: {summary['duration_s'] * 1e3:.2f} ms, "
          f"max stress {summary['max_stress_pa'] / 1e6:.2f} MPa")
    return 0


def _study_config(cfg, args):
    config = StudyConfig(
        n_samples=args.samples or _expect(cfg, "n_samples", int, 200),
        seed=args.seed if args.seed is not None else _expect(cfg, "seed", int, 0),
        speed=args.speed or _expect(cfg, "speed", float, 5.0),
        wall_stiffness=_expect(cfg, "wall_stiffness", float, 4.7e7),
        tensegrity=_tensegrity_spec(cfg),
        guard=_guard_spec(cfg),
        sim=_sim_options(cfg),
        workers=_workers(cfg),
    )
    return config


def cmd_montecarlo(cfg, out, args):
    config = _study_config(cfg, args)
    result = run_study(config, progress=_progress if args.verbose else None)
    out.add("samples.csv", result.to_csv())
    out.add("aggregate.json", result.to_json())
    agg = result.aggregates()
    print(f"samples: {agg['n_completed']} ok, {agg['n_failed']} failed; "
          f"mean max stress: tensegrity {agg['mean_max_stress_tensegrity_pa'] / 1e6:.1f} MPa, "
          f"guard {agg['mean_max_stress_guard_pa'] / 1e6:.1f} MPa, "
          f"mean ratio {agg['mean_ratio']:.2f}")
    return 0


def cmd_scale_study(cfg, out, args):
    config = _study_config(cfg, args)
    if args.scale_list:
        factors = [float(v) for v in args.scale_list.split(",")]
    else:
        factors = _expect(cfg, "scale_factors", list, [0.5, 1.0, 2.0, 4.0])
    result = scale_study(config, factors,
                         progress=_progress if args.verbose else None)
    out.add("scale_results.csv", result.to_csv())
    out.add("scale_summary.json", result.to_json())
    for lam, ratio in zip(result.factors, result.mean_ratios):
        print(f"scale {lam:g}: mean stress ratio {ratio:.2f}")
    return 0


def cmd_reorient_plan(cfg, out):
    model, vehicle, mu, goals = _reorient_setup(cfg)
    facets = _expect(cfg, "vehicle.friction_facets", int, 16)
    graph = build_face_graph(model, vehicle, mu, goals, n_facets=facets)
    plan = plan_paths(graph)
    margin = payload_margin(model, vehicle, mu, goals, n_facets=facets,
                            graph=graph)
    margin_zs = payload_margin(model, vehicle, mu, goals, n_facets=facets,
                               zero_thrust_sum=True)
    out.add("face_graph.json", graph.to_json())
    out.add("plan.json", plan.to_json())
    out.add("payload_margin.json", json.dumps({
        "margin_kg": margin.margin_kg,
        "margin_zero_thrust_sum_kg": margin_zs.margin_kg,
        "connected_at_zero": margin.connected_at_zero,
        "connected_at_zero_with_zero_sum": margin_zs.connected_at_zero,
    }, indent=2, sort_keys=True))
    print(f"faces: {graph.n_faces}, feasible rotations: {len(graph.edges)}, "
          f"unreachable: {list(plan.unreachable) or 'none'}")
    print(f"payload margin: {_fmt_margin(margin.margin_kg)}; "
          f"with zero-thrust-sum: {_fmt_margin(margin_zs.margin_kg)}")
    return 0


def _fmt_margin(kg):
    return "no positive margin" if kg is None else f"{kg * 1e3:.1f} g"


def cmd_pivot_sim(cfg, out):
    model, vehicle, mu, goals = _reorient_setup(cfg)
    facets = _expect(cfg, "vehicle.friction_facets", int, 16)
    graph = build_face_graph(model, vehicle, mu, goals, n_facets=facets,
                             with_capacities=False)
    plan = plan_paths(graph)
    edges = _expect(cfg, "edges", list, None)
    if edges is None:
        pairs = sorted({(p[i], p[i + 1]) for p in plan.paths.values()
                        for i in range(len(p) - 1)})
    else:
        pairs = [tuple(e) for e in edges]
    duration = _expect(cfg, "duration", float, presets.DEFAULT_PIVOT_DURATION)
    gains = ControllerGains(
        damping_ratio=_expect(cfg, "gains.damping_ratio", float, 1.0),
        natural_freq=_expect(cfg, "gains.natural_freq", float, 10.0))
    noise = NoiseConfig(
        gyro_std=_expect(cfg, "noise.gyro_std", float, 0.0),
        attitude_std=_expect(cfg, "noise.attitude_std", float, 0.0),
        seed=_expect(cfg, "noise.seed", int, 0))
    rate = _expect(cfg, "control_rate", float, presets.DEFAULT_CONTROL_RATE)
    allocator = _expect(cfg, "allocator", str, "contact_aware")
    summary = {}
    for (a, b) in pairs:
        if (a, b) not in graph.specs:
            raise ConfigError(f"field 'edges': rotation {a}->{b} is not feasible")
        spec = graph.specs[(a, b)]
        traj = reference_trajectory(spec, duration, vehicle)
        trace = simulate_pivot(spec, vehicle, traj, gains, mu=mu, noise=noise,
                               control_rate=rate, allocator=allocator,
                               n_facets=facets)
        out.add(f"pivot_{a:02d}_{b:02d}.csv", pivot_trace_to_csv(trace))
        summary[f"{a}->{b}"] = {
            "final_angle_error_deg": float(np.degrees(trace.final_angle_error)),
            "reached_target": trace.reached_target,
            "slip_warnings": len(trace.slip_warnings),
            "liftoff_warnings": len(trace.liftoff_warnings),
            "fallback_ticks": trace.fallback_ticks,
            "max_thrust_n": float(trace.thrusts.max()),
            "min_thrust_n": float(trace.thrusts.min()),
        }
        print(f"pivot {a}->{b}: error {summary[f'{a}->{b}']['final_angle_error_deg']:.3f} deg, "
              f"slip {summary[f'{a}->{b}']['slip_warnings']}, "
              f"liftoff {summary[f'{a}->{b}']['liftoff_warnings']}")
    out.add("pivot_summary.json", json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_thrust_map(cfg, out):
    model, vehicle, mu, goals = _reorient_setup(cfg)
    graph = build_face_graph(model, vehicle, mu, goals, with_capacities=False)
    from_face = _expect(cfg, "from_face", int, None)
    to_face = _expect(cfg, "to_face", int, None)
    if from_face is None or to_face is None:
        plan = plan_paths(graph)
        pairs = sorted({(p[i], p[i + 1]) for p in plan.paths.values()
                        for i in range(len(p) - 1)})
        from_face, to_face = pairs[0]
    if (from_face, to_face) not in graph.specs:
        raise ConfigError(f"rotation {from_face}->{to_face} is not feasible")
    spec = graph.specs[(from_face, to_face)]
    span = _expect(cfg, "torque_span_nm", float, 0.6)
    n_grid = _expect(cfg, "grid_points", int, 41)
    values = np.linspace(-span, span, n_grid)
    values = values[values != 0.0] if n_grid % 2 else values
    rate_map = converter_error_map(vehicle, spec, values, values)
    out.add("thrust_map.csv", rate_map.to_csv())
    frac = [float(np.mean(rate_map.rates[:, :, k] < 1e-9)) for k in range(3)]
    out.add("thrust_map_meta.json", json.dumps({
        "from_face": from_face, "to_face": to_face,
        "error_free_fraction": dict(zip(rate_map.METHODS, frac)),
    }, indent=2, sort_keys=True))
    print(f"rotation {from_face}->{to_face}: error-free fraction "
          + ", ".join(f"{m}={v:.3f}" for m, v in zip(rate_map.METHODS, frac)))
    return 0


def _progress(done, total):
    if done % 10 == 0 or done == total:
        print(f"  {done}/{total} samples", file=sys.stderr)


# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tenseg",
        description="Tensegrity aerial vehicle collision and re-orientation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("design-check", "collide", "montecarlo", "scale-study",
                 "reorient-plan", "pivot-sim", "thrust-map"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--verbose", action="store_true")
        if name in ("montecarlo", "scale-study"):
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--speed", type=float, default=None)
        if name == "scale-study":
            p.add_argument("--scale-list", default=None,
                           help="comma-separated scale factors")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("field 'seed' must be an integer")
        hashed = dict(cfg)
        hashed["seed"] = seed
        out = OutputWriter(args.out, args.command, hashed, seed)
        if args.command == "design-check":
            code = cmd_design_check(cfg, out)
        elif args.command == "collide":
            code = cmd_collide(cfg, out)
        elif args.command == "montecarlo":
            code = cmd_montecarlo(cfg, out, args)
        elif args.command == "scale-study":
            code = cmd_scale_study(cfg, out, args)
        elif args.command == "reorient-plan":
            code = cmd_reorient_plan(cfg, out)
        elif args.command == "pivot-sim":
            code = cmd_pivot_sim(cfg, out)
        elif args.command == "thrust-map":
            code = cmd_thrust_map(cfg, out)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command}")
        out.commit()
        return code
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except TensegrityError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
