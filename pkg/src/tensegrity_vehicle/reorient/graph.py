"""Connection graph over contact faces and re-orientation path planning.

Faces are graph vertices; a directed edge exists where the corresponding
neighboring rotation is feasible for the bare vehicle. Each edge carries the
largest extra payload mass it can tolerate, which turns path planning into a
bottleneck (maximin capacity) reachability problem.
"""

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidConfigError
from .feasibility import check_rotation_feasibility, edge_payload_capacity
from .rotations import face_adjacency, rotation_spec


@dataclass(frozen=True)
class FaceGraph:
    n_faces: int
    goal_faces: tuple
    edges: dict                  # (from, to) -> capacity [kg]
    witnesses: dict              # (from, to) -> FeasibilityWitness
    specs: dict                  # (from, to) -> RotationSpec
    disconnected: tuple          # faces with no outgoing feasible rotation
    mu: float

    def neighbors_out(self, face, min_capacity=None):
        for (a, b), cap in self.edges.items():
            if a == face and (min_capacity is None or cap >= min_capacity):
                yield b

    def to_json(self):
        doc = {
            "n_faces": self.n_faces,
            "goal_faces": list(self.goal_faces),
            "friction_coefficient": self.mu,
            "disconnected_faces": list(self.disconnected),
            "edges": [
                {"from": a, "to": b, "payload_capacity_kg": cap}
                for (a, b), cap in sorted(self.edges.items())
            ],
            "units": {"payload_capacity": "kg"},
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def build_face_graph(model, vehicle, mu, goal_faces, n_facets=16,
                     zero_thrust_sum=False, with_capacities=True):
    """Assemble the directed graph of feasible neighboring rotations."""
    if not goal_faces:
        raise InvalidConfigError("goal_faces must be nonempty")
    edges, witnesses, specs = {}, {}, {}
    for a, b, _edge, _kind in face_adjacency(model):
        for src, dst in ((a, b), (b, a)):
            spec = rotation_spec(model, src, dst)
            witness = check_rotation_feasibility(
                spec, vehicle, mu, n_facets=n_facets,
                zero_thrust_sum=zero_thrust_sum)
            if not witness.feasible:
                continue
            cap = 0.0
            if with_capacities:
                cap = edge_payload_capacity(
                    spec, vehicle, mu, n_facets=n_facets,
                    zero_thrust_sum=zero_thrust_sum)
            edges[(src, dst)] = float(cap if cap is not None else 0.0)
            witnesses[(src, dst)] = witness
            specs[(src, dst)] = spec
    n_faces = len(model.faces)
    has_out = {a for (a, _b) in edges}
    disconnected = tuple(f for f in range(n_faces) if f not in has_out)
    return FaceGraph(n_faces=n_faces, goal_faces=tuple(goal_faces),
                     edges=edges, witnesses=witnesses, specs=specs,
                     disconnected=disconnected, mu=mu)


@dataclass(frozen=True)
class ReorientPlan:
    paths: dict            # face -> tuple of faces from start to a goal
    lengths: dict          # face -> number of rotations
    unreachable: tuple

    def to_json(self):
        doc = {
            "paths": {str(k): list(v) for k, v in sorted(self.paths.items())},
            "lengths": {str(k): v for k, v in sorted(self.lengths.items())},
            "unreachable_faces": list(self.unreachable),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def plan_paths(graph, min_capacity=None):
    """Shortest rotation sequences from every face to the nearest goal.

    Breadth-first search with unit edge weights, run backwards from the goal
    set; unreachable faces are reported rather than raised.
    """
    dist = {g: 0 for g in graph.goal_faces}
    succ = {}
    frontier = deque(graph.goal_faces)
    # reversed adjacency: edge (a -> b) lets a reach whatever b reaches
    incoming = {}
    for (a, b), cap in graph.edges.items():
        if min_capacity is not None and cap < min_capacity:
            continue
        incoming.setdefault(b, []).append(a)
    while frontier:
        face = frontier.popleft()
        for prev in sorted(incoming.get(face, ())):
            if prev not in dist:
                dist[prev] = dist[face] + 1
                succ[prev] = face
                frontier.append(prev)
    paths, lengths = {}, {}
    for face in range(graph.n_faces):
        if face not in dist:
            continue
        seq = [face]
        while seq[-1] not in graph.goal_faces:
            seq.append(succ[seq[-1]])
        paths[face] = tuple(seq)
        lengths[face] = dist[face]
    unreachable = tuple(f for f in range(graph.n_faces) if f not in dist)
    return ReorientPlan(paths=paths, lengths=lengths, unreachable=unreachable)


@dataclass(frozen=True)
class PayloadMargin:
    margin_kg: float | None     # None when some face cannot reach at zero load
    capacities: dict            # (from, to) -> capacity [kg]
    connected_at_zero: bool


def payload_margin(model, vehicle, mu, goal_faces, n_facets=16,
                   zero_thrust_sum=False, graph=None):
    """Largest COM payload for which every face still reaches a goal face.

    Bottleneck reachability over the edge payload capacities: the candidate
    thresholds are the capacities themselves; binary search finds the
    largest one at which the capacity-filtered graph still connects every
    face to the goal set.
    """
    if graph is None:
        graph = build_face_graph(model, vehicle, mu, goal_faces,
                                 n_facets=n_facets,
                                 zero_thrust_sum=zero_thrust_sum)

    def all_reach(threshold):
        plan = plan_paths(graph, min_capacity=threshold)
        return not plan.unreachable

    if not all_reach(0.0):
        return PayloadMargin(margin_kg=None, capacities=dict(graph.edges),
                             connected_at_zero=False)
    caps = sorted(set(graph.edges.values()))
    lo, hi = 0, len(caps) - 1
    best = 0.0
    while lo <= hi:
        mid = (lo + hi) // 2
        if all_reach(caps[mid]):
            best = caps[mid]
            lo = mid + 1
        else:
            hi = mid - 1
    return PayloadMargin(margin_kg=float(best), capacities=dict(graph.edges),
                         connected_at_zero=True)
