"""Torque-to-thrust conversion for the four-propeller vehicle.

The map from thrusts to body torque is linear with a 3x4 matrix whose
columns combine the moment arm of each propeller (about a chosen reference
point) with its drag torque about the thrust axis. Converting a desired
torque is under-determined; the converter here solves the minimum-norm
thrust problem exactly inside the thrust box and falls back to a
box-constrained least-error solve when the torque is unreachable.
"""

from dataclasses import dataclass

import numpy as np

from ..rotationmath import skew

_EZ = np.array([0.0, 0.0, 1.0])


def thrust_torque_map(vehicle, about_point=None):
    """Columns: torque per unit thrust of each propeller, body frame."""
    ref = np.zeros(3) if about_point is None else np.asarray(about_point, dtype=float)
    cols = []
    for pos, handed in zip(vehicle.prop_positions, vehicle.prop_handedness):
        cols.append(skew(pos - ref) @ _EZ + handed * vehicle.torque_coeff * _EZ)
    return np.array(cols).T


@dataclass(frozen=True)
class ThrustAllocation:
    thrusts: np.ndarray       # (4,) [N]
    torque: np.ndarray        # realized torque [N m]
    residual: float           # |realized - desired| [N m]
    saturated: bool
    branch: str               # 'exact' | 'least_error'


def torque_to_thrust(tau_desired, vehicle, about_point=None, rank_tol=1e-10):
    """Thrusts realizing a desired torque about ``about_point``.

    With a rank-3 map and four thrusts the solutions of the exact problem
    form a one-parameter family f = f_min_norm + alpha * n along the
    nullspace direction; the squared-norm objective is minimized by clamping
    the unconstrained alpha into the interval the thrust box allows. If that
    interval is empty, or the map cannot reach the torque, the least-error
    problem is solved exactly by enumerating all 3^4 active-bound patterns.
    """
    tau = np.asarray(tau_desired, dtype=float)
    m_map = thrust_torque_map(vehicle, about_point)
    lo, hi = vehicle.f_min, vehicle.f_max
    u, s, vt = np.linalg.svd(m_map)
    rank = int(np.sum(s > rank_tol * s[0]))
    if rank == 3:
        f_par = vt[:3].T @ ((u.T @ tau) / s[:3])   # minimum-norm particular
        null = vt[3]
        alpha_lo, alpha_hi = -np.inf, np.inf
        ok = True
        for fp_i, n_i in zip(f_par, null):
            if abs(n_i) < 1e-14:
                if not (lo - 1e-12 <= fp_i <= hi + 1e-12):
                    ok = False
                    break
                continue
            a, b = (lo - fp_i) / n_i, (hi - fp_i) / n_i
            alpha_lo = max(alpha_lo, min(a, b))
            alpha_hi = min(alpha_hi, max(a, b))
        if ok and alpha_lo <= alpha_hi:
            alpha = np.clip(-float(f_par @ null), alpha_lo, alpha_hi)
            f = f_par + alpha * null
            realized = m_map @ f
            return ThrustAllocation(
                thrusts=f, torque=realized,
                residual=float(np.linalg.norm(realized - tau)),
                saturated=bool(np.any((f - lo < 1e-12) | (hi - f < 1e-12))),
                branch="exact")
    f = box_least_squares(m_map, tau, lo, hi)
    f = _min_net_thrust_minimizer(m_map, f, lo, hi, rank_tol)
    realized = m_map @ f
    return ThrustAllocation(
        thrusts=f, torque=realized,
        residual=float(np.linalg.norm(realized - tau)),
        saturated=True,
        branch="least_error")


def _min_net_thrust_minimizer(m_map, f_best, lo, hi, rank_tol):
    """Pick the least-error minimizer with the smallest net thrust.

    The minimum-residual set is the nullspace fiber through any minimizer
    intersected with the box; a small net thrust keeps the contact reactions
    (which must absorb the net force) inside the friction cone during ground
    rotations, so ties are resolved in its favor.
    """
    u, s, vt = np.linalg.svd(m_map)
    if int(np.sum(s > rank_tol * s[0])) != 3:
        return f_best
    null = vt[3]
    alpha_lo, alpha_hi = -np.inf, np.inf
    for fb_i, n_i in zip(f_best, null):
        if abs(n_i) < 1e-14:
            continue
        a, b = (lo - fb_i) / n_i, (hi - fb_i) / n_i
        alpha_lo = max(alpha_lo, min(a, b))
        alpha_hi = min(alpha_hi, max(a, b))
    net = float(f_best.sum())
    null_net = float(null.sum())
    if abs(null_net) < 1e-12:
        return f_best
    alpha = float(np.clip(-net / null_net, alpha_lo, alpha_hi))
    return np.clip(f_best + alpha * null, lo, hi)


def box_least_squares(m_map, tau, lo, hi):
    """Exact box-constrained least squares by active-set enumeration.

    Every optimum has some set of variables pinned at a bound; with four
    variables all 3^4 lower/free/upper patterns are enumerated and the best
    feasible candidate is kept (ties broken by the smaller thrust norm).
    """
    n = m_map.shape[1]
    best_key, best_f = None, None
    for code in range(3**n):
        pattern = [(code // 3**i) % 3 for i in range(n)]
        free = [i for i, p in enumerate(pattern) if p == 1]
        active = [i for i, p in enumerate(pattern) if p != 1]
        f = np.empty(n)
        for i in active:
            f[i] = lo if pattern[i] == 0 else hi
        if free:
            rhs = tau - m_map[:, active] @ f[active]
            sol, *_ = np.linalg.lstsq(m_map[:, free], rhs, rcond=None)
            if np.any(sol < lo - 1e-12) or np.any(sol > hi + 1e-12):
                continue
            f[free] = np.clip(sol, lo, hi)
        key = (float(np.linalg.norm(m_map @ f - tau)), float(f @ f))
        if best_key is None or key < best_key:
            best_key, best_f = key, f.copy()
    return best_f


def convert_zero_sum_clamp(tau, vehicle, about_point=None):
    """Baseline 1: augment with a zero-thrust-sum row, solve, then clamp."""
    m_map = thrust_torque_map(vehicle, about_point)
    a = np.vstack([m_map, np.ones(4)])
    b = np.concatenate([np.asarray(tau, dtype=float), [0.0]])
    try:
        f = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        f, *_ = np.linalg.lstsq(a, b, rcond=None)
    return np.clip(f, vehicle.f_min, vehicle.f_max)


def convert_pinv_clamp(tau, vehicle, about_point=None):
    """Baseline 2: pseudoinverse solution, then clamp."""
    m_map = thrust_torque_map(vehicle, about_point)
    f = np.linalg.pinv(m_map) @ np.asarray(tau, dtype=float)
    return np.clip(f, vehicle.f_min, vehicle.f_max)


@dataclass
class ErrorRateMap:
    """Per-method torque conversion error rates over a 2D torque grid."""

    axis1: np.ndarray          # unit torque direction 1 (rotation axis)
    axis2: np.ndarray          # unit torque direction 2 (toward the COM)
    values1: np.ndarray        # grid coordinates along axis1 [N m]
    values2: np.ndarray
    rates: np.ndarray          # (n1, n2, 3): zero-sum, pinv, optimization

    METHODS = ("zero_sum_clamp", "pinv_clamp", "optimization")

    def to_csv(self):
        lines = ["tau_axis1_nm,tau_axis2_nm,error_rate_zero_sum,"
                 "error_rate_pinv,error_rate_optimization"]
        for i, a1 in enumerate(self.values1):
            for j, a2 in enumerate(self.values2):
                r = self.rates[i, j]
                lines.append(f"{a1!r},{a2!r},{r[0]!r},{r[1]!r},{r[2]!r}")
        return "\n".join(lines) + "\n"


def converter_error_map(vehicle, spec, values1, values2):
    """Error rates of the three converters over a torque grid.

    The grid spans torques a1 * axis1 + a2 * axis2 where axis1 is the
    rotation axis of ``spec`` and axis2 points from the rotation point to
    the center of mass, both in the body frame.
    """
    from .rotations import body_geometry

    geo = body_geometry(spec, vehicle)
    n_r = geo["rotation_point"]
    axis1 = geo["roll_axis"]
    axis2 = -n_r / np.linalg.norm(n_r)
    m_map = thrust_torque_map(vehicle, about_point=n_r)
    rates = np.zeros((len(values1), len(values2), 3))
    for i, a1 in enumerate(values1):
        for j, a2 in enumerate(values2):
            tau = a1 * axis1 + a2 * axis2
            scale = np.linalg.norm(tau)
            if scale == 0.0:
                raise ValueError("torque grid must not contain the origin")
            for k, f in enumerate((
                    convert_zero_sum_clamp(tau, vehicle, n_r),
                    convert_pinv_clamp(tau, vehicle, n_r),
                    torque_to_thrust(tau, vehicle, n_r).thrusts)):
                rates[i, j, k] = np.linalg.norm(m_map @ f - tau) / scale
    return ErrorRateMap(axis1=axis1, axis2=axis2,
                        values1=np.asarray(values1, dtype=float),
                        values2=np.asarray(values2, dtype=float),
                        rates=rates)
