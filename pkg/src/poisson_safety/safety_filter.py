"""Multi-constraint velocity filter: one barrier row per surface sample, a
robustness margin against field uncertainty, joint-limit and speed rows, and
an optional slack-relaxed task row biasing the solution toward a Cartesian
target.

Every hard row encodes ``a . v >= b``. A sample's row is

    a = grad_h(y_i)^T J_i(q),
    b = -alpha * h(y_i) - dh/dt(y_i) + issf_eps0 * ||a||^2,

so feasible velocities cannot decrease the field value at the sample faster
than the barrier decay allows, with the quadratic gradient-norm term
absorbing bounded field error. The task row is soft: ``a . v <= b + delta``
with the slack penalized quadratically in the objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .kinematics import RobotModel, forward_kinematics, joint_world_frames, \
    point_jacobian
from .poisson_field import FieldPair, sample_gradient, sample_value, time_derivative
from .qp import least_violation_point, project_polyhedron
from .sampling import SampleSet


@dataclass(frozen=True)
class FilterConfig:
    """Gains of the velocity filter.

    alpha: barrier decay per sample row, 1/s. issf_eps0: robustness margin
    weight on the squared row norm. alpha_joint: joint-limit decay, 1/s.
    clf_gamma: task-row decrease rate, 1/s. slack_penalty: quadratic weight
    on the task-row slack.
    """

    alpha: float = 2.0
    issf_eps0: float = 0.05
    alpha_joint: float = 5.0
    clf_gamma: float = 1.0
    slack_penalty: float = 100.0

    def __post_init__(self):
        if self.alpha <= 0 or self.clf_gamma <= 0 or self.slack_penalty <= 0:
            raise ValueError("alpha, clf_gamma, slack_penalty must be positive")
        if self.issf_eps0 < 0 or self.alpha_joint <= 0:
            raise ValueError("issf_eps0 must be >= 0 and alpha_joint > 0")


@dataclass(frozen=True)
class ConstraintRow:
    """Linear row ``a . v >= b`` (hard) or ``a . v <= b + slack`` (tag clf)."""

    a: np.ndarray
    b: float
    tag: str = "sample"          # sample | joint_limit | clf
    source_index: int = -1
    clamped: bool = False        # sample position was clamped into bounds

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))


@dataclass
class FilterResult:
    v_safe: np.ndarray
    slack: float
    status: str                  # optimal | infeasible | degraded
    active_set: np.ndarray
    solve_time: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0


def barrier_rows(model: RobotModel, q: np.ndarray, samples: SampleSet,
                 fields: FieldPair, config: FilterConfig,
                 poses=None) -> List[ConstraintRow]:
    """One row per surface sample, batched per link."""
    if fields is None:
        raise ValueError("cannot build barrier rows without a published field pair")
    if poses is None:
        poses = forward_kinematics(model, q)
    cur = fields.current
    links, locals_ = samples.local_stacked()
    world = np.empty((len(links), 3))
    for li in np.unique(links):
        sel = links == li
        world[sel] = poses[li].apply(locals_[sel])
    lo = cur.bounds.min + 1e-9
    hi = cur.bounds.max - 1e-9
    clipped = np.clip(world, lo, hi)
    clamped = np.any(clipped != world, axis=1)
    world = clipped

    h_vals = np.atleast_1d(sample_value(cur, world))
    grads = np.atleast_2d(sample_gradient(cur, world))
    dhdt = np.atleast_1d(time_derivative(fields, world))

    # joint world axes/origins once; columns zero for joints distal to link
    axes, origins = joint_world_frames(model, poses)
    rows: List[ConstraintRow] = []
    n = model.n
    A = np.zeros((len(links), n))
    for li in np.unique(links):
        sel = np.flatnonzero(links == li)
        Y = world[sel]
        for k in range(min(li, n)):
            if model.joints[k].kind == "revolute":
                cols = np.cross(axes[k], Y - origins[k])
            else:
                cols = np.broadcast_to(axes[k], (len(sel), 3))
            A[sel, k] = np.einsum("ij,ij->i", grads[sel], cols)
    sq = np.einsum("ij,ij->i", A, A)
    b = -config.alpha * h_vals - dhdt + config.issf_eps0 * sq
    for i in range(len(links)):
        rows.append(ConstraintRow(A[i], float(b[i]), "sample", i, bool(clamped[i])))
    return rows


def joint_limit_rows(model: RobotModel, q: np.ndarray,
                     config: FilterConfig) -> List[ConstraintRow]:
    """Per joint: barrier rows keeping q inside its range, plus speed box."""
    q = np.asarray(q, dtype=float)
    rows: List[ConstraintRow] = []
    n = model.n
    for j in range(n):
        spec = model.joints[j]
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(ConstraintRow(e, -config.alpha_joint * (q[j] - spec.q_min),
                                  "joint_limit", j))
        rows.append(ConstraintRow(-e, -config.alpha_joint * (spec.q_max - q[j]),
                                  "joint_limit", j))
    for j in range(n):
        spec = model.joints[j]
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(ConstraintRow(e, -spec.v_max, "joint_limit", j))
        rows.append(ConstraintRow(-e, -spec.v_max, "joint_limit", j))
    return rows


def clf_row(x_ee: np.ndarray, x_d: np.ndarray, J_ee: np.ndarray,
            config: FilterConfig) -> ConstraintRow:
    """Soft task row: (x - x_d)^T J v <= -gamma * V + slack, V = ||x - x_d||^2 / 2."""
    err = np.asarray(x_ee, dtype=float) - np.asarray(x_d, dtype=float)
    V = 0.5 * float(err @ err)
    return ConstraintRow(err @ J_ee, -config.clf_gamma * V, "clf", 0)


def solve_filter_qp(v_nom: np.ndarray, hard: Sequence[ConstraintRow],
                    soft: Optional[ConstraintRow], config: FilterConfig,
                    warm_active: Optional[Sequence[int]] = None) -> FilterResult:
    """Minimize ||v - v_nom||^2 + slack_penalty * slack^2 subject to the hard
    rows and the soft row. Infeasible hard sets fall back to the documented
    minimum-norm least-violation velocity and are flagged."""
    t0 = time.perf_counter()
    v_nom = np.asarray(v_nom, dtype=float)
    n = v_nom.shape[0]
    m = len(hard)
    has_soft = soft is not None
    d = n + (1 if has_soft else 0)
    A = np.zeros((m + (1 if has_soft else 0), d))
    b = np.zeros(m + (1 if has_soft else 0))
    for i, row in enumerate(hard):
        A[i, :n] = row.a
        b[i] = row.b
    sqrt_p = np.sqrt(config.slack_penalty)
    if has_soft:
        A[m, :n] = -soft.a
        A[m, n] = 1.0 / sqrt_p
        b[m] = -soft.b
    z0 = np.zeros(d)
    z0[:n] = v_nom
    res = project_polyhedron(z0, A, b, warm=warm_active)
    if res.status == "optimal":
        v = res.z[:n]
        slack = float(res.z[n] / sqrt_p) if has_soft else 0.0
        out = FilterResult(v, max(slack, 0.0), "optimal", res.active,
                           0.0, res.lam, res.iterations)
    elif res.status == "infeasible":
        Ah = A[:m, :n]
        v = least_violation_point(Ah, b[:m]) if m else v_nom.copy()
        out = FilterResult(v, 0.0, "infeasible", np.zeros(0, dtype=int),
                           0.0, np.zeros(m), res.iterations)
    else:
        out = FilterResult(res.z[:n], 0.0, "degraded", res.active, 0.0,
                           res.lam, res.iterations)
    out.solve_time = time.perf_counter() - t0
    return out


class SafetyFilter:
    """Stateful wrapper holding the gains and the warm-started active set."""

    def __init__(self, model: RobotModel, config: FilterConfig):
        self.model = model
        self.config = config
        self._warm: Optional[np.ndarray] = None

    def reset(self) -> None:
        self._warm = None

    def filter(self, v_nom: np.ndarray, hard: Sequence[ConstraintRow],
               soft: Optional[ConstraintRow]) -> FilterResult:
        result = solve_filter_qp(v_nom, hard, soft, self.config,
                                 warm_active=self._warm)
        self._warm = result.active_set if result.status == "optimal" else None
        return result
