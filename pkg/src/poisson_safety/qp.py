"""Dense active-set solver for the velocity-projection QP.

The filter's QP is a Euclidean projection onto a polyhedron:

    min ||z - z0||^2   s.t.   A z >= b.

It is solved through the classical least-distance-programming reduction to a
nonnegative least-squares problem, with a Lawson-Hanson active-set iteration
as the engine. The dual variables come out for free (lambda = -2 u / rho_d),
which gives an exact KKT certificate, and primal infeasibility shows up as a
vanishing NNLS residual rather than as a numerical breakdown. The active set
can be seeded from the previous control tick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class QPResult:
    z: np.ndarray
    lam: np.ndarray
    status: str          # optimal | infeasible | degraded
    iterations: int
    active: np.ndarray   # row indices with positive multipliers


def _nnls(E: np.ndarray, f: np.ndarray, warm: Optional[Sequence[int]] = None,
          max_iter: Optional[int] = None):
    """Lawson-Hanson NNLS: min ||E u - f|| s.t. u >= 0, warm-startable via an
    initial passive set."""
    n, m = E.shape
    u = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    tol = 10.0 * max(n, m) * np.finfo(float).eps * (1.0 + float(np.abs(E).max()))
    if max_iter is None:
        max_iter = 3 * m + 60

    def ls(idx):
        return np.linalg.lstsq(E[:, idx], f, rcond=None)[0]

    def restore():
        # re-solve on the passive set, stepping back while components would
        # go negative (each pass drops at least one index, so it terminates)
        while True:
            idx = np.flatnonzero(passive)
            if idx.size == 0:
                return idx, np.zeros(0)
            s = ls(idx)
            if np.min(s) > tol:
                return idx, s
            cur = u[idx]
            bad = np.flatnonzero(s <= tol)
            denom = cur[bad] - s[bad]
            steps = np.where(denom > 1e-300, cur[bad] / denom, 0.0)
            alpha = float(np.clip(np.min(steps), 0.0, 1.0))
            u[idx] = np.clip(cur + alpha * (s - cur), 0.0, None)
            drop = idx[bad[int(np.argmin(steps))]]
            u[drop] = 0.0
            passive[drop] = False

    if warm is not None and len(warm):
        widx = np.unique(np.asarray(warm, dtype=int))
        widx = widx[(widx >= 0) & (widx < m)]
        passive[widx] = True
        idx, s = restore()
        u[:] = 0.0
        if idx.size:
            u[idx] = s

    iters = 0
    for _ in range(max_iter):
        iters += 1
        w = E.T @ (f - E @ u)
        w_out = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_out))
        if w_out[j] <= tol:
            break
        passive[j] = True
        idx, s = restore()
        u[:] = 0.0
        if idx.size:
            u[idx] = s
    return u, iters


def project_polyhedron(z0: np.ndarray, A: np.ndarray, b: np.ndarray,
                       warm: Optional[Sequence[int]] = None,
                       feas_tol: float = 1e-8) -> QPResult:
    """Unique minimizer of ||z - z0||^2 over {A z >= b}, or an infeasibility
    verdict. Rows are normalized internally for conditioning."""
    z0 = np.asarray(z0, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    if m == 0:
        return QPResult(z0.copy(), np.zeros(0), "optimal", 0, np.zeros(0, dtype=int))
    r = b - A @ z0
    norms = np.sqrt((A * A).sum(axis=1))
    zero_rows = norms <= 1e-14
    if np.any(zero_rows & (r > feas_tol)):
        # a row 0 >= b with b > 0 cannot be satisfied by any z
        return QPResult(z0.copy(), np.zeros(m), "infeasible", 0, np.zeros(0, dtype=int))
    if float(np.max(r, initial=-np.inf)) <= 0.0:
        return QPResult(z0.copy(), np.zeros(m), "optimal", 0, np.zeros(0, dtype=int))
    keep = np.flatnonzero(~zero_rows)
    An = A[keep] / norms[keep, None]
    rn = r[keep] / norms[keep]
    E = np.vstack([An.T, rn[None, :]])
    f = np.zeros(d + 1)
    f[d] = 1.0
    warm_local = None
    if warm is not None and len(warm):
        remap = -np.ones(m, dtype=int)
        remap[keep] = np.arange(keep.size)
        warm_local = [remap[i] for i in warm if 0 <= i < m and remap[i] >= 0]
    u, iters = _nnls(E, f, warm=warm_local)
    rho = E @ u - f
    last = rho[d]
    scale = 1.0 + float(np.abs(rn).max())
    if rho @ rho <= 1e-24 or last >= -1e-12:
        return QPResult(z0.copy(), np.zeros(m), "infeasible", iters, np.zeros(0, dtype=int))
    z = z0 - rho[:d] / last
    lam = np.zeros(m)
    lam[keep] = (-2.0 * u / last) / norms[keep]
    feas = float(np.max(b - A @ z))
    if feas > feas_tol * scale:
        status = "degraded"
    else:
        status = "optimal"
    return QPResult(z, lam, status, iters, np.flatnonzero(lam > 1e-12))


def least_violation_point(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fallback for infeasible row sets: minimize the worst violation
    max_i (b_i - a_i z), then pick the minimum-norm point among near-optimal
    relaxations. Uses an LP for the minimax stage and the projection solver
    for the tie-break."""
    from scipy.optimize import linprog

    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    norms = np.sqrt((A * A).sum(axis=1))
    norms = np.where(norms > 1e-14, norms, 1.0)
    An, bn = A / norms[:, None], b / norms
    # variables (z, t): minimize the worst violation t >= 0 with a_i z + t >= b_i
    c = np.zeros(d + 1)
    c[d] = 1.0
    A_ub = np.hstack([-An, -np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=-bn,
                  bounds=[(None, None)] * d + [(0.0, None)], method="highs")
    if not res.success:
        return np.zeros(d)
    t_star = float(res.x[d])
    relaxed = bn - (t_star + 1e-9) - 1e-9
    out = project_polyhedron(np.zeros(d), An, relaxed)
    return out.z if out.status == "optimal" else np.asarray(res.x[:d])
