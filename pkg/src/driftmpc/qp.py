"""Dense primal active-set solver for strictly convex QPs.

Solves  min 0.5 x'Hx + g'x  subject to  Ax <= b  from a feasible start.
The problem sizes here (tens of variables, a few hundred rows) make a
dense method with exact KKT certificates the right tool.  Variables are
equilibrated internally (steering increments are radians, force increments
are newtons, so raw Hessians are badly conditioned).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InfeasibleQpError, QpIterationLimitError

FEAS_TOL = 1e-9
MULT_TOL = 1e-9


@dataclass
class QpResult:
    x: np.ndarray
    lam: np.ndarray        # multipliers for all rows, zero where inactive
    iterations: int
    active: list           # final working set (row indices)

    def kkt_residuals(self, H, g, A, b) -> dict:
        """Stationarity, primal feasibility and complementarity residuals."""
        grad = H @ self.x + g + A.T @ self.lam
        slack = A @ self.x - b
        return {
            "stationarity": float(np.abs(grad).max()) if grad.size else 0.0,
            "feasibility": float(max(slack.max(), 0.0)) if slack.size else 0.0,
            "complementarity": float(np.abs(self.lam * slack).max()) if slack.size else 0.0,
            "dual": float(max(-self.lam.min(), 0.0)) if slack.size else 0.0,
        }


def _polish(H, g, A, b, working: list[int], n: int):
    """Solve the equality-constrained KKT system at the final working set,
    with one iterative-refinement pass for tight residuals."""
    nw = len(working)
    if nw == 0:
        chol = cho_factor(H)
        x = -cho_solve(chol, g)
        x -= cho_solve(chol, H @ x + g)  # refinement
        return x, np.zeros(0)
    Aw = A[working]
    kkt = np.zeros((n + nw, n + nw))
    kkt[:n, :n] = H
    kkt[:n, n:] = Aw.T
    kkt[n:, :n] = Aw
    rhs = np.concatenate([-g, b[working]])
    try:
        sol = np.linalg.solve(kkt, rhs)
        resid = rhs - kkt @ sol
        sol += np.linalg.solve(kkt, resid)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def solve_qp(H: np.ndarray, g: np.ndarray, A: np.ndarray, b: np.ndarray,
             x0: np.ndarray | None = None, max_iter: int = 500) -> QpResult:
    n = H.shape[0]
    m = A.shape[0] if A is not None and A.size else 0
    if m == 0:
        A = np.zeros((0, n))
        b = np.zeros(0)

    # symmetric diagonal equilibration: work on x = D z with D = H_ii^(-1/2)
    d = 1.0 / np.sqrt(np.diag(H))
    Hs = H * d[:, None] * d[None, :]
    gs = g * d
    As = A * d[None, :]

    z = np.zeros(n) if x0 is None else np.asarray(x0, float) / d
    if m and float((As @ z - b).max()) > FEAS_TOL:
        raise InfeasibleQpError("starting point violates the constraints")

    chol = cho_factor(Hs)
    working: list[int] = []
    for it in range(1, max_iter + 1):
        grad = Hs @ z + gs
        if working:
            Aw = As[working]
            hinv_grad = cho_solve(chol, grad)
            hinv_awt = cho_solve(chol, Aw.T)
            gram = Aw @ hinv_awt
            rhs = -(Aw @ hinv_grad)
            try:
                lam_w = np.linalg.solve(gram, rhs)
            except np.linalg.LinAlgError:
                lam_w = np.linalg.lstsq(gram, rhs, rcond=None)[0]
            p = -(hinv_grad + hinv_awt @ lam_w)
        else:
            lam_w = np.zeros(0)
            p = -cho_solve(chol, grad)

        step_scale = max(1.0, float(np.abs(z).max(initial=0.0)))
        stationary = float(np.abs(p).max(initial=0.0)) < 1e-9 * step_scale
        if not stationary:
            # longest step before a new constraint blocks
            alpha = 1.0
            blocking = -1
            if m:
                ap = As @ p
                slack = b - As @ z
                candidates = ap > FEAS_TOL
                for i in working:
                    candidates[i] = False
                if candidates.any():
                    ratios = np.full(m, np.inf)
                    ratios[candidates] = slack[candidates] / ap[candidates]
                    i_min = int(np.argmin(ratios))
                    if ratios[i_min] < alpha:
                        alpha = max(float(ratios[i_min]), 0.0)
                        blocking = i_min
            z = z + alpha * p
            if blocking >= 0:
                working.append(blocking)
                continue
            # full step: z is now the subproblem minimizer and lam_w is its
            # multiplier vector, so fall through to the optimality check
        if working and float(lam_w.min()) < -MULT_TOL * max(1.0, float(np.abs(lam_w).max())):
            drop = working[int(np.argmin(lam_w))]
            working.remove(drop)
            continue
        zp, lam_p = _polish(Hs, gs, As, b, working, n)
        lam = np.zeros(m)
        for idx, row in enumerate(working):
            lam[row] = max(float(lam_p[idx]), 0.0)
        return QpResult(x=zp * d, lam=lam, iterations=it, active=list(working))
    raise QpIterationLimitError(f"active-set limit of {max_iter} iterations reached")
