"""Small dense complex SDP solver.

Problems are stated over Hermitian PSD blocks ``X_b``::

    minimize / maximize   sum_b Re tr(C_b X_b)
    subject to            sum_b Re tr(A_cb X_b)  (>=, <=, =)  r_c
                          X_b >= 0

They are mapped to real symmetric blocks through
``[[Re H, -Im H], [Im H, Re H]]`` and solved by an infeasible primal-dual
path-following method with Nesterov-Todd scaling and a Mehrotra corrector.
1 x 1 blocks and inequality slacks live in a nonnegative orthant; the
phase-I slack of :func:`feasibility` is a free variable handled through an
augmented Newton system.

Every constraint row is scaled to unit Frobenius norm before solving, so
``feas_tol`` is an absolute tolerance on unit-scaled rows.

Triplet dump format (``dump_triplets``)::

    irsbeam-sdp 1
    sense <minimize|maximize|feasibility>
    blocks <n_1> ... <n_B>
    constraint <c> <rel> <rhs>          (one line per constraint, c >= 1)
    entry <c> <b> <i> <j> <re> <im>     (upper triangle, c = 0 is the objective)

All indices are 0-based except constraint numbers, which start at 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

RELATIONS = (">=", "<=", "=")
SENSES = ("minimize", "maximize", "feasibility")


@dataclass
class Constraint:
    """``sum_b Re tr(coeffs[b] X_b) relation rhs``."""

    coeffs: dict
    relation: str
    rhs: float


@dataclass
class SdpProblem:
    blocks: list
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    sense: str = "minimize"

    def add(self, coeffs: dict, relation: str, rhs: float) -> None:
        self.constraints.append(Constraint(coeffs, relation, float(rhs)))

    def validate(self, max_dim: int = 200, herm_tol: float = 1e-12) -> None:
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        if not self.blocks or min(self.blocks) < 1:
            raise ValueError("blocks must be positive sizes")
        if max(self.blocks) > max_dim:
            raise ValueError(f"block size {max(self.blocks)} exceeds cap {max_dim}")
        items = [(self.objective, "objective")] + [(c.coeffs, f"constraint {j}") for j, c in enumerate(self.constraints)]
        for coeffs, where in items:
            for b, A in coeffs.items():
                A = np.asarray(A)
                n = self.blocks[b]
                if A.shape != (n, n):
                    raise ValueError(f"{where}: block {b} has shape {A.shape}, expected {(n, n)}")
                if np.max(np.abs(A - A.conj().T), initial=0.0) > herm_tol * max(1.0, np.max(np.abs(A))):
                    raise ValueError(f"{where}: block {b} is not Hermitian")
                if not np.all(np.isfinite(A)):
                    raise ValueError(f"{where}: non-finite data")
        for j, c in enumerate(self.constraints):
            if c.relation not in RELATIONS:
                raise ValueError(f"constraint {j}: bad relation {c.relation!r}")
            if not np.isfinite(c.rhs):
                raise ValueError(f"constraint {j}: rhs not finite")

    def evaluate(self, X: list) -> tuple:
        """Objective and per-constraint left-hand sides at ``X``."""
        obj = sum(_retr(C, X[b]) for b, C in self.objective.items())
        lhs = np.array([sum(_retr(A, X[b]) for b, A in c.coeffs.items()) for c in self.constraints])
        return obj, lhs


@dataclass
class Tolerances:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-7
    max_iter: int = 200
    max_dim: int = 200
    inf_tol: float = 1e-8
    step_fraction: float = 0.98


@dataclass
class SdpSolution:
    X: list
    status: str
    objective: float
    violation: float
    gap: float
    iterations: int
    dual: np.ndarray | None = None
    dual_residual: float = float("nan")
    phase1_slack: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _retr(A, X):
    return float(np.real(np.sum(np.asarray(A) * np.asarray(X).T)))


def hermitian_real_embedding(H) -> np.ndarray:
    """``[[Re H, -Im H], [Im H, Re H]]`` for Hermitian ``H``."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise ValueError("matrix is not Hermitian")
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def _unembed(Y):
    n = Y.shape[0] // 2
    return 0.5 * (Y[:n, :n] + Y[n:, n:]) + 0.5j * (Y[n:, :n] - Y[:n, n:])


# ---------------------------------------------------------------------------
# real standard form
# ---------------------------------------------------------------------------

class _Std:
    """min <C,X> s.t. A(X) + F xf = b over PSD groups x orthant x free vars."""

    def __init__(self, m):
        self.m = m
        self.groups = []  # dicts: n, count, A (m,c,n,n), C (c,n,n)
        self.A_lp = np.zeros((m, 0))
        self.c_lp = np.zeros(0)
        self.A_f = np.zeros((m, 0))
        self.c_f = np.zeros(0)
        self.b = np.zeros(m)

    def Aop(self, X, x, xf):
        out = self.A_lp @ x + self.A_f @ xf
        for g, Xg in zip(self.groups, X):
            out = out + np.einsum("mcij,cij->m", g["A"], Xg)
        return out

    def ATop(self, y):
        return ([np.einsum("m,mcij->cij", y, g["A"]) for g in self.groups], self.A_lp.T @ y, self.A_f.T @ y)

    def cnorm(self):
        s = sum(np.sum(g["C"] ** 2) for g in self.groups) + np.sum(self.c_lp ** 2) + np.sum(self.c_f ** 2)
        return float(np.sqrt(s))


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _max_step(L_inv, D, x=None, dx=None):
    """Largest alpha with (X + alpha dX) PSD given inv(chol(X))."""
    alpha = np.inf
    if D is not None and D.size:
        S = _sym(L_inv @ D @ np.swapaxes(L_inv, -1, -2))
        emin = np.min(np.linalg.eigvalsh(S))
        if emin < 0:
            alpha = -1.0 / emin
    if x is not None and x.size:
        neg = dx < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-x[neg] / dx[neg])))
    return alpha


def _ipm(P: _Std, tol: Tolerances, mu0: float):
    m = P.m
    nu = sum(g["n"] * g["count"] for g in P.groups) + P.A_lp.shape[1]
    X = [mu0 * np.broadcast_to(np.eye(g["n"]), (g["count"], g["n"], g["n"])).copy() for g in P.groups]
    Z = [x.copy() for x in X]
    x = np.full(P.A_lp.shape[1], mu0)
    z = x.copy()
    xf = np.zeros(P.A_f.shape[1])
    y = np.zeros(m)
    nb = np.linalg.norm(P.b)
    nc = P.cnorm()
    ttarget = 0.1 * min(tol.feas_tol, tol.gap_tol)
    best = None
    stall = 0
    status, message = "max_iterations", "iteration cap reached"
    it = 0
    for it in range(1, tol.max_iter + 1):
        rp = P.b - P.Aop(X, x, xf)
        ATy, ATy_lp, ATy_f = P.ATop(y)
        Rd = [g["C"] - Zg - a for g, Zg, a in zip(P.groups, Z, ATy)]
        rd_lp = P.c_lp - z - ATy_lp
        rf = P.c_f - ATy_f
        pobj = sum(np.sum(g["C"] * Xg) for g, Xg in zip(P.groups, X)) + P.c_lp @ x + P.c_f @ xf
        dobj = P.b @ y
        comp = sum(np.sum(Xg * Zg) for Xg, Zg in zip(X, Z)) + x @ z
        mu = comp / nu if nu else 0.0
        relp = np.linalg.norm(rp) / (1.0 + nb)
        dres = np.sqrt(sum(np.sum(r ** 2) for r in Rd) + rd_lp @ rd_lp + rf @ rf)
        reld = dres / (1.0 + nc)
        relgap = max(abs(pobj - dobj), comp) / (1.0 + abs(pobj) + abs(dobj))
        state = (relp, reld, relgap)
        if relp <= tol.feas_tol and reld <= tol.feas_tol and relgap <= tol.gap_tol:
            if best is None or max(state) < max(best[0]):
                best = (state, [a.copy() for a in X], x.copy(), xf.copy(), y.copy(), [a.copy() for a in Z], z.copy())
        if relp <= ttarget and reld <= ttarget and relgap <= ttarget:
            status, message = "optimal", "converged"
            break
        # infeasibility rays
        if dobj > 0:
            ray = np.sqrt(sum(np.sum((a + Zg) ** 2) for a, Zg in zip(ATy, Z)) + np.sum((ATy_lp + z) ** 2)
                          + ATy_f @ ATy_f)
            if ray / dobj < tol.inf_tol and relp > tol.feas_tol:
                status, message = "infeasible", "primal infeasibility certificate (dual ray)"
                break
        if pobj < 0:
            ray = np.linalg.norm(P.Aop(X, x, xf)) + 0.0
            if ray / -pobj < tol.inf_tol and reld > tol.feas_tol:
                status, message = "numerical_failure", "dual infeasible (problem unbounded)"
                break

        # Nesterov-Todd scaling
        try:
            Ls = [np.linalg.cholesky(Xg) for Xg in X]
            Rs = [np.linalg.cholesky(Zg) for Zg in Z]
        except np.linalg.LinAlgError:
            status, message = "numerical_failure", "lost positive definiteness in scaling"
            break
        Gs, Gis, lams, Ws = [], [], [], []
        for L, R in zip(Ls, Rs):
            U, s, Vt = np.linalg.svd(np.swapaxes(R, -1, -2) @ L)
            if np.any(s <= 0):
                status, message = "numerical_failure", "degenerate scaling"
                break
            V = np.swapaxes(Vt, -1, -2)
            G = L @ V / np.sqrt(s)[:, None, :]
            Gs.append(G)
            Gis.append(np.linalg.inv(G))
            lams.append(s)
            Ws.append(G @ np.swapaxes(G, -1, -2))
        else:
            status = None
        if status is not None:
            break
        status, message = "max_iterations", "iteration cap reached"
        dlp = x / z if x.size else x

        Mat = (P.A_lp * dlp) @ P.A_lp.T
        for g, W in zip(P.groups, Ws):
            T = W[None] @ g["A"] @ W[None]
            Mat = Mat + g["A"].reshape(m, -1) @ T.reshape(m, -1).T
        Mat = 0.5 * (Mat + Mat.T)
        nf = P.A_f.shape[1]
        K = np.zeros((m + nf, m + nf))
        K[:m, :m] = Mat
        K[:m, m:] = P.A_f
        K[m:, :m] = P.A_f.T
        try:
            lu = scipy.linalg.lu_factor(K, check_finite=True)
        except (ValueError, np.linalg.LinAlgError):
            status, message = "numerical_failure", "singular Newton system"
            break

        def direction(Rc, r_lp):
            T = [R_ - W @ Rd_ @ W for R_, W, Rd_ in zip(Rc, Ws, Rd)]
            h = rp - P.Aop(T, r_lp - dlp * rd_lp, np.zeros(nf))
            sol = scipy.linalg.lu_solve(lu, np.concatenate([h, rf]))
            dy, dxf = sol[:m], sol[m:]
            a, a_lp, _ = P.ATop(dy)
            dZ = [Rd_ - a_ for Rd_, a_ in zip(Rd, a)]
            dX = [_sym(R_ - W @ dZ_ @ W) for R_, W, dZ_ in zip(Rc, Ws, dZ)]
            dz = rd_lp - a_lp
            dx = r_lp - dlp * dz
            return dX, dx, dxf, dy, dZ, dz

        def steps(dX, dx, dZ, dz):
            ap = _max_step_all(Ls, dX, x, dx)
            ad = _max_step_all(Rs, dZ, z, dz)
            return ap, ad

        # predictor
        Rc_aff = [-Xg for Xg in X]
        dXa, dxa, dxfa, dya, dZa, dza = direction(Rc_aff, -x)
        ap, ad = steps(dXa, dxa, dZa, dza)
        ap, ad = min(1.0, ap), min(1.0, ad)
        comp_a = sum(np.sum((Xg + ap * d1) * (Zg + ad * d2)) for Xg, d1, Zg, d2 in zip(X, dXa, Z, dZa)) \
            + (x + ap * dxa) @ (z + ad * dza)
        sigma = float(np.clip((comp_a / comp) ** 3, 0.0, 1.0)) if comp > 0 else 0.0
        smu = sigma * mu
        # corrector
        Rc = []
        for G, Gi, lam, d1, d2 in zip(Gs, Gis, lams, dXa, dZa):
            dXt = Gi @ d1 @ np.swapaxes(Gi, -1, -2)
            dZt = np.swapaxes(G, -1, -2) @ d2 @ G
            Hm = -_sym(dXt @ dZt)
            n = lam.shape[1]
            idx = np.arange(n)
            Hm[:, idx, idx] += smu - lam ** 2
            Rt = 2.0 * Hm / (lam[:, :, None] + lam[:, None, :])
            Rc.append(_sym(G @ Rt @ np.swapaxes(G, -1, -2)))
        r_lp = (smu - x * z - dxa * dza) / z if x.size else x
        dX, dx, dxf, dy, dZ, dz = direction(Rc, r_lp)
        ap, ad = steps(dX, dx, dZ, dz)
        ap = min(1.0, tol.step_fraction * ap)
        ad = min(1.0, tol.step_fraction * ad)
        X = [_sym(Xg + ap * d) for Xg, d in zip(X, dX)]
        x = x + ap * dx
        xf = xf + ap * dxf
        y = y + ad * dy
        Z = [_sym(Zg + ad * d) for Zg, d in zip(Z, dZ)]
        z = z + ad * dz
        if max(ap, ad) < 1e-10:
            stall += 1
            if stall >= 5:
                status, message = "numerical_failure", "step length collapsed"
                break
        else:
            stall = 0
    if status != "optimal" and status != "infeasible" and best is not None:
        _, X, x, xf, y, Z, z = best
        status, message = "optimal", f"accepted best iterate ({message})"
    return dict(X=X, x=x, xf=xf, y=y, Z=Z, z=z, status=status, message=message, iterations=it)


def _max_step_all(chols, D, v, dv):
    alpha = np.inf
    for L, d in zip(chols, D):
        alpha = min(alpha, _max_step(np.linalg.inv(L), d))
    if v.size:
        alpha = min(alpha, _max_step(None, None, v, dv))
    return alpha


# ---------------------------------------------------------------------------
# problem translation
# ---------------------------------------------------------------------------

def _row_norm(coeffs):
    return float(np.sqrt(sum(np.sum(np.abs(np.asarray(A)) ** 2) for A in coeffs.values())))


def _translate(blocks, objective, rows, free_cols, extra_lp=0):
    """Build the real standard form.

    ``rows`` is a list of (coeffs, relation, rhs) already unit-scaled.
    ``free_cols`` maps free-variable index -> per-row coefficient vector.
    ``extra_lp`` slack variables are appended for inequality rows.
    """
    m = len(rows)
    P = _Std(m)
    sizes = {}
    lp_blocks = [b for b, n in enumerate(blocks) if n == 1]
    for b, n in enumerate(blocks):
        if n > 1:
            sizes.setdefault(n, []).append(b)
    where = {}
    for n, members in sorted(sizes.items()):
        c = len(members)
        A = np.zeros((m, c, 2 * n, 2 * n))
        C = np.zeros((c, 2 * n, 2 * n))
        for pos, b in enumerate(members):
            where[b] = ("sdp", len(P.groups), pos)
            if b in objective:
                C[pos] = 0.5 * hermitian_real_embedding(objective[b])
            for r, (coeffs, _, _) in enumerate(rows):
                if b in coeffs:
                    A[r, pos] = 0.5 * hermitian_real_embedding(coeffs[b])
        P.groups.append(dict(n=2 * n, count=c, A=A, C=C, members=members))
    ineq = [r for r, (_, rel, _) in enumerate(rows) if rel != "="]
    n_lp = len(lp_blocks) + len(ineq)
    A_lp = np.zeros((m, n_lp))
    c_lp = np.zeros(n_lp)
    for pos, b in enumerate(lp_blocks):
        where[b] = ("lp", pos)
        if b in objective:
            c_lp[pos] = float(np.real(np.asarray(objective[b])[0, 0]))
        for r, (coeffs, _, _) in enumerate(rows):
            if b in coeffs:
                A_lp[r, pos] = float(np.real(np.asarray(coeffs[b])[0, 0]))
    for j, r in enumerate(ineq):
        A_lp[r, len(lp_blocks) + j] = -1.0 if rows[r][1] == ">=" else 1.0
    P.A_lp, P.c_lp = A_lp, c_lp
    P.A_f = np.column_stack([free_cols[k] for k in sorted(free_cols)]) if free_cols else np.zeros((m, 0))
    P.c_f = np.zeros(P.A_f.shape[1])
    P.b = np.array([rhs for _, _, rhs in rows], dtype=float)
    return P, where


def _extract(P, where, res, nblocks):
    X = []
    for b in range(nblocks):
        kind = where[b]
        if kind[0] == "sdp":
            X.append(_unembed(res["X"][kind[1]][kind[2]]))
        else:
            X.append(np.array([[complex(res["x"][kind[1]])]]))
    return X


def _prepare_rows(problem: SdpProblem, tol: Tolerances):
    """Unit-scale rows, settle constant rows and drop dependent equalities.

    Returns (rows, origin, const_slacks, infeasible_msg).
    """
    rows, origin, const_slacks = [], [], []
    for j, c in enumerate(problem.constraints):
        nrm = _row_norm(c.coeffs)
        if nrm <= 1e-300:
            slack = {">=": -c.rhs, "<=": c.rhs, "=": -abs(c.rhs)}[c.relation]
            const_slacks.append(slack)
            if slack < -tol.feas_tol:
                return None, None, const_slacks, f"constant constraint {j} violated by {-slack:.3e}"
            continue
        rows.append(({b: np.asarray(A, complex) / nrm for b, A in c.coeffs.items()}, c.relation, c.rhs / nrm))
        origin.append(j)
    eq = [r for r, row in enumerate(rows) if row[1] == "="]
    if len(eq) > 1:
        vecs = np.array([np.concatenate([np.concatenate([np.asarray(rows[r][0].get(b, np.zeros((n, n)))).real.ravel(),
                                                         np.asarray(rows[r][0].get(b, np.zeros((n, n)))).imag.ravel()])
                                         for b, n in enumerate(problem.blocks)]) for r in eq])
        rhs = np.array([rows[r][2] for r in eq])
        U, s, _ = np.linalg.svd(vecs)
        rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
        if rank < len(eq):
            resid = U[:, rank:].T @ rhs
            if np.max(np.abs(resid)) > tol.feas_tol * (1.0 + np.linalg.norm(rhs)):
                return None, None, const_slacks, "inconsistent equality constraints"
            _, _, piv = scipy.linalg.qr(vecs.T, pivoting=True)
            keep = set(eq[p] for p in piv[:rank])
            drop = set(eq) - keep
            rows = [row for r, row in enumerate(rows) if r not in drop]
            origin = [o for r, o in enumerate(origin) if r not in drop]
    return rows, origin, const_slacks, None


def _finish(problem, X, status, iterations, message, tol, y=None, dual_residual=float("nan"),
            phase1=None):
    obj, lhs = problem.evaluate(X)
    viol = 0.0
    for c, v in zip(problem.constraints, lhs):
        nrm = _row_norm(c.coeffs)
        nrm = nrm if nrm > 1e-300 else 1.0  # constant rows are checked in absolute terms
        d = {">=": c.rhs - v, "<=": v - c.rhs, "=": abs(v - c.rhs)}[c.relation]
        viol = max(viol, d / nrm)
    for Xb in X:
        e = np.linalg.eigvalsh(0.5 * (Xb + Xb.conj().T))
        viol = max(viol, -float(e.min()) / max(1.0, float(e.max())))
    return SdpSolution(X=X, status=status, objective=float(obj), violation=float(max(viol, 0.0)),
                       gap=float("nan"), iterations=iterations, dual=y, dual_residual=dual_residual,
                       phase1_slack=phase1, message=message)


def _zero_X(problem):
    return [np.zeros((n, n), complex) for n in problem.blocks]


def solve(problem: SdpProblem, tolerances: Tolerances | None = None) -> SdpSolution:
    """Solve ``problem``; ``feasibility`` sense is delegated to :func:`feasibility`."""
    tol = tolerances or Tolerances()
    problem.validate(tol.max_dim)
    if problem.sense == "feasibility":
        return feasibility(problem, tol)
    rows, origin, _, bad = _prepare_rows(problem, tol)
    if bad:
        return _finish(problem, _zero_X(problem), "infeasible", 0, bad, tol)
    cnrm = _row_norm(problem.objective) or 1.0
    sign = -1.0 if problem.sense == "maximize" else 1.0
    objective = {b: sign * np.asarray(C, complex) / cnrm for b, C in problem.objective.items()}
    if not rows:
        # only the cone constraints remain: X = 0 is optimal iff the cost is PSD
        psd = all(np.linalg.eigvalsh(objective[b]).min() >= -1e-12 for b in objective)
        status = "optimal" if psd else "numerical_failure"
        sol = _finish(problem, _zero_X(problem), status, 0, "no constraints" if psd else "unbounded", tol)
        sol.gap = 0.0
        return sol
    P, where = _translate(problem.blocks, objective, rows, {})
    mu0 = 1.0 + float(np.max(np.abs(P.b)))
    res = _ipm(P, tol, mu0)
    X = _extract(P, where, res, len(problem.blocks))
    y = np.zeros(len(problem.constraints))
    nrms = np.array([_row_norm(problem.constraints[o].coeffs) for o in origin])
    y[origin] = sign * res["y"] * cnrm / nrms
    ATy, ATy_lp, _ = P.ATop(res["y"])
    dres = np.sqrt(sum(np.sum((g["C"] - Zg - a) ** 2) for g, Zg, a in zip(P.groups, res["Z"], ATy))
                   + np.sum((P.c_lp - res["z"] - ATy_lp) ** 2))
    sol = _finish(problem, X, res["status"], res["iterations"], res["message"], tol, y, float(dres))
    dobj = sign * float(P.b @ res["y"]) * cnrm
    comp = (sum(np.sum(a * b) for a, b in zip(res["X"], res["Z"])) + res["x"] @ res["z"]) * cnrm
    sol.gap = float(max(abs(sol.objective - dobj), abs(comp)))
    if sol.status == "optimal" and (sol.violation > tol.feas_tol or sol.gap > tol.gap_tol * (1 + abs(sol.objective))):
        log.debug("tolerances missed after extraction: viol=%.2e gap=%.2e", sol.violation, sol.gap)
        sol.status = "max_iterations"
        sol.message = "tolerances not met after extraction"
    return sol


def feasibility(problem: SdpProblem, tolerances: Tolerances | None = None, slack_cap: float | None = 1.0,
                trace_cap: float | None = 1e6) -> SdpSolution:
    """Phase-I: maximize the smallest unit-scaled inequality slack.

    The problem is feasible iff that slack is >= ``-feas_tol``.  ``slack_cap``
    bounds the slack from above and ``trace_cap`` bounds sum_b tr(X_b)
    (relative to ``1 + max|rhs|``); pass ``None`` for either when the
    feasible set is already bounded.
    """
    tol = tolerances or Tolerances()
    problem.validate(tol.max_dim)
    rows, origin, const_slacks, bad = _prepare_rows(problem, tol)
    if bad:
        sol = _finish(problem, _zero_X(problem), "infeasible", 0, bad, tol,
                      phase1=min(const_slacks) if const_slacks else None)
        return sol
    if not rows:
        sol = _finish(problem, _zero_X(problem), "optimal", 0, "trivially feasible", tol,
                      phase1=min(const_slacks) if const_slacks else None)
        sol.gap = 0.0
        return sol
    ineq = [r for r, row in enumerate(rows) if row[1] != "="]
    rows = list(rows)
    free = {}
    if ineq:
        col = np.zeros(len(rows))
        for r in ineq:
            col[r] = -1.0 if rows[r][1] == ">=" else 1.0
        free[0] = col
    nblocks = len(problem.blocks)
    blocks = list(problem.blocks)
    rmax = max(abs(r[2]) for r in rows)
    if trace_cap is not None:
        cap = trace_cap * (1.0 + rmax)
        coeffs = {b: np.eye(n) for b, n in enumerate(blocks)}
        nrm = _row_norm(coeffs)
        rows.append(({b: A / nrm for b, A in coeffs.items()}, "<=", cap / nrm))
        if free:
            free[0] = np.append(free[0], 0.0)
    objective = {}
    if free:
        if slack_cap is not None:
            # s + u = cap with u >= 0 held in an auxiliary 1x1 block
            blocks.append(1)
            u = len(blocks) - 1
            rows.append(({u: np.ones((1, 1))}, "=", float(slack_cap)))
            free[0] = np.append(free[0], 1.0)
    P, where = _translate(blocks, objective, rows, free)
    if free:
        P.c_f = np.array([-1.0])
    mu0 = 1.0 + float(np.max(np.abs(P.b)))
    res = _ipm(P, tol, mu0)
    X = _extract(P, where, res, nblocks)
    s = float(res["xf"][0]) if free else 0.0
    if const_slacks:
        s = min(s, min(const_slacks))
    status = res["status"]
    if status == "optimal" and free and s < -tol.feas_tol:
        status = "infeasible"
    sol = _finish(problem, X, status, res["iterations"], res["message"], tol, phase1=s if free else None)
    sol.gap = float(abs(P.c_f @ res["xf"] - P.b @ res["y"])) if free else 0.0
    if status == "optimal" and sol.violation > tol.feas_tol:
        sol.status = "max_iterations"
        sol.message = "feasible point not recovered to tolerance"
    return sol


# ---------------------------------------------------------------------------
# triplet text format
# ---------------------------------------------------------------------------

def dump_triplets(problem: SdpProblem, fp) -> None:
    fp.write("irsbeam-sdp 1\n")
    fp.write(f"sense {problem.sense}\n")
    fp.write("blocks " + " ".join(str(n) for n in problem.blocks) + "\n")
    for c, con in enumerate(problem.constraints, start=1):
        fp.write(f"constraint {c} {con.relation} {float(con.rhs)!r}\n")
    for c, coeffs in enumerate([problem.objective] + [con.coeffs for con in problem.constraints]):
        for b in sorted(coeffs):
            A = np.asarray(coeffs[b], complex)
            for i, j in zip(*np.triu_indices(A.shape[0])):
                if A[i, j] != 0:
                    fp.write(f"entry {c} {b} {i} {j} {float(A[i, j].real)!r} {float(A[i, j].imag)!r}\n")


def load_triplets(fp) -> SdpProblem:
    lines = [ln.split() for ln in fp.read().splitlines() if ln.strip()]
    if lines[0][:2] != ["irsbeam-sdp", "1"]:
        raise ValueError("not an irsbeam triplet file")
    sense = lines[1][1]
    blocks = [int(t) for t in lines[2][1:]]
    cons = {}
    mats = {}
    for tok in lines[3:]:
        if tok[0] == "constraint":
            cons[int(tok[1])] = (tok[2], float(tok[3]))
        elif tok[0] == "entry":
            c, b, i, j = map(int, tok[1:5])
            val = complex(float(tok[5]), float(tok[6]))
            A = mats.setdefault((c, b), np.zeros((blocks[b], blocks[b]), complex))
            A[i, j] = val
            A[j, i] = np.conj(val)
    prob = SdpProblem(blocks, {b: A for (c, b), A in mats.items() if c == 0}, [], sense)
    for c in sorted(cons):
        rel, rhs = cons[c]
        prob.add({b: A for (cc, b), A in mats.items() if cc == c}, rel, rhs)
    return prob
