"""Numpy implementation of the power-control kernels.

For a batch of beam directions ``u_j`` the kernels only need the gains
``gains[z, i, j] = u_j^H H_i u_j`` of candidate ``z``.  User ``i`` in group
``k`` is satisfied at level ``t`` when::

    p_k g[i, k] >= t gamma_i (sum_{j != k} p_j g[i, j] + sigma_i^2)

The least power vector meeting all users is the least fixed point of a
max of affine monotone maps; it is found by policy iteration (one binding
user per group, solve the linear system, switch to the most demanding user,
repeat).  Every visited policy gives a lower bound, and a policy whose
system has no positive solution proves infeasibility.
"""
from __future__ import annotations

import numpy as np

MAX_POLICY_STEPS = 100


def _coefficients(gains, gamma, sigma2, group_of, t):
    """B[z, i, :] and c[z, i] so that user i needs p_k >= B p + c."""
    Z, K, g = gains.shape
    t = np.broadcast_to(np.asarray(t, dtype=float), (Z,))
    own = gains[:, np.arange(K), group_of]  # Z x K
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = (t[:, None] * gamma[None, :]) / own
        B = gains * scale[:, :, None]
    B[:, np.arange(K), group_of] = 0.0
    c = scale * sigma2[None, :]
    dead = ~(own > 0)
    return B, c, dead


def min_power_batch(gains, gamma, sigma2, group_of, t_scale=1.0):
    """Least per-group powers meeting ``SINR_i >= t_scale * gamma_i``.

    Returns ``(p, feasible)`` with ``p`` of shape (Z, g); infeasible rows
    hold ``inf``.
    """
    gains = np.ascontiguousarray(gains, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    group_of = np.asarray(group_of, dtype=np.intp)
    Z, K, g = gains.shape
    B, c, dead = _coefficients(gains, gamma, sigma2, group_of, t_scale)
    feasible = ~np.any(dead, axis=1)
    members = [np.flatnonzero(group_of == k) for k in range(g)]
    # start from the user with the largest noise demand in each group
    policy = np.stack([m[np.argmax(np.where(dead[:, m], np.inf, c[:, m]), axis=1)] for m in members], axis=1)
    p = np.full((Z, g), np.inf)
    active = feasible.copy()
    eye = np.eye(g)
    for _ in range(MAX_POLICY_STEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        pol = policy[idx]
        Bp = np.take_along_axis(B[idx], pol[:, :, None], axis=1)
        cp = np.take_along_axis(c[idx], pol, axis=1)
        Mx = eye[None] - Bp
        with np.errstate(all="ignore"):
            try:
                sol = np.linalg.solve(Mx, cp[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                sol = np.stack([_safe_solve(m_, c_) for m_, c_ in zip(Mx, cp)])
        bad = ~np.all(np.isfinite(sol) & (sol > 0), axis=1)
        feasible[idx[bad]] = False
        active[idx[bad]] = False
        keep = ~bad
        idx, sol = idx[keep], sol[keep]
        p[idx] = sol
        demand = np.einsum("zij,zj->zi", B[idx], sol) + c[idx]  # Z' x K
        new = policy[idx].copy()
        for k, m in enumerate(members):
            cur = demand[np.arange(idx.size), policy[idx, k]]
            best = np.argmax(demand[:, m], axis=1)
            improve = demand[np.arange(idx.size), m[best]] > cur * (1 + 1e-12)
            new[improve, k] = m[best][improve]
        done = np.all(new == policy[idx], axis=1)
        policy[idx] = new
        active[idx[done]] = False
    p[~feasible] = np.inf
    return p, feasible


def _safe_solve(M, c):
    try:
        return np.linalg.solve(M, c[:, None])[:, 0]
    except np.linalg.LinAlgError:
        return np.full(c.shape, np.nan)


def scaled_sinr_batch(gains, p, gamma, sigma2, group_of):
    """min_i SINR_i / gamma_i for each candidate."""
    Z, K, g = gains.shape
    rx = gains * p[:, None, :]
    sig = rx[:, np.arange(K), group_of]
    interf = rx.sum(axis=2) - sig
    with np.errstate(divide="ignore", invalid="ignore"):
        s = sig / (interf + sigma2[None, :]) / gamma[None, :]
    s = np.where(np.isnan(s), 0.0, s)
    return s.min(axis=1)


def maxmin_power_batch(gains, gamma, sigma2, group_of, budget, rel_tol=1e-9):
    """Powers maximizing min_i SINR_i / gamma_i under ``sum p <= budget``.

    Bisection on the common level using :func:`min_power_batch`; the final
    power vector is scaled to the full budget and its level re-evaluated.
    Returns ``(p, t)``.
    """
    gains = np.ascontiguousarray(gains, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    group_of = np.asarray(group_of, dtype=np.intp)
    Z, K, g = gains.shape
    own = gains[:, np.arange(K), group_of]
    hi = np.min(budget * own / (gamma * sigma2)[None, :], axis=1)
    lo = np.zeros(Z)
    p_lo = np.zeros((Z, g))
    live = hi > 0
    for _ in range(200):
        if not np.any(live):
            break
        idx = np.flatnonzero(live)
        mid = 0.5 * (lo[idx] + hi[idx])
        p, ok = min_power_batch(gains[idx], gamma, sigma2, group_of, mid)
        ok &= p.sum(axis=1) <= budget
        lo[idx[ok]] = mid[ok]
        p_lo[idx[ok]] = p[ok]
        hi[idx[~ok]] = mid[~ok]
        live[idx] = (hi[idx] - lo[idx]) > rel_tol * hi[idx]
    tot = p_lo.sum(axis=1)
    scale = np.where(tot > 0, budget / np.where(tot > 0, tot, 1.0), 0.0)
    p = p_lo * scale[:, None]
    t = scaled_sinr_batch(gains, p, gamma, sigma2, group_of)
    t = np.where(tot > 0, t, 0.0)
    return p, t
