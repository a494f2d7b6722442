"""Pure-Python versions of the compiled trial loops.

Same signatures, same arithmetic order where it matters; used when the
extension is not built or ``MOMENTUM_SA_PURE=1`` is set.
"""

from __future__ import annotations

import numpy as np

DIVERGENCE = 1e12

Q_WATKINS, Q_SNR, Q_POLSA, Q_POLSA_D, Q_NESA = range(5)
L_SA, L_SNR_IDEAL, L_SNR, L_POLSA_FIXED, L_POLSA, L_NESA = range(6)


def async_events(first, count, cum, goal, starts, u, x0):
    n = u.shape[0]
    n_states = cum.shape[1]
    pairs = np.empty(n, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    x = int(x0)
    n_starts = starts.shape[0]
    for k in range(n):
        a = min(int(u[k, 0] * count[x]), count[x] - 1)
        pair = int(first[x] + a)
        y = min(int(np.searchsorted(cum[pair], u[k, 1], side="right")), n_states - 1)
        pairs[k] = pair
        nxt[k] = y
        if x == goal:
            x = int(starts[min(int(u[k, 2] * n_starts), n_starts - 1)])
        else:
            x = y
    return pairs, nxt


def clock_events(cum, u, start):
    n = u.shape[0]
    d, n_states = cum.shape
    pairs = (start + np.arange(n, dtype=np.int64)) % d
    nxt = np.empty(n, dtype=np.int64)
    for p in range(d):
        mask = pairs == p
        nxt[mask] = np.searchsorted(cum[p], u[mask, 0], side="right")
    np.minimum(nxt, n_states - 1, out=nxt)
    return pairs, nxt


def _snapshot_start(snapshots, d, theta):
    n_snap = snapshots.shape[0]
    ts = np.full((n_snap, d), np.nan)
    dts = np.full((n_snap, d), np.nan)
    pos = 0
    if n_snap and snapshots[0] == 0:
        ts[0] = theta
        dts[0] = 0.0
        pos = 1
    return ts, dts, pos


def qlearn_run(code, beta, cost, first, count, pairs, nxt, theta0, clock, zeta, g, n0,
               pinv_tol, refresh, snapshots):
    d = cost.shape[0]
    n = pairs.shape[0]
    theta = np.array(theta0, dtype=float)
    dtheta = np.zeros(d)
    S = np.zeros((d, d))
    Sinv = np.zeros((d, d))
    counts = np.zeros(d, dtype=np.int64)
    covered = 0
    have_inv = False
    since_refresh = 0
    ts, dts, pos = _snapshot_start(snapshots, d, theta)
    n_snap = snapshots.shape[0]
    diverged = 0
    for k in range(n):
        n_new = k + 1
        i = int(pairs[k])
        x_next = int(nxt[k])
        block = theta[first[x_next]:first[x_next] + count[x_next]]
        j = int(first[x_next] + np.argmin(block))
        f = cost[i] + beta * theta[j] - theta[i]
        alpha = g / (n_new + n0)
        counts[i] += 1
        if counts[i] == 1:
            covered += 1
        if code == Q_SNR and have_inv:
            col = Sinv[:, i].copy()
            row = beta * Sinv[j, :] - Sinv[i, :]
            denom = 1.0 + beta * Sinv[j, i] - Sinv[i, i]
        S[i, j] += beta
        S[i, i] -= 1.0
        if code == Q_WATKINS:
            di = float(d) if clock else n_new / counts[i]
            dtheta = np.zeros(d)
            dtheta[i] = alpha * di * f
        elif code == Q_NESA:
            t = beta * dtheta[j] - dtheta[i]
            dtheta = dtheta.copy()
            dtheta[i] += zeta * t + zeta * alpha * f
        elif code in (Q_POLSA, Q_POLSA_D):
            tmp = S @ dtheta
            if code == Q_POLSA:
                dtheta = dtheta + zeta * tmp / n_new
                dtheta[i] += alpha * zeta * f
            else:
                safe = np.maximum(counts, 1)
                dtheta = dtheta + np.where(counts > 0, tmp / safe, 0.0)
                dtheta[i] += alpha * (n_new / counts[i]) * f
        else:
            if have_inv:
                since_refresh += 1
                if abs(denom) < 1e-12 or since_refresh >= refresh:
                    since_refresh = 0
                    try:
                        Sinv = np.linalg.inv(S)
                    except np.linalg.LinAlgError:
                        have_inv = False
                else:
                    Sinv -= np.outer(col / denom, row)
            elif covered == d:
                since_refresh = 0
                try:
                    Sinv = np.linalg.inv(S)
                    have_inv = True
                except np.linalg.LinAlgError:
                    have_inv = False
            if have_inv:
                dtheta = -alpha * n_new * f * Sinv[:, i]
            else:
                dtheta = -alpha * n_new * f * np.linalg.pinv(S, rcond=pinv_tol)[:, i]
        theta = theta + dtheta
        if not np.all(np.isfinite(theta)) or np.abs(theta).max() > DIVERGENCE:
            diverged = n_new
            break
        while pos < n_snap and snapshots[pos] == n_new:
            ts[pos] = theta
            dts[pos] = dtheta
            pos += 1
    return ts, dts, diverged


def linear_run(code, a_mean, perts, idx, noise, theta_star, theta0, zeta, g, n0, gain,
               snapshots):
    d = a_mean.shape[0]
    n = noise.shape[0]
    random_a = perts.shape[0] > 0
    theta = np.array(theta0, dtype=float)
    dtheta = np.zeros(d)
    a_hat = np.zeros((d, d))
    ts, dts, pos = _snapshot_start(snapshots, d, theta)
    n_snap = snapshots.shape[0]
    diverged = 0
    for k in range(n):
        n_new = k + 1
        alpha = g / (n_new + n0)
        ak = a_mean + perts[idx[k]] if random_a else a_mean
        f = noise[k] + ak @ (theta - theta_star)
        if code in (L_SNR, L_POLSA):
            a_hat = a_hat + (ak - a_hat) / n_new
        if code == L_SA:
            dtheta = alpha * (gain @ f)
        elif code == L_SNR_IDEAL:
            dtheta = -alpha * (gain @ f)
        elif code == L_SNR:
            try:
                dtheta = -alpha * np.linalg.solve(a_hat, f)
            except np.linalg.LinAlgError:
                dtheta = -alpha * (np.linalg.pinv(a_hat, rcond=1e-10) @ f)
        else:
            m = gain if code == L_POLSA_FIXED else (a_hat if code == L_POLSA else ak)
            dtheta = dtheta + zeta * (m @ dtheta) + alpha * zeta * f
        theta = theta + dtheta
        if not np.all(np.isfinite(theta)) or np.abs(theta).max() > DIVERGENCE:
            diverged = n_new
            break
        while pos < n_snap and snapshots[pos] == n_new:
            ts[pos] = theta
            dts[pos] = dtheta
            pos += 1
    return ts, dts, diverged
