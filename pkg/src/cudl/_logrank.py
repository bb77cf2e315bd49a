"""Vectorized two-sample log-rank statistics for every candidate split of a node."""

import numpy as np

# bound on the (candidates x event times) work array
_BLOCK_CELLS = 4_000_000


def logrank_statistic(time, event, group):
    """Two-sample log-rank chi-square for a boolean group split (reference path)."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    group = np.asarray(group, dtype=bool)
    o = e = v = 0.0
    for u in np.unique(time[event == 1]):
        at_risk = time >= u
        y = at_risk.sum()
        y1 = (at_risk & group).sum()
        d = ((time == u) & (event == 1)).sum()
        d1 = ((time == u) & (event == 1) & group).sum()
        o += d1
        e += d * y1 / y
        if y > 1:
            v += d * (y1 / y) * (1 - y1 / y) * (y - d) / (y - 1)
    return (o - e) ** 2 / v if v > 0 else 0.0


def scan_splits(x, time, event, thresholds, min_leaf, weights=None):
    """Log-rank statistic of the split ``x <= c`` for each threshold ``c``.

    Parameters
    ----------
    x, time, event : arrays of shape (m,)
        Node rows; ``event`` is 0/1.
    thresholds : array of shape (K,), ascending
    min_leaf : int
        Splits leaving fewer (weighted) rows on either side score ``-inf``.
    weights : array of shape (m,), optional
        Integer row multiplicities (bootstrap counts).

    Returns
    -------
    stats : array of shape (K,)
    """
    thresholds = np.asarray(thresholds, dtype=float)
    K = thresholds.size
    out = np.full(K, -np.inf)
    if K == 0:
        return out
    w = np.ones(time.size) if weights is None else np.asarray(weights, dtype=float)
    ev = event == 1
    ev_times = np.unique(time[ev])
    J = ev_times.size
    seg = np.searchsorted(thresholds, x, side="left")  # row is left of threshold k iff seg <= k
    n_total = w.sum()
    n_left = np.cumsum(np.bincount(seg, weights=w, minlength=K + 1))[:K]
    ok = (n_left >= min_leaf) & (n_total - n_left >= min_leaf)
    if J == 0 or not ok.any():
        out[ok] = 0.0
        return out

    pos = np.searchsorted(ev_times, time, side="right")  # at risk at u_j iff j < pos
    at_risk_hist = np.bincount(pos, weights=w, minlength=J + 1)
    y_tot = np.cumsum(at_risk_hist[::-1])[::-1][1:]
    d_tot = np.bincount(pos[ev] - 1, weights=w[ev], minlength=J)
    with np.errstate(invalid="ignore", divide="ignore"):
        var_factor = np.where(y_tot > 1, d_tot * (y_tot - d_tot) / (y_tot - 1), 0.0)

    block = max(1, _BLOCK_CELLS // (J + 1))
    base_r = np.zeros(J + 1)
    base_d = np.zeros(J)
    for start in range(0, K, block):
        stop = min(K, start + block)
        in_blk = (seg >= start) & (seg < stop)
        s = seg[in_blk] - start
        hr = np.bincount(s * (J + 1) + pos[in_blk], weights=w[in_blk],
                         minlength=(stop - start) * (J + 1)).reshape(stop - start, J + 1)
        sel = in_blk & ev
        hd = np.bincount((seg[sel] - start) * J + pos[sel] - 1, weights=w[sel],
                         minlength=(stop - start) * J).reshape(stop - start, J)
        cr = np.cumsum(hr, axis=0) + base_r
        cd = np.cumsum(hd, axis=0) + base_d
        base_r, base_d = cr[-1].copy(), cd[-1].copy()
        y1 = np.cumsum(cr[:, ::-1], axis=1)[:, ::-1][:, 1:]
        frac = y1 / y_tot
        o = cd.sum(axis=1)
        e = (d_tot * frac).sum(axis=1)
        v = (var_factor * frac * (1.0 - frac)).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            stat = np.where(v > 0, (o - e) ** 2 / v, 0.0)
        out[start:stop] = np.where(ok[start:stop], stat, -np.inf)
    return out


def midpoints(x):
    """Midpoints between consecutive distinct sorted values of ``x``."""
    u = np.unique(x)
    return (u[:-1] + u[1:]) / 2.0
