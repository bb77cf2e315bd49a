"""Straight-line reference implementations used only by the tests.

They loop over atoms directly and share no code with the package beyond
the curve container.
"""

import numpy as np


def atoms(curve):
    """Completed curve as (times, masses): residual mass goes onto the last jump."""
    t = list(curve.jump_times)
    v = list(curve.values)
    masses = []
    prev = 1.0
    for i, value in enumerate(v):
        if i == len(v) - 1:
            value = 0.0
        masses.append(prev - value)
        prev = value
    return t, masses


def survival_at(curve, u):
    s = 1.0
    for t, v in zip(curve.jump_times, curve.values):
        if t <= u:
            s = v
    return s


def survival_left(curve, u):
    s = 1.0
    for t, v in zip(curve.jump_times, curve.values):
        if t < u:
            s = v
    return s


def cond_expect(curve, u, fn):
    """E_S[fn(T) | T >= u] summing atoms strictly after u; fn(u) if there are none."""
    ts, ms = atoms(curve)
    denom = survival_at(curve, u)
    num = 0.0
    any_after = False
    for t, m in zip(ts, ms):
        if t > u:
            any_after = True
            num += fn(t) * m
    if not any_after:
        return fn(u)
    return num / denom


def pseudo_response(time, event, g, s, h):
    """a_1 + b_1 - c_1 by direct summation."""
    gt = survival_at(g, time)
    a = event * h(time) / gt
    b = (1 - event) * cond_expect(s, time, h) / gt
    c = 0.0
    for u in g.jump_times:
        if u <= time:
            left = survival_left(g, u)
            right = survival_at(g, u)
            if left > 0:
                c += cond_expect(s, u, h) * ((left - right) / left) / right
    return a + b - c


def dr_loss(times, events, betas, g_curves, s_curves, h):
    """IPCW loss plus augmentation with m_L evaluated as a conditional expectation of the loss."""
    total = 0.0
    for t, e, beta, g, s in zip(times, events, betas, g_curves, s_curves):
        loss = lambda x: (h(x) - beta) ** 2  # noqa: E731
        gt = survival_at(g, t)
        ipcw = e * loss(t) / gt
        aug = (1 - e) * cond_expect(s, t, loss) / gt
        for u in g.jump_times:
            if u <= t:
                left, right = survival_left(g, u), survival_at(g, u)
                if left > 0:
                    aug -= cond_expect(s, u, loss) * ((left - right) / left) / right
        total += ipcw + aug
    return total / len(times)


def bj_loss(times, events, betas, s_curves, h):
    total = 0.0
    for t, e, beta, s in zip(times, events, betas, s_curves):
        loss = lambda x: (h(x) - beta) ** 2  # noqa: E731
        total += loss(t) if e else cond_expect(s, t, loss)
    return total / len(times)


def identity(x):
    return float(x)


def capped(tau):
    return lambda x: float(min(x, tau))


def indicator(t):
    return lambda x: float(x >= t)


def np_identity(x):
    return np.asarray(x, dtype=float)
