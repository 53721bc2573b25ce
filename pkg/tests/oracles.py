"""Slow, independent reference implementations used only by the tests."""

import math

import numpy as np

from structaware.autodiff import Tensor, concat


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` (x is modified in place and restored)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def scalar_log_softmax_ce(logits: np.ndarray, targets) -> float:
    """Cross entropy with plain Python loops and math.log/exp."""
    total = 0.0
    for row, t in zip(logits.tolist(), targets):
        m = max(row)
        lse = m + math.log(sum(math.exp(v - m) for v in row))
        total += lse - row[t]
    return total / len(targets)


def tensor_sinkhorn_divergence(x: Tensor, y: Tensor, eps_rel=0.05, scaling=0.5, iters=20):
    """Debiased divergence assembled from generic tensor ops (no fused node).

    Same schedule as the library solver with the stopping rule disabled:
    anneal from diam^2 to eps_rel * diam^2, run ``iters`` averaged updates in
    total, then one extrapolation step.
    """
    n, m = x.shape[0], y.shape[0]
    la, lb = math.log(1.0 / n), math.log(1.0 / m)

    def cost(p, q):
        diff = p.reshape(p.shape[0], 1, p.shape[1]) - q.reshape(1, q.shape[0], q.shape[1])
        return (diff * diff).sum(axis=2) * 0.5

    z = concat([x, y], axis=0)
    diam2 = ((z.max(axis=0) - z.min(axis=0)) ** 2).sum()
    d2 = float(diam2.data)
    final = eps_rel * diam2
    temps, k = [], 0
    while d2 * scaling ** k > eps_rel * d2:
        temps.append(diam2 * scaling ** k)
        k += 1
    temps.append(final)

    cxy, cyx, cxx, cyy = cost(x, y), cost(y, x), cost(x, x), cost(y, y)

    def softmin(eps, c, logw, pot):
        return -eps * (logw + (pot.reshape(1, -1) - c) / eps).logsumexp(axis=1)

    zero_n, zero_m = Tensor(np.zeros(n)), Tensor(np.zeros(m))
    f_ba = softmin(temps[0], cxy, lb, zero_m)
    g_ab = softmin(temps[0], cyx, la, zero_n)
    f_aa = softmin(temps[0], cxx, la, zero_n)
    g_bb = softmin(temps[0], cyy, lb, zero_m)
    steps = list(range(len(temps))) + [len(temps) - 1] * iters
    for t in steps[:iters]:
        eps = temps[t]
        ft = softmin(eps, cxy, lb, g_ab)
        gt = softmin(eps, cyx, la, f_ba)
        fa = softmin(eps, cxx, la, f_aa)
        gb = softmin(eps, cyy, lb, g_bb)
        f_ba, g_ab = (f_ba + ft) * 0.5, (g_ab + gt) * 0.5
        f_aa, g_bb = (f_aa + fa) * 0.5, (g_bb + gb) * 0.5
    eps = temps[-1]
    f_ba, g_ab, f_aa, g_bb = (softmin(eps, cxy, lb, g_ab), softmin(eps, cyx, la, f_ba),
                              softmin(eps, cxx, la, f_aa), softmin(eps, cyy, lb, g_bb))
    return (f_ba - f_aa).mean() + (g_ab - g_bb).mean()
