"""Debiased Sinkhorn divergence between point clouds, solved in the log domain.

A matrix enters as a point cloud: each of its rows is a point, weighted
uniformly unless weights are given.  The ground cost is ``C(a, b) = |a - b|^2 / 2``.

The solver anneals the temperature geometrically from the squared cloud
diameter down to the target ``epsilon`` and then iterates at the target until
the potentials stop moving.  All four dual potentials (cross and self terms)
use averaged symmetric updates, so ``S(x, x)`` cancels to exactly zero.

Gradients come from reverse-mode differentiation through every unrolled
iteration, including the dependence of the temperature schedule on the
diameter; :func:`sinkhorn_divergence_tensor` exposes this as one fused node
of the :mod:`structaware.autodiff` graph.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Tensor, custom_op
from .errors import DimensionMismatch, NotConverged

_DIAM2_FLOOR = 1e-12


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    ``epsilon`` is the final temperature in squared-distance units; when it is
    ``None`` the temperature is ``eps_rel * diameter**2`` for each input pair.
    ``tol = 0`` disables the stopping rule so exactly ``max_iters`` updates run,
    which keeps the unrolled graph fixed (handy for finite-difference checks).
    """

    epsilon: float | None = None
    eps_rel: float = 0.05
    scaling: float = 0.5
    max_iters: int = 200
    tol: float = 1e-6
    p: int = 2

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.eps_rel > 0:
            raise ValueError("eps_rel must be positive")
        if not 0 < self.scaling < 1:
            raise ValueError("scaling must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.p != 2:
            raise ValueError("only the squared Euclidean cost (p = 2) is supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "SinkhornConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sinkhorn config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class SinkhornResult:
    value: float
    f: np.ndarray
    g: np.ndarray
    iters: int
    converged: bool
    epsilon: float
    last_change: float = math.inf
    # reverse-mode tape; not part of the public result
    _tape: object = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"value": float(self.value), "iters": int(self.iters),
                "converged": bool(self.converged)}


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs an (m, k) array with m >= 1")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ValueError("one weight per point is required")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "PointCloud":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    def __len__(self):
        return self.points.shape[0]


def _cloud(obj) -> PointCloud:
    return obj if isinstance(obj, PointCloud) else PointCloud.uniform(obj)


def cost_matrix(x, y) -> np.ndarray:
    """``C[i, j] = |x_i - y_j|^2 / 2`` from explicit differences (exactly symmetric)."""
    xp, yp = _cloud(x).points, _cloud(y).points
    if xp.shape[1] != yp.shape[1]:
        raise DimensionMismatch(f"point dimensions differ: {xp.shape[1]} vs {yp.shape[1]}")
    diff = xp[:, None, :] - yp[None, :, :]
    return 0.5 * np.einsum("ijk,ijk->ij", diff, diff)


def _cost_vjp(x, y, gc):
    """Gradients of ``sum(gc * C(x, y))`` with respect to x and y."""
    row, col = gc.sum(1), gc.sum(0)
    gx = row[:, None] * x - gc @ y
    gy = col[:, None] * y - gc.T @ x
    return gx, gy


def squared_diameter(x, y) -> float:
    """Squared diagonal of the bounding box of both clouds."""
    z = np.vstack([_cloud(x).points, _cloud(y).points])
    return float(((z.max(0) - z.min(0)) ** 2).sum())


def _diameter_vjp(x, y, gd):
    z = np.vstack([x, y])
    hi, lo = z.argmax(0), z.argmin(0)
    span = z.max(0) - z.min(0)
    gz = np.zeros_like(z)
    cols = np.arange(z.shape[1])
    np.add.at(gz, (hi, cols), 2 * span * gd)
    np.add.at(gz, (lo, cols), -2 * span * gd)
    return gz[: len(x)], gz[len(x):]


def _schedule(diam2: float, cfg: SinkhornConfig):
    """Temperatures as ``(value, coefficient)``; coefficient is d(eps)/d(diam2).

    A ``None`` coefficient marks a temperature that does not depend on the data.
    """
    if cfg.epsilon is None:
        final, final_coef = cfg.eps_rel * diam2, cfg.eps_rel
    else:
        final, final_coef = cfg.epsilon, None
    temps = []
    k = 0
    while diam2 * cfg.scaling ** k > final:
        temps.append((diam2 * cfg.scaling ** k, cfg.scaling ** k))
        k += 1
    temps.append((final, final_coef))
    return temps


def _softmin(eps, cost, logw, pot):
    """``-eps * log sum_j w_j exp((pot_j - cost_ij) / eps)`` plus the softmax plan."""
    z = logw[None, :] + (pot[None, :] - cost) / eps
    zmax = z.max(1, keepdims=True)
    e = np.exp(z - zmax)
    s = e.sum(1, keepdims=True)
    out = -eps * (zmax[:, 0] + np.log(s[:, 0]))
    return out, e / s


class _Problem:
    """The coupled potentials of one solve.

    Potential ``k`` is updated from potential ``src[k]`` through cost ``costs[k]``
    and the log-weights of the opposite measure.
    """

    def __init__(self, costs, logws, src):
        self.costs, self.logws, self.src = costs, logws, src

    def sweep(self, eps, pots):
        return [_softmin(eps, self.costs[k], self.logws[k], pots[self.src[k]])
                for k in range(len(pots))]


def _solve(x, y, a, b, cfg: SinkhornConfig, debias: bool, keep_tape: bool):
    cxy = cost_matrix(x, y)
    la, lb = np.log(a), np.log(b)
    costs, logws, src = [cxy, cxy.T], [lb, la], [1, 0]
    if debias:
        costs += [cost_matrix(x, x), cost_matrix(y, y)]
        logws += [la, lb]
        src += [2, 3]
    prob = _Problem(costs, logws, src)
    diam2_raw = squared_diameter(x, y)
    diam2 = max(diam2_raw, _DIAM2_FLOOR)
    temps = _schedule(diam2, cfg)
    tape = []  # entries: (kind, temp_index, inputs, outputs, plans)

    zeros = [np.zeros(len(logws[src.index(k)])) for k in range(len(logws))]
    first = prob.sweep(temps[0][0], zeros)
    pots = [o for o, _ in first]
    if keep_tape:
        tape.append(("init", 0, zeros, pots, [p for _, p in first]))

    iters, converged, change = 0, False, math.inf
    steps = list(range(len(temps))) + [len(temps) - 1] * cfg.max_iters
    for t in steps:
        if iters >= cfg.max_iters:
            break
        annealing = t < len(temps) - 1
        swept = prob.sweep(temps[t][0], pots)
        new = [0.5 * (p + o) for p, (o, _) in zip(pots, swept)]
        change = max(float(np.abs(n - p).max()) for n, p in zip(new, pots))
        if keep_tape:
            tape.append(("avg", t, pots, [o for o, _ in swept], [p for _, p in swept]))
        pots = new
        iters += 1
        if not annealing and cfg.tol > 0 and change <= cfg.tol:
            converged = True
            break

    last = len(temps) - 1
    swept = prob.sweep(temps[last][0], pots)
    if keep_tape:
        tape.append(("final", last, pots, [o for o, _ in swept], [p for _, p in swept]))
    pots = [o for o, _ in swept]

    if debias:
        value = a @ (pots[0] - pots[2]) + b @ (pots[1] - pots[3])
        signs = [1.0, 1.0, -1.0, -1.0]
    else:
        value = a @ pots[0] + b @ pots[1]
        signs = [1.0, 1.0]
    weights = [a, b, a, b][: len(pots)]
    aux = dict(prob=prob, temps=temps, signs=signs, weights=weights, tape=tape,
               diam2_floored=diam2_raw < _DIAM2_FLOOR, debias=debias)
    result = SinkhornResult(float(value), pots[0], pots[1], iters, converged,
                            temps[last][0], change, aux if keep_tape else None)
    return result


def _backward(x, y, result: SinkhornResult, upstream: float = 1.0):
    """Reverse sweep through the recorded iterations."""
    aux = result._tape
    prob, temps, tape = aux["prob"], aux["temps"], aux["tape"]
    n_pot = len(prob.costs)
    adj = [upstream * s * w for s, w in zip(aux["signs"], aux["weights"])]
    adj_cost = [np.zeros_like(c) for c in prob.costs]
    adj_temp = np.zeros(len(temps))

    def through_softmin(k, up, t, pot_in, out, plan):
        """Accumulate into cost/temperature adjoints; return the input-potential adjoint."""
        eps = temps[t][0]
        cost = prob.costs[k]
        adj_cost[k] += up[:, None] * plan
        inner = (plan * (pot_in[None, :] - cost)).sum(1)
        adj_temp[t] += up @ (out + inner) / eps
        return -(up @ plan)

    for kind, t, inputs, outs, plans in reversed(tape):
        new_adj = [np.zeros_like(v) for v in adj] if kind != "avg" else [0.5 * v for v in adj]
        for k in range(n_pot):
            up = adj[k] if kind != "avg" else 0.5 * adj[k]
            g_in = through_softmin(k, up, t, inputs[prob.src[k]], outs[k], plans[k])
            if kind != "init":
                new_adj[prob.src[k]] = new_adj[prob.src[k]] + g_in
        adj = new_adj

    gx, gy = _cost_vjp(x, y, adj_cost[0] + adj_cost[1].T)
    if aux["debias"]:
        g1, g2 = _cost_vjp(x, x, adj_cost[2])
        gx = gx + g1 + g2
        g1, g2 = _cost_vjp(y, y, adj_cost[3])
        gy = gy + g1 + g2
    if not aux["diam2_floored"]:
        d_diam2 = sum(adj_temp[i] * coef for i, (_, coef) in enumerate(temps) if coef is not None)
        if d_diam2:
            ex, ey = _diameter_vjp(x, y, d_diam2)
            gx, gy = gx + ex, gy + ey
    return gx, gy


def _prepare(x, y):
    cx, cy = _cloud(x), _cloud(y)
    if cx.points.shape[1] != cy.points.shape[1]:
        raise DimensionMismatch(
            f"point dimensions differ: {cx.points.shape[1]} vs {cy.points.shape[1]}")
    return cx, cy


def _finish(result: SinkhornResult, strict: bool) -> SinkhornResult:
    if strict and not result.converged:
        raise NotConverged(
            f"no convergence after {result.iters} iterations "
            f"(last change {result.last_change:.3g})", result)
    return result


def ot_eps(x, y, cfg: SinkhornConfig = SinkhornConfig(), strict: bool = False) -> SinkhornResult:
    """Entropic transport cost ``<a, f> + <b, g>`` at the converged potentials."""
    cx, cy = _prepare(x, y)
    res = _solve(cx.points, cy.points, cx.weights, cy.weights, cfg, debias=False,
                 keep_tape=False)
    return _finish(res, strict)


def sinkhorn_divergence(x, y, cfg: SinkhornConfig = SinkhornConfig(),
                        strict: bool = False) -> SinkhornResult:
    """``S(x, y) = OT(x, y) - OT(x, x)/2 - OT(y, y)/2``.

    ``f`` and ``g`` in the result are the cross potentials on x and y.
    With ``strict`` an unconverged solve raises :class:`NotConverged`
    (which carries the result); otherwise ``converged`` reports it.
    """
    cx, cy = _prepare(x, y)
    res = _solve(cx.points, cy.points, cx.weights, cy.weights, cfg, debias=True,
                 keep_tape=False)
    return _finish(res, strict)


def sinkhorn_backward(x, y, cfg: SinkhornConfig = SinkhornConfig(), upstream: float = 1.0,
                      wrt_y: bool = False):
    """Gradient of ``upstream * S(x, y)`` with respect to the coordinates of x (and y)."""
    cx, cy = _prepare(x, y)
    res = _solve(cx.points, cy.points, cx.weights, cy.weights, cfg, debias=True,
                 keep_tape=True)
    gx, gy = _backward(cx.points, cy.points, res, upstream)
    return (gx, gy) if wrt_y else gx


def sinkhorn_divergence_tensor(x: Tensor, y: Tensor, cfg: SinkhornConfig = SinkhornConfig()):
    """Differentiable ``S(x, y)`` for uniform clouds given as 2-D tensors.

    Returns ``(scalar tensor, SinkhornResult)``.
    """
    xd, yd = np.asarray(x.data, np.float64), np.asarray(y.data, np.float64)
    if xd.ndim != 2 or yd.ndim != 2:
        raise ValueError("expected 2-D point clouds")
    if xd.shape[1] != yd.shape[1]:
        raise DimensionMismatch(f"point dimensions differ: {xd.shape[1]} vs {yd.shape[1]}")
    a = np.full(len(xd), 1.0 / len(xd))
    b = np.full(len(yd), 1.0 / len(yd))
    needs = any(isinstance(t, Tensor) and t.requires_grad for t in (x, y))
    res = _solve(xd, yd, a, b, cfg, debias=True, keep_tape=needs)

    def back(g):
        gx, gy = _backward(xd, yd, res, float(g))
        return gx, gy

    out = custom_op(np.array(res.value), (x, y), back)
    return out, res
