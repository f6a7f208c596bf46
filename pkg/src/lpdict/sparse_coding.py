"""Penalized least-squares coding of signals against a fixed dictionary.

Solves ``min_a 0.5*||x - D a||^2 + g(a)`` with ``g(a) = ||a/lam||_p^q`` for
one signal or a whole column-stacked batch.

Solver routes:

* q == p: the penalty is coordinate-separable, so a proximal-gradient loop
  with backtracking does the work. The 1-D prox subproblem has closed forms
  for p in {1, 2} and is solved by a bracketed bisection on the stationarity
  equation (plus an explicit comparison with 0) for every other exponent.
* (p, q) == (2, 1): the penalty is a scaled l2 norm, whose prox is columnwise
  soft shrinkage, so the same proximal-gradient loop applies.
* anything else: gradient descent on a smoothed objective where ``||.||_p``
  is replaced by ``(sum (v_i^2 + eps)^(p/2))^(1/p)``, polished by an
  eps -> eps/1000 continuation in three stages.

Nonconvex exponents (p < 1 or q < 1) get deterministic multi-start. Every
path ends with an explicit comparison against a = 0, so a returned objective
never exceeds ``0.5*||x||^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    TOL_BALL,
    CoeffMatrix,
    Dictionary,
    Penalty,
    SignalSet,
    l1_bound_from_penalty,
    penalty_eval,
)

__all__ = [
    "SolverConfig",
    "CodingResult",
    "objective",
    "sparse_code",
    "batch_objective",
    "brute_force_code",
    "is_eps_near_solution",
    "grid_resolution_error",
]

_MAX_BACKTRACKS = 60
_BISECT_ITERS = 60
_SMALL_PROX_SIZE = 48  # below this, scalar loops beat numpy dispatch overhead


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the iterative coder; defaults suit unit-ball signals."""

    max_iters: int = 5000
    step_shrink: float = 0.5
    grad_tol: float = 1e-10
    obj_tol: float = 1e-8
    restarts: int = 5
    smoothing_eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.grad_tol <= 0.0 or self.obj_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if int(self.restarts) < 1:
            raise ValueError("restarts must be >= 1")
        if self.smoothing_eps < 0.0:
            raise ValueError("smoothing_eps must be nonnegative")
        if int(self.seed) < 0:
            raise ValueError("seed must be an unsigned integer")


@dataclass(frozen=True)
class CodingResult:
    """Outcome of coding one signal: coefficients plus diagnostics."""

    coeffs: np.ndarray
    objective: float
    residual_norm: float
    iterations: int
    converged: bool


def _atoms_of(D) -> np.ndarray:
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)


def _signals_of(X) -> np.ndarray:
    return X.signals if isinstance(X, SignalSet) else np.asarray(X, dtype=float)


def _col_sq(M: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", M, M)


def objective(x, D, a, pen: Penalty) -> float:
    """Per-sample coding objective ``0.5*||x - D a||^2 + g(a)``."""
    atoms = _atoms_of(D)
    x = np.asarray(x, dtype=float).ravel()
    a = np.asarray(a, dtype=float).ravel()
    if x.shape[0] != atoms.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} does not match dictionary rows {atoms.shape[0]}")
    if a.shape[0] != atoms.shape[1]:
        raise ValueError(f"coefficient length {a.shape[0]} does not match atom count {atoms.shape[1]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(a))):
        raise ValueError("inputs must be finite")
    r = x - atoms @ a
    return float(0.5 * (r @ r) + penalty_eval(a, pen))


def _penalty_cols(A: np.ndarray, pen: Penalty) -> np.ndarray:
    """g evaluated on every column at once."""
    if pen.p == 1.0:
        S = np.sum(np.abs(A), axis=0) / pen.lam
    elif pen.p == 2.0:
        S = _col_sq(A) / (pen.lam * pen.lam)
    else:
        S = np.sum((np.abs(A) / pen.lam) ** pen.p, axis=0)
    if pen.separable:
        return S
    return S ** (pen.q / pen.p)


# ---------------------------------------------------------------------------
# proximal operators


def _prox_power_scalar(z: float, s: float, p: float) -> float:
    """Global minimizer of ``0.5*(a - z)^2 + s*|a|^p`` for one scalar."""
    if s == 0.0 or z == 0.0:
        return z
    y = abs(z)
    sign = 1.0 if z > 0 else -1.0
    if p > 1.0:
        # psi(a) = a - y + s*p*a^(p-1) is increasing with a root in (0, y)
        lo, hi = 0.0, y
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if mid - y + s * p * mid ** (p - 1.0) > 0.0:
                hi = mid
            else:
                lo = mid
        return sign * 0.5 * (lo + hi)
    # p < 1: either 0 or the larger root of psi on [a_c, y], whichever is cheaper
    a_c = (s * p * (1.0 - p)) ** (1.0 / (2.0 - p))
    if a_c >= y or a_c - y + s * p * a_c ** (p - 1.0) >= 0.0:
        return 0.0
    lo, hi = a_c, y
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid - y + s * p * mid ** (p - 1.0) > 0.0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    if 0.5 * (root - y) ** 2 + s * root**p < 0.5 * y * y:
        return sign * root
    return 0.0


def _prox_power_vector(Z: np.ndarray, s, p: float) -> np.ndarray:
    """Vectorized version of `_prox_power_scalar`; s broadcasts over Z."""
    y = np.abs(Z)
    s = np.broadcast_to(np.asarray(s, dtype=float), Z.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if p > 1.0:
            lo = np.zeros_like(y)
            hi = y.copy()
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                up = mid - y + s * p * mid ** (p - 1.0) > 0.0
                hi = np.where(up, mid, hi)
                lo = np.where(up, lo, mid)
            a = 0.5 * (lo + hi)
        else:
            a_c = (s * p * (1.0 - p)) ** (1.0 / (2.0 - p))
            safe = np.where(a_c > 0.0, a_c, 1.0)
            psi_c = a_c - y + s * p * safe ** (p - 1.0)
            interior = (a_c < y) & (psi_c < 0.0) & (s > 0.0) & (y > 0.0)
            lo = np.where(interior, a_c, 0.0)
            hi = np.where(interior, y, 0.0)
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                safe = np.where(mid > 0.0, mid, 1.0)
                up = mid - y + s * p * safe ** (p - 1.0) > 0.0
                hi = np.where(up & interior, mid, hi)
                lo = np.where(up | ~interior, lo, mid)
            root = 0.5 * (lo + hi)
            take = interior & (0.5 * (root - y) ** 2 + s * root**p < 0.5 * y * y)
            a = np.where(take, root, 0.0)
        a = np.where(s == 0.0, y, a)
    return np.sign(Z) * a


def _prox_step(Z: np.ndarray, steps, pen: Penalty) -> np.ndarray:
    """Prox of ``step * g`` applied columnwise; `steps` is scalar or per-column."""
    if pen.separable:
        s = np.asarray(steps, dtype=float) * pen.lam ** (-pen.p)
        if pen.p == 1.0:
            return np.sign(Z) * np.maximum(np.abs(Z) - s, 0.0)
        if pen.p == 2.0:
            return Z / (1.0 + 2.0 * s)
        if Z.size <= _SMALL_PROX_SIZE and np.ndim(s) == 0:
            sf = float(s)
            out = np.empty_like(Z)
            flat_in, flat_out = Z.ravel(), out.ravel()
            for i in range(flat_in.size):
                flat_out[i] = _prox_power_scalar(float(flat_in[i]), sf, pen.p)
            return out
        return _prox_power_vector(Z, s, pen.p)
    if pen.p == 2.0 and pen.q == 1.0:
        t = np.asarray(steps, dtype=float) / pen.lam
        norms = np.sqrt(_col_sq(Z))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > 0.0, np.maximum(1.0 - t / norms, 0.0), 0.0)
        return Z * scale
    raise ValueError(f"no prox route for exponents (p={pen.p}, q={pen.q})")


def _has_prox(pen: Penalty) -> bool:
    return pen.separable or (pen.p == 2.0 and pen.q == 1.0)


# ---------------------------------------------------------------------------
# proximal-gradient batch solver


def _top_eigenvalue(G: np.ndarray) -> float:
    if G.shape[0] == 1:
        return float(G[0, 0])
    return float(np.linalg.eigvalsh(G)[-1])


def _fit_cols(B, G, hb, bb):
    return bb - np.einsum("ij,ij->j", hb, B) + 0.5 * np.einsum("ij,ij->j", B, G @ B)


def _prox_grad_descent(G, h, base, pen: Penalty, cfg: SolverConfig, A0):
    """Monotone proximal gradient over all columns with per-column steps.

    The quadratic fit term is evaluated through the Gram matrix, so the cost
    per iteration is independent of the signal dimension. Converged columns
    retire into the output arrays immediately; the working arrays are
    physically compacted only when enough columns have retired, which keeps
    both the copying and the wasted arithmetic at a bounded fraction.
    """
    n = h.shape[1]
    step0 = 1.0 / max(_top_eigenvalue(G), 1e-12)

    A_out = np.array(A0, dtype=float)
    obj_out = _fit_cols(A_out, G, h, base) + _penalty_cols(A_out, pen)
    iters_out = np.zeros(n, dtype=int)
    conv_out = np.zeros(n, dtype=bool)

    idx = np.arange(n)  # working column -> original column
    alive = np.ones(n, dtype=bool)
    Aw = np.array(A0, dtype=float)
    hw = np.array(h, dtype=float)
    bw = np.array(base, dtype=float)
    sw = np.full(n, step0)
    fw = _fit_cols(Aw, G, hw, bw)
    ow = fw + _penalty_cols(Aw, pen)
    itw = np.zeros(n, dtype=int)

    for _ in range(int(cfg.max_iters)):
        if idx.size == 0 or not alive.any():
            break
        grad = G @ Aw - hw
        for _bt in range(_MAX_BACKTRACKS):
            Anew = _prox_step(Aw - sw * grad, sw, pen)
            delta = Anew - Aw
            fit_new = _fit_cols(Anew, G, hw, bw)
            bound = fw + np.einsum("ij,ij->j", grad, delta) + _col_sq(delta) / (2.0 * sw)
            bad = fit_new > bound + 1e-12 * (1.0 + np.abs(fw))
            if not bad.any():
                break
            sw = np.where(bad, sw * cfg.step_shrink, sw)
        obj_new = fit_new + _penalty_cols(Anew, pen)
        move = np.sqrt(_col_sq(delta)) / sw
        small_move = move <= cfg.grad_tol * np.maximum(1.0, np.sqrt(_col_sq(Anew)))
        small_gain = np.abs(ow - obj_new) <= cfg.obj_tol * np.maximum(1.0, np.abs(obj_new))
        worse = obj_new > ow  # float-noise guard; theory says non-increase
        if worse.any():
            Anew[:, worse] = Aw[:, worse]
            obj_new[worse] = ow[worse]
            fit_new[worse] = fw[worse]
        Aw, ow, fw = Anew, obj_new, fit_new
        itw += alive
        done = (small_move | small_gain | worse) & alive
        if done.any():
            cols = idx[done]
            A_out[:, cols] = Aw[:, done]
            obj_out[cols] = ow[done]
            iters_out[cols] = itw[done]
            conv_out[cols] = True
            alive &= ~done
            live = int(alive.sum())
            if live == 0:
                idx = idx[:0]
                break
            if live < 0.6 * idx.size and idx.size > 64:
                Aw, hw = Aw[:, alive], hw[:, alive]
                bw, sw, fw, ow, itw = bw[alive], sw[alive], fw[alive], ow[alive], itw[alive]
                idx = idx[alive]
                alive = np.ones(idx.size, dtype=bool)
    if idx.size and alive.any():  # ran out of iterations
        cols = idx[alive]
        A_out[:, cols] = Aw[:, alive]
        obj_out[cols] = ow[alive]
        iters_out[cols] = itw[alive]
    return A_out, obj_out, iters_out, conv_out


# ---------------------------------------------------------------------------
# smoothed gradient descent for non-prox exponent pairs


def _smoothed_value_grad(a, G, h, b, pen: Penalty, eps: float):
    fit = b - h @ a + 0.5 * a @ (G @ a)
    u = (a / pen.lam) ** 2 + eps
    up = u ** (pen.p / 2.0)
    S = float(np.sum(up))
    val = fit + S ** (pen.q / pen.p)
    coef = pen.q * S ** (pen.q / pen.p - 1.0) if S > 0.0 else 0.0
    grad = (G @ a - h) + coef * u ** (pen.p / 2.0 - 1.0) * a / pen.lam**2
    return float(val), grad


def _smoothed_descent(G, h, b, pen: Penalty, cfg: SolverConfig, a0):
    """Armijo gradient descent on the smoothed objective, with continuation.

    Runs one solve at `smoothing_eps` and then three polishing stages with
    eps divided by 10 each time; the caller re-evaluates the true objective.
    """
    a = np.array(a0, dtype=float)
    eps = max(cfg.smoothing_eps, 1e-300)
    budget = max(int(cfg.max_iters) // 4, 25)
    step0 = 1.0 / max(_top_eigenvalue(G), 1e-12)
    total = 0
    converged = True
    for _stage in range(4):
        step = step0
        val, grad = _smoothed_value_grad(a, G, h, b, pen, eps)
        stage_conv = False
        for _ in range(budget):
            gn2 = float(grad @ grad)
            if math.sqrt(gn2) <= cfg.grad_tol * max(1.0, float(np.linalg.norm(a))):
                stage_conv = True
                break
            step = min(step * 2.0, 1e6 * step0)
            accepted = False
            while step > 1e-20:
                cand = a - step * grad
                cval, cgrad = _smoothed_value_grad(cand, G, h, b, pen, eps)
                if cval <= val - 1e-4 * step * gn2:
                    accepted = True
                    break
                step *= cfg.step_shrink
            total += 1
            if not accepted:
                stage_conv = True
                break
            if val - cval <= cfg.obj_tol * max(1.0, abs(cval)):
                a, val, grad = cand, cval, cgrad
                stage_conv = True
                break
            a, val, grad = cand, cval, cgrad
        converged = converged and stage_conv
        eps *= 0.1
    return a, total, converged


# ---------------------------------------------------------------------------
# multi-start orchestration


def _random_l1_ball_points(radii: np.ndarray, d: int, rng) -> np.ndarray:
    """One point per column, spread over the l1 ball of the given radius."""
    n = radii.shape[0]
    w = rng.exponential(size=(d, n))
    w /= np.maximum(w.sum(axis=0), 1e-300)
    signs = rng.integers(0, 2, size=(d, n)) * 2.0 - 1.0
    scale = radii * rng.uniform(size=n) ** (1.0 / d)
    return signs * w * scale


def _solve_columns(Xmat: np.ndarray, D: Dictionary, pen: Penalty, cfg: SolverConfig, warm=None):
    """Code every column of Xmat; returns (A, obj, iters, conv) arrays.

    Candidates from every start (and the literal zero vector) are merged
    per column: strictly smaller objective wins, ties break toward smaller
    l1 norm and then toward the earlier candidate.
    """
    atoms = D.atoms
    d, n = atoms.shape[1], Xmat.shape[1]
    G = atoms.T @ atoms
    h = atoms.T @ Xmat
    base = 0.5 * _col_sq(Xmat)

    nonconvex = pen.p < 1.0 or pen.q < 1.0
    starts: list[np.ndarray] = [np.zeros((d, n))]
    if warm is not None:
        starts.append(np.asarray(warm, dtype=float))
    if nonconvex:
        ridge = np.linalg.solve(G + 1e-6 * max(_top_eigenvalue(G), 1.0) * np.eye(d), h)
        starts.append(ridge)
        radii = np.array([l1_bound_from_penalty(t, pen, d) for t in base])
        for k in range(max(int(cfg.restarts) - 2, 0)):
            rng = np.random.default_rng([int(cfg.seed), 9151, k])
            starts.append(_random_l1_ball_points(radii, d, rng))

    # zero is always a candidate: objective 0.5*||x||^2 at l1 norm 0
    best_A = np.zeros((d, n))
    best_obj = base.copy()
    best_l1 = np.zeros(n)
    best_conv = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=int)

    for A0 in starts:
        if _has_prox(pen):
            A, obj, it, conv = _prox_grad_descent(G, h, base, pen, cfg, A0)
        else:
            A = np.empty((d, n))
            obj = np.empty(n)
            it = np.zeros(n, dtype=int)
            conv = np.zeros(n, dtype=bool)
            for j in range(n):
                aj, tj, cj = _smoothed_descent(G, h[:, j], float(base[j]), pen, cfg, A0[:, j])
                A[:, j] = aj
                obj[j] = float(base[j]) - h[:, j] @ aj + 0.5 * aj @ (G @ aj) + penalty_eval(aj, pen)
                it[j], conv[j] = tj, cj
        iters += it
        l1 = np.sum(np.abs(A), axis=0)
        better = (obj < best_obj) | ((obj == best_obj) & (l1 < best_l1))
        best_A[:, better] = A[:, better]
        best_obj[better] = obj[better]
        best_l1[better] = l1[better]
        best_conv[better] = conv[better]
    return best_A, best_obj, iters, best_conv


def _check_signal(x: np.ndarray, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != m:
        raise ValueError(f"signal length {x.shape[0]} does not match dictionary rows {m}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal must be finite")
    if np.linalg.norm(x) > 1.0 + TOL_BALL:
        raise ValueError("signal must lie in the unit l2 ball")
    return x


def sparse_code(x, D: Dictionary, pen: Penalty, cfg: SolverConfig = SolverConfig()) -> CodingResult:
    """Code one unit-ball signal; the result never beats-by-losing to a = 0.

    For convex exponent pairs the objective lands within `cfg.obj_tol` of
    the infimum; for nonconvex ones it is the best of `cfg.restarts`
    deterministic starts, each run to a stationary point.
    """
    x = _check_signal(x, D.m)
    A, _obj, iters, conv = _solve_columns(x[:, None], D, pen, cfg)
    coeffs = A[:, 0]
    r = x - D.atoms @ coeffs
    res = float(np.linalg.norm(r))
    val = float(0.5 * (r @ r) + penalty_eval(coeffs, pen))
    return CodingResult(
        coeffs=coeffs,
        objective=val,
        residual_norm=res,
        iterations=int(iters[0]),
        converged=bool(conv[0]),
    )


def batch_objective(X: SignalSet, D: Dictionary, pen: Penalty, cfg: SolverConfig = SolverConfig()):
    """Mean coding objective over a signal set plus the stacked coefficients.

    The mean runs over per-sample objectives in column order, so repeated
    calls with identical inputs reproduce bit-identical output.
    """
    Xmat = _signals_of(X)
    if Xmat.shape[0] != D.m:
        raise ValueError(f"signal rows {Xmat.shape[0]} do not match dictionary rows {D.m}")
    A, _obj, _iters, _conv = _solve_columns(Xmat, D, pen, cfg)
    R = Xmat - D.atoms @ A
    per_sample = 0.5 * _col_sq(R) + _penalty_cols(A, pen)
    return float(np.mean(per_sample)), CoeffMatrix(A)


def is_eps_near_solution(X: SignalSet, D: Dictionary, A, pen: Penalty, eps: float, oracle_objectives) -> bool:
    """True iff every column's objective is within eps of its trusted optimum."""
    Xmat = _signals_of(X)
    Amat = A.coeffs if isinstance(A, CoeffMatrix) else np.asarray(A, dtype=float)
    oracle = np.asarray(oracle_objectives, dtype=float).ravel()
    if Amat.shape != (D.d, Xmat.shape[1]):
        raise ValueError(f"coefficient matrix shape {Amat.shape} does not match ({D.d}, {Xmat.shape[1]})")
    if oracle.shape[0] != Xmat.shape[1]:
        raise ValueError("one oracle objective per sample is required")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    R = Xmat - D.atoms @ Amat
    per_sample = 0.5 * _col_sq(R) + _penalty_cols(Amat, pen)
    return bool(np.all(per_sample <= oracle + eps))


# ---------------------------------------------------------------------------
# brute-force grid oracle


def _line_envelope(slopes: np.ndarray, values: np.ndarray):
    """Lower envelope of the lines ``s -> values[k] + slopes[k] * s``.

    `slopes` must be sorted ascending. Returns (slopes, values, breakpoints)
    with lines ordered by descending slope; line i is active for queries up
    to breakpoints[i].
    """
    keep: list[int] = []
    for k in range(slopes.shape[0]):
        c, v = float(slopes[k]), float(values[k])
        while keep:
            c1, v1 = float(slopes[keep[-1]]), float(values[keep[-1]])
            if c == c1:
                if v >= v1:
                    break
                keep.pop()
                continue
            if len(keep) < 2:
                break
            c0, v0 = float(slopes[keep[-2]]), float(values[keep[-2]])
            s_cross = (v0 - v) / (c - c0)  # where the outer pair meets
            if v1 + c1 * s_cross >= v0 + c0 * s_cross:
                keep.pop()  # middle line never strictly below the outer pair
            else:
                break
        if keep and slopes[keep[-1]] == c and values[keep[-1]] <= v:
            continue
        keep.append(k)
    idx = np.array(keep[::-1], dtype=int)  # descending slope
    cs, vs = slopes[idx], values[idx]
    if cs.shape[0] > 1:
        bps = (vs[1:] - vs[:-1]) / (cs[:-1] - cs[1:])
    else:
        bps = np.empty(0)
    return cs, vs, bps


def _envelope_eval(env, s: np.ndarray) -> np.ndarray:
    cs, vs, bps = env
    idx = np.searchsorted(bps, s, side="left")
    return vs[idx] + cs[idx] * s


def brute_force_code(
    x,
    D: Dictionary,
    pen: Penalty,
    grid_half_width: float | None = None,
    grid_points: int = 2001,
) -> CodingResult:
    """Exhaustive grid-search oracle over ``[-w, w]^d`` for d <= 3.

    The default half width w is the l1 radius implied by the zero solution,
    which always contains the continuum minimizer. The zero vector is added
    to the candidate set explicitly, so the reported objective never exceeds
    ``0.5*||x||^2`` regardless of grid parity.

    For d == 3 with a separable penalty (q == p), the scan eliminates the
    third axis exactly through a lower envelope of lines, which returns the
    same minimum as the full product-grid scan at a fraction of the cost.
    """
    d = D.d
    if d > 3:
        raise ValueError(f"brute force supports d <= 3, got d={d}")
    grid_points = int(grid_points)
    if grid_points < 11:
        raise ValueError("grid_points must be >= 11")
    x = _check_signal(x, D.m)
    atoms = D.atoms
    base = 0.5 * float(x @ x)
    if grid_half_width is None:
        w = l1_bound_from_penalty(base, pen, d)
    else:
        w = float(grid_half_width)
        if not np.isfinite(w) or w <= 0.0:
            raise ValueError("grid_half_width must be a positive finite real")
    grid = np.linspace(-w, w, grid_points)
    G = atoms.T @ atoms
    h = atoms.T @ x
    lam, p, q = pen.lam, pen.p, pen.q

    quad = [0.5 * G[i, i] * grid**2 - h[i] * grid for i in range(d)]
    pen1d = (np.abs(grid) / lam) ** p

    best_obj = base  # zero candidate
    best_pt = np.zeros(d)

    if d == 1:
        vals = base + quad[0] + pen1d ** (q / p)
        j = int(np.argmin(vals))
        if vals[j] < best_obj:
            best_obj, best_pt = float(vals[j]), np.array([grid[j]])
    elif d == 2:
        chunk = max(1, (1 << 21) // grid_points)
        for start in range(0, grid_points, chunk):
            a = grid[start : start + chunk]
            plane = quad[0][start : start + chunk, None] + quad[1][None, :]
            plane += G[0, 1] * a[:, None] * grid[None, :]
            S = pen1d[start : start + chunk, None] + pen1d[None, :]
            plane += S if pen.separable else S ** (q / p)
            plane += base
            k = int(np.argmin(plane))
            ia, ib = divmod(k, grid_points)
            if plane[ia, ib] < best_obj:
                best_obj = float(plane[ia, ib])
                best_pt = np.array([a[ia], grid[ib]])
    elif pen.separable:
        # exact third-axis elimination: for fixed (a, b) the c-grid minimum is
        # min_c f2(c) + c*(G02*a + G12*b), a lower envelope of lines in one scalar
        f = [quad[i] + pen1d for i in range(3)]
        env = _line_envelope(grid, f[2])
        best_ab = (0, 0)
        found = False
        chunk = max(1, (1 << 21) // grid_points)
        for start in range(0, grid_points, chunk):
            a = grid[start : start + chunk]
            plane = f[0][start : start + chunk, None] + f[1][None, :]
            plane += G[0, 1] * a[:, None] * grid[None, :]
            plane += _envelope_eval(env, G[0, 2] * a[:, None] + G[1, 2] * grid[None, :])
            k = int(np.argmin(plane))
            ia, ib = divmod(k, grid_points)
            if base + plane[ia, ib] < best_obj:
                best_obj = base + float(plane[ia, ib])
                best_ab = (start + ia, ib)
                found = True
        if found:
            ia, ib = best_ab
            a_v, b_v = grid[ia], grid[ib]
            c_vals = f[2] + grid * (G[0, 2] * a_v + G[1, 2] * b_v)
            ic = int(np.argmin(c_vals))
            best_pt = np.array([a_v, b_v, grid[ic]])
            best_obj = base + float(f[0][ia] + f[1][ib] + G[0, 1] * a_v * b_v + c_vals[ic])
    else:
        # generic d == 3: plane scan per outer grid value (slow; test-scale only)
        for ia, a_v in enumerate(grid):
            plane = quad[1][:, None] + quad[2][None, :]
            plane += G[1, 2] * grid[:, None] * grid[None, :]
            plane += a_v * (G[0, 1] * grid[:, None] + G[0, 2] * grid[None, :])
            S = pen1d[ia] + pen1d[:, None] + pen1d[None, :]
            plane += quad[0][ia] + base + S ** (q / p)
            k = int(np.argmin(plane))
            ib, ic = divmod(k, grid_points)
            if plane[ib, ic] < best_obj:
                best_obj = float(plane[ib, ic])
                best_pt = np.array([a_v, grid[ib], grid[ic]])

    val = objective(x, D, best_pt, pen)  # exact re-evaluation at the winner
    res = float(np.linalg.norm(x - atoms @ best_pt))
    return CodingResult(coeffs=best_pt, objective=val, residual_norm=res, iterations=0, converged=True)


def grid_resolution_error(
    x,
    D: Dictionary,
    pen: Penalty,
    grid_half_width: float | None = None,
    grid_points: int = 2001,
) -> float:
    """Conservative bound on how far the grid minimum can sit above the
    continuum infimum for `brute_force_code` with the same arguments.

    Splits into the fit term (gradient bound over the search box) and the
    penalty term (worst variation across one grid cell, with the p < 1
    quasi-norm handled through its p-power subadditivity).
    """
    d = D.d
    x = np.asarray(x, dtype=float).ravel()
    base = 0.5 * float(x @ x)
    w = l1_bound_from_penalty(base, pen, d) if grid_half_width is None else float(grid_half_width)
    if w == 0.0:
        return 0.0
    step = 2.0 * w / (int(grid_points) - 1)
    half = 0.5 * step
    sig = float(np.linalg.norm(D.atoms, 2))
    fit_err = sig * (sig * w * math.sqrt(d) + float(np.linalg.norm(x))) * half * math.sqrt(d)
    lam, p, q = pen.lam, pen.p, pen.q
    if p <= 1.0:
        du = d * (half / lam) ** p
    else:
        du = d * p * (w / lam) ** (p - 1.0) * (half / lam)
    if pen.separable:
        pen_err = du
    else:
        r = q / p
        u_max = d * (w / lam) ** p
        pen_err = du**r if r < 1.0 else r * (u_max + du) ** (r - 1.0) * du
    return float(fit_err + pen_err)
