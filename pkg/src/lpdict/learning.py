"""Alternating minimization of the empirical coding objective over the
product of unit spheres.

One outer round codes every signal against the current dictionary (warm
started from the previous coefficients, so the recorded objective can never
go up) and then improves the dictionary by projected gradient descent on the
fit term with an Armijo line search on the constrained iterate. Atoms that
ended a round unused are swapped for the worst-represented training signal,
which leaves the recorded objective untouched because their coefficient rows
are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CoeffMatrix, Dictionary, Penalty, SignalSet
from .sparse_coding import SolverConfig, _col_sq, _solve_columns

__all__ = ["LearnConfig", "LearnTrace", "project_atoms", "dict_update", "learn"]

_INIT_MODES = ("data-atoms", "random-atoms")
_MAX_INNER_UPDATES = 100
_EARLY_STOP_REL = 1e-8
_EARLY_STOP_ROUNDS = 3
_NORM_FLOOR = 1e-154  # below this a column is treated as zero (its square underflows)


@dataclass(frozen=True)
class LearnConfig:
    outer_iters: int = 50
    dict_step_shrink: float = 0.5
    dict_grad_tol: float = 1e-8
    init_mode: str = "data-atoms"
    seed: int = 0
    coding: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if int(self.outer_iters) < 1:
            raise ValueError("outer_iters must be >= 1")
        if not 0.0 < self.dict_step_shrink < 1.0:
            raise ValueError("dict_step_shrink must lie in (0, 1)")
        if self.dict_grad_tol <= 0.0:
            raise ValueError("dict_grad_tol must be positive")
        if self.init_mode not in _INIT_MODES:
            raise ValueError(f"init_mode must be one of {_INIT_MODES}, got {self.init_mode!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be an unsigned integer")


@dataclass(frozen=True)
class LearnTrace:
    """Objective per outer round plus the final factor pair."""

    objectives: tuple[float, ...]
    final_dict: Dictionary
    final_coeffs: CoeffMatrix


def project_atoms(M) -> Dictionary:
    """Scale every column to unit l2 norm; a zero column at index j becomes
    the standard basis vector e_(j mod m)."""
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError("need a 2-D matrix with at least one row and column")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    m = M.shape[0]
    norms = np.linalg.norm(M, axis=0)
    for j in np.flatnonzero(norms < _NORM_FLOOR):
        M[:, j] = 0.0
        M[j % m, j] = 1.0
        norms[j] = 1.0
    return Dictionary(M / norms)


def _normalized_or_old(M: np.ndarray, old: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=0)
    dead = norms < _NORM_FLOOR
    if dead.any():
        M = M.copy()
        M[:, dead] = old[:, dead]
        norms = np.where(dead, 1.0, norms)
    return M / norms


def _fit_value(Xmat, Datoms, Amat) -> float:
    R = Xmat - Datoms @ Amat
    return 0.5 * float(np.sum(R * R)) / Xmat.shape[1]


def dict_update(X, A, D0: Dictionary, cfg: LearnConfig = LearnConfig()) -> Dictionary:
    """Projected gradient descent on the fit term with atoms kept unit-norm.

    Accepts a step only when it decreases the fit (Armijo test on the
    constrained iterate), so the full objective at fixed coefficients can
    only go down; the penalty does not depend on the dictionary.
    """
    Xmat = X.signals if isinstance(X, SignalSet) else np.asarray(X, dtype=float)
    Amat = A.coeffs if isinstance(A, CoeffMatrix) else np.asarray(A, dtype=float)
    D = D0.atoms.copy()
    if Xmat.shape[1] != Amat.shape[1] or Amat.shape[0] != D.shape[1] or Xmat.shape[0] != D.shape[0]:
        raise ValueError(
            f"shape mismatch: signals {Xmat.shape}, coeffs {Amat.shape}, atoms {D.shape}"
        )
    if not (np.all(np.isfinite(Xmat)) and np.all(np.isfinite(Amat))):
        raise ValueError("inputs must be finite")
    n = Xmat.shape[1]
    if Amat.shape[0] > 1:
        gram_top = float(np.linalg.eigvalsh(Amat @ Amat.T / n)[-1])
    else:
        gram_top = float(np.sum(Amat * Amat)) / n
    step = 1.0 / max(gram_top, 1e-12)
    f = _fit_value(Xmat, D, Amat)
    moved = False
    for _ in range(_MAX_INNER_UPDATES):
        R = Xmat - D @ Amat
        egrad = -(R @ Amat.T) / n
        rgrad = egrad - D * np.sum(D * egrad, axis=0)  # tangent to each sphere
        gn2 = float(np.sum(rgrad * rgrad))
        if np.sqrt(gn2) <= cfg.dict_grad_tol:
            break
        step = min(step * 2.0, 1e12)
        accepted = False
        while step > 1e-18:
            cand = _normalized_or_old(D - step * rgrad, D)
            fc = _fit_value(Xmat, cand, Amat)
            if fc <= f - 1e-4 * step * gn2:
                accepted = True
                break
            step *= cfg.dict_step_shrink
        if not accepted:
            break
        D, f = cand, fc
        moved = True
    return Dictionary(D) if moved else D0


def _revive_dead_atoms(Datoms: np.ndarray, Amat: np.ndarray, Xmat: np.ndarray) -> np.ndarray:
    """Swap atoms with all-zero coefficient rows for the worst-coded signals.

    Objective-neutral at the current coefficients: a dead atom contributes
    nothing to the reconstruction.
    """
    dead = np.flatnonzero(np.max(np.abs(Amat), axis=1) == 0.0)
    if dead.size == 0:
        return Datoms
    residuals = np.sqrt(_col_sq(Xmat - Datoms @ Amat))
    order = np.argsort(-residuals, kind="stable")
    D = Datoms.copy()
    m = D.shape[0]
    for rank, j in enumerate(dead):
        src = Xmat[:, order[rank % order.size]]
        nrm = np.linalg.norm(src)
        if nrm < _NORM_FLOOR:
            D[:, j] = 0.0
            D[int(j) % m, j] = 1.0
        else:
            D[:, j] = src / nrm
    return D


def _init_dictionary(Xmat: np.ndarray, m: int, d: int, cfg: LearnConfig) -> Dictionary:
    rng = np.random.default_rng([int(cfg.seed), 23])
    if cfg.init_mode == "random-atoms":
        return project_atoms(rng.standard_normal((m, d)))
    n = Xmat.shape[1]
    idx = rng.choice(n, size=d, replace=n < d)
    return project_atoms(Xmat[:, idx])


def learn(X: SignalSet, m: int, d: int, pen: Penalty, cfg: LearnConfig = LearnConfig()) -> LearnTrace:
    """Alternate coding and dictionary steps; the recorded objective is
    non-increasing by construction (warm-started coding, descent-only
    dictionary step, objective-neutral atom revival)."""
    Xmat = X.signals
    if Xmat.shape[0] != int(m):
        raise ValueError(f"signal rows {Xmat.shape[0]} do not match m={m}")
    if int(d) < 1:
        raise ValueError("d must be a positive integer")
    D = _init_dictionary(Xmat, int(m), int(d), cfg)
    A = None
    objectives: list[float] = []
    for _ in range(int(cfg.outer_iters)):
        A, obj_cols, _iters, _conv = _solve_columns(Xmat, D, pen, cfg.coding, warm=A)
        objectives.append(float(np.mean(obj_cols)))
        if len(objectives) > _EARLY_STOP_ROUNDS:
            recent = objectives[-(_EARLY_STOP_ROUNDS + 1) :]
            drops = [
                (recent[i] - recent[i + 1]) / max(abs(recent[i]), 1e-300)
                for i in range(_EARLY_STOP_ROUNDS)
            ]
            if all(r < _EARLY_STOP_REL for r in drops):
                break
        D = dict_update(Xmat, A, D, cfg)
        D = Dictionary(_revive_dead_atoms(D.atoms, A, Xmat))
    return LearnTrace(tuple(objectives), D, CoeffMatrix(A))
