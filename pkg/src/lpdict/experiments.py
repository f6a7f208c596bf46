"""Monte Carlo harness for the generalization gap of dictionary coding.

Generates unit-ball distributions, estimates |train objective - expected
objective| across sample sizes, compares each gap against the deviation
bound eta, and fits the decay rate of the mean gap against sqrt(log n / n).

Seeding: each (n, trial) job derives child seeds from the master seed with
fixed integer tags, so trials are order-independent and a config reproduces
its CSV byte-for-byte.
"""

from __future__ import annotations

import dataclasses
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundInputs, full_report
from .core import Dictionary, Penalty, SignalSet
from .learning import LearnConfig, learn
from .sparse_coding import SolverConfig, _solve_columns

__all__ = [
    "DistributionSpec",
    "ExperimentConfig",
    "GapRow",
    "GapCurve",
    "sample",
    "random_dictionary",
    "planted_dictionary",
    "estimate_expected_f",
    "gap_sweep",
    "export",
    "load_curve",
]

_KINDS = ("uniform-sphere", "uniform-ball", "planted-sparse")
_DICT_SOURCES = ("learned", "random", "planted")

# integer stream tags for child-seed derivation
_TAG_TRAIN, _TAG_DICT, _TAG_HOLDOUT, _TAG_LEARN, _TAG_PLANT = 1, 2, 3, 4, 5
_CSV_HEADER = "n,trial,train_F,holdout_F,gap,eta"


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass(frozen=True)
class DistributionSpec:
    """A unit-ball signal distribution.

    ``planted-sparse`` synthesizes x = D* a from a seeded dictionary with
    `dict_d` atoms and `sparsity_k`-sparse Gaussian coefficients scaled by
    `coeff_scale`, then divides each sample by max(1, ||x||) so it stays in
    the ball.
    """

    kind: str
    m: int
    seed: int = 0
    dict_d: int = 0
    true_dict_seed: int = 0
    sparsity_k: int = 1
    coeff_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if int(self.m) < 1:
            raise ValueError("m must be a positive integer")
        if int(self.seed) < 0 or int(self.true_dict_seed) < 0:
            raise ValueError("seeds must be unsigned integers")
        if self.kind == "planted-sparse":
            if int(self.dict_d) < 1:
                raise ValueError("planted-sparse requires dict_d >= 1")
            if not 1 <= int(self.sparsity_k) <= int(self.dict_d):
                raise ValueError("sparsity_k must lie in [1, dict_d]")
            if self.coeff_scale < 0.0:
                raise ValueError("coeff_scale must be nonnegative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "DistributionSpec":
        return DistributionSpec(**data)


def random_dictionary(m: int, d: int, seed=0) -> Dictionary:
    """Seeded atoms drawn uniformly on each unit sphere."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng([int(seed), 77])
    M = rng.standard_normal((int(m), int(d)))
    norms = np.linalg.norm(M, axis=0)
    bad = norms < 1e-154
    if bad.any():
        M[:, bad] = 0.0
        for j in np.flatnonzero(bad):
            M[j % int(m), j] = 1.0
        norms = np.where(bad, 1.0, norms)
    return Dictionary(M / norms)


def planted_dictionary(dist: DistributionSpec) -> Dictionary:
    """The dictionary a planted-sparse distribution synthesizes from."""
    if dist.kind != "planted-sparse":
        raise ValueError("planted_dictionary needs a planted-sparse spec")
    return random_dictionary(dist.m, dist.dict_d, np.random.default_rng([int(dist.true_dict_seed), _TAG_PLANT]))


def _sphere_points(rng, m: int, n: int) -> np.ndarray:
    M = rng.standard_normal((m, n))
    norms = np.linalg.norm(M, axis=0)
    bad = norms < 1e-154
    if bad.any():
        M[:, bad] = 0.0
        for j in np.flatnonzero(bad):
            M[j % m, j] = 1.0
        norms = np.where(bad, 1.0, norms)
    return M / norms


def sample(dist: DistributionSpec, n: int) -> SignalSet:
    """Draw n independent signals; deterministic given (dist.seed, n)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    rng = np.random.default_rng([int(dist.seed), n])
    m = int(dist.m)
    if dist.kind == "uniform-sphere":
        return SignalSet(_sphere_points(rng, m, n))
    if dist.kind == "uniform-ball":
        pts = _sphere_points(rng, m, n)
        radii = rng.uniform(size=n) ** (1.0 / m)
        return SignalSet(pts * radii)
    D = planted_dictionary(dist).atoms
    d = int(dist.dict_d)
    k = int(dist.sparsity_k)
    X = np.empty((m, n))
    for j in range(n):
        support = rng.choice(d, size=k, replace=False)
        a = np.zeros(d)
        a[support] = dist.coeff_scale * rng.standard_normal(k)
        x = D @ a
        X[:, j] = x / max(1.0, float(np.linalg.norm(x)))
    return SignalSet(X)


def estimate_expected_f(
    D: Dictionary,
    dist: DistributionSpec,
    pen: Penalty,
    holdout_n: int,
    coding: SolverConfig = SolverConfig(),
):
    """Plug-in estimate of the expected per-sample coding objective.

    Returns (mean, std_error) over a fresh holdout drawn from a seed stream
    disjoint from `sample`'s training stream.
    """
    holdout_n = int(holdout_n)
    if holdout_n < 2:
        raise ValueError("holdout_n must be >= 2")
    holdout = sample(dataclasses.replace(dist, seed=_derive_seed(dist.seed, _TAG_HOLDOUT)), holdout_n)
    _A, obj_cols, _iters, _conv = _solve_columns(holdout.signals, D, pen, coding)
    mean = float(np.mean(obj_cols))
    std_error = float(np.std(obj_cols, ddof=1) / np.sqrt(holdout_n))
    return mean, std_error


@dataclass(frozen=True)
class ExperimentConfig:
    dist: DistributionSpec
    pen: Penalty
    d: int
    n_grid: tuple[int, ...]
    trials: int = 1
    holdout_n: int = 100_000
    dict_source: str = "random"
    learn: LearnConfig = field(default_factory=LearnConfig)
    confidence_x: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        if len(self.n_grid) == 0:
            raise ValueError("n_grid must be nonempty")
        if any(v < 2 for v in self.n_grid) or any(
            a >= b for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise ValueError("n_grid must be a strictly increasing list of integers >= 2")
        if int(self.d) < 1:
            raise ValueError("d must be a positive integer")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if int(self.holdout_n) < 2:
            raise ValueError("holdout_n must be >= 2")
        if self.dict_source not in _DICT_SOURCES:
            raise ValueError(f"dict_source must be one of {_DICT_SOURCES}, got {self.dict_source!r}")
        if self.dict_source == "planted" and self.dist.kind != "planted-sparse":
            raise ValueError("dict_source='planted' needs a planted-sparse distribution")
        if float(self.confidence_x) < 0.0:
            raise ValueError("confidence_x must be nonnegative")
        if int(self.holdout_n) < 10 * max(self.n_grid):
            warnings.warn(
                f"holdout_n={self.holdout_n} is below the recommended 10*max(n_grid)={10 * max(self.n_grid)}",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        return {
            "dist": self.dist.to_dict(),
            "pen": {"p": self.pen.p, "q": self.pen.q, "lambda": self.pen.lam},
            "d": self.d,
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "holdout_n": self.holdout_n,
            "dict_source": self.dict_source,
            "learn": {
                "outer_iters": self.learn.outer_iters,
                "dict_step_shrink": self.learn.dict_step_shrink,
                "dict_grad_tol": self.learn.dict_grad_tol,
                "init_mode": self.learn.init_mode,
                "seed": self.learn.seed,
                "coding": dataclasses.asdict(self.learn.coding),
            },
            "confidence_x": self.confidence_x,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        pen_raw = dict(data["pen"])
        lam = pen_raw.pop("lambda", pen_raw.pop("lam", 1.0))
        learn_raw = dict(data.get("learn", {}))
        coding = SolverConfig(**learn_raw.pop("coding", {}))
        return ExperimentConfig(
            dist=DistributionSpec.from_dict(data["dist"]),
            pen=Penalty(p=pen_raw["p"], q=pen_raw["q"], lam=lam),
            d=int(data["d"]),
            n_grid=tuple(data["n_grid"]),
            trials=int(data.get("trials", 1)),
            holdout_n=int(data.get("holdout_n", 100_000)),
            dict_source=data.get("dict_source", "random"),
            learn=LearnConfig(coding=coding, **learn_raw),
            confidence_x=float(data.get("confidence_x", 1.0)),
        )


@dataclass(frozen=True)
class GapRow:
    n: int
    trial: int
    train_F: float
    holdout_F: float
    gap: float
    eta: float
    holdout_std_error: float
    converged: bool


@dataclass(frozen=True)
class GapCurve:
    """Per-(n, trial) gap estimates plus the fitted decay rates.

    `slope`/`intercept` regress log(mean gap per n) on log(sqrt(log n / n));
    the `_inv_sqrt_n` pair regresses on log(1/sqrt(n)) for comparison.
    """

    rows: tuple[GapRow, ...]
    slope: float
    intercept: float
    slope_inv_sqrt_n: float
    intercept_inv_sqrt_n: float
    config: ExperimentConfig | None = None


def _fit_rates(rows: tuple[GapRow, ...]):
    ns = sorted({r.n for r in rows})
    if len(ns) < 2:
        return float("nan"), float("nan"), float("nan"), float("nan")
    mean_gap = np.array([np.mean([r.gap for r in rows if r.n == n]) for n in ns], dtype=float)
    y = np.log(np.maximum(mean_gap, 1e-300))
    ns = np.array(ns, dtype=float)
    r1 = np.log(np.sqrt(np.log(ns) / ns))
    r2 = np.log(1.0 / np.sqrt(ns))
    s1, i1 = np.polyfit(r1, y, 1)
    s2, i2 = np.polyfit(r2, y, 1)
    return float(s1), float(i1), float(s2), float(i2)


def _run_trial(cfg: ExperimentConfig, n: int, trial: int, eta: float) -> GapRow:
    master = int(cfg.dist.seed)
    train_dist = dataclasses.replace(cfg.dist, seed=_derive_seed(master, n, trial, _TAG_TRAIN))
    train = sample(train_dist, n)
    if cfg.dict_source == "random":
        D = random_dictionary(cfg.dist.m, cfg.d, np.random.default_rng([master, n, trial, _TAG_DICT]))
    elif cfg.dict_source == "planted":
        D = planted_dictionary(cfg.dist)
    else:
        lcfg = dataclasses.replace(cfg.learn, seed=_derive_seed(master, n, trial, _TAG_LEARN))
        D = learn(train, cfg.dist.m, cfg.d, cfg.pen, lcfg).final_dict
    _A, obj_cols, _iters, conv = _solve_columns(train.signals, D, cfg.pen, cfg.learn.coding)
    train_F = float(np.mean(obj_cols))
    hold_dist = dataclasses.replace(cfg.dist, seed=_derive_seed(master, n, trial, _TAG_HOLDOUT))
    holdout_F, std_err = estimate_expected_f(D, hold_dist, cfg.pen, cfg.holdout_n, cfg.learn.coding)
    return GapRow(
        n=n,
        trial=trial,
        train_F=train_F,
        holdout_F=holdout_F,
        gap=abs(train_F - holdout_F),
        eta=eta,
        holdout_std_error=std_err,
        converged=bool(np.all(conv)),
    )


def gap_sweep(cfg: ExperimentConfig, threads: int = 1) -> GapCurve:
    """Estimate the generalization gap over the whole (n_grid x trials) plan.

    Jobs are independent (each derives its own seeds from (master, n,
    trial)) and may run on a thread pool; aggregation always happens in
    (n, trial) order, so results do not depend on scheduling.
    """
    etas = {
        n: full_report(
            BoundInputs(m=cfg.dist.m, d=cfg.d, pen=cfg.pen, n=n, confidence_x=cfg.confidence_x)
        ).eta
        for n in cfg.n_grid
    }
    jobs = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    if threads == 0:
        threads = min(4, os.cpu_count() or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: _run_trial(cfg, job[0], job[1], etas[job[0]]), jobs))
    else:
        rows = [_run_trial(cfg, n, t, etas[n]) for n, t in jobs]
    rows = tuple(rows)
    s1, i1, s2, i2 = _fit_rates(rows)
    return GapCurve(rows=rows, slope=s1, intercept=i1, slope_inv_sqrt_n=s2, intercept_inv_sqrt_n=i2, config=cfg)


def _sidecar_path(path: str) -> str:
    stem, _ext = os.path.splitext(path)
    return stem + ".json"


def export(curve: GapCurve, path: str) -> None:
    """Write the curve as CSV (17 significant digits) plus a JSON sidecar
    holding the fit, the config echo, seeds, and per-row extras."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_CSV_HEADER + "\n")
            for r in curve.rows:
                fh.write(
                    f"{r.n},{r.trial},{r.train_F:.17g},{r.holdout_F:.17g},{r.gap:.17g},{r.eta:.17g}\n"
                )
        sidecar = {
            "fit": {
                "slope": curve.slope,
                "intercept": curve.intercept,
                "slope_inv_sqrt_n": curve.slope_inv_sqrt_n,
                "intercept_inv_sqrt_n": curve.intercept_inv_sqrt_n,
            },
            "config": curve.config.to_dict() if curve.config is not None else None,
            "seeds": {
                "master": curve.config.dist.seed if curve.config is not None else None,
                "derivation": "SeedSequence([master, n, trial, tag]); tags: train=1, dict=2, holdout=3, learn=4",
            },
            "rows_extra": {
                "holdout_std_error": [r.holdout_std_error for r in curve.rows],
                "converged": [r.converged for r in curve.rows],
            },
        }
        with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing gap curve to {path!r}: {exc}") from exc


def load_curve(path: str) -> GapCurve:
    """Rebuild a GapCurve from `export` output; floats round-trip exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        with open(_sidecar_path(path), "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError as exc:
        raise OSError(f"failed reading gap curve from {path!r}: {exc}") from exc
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError(f"{path!r} does not carry the expected header {_CSV_HEADER!r}")
    extras = sidecar.get("rows_extra", {})
    std_errors = extras.get("holdout_std_error", [])
    converged = extras.get("converged", [])
    rows = []
    for i, ln in enumerate(lines[1:]):
        n_s, t_s, tr, ho, gp, et = ln.split(",")
        rows.append(
            GapRow(
                n=int(n_s),
                trial=int(t_s),
                train_F=float(tr),
                holdout_F=float(ho),
                gap=float(gp),
                eta=float(et),
                holdout_std_error=float(std_errors[i]) if i < len(std_errors) else float("nan"),
                converged=bool(converged[i]) if i < len(converged) else True,
            )
        )
    fit = sidecar.get("fit", {})
    config = sidecar.get("config")
    return GapCurve(
        rows=tuple(rows),
        slope=float(fit.get("slope", "nan")),
        intercept=float(fit.get("intercept", "nan")),
        slope_inv_sqrt_n=float(fit.get("slope_inv_sqrt_n", "nan")),
        intercept_inv_sqrt_n=float(fit.get("intercept_inv_sqrt_n", "nan")),
        config=ExperimentConfig.from_dict(config) if config else None,
    )
