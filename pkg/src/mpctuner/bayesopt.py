"""Gaussian-process Bayesian optimization over the controller parameters.

Surrogate: anisotropic Matern-5/2 kernel with hyperparameters fitted by
multi-start ascent of the log marginal likelihood. Acquisition: Expected
Improvement for minimization, maximized over seeded random candidates with
coordinate-descent refinement. Integer dimensions are handled by continuous
relaxation and snapping at proposal time; the horizon ordering constraint is
repaired by clamping the control horizon. A Morris elementary-effects screen
for ranking parameter sensitivity lives here too.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.special import ndtr

from .controller import MpcParams

_SQRT5 = math.sqrt(5.0)
_JITTER = 1e-6


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float
    kind: str = "continuous"  # or "integer"

    def __post_init__(self):
        if self.lower >= self.upper:
            raise ValueError(f"{self.name}: lower must be < upper")
        if self.kind not in ("continuous", "integer"):
            raise ValueError(f"{self.name}: unknown kind {self.kind}")


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple[Dimension, ...]

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        """Unit-cube point(s) -> raw values, rounding integer dimensions."""
        x = np.asarray(x, dtype=float)
        lo = np.array([d.lower for d in self.dims])
        hi = np.array([d.upper for d in self.dims])
        raw = lo + x * (hi - lo)
        for i, d in enumerate(self.dims):
            if d.kind == "integer":
                raw[..., i] = np.round(raw[..., i])
        return raw

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        lo = np.array([d.lower for d in self.dims])
        hi = np.array([d.upper for d in self.dims])
        return (raw - lo) / (hi - lo)


def mpc_param_space() -> ParamSpace:
    """Default 7-D tuning space over the controller parameters."""
    return ParamSpace(dims=(
        Dimension("Np", 5, 40, "integer"),
        Dimension("Nc", 1, 40, "integer"),
        Dimension("Qx", 0.1, 10.0),
        Dimension("Qy", 0.1, 10.0),
        Dimension("Qtheta", 0.1, 10.0),
        Dimension("c1", 1.0, 20.0),
        Dimension("c2", 5.0, 40.0),
    ))


def repair_horizons(raw: np.ndarray, space: ParamSpace) -> np.ndarray:
    """Enforce Np >= Nc by clamping Nc, when both dims exist in the space."""
    names = [d.name for d in space.dims]
    if "Np" in names and "Nc" in names:
        raw = np.array(raw, dtype=float)
        i_np, i_nc = names.index("Np"), names.index("Nc")
        raw[..., i_nc] = np.minimum(raw[..., i_nc], raw[..., i_np])
    return raw


# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------

def matern52(a, b, signal_var: float, length_scales) -> float:
    """Matern-5/2 covariance with per-dimension length scales."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ls = np.asarray(length_scales, dtype=float)
    r = math.sqrt(float(np.sum(((a - b) / ls) ** 2)))
    return signal_var * (1.0 + _SQRT5 * r + 5.0 * r * r / 3.0) * math.exp(-_SQRT5 * r)


def _kernel_matrix(Xa: np.ndarray, Xb: np.ndarray, signal_var: float,
                   ls: np.ndarray) -> np.ndarray:
    d = Xa[:, None, :] / ls - Xb[None, :, :] / ls
    r = np.sqrt(np.maximum(np.sum(d * d, axis=2), 0.0))
    return signal_var * (1.0 + _SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-_SQRT5 * r)


@dataclass
class GpModel:
    X: np.ndarray                 # (n, d) in the unit cube
    y: np.ndarray                 # (n,) standardized
    signal_var: float
    length_scales: np.ndarray     # (d,)
    noise_var: float
    log_marginal_likelihood: float = 0.0
    _chol: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        K = _kernel_matrix(self.X, self.X, self.signal_var, self.length_scales)
        K[np.diag_indices_from(K)] += self.noise_var + _JITTER
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.y)

    def posterior(self, x) -> tuple[float, float]:
        """Posterior mean and variance at a single point."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        ks = _kernel_matrix(x, self.X, self.signal_var, self.length_scales)[0]
        mean = float(ks @ self._alpha)
        v = cho_solve(self._chol, ks)
        var = self.signal_var - float(ks @ v)
        return mean, max(var, 0.0)

    def posterior_batch(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        Ks = _kernel_matrix(X, self.X, self.signal_var, self.length_scales)
        mean = Ks @ self._alpha
        V = cho_solve(self._chol, Ks.T)
        var = self.signal_var - np.einsum("ij,ji->i", Ks, V)
        return mean, np.maximum(var, 0.0)


def gp_posterior(model: GpModel, x) -> tuple[float, float]:
    return model.posterior(x)


def log_marginal_likelihood(X: np.ndarray, y: np.ndarray, signal_var: float,
                            ls: np.ndarray, noise_var: float) -> float:
    K = _kernel_matrix(X, X, signal_var, ls)
    K[np.diag_indices_from(K)] += noise_var + _JITTER
    try:
        chol = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve(chol, y)
    n = len(y)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(chol[0])))
                 - 0.5 * n * math.log(2.0 * math.pi))


def _neg_lml_and_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Negative LML and gradient in log-hyperparameter space.

    theta = [log signal_var, log ls_1..d, log noise_var].
    """
    d = X.shape[1]
    sig = math.exp(theta[0])
    ls = np.exp(theta[1:1 + d])
    noise = math.exp(theta[-1])
    Kf = _kernel_matrix(X, X, sig, ls)
    K = Kf.copy()
    K[np.diag_indices_from(K)] += noise + _JITTER
    try:
        chol = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve(chol, y)
    n = len(y)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(chol[0]))) - 0.5 * n * math.log(2 * math.pi)
    Kinv = cho_solve(chol, np.eye(n))
    A = np.outer(alpha, alpha) - Kinv

    grad = np.zeros_like(theta)
    grad[0] = 0.5 * np.sum(A * Kf)  # dK/dlog(sig) = Kf
    # dk/d log ls_i = sig * (5/3) (1 + sqrt5 r) exp(-sqrt5 r) * (d_i/ls_i)^2
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2 / ls**2
    r = np.sqrt(np.maximum(diff2.sum(axis=2), 0.0))
    base = sig * (5.0 / 3.0) * (1.0 + _SQRT5 * r) * np.exp(-_SQRT5 * r)
    for i in range(d):
        grad[1 + i] = 0.5 * np.sum(A * (base * diff2[:, :, i]))
    grad[-1] = 0.5 * np.trace(A) * noise
    return -lml, -grad


def gp_fit(X: np.ndarray, y: np.ndarray, seed: int = 0, n_starts: int = 8) -> GpModel:
    """Fit hyperparameters by multi-start local ascent of the marginal
    likelihood in log space. Inputs are expected in the unit cube with y
    standardized; degenerate targets fall back to fixed hyperparameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training points")
    d = X.shape[1]
    if float(np.var(y)) < 1e-12:
        # Degenerate targets: pin the hyperparameters at the noise floor so
        # the posterior is flat with variance at most noise + jitter.
        return GpModel(X=X, y=y, signal_var=1e-6, length_scales=np.ones(d),
                       noise_var=1e-6,
                       log_marginal_likelihood=log_marginal_likelihood(
                           X, y, 1e-6, np.ones(d), 1e-6))
    rng = np.random.default_rng(seed)
    bounds = [(math.log(1e-3), math.log(1e3))] \
        + [(math.log(1e-2), math.log(1e2))] * d \
        + [(math.log(1e-8), math.log(1.0))]
    best = None
    for s in range(n_starts):
        if s == 0:
            theta0 = np.concatenate([[0.0], np.full(d, math.log(0.5)), [math.log(1e-4)]])
        else:
            theta0 = np.concatenate([
                [rng.uniform(math.log(0.1), math.log(10.0))],
                rng.uniform(math.log(0.05), math.log(2.0), size=d),
                [rng.uniform(math.log(1e-7), math.log(1e-2))],
            ])
        res = minimize(_neg_lml_and_grad, theta0, args=(X, y), jac=True,
                       method="L-BFGS-B", bounds=bounds, options={"maxiter": 100})
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    return GpModel(X=X, y=y, signal_var=math.exp(theta[0]),
                   length_scales=np.exp(theta[1:1 + d]), noise_var=math.exp(theta[-1]),
                   log_marginal_likelihood=-float(best.fun))


# ---------------------------------------------------------------------------
# Acquisition
# ---------------------------------------------------------------------------

def _norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def expected_improvement(model: GpModel, x, y_best: float) -> float:
    mean, var = model.posterior(x)
    return float(_ei_from_moments(np.array([mean]), np.array([var]), y_best)[0])


def _ei_from_moments(mean: np.ndarray, var: np.ndarray, y_best: float) -> np.ndarray:
    sigma = np.sqrt(var)
    improv = y_best - mean
    ei = np.maximum(improv, 0.0)  # deterministic limit when sigma ~ 0
    ok = sigma >= 1e-12
    if np.any(ok):
        z = improv[ok] / sigma[ok]
        ei[ok] = improv[ok] * ndtr(z) + sigma[ok] * _norm_pdf(z)
    return np.maximum(ei, 0.0)


def propose_next(model: GpModel, space: ParamSpace, rng: np.random.Generator,
                 y_best: float | None = None, n_candidates: int = 512,
                 n_refine: int = 8) -> np.ndarray:
    """Maximize EI over the unit cube and return the denormalized, snapped
    proposal (integer dims rounded, Nc clamped below Np).

    EI is evaluated on the snapped image of every candidate so the returned
    point's acquisition value dominates all raw candidates by construction.
    """
    y_best = float(np.min(model.y)) if y_best is None else y_best

    def snap(xc: np.ndarray) -> np.ndarray:
        raw = repair_horizons(space.denormalize(xc), space)
        return space.normalize(raw)

    def ei_of(xc: np.ndarray) -> np.ndarray:
        pts = snap(np.atleast_2d(xc))
        mean, var = model.posterior_batch(pts)
        return _ei_from_moments(mean, var, y_best)

    cand = rng.random((n_candidates, space.n_dims))
    scores = ei_of(cand)
    order = np.argsort(scores)[::-1]
    finalists = cand[order[:n_refine]].copy()

    for fi in range(len(finalists)):
        x = finalists[fi]
        width = 0.25
        for _ in range(3):  # shrinking coordinate-descent sweeps
            for dim in range(space.n_dims):
                grid = np.clip(x[dim] + np.linspace(-width, width, 9), 0.0, 1.0)
                trial = np.repeat(x[None, :], len(grid), axis=0)
                trial[:, dim] = grid
                s = ei_of(trial)
                x[dim] = grid[int(np.argmax(s))]
            width *= 0.4
        finalists[fi] = x

    pool = np.vstack([cand, finalists])
    best_x = pool[int(np.argmax(ei_of(pool)))]
    return repair_horizons(space.denormalize(snap(best_x)), space)


# ---------------------------------------------------------------------------
# Optimization loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoConfig:
    n_init: int = 8
    n_max: int = 40
    seed: int = 0
    n_candidates: int = 512
    failure_penalty: float = 1.0

    def __post_init__(self):
        if self.n_init < 2 or self.n_max < 0:
            raise ValueError("need n_init >= 2 and n_max >= 0")


@dataclass
class OptResult:
    best_raw: np.ndarray
    best_objective: float
    history: list[dict]

    @property
    def best_params(self) -> MpcParams:
        return MpcParams.from_vector(self.best_raw)

    def to_json(self) -> str:
        return json.dumps({
            "best": list(map(float, self.best_raw)),
            "best_objective": self.best_objective,
            "history": self.history,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "OptResult":
        d = json.loads(text)
        return cls(best_raw=np.array(d["best"]), best_objective=d["best_objective"],
                   history=d["history"])


def _latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    cells = (np.arange(n)[:, None] + rng.random((n, d))) / n
    for j in range(d):
        cells[:, j] = cells[rng.permutation(n), j]
    return cells


def _coerce_eval(result) -> tuple[float, bool]:
    """Accept either a plain objective value or a sim.EvalResult-like object."""
    obj = getattr(result, "objective", result)
    feasible = getattr(result, "bo_feasible", True)
    return float(obj), bool(feasible)


def optimize(cfg: BoConfig, space: ParamSpace, evaluator,
             seed_point: np.ndarray | None = None,
             resume_from=None, history_path=None) -> OptResult:
    """Run the surrogate-driven tuning loop.

    Initial design: Latin hypercube of n_init points (horizon-repaired) plus
    an optional seed point such as the hand-tuned parameter set. Then n_max
    rounds of refit -> propose -> evaluate. Returns the best parameters seen
    and the full history; an evaluator exception aborts but persists partial
    history when history_path is given. ``resume_from`` accepts a previous
    OptResult or the history list persisted at history_path.
    """
    rng = np.random.default_rng(cfg.seed)
    if resume_from is None:
        history: list[dict] = []
    elif isinstance(resume_from, OptResult):
        history = list(resume_from.history)
    else:
        history = list(resume_from)
    X_raw: list[np.ndarray] = [np.array(h["raw"], dtype=float) for h in history]
    y: list[float] = [h["objective"] for h in history]

    def run_point(raw: np.ndarray, phase: str, hypers: dict | None = None):
        raw = np.asarray(raw, dtype=float)
        obj, feasible = _coerce_eval(evaluator(raw))
        value = obj if feasible else cfg.failure_penalty
        X_raw.append(raw)
        y.append(value)
        best_so_far = float(np.min(y))
        record = {
            "iteration": len(history), "phase": phase,
            "raw": [float(v) for v in raw], "objective": value,
            "feasible": feasible, "incumbent": best_so_far,
        }
        if hypers is not None:
            record["hypers"] = hypers
        history.append(record)
        if history_path is not None:
            with open(history_path, "w") as fh:
                fh.write(json.dumps(history, indent=2))

    try:
        if not history:
            init = _latin_hypercube(cfg.n_init, space.n_dims, rng)
            for xc in init:
                run_point(repair_horizons(space.denormalize(xc), space), "init")
            if seed_point is not None:
                run_point(np.asarray(seed_point, dtype=float), "seed")
        n_done = sum(1 for h in history if h["phase"] == "bo")
        for _ in range(cfg.n_max - n_done):
            Xn = space.normalize(np.array(X_raw))
            yv = np.array(y)
            mu, sd = float(np.mean(yv)), float(np.std(yv))
            ystd = (yv - mu) / (sd if sd > 1e-12 else 1.0)
            model = gp_fit(Xn, ystd, seed=cfg.seed)
            raw = propose_next(model, space, rng, y_best=float(np.min(ystd)),
                               n_candidates=cfg.n_candidates)
            run_point(raw, "bo", hypers={
                "signal_var": model.signal_var,
                "length_scales": [float(v) for v in model.length_scales],
                "noise_var": model.noise_var,
            })
    finally:
        # An evaluator exception aborts the loop but keeps the partial history.
        if history_path is not None and history:
            with open(history_path, "w") as fh:
                fh.write(json.dumps(history, indent=2))

    best_idx = int(np.argmin(y))
    return OptResult(best_raw=np.array(X_raw[best_idx]), best_objective=float(y[best_idx]),
                     history=history)


# ---------------------------------------------------------------------------
# Morris elementary-effects screening
# ---------------------------------------------------------------------------

def elementary_effects(space: ParamSpace, evaluator, r: int = 8, p: int = 4,
                       seed: int = 0) -> list[dict]:
    """One-at-a-time sensitivity screen over the unit-cube grid.

    Each of the r trajectories perturbs every dimension once by the grid step
    delta = p / (2 (p - 1)); the recorded effect is the direction-corrected
    change of the evaluator output. Returns per-dimension records with mu_star
    (mean absolute effect) and sigma (std of effects), ranked by mu_star.
    """
    if r < 2 or p < 2:
        raise ValueError("need r >= 2 trajectories and p >= 2 levels")
    rng = np.random.default_rng(seed)
    d = space.n_dims
    delta = p / (2.0 * (p - 1.0))
    levels = np.arange(p) / (p - 1.0)
    effects = np.zeros((r, d))
    for ti in range(r):
        x = levels[rng.integers(0, p, size=d)].astype(float)
        order = rng.permutation(d)
        f_cur, _ = _coerce_eval(evaluator(space.denormalize(x)))
        for dim in order:
            up_ok = x[dim] + delta <= 1.0 + 1e-12
            down_ok = x[dim] - delta >= -1e-12
            if up_ok and down_ok:
                sign = 1.0 if rng.random() < 0.5 else -1.0
            else:
                sign = 1.0 if up_ok else -1.0
            x_new = x.copy()
            x_new[dim] = x[dim] + sign * delta
            f_new, _ = _coerce_eval(evaluator(space.denormalize(x_new)))
            effects[ti, dim] = (f_new - f_cur) / sign
            x, f_cur = x_new, f_new
    out = []
    for i, dim in enumerate(space.dims):
        out.append({
            "name": dim.name,
            "mu_star": float(np.mean(np.abs(effects[:, i]))),
            "sigma": float(np.std(effects[:, i], ddof=1)),
        })
    out.sort(key=lambda rec: rec["mu_star"], reverse=True)
    return out
