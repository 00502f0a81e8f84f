"""Search over the two mesh-size hyperparameters: Gaussian-process surrogate
with Expected Improvement (or UCB) and a random-walk Metropolis baseline.

The GP uses a Matern-5/2 kernel with per-dimension lengthscales on inputs
normalized to [0, 1]^2, a training-mean prior, and fixed observation noise;
kernel hyperparameters are picked by log marginal likelihood over a fixed
5x5x5 grid. Acquisitions are optimized by exhaustive scan of the integer
grid, so the argmax is exact.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_seed

JITTER_INITIAL = 1e-8
JITTER_MAX = 1e-4
LENGTHSCALE_GRID = tuple(np.geomspace(0.05, 2.0, 5))
VARIANCE_GRID = tuple(np.geomspace(0.1, 10.0, 5))


@dataclass
class SearchBounds:
    k_range: tuple = (2, 4)
    l_range: tuple = (3000, 5000)

    def __post_init__(self):
        self.k_range = (int(self.k_range[0]), int(self.k_range[1]))
        self.l_range = (int(self.l_range[0]), int(self.l_range[1]))
        if self.k_range[0] > self.k_range[1] or self.l_range[0] > self.l_range[1]:
            raise ValueError("bounds must be non-empty integer ranges")

    def contains(self, k, l):
        return self.k_range[0] <= k <= self.k_range[1] and self.l_range[0] <= l <= self.l_range[1]

    def grid_size(self):
        return (self.k_range[1] - self.k_range[0] + 1) * (self.l_range[1] - self.l_range[0] + 1)

    def normalize(self, k, l):
        def norm(v, lo, hi):
            return 0.0 if hi == lo else (v - lo) / (hi - lo)

        return (norm(k, *self.k_range), norm(l, *self.l_range))


@dataclass
class EvalRecord:
    k: int
    l: int
    mse: float
    wall_seconds: float = 0.0


@dataclass
class GPModel:
    x: np.ndarray  # (n, 2) normalized inputs
    y: np.ndarray
    y_mean: float
    lengthscales: np.ndarray
    signal_variance: float
    noise: float
    chol: np.ndarray
    alpha: np.ndarray
    bounds: SearchBounds


def _matern52(x1, x2, lengthscales, signal_variance):
    d = (x1[:, None, :] - x2[None, :, :]) / lengthscales[None, None, :]
    r = np.sqrt(np.sum(d * d, axis=2))
    sr = math.sqrt(5.0) * r
    return signal_variance * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def _chol_with_jitter(k_matrix, noise):
    jitter = JITTER_INITIAL
    n = k_matrix.shape[0]
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(k_matrix + (noise + jitter) * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise ValueError("kernel matrix is not positive definite even at maximum jitter")


def gp_fit(history, noise, bounds):
    """Exact GP posterior over the normalized (k, l) square.

    Hyperparameters maximize log marginal likelihood over a fixed grid of
    (lengthscale_k, lengthscale_l, signal variance); noise stays at the
    configured value.
    """
    records = [r for r in history if math.isfinite(r.mse)]
    if not records:
        raise ValueError("GP fit needs at least one finite-objective record")
    x = np.array([bounds.normalize(r.k, r.l) for r in records])
    y = np.array([r.mse for r in records])
    y_mean = float(y.mean())
    resid = y - y_mean
    var_y = float(np.var(y))
    var_base = var_y if var_y > 0 else 1.0
    best = None
    for ls_k in LENGTHSCALE_GRID:
        for ls_l in LENGTHSCALE_GRID:
            for sv in VARIANCE_GRID:
                ls = np.array([ls_k, ls_l])
                s2 = sv * var_base
                k_matrix = _matern52(x, x, ls, s2)
                try:
                    chol, _ = _chol_with_jitter(k_matrix, noise)
                except ValueError:
                    continue
                alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, resid))
                lml = (
                    -0.5 * float(resid @ alpha)
                    - float(np.sum(np.log(np.diag(chol))))
                    - 0.5 * len(y) * math.log(2.0 * math.pi)
                )
                if best is None or lml > best[0]:
                    best = (lml, ls, s2, chol, alpha)
    if best is None:
        raise ValueError("GP fit failed: no hyperparameter candidate factorized")
    _, ls, s2, chol, alpha = best
    return GPModel(x, y, y_mean, ls, s2, noise, chol, alpha, bounds)


def _gp_predict_batch(gp, points_norm):
    k_star = _matern52(points_norm, gp.x, gp.lengthscales, gp.signal_variance)
    mean = gp.y_mean + k_star @ gp.alpha
    v = np.linalg.solve(gp.chol, k_star.T)
    var = gp.signal_variance - np.sum(v * v, axis=0)
    return mean, np.sqrt(np.maximum(var, 0.0))


def gp_predict(gp, point):
    """(posterior mean, posterior stdev) at one (k, l) point."""
    x = np.array([gp.bounds.normalize(point[0], point[1])])
    mean, std = _gp_predict_batch(gp, x)
    return float(mean[0]), float(std[0])


def _norm_cdf(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _norm_pdf(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def expected_improvement(mean, stdev, best):
    """Expected positive gap below the current best, for minimization."""
    if stdev < 0:
        raise ValueError("stdev must be non-negative")
    if stdev == 0.0:
        return max(best - mean, 0.0)
    z = (best - mean) / stdev
    return (best - mean) * _norm_cdf(z) + stdev * _norm_pdf(z)


def ucb_acquisition(mean, stdev, kappa):
    """Optimistic lower bound mean - kappa*stdev; smaller is more promising."""
    if stdev < 0 or kappa < 0:
        raise ValueError("stdev and kappa must be non-negative")
    return mean - kappa * stdev


@dataclass
class Acquisition:
    kind: str  # "ei" or "ucb"
    kappa: float = 2.0

    def __post_init__(self):
        if self.kind not in ("ei", "ucb"):
            raise ValueError("acquisition kind must be 'ei' or 'ucb'")


def propose_next(gp, bounds, acquisition, history):
    """Scan the full integer grid, skip evaluated points, return the best
    scoring candidate (ties broken by lexicographically smallest (k, l))."""
    evaluated = {(r.k, r.l) for r in history}
    finite = [r.mse for r in history if math.isfinite(r.mse)]
    best_mse = min(finite) if finite else math.inf
    candidates = []
    for k in range(bounds.k_range[0], bounds.k_range[1] + 1):
        for l in range(bounds.l_range[0], bounds.l_range[1] + 1):
            if (k, l) not in evaluated:
                candidates.append((k, l))
    if not candidates:
        raise ValueError("search grid exhausted: every (k, l) has been evaluated")
    points = np.array([bounds.normalize(k, l) for k, l in candidates])
    means, stds = _gp_predict_batch(gp, points)
    best_point = None
    best_score = None
    for (k, l), mu, sd in zip(candidates, means, stds):
        if acquisition.kind == "ei":
            score = expected_improvement(float(mu), float(sd), best_mse)
            better = best_score is None or score > best_score
        else:
            score = ucb_acquisition(float(mu), float(sd), acquisition.kappa)
            better = best_score is None or score < best_score
        if better:
            best_score = score
            best_point = (k, l)
    return best_point


def _timed_objective(objective, k, l):
    start = time.perf_counter()
    try:
        mse = float(objective(k, l))
    except Exception:
        mse = math.inf
    return EvalRecord(k, l, mse, time.perf_counter() - start)


def bo_loop(objective, bounds, t_max, p_max, acquisition, seed, noise=1e-6):
    """Surrogate-guided search with patience.

    Iteration 1 evaluates one seeded-random in-bounds point (the initial
    history); afterwards each iteration refits the GP on the finite records
    and evaluates the acquisition argmax. An improvement resets the patience
    count to 1, a non-improvement increments it, and the loop runs while
    t <= t_max and p <= p_max. Failed objective calls are recorded as +inf
    and excluded from the surrogate and from the returned best.

    Returns (best record, history in evaluation order).
    """
    if t_max < 1 or p_max < 1:
        raise ValueError("t_max and p_max must be at least 1")
    rng = np.random.default_rng(seed)
    history = []
    best_rec = None
    best_mse = math.inf
    t, p = 1, 1
    while t <= t_max and p <= p_max:
        if t == 1:
            k = int(rng.integers(bounds.k_range[0], bounds.k_range[1] + 1))
            l = int(rng.integers(bounds.l_range[0], bounds.l_range[1] + 1))
        else:
            if len(history) >= bounds.grid_size():
                break
            finite = [r for r in history if math.isfinite(r.mse)]
            if finite:
                gp = gp_fit(history, noise, bounds)
                k, l = propose_next(gp, bounds, acquisition, history)
            else:
                k, l = _random_unevaluated(rng, bounds, history)
        rec = _timed_objective(objective, k, l)
        if rec.mse < best_mse:
            best_mse = rec.mse
            best_rec = rec
            p = 1
        else:
            p += 1
        history.append(rec)
        t += 1
    return best_rec, history


def _random_unevaluated(rng, bounds, history):
    evaluated = {(r.k, r.l) for r in history}
    while True:
        k = int(rng.integers(bounds.k_range[0], bounds.k_range[1] + 1))
        l = int(rng.integers(bounds.l_range[0], bounds.l_range[1] + 1))
        if (k, l) not in evaluated:
            return k, l


def _fold(x, lo, hi):
    """Reflect an integer into [lo, hi]."""
    if lo >= hi:
        return lo
    while x < lo or x > hi:
        if x < lo:
            x = 2 * lo - x
        else:
            x = 2 * hi - x
    return x


@dataclass
class McmcConfig:
    temperature: float = None  # None: 0.1 x first-evaluation MSE
    sigma_l: float = None  # None: 5% of the l range width
    k_step_prob: float = 0.3
    chain_length: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.temperature is not None and self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.sigma_l is not None and self.sigma_l <= 0:
            raise ValueError("sigma_l must be positive")
        if not 0.0 <= self.k_step_prob <= 1.0:
            raise ValueError("k_step_prob must be a probability")
        if self.chain_length < 1:
            raise ValueError("chain_length must be at least 1")


@dataclass
class McmcResult:
    best: EvalRecord
    records: list  # every objective evaluation, in order
    states: list = field(default_factory=list)  # chain state after each step
    accepted: int = 0


def mcmc_search(objective, bounds, config):
    """Random-walk Metropolis over the integer grid targeting exp(-MSE/T).

    Proposals move k by +-1 with probability ``k_step_prob`` and l by a
    rounded Gaussian step, both reflected at the bounds; acceptance is
    min(1, exp(-(MSE' - MSE)/T)). Every chain step costs one objective
    evaluation; the chain and the running best are recorded.
    """
    rng = np.random.default_rng(config.seed)
    k = int(rng.integers(bounds.k_range[0], bounds.k_range[1] + 1))
    l = int(rng.integers(bounds.l_range[0], bounds.l_range[1] + 1))
    rec = _timed_objective(objective, k, l)
    records = [rec]
    states = [(k, l)]
    best = rec
    current_mse = rec.mse
    temperature = config.temperature
    if temperature is None:
        temperature = 0.1 * (rec.mse if math.isfinite(rec.mse) and rec.mse > 0 else 1.0)
    sigma_l = config.sigma_l
    if sigma_l is None:
        width = bounds.l_range[1] - bounds.l_range[0]
        sigma_l = max(0.05 * width, 1.0)
    accepted = 0
    for _ in range(1, config.chain_length):
        k_new = k
        if bounds.k_range[0] < bounds.k_range[1] and rng.random() < config.k_step_prob:
            k_new = _fold(k + (1 if rng.random() < 0.5 else -1), *bounds.k_range)
        l_new = _fold(l + int(round(rng.normal(0.0, sigma_l))), *bounds.l_range)
        prop = _timed_objective(objective, k_new, l_new)
        records.append(prop)
        if prop.mse < best.mse:
            best = prop
        ratio = math.exp(min(0.0, -(prop.mse - current_mse) / temperature)) if math.isfinite(prop.mse) else 0.0
        if prop.mse <= current_mse or rng.random() < ratio:
            k, l = k_new, l_new
            current_mse = prop.mse
            accepted += 1
        states.append((k, l))
    return McmcResult(best=best, records=records, states=states, accepted=accepted)


@dataclass
class StrategyRun:
    strategy: str
    seed: int
    records: list

    def best_curve(self):
        out = []
        best = math.inf
        for r in self.records:
            if r.mse < best:
                best = r.mse
            out.append(best)
        return out


@dataclass
class ComparisonReport:
    budget: int
    seeds: list
    runs: list  # StrategyRun, including each MCMC repeat
    summary: dict  # strategy -> {"per_seed_final": [...], "median_final_best": float}


def compare_strategies(objective, bounds, budget, seeds, mcmc_repeats=10, kappa=2.0, noise=1e-6):
    """Run the EI and UCB surrogate searches plus the Metropolis baseline
    under identical evaluation budgets.

    The Metropolis baseline runs ``mcmc_repeats`` chains per seed; its
    per-seed final best is the mean over repeats. Summary medians are taken
    across seeds.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    runs = []
    per_seed_final = {"bo-ei": [], "bo-ucb": [], "mcmc": []}
    for seed in seeds:
        for strategy, acq in (("bo-ei", Acquisition("ei")), ("bo-ucb", Acquisition("ucb", kappa))):
            _, history = bo_loop(objective, bounds, budget, budget, acq, seed, noise=noise)
            run = StrategyRun(strategy, seed, history)
            runs.append(run)
            per_seed_final[strategy].append(run.best_curve()[-1])
        finals = []
        for rep in range(mcmc_repeats):
            cfg = McmcConfig(chain_length=budget, seed=derive_seed(seed, f"mcmc/{rep}"))
            result = mcmc_search(objective, bounds, cfg)
            run = StrategyRun("mcmc", cfg.seed, result.records)
            runs.append(run)
            finals.append(run.best_curve()[-1])
        per_seed_final["mcmc"].append(float(np.mean(finals)))
    summary = {
        strategy: {
            "per_seed_final": finals,
            "median_final_best": float(np.median(finals)),
        }
        for strategy, finals in per_seed_final.items()
    }
    return ComparisonReport(budget=budget, seeds=list(seeds), runs=runs, summary=summary)
