"""Covariance matrix adaptation evolution strategy, as a box-clipped maximizer.

Standard (mu/mu_w, lambda) CMA-ES with cumulative step-size control and
rank-one plus rank-mu covariance updates. The search runs in coordinates
normalized to [-1, 1] per dimension; candidates are clipped onto the box
before evaluation while the sampler's internal state stays unconstrained.
Results are deterministic for a fixed seed; the best evaluated (clipped)
candidate ever seen is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CmaesResult:
    best: np.ndarray
    value: float
    generations: int
    evaluations: int


def cmaes_maximize(
    evaluate_batch,
    lower: np.ndarray,
    upper: np.ndarray,
    *,
    population: int,
    generations: int,
    sigma0: float = 0.3,
    seed: int = 0,
    x0: np.ndarray | None = None,
) -> CmaesResult:
    """Maximize a batch objective over the box [lower, upper].

    `evaluate_batch` maps an (n, dim) array of candidates to an (n,) array
    of objective values; non-finite values are treated as -inf. `sigma0`
    is the initial step size in box-half-width units.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower/upper must be 1-D arrays of equal length")
    if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
        raise ValueError("the search box must be bounded")
    if population < 4:
        raise ValueError(f"population must be >= 4, got {population}")
    if generations < 1:
        raise ValueError(f"generations must be >= 1, got {generations}")

    dim = lower.size
    center = (upper + lower) / 2.0
    half = (upper - lower) / 2.0
    half = np.where(half == 0.0, 1.0, half)  # frozen coordinates stay at center

    def denorm(z):
        return center + half * z

    def norm(x):
        return (np.asarray(x, dtype=float) - center) / half

    lam = population
    mu = lam // 2
    raw = np.log(lam / 2.0 + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = weights.sum() ** 2 / (weights**2).sum()

    cc = (4.0 + mueff / dim) / (dim + 4.0 + 2.0 * mueff / dim)
    cs = (mueff + 2.0) / (dim + mueff + 5.0)
    c1 = 2.0 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dim + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, np.sqrt((mueff - 1.0) / (dim + 1.0)) - 1.0) + cs
    chi_n = np.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2))

    rng = np.random.default_rng(seed)
    mean = np.zeros(dim) if x0 is None else norm(x0)
    sigma = float(sigma0)
    cov = np.eye(dim)
    p_sigma = np.zeros(dim)
    p_cov = np.zeros(dim)

    best_x = np.clip(denorm(mean), lower, upper)
    best_value = -np.inf
    evaluations = 0

    for gen in range(generations):
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-20)
        scale = np.sqrt(eigvals)

        z = rng.standard_normal((lam, dim))
        steps = (z * scale) @ eigvecs.T           # y_k ~ N(0, C)
        samples = mean + sigma * steps
        clipped = np.clip(samples, -1.0, 1.0)

        fitness = np.asarray(evaluate_batch(denorm(clipped)), dtype=float)
        fitness = np.where(np.isfinite(fitness), fitness, -np.inf)
        evaluations += lam

        gen_best = int(np.argmax(fitness))
        if fitness[gen_best] > best_value:
            best_value = float(fitness[gen_best])
            best_x = denorm(clipped[gen_best]).copy()

        order = np.argsort(-fitness, kind="stable")[:mu]
        step_mean = weights @ steps[order]
        mean = mean + sigma * step_mean

        inv_sqrt = eigvecs @ ((eigvecs / scale).T)  # C^(-1/2)
        p_sigma = (1.0 - cs) * p_sigma + np.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt @ step_mean)
        sig_norm = np.linalg.norm(p_sigma)
        h_sig = sig_norm / np.sqrt(1.0 - (1.0 - cs) ** (2 * (gen + 1))) / chi_n < 1.4 + 2.0 / (dim + 1.0)
        p_cov = (1.0 - cc) * p_cov + h_sig * np.sqrt(cc * (2.0 - cc) * mueff) * step_mean

        rank_mu = (weights[:, None] * steps[order]).T @ steps[order]
        cov = (
            (1.0 - c1 - cmu) * cov
            + c1 * (np.outer(p_cov, p_cov) + (1.0 - h_sig) * cc * (2.0 - cc) * cov)
            + cmu * rank_mu
        )
        cov = (cov + cov.T) / 2.0
        sigma = sigma * np.exp((cs / damps) * (sig_norm / chi_n - 1.0))

    return CmaesResult(best=best_x, value=best_value, generations=generations, evaluations=evaluations)
