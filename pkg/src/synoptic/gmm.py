"""One-dimensional Gaussian mixtures fitted by expectation-maximization.

Backs mode-specific normalization: a fitted mixture supplies the per-mode
density and the normalized mode-membership weights used to pick the mode
a value is encoded against.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator

_LOG_2PI = float(np.log(2.0 * np.pi))
KDE_GRID_POINTS = 512


def silverman_bandwidth(values) -> float:
    """Rule-of-thumb kernel bandwidth 0.9 * min(std, IQR/1.34) * n^(-1/5)."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two values")
    std = float(np.std(x))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread <= 0:
        spread = max(abs(float(x[0])), 1.0)
    return 0.9 * spread * n ** (-0.2)


def estimate_mode_count(values, bandwidth: float | None = None) -> int:
    """Count local maxima of the Gaussian-kernel density on a 512-point grid.

    The grid spans [min, max] of the data. A constant sequence has one mode
    by definition.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in input")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return 1
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(lo, hi, KDE_GRID_POINTS)
    dens = np.empty(KDE_GRID_POINTS)
    # chunked so the (grid x n) kernel matrix stays small
    for s in range(0, KDE_GRID_POINTS, 64):
        g = grid[s:s + 64]
        z = (g[:, None] - x[None, :]) / bandwidth
        dens[s:s + 64] = np.exp(-0.5 * z * z).sum(axis=1)
    count = 0
    for i in range(KDE_GRID_POINTS):
        left_ok = i == 0 or dens[i] > dens[i - 1]
        right_ok = i == KDE_GRID_POINTS - 1 or dens[i] > dens[i + 1]
        if left_ok and right_ok:
            count += 1
    return max(count, 1)


class GaussianMixture1D(BaseEstimator):
    """EM-fitted univariate Gaussian mixture with weight-floor pruning.

    For each candidate mode count up to ``max_modes`` a classic EM run is
    started from a k-means++ style seeded initialization; the winner by BIC
    is kept, then components whose weight falls below ``weight_floor`` are
    pruned and the remaining weights renormalized. Selection plus pruning
    leaves near-zero probability on unused modes without variational
    machinery, and every individual run keeps the EM guarantee of a
    non-decreasing log-likelihood.

    Fitted attributes: ``weights_``, ``means_``, ``stds_`` (all length
    ``n_modes_``, sorted by mean), ``kde_modes_`` (diagnostic kernel-density
    mode count), ``loglik_path_`` (per-iteration log-likelihood of the
    winning run).
    """

    def __init__(self, max_modes: int = 10, seed: int = 0, max_iter: int = 300,
                 tol: float = 1e-6, weight_floor: float = 0.005):
        self.max_modes = max_modes
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.weight_floor = weight_floor

    # -- fitting ------------------------------------------------------------

    def fit(self, values):
        x = np.asarray(values, dtype=np.float64).ravel()
        if x.size == 0:
            raise ValueError("cannot fit a mixture to no data")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite values in input")
        if self.max_modes < 1:
            raise ValueError("max_modes must be positive")
        span = float(x.max() - x.min())
        self.sigma_floor_ = 1e-6 * span if span > 0 else 1e-6 * max(abs(float(x[0])), 1.0)

        distinct = np.unique(x)
        m_max = int(self.max_modes)
        if distinct.size < m_max:
            warnings.warn(
                f"only {distinct.size} distinct values; reducing modes from {m_max}",
                stacklevel=2,
            )
            m_max = max(int(distinct.size), 1)

        self.kde_modes_ = estimate_mode_count(x) if distinct.size > 1 else 1

        if distinct.size == 1:
            self.weights_ = np.array([1.0])
            self.means_ = np.array([float(distinct[0])])
            self.stds_ = np.array([self.sigma_floor_])
            self.n_modes_ = 1
            self.loglik_path_ = []
            return self

        best = None
        best_bic = np.inf
        worse_streak = 0
        for m in range(1, m_max + 1):
            weights, means, stds, path = self._run_em(x, m)
            ll = path[-1]
            bic = (3 * m - 1) * np.log(x.size) - 2.0 * ll
            if bic < best_bic - 1e-9:
                best_bic = bic
                best = (weights, means, stds, path)
                worse_streak = 0
            else:
                worse_streak += 1
                if worse_streak >= 2:
                    break
        weights, means, stds, path = best
        self.loglik_path_ = path

        keep = weights >= self.weight_floor
        if not keep.any():
            keep[int(np.argmax(weights))] = True
        weights, means, stds = weights[keep], means[keep], stds[keep]
        weights = weights / weights.sum()
        order = np.argsort(means, kind="stable")
        self.weights_ = weights[order]
        self.means_ = means[order]
        self.stds_ = stds[order]
        self.n_modes_ = int(self.weights_.size)
        return self

    def _run_em(self, x, m):
        rng = np.random.default_rng(self.seed)
        means, stds, weights = self._init_kmeanspp(x, m, rng)
        path = []
        prev = -np.inf
        for _ in range(self.max_iter):
            log_resp, ll = self._e_step(x, weights, means, stds)
            assert ll >= prev - 1e-8 * max(1.0, abs(prev)), "EM log-likelihood decreased"
            path.append(ll)
            if abs(ll - prev) < self.tol:
                break
            prev = ll
            weights, means, stds = self._m_step(x, log_resp)
        return weights, means, stds, path

    def _init_kmeanspp(self, x, m, rng):
        centers = [float(x[rng.integers(x.size)])]
        for _ in range(m - 1):
            d2 = np.min(
                np.abs(x[:, None] - np.array(centers)[None, :]) ** 2, axis=1
            )
            total = d2.sum()
            if total <= 0:
                # remaining mass sits on chosen centers; spread over distinct values
                pool = np.setdiff1d(np.unique(x), np.array(centers))
                centers.append(float(pool[0]))
                continue
            centers.append(float(x[rng.choice(x.size, p=d2 / total)]))
        centers = np.sort(np.array(centers))
        assign = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        means = np.empty(m)
        stds = np.empty(m)
        weights = np.empty(m)
        for k in range(m):
            mask = assign == k
            if mask.any():
                means[k] = x[mask].mean()
                stds[k] = max(float(x[mask].std()), self.sigma_floor_)
                weights[k] = mask.mean()
            else:
                means[k] = centers[k]
                stds[k] = self.sigma_floor_
                weights[k] = 1e-12
        weights = weights / weights.sum()
        return means, stds, weights

    def _e_step(self, x, weights, means, stds):
        logp = self._log_components(x, weights, means, stds)
        top = logp.max(axis=1, keepdims=True)
        lse = top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))
        return logp - lse[:, None], float(lse.sum())

    def _m_step(self, x, log_resp):
        resp = np.exp(log_resp)
        nk = resp.sum(axis=0)
        weights = nk / x.size
        safe = np.maximum(nk, 1e-300)
        means = (resp * x[:, None]).sum(axis=0) / safe
        var = (resp * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / safe
        stds = np.maximum(np.sqrt(var), self.sigma_floor_)
        return weights, means, stds

    @staticmethod
    def _log_components(x, weights, means, stds):
        z = (x[:, None] - means[None, :]) / stds[None, :]
        return (
            np.log(np.maximum(weights, 1e-300))[None, :]
            - np.log(stds)[None, :]
            - 0.5 * (z * z + _LOG_2PI)
        )

    # -- queries ------------------------------------------------------------

    def density(self, x):
        """Mixture density sum_k w_k N(x; mu_k, sigma_k); scalar or array."""
        arr = np.asarray(x, dtype=np.float64)
        z = (arr[..., None] - self.means_) / self.stds_
        pdf = np.exp(-0.5 * z * z) / (self.stds_ * np.sqrt(2.0 * np.pi))
        out = (self.weights_ * pdf).sum(axis=-1)
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    def mode_weights(self, x):
        """Normalized per-mode membership weights for each value.

        When every component density underflows to zero, the nearest mode by
        standardized distance gets weight one.
        """
        arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
        z = (arr[:, None] - self.means_[None, :]) / self.stds_[None, :]
        rho = self.weights_[None, :] * np.exp(-0.5 * z * z) / (
            self.stds_[None, :] * np.sqrt(2.0 * np.pi)
        )
        total = rho.sum(axis=1)
        out = np.empty_like(rho)
        ok = total > 0
        out[ok] = rho[ok] / total[ok, None]
        for i in np.nonzero(~ok)[0]:
            out[i] = 0.0
            out[i, int(np.argmin(np.abs(z[i])))] = 1.0
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return out[0]
        return out

    def assign_modes(self, x) -> np.ndarray:
        """Index of the highest-weight mode per value (ties to lowest index)."""
        w = np.atleast_2d(self.mode_weights(np.atleast_1d(x)))
        return np.argmax(w, axis=1)
