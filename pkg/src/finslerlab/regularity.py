"""Regularity hypotheses: rank of the y-Hessian of F and convexity of F**2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RESIDUAL_TOL, TangentSample, samples_to_arrays
from .jets import jet_at, jet_batch

RANK_TAU = 1e-8


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    eigen_spectrum: np.ndarray

    @property
    def positive_definite(self) -> bool:
        return bool(self.eigen_spectrum[0] > 0)


def hessian_rank(H: np.ndarray, tau: float = RANK_TAU, scale: float = 0.0) -> int:
    """Count singular values above ``tau * max(sigma_max, scale)``."""
    sv = np.linalg.svd(H, compute_uv=False)
    ref = max(sv[0], scale)
    if ref == 0:
        return 0
    return int(np.sum(sv > tau * ref))


def reduced_hessian_rank(m, s: TangentSample, tau: float = RANK_TAU) -> int:
    """Numerical rank of d2F/dydy; n - 1 for a (pseudo-)Finsler function."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    jet = jet_at(m, s.normalized(), 2)
    # on unit directions the Hessian scales like F; floor the reference so
    # round-off in an identically-zero Hessian does not count as rank
    return hessian_rank(jet.d2F_dydy, tau, abs(float(jet.F)))


def is_finsler_rank(m, s: TangentSample, tau: float = RANK_TAU) -> bool:
    return reduced_hessian_rank(m, s, tau) == s.dimension - 1


def fundamental_tensor(m, s: TangentSample) -> FundamentalTensor:
    g = 0.5 * jet_at(m, s, 2).d2E_dydy
    g = 0.5 * (g + g.T)
    return FundamentalTensor(g, np.sort(np.linalg.eigvalsh(g)))


def kernel_direction_check(m, s: TangentSample) -> float:
    """|d2F_dydy . y| / |y|: zero exactly when y spans the Hessian kernel."""
    jet = jet_at(m, s, 2)
    y = s.y
    return float(np.linalg.norm(jet.d2F_dydy @ y) / np.linalg.norm(y))


def regularity_summary(m, samples, tau: float = RANK_TAU, tol: float = RESIDUAL_TOL) -> dict:
    """Batched rank / convexity / kernel diagnostics over ``samples``."""
    X, Y = samples_to_arrays(samples)
    Y = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    jet = jet_batch(m, X, Y, 2)
    n = X.shape[1]
    sv = np.linalg.svd(jet.d2F_dydy, compute_uv=False)
    ref = np.maximum(sv[:, :1], np.abs(jet.F)[:, None])
    ranks = np.sum(sv > tau * ref, axis=1)
    g = 0.25 * (jet.d2E_dydy + np.swapaxes(jet.d2E_dydy, -1, -2))
    min_eig = np.linalg.eigvalsh(g)[:, 0]
    kernel = np.linalg.norm(np.einsum("bki,bi->bk", jet.d2F_dydy, Y), axis=1)
    return {
        "ranks": ranks,
        "min_eigenvalue": min_eig,
        "kernel_residual": kernel,
        "rank_ok": bool(np.all(ranks == n - 1)),
        "positive_definite": bool(np.all(min_eig > 0)),
        "kernel_ok": bool(np.all(kernel <= tol)),
    }
