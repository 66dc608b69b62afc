"""Parameter recovery from equilibrium data.

The likelihood of i.i.d. configurations is maximized exactly when the
model's moments match the sample moments, so estimation reduces to
moment matching: the couplings come from inverting the response
relation between the covariance and the susceptibility, the fields from
inverting the self-consistency equations at the sample mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCondition,
    EmptySample,
    InconsistentRows,
    LatticeTooLarge,
    MagnetizationSaturated,
    SingularChi,
    ZeroVariance,
)
from .exact import SampleSet, log_partition
from .model import FiniteMeasure, ModelSpec, validate_model

_SATURATION = 1.0 - 1e-12
LN2 = math.log(2.0)


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample means and second moments of the species magnetizations."""

    mean: np.ndarray
    second: np.ndarray
    sizes: np.ndarray
    sample_count: int


@dataclass(frozen=True)
class InverseEstimate:
    J_hat: np.ndarray
    h_hat: np.ndarray
    chi_hat: np.ndarray
    diagnostics: dict
    log_likelihood: float | None = None


def estimate_moments(samples: SampleSet) -> EmpiricalMoments:
    """Plain (uncorrected) sample moments of the magnetizations."""
    if samples.sample_count < 2:
        raise EmptySample("need at least two sample rows")
    sums = samples.sums
    if sums.ndim != 2 or sums.shape[1] != samples.n:
        raise InconsistentRows("sample rows do not match the species count")
    if np.any(np.abs(sums) > samples.sizes[None, :]):
        raise InconsistentRows("per-species sums exceed the block sizes")
    if np.any((sums + samples.sizes[None, :]) % 2 != 0):
        raise InconsistentRows("per-species sums have impossible parity")
    m = samples.magnetizations()
    mean = m.mean(axis=0)
    second = m.T @ m / samples.sample_count
    second = 0.5 * (second + second.T)
    return EmpiricalMoments(mean=mean, second=second,
                            sizes=samples.sizes.copy(),
                            sample_count=samples.sample_count)


def empirical_susceptibility(moments: EmpiricalMoments) -> np.ndarray:
    """chi_ls = N_s (<m_l m_s> - <m_l><m_s>), the response estimate."""
    cov = moments.second - np.outer(moments.mean, moments.mean)
    if np.max(np.abs(cov)) <= 1e-15:
        raise ZeroVariance("magnetizations carry no fluctuation")
    return cov * moments.sizes[None, :].astype(float)


def invert_cw(moments: EmpiricalMoments) -> InverseEstimate:
    """Closed-form single-species estimate of (J, h)."""
    if moments.mean.shape != (1,):
        raise DimensionMismatch("single-species inversion needs n=1 moments")
    m = float(moments.mean[0])
    var = float(moments.second[0, 0]) - m * m
    if abs(m) >= _SATURATION:
        raise MagnetizationSaturated("mean magnetization is at the boundary")
    if var <= 1e-15:
        raise ZeroVariance("zero variance: J is unidentifiable")
    N = float(moments.sizes[0])
    chi = N * var
    J = 1.0 / (1.0 - m * m) - 1.0 / chi
    h = math.atanh(m) - J * m
    diag = {"saturation_margin": 1.0 - abs(m), "variance": var,
            "chi_condition": 1.0}
    return InverseEstimate(J_hat=np.array([[J]]), h_hat=np.array([h]),
                           chi_hat=np.array([[chi]]), diagnostics=diag)


def invert_multi(moments: EmpiricalMoments, alpha) -> InverseEstimate:
    """Multi-species estimate: invert the response relation, then the fields."""
    alpha = np.asarray(alpha, dtype=float)
    n = len(moments.mean)
    if alpha.shape != (n,):
        raise DimensionMismatch("alpha must have one entry per species")
    if np.any(np.abs(moments.mean) >= _SATURATION):
        raise MagnetizationSaturated("a species mean is at the boundary")
    chi = empirical_susceptibility(moments)
    cond = np.linalg.cond(chi)
    if not np.isfinite(cond) or cond > 1e10:
        raise SingularChi(f"susceptibility estimate is singular (cond={cond:.3g})")
    P_inv = np.diag(1.0 / (1.0 - moments.mean ** 2))
    raw = (P_inv - np.linalg.inv(chi)) / alpha[None, :]
    J_hat = 0.5 * (raw + raw.T)
    h_hat = np.arctanh(moments.mean) - J_hat @ (alpha * moments.mean)
    diag = {"saturation_margin": float(1.0 - np.max(np.abs(moments.mean))),
            "chi_condition": float(cond),
            "asymmetry": float(np.max(np.abs(raw - raw.T)))}
    return InverseEstimate(J_hat=J_hat, h_hat=h_hat, chi_hat=chi,
                           diagnostics=diag)


def _invert_moments(moments: EmpiricalMoments, alpha) -> InverseEstimate:
    if len(moments.mean) == 1:
        return invert_cw(moments)
    return invert_multi(moments, alpha)


def invert_conditioned(samples: SampleSet, ball_center, radius: float,
                       alpha) -> InverseEstimate:
    """Restrict the sample to a magnetization ball, then invert as usual.

    This is how coexisting phases are handled: conditioning near one
    maximum restores a well-defined mean and variance.
    """
    center = np.asarray(ball_center, dtype=float)
    if center.shape != (samples.n,):
        raise DimensionMismatch("ball center must have one entry per species")
    m = samples.magnetizations()
    mask = np.linalg.norm(m - center[None, :], axis=1) <= radius
    if mask.sum() < 2:
        raise EmptyCondition("fewer than two sample rows fall in the ball")
    restricted = SampleSet(sizes=samples.sizes, seed=samples.seed,
                           sums=samples.sums[mask])
    return _invert_moments(estimate_moments(restricted), alpha)


def _sample_log_likelihood(samples: SampleSet, J: np.ndarray, h: np.ndarray,
                           alpha: np.ndarray) -> float:
    """Exact log-likelihood of the sample rows under (J, h)."""
    spec = ModelSpec(n=samples.n, alpha=tuple(alpha), h=tuple(h),
                     J=tuple(tuple(row) for row in J),
                     site_measure=FiniteMeasure.symmetric_binary())
    model = validate_model(spec)
    N = float(samples.sizes.sum())
    ln_z = log_partition(model, samples.sizes) + N * LN2
    S = samples.sums.astype(float)
    energies = 0.5 / N * np.einsum("bi,ij,bj->b", S, J, S) + S @ h
    return float(energies.sum() - samples.sample_count * ln_z)


def mle_fit(samples: SampleSet, alpha) -> InverseEstimate:
    """Maximum-likelihood fit: moment matching plus the achieved likelihood.

    The stationarity conditions of the likelihood are exactly the moment
    equations, so the point estimate coincides with the moment inversion.
    """
    alpha = np.asarray(alpha, dtype=float)
    est = _invert_moments(estimate_moments(samples), alpha)
    try:
        ll = _sample_log_likelihood(samples, est.J_hat, est.h_hat, alpha)
    except LatticeTooLarge:
        ll = None
    return replace(est, log_likelihood=ll)
