"""Weibull tail models: high-tail maximum-likelihood fitting, CDF
evaluation, and a seeded sampling oracle.

The model is the three-parameter Weibull with CDF::

    F(d) = 1 - exp(-((d - shift) / scale) ** shape)    for d > shift
    F(d) = 0                                           for d <= shift

Fitting targets only the largest ``tail_size`` values of a sample, which
models the extreme tail of a score or distance distribution rather than
its bulk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DataError, DegenerateTailError, SolverError

#: Relative offset that places the shift strictly below the tail minimum.
TAIL_SHIFT_DELTA = 1e-6

#: Absolute convergence threshold for the shape-parameter Newton iteration.
NEWTON_TOL = 1e-8

NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class WeibullModel:
    """Fitted Weibull tail parameters.

    Parameters
    ----------
    shift : float
        Location of the tail start, in the units of the fitted values.
    shape : float
        Weibull shape parameter, > 0.
    scale : float
        Weibull scale parameter, > 0.
    """

    shift: float
    shape: float
    scale: float

    def __post_init__(self):
        shift = float(self.shift)
        shape = float(self.shape)
        scale = float(self.scale)
        if not (np.isfinite(shift) and np.isfinite(shape) and np.isfinite(scale)):
            raise DataError("Weibull parameters must be finite")
        if shape <= 0.0 or scale <= 0.0:
            raise DataError("Weibull shape and scale must be positive")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "scale", scale)


def weibull_cdf(d, model: WeibullModel):
    """Cumulative probability that the tail model assigns to distance ``d``.

    Exactly 0 for ``d <= shift``, monotone non-decreasing, and total for
    any finite input. Accepts a scalar or an array.
    """
    arr = np.asarray(d, dtype=np.float64)
    z = np.maximum(0.0, arr - model.shift) / model.scale
    out = -np.expm1(-(z**model.shape))
    if arr.ndim == 0:
        return float(out)
    return out


def weibull_from_uniform(u, model: WeibullModel):
    """Map uniform draws ``u`` in (0, 1] through the inverse survival
    transform ``shift + scale * (-ln u) ** (1 / shape)``.

    Separated from :func:`sample_weibull` so tests can force specific
    uniforms (u = 1/e maps to shift + scale).
    """
    arr = np.asarray(u, dtype=np.float64)
    out = model.shift + model.scale * (-np.log(arr)) ** (1.0 / model.shape)
    if arr.ndim == 0:
        return float(out)
    return out


def sample_weibull(model: WeibullModel, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` independent values from ``model``, deterministically for
    a fixed ``seed``."""
    rng = np.random.default_rng(seed)
    # 1 - random() lies in (0, 1], keeping the log finite.
    u = 1.0 - rng.random(int(n))
    return weibull_from_uniform(u, model)


def fit_high(values, tail_size: int) -> WeibullModel:
    """Fit a Weibull model to the ``tail_size`` largest values.

    The shift is pinned just below the tail minimum
    (``min - TAIL_SHIFT_DELTA * range``) so every shifted tail value is
    strictly positive, then shape and scale come from maximum likelihood
    via Newton iteration on the profile equation for the shape.

    Parameters
    ----------
    values : array_like
        Sample of non-negative scores or distances, at least
        ``tail_size`` of them.
    tail_size : int
        Number of largest values to fit, >= 2.

    Returns
    -------
    WeibullModel

    Raises
    ------
    ArityError
        If ``tail_size`` < 2 or exceeds the number of values.
    DegenerateTailError
        If the selected tail has zero spread.
    SolverError
        If the Newton iteration does not converge.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    tail_size = int(tail_size)
    if tail_size < 2:
        raise ArityError("tail size must be at least 2")
    if tail_size > vals.size:
        raise ArityError(f"tail size {tail_size} exceeds {vals.size} values")
    if not np.all(np.isfinite(vals)):
        raise DataError("non-finite value in fit input")

    tail = np.sort(vals)[-tail_size:]
    lo = tail[0]
    hi = tail[-1]
    if hi == lo:
        raise DegenerateTailError("tail values are all identical")
    shift = lo - TAIL_SHIFT_DELTA * (hi - lo)
    shape, scale = _weibull_mle(tail - shift)
    return WeibullModel(shift=shift, shape=shape, scale=scale)


def _weibull_mle(x: np.ndarray) -> tuple[float, float]:
    """Two-parameter Weibull MLE for strictly positive data.

    Newton iteration on the profile equation

        sum(x^k ln x) / sum(x^k) - 1/k - mean(ln x) = 0

    started from the log-variance moment estimate
    k0 = pi / sqrt(6 Var(ln x)); the scale is closed-form given the shape.
    Data is pre-scaled by its maximum so powers stay bounded; the shape is
    scale-invariant and the scale is mapped back afterwards.
    """
    norm = x.max()
    z = x / norm
    log_z = np.log(z)
    mean_log = log_z.mean()
    var_log = log_z.var()

    k = np.pi / np.sqrt(6.0 * var_log)
    for _ in range(NEWTON_MAX_ITER):
        zk = z**k
        zk_log = zk * log_z
        sum_zk = zk.sum()
        a = zk_log.sum() / sum_zk
        f = a - 1.0 / k - mean_log
        a_prime = (zk_log * log_z).sum() / sum_zk - a * a
        f_prime = a_prime + 1.0 / (k * k)
        k_new = k - f / f_prime
        if not np.isfinite(k_new):
            raise SolverError("shape iteration produced a non-finite value")
        if k_new <= 0.0:
            # Newton overshot below zero; halve instead of leaving the domain.
            k_new = 0.5 * k
        if abs(k_new - k) < NEWTON_TOL:
            k = k_new
            scale = float(np.mean(z**k) ** (1.0 / k)) * norm
            return float(k), scale
        k = k_new
    raise SolverError(f"shape estimate did not converge in {NEWTON_MAX_ITER} iterations")
