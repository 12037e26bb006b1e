"""16-QAM mapping and soft demapping under three channel-knowledge models.

Gray labeling (bits b0 b1 b2 b3, b0 first on the wire)::

    b0 b1 -> in-phase level      b2 b3 -> quadrature level
    0  0  -> -3                  0  0  -> -3
    0  1  -> -1                  0  1  -> -1
    1  1  -> +1                  1  1  -> +1
    1  0  -> +3                  1  0  -> +3

Points are ``(I + jQ) * sqrt(Es / 10)``, so ``0000 -> (-3 - 3j) / sqrt(10)``
at ``Es = 1``.  The point index is the 4-bit label read MSB first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError

_PAM4_GRAY = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}


class MetricMode(enum.Enum):
    PERFECT = "perfect"
    MISMATCHED = "mismatched"
    MODIFIED = "modified"

    @classmethod
    def parse(cls, value: "str | MetricMode") -> "MetricMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown decoder {value!r}; expected perfect, mismatched or modified") from None


@dataclass(frozen=True)
class QamConstellation:
    points: np.ndarray
    labels: np.ndarray  # (order, bits_per_symbol) of 0/1, row i labels points[i]
    symbol_energy: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        lab = np.asarray(self.labels, dtype=np.int8)
        if lab.shape != (pts.size, int(np.log2(pts.size))):
            raise ConfigError("labels must be (order, log2(order))")
        pts.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def qam16(cls, symbol_energy: float = 1.0) -> "QamConstellation":
        if symbol_energy <= 0:
            raise ConfigError("symbol_energy must be positive")
        labels = np.array([[(i >> (3 - j)) & 1 for j in range(4)] for i in range(16)], dtype=np.int8)
        scale = np.sqrt(symbol_energy / 10.0)
        pts = np.array(
            [complex(_PAM4_GRAY[tuple(l[:2])], _PAM4_GRAY[tuple(l[2:])]) for l in labels]
        ) * scale
        return cls(pts, labels, symbol_energy)

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


QAM16 = QamConstellation.qam16()


@dataclass(frozen=True)
class PosteriorParams:
    """Statistics of the true channel given its pilot-based estimate.

    ``H | H_hat ~ CN(rho * H_hat, rho * err_var)`` with
    ``rho = prior_var / (prior_var + err_var)``.
    """

    rho: float
    err_var: float
    prior_var: float
    noise_var: float

    def __post_init__(self):
        if self.prior_var <= 0 or self.noise_var <= 0:
            raise ConfigError("prior_var and noise_var must be positive")
        if self.err_var < 0:
            raise ConfigError("err_var must be non-negative")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        expect = self.prior_var / (self.prior_var + self.err_var) if np.isfinite(self.err_var) else 0.0
        if abs(self.rho - expect) > 1e-12:
            raise ConfigError(f"rho={self.rho} inconsistent with prior_var/(prior_var+err_var)={expect}")

    @classmethod
    def from_variances(cls, prior_var: float, err_var: float, noise_var: float) -> "PosteriorParams":
        rho = prior_var / (prior_var + err_var) if np.isfinite(err_var) else 0.0
        return cls(rho, err_var, prior_var, noise_var)

    @classmethod
    def perfect(cls, prior_var: float, noise_var: float) -> "PosteriorParams":
        return cls(1.0, 0.0, prior_var, noise_var)

    @property
    def posterior_var(self) -> float:
        # (1 - rho) * prior_var == rho * err_var; this form stays exact at err_var = 0
        return (1.0 - self.rho) * self.prior_var


def qam_map(bits, c: QamConstellation = QAM16) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).ravel()
    B = c.bits_per_symbol
    if b.size % B:
        raise ValueError(f"bit count {b.size} is not a multiple of {B}")
    idx = b.reshape(-1, B) @ (1 << np.arange(B - 1, -1, -1))
    return c.points[idx]


def symbol_metric(y, s, h, mode: MetricMode, pp: PosteriorParams):
    """Decision metric D(s, y | h) to be minimised over ``s``.

    ``h`` is the true channel for PERFECT and the estimate otherwise.
    PERFECT/MISMATCHED return the Euclidean distance ``|y - h s|^2``; MODIFIED
    returns ``ln(var_s) + |y - rho h s|^2 / var_s`` where
    ``var_s = noise_var + posterior_var * |s|^2``.
    """
    y = np.asarray(y)
    s = np.asarray(s)
    h = np.asarray(h)
    mode = MetricMode.parse(mode)
    if mode is MetricMode.MODIFIED:
        var = pp.noise_var + pp.posterior_var * np.abs(s) ** 2
        if np.any(var <= 0):
            raise ArithmeticError("modified-metric variance is not positive")
        return np.log(var) + np.abs(y - pp.rho * h * s) ** 2 / var
    return np.abs(y - h * s) ** 2


def log_likelihoods(y, h, c: QamConstellation, mode: MetricMode, pp: PosteriorParams) -> np.ndarray:
    """``ln p(y | s, .)`` up to a constant common to all ``s``; shape ``(..., order)``.

    PERFECT/MISMATCHED use the Gaussian likelihood ``-|y - h s|^2 / noise_var``
    (the Euclidean metric scaled by the noise variance); MODIFIED uses
    ``-D_M`` including its log-variance term, which differs across points.
    """
    y = np.asarray(y, dtype=np.complex128)[..., None]
    h = np.asarray(h, dtype=np.complex128)[..., None]
    mode = MetricMode.parse(mode)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(h))):
        raise ValueError("y and h must be finite")
    if mode is MetricMode.MODIFIED:
        return -symbol_metric(y, c.points, h, mode, pp)
    return -np.abs(y - h * c.points) ** 2 / pp.noise_var


def bit_metrics(
    y,
    h,
    c: QamConstellation,
    mode: MetricMode,
    pp: PosteriorParams,
    apriori=None,
    *,
    max_log: bool = False,
) -> np.ndarray:
    """Per-bit LLRs (positive favours 0), shape ``y.shape + (bits_per_symbol,)``.

    ``apriori`` holds prior LLRs with the same trailing shape.  Each output is
    extrinsic with respect to its own prior: bit ``l``'s prior multiplies
    both the numerator and denominator sums and therefore cancels, while the
    priors of the other bits weight the symbols.
    """
    ll = log_likelihoods(y, h, c, mode, pp)
    B = c.bits_per_symbol
    signs = 1 - 2 * c.labels.astype(np.float64)  # (order, B): +1 for bit 0
    if apriori is not None:
        La = np.asarray(apriori, dtype=np.float64)
        if La.shape[-1] != B:
            raise ValueError(f"apriori trailing dimension must be {B}")
        prior = 0.5 * La[..., None, :] * signs  # (..., order, B)
        total_prior = prior.sum(axis=-1)
    out = np.empty(ll.shape[:-1] + (B,))
    for l in range(B):
        zero = c.labels[:, l] == 0
        terms = ll if apriori is None else ll + total_prior - prior[..., l]
        if max_log:
            out[..., l] = terms[..., zero].max(axis=-1) - terms[..., ~zero].max(axis=-1)
        else:
            out[..., l] = logsumexp(terms[..., zero], axis=-1) - logsumexp(terms[..., ~zero], axis=-1)
    return out
