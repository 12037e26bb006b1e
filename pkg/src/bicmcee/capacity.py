"""Achievable outage rates for the three decoders under Gaussian inputs.

Per subcarrier, an auxiliary channel ``y = mu s + w`` with
``w ~ CN(0, noise_var + P (|H|^2 - |mu|^2))`` is matched in output power to
the true channel; the decoding metric restricts ``mu`` to a constraint set
and the rate is the smallest one over that set:

* perfect (theoretical decoder): ``log2(1 + P |H|^2 / noise_var)``;
* modified metric: ``mu`` outside the disk centred on ``a * H_hat`` through
  ``H``; the minimiser is ``eta * H_hat`` on the disk boundary;
* mismatched Euclidean metric: ``mu`` in the half-plane
  ``Re(conj(mu) H_hat) >= Re(conj(H) H_hat)``, whose minimum-norm point is
  ``max(0, Re(conj(H) H_hat)) H_hat / |H_hat|^2``.

Outage rates are empirical gamma-quantiles over draws of ``H`` given
``H_hat`` and are averaged over independent estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import rng as _rng
from .channel import ChannelEstimate, FadeVector, draw_estimates, draw_posterior
from .errors import ConfigError, DegenerateDrawError, PerfectCSILimit
from .modem import MetricMode, PosteriorParams

EULER_GAMMA = 0.57721566490153286061
RHO_EPS = 1e-9
DEN_EPS = 1e-12

# E1 switches from the power series to the continued fraction above this x.
_E1_SWITCH = 1.0
# 1 - x*e^x*E1(x) and its companion use an asymptotic series above this x.
_ASYMPTOTIC_SWITCH = 60.0


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n n!)
    total = 0.0
    term = 1.0
    n = 0
    while True:
        n += 1
        term *= -x / n
        contrib = term / n
        total += contrib
        if abs(contrib) < 1e-18 * max(abs(total), 1e-300):
            break
    return -EULER_GAMMA - math.log(x) - total


def _scaled_e1_cf(x: float) -> float:
    # e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...))), modified Lentz
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError(f"E1 continued fraction did not converge at x={x}")


def exp_integral_e1(x: float) -> float:
    """Exponential integral ``E1(x)`` for ``x > 0``.

    Power series for ``x <= 1``, continued fraction (modified Lentz) above.
    """
    x = float(x)
    if not x > 0:
        raise ValueError("E1 is defined here only for x > 0")
    if x <= _E1_SWITCH:
        return _e1_series(x)
    return math.exp(-x) * _scaled_e1_cf(x)


def scaled_e1(x: float) -> float:
    """``exp(x) * E1(x)`` without overflow for large ``x``."""
    x = float(x)
    if not x > 0:
        raise ValueError("E1 is defined here only for x > 0")
    if x <= _E1_SWITCH:
        return math.exp(x) * _e1_series(x)
    return _scaled_e1_cf(x)


def _lambda_gaps(x: float) -> tuple[float, float]:
    """Return ``(1 - x lam, (x + 1) lam - 1)`` with ``lam = e^x E1(x)``.

    Both are positive; for large ``x`` they are O(1/x) and O(1/x^2) and are
    summed from the asymptotic series to avoid cancellation.
    """
    if x <= _ASYMPTOTIC_SWITCH:
        lam = scaled_e1(x)
        return 1.0 - x * lam, (x + 1.0) * lam - 1.0
    # 1 - x lam = sum_{n>=1} (-1)^(n+1) n!/x^n ; (x+1) lam - 1 = sum_{m>=1} (-1)^(m+1) m m!/x^(m+1)
    u = 0.0
    v = 0.0
    fact_over_pow = 1.0  # n!/x^n
    for n in range(1, 41):
        fact_over_pow *= n / x
        sign = 1.0 if n % 2 else -1.0
        u += sign * fact_over_pow
        v += sign * n * fact_over_pow / x
    return u, v


def _x_of(P: float, rho: float, noise_var: float, rho_eps: float) -> float:
    if P <= 0 or noise_var <= 0:
        raise ConfigError("P and noise_var must be positive")
    if not 0.0 <= rho <= 1.0:
        raise ConfigError("rho must lie in [0, 1]")
    if rho >= 1.0 - rho_eps:
        raise PerfectCSILimit(f"rho={rho} is within {rho_eps} of 1")
    return noise_var / (P * (1.0 - rho))


def lambda_k(P: float, rho: float, noise_var: float, *, rho_eps: float = RHO_EPS) -> float:
    """``exp(x) E1(x)`` with ``x = noise_var / (P (1 - rho))``.

    Always satisfies ``x lam < 1 < (x + 1) lam``; ``lam < 1`` only for ``x > 0.4348``.
    """
    return scaled_e1(_x_of(P, rho, noise_var, rho_eps))


def a_k(P: float, rho: float, noise_var: float, *, rho_eps: float = RHO_EPS, den_eps: float = DEN_EPS) -> float:
    """Centre coefficient of the modified-metric constraint disk.

    ``a = rho (lam nv - P(1-rho)) / (lam nv - P(1-rho)(1-lam))``, evaluated as
    ``-rho (1 - x lam) / ((x+1) lam - 1)`` which is free of cancellation.
    The value is always negative for valid inputs.
    """
    x = _x_of(P, rho, noise_var, rho_eps)
    u, v = _lambda_gaps(x)
    den = P * (1.0 - rho) * v
    if not abs(den) > den_eps * P:
        raise DegenerateDrawError(f"a_k denominator {den!r} below guard (P={P}, rho={rho}, noise_var={noise_var})")
    return -rho * u / v


def eta_modified(H, H_hat, a: float):
    """Scale ``eta`` such that ``mu_opt = eta * H_hat``.

    ``eta = a -+ |H - a H_hat| / |H_hat|`` (minus for ``a >= 0``).
    """
    H = np.asarray(H, dtype=np.complex128)
    H_hat = np.asarray(H_hat, dtype=np.complex128)
    mag = np.abs(H_hat)
    if np.any(mag == 0):
        raise DegenerateDrawError("channel estimate with zero magnitude")
    r = np.abs(H - a * H_hat) / mag
    return a - r if a >= 0 else a + r


@dataclass(frozen=True)
class RateParams:
    P: float
    noise_var: float
    pp: PosteriorParams
    M: int

    def __post_init__(self):
        if self.P <= 0 or self.noise_var <= 0 or self.M < 1:
            raise ConfigError("P, noise_var and M must be positive")

    @classmethod
    def from_snr(
        cls,
        snr_db: float,
        M: int,
        n_pilots: int = 1,
        *,
        noise_var: float = 1.0,
        prior_var: float = 1.0,
        pilot_energy: float | None = None,
    ) -> "RateParams":
        """SNR = P / noise_var; pilots carry ``pilot_energy`` (default ``P``)."""
        if n_pilots < 1:
            raise ConfigError("n_pilots must be >= 1")
        P = noise_var * 10.0 ** (snr_db / 10.0)
        pe = P if pilot_energy is None else pilot_energy
        pp = PosteriorParams.from_variances(prior_var, noise_var / (n_pilots * pe), noise_var)
        return cls(P, noise_var, pp, M)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.P / self.noise_var)


def _arr(x) -> np.ndarray:
    if isinstance(x, FadeVector):
        return x.h
    if isinstance(x, ChannelEstimate):
        return x.h_hat
    return np.asarray(x, dtype=np.complex128)


def _log2_terms(num, den):
    return np.log2(1.0 + np.maximum(num, 0.0) / den)


def rate_perfect(h, rp: RateParams) -> np.ndarray:
    """``sum_k log2(1 + P |H_k|^2 / noise_var)`` over the last axis."""
    H = _arr(h)
    return np.log2(1.0 + rp.P * np.abs(H) ** 2 / rp.noise_var).sum(axis=-1)


def modified_terms(H, H_hat, rp: RateParams) -> tuple[np.ndarray, int]:
    """Per-subcarrier modified-metric rates and the count of non-positive denominators."""
    H = np.asarray(H, dtype=np.complex128)
    H_hat = np.asarray(H_hat, dtype=np.complex128)
    a = a_k(rp.P, rp.pp.rho, rp.noise_var)
    eta = eta_modified(H, H_hat, a)
    g = eta**2 * np.abs(H_hat) ** 2
    den = rp.noise_var + rp.P * (np.abs(H) ** 2 - g)
    bad = den <= 0
    n_bad = int(bad.sum())
    den = np.where(bad, np.inf, den)
    return _log2_terms(rp.P * g, den), n_bad


def rate_modified(h, h_hat, rp: RateParams) -> np.ndarray:
    """Achievable rate of the posterior-averaged metric.

    Falls back to :func:`rate_perfect` when ``rho >= 1 - 1e-9``.
    """
    H, H_hat = _arr(h), _arr(h_hat)
    if rp.pp.rho >= 1.0 - RHO_EPS:
        return rate_perfect(H, rp)
    terms, n_bad = modified_terms(H, H_hat, rp)
    if n_bad:
        raise ArithmeticError(f"{n_bad} non-positive auxiliary-channel variances")
    return terms.sum(axis=-1)


def mismatched_mu(H, H_hat) -> np.ndarray:
    """Minimum-norm point of ``{mu : Re(conj(mu) H_hat) >= Re(conj(H) H_hat)}``."""
    H = np.asarray(H, dtype=np.complex128)
    H_hat = np.asarray(H_hat, dtype=np.complex128)
    proj = np.maximum(0.0, (np.conj(H) * H_hat).real)
    mag2 = np.abs(H_hat) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(mag2 > 0, proj * H_hat / np.where(mag2 > 0, mag2, 1.0), 0.0)
    return mu


def rate_mismatched(h, h_hat, rp: RateParams) -> np.ndarray:
    """Achievable rate of the Euclidean metric evaluated with the estimate."""
    H, H_hat = _arr(h), _arr(h_hat)
    g = np.abs(mismatched_mu(H, H_hat)) ** 2
    den = rp.noise_var + rp.P * (np.abs(H) ** 2 - g)
    return _log2_terms(rp.P * g, den).sum(axis=-1)


def rate_function(decoder: MetricMode, rp: RateParams) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """``f(H, H_hat) -> rates`` for one decoder, vectorised over leading axes of ``H``."""
    decoder = MetricMode.parse(decoder)
    if decoder is MetricMode.PERFECT:
        return lambda H, H_hat: rate_perfect(H, rp)
    if decoder is MetricMode.MISMATCHED:
        return lambda H, H_hat: rate_mismatched(H, H_hat, rp)
    return lambda H, H_hat: rate_modified(H, H_hat, rp)


def quantile_index(gamma: float, n: int) -> int:
    """1-based order-statistic index ``ceil(gamma * n)`` (at least 1).

    A 1e-9 slack keeps products such as ``0.07 * 100`` from rounding up.
    """
    return max(1, math.ceil(gamma * n - 1e-9))


def empirical_outage_rate(rates, gamma: float) -> float:
    r = np.sort(np.asarray(rates, dtype=np.float64).ravel())
    return float(r[quantile_index(gamma, r.size) - 1])


def outage_rate(
    rate_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ce: ChannelEstimate,
    gamma: float,
    n_inner: int,
    rng: np.random.Generator,
) -> float:
    """Empirical gamma-quantile of ``rate_fn(H, H_hat)`` over ``H ~ p(H | H_hat)``."""
    if not 0.0 < gamma < 1.0:
        raise ConfigError("gamma must lie in (0, 1)")
    if n_inner < 100:
        raise ConfigError("n_inner must be >= 100")
    H = draw_posterior(ce.h_hat, ce.pp, n_inner, rng)
    return empirical_outage_rate(rate_fn(H, ce.h_hat), gamma)


@dataclass
class OutageResult:
    decoder: MetricMode
    gamma: float
    rate_bits: float  # mean over estimates of the per-estimate outage rate
    std_err: float
    n_outer: int
    n_inner: int
    rejects: int = 0
    denominator_violations: int = 0
    samples: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def _draw_valid_estimate(M, pp, run_seed, j):
    rejects = 0
    while True:
        g = _rng.stream(run_seed, _rng.OUTAGE_OUTER, j, rejects)
        h_hat = draw_estimates(M, pp, g)
        if np.all(np.abs(h_hat) > 0):
            return h_hat, rejects
        rejects += 1


def expected_outage_rates(
    decoders: Iterable[MetricMode | str],
    rp: RateParams,
    gamma: float,
    n_outer: int = 200,
    n_inner: int = 2000,
    run_seed: int = 0,
) -> dict[MetricMode, OutageResult]:
    """Average outage rate over ``n_outer`` estimates, all decoders on shared draws.

    Estimate ``j`` comes from stream ``(run_seed, OUTAGE_OUTER, j, attempt)``
    and its inner channel draws from ``(run_seed, OUTAGE_INNER, j)``, so the
    same underlying normals are reused across decoders and SNR points.
    """
    decoders = [MetricMode.parse(d) for d in decoders]
    if n_outer < 2:
        raise ConfigError("n_outer must be >= 2")
    if n_inner < 100:
        raise ConfigError("n_inner must be >= 100")
    if not 0.0 < gamma < 1.0:
        raise ConfigError("gamma must lie in (0, 1)")
    pp = rp.pp
    samples = {d: np.empty(n_outer) for d in decoders}
    rejects = 0
    violations = 0
    use_modified = MetricMode.MODIFIED in decoders and pp.rho < 1.0 - RHO_EPS
    for j in range(n_outer):
        h_hat, rej = _draw_valid_estimate(rp.M, pp, run_seed, j)
        rejects += rej
        ce = ChannelEstimate(h_hat, pp, 0, rp.P)
        H = draw_posterior(h_hat, pp, n_inner, _rng.stream(run_seed, _rng.OUTAGE_INNER, j))
        for d in decoders:
            if d is MetricMode.MODIFIED and use_modified:
                terms, n_bad = modified_terms(H, h_hat, rp)
                violations += n_bad
                rates = terms.sum(axis=-1)
            else:
                rates = rate_function(d, rp)(H, ce.h_hat)
            samples[d][j] = empirical_outage_rate(rates, gamma)
    out = {}
    for d in decoders:
        s = samples[d]
        out[d] = OutageResult(
            decoder=d,
            gamma=gamma,
            rate_bits=float(s.mean()),
            std_err=float(s.std(ddof=1) / math.sqrt(n_outer)),
            n_outer=n_outer,
            n_inner=n_inner,
            rejects=rejects,
            denominator_violations=violations if d is MetricMode.MODIFIED else 0,
            samples=s,
        )
    return out


def expected_outage_rate(
    decoder: MetricMode | str,
    rp: RateParams,
    gamma: float,
    n_outer: int = 200,
    n_inner: int = 2000,
    run_seed: int = 0,
) -> OutageResult:
    d = MetricMode.parse(decoder)
    return expected_outage_rates([d], rp, gamma, n_outer, n_inner, run_seed)[d]
