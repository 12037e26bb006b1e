"""Block-fading frequency-domain channel, pilot-based ML estimation and the
posterior law of the true channel given its estimate.

Fade-vector text format (one realization per line)::

    # comment lines and blank lines are ignored
    re_1 im_1 re_2 im_2 ... re_M im_M
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChannelFileError, ConfigError
from .modem import PosteriorParams
from .rng import complex_normal


@dataclass(frozen=True)
class FadeVector:
    h: np.ndarray
    var: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128).ravel()
        if h.size == 0:
            raise ConfigError("a fade vector needs at least one subcarrier")
        if not np.all(np.isfinite(h)):
            raise ConfigError("fade vector contains non-finite entries")
        if self.var <= 0:
            raise ConfigError("channel variance must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def M(self) -> int:
        return self.h.size


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: np.ndarray
    pp: PosteriorParams
    n_pilots: int
    pilot_energy: float

    @property
    def M(self) -> int:
        return self.h_hat.size


@dataclass(frozen=True)
class LinkBudget:
    """Noise and energy levels.  ``pilot_energy`` defaults to ``symbol_energy``."""

    noise_var: float
    symbol_energy: float = 1.0
    pilot_energy: float | None = None

    def __post_init__(self):
        if self.pilot_energy is None:
            object.__setattr__(self, "pilot_energy", self.symbol_energy)
        if min(self.noise_var, self.symbol_energy, self.pilot_energy) <= 0:
            raise ConfigError("noise_var, symbol_energy and pilot_energy must be positive")

    @classmethod
    def from_ebn0(
        cls,
        ebn0_db: float,
        *,
        code_rate: float = 0.5,
        bits_per_symbol: int = 4,
        symbol_energy: float = 1.0,
        pilot_energy: float | None = None,
    ) -> "LinkBudget":
        """Eb/N0 = Es / (R * B * noise_var); pilot and tail overheads are not counted."""
        ebn0 = 10.0 ** (ebn0_db / 10.0)
        nv = symbol_energy / (code_rate * bits_per_symbol * ebn0)
        return cls(nv, symbol_energy, pilot_energy)

    def ebn0_db(self, code_rate: float = 0.5, bits_per_symbol: int = 4) -> float:
        return 10.0 * math.log10(self.symbol_energy / (code_rate * bits_per_symbol * self.noise_var))


def draw_rayleigh(M: int, var: float, rng: np.random.Generator) -> FadeVector:
    if M < 1:
        raise ConfigError("M must be >= 1")
    if var <= 0:
        raise ConfigError("channel variance must be positive")
    return FadeVector(complex_normal(rng, (M,), var), var)


def apply_channel(s, fv: FadeVector, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """``y = H s + z`` with ``z ~ CN(0, noise_var)``.

    ``s`` has shape ``(M,)`` or ``(tau, M)``; the fade is constant over rows.
    """
    s = np.asarray(s, dtype=np.complex128)
    if s.shape[-1] != fv.M:
        raise ConfigError(f"symbol block has {s.shape[-1]} subcarriers, channel has {fv.M}")
    return fv.h * s + complex_normal(rng, s.shape, noise_var)


def ml_estimate(y_pilots, pilots) -> np.ndarray:
    """ML estimate ``S_T^H Y_T / (N P_T)`` per subcarrier.

    ``y_pilots`` is ``(N, M)``; ``pilots`` is ``(N,)`` or ``(N, M)`` with
    constant modulus along the first axis.
    """
    y = np.asarray(y_pilots, dtype=np.complex128)
    p = np.asarray(pilots, dtype=np.complex128)
    if p.ndim == 1:
        p = p[:, None]
    energy = np.abs(p[0]) ** 2
    return (np.conj(p) * y).sum(axis=0) / (y.shape[0] * energy)


def estimate_channel(
    fv: FadeVector,
    n_pilots: int,
    pilot_energy: float,
    noise_var: float,
    rng: np.random.Generator,
) -> ChannelEstimate:
    """Simulate ``n_pilots`` full pilot OFDM symbols and form the ML estimate.

    Every subcarrier carries the same pilot value ``sqrt(pilot_energy)``.
    """
    if n_pilots < 1:
        raise ConfigError("n_pilots must be >= 1")
    if pilot_energy <= 0:
        raise ConfigError("pilot_energy must be positive")
    pilots = np.full(n_pilots, np.sqrt(pilot_energy), dtype=np.complex128)
    y = fv.h * pilots[:, None] + complex_normal(rng, (n_pilots, fv.M), noise_var)
    err_var = noise_var / (n_pilots * pilot_energy)
    pp = PosteriorParams.from_variances(fv.var, err_var, noise_var)
    return ChannelEstimate(ml_estimate(y, pilots), pp, n_pilots, pilot_energy)


def posterior_of_true_channel(ce: ChannelEstimate, k: int) -> tuple[complex, float]:
    """Mean and variance of ``H_k`` given ``H_hat_k``."""
    return complex(ce.pp.rho * ce.h_hat[k]), ce.pp.posterior_var


def draw_estimates(M: int, pp: PosteriorParams, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Draw channel estimates from their marginal ``CN(0, prior_var + err_var)``."""
    shape = (M,) if n is None else (n, M)
    return complex_normal(rng, shape, pp.prior_var + pp.err_var)


def draw_posterior(h_hat, pp: PosteriorParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws of the true channel vector given ``h_hat``; shape ``(n, M)``."""
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    return pp.rho * h_hat + complex_normal(rng, (n, h_hat.size), pp.posterior_var)


def import_fade_vectors(path, M: int | None = None, var: float = 1.0) -> list[FadeVector]:
    """Read fade vectors from the text format; ``M`` checks each line's length."""
    vectors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals = np.array([float(tok.replace("\u2212", "-")) for tok in line.split()])
            except ValueError as exc:
                raise ChannelFileError(str(exc), lineno) from None
            if vals.size % 2:
                raise ChannelFileError(f"odd number of values ({vals.size})", lineno)
            if M is not None and vals.size != 2 * M:
                raise ChannelFileError(f"expected {M} subcarriers, found {vals.size // 2}", lineno)
            if not np.all(np.isfinite(vals)):
                raise ChannelFileError("non-finite value", lineno)
            vectors.append(FadeVector(vals[0::2] + 1j * vals[1::2], var))
    return vectors


def export_fade_vectors(path, vectors, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for fv in vectors:
            h = fv.h if isinstance(fv, FadeVector) else np.asarray(fv, dtype=np.complex128)
            inter = np.empty(2 * h.size)
            inter[0::2] = h.real
            inter[1::2] = h.imag
            fh.write(" ".join(repr(float(v)) for v in inter) + "\n")
