"""Convolutional coding, bit interleaving and soft-input trellis decoding.

LLR convention used throughout the package: ``llr = ln P(bit=0) / P(bit=1)``,
so a positive value favours bit 0.

Encoder register convention: the octal generator's most significant tap
multiplies the current input bit.  For the (5, 7) code this gives
``c0 = b[t] ^ b[t-2]`` and ``c1 = b[t] ^ b[t-1] ^ b[t-2]``.  The trellis state
holds the K-1 most recent inputs with the newest one in the high bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from . import rng as _rng
from .errors import ConfigError

LLR_CLAMP = 50.0


@dataclass(frozen=True)
class ConvCode:
    """Feed-forward rate-1/n convolutional code, zero-tail terminated."""

    constraint_length: int = 3
    generators: tuple[int, ...] = (0o5, 0o7)
    # trellis tables, built once
    next_state: np.ndarray = field(init=False, repr=False, compare=False)
    outputs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        K = self.constraint_length
        if K < 2:
            raise ConfigError("constraint_length must be >= 2")
        if len(self.generators) < 1:
            raise ConfigError("at least one generator is required")
        for g in self.generators:
            if g <= 0 or g >= (1 << K):
                raise ConfigError(f"generator {g:o} must be nonzero with degree < {K}")
        n_states = 1 << (K - 1)
        nxt = np.empty((n_states, 2), dtype=np.int64)
        out = np.empty((n_states, 2, len(self.generators)), dtype=np.int8)
        for s in range(n_states):
            for b in (0, 1):
                reg = (b << (K - 1)) | s
                nxt[s, b] = reg >> 1
                for j, g in enumerate(self.generators):
                    out[s, b, j] = bin(reg & g).count("1") & 1
        nxt.setflags(write=False)
        out.setflags(write=False)
        object.__setattr__(self, "next_state", nxt)
        object.__setattr__(self, "outputs", out)

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_out)

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_length - 1)

    @property
    def tail_length(self) -> int:
        return self.constraint_length - 1

    def coded_length(self, n_info: int) -> int:
        return self.n_out * (n_info + self.tail_length)


def conv_encode(info_bits, code: ConvCode = ConvCode()) -> np.ndarray:
    """Encode ``info_bits`` starting from state 0 and append the zero tail.

    Output bits are interleaved per stage: ``c0[0], c1[0], c0[1], c1[1], ...``.
    """
    bits = np.asarray(info_bits, dtype=np.int64).ravel()
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("info_bits must contain only 0 and 1")
    seq = np.concatenate([bits, np.zeros(code.tail_length, dtype=np.int64)])
    return _encode_kernel(seq, code.next_state, code.outputs.astype(np.int64))


@numba.njit(cache=True)
def _encode_kernel(seq, next_state, outputs):
    n_out = outputs.shape[2]
    out = np.empty(seq.size * n_out, dtype=np.int8)
    s = 0
    for t in range(seq.size):
        b = seq[t]
        for j in range(n_out):
            out[t * n_out + j] = outputs[s, b, j]
        s = next_state[s, b]
    return out


@dataclass(frozen=True)
class Interleaver:
    """Pseudo-random bit interleaver: ``output[perm[i]] = input[i]``."""

    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        p = np.asarray(self.permutation, dtype=np.int64)
        if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
            raise ConfigError("permutation must be a bijection on [0, length)")
        p.setflags(write=False)
        object.__setattr__(self, "permutation", p)

    @property
    def length(self) -> int:
        return self.permutation.size

    @classmethod
    def from_seed(cls, length: int, seed: int, *key: int) -> "Interleaver":
        """Fisher-Yates permutation drawn from the stream ``(seed, INTERLEAVER, *key)``."""
        if length < 0:
            raise ConfigError("length must be non-negative")
        g = _rng.stream(seed, _rng.INTERLEAVER, *key)
        return cls(g.permutation(length), seed)

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        return cls(np.arange(length))


def interleave(bits, pi: Interleaver) -> np.ndarray:
    x = np.asarray(bits)
    if x.shape != (pi.length,):
        raise ConfigError(f"expected {pi.length} values, got shape {x.shape}")
    out = np.empty_like(x)
    out[pi.permutation] = x
    return out


def deinterleave(values, pi: Interleaver) -> np.ndarray:
    x = np.asarray(values)
    if x.shape != (pi.length,):
        raise ConfigError(f"expected {pi.length} values, got shape {x.shape}")
    return x[pi.permutation]


# LLRs and bits use the same permutation; the alias keeps call sites readable.
deinterleave_llrs = deinterleave


def clamp_llrs(llrs, limit: float = LLR_CLAMP) -> np.ndarray:
    return np.clip(np.asarray(llrs, dtype=np.float64), -limit, limit)


def trellis_decode(llrs, code: ConvCode = ConvCode(), apriori=None, *, extrinsic: bool = False):
    """Decode a zero-tail terminated frame from coded-bit LLRs.

    Parameters
    ----------
    llrs : array_like
        One LLR per coded bit, in encoder output order.  Values are clamped
        to +-50 before decoding; non-finite values are rejected.
    code : ConvCode
    apriori : array_like, optional
        Extra per-coded-bit LLRs added to ``llrs`` (e.g. feedback in an
        iterative receiver).
    extrinsic : bool
        Also return max-log APP extrinsic LLRs on the coded bits, i.e.
        a-posteriori minus ``llrs`` minus ``apriori``.

    Returns
    -------
    info_bits : ndarray of int8
        Viterbi decisions with the tail removed.  Ties are resolved towards
        the survivor whose discarded bit is 0.
    ext : ndarray or None
    """
    L = np.asarray(llrs, dtype=np.float64).ravel()
    if not np.all(np.isfinite(L)):
        raise ValueError("llrs contain non-finite values")
    if L.size % code.n_out or L.size // code.n_out < code.tail_length:
        raise ValueError(f"llr length {L.size} does not fit a terminated frame")
    L = clamp_llrs(L)
    if apriori is not None:
        A = np.asarray(apriori, dtype=np.float64).ravel()
        if A.shape != L.shape:
            raise ValueError("apriori length must match llrs")
        if not np.all(np.isfinite(A)):
            raise ValueError("apriori contains non-finite values")
        A = clamp_llrs(A)
        total = L + A
    else:
        total = L
    n_steps = L.size // code.n_out
    obs = total.reshape(n_steps, code.n_out)
    outputs = code.outputs.astype(np.int64)
    bits = _viterbi_kernel(obs, code.next_state, outputs, code.constraint_length)
    info = bits[: n_steps - code.tail_length]
    if not extrinsic:
        return info, None
    app = _maxlog_app_kernel(obs, code.next_state, outputs)
    return info, app.ravel() - total


@numba.njit(cache=True)
def _viterbi_kernel(obs, next_state, outputs, K):
    n_steps, n_out = obs.shape
    n_states = next_state.shape[0]
    mask = n_states - 1
    shift = K - 2
    neg = -np.inf
    pm = np.full(n_states, neg)
    pm[0] = 0.0
    new = np.empty(n_states)
    decisions = np.zeros((n_steps, n_states), dtype=np.int8)
    bm = np.empty((n_states, 2))
    for t in range(n_steps):
        for s in range(n_states):
            for b in range(2):
                m = 0.0
                for j in range(n_out):
                    if outputs[s, b, j] == 0:
                        m += obs[t, j]
                    else:
                        m -= obs[t, j]
                bm[s, b] = m
        for ns in range(n_states):
            b = ns >> shift
            p0 = ((ns << 1) | 0) & mask
            p1 = ((ns << 1) | 1) & mask
            m0 = pm[p0] + bm[p0, b]
            m1 = pm[p1] + bm[p1, b]
            if m1 > m0:
                new[ns] = m1
                decisions[t, ns] = 1
            else:
                new[ns] = m0
                decisions[t, ns] = 0
        for s in range(n_states):
            pm[s] = new[s]
    bits = np.empty(n_steps, dtype=np.int8)
    ns = 0
    for t in range(n_steps - 1, -1, -1):
        bits[t] = ns >> shift
        ns = ((ns << 1) | decisions[t, ns]) & mask
    return bits


@numba.njit(cache=True)
def _maxlog_app_kernel(obs, next_state, outputs):
    n_steps, n_out = obs.shape
    n_states = next_state.shape[0]
    neg = -np.inf
    gamma = np.empty((n_steps, n_states, 2))
    for t in range(n_steps):
        for s in range(n_states):
            for b in range(2):
                m = 0.0
                for j in range(n_out):
                    if outputs[s, b, j] == 0:
                        m += 0.5 * obs[t, j]
                    else:
                        m -= 0.5 * obs[t, j]
                gamma[t, s, b] = m
    alpha = np.full((n_steps + 1, n_states), neg)
    alpha[0, 0] = 0.0
    for t in range(n_steps):
        for s in range(n_states):
            a = alpha[t, s]
            if a == neg:
                continue
            for b in range(2):
                ns = next_state[s, b]
                v = a + gamma[t, s, b]
                if v > alpha[t + 1, ns]:
                    alpha[t + 1, ns] = v
    beta = np.full((n_steps + 1, n_states), neg)
    beta[n_steps, 0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        for s in range(n_states):
            best = neg
            for b in range(2):
                v = gamma[t, s, b] + beta[t + 1, next_state[s, b]]
                if v > best:
                    best = v
            beta[t, s] = best
    app = np.zeros((n_steps, n_out))
    for t in range(n_steps):
        for j in range(n_out):
            best0 = neg
            best1 = neg
            for s in range(n_states):
                a = alpha[t, s]
                if a == neg:
                    continue
                for b in range(2):
                    v = a + gamma[t, s, b] + beta[t + 1, next_state[s, b]]
                    if outputs[s, b, j] == 0:
                        if v > best0:
                            best0 = v
                    elif v > best1:
                        best1 = v
            if best0 == neg and best1 == neg:
                app[t, j] = 0.0
            elif best1 == neg:
                app[t, j] = 2.0 * LLR_CLAMP
            elif best0 == neg:
                app[t, j] = -2.0 * LLR_CLAMP
            else:
                app[t, j] = best0 - best1
    return app
