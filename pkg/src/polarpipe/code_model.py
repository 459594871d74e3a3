"""Polar code parameters, frozen-set construction, encoding and the BPSK-AWGN channel."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

MAX_BLOCK = 1 << 20

# Magnitude used for a "noiseless" float-mode LLR; large enough that no
# sequence of g-additions can cancel it for N <= MAX_BLOCK.
NOISELESS_FLOAT_LLR = 1.0e9


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PolarCodeSpec:
    """An (N, K) polar code with an explicit frozen set.

    Parameters
    ----------
    n_block : int
        Block length N, a power of two.
    frozen_set : tuple of int
        Sorted u-domain indices fixed to zero.
    """

    n_block: int
    frozen_set: tuple[int, ...]

    def __post_init__(self):
        if not is_power_of_two(self.n_block) or self.n_block > MAX_BLOCK:
            raise ValueError(f"block length must be a power of two <= 2^20, got {self.n_block}")
        frozen = tuple(int(i) for i in self.frozen_set)
        if len(set(frozen)) != len(frozen):
            raise ValueError("frozen set contains duplicate indices")
        if any(i < 0 or i >= self.n_block for i in frozen):
            raise ValueError(f"frozen index out of range [0, {self.n_block})")
        if len(frozen) == self.n_block:
            raise ValueError("at least one information bit is required")
        object.__setattr__(self, "frozen_set", tuple(sorted(frozen)))

    @property
    def k_info(self) -> int:
        return self.n_block - len(self.frozen_set)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k_info, self.n_block)

    @property
    def n_stages(self) -> int:
        return self.n_block.bit_length() - 1

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_block, dtype=bool)
        mask[list(self.frozen_set)] = True
        return mask

    @property
    def info_set(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen_mask)


@dataclass(frozen=True)
class QuantSpec:
    """LLR number format: plain floats or symmetric saturating integers."""

    mode: str = "fixed"
    total_bits: int = 6

    def __post_init__(self):
        if self.mode not in ("float", "fixed"):
            raise ValueError(f"unknown quantization mode {self.mode!r}")
        if self.mode == "fixed" and self.total_bits < 2:
            raise ValueError("fixed-point LLRs need at least 2 bits")

    @classmethod
    def parse(cls, text: str) -> "QuantSpec":
        """Parse ``float`` or ``fixed:<bits>``."""
        text = text.strip().lower()
        if text == "float":
            return cls("float", 32)
        m = re.fullmatch(r"fixed:(\d+)", text)
        if not m:
            raise ValueError(f"bad quantization {text!r}; expected 'float' or 'fixed:<bits>'")
        return cls("fixed", int(m.group(1)))

    def __str__(self):
        return "float" if self.is_float else f"fixed:{self.total_bits}"

    @property
    def is_float(self) -> bool:
        return self.mode == "float"

    @property
    def saturating(self) -> bool:
        return not self.is_float

    @property
    def bound(self) -> float:
        """Largest representable magnitude (symmetric; the most negative code is unused)."""
        if self.is_float:
            return math.inf
        return (1 << (self.total_bits - 1)) - 1

    @property
    def width_bits(self) -> int:
        """Bits per stored LLR; float mode is modelled as a 32-bit word."""
        return 32 if self.is_float else self.total_bits

    @property
    def dtype(self):
        return np.float64 if self.is_float else np.int32

    def saturate(self, x):
        if self.is_float:
            return x
        return np.clip(x, -self.bound, self.bound)

    def quantize(self, llr) -> np.ndarray:
        """Map real LLRs into this format (round to nearest, then clamp)."""
        llr = np.asarray(llr, dtype=np.float64)
        if self.is_float:
            return llr.copy()
        return np.clip(np.rint(llr), -self.bound, self.bound).astype(np.int32)


FLOAT = QuantSpec("float", 32)
FIXED6 = QuantSpec("fixed", 6)


@dataclass(frozen=True)
class ChannelConfig:
    ebno_db: float
    seed: int = 0
    modulation: str = field(default="bpsk")

    def __post_init__(self):
        if self.modulation != "bpsk":
            raise ValueError("only BPSK modulation is supported")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def noise_variance(self, rate) -> float:
        return 1.0 / (2.0 * float(rate) * 10.0 ** (self.ebno_db / 10.0))


def frame_rng(seed: int, frame_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one frame, derived only from (seed, frame index).

    Stream 0 is the channel noise, stream 1 the frame's random info bits.
    """
    key = (frame_index,) if stream == 0 else (frame_index, stream)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def bhattacharyya(n_block: int, design_ebno_db: float, rate) -> np.ndarray:
    """Bhattacharyya parameters of the N synthetic channels in natural index order."""
    z = np.array([math.exp(-float(rate) * 10.0 ** (design_ebno_db / 10.0))])
    while z.size < n_block:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def construct_frozen_set(n_block: int, k_info: int, design_ebno_db: float = 0.0) -> PolarCodeSpec:
    """Freeze the N-K least reliable positions (largest Bhattacharyya parameter).

    Equal parameters freeze the lower index first.
    """
    if not is_power_of_two(n_block) or n_block > MAX_BLOCK:
        raise ValueError(f"block length must be a power of two <= 2^20, got {n_block}")
    if not 0 < k_info <= n_block:
        raise ValueError(f"k_info must be in (0, {n_block}], got {k_info}")
    z = bhattacharyya(n_block, design_ebno_db, Fraction(k_info, n_block))
    order = sorted(range(n_block), key=lambda i: (-z[i], i))
    return PolarCodeSpec(n_block, tuple(order[: n_block - k_info]))


def parse_frozen_text(text: str, n_block: int) -> PolarCodeSpec:
    indices = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            if not tok.isdigit():
                raise ValueError(f"line {lineno}: malformed index {tok!r}")
            indices.append(int(tok))
    if len(set(indices)) != len(indices):
        dup = next(i for i in indices if indices.count(i) > 1)
        raise ValueError(f"duplicate index {dup}")
    bad = [i for i in indices if i >= n_block]
    if bad:
        raise ValueError(f"index {bad[0]} >= block length {n_block}")
    return PolarCodeSpec(n_block, tuple(indices))


def load_frozen_set(path, n_block: int) -> PolarCodeSpec:
    return parse_frozen_text(Path(path).read_text(), n_block)


def format_frozen_set(spec: PolarCodeSpec) -> str:
    header = f"# polar code N={spec.n_block} K={spec.k_info}\n"
    return header + "\n".join(str(i) for i in spec.frozen_set) + ("\n" if spec.frozen_set else "")


def polar_transform(bits) -> np.ndarray:
    """x = u F^{(x)n} over GF(2), natural order; works on the last axis and is its own inverse."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"length must be a power of two, got {n}")
    h = 1
    while h < n:
        v = x.reshape(x.shape[:-1] + (n // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def encode(spec: PolarCodeSpec, info_bits) -> np.ndarray:
    """Encode K info bits (or a batch of shape (..., K)) into N-bit codewords."""
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape[-1:] != (spec.k_info,):
        raise ValueError(f"expected {spec.k_info} info bits, got shape {info.shape}")
    u = np.zeros(info.shape[:-1] + (spec.n_block,), dtype=np.uint8)
    u[..., spec.info_set] = info
    return polar_transform(u)


def transmit(
    codeword,
    chan: ChannelConfig,
    quant: QuantSpec,
    *,
    rate=Fraction(1),
    frame_index: int = 0,
    noiseless: bool = False,
) -> np.ndarray:
    """BPSK over AWGN; returns channel LLRs 2y/sigma^2 in the ``quant`` format."""
    bits = np.asarray(codeword, dtype=np.uint8)
    symbols = 1.0 - 2.0 * bits
    if noiseless:
        mag = NOISELESS_FLOAT_LLR if quant.is_float else quant.bound
        return quant.quantize(symbols * mag)
    sigma2 = chan.noise_variance(rate)
    y = symbols + frame_rng(chan.seed, frame_index).normal(0.0, math.sqrt(sigma2), bits.shape)
    return quant.quantize(2.0 * y / sigma2)


@dataclass
class FrameBatch:
    first_frame: int
    info: np.ndarray
    codewords: np.ndarray
    llrs: np.ndarray


def simulate_frames(
    spec: PolarCodeSpec,
    chan: ChannelConfig,
    quant: QuantSpec,
    first_frame: int,
    count: int,
    noiseless: bool = False,
) -> FrameBatch:
    """Random info words and channel outputs for frames first_frame .. first_frame+count-1.

    Every frame has its own info and noise streams, so any frame range reproduces
    exactly regardless of how a run is split, and the noise matches ``transmit``.
    """
    n, k = spec.n_block, spec.k_info
    info = np.empty((count, k), dtype=np.uint8)
    noise = np.empty((count, n))
    sigma = math.sqrt(chan.noise_variance(spec.rate))
    for j in range(count):
        info[j] = frame_rng(chan.seed, first_frame + j, 1).integers(0, 2, k, dtype=np.uint8)
        noise[j] = frame_rng(chan.seed, first_frame + j).normal(0.0, sigma, n)
    codewords = encode(spec, info)
    symbols = 1.0 - 2.0 * codewords
    if noiseless:
        mag = NOISELESS_FLOAT_LLR if quant.is_float else quant.bound
        llrs = quant.quantize(symbols * mag)
    else:
        llrs = quant.quantize(2.0 * (symbols + noise) / sigma**2)
    return FrameBatch(first_frame, info, codewords, llrs)
