"""
Polar Code Construction Module
Selects the information set by density evolution under Gaussian approximation (DE/GA)
"""
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from codec import CrcSpec
from config import CONSTRUCTION


@dataclass(frozen=True)
class ReliabilityProfile:
    """GA means of the decision LLR of every bit-channel, with the reliability order"""
    llr_means: np.ndarray
    ordering: np.ndarray

    def most_reliable(self, count: int) -> np.ndarray:
        """Sorted indices of the `count` most reliable bit-channels"""
        return np.sort(self.ordering[:count])


@dataclass(frozen=True)
class CodeSpec:
    """
    A polar code P(N, K + s*r): block length N = 2^n, K data bits and
    s CRC-protected segments of r CRC bits each, mapped onto `info_set`.
    """
    n: int
    K: int
    info_set: Tuple[int, ...]
    design_snr_db: float = 0.0
    crc: Optional[CrcSpec] = None
    segments: int = 1
    info_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.segments < 1:
            raise ValueError(f"segments must be >= 1, got {self.segments}")
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(set(info)) != len(info):
            raise ValueError("info_set contains duplicate indices")
        if info and (info[0] < 0 or info[-1] >= self.N):
            raise ValueError(f"info_set indices must lie in [0, {self.N})")
        expected = self.K + self.segments * self.r
        if len(info) != expected:
            raise ValueError(
                f"|info_set| = {len(info)} but K + s*r = {self.K} + {self.segments}*{self.r} = {expected}"
            )
        if self.segments > 1 and self.crc is None:
            raise ValueError("segmented codes need a CRC per segment")
        object.__setattr__(self, "info_set", info)
        mask = np.zeros(self.N, dtype=bool)
        mask[list(info)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "info_mask", mask)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def r(self) -> int:
        return self.crc.width if self.crc is not None else 0

    @property
    def k_total(self) -> int:
        return len(self.info_set)

    @property
    def rate(self) -> float:
        """Information rate K/N (CRC bits excluded)"""
        return self.K / self.N

    @property
    def frozen_set(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(~self.info_mask))

    def info_segments(self) -> List[np.ndarray]:
        """
        Split the info positions into `segments` consecutive chunks of
        ceil((K + s*r) / s) positions (the last chunk takes the remainder).
        Each chunk carries its own CRC on its last r positions.
        """
        info = np.asarray(self.info_set, dtype=int)
        if self.segments == 1:
            return [info]
        chunk = -(-len(info) // self.segments)
        chunks = [info[i:i + chunk] for i in range(0, len(info), chunk)]
        if len(chunks) != self.segments or any(len(c) <= self.r for c in chunks):
            raise ValueError(
                f"cannot split {len(info)} info positions into {self.segments} segments with {self.r}-bit CRCs"
            )
        return chunks

    def describe(self) -> str:
        crc = f"+{self.segments}x{self.r}" if self.segments > 1 else (f"+{self.r}" if self.r else "")
        return f"P({self.N},{self.K}{crc})"


# ------------ Gaussian approximation -----------------

def log_phi(x: float) -> float:
    """Natural log of the two-piece GA phi-function (phi(0) = 1)"""
    if x <= 0.0:
        return 0.0
    if x < CONSTRUCTION["phi_breakpoint"]:
        return -0.4527 * x ** 0.86 + 0.0218
    return 0.5 * math.log(math.pi / x) - x / 4.0 + math.log1p(-10.0 / (7.0 * x))


def phi(x: float) -> float:
    return math.exp(log_phi(x))


def phi_inverse_log(target: float, upper: float) -> float:
    """Solve log_phi(x) = target on [0, upper] by bisection"""
    return bisect(
        lambda x: log_phi(x) - target,
        0.0,
        upper,
        xtol=CONSTRUCTION["bisection_xtol"],
        rtol=CONSTRUCTION["bisection_rtol"],
    )


def check_node_mean(m: float) -> float:
    """LLR mean of the check-combined (upper) channel: phi^-1(1 - (1 - phi(m))^2)"""
    log_p = log_phi(m)
    if log_p >= 0.0:
        return 0.0
    p = math.exp(log_p)
    if p < 0.5:
        # 1 - (1 - p)^2 = p * (2 - p), kept in the log domain so tiny p does not underflow
        target = log_p + math.log(2.0 - p)
    else:
        # near p = 1 the sum above rounds up to >= 0; 1 - p = -expm1(log_p) is exact
        target = math.log1p(-math.expm1(log_p) ** 2)
    if target >= 0.0:
        return 0.0
    return phi_inverse_log(target, m)


def ga_reliability(n: int, channel_mean: float) -> ReliabilityProfile:
    """
    Run the GA recursion over n polarization stages.
    Index bits are consumed most-significant first: bit 0 takes the
    check-combined branch, bit 1 the doubled (variable-node) branch.
    """
    means = np.array([channel_mean], dtype=float)
    for _ in range(n):
        upper = np.array([check_node_mean(m) for m in means])
        stage = np.empty(2 * len(means), dtype=float)
        stage[0::2] = upper
        stage[1::2] = 2.0 * means
        means = stage
    # descending reliability, ties broken by lower bit index
    ordering = np.lexsort((np.arange(len(means)), -means))
    return ReliabilityProfile(llr_means=means, ordering=ordering)


def channel_llr_mean(ebno_db: float, rate: float) -> float:
    """Mean of the BPSK/AWGN channel LLR: 2/sigma^2 with sigma^2 = 1/(2*R*10^(EbN0/10))"""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (ebno_db / 10.0))
    return 2.0 / sigma2


def construct_dega(n: int,
                   k_total: int,
                   design_snr_db: float,
                   info_bits: Optional[int] = None,
                   crc: Optional[CrcSpec] = None,
                   segments: int = 1,
                   rate: Optional[float] = None) -> CodeSpec:
    """
    Build P(2^n, k_total) by DE/GA at the design SNR.

    Args:
        n: log2 of the block length
        k_total: number of non-frozen positions (data + CRC bits)
        design_snr_db: design Eb/N0 in dB
        info_bits: data bit count K (default: k_total, i.e. no CRC)
        crc: CRC attached per segment
        segments: number of CRC-protected segments
        rate: override for the Eb/N0 normalization rate (default K/N)

    Returns:
        CodeSpec with the k_total most reliable bit-channels as info_set
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    N = 1 << n
    if not 0 < k_total <= N:
        raise ValueError(f"k_total must be in (0, {N}], got {k_total}")
    if info_bits is None:
        info_bits = k_total - segments * (crc.width if crc else 0)
    if info_bits <= 0:
        raise ValueError(f"no room for data bits: k_total={k_total}, info_bits={info_bits}")
    profile = ga_reliability(n, channel_llr_mean(design_snr_db, rate or info_bits / N))
    return CodeSpec(
        n=n,
        K=info_bits,
        info_set=tuple(int(i) for i in profile.most_reliable(k_total)),
        design_snr_db=design_snr_db,
        crc=crc,
        segments=segments,
    )


def code_reliability(spec: CodeSpec, rate: Optional[float] = None) -> ReliabilityProfile:
    """GA profile of the code's block length at its design SNR"""
    return ga_reliability(spec.n, channel_llr_mean(spec.design_snr_db, rate or spec.rate))


# ------------ info-set files -----------------

def save_info_set(spec: CodeSpec, path: str) -> str:
    """Write the info set as newline-delimited decimal indices"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write("\n".join(str(i) for i in spec.info_set) + "\n")
    return path


def load_info_set(path: str) -> List[int]:
    with open(path, "r") as f:
        return [int(line) for line in f if line.strip()]


def code_from_info_set(n: int,
                       info_set: Sequence[int],
                       info_bits: int,
                       crc: Optional[CrcSpec] = None,
                       segments: int = 1,
                       design_snr_db: float = 0.0) -> CodeSpec:
    """Pin a construction loaded from file"""
    return CodeSpec(n=n, K=info_bits, info_set=tuple(info_set), design_snr_db=design_snr_db,
                    crc=crc, segments=segments)
