"""
Polar Encoding and CRC Module
GF(2) butterfly encoder plus CRC attachment/verification for CRC-aided decoding
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

from config import CRC8_POLY, CRC16_POLY

if TYPE_CHECKING:
    from construction import CodeSpec


@dataclass(frozen=True)
class CrcSpec:
    """
    CRC generator: `polynomial` lists the r+1 coefficients most-significant
    first. The register starts at `initial_register` (all-zero by default),
    message bits are shifted in MSB first and there is no final XOR.
    """
    width: int
    polynomial: Tuple[int, ...]
    initial_register: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        poly = tuple(int(b) for b in self.polynomial)
        if self.width < 1:
            raise ValueError(f"CRC width must be >= 1, got {self.width}")
        if len(poly) != self.width + 1:
            raise ValueError(f"CRC polynomial needs {self.width + 1} coefficients, got {len(poly)}")
        if poly[0] != 1 or any(b not in (0, 1) for b in poly):
            raise ValueError("CRC polynomial must be binary with leading coefficient 1")
        init = self.initial_register
        init = (0,) * self.width if init is None else tuple(int(b) for b in init)
        if len(init) != self.width:
            raise ValueError(f"initial register needs {self.width} bits, got {len(init)}")
        object.__setattr__(self, "polynomial", poly)
        object.__setattr__(self, "initial_register", init)

    @classmethod
    def crc16(cls) -> "CrcSpec":
        """g(x) = x^16 + x^15 + x^2 + 1"""
        return cls(16, CRC16_POLY)

    @classmethod
    def crc8(cls) -> "CrcSpec":
        """g(x) = x^8 + x^7 + x^6 + x^4 + x^2 + 1"""
        return cls(8, CRC8_POLY)

    @classmethod
    def from_hex(cls, value: str) -> "CrcSpec":
        """Parse a full generator such as 0x18005 (leading term included)"""
        poly = int(value, 16)
        if poly < 2:
            raise ValueError(f"invalid CRC polynomial {value}")
        bits = tuple(int(b) for b in bin(poly)[2:])
        return cls(len(bits) - 1, bits)

    def _register_bits(self) -> Tuple[int, int, int]:
        width = self.width
        taps = int("".join(str(b) for b in self.polynomial[1:]), 2)
        start = int("".join(str(b) for b in self.initial_register), 2)
        return width, taps, start


@dataclass(frozen=True)
class MessageFrame:
    """Data bits, their CRC bits, and the u-vector carrying both"""
    info_bits: np.ndarray
    crc_bits: np.ndarray
    u_vector: np.ndarray


def _as_bits(bits) -> np.ndarray:
    return np.asarray(bits, dtype=np.uint8).ravel()


def polar_transform(u) -> np.ndarray:
    """
    x = u * G_N over GF(2), G_N = F^{(x)n}, F = [[1, 0], [1, 1]].
    Works on a single vector or on a batch with the block on the last axis.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    if N < 1 or N & (N - 1):
        raise ValueError(f"block length must be a power of two, got {N}")
    lead = x.shape[:-1]
    step = 1
    while step < N:
        blocks = x.reshape(lead + (-1, 2, step))
        blocks[..., 0, :] ^= blocks[..., 1, :]
        step *= 2
    return x


def crc_remainder(bits, spec: CrcSpec) -> np.ndarray:
    """Remainder of bits(x) * x^r modulo g(x), r bits MSB first"""
    width, taps, reg = spec._register_bits()
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    for b in _as_bits(bits):
        feedback = bool(reg & top) ^ bool(b)
        reg = (reg << 1) & mask
        if feedback:
            reg ^= taps
    return np.array([(reg >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc_append(info, spec: CrcSpec) -> np.ndarray:
    info = _as_bits(info)
    if info.size == 0:
        raise ValueError("cannot attach a CRC to an empty message")
    return np.concatenate((info, crc_remainder(info, spec)))


def crc_check(frame, spec: CrcSpec) -> bool:
    """True iff the frame (message followed by its r CRC bits) divides cleanly"""
    frame = _as_bits(frame)
    if frame.size <= spec.width:
        raise ValueError(f"frame of {frame.size} bits is too short for a {spec.width}-bit CRC")
    return bool(np.array_equal(crc_remainder(frame[:-spec.width], spec), frame[-spec.width:]))


# ------------ mapping frames onto the u-vector -----------------

def frame_to_u(info, spec: "CodeSpec") -> MessageFrame:
    """
    Attach the CRC(s) and scatter onto the info set in ascending index order.
    With s segments, segment j carries its data bits followed by the CRC of
    those data bits on its own chunk of info positions.
    """
    info = _as_bits(info)
    if info.size != spec.K:
        raise ValueError(f"expected {spec.K} info bits, got {info.size}")
    u = np.zeros(spec.N, dtype=np.uint8)
    crc_parts = []
    offset = 0
    for positions in spec.info_segments():
        data_len = len(positions) - spec.r
        data = info[offset:offset + data_len]
        offset += data_len
        if spec.crc is not None:
            parity = crc_remainder(data, spec.crc)
            crc_parts.append(parity)
            u[positions] = np.concatenate((data, parity))
        else:
            u[positions] = data
    crc_bits = np.concatenate(crc_parts) if crc_parts else np.zeros(0, dtype=np.uint8)
    return MessageFrame(info_bits=info, crc_bits=crc_bits, u_vector=u)


def extract_info(u, spec: "CodeSpec") -> np.ndarray:
    """Data bits of a decoded u-vector (CRC bits dropped)"""
    u = _as_bits(u)
    parts = [u[positions[:len(positions) - spec.r]] for positions in spec.info_segments()]
    return np.concatenate(parts)


def segment_passes_crc(u, spec: "CodeSpec", positions: Sequence[int], crc: Optional[CrcSpec] = None) -> bool:
    crc = crc or spec.crc
    if crc is None:
        return True
    return crc_check(_as_bits(u)[np.asarray(positions, dtype=int)], crc)


def frame_passes_crc(u, spec: "CodeSpec") -> bool:
    """Every segment of the decoded u-vector satisfies its CRC"""
    if spec.crc is None:
        return True
    return all(segment_passes_crc(u, spec, positions) for positions in spec.info_segments())
