"""
Shifted-pruning Module
Critical-set generation and the retry drivers for CRC-aided list decoding:
plain shifting over the critical set, prioritized/constrained subsets,
generalized per-bit shifts, nested schedules and segmented decoding
"""
import csv
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from codec import CrcSpec, crc_check
from config import DECODER
from construction import CodeSpec
from decoder import ListDecoder, select_crc_pass


@dataclass(frozen=True)
class CriticalSet:
    """Bit positions to shift at, in the order the retries visit them"""
    positions: Tuple[int, ...]
    priorities: Optional[Tuple[float, ...]] = None

    def __len__(self):
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def validate(self, spec: CodeSpec):
        out_of_range = [p for p in self.positions if not 0 <= p < spec.N]
        if out_of_range:
            raise ValueError(f"critical-set positions outside [0, {spec.N}): {out_of_range[:5]}")
        outside = [p for p in self.positions if not spec.info_mask[p]]
        if outside:
            raise ValueError(f"critical-set positions outside the info set: {outside[:5]}")


@dataclass
class PruningSchedule:
    """Shift amount k_i per bit index for one decoding attempt (0 elsewhere)"""
    shifts: Dict[int, int] = field(default_factory=dict)

    def get(self, bit: int, default: int = 0) -> int:
        return self.shifts.get(bit, default)

    def __len__(self):
        return len(self.shifts)

    @classmethod
    def single(cls, position: int, k: int) -> "PruningSchedule":
        return cls({int(position): int(k)})

    @classmethod
    def nested(cls, positions: Iterable[int], k: int) -> "PruningSchedule":
        """Shift by the same k at several positions within one attempt"""
        return cls({int(p): int(k) for p in positions})

    @classmethod
    def from_pattern(cls, pattern: Mapping[int, int]) -> "PruningSchedule":
        """Generalized shifting: arbitrary k_i per position"""
        return cls({int(p): int(k) for p, k in pattern.items() if k})

    def validate(self, spec: CodeSpec, list_size: int):
        for bit, k in self.shifts.items():
            if not 0 <= bit < spec.N or not spec.info_mask[bit]:
                raise ValueError(f"schedule shifts frozen or out-of-range bit {bit}")
            if not 0 <= k <= list_size:
                raise ValueError(f"shift k={k} at bit {bit} outside [0, {list_size}]")


@dataclass(frozen=True)
class SegmentPlan:
    """
    Partition of the u-vector into CRC-protected segments.
    `boundaries` are exclusive segment end indices; the last one is N.
    """
    boundaries: Tuple[int, ...]
    crcs: Tuple[CrcSpec, ...]
    max_attempts: Tuple[Optional[int], ...]
    info_chunks: Tuple[Tuple[int, ...], ...]

    @property
    def count(self) -> int:
        return len(self.boundaries)

    def ranges(self) -> List[Tuple[int, int]]:
        starts = (0,) + self.boundaries[:-1]
        return list(zip(starts, self.boundaries))

    @classmethod
    def equal_split(cls, spec: CodeSpec, max_attempts: Optional[Sequence[Optional[int]]] = None) -> "SegmentPlan":
        """Segments follow spec.info_segments(); each ends right after its last info position"""
        if spec.crc is None:
            raise ValueError("segmented decoding needs a CRC")
        chunks = spec.info_segments()
        boundaries = [int(c[-1]) + 1 for c in chunks]
        boundaries[-1] = spec.N
        attempts = tuple(max_attempts) if max_attempts is not None else (None,) * len(chunks)
        if len(attempts) != len(chunks):
            raise ValueError(f"need {len(chunks)} per-segment attempt limits, got {len(attempts)}")
        return cls(
            boundaries=tuple(boundaries),
            crcs=(spec.crc,) * len(chunks),
            max_attempts=attempts,
            info_chunks=tuple(tuple(int(i) for i in c) for c in chunks),
        )


@dataclass
class DecodeOutcome:
    """Result of a retry driver; failure is a value, not an exception"""
    success: bool
    u_hat: np.ndarray
    attempts: int
    attempt_index: Optional[int] = None
    segment_attempts: Tuple[int, ...] = ()

    @property
    def total_segment_attempts(self) -> int:
        return sum(self.segment_attempts) if self.segment_attempts else self.attempts


# ------------ critical set -----------------

def generate_cs(spec: CodeSpec) -> CriticalSet:
    """
    First leaves of the maximal rate-1 subtrees. Leaves hold 1 (frozen) or 0
    (info), inner nodes the sum of their children; a zero node whose parent
    is nonzero is a maximal all-information subtree.
    """
    frozen = (~spec.info_mask).astype(int)
    positions = []
    parent_sums = None
    for level in range(spec.n + 1):
        sums = frozen.reshape(1 << level, -1).sum(axis=1)
        zero = sums == 0
        if parent_sums is not None:
            zero &= np.repeat(parent_sums, 2) > 0
        width = spec.N >> level
        positions.extend(int(j) * width for j in np.flatnonzero(zero))
        parent_sums = sums
    return CriticalSet(positions=tuple(sorted(positions)))


def prioritize_cs(cs: CriticalSet, stats: Mapping[int, float]) -> CriticalSet:
    """Reorder by descending elimination frequency, ties by ascending bit index"""
    weights = {p: float(stats.get(p, 0)) for p in cs.positions}
    ordered = sorted(cs.positions, key=lambda p: (-weights[p], p))
    return CriticalSet(positions=tuple(ordered), priorities=tuple(weights[p] for p in ordered))


def constrain_cs(cs: CriticalSet, m: int) -> CriticalSet:
    """Keep the first m (highest-priority) positions"""
    if not 1 <= m <= len(cs):
        raise ValueError(f"constrained size m={m} outside [1, {len(cs)}]")
    priorities = cs.priorities[:m] if cs.priorities is not None else None
    return CriticalSet(positions=cs.positions[:m], priorities=priorities)


# ------------ retry drivers -----------------

def sp_decode_schedules(channel_llrs,
                        spec: CodeSpec,
                        list_size: int,
                        schedules: Sequence[Mapping[int, int]],
                        llr_mode: str = DECODER["llr_mode"],
                        decoder: Optional[ListDecoder] = None) -> DecodeOutcome:
    """
    Attempt 0 decodes with the unshifted window; attempt t >= 1 uses
    schedules[t-1]. Returns the first CRC-passing candidate.
    """
    decoder = decoder or ListDecoder(spec, list_size, llr_mode)
    baseline = None
    for t, schedule in enumerate([None] + list(schedules)):
        result = decoder.decode(channel_llrs, schedule)
        if baseline is None:
            baseline = result.best
        found = select_crc_pass(result, spec)
        if found is not None:
            return DecodeOutcome(success=True, u_hat=found.u, attempts=t + 1, attempt_index=t)
    return DecodeOutcome(success=False, u_hat=baseline, attempts=len(schedules) + 1)


def sp_decode(channel_llrs,
              spec: CodeSpec,
              list_size: int,
              cs: CriticalSet,
              max_attempts: Optional[int] = None,
              k: Optional[int] = None,
              llr_mode: str = DECODER["llr_mode"],
              decoder: Optional[ListDecoder] = None) -> DecodeOutcome:
    """
    CRC-aided SCL with shifted pruning over the critical set: after a failed
    baseline pass, attempt t shifts the window by k at cs.positions[t-1].
    Defaults: k = L, max_attempts = |cs|.
    """
    k = list_size if k is None else k
    if not 0 <= k <= list_size:
        raise ValueError(f"shift k={k} outside [0, {list_size}]")
    if max_attempts is None:
        max_attempts = len(cs)
    if not 0 <= max_attempts <= len(cs) + 1:
        raise ValueError(f"max_attempts={max_attempts} outside [0, {len(cs) + 1}]")
    positions = cs.positions[:max_attempts]
    schedules = [PruningSchedule.single(p, k) for p in positions]
    return sp_decode_schedules(channel_llrs, spec, list_size, schedules, llr_mode, decoder)


def sp_decode_segmented(channel_llrs,
                        spec: CodeSpec,
                        list_size: int,
                        plan: SegmentPlan,
                        cs: CriticalSet,
                        k: Optional[int] = None,
                        llr_mode: str = DECODER["llr_mode"],
                        decoder: Optional[ListDecoder] = None) -> DecodeOutcome:
    """
    Decode segment by segment. At each segment end, paths failing the
    segment CRC are dropped; if none survive, the list saved at the segment
    start is restored and the segment is retried with a shift at its next
    critical position. Earlier segments are never revisited.
    """
    k = list_size if k is None else k
    if not 0 <= k <= list_size:
        raise ValueError(f"shift k={k} outside [0, {list_size}]")
    if plan.boundaries[-1] != spec.N:
        raise ValueError("segment plan does not cover the block")
    decoder = decoder or ListDecoder(spec, list_size, llr_mode)
    state = decoder.start(channel_llrs)
    used: List[int] = []

    for j, (start, stop) in enumerate(plan.ranges()):
        in_segment = [p for p in cs.positions if start <= p < stop]
        budget = plan.max_attempts[j]
        budget = len(in_segment) if budget is None else min(budget, len(in_segment))
        chunk = np.asarray(plan.info_chunks[j], dtype=int)
        survivor = None
        baseline = None
        for t in range(budget + 1):
            trial = state.copy()
            schedule = PruningSchedule.single(in_segment[t - 1], k) if t else None
            decoder.advance(trial, stop, schedule)
            if baseline is None:
                baseline = trial
            keep = [row for row in range(trial.size)
                    if crc_check(trial.decisions[row, chunk], plan.crcs[j])]
            if keep:
                trial.select(np.array(keep))
                survivor = trial
                used.append(t + 1)
                break
        if survivor is None:
            used.append(budget + 1)
            # finish the unshifted pass so the reported estimate is a full u-vector
            decoder.advance(baseline, spec.N)
            return DecodeOutcome(success=False, u_hat=decoder.result(baseline).best,
                                 attempts=max(used), segment_attempts=tuple(used))
        state = survivor

    best = decoder.result(state).best
    return DecodeOutcome(success=True, u_hat=best, attempts=max(used),
                         attempt_index=max(used) - 1, segment_attempts=tuple(used))


# ------------ files -----------------

def save_critical_set(cs: CriticalSet, path: str) -> str:
    """One decimal bit index per line, in retry order"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write("\n".join(str(p) for p in cs.positions) + "\n")
    return path


def load_critical_set(path: str) -> CriticalSet:
    with open(path, "r") as f:
        return CriticalSet(positions=tuple(int(line) for line in f if line.strip()))


def save_elimination_stats(stats: Mapping[int, int], path: str) -> str:
    """(bit index, count) CSV sorted by bit index"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bit_index", "count"])
        for bit in sorted(stats):
            writer.writerow([int(bit), int(stats[bit])])
    return path


def load_elimination_stats(path: str) -> Dict[int, int]:
    stats: Dict[int, int] = {}
    with open(path, "r", newline="") as f:
        for row in csv.reader(f):
            if not row or not row[0].strip().lstrip("-").isdigit():
                continue  # header
            stats[int(row[0])] = stats.get(int(row[0]), 0) + int(row[1])
    return stats
