"""
SC and LLR-based SCL Decoding Module
Successive cancellation kernels and a list decoder with a shiftable pruning window
"""
from dataclasses import dataclass, field
from typing import List, Mapping, Optional

import numpy as np

from codec import frame_passes_crc
from config import DECODER
from construction import CodeSpec

LLR_MODES = ("minsum", "exact")


# ------------ LLR kernels -----------------

def llr_f(a, b, mode: str = "minsum"):
    """Check-node update; the exact form uses the Jacobian-log correction so it cannot overflow"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sign = np.where((a < 0) != (b < 0), -1.0, 1.0)
    magnitude = np.minimum(np.abs(a), np.abs(b))
    if mode == "minsum":
        return sign * magnitude
    if mode == "exact":
        return sign * magnitude + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    raise ValueError(f"unknown LLR mode: {mode}")


def llr_g(a, b, s):
    """Variable-node update given the partial sum s of the upper branch"""
    return np.asarray(b, dtype=float) + (1.0 - 2.0 * np.asarray(s, dtype=float)) * np.asarray(a, dtype=float)


def hard_decision(llr):
    """sign(0) = +1, so a zero LLR decides 0"""
    return (np.asarray(llr) < 0).astype(np.uint8)


def path_metric_update(pm, llr, chosen_bit):
    """Add |llr| when the chosen bit contradicts the hard decision"""
    if np.any(np.asarray(pm) < 0):
        raise ValueError("path metric must be non-negative")
    penalty = np.where(np.asarray(chosen_bit) != hard_decision(llr), np.abs(llr), 0.0)
    return pm + penalty


def prune_with_shift(metrics, k: int, list_size: Optional[int] = None) -> np.ndarray:
    """
    Keep the candidates at sorted ranks k+1 .. k+L (1-based, ascending metric).

    The sort is stable, so ties keep candidate order (parent path, then bit 0
    before bit 1). With fewer than L + k candidates the shift is clamped to
    (candidates - L). Returns candidate indices in rank order.
    """
    metrics = np.asarray(metrics, dtype=float)
    count = metrics.size
    if list_size is None:
        if count % 2:
            raise ValueError(f"expected 2L candidate metrics, got {count}")
        list_size = count // 2
    if not 0 <= k <= list_size:
        raise ValueError(f"shift k={k} outside [0, {list_size}]")
    if count <= list_size:
        return np.arange(count)
    k = min(k, count - list_size)
    order = np.argsort(metrics, kind="stable")
    return order[k:k + list_size]


# ------------ plain SC -----------------

def sc_decode(channel_llrs, spec: CodeSpec, llr_mode: str = DECODER["llr_mode"]) -> np.ndarray:
    """Successive cancellation by direct recursion over the code tree"""
    llrs = np.asarray(channel_llrs, dtype=float)
    if llrs.size != spec.N:
        raise ValueError(f"expected {spec.N} channel LLRs, got {llrs.size}")
    info = spec.info_mask
    u_hat = np.zeros(spec.N, dtype=np.uint8)

    def decode_node(alpha: np.ndarray, offset: int) -> np.ndarray:
        if alpha.size == 1:
            bit = int(alpha[0] < 0) if info[offset] else 0
            u_hat[offset] = bit
            return np.array([bit], dtype=np.uint8)
        half = alpha.size // 2
        left = decode_node(llr_f(alpha[:half], alpha[half:], llr_mode), offset)
        right = decode_node(llr_g(alpha[:half], alpha[half:], left), offset + half)
        return np.concatenate((left ^ right, right))

    decode_node(llrs, 0)
    return u_hat


# ------------ list decoding -----------------

@dataclass
class PmrTrace:
    """Per-bit path metric range of the list: PMR_i = PM_L - PM_1"""
    bits: List[int] = field(default_factory=list)
    pm_first: List[float] = field(default_factory=list)
    pm_last: List[float] = field(default_factory=list)
    correct_rank: List[int] = field(default_factory=list)

    def record(self, bit: int, metrics: np.ndarray, correct_rank: int = -1):
        self.bits.append(int(bit))
        self.pm_first.append(float(np.min(metrics)))
        self.pm_last.append(float(np.max(metrics)))
        self.correct_rank.append(int(correct_rank))

    @property
    def pmr(self) -> np.ndarray:
        return np.asarray(self.pm_last) - np.asarray(self.pm_first)

    def rows(self):
        for bit, first, last, rank in zip(self.bits, self.pm_first, self.pm_last, self.correct_rank):
            yield bit, first, last, last - first, rank


@dataclass
class GenieTracker:
    """
    Follows the transmitted path through the list (simulation only).
    `correct` is its row in the list, -1 once it has been pruned.
    """
    true_u: np.ndarray
    correct: int = 0
    penalties: int = 0
    penalty_positions: List[int] = field(default_factory=list)
    elimination_bit: Optional[int] = None
    elimination_rank: Optional[int] = None
    penalty_count: Optional[int] = None

    @property
    def alive(self) -> bool:
        return self.correct >= 0


@dataclass
class ListResult:
    """Surviving candidates sorted by ascending metric"""
    candidates: np.ndarray
    metrics: np.ndarray

    def __len__(self):
        return len(self.metrics)

    @property
    def best(self) -> np.ndarray:
        return self.candidates[0]


@dataclass
class Candidate:
    u: np.ndarray
    metric: float
    rank: int


class ListState:
    """
    Working memory of every active path at one decoding position:
    per-depth LLRs (`alpha`), left-sibling partial sums (`left_beta`),
    bit decisions and path metrics. Row p of every array belongs to path p.
    """

    def __init__(self, channel_llrs: np.ndarray, n: int):
        N = 1 << n
        self.n = n
        self.alpha = [np.zeros((1, N >> d)) for d in range(n + 1)]
        self.alpha[0][0] = channel_llrs
        self.left_beta = [np.zeros((1, N >> d), dtype=np.uint8) for d in range(n + 1)]
        self.decisions = np.zeros((1, N), dtype=np.uint8)
        self.metrics = np.zeros(1)
        self.position = 0
        self.genie: Optional[GenieTracker] = None

    @property
    def size(self) -> int:
        return len(self.metrics)

    @property
    def sorted_order(self) -> np.ndarray:
        return np.argsort(self.metrics, kind="stable")

    def select(self, rows: np.ndarray):
        """Rebuild the list from `rows` (repeats copy a path, omissions drop it)"""
        rows = np.asarray(rows, dtype=int)
        self.alpha = [a[rows] for a in self.alpha]
        self.left_beta = [b[rows] for b in self.left_beta]
        self.decisions = self.decisions[rows]
        self.metrics = self.metrics[rows]

    def copy(self) -> "ListState":
        clone = ListState.__new__(ListState)
        clone.n = self.n
        clone.alpha = [a.copy() for a in self.alpha]
        clone.left_beta = [b.copy() for b in self.left_beta]
        clone.decisions = self.decisions.copy()
        clone.metrics = self.metrics.copy()
        clone.position = self.position
        clone.genie = None
        if self.genie is not None:
            g = self.genie
            clone.genie = GenieTracker(
                true_u=g.true_u, correct=g.correct, penalties=g.penalties,
                penalty_positions=list(g.penalty_positions), elimination_bit=g.elimination_bit,
                elimination_rank=g.elimination_rank, penalty_count=g.penalty_count,
            )
        return clone


class ListDecoder:
    """
    LLR-based SCL decoder. Bit i is pruned with the window shifted by
    schedule[i] (default 0); the decoder is reusable and keeps no state
    between calls.
    """

    def __init__(self, spec: CodeSpec, list_size: int, llr_mode: str = DECODER["llr_mode"]):
        if list_size < 1:
            raise ValueError(f"list size must be >= 1, got {list_size}")
        if llr_mode not in LLR_MODES:
            raise ValueError(f"unknown LLR mode: {llr_mode}")
        self.spec = spec
        self.list_size = list_size
        self.llr_mode = llr_mode
        self.n = spec.n
        self.N = spec.N
        self.info = spec.info_mask

    def start(self, channel_llrs, true_u=None) -> ListState:
        llrs = np.asarray(channel_llrs, dtype=float)
        if llrs.size != self.N:
            raise ValueError(f"expected {self.N} channel LLRs, got {llrs.size}")
        state = ListState(llrs, self.n)
        if true_u is not None:
            state.genie = GenieTracker(true_u=np.asarray(true_u, dtype=np.uint8))
        return state

    def advance(self,
                state: ListState,
                stop: int,
                schedule: Optional[Mapping[int, int]] = None,
                trace: Optional[PmrTrace] = None):
        """Decode bits state.position .. stop-1 in place"""
        for i in range(state.position, stop):
            shift = schedule.get(i, 0) if schedule is not None else 0
            self._step(state, i, shift, trace)
        state.position = max(state.position, stop)

    def result(self, state: ListState) -> ListResult:
        order = state.sorted_order
        return ListResult(candidates=state.decisions[order], metrics=state.metrics[order])

    def decode(self,
               channel_llrs,
               schedule: Optional[Mapping[int, int]] = None,
               trace: Optional[PmrTrace] = None,
               true_u=None) -> ListResult:
        state = self.start(channel_llrs, true_u)
        self.advance(state, self.N, schedule, trace)
        return self.result(state)

    def _leaf_llr(self, state: ListState, i: int) -> np.ndarray:
        """Walk the LLRs down from the deepest ancestor shared with bit i-1"""
        n = self.n
        alpha = state.alpha
        if i == 0:
            first = 1
        else:
            depth = n - ((i & -i).bit_length() - 1)
            parent = alpha[depth - 1]
            half = parent.shape[1] // 2
            alpha[depth] = llr_g(parent[:, :half], parent[:, half:], state.left_beta[depth])
            first = depth + 1
        for depth in range(first, n + 1):
            parent = alpha[depth - 1]
            half = parent.shape[1] // 2
            alpha[depth] = llr_f(parent[:, :half], parent[:, half:], self.llr_mode)
        return alpha[n][:, 0]

    def _step(self, state: ListState, i: int, shift: int, trace: Optional[PmrTrace]):
        llr = self._leaf_llr(state, i)
        penalty = np.abs(llr)
        hard = llr < 0
        genie = state.genie

        if not self.info[i]:
            if genie is not None and genie.alive and hard[genie.correct]:
                genie.penalties += 1
            state.metrics = state.metrics + np.where(hard, penalty, 0.0)
            bits = np.zeros(state.size, dtype=np.uint8)
        else:
            size = state.size
            candidates = np.empty(2 * size)
            candidates[0::2] = state.metrics + np.where(hard, penalty, 0.0)
            candidates[1::2] = state.metrics + np.where(hard, 0.0, penalty)
            if 2 * size <= self.list_size:
                chosen = np.arange(2 * size)
            else:
                chosen = prune_with_shift(candidates, shift, self.list_size)
            if genie is not None and genie.alive:
                self._follow_genie(genie, i, candidates, chosen, hard)
            state.select(chosen // 2)
            state.metrics = candidates[chosen]
            bits = (chosen % 2).astype(np.uint8)
            state.decisions[:, i] = bits

        if trace is not None:
            rank = -1
            if genie is not None and genie.alive:
                rank = int(np.flatnonzero(state.sorted_order == genie.correct)[0])
            trace.record(i, state.metrics, rank)
        self._propagate(state, i, bits)

    def _follow_genie(self, genie: GenieTracker, i: int, candidates: np.ndarray,
                      chosen: np.ndarray, hard: np.ndarray):
        bit = int(genie.true_u[i])
        target = 2 * genie.correct + bit
        penalized = bool(hard[genie.correct]) != bool(bit)
        if penalized:
            genie.penalties += 1
        hits = np.flatnonzero(chosen == target)
        if hits.size:
            if penalized:
                genie.penalty_positions.append(i)
            genie.correct = int(hits[0])
            return
        order = np.argsort(candidates, kind="stable")
        genie.elimination_bit = i
        genie.elimination_rank = int(np.flatnonzero(order == target)[0]) + 1
        genie.penalty_count = genie.penalties
        genie.correct = -1

    @staticmethod
    def _propagate(state: ListState, i: int, bits: np.ndarray):
        """Fold the new decision into the partial sums up to the first left child"""
        beta = bits[:, None]
        depth = state.n
        index = i
        while depth > 0:
            if index & 1 == 0:
                state.left_beta[depth] = beta
                return
            beta = np.concatenate((state.left_beta[depth] ^ beta, beta), axis=1)
            depth -= 1
            index >>= 1


def scl_decode(channel_llrs,
               spec: CodeSpec,
               list_size: int,
               schedule: Optional[Mapping[int, int]] = None,
               trace: Optional[PmrTrace] = None,
               llr_mode: str = DECODER["llr_mode"]) -> ListResult:
    """One SCL pass; candidates come back sorted by ascending path metric"""
    return ListDecoder(spec, list_size, llr_mode).decode(channel_llrs, schedule, trace)


def select_crc_pass(candidates: ListResult, spec: CodeSpec) -> Optional[Candidate]:
    """Lowest-metric candidate whose CRC (every segment CRC) checks, or None"""
    for rank, (u, metric) in enumerate(zip(candidates.candidates, candidates.metrics)):
        if frame_passes_crc(u, spec):
            return Candidate(u=u, metric=float(metric), rank=rank)
    return None
