"""
Monte Carlo Simulation Module
BPSK/AWGN channel, FER campaigns with complexity accounting, and genie
instrumentation of correct-path elimination
"""
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from codec import extract_info, frame_to_u, polar_transform
from config import CAMPAIGN, DECODER, DEFAULT_SEED, SCHEMES
from construction import CodeSpec
from decoder import ListDecoder, PmrTrace
from shifted_pruning import (
    CriticalSet,
    DecodeOutcome,
    SegmentPlan,
    constrain_cs,
    generate_cs,
    prioritize_cs,
    sp_decode,
    sp_decode_schedules,
    sp_decode_segmented,
)


@dataclass(frozen=True)
class ChannelConfig:
    """One Eb/N0 operating point; sigma^2 = 1/(2*R*10^(EbN0/10))"""
    ebno_db: float
    rate_for_normalization: float
    seed: int = DEFAULT_SEED
    noiseless: bool = False

    def __post_init__(self):
        if not 0.0 < self.rate_for_normalization <= 1.0:
            raise ValueError(f"rate must be in (0, 1], got {self.rate_for_normalization}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.rate_for_normalization * 10.0 ** (self.ebno_db / 10.0))


# ------------ channel -----------------

def trial_rng(seed: int, point_index: int, trial_index: int) -> np.random.Generator:
    """
    Counter-based stream for one trial: Philox keyed by the campaign seed,
    with (trial, point) in the high counter words. Streams never overlap and
    do not depend on which worker runs the trial.
    """
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, trial_index, point_index]))


def gaussian_noise(rng: np.random.Generator, size: int) -> np.ndarray:
    """Box-Muller on the generator's uniforms"""
    half = (size + 1) // 2
    u1, u2 = rng.random((2, half))
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    return np.concatenate((radius * np.cos(angle), radius * np.sin(angle)))[:size]


def transmit(x, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """BPSK s = 1 - 2x over AWGN; returns channel LLRs 2y/sigma^2"""
    s = 1.0 - 2.0 * np.asarray(x, dtype=float)
    if cfg.noiseless:
        return s * DECODER["noiseless_llr"]
    sigma2 = cfg.sigma2
    y = s + np.sqrt(sigma2) * gaussian_noise(rng, s.size)
    return 2.0 * y / sigma2


# ------------ genie instrumentation -----------------

@dataclass(frozen=True)
class EliminationRecord:
    """Where and how the transmitted path left the list"""
    bit: int
    penalty_count: int
    rank: int
    penalty_positions: Tuple[int, ...] = ()


@dataclass
class GenieReport:
    elimination: Optional[EliminationRecord]
    trace: PmrTrace
    penalty_positions: Tuple[int, ...]


def genie_instrument(channel_llrs,
                     spec: CodeSpec,
                     list_size: int,
                     true_u,
                     llr_mode: str = DECODER["llr_mode"]) -> GenieReport:
    """
    Replay the unshifted SCL pass while following the transmitted path:
    records the bit where its rank first leaves the retained window, the
    penalties it had collected by then, and the per-bit PMR trace.
    """
    decoder = ListDecoder(spec, list_size, llr_mode)
    state = decoder.start(channel_llrs, true_u)
    trace = PmrTrace()
    decoder.advance(state, spec.N, None, trace)
    genie = state.genie
    elimination = None
    if genie.elimination_bit is not None:
        elimination = EliminationRecord(
            bit=genie.elimination_bit,
            penalty_count=genie.penalty_count,
            rank=genie.elimination_rank,
            penalty_positions=tuple(genie.penalty_positions),
        )
    return GenieReport(elimination=elimination, trace=trace, penalty_positions=tuple(genie.penalty_positions))


def pmr_drop_set(traces: Iterable[PmrTrace], spec: Optional[CodeSpec] = None) -> Dict[int, int]:
    """Info positions where PMR_i - PMR_{i-1} < 0 in any trace, with occurrence counts"""
    counts: Counter = Counter()
    for trace in traces:
        pmr = trace.pmr
        if pmr.size < 2:
            continue
        bits = np.asarray(trace.bits)
        for idx in np.flatnonzero(np.diff(pmr) < 0) + 1:
            bit = int(bits[idx])
            if spec is None or spec.info_mask[bit]:
                counts[bit] += 1
    return dict(sorted(counts.items()))


# ------------ campaign records -----------------

@dataclass
class SchemeParams:
    """Driver settings; unset values take the scheme defaults"""
    k: Optional[int] = None
    max_attempts: Optional[int] = None
    critical_set: Optional[CriticalSet] = None
    constrained_m: Optional[int] = None
    elimination_stats: Optional[Mapping[int, int]] = None
    max_segment_attempts: Optional[Sequence[Optional[int]]] = None
    llr_mode: str = DECODER["llr_mode"]


@dataclass
class TrialRecord:
    success: bool
    attempts: int
    bit_errors: int
    undetected: bool = False
    shifted_false_positive: bool = False
    segment_attempts: Tuple[int, ...] = ()
    elimination: Optional[EliminationRecord] = None
    pmr_drops: Tuple[int, ...] = ()
    trace: Optional[PmrTrace] = None


@dataclass
class SimPoint:
    """Tallies for one Eb/N0 point; every field is an integer count"""
    ebno_db: float
    list_size: int
    info_bits: int
    segments: int = 1
    trials: int = 0
    frame_errors: int = 0
    bit_errors: int = 0
    undetected_errors: int = 0
    shifted_false_positives: int = 0
    total_attempts: int = 0
    total_segment_attempts: int = 0
    penalty_histogram: Counter = field(default_factory=Counter)
    elimination_histogram: Counter = field(default_factory=Counter)
    pmr_drop_histogram: Counter = field(default_factory=Counter)
    penalty_position_histogram: Counter = field(default_factory=Counter)
    sample_trace: Optional[PmrTrace] = None

    def add(self, record: TrialRecord):
        self.trials += 1
        self.frame_errors += int(not record.success)
        self.bit_errors += record.bit_errors
        self.undetected_errors += int(record.undetected)
        self.shifted_false_positives += int(record.shifted_false_positive)
        self.total_attempts += record.attempts
        self.total_segment_attempts += sum(record.segment_attempts) if record.segment_attempts else record.attempts
        if record.elimination is not None:
            self.penalty_histogram[record.elimination.penalty_count] += 1
            self.elimination_histogram[record.elimination.bit] += 1
            self.penalty_position_histogram.update(record.elimination.penalty_positions)
        self.pmr_drop_histogram.update(record.pmr_drops)
        if record.trace is not None and self.sample_trace is None:
            self.sample_trace = record.trace

    @property
    def fer(self) -> float:
        return self.frame_errors / self.trials if self.trials else 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.info_bits) if self.trials else 0.0

    @property
    def avg_attempts(self) -> float:
        """t/c, or t/(s*c) counting per-segment attempts for segmented runs"""
        if not self.trials:
            return 0.0
        if self.segments > 1:
            return self.total_segment_attempts / (self.segments * self.trials)
        return self.total_attempts / self.trials

    @property
    def avg_complexity(self) -> float:
        return self.avg_attempts * self.list_size


@dataclass
class SimReport:
    code: str
    scheme: str
    list_size: int
    segments: int
    critical_set_size: int
    shift: int
    seed: int
    rows: List[SimPoint] = field(default_factory=list)

    def elimination_stats(self) -> Dict[int, int]:
        """Elimination counts per bit over all points, for CS prioritization"""
        total: Counter = Counter()
        for row in self.rows:
            total.update(row.elimination_histogram)
        return dict(sorted(total.items()))


# ------------ campaign -----------------

class ShiftedPruningCampaign:
    """
    Monte Carlo FER campaign for one code, list size and decoding scheme.

    Every trial draws its bits and noise from its own counter-keyed stream,
    so results are identical for any worker count.
    """

    def __init__(self,
                 spec: CodeSpec,
                 list_size: int,
                 scheme: str = "plain",
                 params: Optional[SchemeParams] = None,
                 instrument: bool = False):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{scheme}', choose from {', '.join(SCHEMES)}")
        params = params or SchemeParams()
        self.spec = spec
        self.list_size = list_size
        self.scheme = scheme
        self.params = params
        self.instrument = instrument
        self.decoder = ListDecoder(spec, list_size, params.llr_mode)
        self.plan: Optional[SegmentPlan] = None

        cs = params.critical_set if params.critical_set is not None else generate_cs(spec)
        cs.validate(spec)
        if params.elimination_stats:
            cs = prioritize_cs(cs, params.elimination_stats)
        if scheme == "sp_constrained":
            if params.constrained_m is None:
                raise ValueError("sp_constrained needs the subset size m")
            cs = constrain_cs(cs, params.constrained_m)
        self.critical_set = cs

        default_k = max(list_size // 2, 1) if scheme == "sp_constrained" else list_size
        self.k = default_k if params.k is None else params.k
        if not 0 <= self.k <= list_size:
            raise ValueError(f"shift k={self.k} outside [0, {list_size}]")
        self.max_attempts = len(cs) if params.max_attempts is None else params.max_attempts
        if not 0 <= self.max_attempts <= len(cs) + 1:
            raise ValueError(f"max_attempts={self.max_attempts} outside [0, {len(cs) + 1}]")
        if scheme == "sp_segmented":
            self.plan = SegmentPlan.equal_split(spec, params.max_segment_attempts)

    @property
    def segments(self) -> int:
        return self.plan.count if self.plan is not None else 1

    def decode(self, channel_llrs) -> DecodeOutcome:
        if self.scheme == "plain":
            return sp_decode_schedules(channel_llrs, self.spec, self.list_size, [], decoder=self.decoder)
        if self.scheme == "sp_segmented":
            return sp_decode_segmented(channel_llrs, self.spec, self.list_size, self.plan,
                                       self.critical_set, self.k, decoder=self.decoder)
        return sp_decode(channel_llrs, self.spec, self.list_size, self.critical_set,
                         self.max_attempts, self.k, decoder=self.decoder)

    def run_trial(self, cfg: ChannelConfig, point_index: int, trial_index: int) -> TrialRecord:
        spec = self.spec
        rng = trial_rng(cfg.seed, point_index, trial_index)
        info = rng.integers(0, 2, size=spec.K, dtype=np.uint8)
        frame = frame_to_u(info, spec)
        llrs = transmit(polar_transform(frame.u_vector), cfg, rng)

        outcome = self.decode(llrs)
        bit_errors = int(np.count_nonzero(extract_info(outcome.u_hat, spec) != info))
        correct = outcome.success and bit_errors == 0
        undetected = outcome.success and bit_errors > 0
        record = TrialRecord(
            success=correct,
            attempts=outcome.attempts,
            bit_errors=bit_errors,
            undetected=undetected,
            shifted_false_positive=undetected and (outcome.attempt_index or 0) > 0,
            segment_attempts=outcome.segment_attempts,
        )
        baseline_ok = correct and outcome.attempt_index == 0
        if self.instrument and not baseline_ok:
            report = genie_instrument(llrs, spec, self.list_size, frame.u_vector, self.params.llr_mode)
            record.elimination = report.elimination
            record.pmr_drops = tuple(pmr_drop_set([report.trace], spec))
            record.trace = report.trace
        return record

    def run_point(self,
                  cfg: ChannelConfig,
                  point_index: int,
                  min_errors: int,
                  max_trials: int,
                  executor: Optional[ProcessPoolExecutor] = None,
                  workers: int = 1,
                  verbose: bool = False) -> SimPoint:
        """
        Run trials in index order until `min_errors` frame errors or
        `max_trials` trials; the stopping trial is the same for any batching.
        """
        point = SimPoint(ebno_db=cfg.ebno_db, list_size=self.list_size,
                         info_bits=self.spec.K, segments=self.segments)
        batch = CAMPAIGN["batch_size"]
        next_trial = 0
        progress = tqdm(total=min_errors, desc=f"Eb/N0={cfg.ebno_db:g} dB", unit="err",
                        disable=not verbose, leave=False)
        try:
            while next_trial < max_trials and point.frame_errors < min_errors:
                starts = range(next_trial, min(next_trial + batch * workers, max_trials), batch)
                jobs = [(s, min(s + batch, max_trials)) for s in starts]
                if executor is not None:
                    results = executor.map(_run_batch, [self] * len(jobs), [cfg] * len(jobs),
                                           [point_index] * len(jobs), [j[0] for j in jobs], [j[1] for j in jobs])
                else:
                    results = (_run_batch(self, cfg, point_index, a, b) for a, b in jobs)
                for records in results:
                    for record in records:
                        before = point.frame_errors
                        point.add(record)
                        progress.update(point.frame_errors - before)
                        if point.frame_errors >= min_errors:
                            break
                    if point.frame_errors >= min_errors:
                        break
                next_trial = jobs[-1][1]
                progress.set_postfix(trials=point.trials, fer=f"{point.fer:.2e}")
        finally:
            progress.close()
        return point

    def run(self,
            ebno_list: Sequence[float],
            min_errors: int = CAMPAIGN["min_errors"],
            max_trials: int = CAMPAIGN["max_trials"],
            seed: int = DEFAULT_SEED,
            workers: int = 1,
            noiseless: bool = False,
            rate: Optional[float] = None,
            verbose: bool = False) -> SimReport:
        if min_errors < 1 or max_trials < 1:
            raise ValueError("stop rule needs min_errors >= 1 and max_trials >= 1")
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        report = SimReport(
            code=self.spec.describe(), scheme=self.scheme, list_size=self.list_size,
            segments=self.segments, critical_set_size=len(self.critical_set),
            shift=self.k, seed=seed,
        )
        if verbose:
            print(f"\n{'='*70}")
            print(f"CAMPAIGN: {report.code}, L={self.list_size}, scheme={self.scheme}")
            print(f"{'='*70}")
            print(f"   |CS| = {len(self.critical_set)}, k = {self.k}, max attempts = {self.max_attempts}")
            print(f"   Stop rule: {min_errors} errors or {max_trials} trials, workers = {workers}")

        executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            for point_index, ebno in enumerate(ebno_list):
                cfg = ChannelConfig(ebno_db=float(ebno), rate_for_normalization=rate or self.spec.rate,
                                    seed=seed, noiseless=noiseless)
                point = self.run_point(cfg, point_index, min_errors, max_trials, executor, workers, verbose)
                report.rows.append(point)
                if verbose:
                    print(f"   ✓ Eb/N0 {point.ebno_db:5.2f} dB: FER {point.fer:.3e} "
                          f"({point.frame_errors}/{point.trials}), avg complexity {point.avg_complexity:.3f}")
        finally:
            if executor is not None:
                executor.shutdown()
        return report


def _run_batch(campaign: ShiftedPruningCampaign, cfg: ChannelConfig, point_index: int,
               start: int, stop: int) -> List[TrialRecord]:
    return [campaign.run_trial(cfg, point_index, t) for t in range(start, stop)]


def run_campaign(spec: CodeSpec,
                 list_size: int,
                 scheme: str,
                 params: Optional[SchemeParams],
                 ebno_list: Sequence[float],
                 min_errors: int = CAMPAIGN["min_errors"],
                 max_trials: int = CAMPAIGN["max_trials"],
                 seed: int = DEFAULT_SEED,
                 workers: int = 1,
                 instrument: bool = False,
                 noiseless: bool = False,
                 rate: Optional[float] = None,
                 verbose: bool = False) -> SimReport:
    """Validate the scheme, then sweep the Eb/N0 points"""
    campaign = ShiftedPruningCampaign(spec, list_size, scheme, params, instrument)
    return campaign.run(ebno_list, min_errors, max_trials, seed, workers, noiseless, rate, verbose)
