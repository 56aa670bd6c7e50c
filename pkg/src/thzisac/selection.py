"""Subarray enumeration, ranking, spectral efficiency, and selection search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from .beamformer import HybridBeamformer, design_hybrid
from .config import SystemConfig

FULL_ENUMERATION_BUDGET = 100_000


class SelectionBudgetError(RuntimeError):
    """Raised when an enumeration would exceed the candidate budget."""


def count_configs(n: int, k: int) -> int:
    """Exact number of k-subsets of n antennas (arbitrary precision)."""
    if k < 0 or n < 0 or k > n:
        raise ValueError(f"need 0 <= K <= N, got N={n}, K={k}")
    return math.comb(n, k)


def unrank_combination(p: int, n: int, k: int) -> tuple[int, ...]:
    """The p-th (1-based) K-subset of {1..N} in lexicographic order."""
    total = count_configs(n, k)
    if not 1 <= p <= total:
        raise IndexError(f"rank p={p} outside 1..{total}")
    rest = p - 1
    out = []
    lo = 1
    for slot in range(k, 0, -1):
        for value in range(lo, n - slot + 2):
            block = math.comb(n - value, slot - 1)
            if rest < block:
                out.append(value)
                lo = value + 1
                break
            rest -= block
    return tuple(out)


def rank_combination(indices, n: int, k: int) -> int:
    """Inverse of unrank_combination; indices must be a sorted K-subset of 1..N."""
    idx = tuple(indices)
    if len(idx) != k or len(set(idx)) != k:
        raise ValueError(f"expected {k} distinct indices, got {idx}")
    if any(not 1 <= v <= n for v in idx) or list(idx) != sorted(idx):
        raise ValueError(f"indices must be sorted within 1..{n}, got {idx}")
    p = 1
    prev = 0
    for slot, value in enumerate(idx):
        for skipped in range(prev + 1, value):
            p += math.comb(n - skipped, k - slot - 1)
        prev = value
    return p


@dataclass(frozen=True)
class SubarrayConfig:
    """One selected subarray: sorted 1-based indices plus combinadic rank."""

    antenna_indices: tuple[int, ...]
    n_antennas: int
    rank_p: int

    @property
    def k_selected(self) -> int:
        return len(self.antenna_indices)

    @property
    def indices0(self) -> np.ndarray:
        """Zero-based index array (for slicing channel columns)."""
        return np.array(self.antenna_indices) - 1

    @property
    def selection_matrix(self) -> np.ndarray:
        """Binary N x K matrix whose k-th column selects the k-th antenna."""
        q = np.zeros((self.n_antennas, self.k_selected))
        q[self.indices0, np.arange(self.k_selected)] = 1.0
        return q


def subarray_from_indices(indices, n: int) -> SubarrayConfig:
    idx = tuple(sorted(int(v) for v in indices))
    return SubarrayConfig(antenna_indices=idx, n_antennas=n,
                          rank_p=rank_combination(idx, n, len(idx)))


def subarray_from_rank(p: int, n: int, k: int) -> SubarrayConfig:
    return SubarrayConfig(antenna_indices=unrank_combination(p, n, k),
                          n_antennas=n, rank_p=p)


def subarray_overlap(a: SubarrayConfig, b: SubarrayConfig) -> int:
    """Number of shared antennas; equals Trace{Q_a Q_b^T} counted as overlap,
    maximized at K exactly when the subarrays coincide."""
    return len(set(a.antenna_indices) & set(b.antenna_indices))


@dataclass(frozen=True)
class GroupConfig:
    """Grouped selection geometry: N/G disjoint groups of G consecutive antennas."""

    n_antennas: int
    k_selected: int
    group_size: int

    def __post_init__(self):
        if self.n_antennas % self.group_size:
            raise ValueError(f"N={self.n_antennas} not divisible by G={self.group_size}")
        if self.k_selected % self.group_size:
            raise ValueError(f"K={self.k_selected} not divisible by G={self.group_size}")

    @property
    def n_groups(self) -> int:
        return self.n_antennas // self.group_size

    @property
    def k_groups(self) -> int:
        return self.k_selected // self.group_size

    @property
    def n_configs(self) -> int:
        return count_configs(self.n_groups, self.k_groups)


def gss_subarrays(gc: GroupConfig) -> Iterator[SubarrayConfig]:
    """Yield the grouped candidates in lexicographic group order.

    Selected group g (1-based) expands to antennas (g-1)G+1 .. gG, so the
    expanded index lists are lexicographic as well and rank_p is increasing.
    """
    g = gc.group_size
    for groups in combinations(range(1, gc.n_groups + 1), gc.k_groups):
        idx = tuple(a for grp in groups for a in range((grp - 1) * g + 1, grp * g + 1))
        yield subarray_from_indices(idx, gc.n_antennas)


def full_subarrays(n: int, k: int) -> Iterator[SubarrayConfig]:
    for p, idx in enumerate(combinations(range(1, n + 1), k), start=1):
        yield SubarrayConfig(antenna_indices=idx, n_antennas=n, rank_p=p)


def enumerate_candidates(cfg: SystemConfig, mode: str,
                         budget: int = FULL_ENUMERATION_BUDGET) -> list[SubarrayConfig]:
    """Candidate list for `mode` in {"full", "gss"}, guarded by the budget."""
    if mode == "full":
        total = count_configs(cfg.N, cfg.K)
        if total > budget:
            raise SelectionBudgetError(
                f"full enumeration has {total} candidates (> budget {budget}); "
                "use gss or sequential mode")
        return list(full_subarrays(cfg.N, cfg.K))
    if mode == "gss":
        gc = GroupConfig(cfg.N, cfg.K, cfg.G)
        if gc.n_configs > budget:
            raise SelectionBudgetError(
                f"grouped enumeration has {gc.n_configs} candidates (> budget "
                f"{budget}); increase G or use sequential mode")
        return list(gss_subarrays(gc))
    raise ValueError(f"unknown enumeration mode {mode!r}")


def spectral_efficiency_per_subcarrier(H_sub: np.ndarray, analog: np.ndarray,
                                       digital: np.ndarray, sigma2: float,
                                       n_streams: int) -> np.ndarray:
    """log2 det(I + (1/(N_ds sigma2)) H F F^H H^H) for every subcarrier.

    H_sub is (M, N_prime, K). The argument of the determinant is symmetrized
    before evaluation to absorb numerical non-Hermitian drift.
    """
    m_sub, n_prime, _ = H_sub.shape
    out = np.zeros(m_sub)
    c = 1.0 / (n_streams * sigma2)
    for mi in range(m_sub):
        g = H_sub[mi] @ (analog @ digital[mi])
        a = np.eye(n_prime) + c * (g @ g.conj().T)
        a = 0.5 * (a + a.conj().T)
        sign, logdet = np.linalg.slogdet(a)
        out[mi] = logdet / np.log(2.0)
    return out


def spectral_efficiency(H_sub: np.ndarray, bf: HybridBeamformer, sigma2: float,
                        n_streams: int) -> float:
    """Total spectral efficiency summed over subcarriers [bits/s/Hz]."""
    return float(np.sum(spectral_efficiency_per_subcarrier(
        H_sub, bf.analog, bf.digital, sigma2, n_streams)))


@dataclass
class CandidateRecord:
    subarray: SubarrayConfig
    beamformer: HybridBeamformer
    se_total: float
    se_per_subcarrier: np.ndarray


@dataclass
class SelectionResult:
    """Winner of a subarray search plus bookkeeping for reporting."""

    subarray: SubarrayConfig
    beamformer: HybridBeamformer
    se_total: float
    se_per_subcarrier: np.ndarray
    candidate_index: int            # 1-based position in the enumeration
    n_candidates: int
    candidates: list[CandidateRecord] | None = None
    peak_retained: int | None = None


def _design_seed(design_seed: int, subarray: SubarrayConfig) -> np.random.Generator:
    # rank_p can exceed 2**64 for large arrays; SeedSequence accepts big ints
    return np.random.default_rng((design_seed, subarray.rank_p))


def evaluate_candidate(subarray: SubarrayConfig, eval_matrices: np.ndarray,
                       F_C_full: np.ndarray, F_S_full: np.ndarray,
                       cfg: SystemConfig, design_seed: int,
                       use_bsc: bool = True,
                       directions_sin: np.ndarray | None = None,
                       **design_kwargs) -> CandidateRecord:
    """Design the hybrid beamformer for one candidate and score its SE."""
    idx0 = subarray.indices0
    bf = design_hybrid(idx0, F_C_full, F_S_full, cfg,
                       rng=_design_seed(design_seed, subarray),
                       use_bsc=use_bsc, directions_sin=directions_sin,
                       **design_kwargs)
    se_m = spectral_efficiency_per_subcarrier(eval_matrices[:, :, idx0],
                                              bf.analog, bf.digital,
                                              cfg.sigma2, cfg.N_ds)
    return CandidateRecord(subarray=subarray, beamformer=bf,
                           se_total=float(se_m.sum()), se_per_subcarrier=se_m)


def exhaustive_select(eval_matrices: np.ndarray, F_C_full: np.ndarray,
                      F_S_full: np.ndarray, cfg: SystemConfig,
                      mode: str = "gss", design_seed: int = 0,
                      use_bsc: bool = True,
                      directions_sin: np.ndarray | None = None,
                      budget: int = FULL_ENUMERATION_BUDGET,
                      keep_candidates: bool = True,
                      **design_kwargs) -> SelectionResult:
    """Evaluate every candidate and return the SE maximizer.

    Ties break toward the smallest enumeration index (scan order is rank
    order). All candidate records are retained when keep_candidates, matching
    the memory behaviour the sequential search is designed to avoid.
    """
    candidates = enumerate_candidates(cfg, mode, budget)
    records = []
    best = None
    best_idx = 0
    for ci, sub in enumerate(candidates, start=1):
        rec = evaluate_candidate(sub, eval_matrices, F_C_full, F_S_full, cfg,
                                 design_seed, use_bsc, directions_sin,
                                 **design_kwargs)
        if keep_candidates:
            records.append(rec)
        if best is None or rec.se_total > best.se_total:
            best, best_idx = rec, ci
    return SelectionResult(subarray=best.subarray, beamformer=best.beamformer,
                           se_total=best.se_total,
                           se_per_subcarrier=best.se_per_subcarrier,
                           candidate_index=best_idx, n_candidates=len(candidates),
                           candidates=records if keep_candidates else None,
                           peak_retained=len(records) if keep_candidates else None)


def sequential_select(eval_matrices: np.ndarray, F_C_full: np.ndarray,
                      F_S_full: np.ndarray, cfg: SystemConfig,
                      n_blocks: int, mode: str = "gss", design_seed: int = 0,
                      use_bsc: bool = True,
                      directions_sin: np.ndarray | None = None,
                      budget: int = FULL_ENUMERATION_BUDGET,
                      **design_kwargs) -> SelectionResult:
    """Block-partitioned search keeping only one block of candidate records.

    Candidate ranks are split into n_blocks contiguous blocks (the last block
    may be short); the per-block best is carried across blocks with a strict
    improvement rule, so the result matches exhaustive_select exactly when the
    per-candidate designs are seeded identically. peak_retained reports the
    largest number of simultaneously retained candidate records.
    """
    candidates = enumerate_candidates(cfg, mode, budget)
    total = len(candidates)
    n_blocks = max(1, min(n_blocks, total))
    block_len = math.ceil(total / n_blocks)
    carried = None
    carried_idx = 0
    peak = 0
    for b in range(n_blocks):
        block = candidates[b * block_len:(b + 1) * block_len]
        if not block:
            break
        records = []
        for offset, sub in enumerate(block):
            records.append((b * block_len + offset + 1,
                            evaluate_candidate(sub, eval_matrices, F_C_full,
                                               F_S_full, cfg, design_seed,
                                               use_bsc, directions_sin,
                                               **design_kwargs)))
        peak = max(peak, len(records) + (1 if carried is not None else 0))
        block_idx, block_best = max(records, key=lambda item: item[1].se_total)
        # rank-order tie-break: the earlier candidate wins ties
        for idx, rec in records:
            if rec.se_total == block_best.se_total and idx < block_idx:
                block_idx, block_best = idx, rec
        if carried is None or block_best.se_total > carried.se_total:
            carried, carried_idx = block_best, block_idx
        records.clear()  # per-block intermediates are dropped here
    return SelectionResult(subarray=carried.subarray, beamformer=carried.beamformer,
                           se_total=carried.se_total,
                           se_per_subcarrier=carried.se_per_subcarrier,
                           candidate_index=carried_idx, n_candidates=total,
                           candidates=None, peak_retained=peak)


def dirichlet_sinc(a, n: int):
    """sin(N pi a) / (N sin(pi a)) with the removable integer singularities
    evaluated by their limit (-1)^{a (N-1)}."""
    a_arr = np.asarray(a, dtype=float)
    near_int = np.isclose(a_arr, np.round(a_arr), atol=1e-12)
    safe = np.where(near_int, 0.5, a_arr)  # placeholder away from the poles
    out = np.sin(n * np.pi * safe) / (n * np.sin(np.pi * safe))
    limit = np.where((np.round(a_arr).astype(np.int64) * (n - 1)) % 2 == 0, 1.0, -1.0)
    out = np.where(near_int, limit, out)
    return float(out) if np.isscalar(a) or np.ndim(a) == 0 else out


def array_gain(theta: float, vartheta: float, subarray: SubarrayConfig,
               best_subarray: SubarrayConfig, eta_m: float = 1.0) -> float:
    """Normalized squared overlap |u_{p*}(theta)^H u_p(vartheta)|^2 / N^2.

    u_p(x) = Q_p^T a(x) with unnormalized steering entries (unit modulus), so
    the full array at eta_m = 1 and vartheta = theta attains gain one and
    subarray gains are bounded by (K/N)^2. The theta-side vector is evaluated
    at the subcarrier-squinted spatial direction eta_m sin(theta), so the peak
    over vartheta sits at sin(vartheta) = eta_m sin(theta).
    """
    n = subarray.n_antennas
    idx_best = best_subarray.indices0
    idx = subarray.indices0
    u_best = np.exp(-1j * np.pi * idx_best * eta_m * np.sin(theta))
    u_cand = np.exp(-1j * np.pi * idx * np.sin(vartheta))
    return float(np.abs(np.vdot(u_best, u_cand)) ** 2 / n**2)


def array_gain_profile(theta: float, varthetas: np.ndarray,
                       subarray: SubarrayConfig, best_subarray: SubarrayConfig,
                       eta_m: float = 1.0) -> np.ndarray:
    """array_gain evaluated on a grid of candidate directions (vectorized)."""
    n = subarray.n_antennas
    u_best = np.exp(-1j * np.pi * best_subarray.indices0 * eta_m * np.sin(theta))
    phases = -1j * np.pi * np.outer(subarray.indices0, np.sin(varthetas))
    u = np.exp(phases)
    return np.abs(u_best.conj() @ u) ** 2 / n**2
