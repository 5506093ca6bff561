"""Discrete-time brick-wall symmetric exclusion process.

Hard-core particles hop on an open chain of L sites. One time step applies
two half-layers of two-site gates: even bonds (0,1), (2,3), ... first, then
odd bonds (1,2), (3,4), ... Each gate swaps the two occupations with
probability 1/2 and does nothing otherwise. Transferred charge Q counts net
left-to-right crossings of the central bond (L/2 - 1, L/2).

Three routes to the statistics of Q live here:

* a vectorized Monte Carlo sampler over independent trajectories,
* an exact tilted transfer contraction at small L (state space 2^L), with
  moment accumulators that yield E[Q^m] to machine precision,
* an exact mean-transfer map at any L (the mean density evolves in closed
  form because swaps are linear in the occupations).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from . import core
from .core import Histogram, ModelParams, TransferRecord

_EXACT_MAX_SITES = 14


def layer_bond_lefts(L: int, parity: int) -> np.ndarray:
    """Left site index of every bond in the even (parity 0) or odd layer."""
    if parity not in (0, 1):
        raise ValueError("parity must be 0 (even bonds) or 1 (odd bonds)")
    return np.arange(parity, L - 1, 2)


def central_bond(L: int) -> tuple[int, int]:
    """The counted bond: the two sites straddling the chain midpoint."""
    return (L // 2 - 1, L // 2)


@dataclass(frozen=True)
class SepRunConfig:
    params: ModelParams
    n_samples: int
    lambda_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.params.n_chains != 1:
            raise ValueError("SEP runs use a single chain")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class SepResult:
    histogram: Histogram
    lambda_grid: np.ndarray | None = None
    cgf: np.ndarray | None = None
    batch_histograms: tuple[Histogram, ...] | None = None


def brickwall_step(state: np.ndarray, parity: int, rng: np.random.Generator,
                   record: TransferRecord) -> TransferRecord:
    """Apply one half-layer to a single occupation row, in place.

    Reference implementation, one trajectory at a time; the sampler uses the
    vectorized kernel below. Returns the updated transfer record.
    """
    L = state.shape[0]
    cb = central_bond(L)
    q = record.q[0]
    for i in layer_bond_lefts(L, parity):
        if rng.random() < 0.5:
            if (i, i + 1) == cb:
                # left-to-right hop counts +1
                q += int(state[i]) - int(state[i + 1])
            state[i], state[i + 1] = state[i + 1], state[i]
    return TransferRecord(q=(q,), t=record.t)


def _coin_rows(rng: np.random.Generator, n_rows: int, width: int) -> np.ndarray:
    """(n_rows, width) array of independent fair bits, 64 per drawn word."""
    n_words = (width + 63) // 64
    words = rng.integers(0, 2**64, size=(n_rows, n_words), dtype=np.uint64)
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :width]


def _initial_occupations(params: ModelParams, rng: np.random.Generator,
                         width: int) -> np.ndarray:
    """Site-major (L, width) batch of initial occupations."""
    L = params.L
    rho_l, rho_r = params.densities
    state = np.empty((L, width), dtype=np.uint8)
    half = L // 2
    for rows, rho in ((slice(0, half), rho_l), (slice(half, L), rho_r)):
        if rho in (0.0, 1.0):
            state[rows] = np.uint8(rho)
        else:
            u = rng.random((rows.stop - rows.start, width), dtype=np.float32)
            state[rows] = u < np.float32(rho)
    return state


def _batch_transfer_counts(params: ModelParams, batch_index: int,
                           batch_size: int) -> np.ndarray:
    """Bincount of Q + t over one batch of independent trajectories."""
    rng = core.stream(params.seed, "sep-mc", batch_index)
    L, t = params.L, params.t
    state = _initial_occupations(params, rng, batch_size)
    q = np.zeros(batch_size, dtype=np.int32)
    cb_left = central_bond(L)[0]
    for _ in range(t):
        for parity in (0, 1):
            lefts = layer_bond_lefts(L, parity)
            if lefts.size == 0:
                continue
            coins = _coin_rows(rng, lefts.size, batch_size)
            sl = state[lefts[0]:L - 1:2]
            sr = state[lefts[0] + 1:L:2]
            if cb_left % 2 == parity:
                k = (cb_left - parity) // 2
                fired = coins[k]
                q += fired * (sl[k].astype(np.int32) - sr[k].astype(np.int32))
            diff = (sl ^ sr) & coins
            sl ^= diff
            sr ^= diff
    return np.bincount(q + t, minlength=2 * t + 1)


def run_sep_fcs(config: SepRunConfig, keep_batches: bool = False) -> SepResult:
    """Sample n_samples trajectories and histogram the transferred charge.

    Work is split into fixed-size batches with independent random streams,
    merged in batch order, so the result depends only on the seed. With
    keep_batches=True the per-batch histograms are returned as well (the
    ensemble for the kurtosis proxy).
    """
    params, n = config.params, config.n_samples
    t = params.t
    total = np.zeros(2 * t + 1, dtype=np.int64)
    batches = []
    for batch_index, size in core.batch_sizes(n):
        counts = _batch_transfer_counts(params, batch_index, size)
        total += counts
        if keep_batches:
            batches.append(_histogram_from_counts(counts, t))
    hist = _histogram_from_counts(total, t)
    cgf = None
    if config.lambda_grid is not None:
        cgf = core.histogram_cgf(hist, np.asarray(config.lambda_grid, dtype=float))
    return SepResult(histogram=hist, lambda_grid=config.lambda_grid, cgf=cgf,
                     batch_histograms=tuple(batches) if keep_batches else None)


def _histogram_from_counts(counts: np.ndarray, t: int) -> Histogram:
    nz = np.nonzero(counts)[0]
    return Histogram({int(k - t): int(counts[k]) for k in nz})


def kurtosis_proxy(histograms: Sequence[Histogram]) -> float:
    """Mean fourth central moment over mean squared variance of an ensemble.

    For a single member this is the ordinary sample kurtosis; for many it is
    the replica-free proxy: each member contributes its own mu_4 and sigma^4
    before the ratio is taken.
    """
    if len(histograms) == 0:
        raise ValueError("kurtosis proxy needs at least one histogram")
    mu4s, var2s = [], []
    for h in histograms:
        m = core.central_moments(h, max_order=4)
        mu4s.append(m[4])
        var2s.append(m[2] ** 2)
    return float(np.mean(mu4s) / np.mean(var2s))


def _initial_distribution(params: ModelParams) -> np.ndarray:
    """Product Bernoulli distribution over all 2^L occupation bitmasks.

    Bit x of the state index is the occupation of site x.
    """
    rho_l, rho_r = params.densities
    p = np.ones(1)
    for site in range(params.L - 1, -1, -1):
        rho = rho_l if site < params.L // 2 else rho_r
        p = np.kron(p, np.array([1.0 - rho, rho]))
    return p


def _bond_swap_indices(L: int, x: int) -> tuple[np.ndarray, np.ndarray]:
    """States with (site x, site x+1) = (1, 0), and their swap partners."""
    s = np.arange(1 << L, dtype=np.int64)
    occupied_left = np.where(((s >> x) & 3) == 1)[0]
    return occupied_left, occupied_left + (1 << (x + 1)) - (1 << x)


def exact_sep_cgf(params: ModelParams, lam) -> np.ndarray | complex:
    """Z(lambda, t) by contracting the tilted one-step transfer exactly.

    Every bond mixes each swap pair with weight 1/2; on the central bond the
    left-to-right amplitude carries e^{+i lambda} and the reverse e^{-i
    lambda}, so the all-ones contraction of the evolved vector is the moment
    generating function of Q. Needs 2^L state vectors, so L <= 14.
    """
    if params.L > _EXACT_MAX_SITES:
        raise ValueError(f"exact transfer needs L <= {_EXACT_MAX_SITES}")
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    L, t = params.L, params.t
    cb_left = central_bond(L)[0]
    p = np.tile(_initial_distribution(params).astype(complex), (lam_arr.size, 1))
    wp = np.exp(1j * lam_arr)[:, None]
    bond_idx = {x: _bond_swap_indices(L, x)
                for parity in (0, 1) for x in layer_bond_lefts(L, parity)}
    for _ in range(t):
        for parity in (0, 1):
            for x in layer_bond_lefts(L, parity):
                ia, ib = bond_idx[x]
                pa = p[:, ia]
                pb = p[:, ib]
                if x == cb_left:
                    p[:, ia] = 0.5 * pa + 0.5 * pb / wp
                    p[:, ib] = 0.5 * wp * pa + 0.5 * pb
                else:
                    avg = 0.5 * (pa + pb)
                    p[:, ia] = avg
                    p[:, ib] = avg
    z = p.sum(axis=1)
    return z if np.ndim(lam) else complex(z[0])


def exact_sep_moments(params: ModelParams, max_order: int = 4) -> np.ndarray:
    """Raw moments E[Q^m], m = 0..max_order, exactly.

    Propagates the joint objects E[Q^m 1_state] through the untilted
    dynamics; a central-bond swap shifts Q by +-1, which binomially mixes the
    orders. No differentiation step, so the moments come out at machine
    precision rather than finite-difference accuracy.
    """
    if params.L > _EXACT_MAX_SITES:
        raise ValueError(f"exact transfer needs L <= {_EXACT_MAX_SITES}")
    L, t = params.L, params.t
    cb_left = central_bond(L)[0]
    acc = np.zeros((max_order + 1, 1 << L))
    acc[0] = _initial_distribution(params)
    bond_idx = {x: _bond_swap_indices(L, x)
                for parity in (0, 1) for x in layer_bond_lefts(L, parity)}
    for _ in range(t):
        for parity in (0, 1):
            for x in layer_bond_lefts(L, parity):
                ia, ib = bond_idx[x]
                if x == cb_left:
                    olda = acc[:, ia].copy()
                    oldb = acc[:, ib].copy()
                    for m in range(max_order, -1, -1):
                        shift_a = sum(comb(m, j) * oldb[j] * (-1) ** (m - j)
                                      for j in range(m + 1))
                        shift_b = sum(comb(m, j) * olda[j]
                                      for j in range(m + 1))
                        acc[m, ia] = 0.5 * olda[m] + 0.5 * shift_a
                        acc[m, ib] = 0.5 * shift_b + 0.5 * oldb[m]
                else:
                    avg = 0.5 * (acc[:, ia] + acc[:, ib])
                    acc[:, ia] = avg
                    acc[:, ib] = avg
    return acc.sum(axis=1)


def exact_sep_cumulants(params: ModelParams, max_order: int = 4) -> np.ndarray:
    """Cumulants C_1..C_max_order from the exact raw moments."""
    if max_order > 4:
        raise ValueError("cumulant conversion implemented through order 4")
    m = exact_sep_moments(params, max_order=max_order)
    out = np.empty(max_order)
    out[0] = m[1]
    if max_order >= 2:
        out[1] = m[2] - m[1] ** 2
    if max_order >= 3:
        out[2] = m[3] - 3 * m[2] * m[1] + 2 * m[1] ** 3
    if max_order >= 4:
        out[3] = (m[4] - 4 * m[3] * m[1] - 3 * m[2] ** 2
                  + 12 * m[2] * m[1] ** 2 - 6 * m[1] ** 4)
    return out


def exact_mean_transfer(params: ModelParams) -> float:
    """E[Q] at any L: the mean density obeys a closed pair-averaging map.

    Each swap replaces both bond densities by their average in expectation,
    and the expected central-bond current per half-layer is half the density
    difference, with two-point terms cancelling identically.
    """
    L, t = params.L, params.t
    rho_l, rho_r = params.densities
    rho = np.concatenate([np.full(L // 2, rho_l), np.full(L - L // 2, rho_r)])
    cb_left = central_bond(L)[0]
    q = 0.0
    for _ in range(t):
        for parity in (0, 1):
            lefts = layer_bond_lefts(L, parity)
            if lefts.size == 0:
                continue
            if cb_left % 2 == parity:
                q += 0.5 * (rho[cb_left] - rho[cb_left + 1])
            avg = 0.5 * (rho[lefts] + rho[lefts + 1])
            rho[lefts] = avg
            rho[lefts + 1] = avg
    return q
