"""Shared conventions, deterministic RNG streams, and histogram statistics.

Geometry conventions used by every engine in this package:

* Sites are indexed ``0 .. L-1`` with ``L`` even.  The left half is
  ``0 .. L/2-1``, the right half is ``L/2 .. L-1``.
* One time step is an even half-step followed by an odd half-step.
  The even half-step applies gates on bonds ``(0,1), (2,3), ...``; the
  odd half-step on bonds ``(1,2), (3,4), ...``.  Boundaries are open and
  unpaired edge sites idle.
* The central bond is ``(L/2-1, L/2)``.  Transfer of one charge across
  it from left to right counts as ``+1``; right to left counts as
  ``-1``.  A counting field ``lambda`` weights a ``+1`` crossing by
  ``exp(+i lambda)``.

Randomness is drawn from counter-based streams: every (engine, batch)
pair owns a generator seeded by ``SeedSequence(master_seed,
spawn_key=(engine_code, *indices))``.  Batch boundaries are fixed
constants of each engine, so results are byte-identical no matter how
batches are distributed over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "ENGINE_CODES",
    "DEFAULT_BATCH_SIZE",
    "ModelParams",
    "LadderState",
    "TransferRecord",
    "Histogram",
    "JointHistogram",
    "CumulantEstimate",
    "stream",
    "batch_sizes",
    "interchain_coupling",
    "density_from_mu",
    "sample_initial_state",
    "central_moments",
    "cumulants_from_histogram",
    "histogram_cgf",
    "bootstrap_ratio",
]

# Stable engine codes; changing one silently reshuffles every stream
# derived from it, so codes are append-only.
ENGINE_CODES: Mapping[str, int] = {
    "sep-mc": 1,
    "coupled-mc": 2,
    "replica-haar-mc": 3,
    "quantum": 4,
    "bootstrap": 5,
    "initial-state": 6,
}

# Samples per stream batch in the Monte Carlo engines.  Part of the
# determinism contract: sample i lives in batch i // DEFAULT_BATCH_SIZE
# regardless of the number of workers.
DEFAULT_BATCH_SIZE: int = 1 << 16


def stream(master_seed: int, engine: str, *indices: int) -> np.random.Generator:
    """Return the deterministic generator for (engine, indices).

    The same arguments always produce the same stream, on any machine
    and with any worker layout.
    """
    code = ENGINE_CODES[engine]
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(code, *indices))
    return np.random.Generator(np.random.PCG64(seq))


def batch_sizes(n_samples: int,
                batch_size: int = DEFAULT_BATCH_SIZE) -> Iterator[tuple[int, int]]:
    """Yield (batch_index, size) pairs covering n_samples.

    The partition depends only on n_samples, so merging per-batch results in
    index order gives the same answer for any worker count.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    full, rest = divmod(n_samples, batch_size)
    for i in range(full):
        yield i, batch_size
    if rest:
        yield full, rest


def interchain_coupling(d: float) -> float:
    """Strength 1 / (4 d^4 - 1) of the pairwise inter-chain exchange.

    ``d`` is the neutral qudit dimension per site (local Hilbert space
    dimension 2 d).  Real d >= 1 is accepted; the stochastic engines stay
    well defined away from integer d.
    """
    if not d >= 1.0:
        raise ValueError(f"qudit dimension must be >= 1, got {d}")
    return 1.0 / (4.0 * d**4 - 1.0)


def density_from_mu(mu: float) -> float:
    """Mean filling exp(mu) / (1 + exp(mu)) of a chemical-potential-mu bath."""
    if math.isnan(mu):
        raise ValueError("mu must not be NaN")
    if mu == math.inf:
        return 1.0
    if mu == -math.inf:
        return 0.0
    return 1.0 / (1.0 + math.exp(-mu))


@dataclass(frozen=True)
class ModelParams:
    """Run parameters shared by the lattice engines.

    The two halves of the chain are filled i.i.d. with densities
    ``density_from_mu(+mu)`` on the left and ``density_from_mu(-mu)`` on
    the right; ``mu = inf`` is the domain wall.
    """

    L: int                      # number of sites, even, >= 2
    t: int                      # circuit depth in even+odd double layers
    mu: float = math.inf        # bias of the initial product state
    d: float | None = None      # qudit dimension, sets the coupling when given
    n_chains: int = 1           # replicas evolved jointly
    seed: int = 0               # master seed for every derived stream

    def __post_init__(self) -> None:
        if self.L < 2 or self.L % 2 != 0:
            raise ValueError(f"L must be even and >= 2, got {self.L}")
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if math.isnan(self.mu):
            raise ValueError("mu must not be NaN")
        if self.d is not None and not self.d >= 1.0:
            raise ValueError(f"d must be >= 1, got {self.d}")

    @property
    def coupling(self) -> float:
        """Inter-chain coupling derived from d (0 when d is not set)."""
        return 0.0 if self.d is None else interchain_coupling(self.d)

    @property
    def densities(self) -> tuple[float, float]:
        return density_from_mu(self.mu), density_from_mu(-self.mu)


@dataclass(frozen=True)
class LadderState:
    """Occupancies of n_chains chains of L sites, values in {0, 1}."""

    occupancy: np.ndarray  # uint8 array of shape (n_chains, L)

    def __post_init__(self) -> None:
        occ = np.asarray(self.occupancy, dtype=np.uint8)
        if occ.ndim != 2:
            raise ValueError("occupancy must be 2-d (n_chains, L)")
        if not np.isin(occ, (0, 1)).all():
            raise ValueError("occupancy entries must be 0 or 1")
        object.__setattr__(self, "occupancy", occ)

    @property
    def n_chains(self) -> int:
        return self.occupancy.shape[0]

    @property
    def L(self) -> int:
        return self.occupancy.shape[1]


@dataclass(frozen=True)
class TransferRecord:
    """Net central-bond transfer per chain after t steps of one trajectory."""

    q: tuple[int, ...]
    t: int

    def __post_init__(self) -> None:
        # one crossing opportunity per step, so |q| can never exceed t
        if any(abs(v) > self.t for v in self.q):
            raise ValueError(f"|q| exceeds t={self.t}: {self.q}")


def sample_initial_state(
    params: ModelParams, rng: np.random.Generator
) -> LadderState:
    """Draw the i.i.d. biased product initial condition for all chains."""
    rho_l, rho_r = params.densities
    half = params.L // 2
    p = np.empty(params.L)
    p[:half] = rho_l
    p[half:] = rho_r
    occ = (rng.random((params.n_chains, params.L)) < p).astype(np.uint8)
    return LadderState(occ)


class Histogram:
    """Integer-valued sample counts, mergeable across batches."""

    __slots__ = ("counts",)

    def __init__(self, counts: Mapping[int, int] | None = None) -> None:
        self.counts: dict[int, int] = {}
        if counts:
            for k, v in counts.items():
                if v < 0:
                    raise ValueError("negative count")
                if v:
                    self.counts[int(k)] = self.counts.get(int(k), 0) + int(v)

    @classmethod
    def from_samples(cls, values: Iterable[int]) -> "Histogram":
        h = cls()
        vals, cnts = np.unique(np.asarray(list(values), dtype=np.int64), return_counts=True)
        h.counts = {int(v): int(c) for v, c in zip(vals, cnts)}
        return h

    @property
    def n_samples(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "Histogram") -> "Histogram":
        out = Histogram(self.counts)
        for k, v in other.counts.items():
            out.counts[k] = out.counts.get(k, 0) + v
        return out

    def support(self) -> np.ndarray:
        return np.array(sorted(self.counts), dtype=np.int64)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        ks = self.support()
        return ks, np.array([self.counts[int(k)] for k in ks], dtype=np.int64)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Histogram) and self.counts == other.counts

    def __repr__(self) -> str:
        return f"Histogram(n={self.n_samples}, support={len(self.counts)})"


class JointHistogram:
    """Counts over tuples of per-chain transfers."""

    __slots__ = ("counts", "n_chains")

    def __init__(self, n_chains: int, counts: Mapping[tuple, int] | None = None) -> None:
        self.n_chains = n_chains
        self.counts: dict[tuple, int] = {}
        if counts:
            for k, v in counts.items():
                kk = tuple(int(x) for x in k)
                if len(kk) != n_chains:
                    raise ValueError("tuple arity mismatch")
                if v:
                    self.counts[kk] = self.counts.get(kk, 0) + int(v)

    @property
    def n_samples(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "JointHistogram") -> "JointHistogram":
        if other.n_chains != self.n_chains:
            raise ValueError("arity mismatch")
        out = JointHistogram(self.n_chains, self.counts)
        for k, v in other.counts.items():
            out.counts[k] = out.counts.get(k, 0) + v
        return out

    def marginal(self, chain: int) -> Histogram:
        h = Histogram()
        for k, v in self.counts.items():
            h.counts[k[chain]] = h.counts.get(k[chain], 0) + v
        return h

    def moment(self, powers: Sequence[int]) -> float:
        """Raw mixed moment E[prod_a q_a^powers[a]]."""
        if len(powers) != self.n_chains:
            raise ValueError("powers arity mismatch")
        n = self.n_samples
        if n == 0:
            raise ValueError("empty histogram")
        tot = 0.0
        for k, v in self.counts.items():
            term = float(v)
            for q, p in zip(k, powers):
                term *= q**p
            tot += term
        return tot / n


@dataclass(frozen=True)
class CumulantEstimate:
    order: int
    value: float
    stderr: float
    n_samples: int


def central_moments(hist: Histogram, max_order: int = 4) -> np.ndarray:
    """Population central moments [mean, mu2, ..., mu_max_order]."""
    ks, cs = hist.as_arrays()
    n = cs.sum()
    if n == 0:
        raise ValueError("empty histogram")
    w = cs / n
    mean = float(np.dot(w, ks))
    out = np.empty(max_order + 1)
    out[0] = 1.0
    out[1] = mean
    dk = ks - mean
    for m in range(2, max_order + 1):
        out[m] = float(np.dot(w, dk**m))
    return out


def _cumulants_from_moments(mom: np.ndarray) -> np.ndarray:
    """[C1..C4] from [1, mean, mu2, mu3, mu4]."""
    c = np.empty(4)
    c[0] = mom[1]
    c[1] = mom[2]
    c[2] = mom[3]
    c[3] = mom[4] - 3.0 * mom[2] ** 2
    return c


def cumulants_from_histogram(
    hist: Histogram,
    n_bootstrap: int = 200,
    rng: np.random.Generator | None = None,
) -> list[CumulantEstimate]:
    """Cumulants C1..C4 with percentile-bootstrap standard errors.

    C1 = mean, C2 = mu2, C3 = mu3, C4 = mu4 - 3 mu2^2, all from
    population central moments of the histogram.  Standard errors come
    from multinomial resampling of the counts (200 resamples by
    default); pass ``n_bootstrap=0`` to skip them.
    """
    ks, cs = hist.as_arrays()
    n = int(cs.sum())
    base = _cumulants_from_moments(central_moments(hist, 4))
    if n_bootstrap <= 0 or len(ks) < 2:
        return [
            CumulantEstimate(m + 1, float(base[m]), 0.0, n) for m in range(4)
        ]
    if rng is None:
        rng = stream(0, "bootstrap")
    probs = cs / n
    draws = rng.multinomial(n, probs, size=n_bootstrap)
    reps = np.empty((n_bootstrap, 4))
    for i, row in enumerate(draws):
        w = row / n
        mean = np.dot(w, ks)
        dk = ks - mean
        mu2 = np.dot(w, dk**2)
        mu3 = np.dot(w, dk**3)
        mu4 = np.dot(w, dk**4)
        reps[i] = (mean, mu2, mu3, mu4 - 3 * mu2**2)
    err = reps.std(axis=0, ddof=1)
    return [
        CumulantEstimate(m + 1, float(base[m]), float(err[m]), n)
        for m in range(4)
    ]


def histogram_cgf(hist: Histogram, lambdas: np.ndarray) -> np.ndarray:
    """Empirical cumulant generating function log <exp(i lambda q)>."""
    ks, cs = hist.as_arrays()
    n = cs.sum()
    lam = np.asarray(lambdas, dtype=float)
    z = np.exp(1j * np.outer(lam, ks)) @ (cs / n)
    return np.log(z)


def bootstrap_ratio(
    num: np.ndarray,
    den: np.ndarray,
    n_bootstrap: int = 200,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """mean(num)/mean(den) over batches, with a bootstrap stderr.

    Used for the kurtosis proxy, where numerator and denominator are
    per-batch moment estimates and must be resampled together.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if num.shape != den.shape or num.ndim != 1 or num.size == 0:
        raise ValueError("num and den must be equal-length 1-d arrays")
    value = num.mean() / den.mean()
    if num.size < 2 or n_bootstrap <= 0:
        return float(value), 0.0
    if rng is None:
        rng = stream(0, "bootstrap", 1)
    idx = rng.integers(0, num.size, size=(n_bootstrap, num.size))
    reps = num[idx].mean(axis=1) / den[idx].mean(axis=1)
    return float(value), float(reps.std(ddof=1))
