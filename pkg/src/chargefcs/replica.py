"""Circuit average of two replicas of a charge-block-Haar two-site gate.

Averaging U (x) U (x) U* (x) U* over gates that are Haar random on each
total-charge block leaves a small family of paired states: each ket replica
is glued to one bra replica (an identity or swap assignment), each site
carries one charge label per replica, and the average is a sum of rank-one
terms over per-replica total charges (Q1, Q2) with second-moment weights

    W_11 = W_xx = [d_Q1 d_Q2 - delta_{Q1,Q2}]^(-1),
    W_1x = W_x1 = -delta_{Q1,Q2} [d_Q (d_Q^2 - 1)]^(-1),

where d_0 = d_2 = d^2 and d_1 = 2 d^2 are the two-site block dimensions.

Basis convention: the 32 normalized paired configurations are indexed by
16 * pairing + (w1 + 4 * w2) with pairing 0 for identity and 1 for swap,
where w_m = 2 * (left charge) + (right charge) is the window label of ket
replica m.  The identity block of that layout matches the coupled-chain
gate table for two chains.

Restricted to identity pairings the average equals the coupled-chain gate
K (x) K + a(d) P (x) P exactly (no remainder for two replicas), with
a(d) = 1/(4 d^4 - 1).  The dilute-domain expansion instead assigns the
smallest swap domain its leading weight 1/(4 d^4); the deviation helper
compares against that truncated gate, so it isolates the O(d^-8) remainder
of the expansion, 1/(16 d^4 (4 d^4 - 1)) in max norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .coupled import build_pair_gate

__all__ = [
    "PairedState",
    "HaarAverage",
    "paired_basis",
    "paired_gram",
    "sector_dimension",
    "weingarten_weight",
    "averaged_gate_paired",
    "haar_mc_average",
    "projected_gate_deviation",
]

_PAIRINGS = ("identity", "swap")

# batches small enough that the between-batch scatter gives a usable
# standard error at the contract's minimum sample count
_MC_BATCH = 512


def sector_dimension(charge: int, d: float) -> float:
    """Dimension of the two-site total-charge block: d^2, 2d^2, d^2."""
    if charge not in (0, 1, 2):
        raise ValueError(f"total charge must be 0, 1 or 2, got {charge}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return 2.0 * d * d if charge == 1 else float(d * d)


def weingarten_weight(sigma: str, tau: str, q1: int, q2: int, d: float) -> float:
    """Second-moment weight W_{sigma,tau}(Q1, Q2) of the averaged gate."""
    for name in (sigma, tau):
        if name not in _PAIRINGS:
            raise ValueError(f"pairing must be 'identity' or 'swap', got {name!r}")
    d1 = sector_dimension(q1, d)
    d2 = sector_dimension(q2, d)
    if sigma == tau:
        denom = d1 * d2 - (1.0 if q1 == q2 else 0.0)
        if denom == 0.0:
            raise ValueError(
                f"degenerate frozen sector Q={q1} at d={d}: identity and swap "
                "pairings coincide and the diagonal weight diverges")
        return 1.0 / denom
    if q1 != q2:
        return 0.0
    if d1 * d1 - 1.0 == 0.0:
        raise ValueError(
            f"off-diagonal weight diverges for Q={q1} at d={d} (d_Q = 1)")
    return -1.0 / (d1 * (d1 * d1 - 1.0))


def _window_charges(window: int) -> tuple[int, int]:
    return window >> 1, window & 1


@dataclass(frozen=True)
class PairedState:
    """One site-paired configuration: per-site charges per replica + pairing.

    charges[m] = (left, right) site charges of ket replica m; the pairing
    glues ket replica m to bra replica m (identity) or to the other bra
    replica (swap).
    """

    pairing: str
    charges: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self) -> None:
        if self.pairing not in _PAIRINGS:
            raise ValueError(f"pairing must be 'identity' or 'swap', got {self.pairing!r}")
        if len(self.charges) != 2:
            raise ValueError("exactly two replicas are supported")
        for pair in self.charges:
            if len(pair) != 2 or any(q not in (0, 1) for q in pair):
                raise ValueError(f"site charges must be 0 or 1, got {pair}")

    @classmethod
    def from_windows(cls, pairing: str, w1: int, w2: int) -> "PairedState":
        if not (0 <= w1 < 4 and 0 <= w2 < 4):
            raise ValueError(f"windows must be in 0..3, got ({w1}, {w2})")
        return cls(pairing, (_window_charges(w1), _window_charges(w2)))

    @classmethod
    def from_index(cls, index: int) -> "PairedState":
        if not 0 <= index < 32:
            raise ValueError(f"index must be in 0..31, got {index}")
        pairing, c = divmod(index, 16)
        return cls.from_windows(_PAIRINGS[pairing], c % 4, c // 4)

    @property
    def windows(self) -> tuple[int, int]:
        return tuple(2 * left + right for left, right in self.charges)

    @property
    def replica_charges(self) -> tuple[int, int]:
        return tuple(left + right for left, right in self.charges)

    @property
    def index(self) -> int:
        w1, w2 = self.windows
        return 16 * _PAIRINGS.index(self.pairing) + w1 + 4 * w2

    def vector(self, d: int) -> np.ndarray:
        """Explicit unit vector in the replicated two-site space.

        Leg order (k1 s1, k1 s2, k2 s1, k2 s2, b1 s1, b1 s2, b2 s1, b2 s2),
        each of dimension 2d, flattened row-major.  Only d <= 2 keeps the
        dimension (2d)^8 at or below 65536.
        """
        if d != int(d) or d < 1:
            raise ValueError(f"explicit vectors need integer d >= 1, got {d}")
        if d > 2:
            raise ValueError(f"explicit vectors are limited to d <= 2, got {d}")
        d = int(d)
        mats = [_site_pair_matrix(d, q) for pair in self.charges for q in pair]
        if self.pairing == "identity":
            legs = "ae,bf,cg,dh->abcdefgh"
        else:
            legs = "ag,bh,ce,df->abcdefgh"
        return np.einsum(legs, *mats).ravel()


def _site_pair_matrix(d: int, charge: int) -> np.ndarray:
    m = np.zeros((2 * d, 2 * d))
    for flavor in range(d):
        m[charge * d + flavor, charge * d + flavor] = 1.0 / np.sqrt(d)
    return m


def paired_basis() -> tuple[PairedState, ...]:
    return tuple(PairedState.from_index(i) for i in range(32))


def paired_gram(d: float) -> np.ndarray:
    """Overlap matrix of the 32 normalized paired configurations.

    Same-pairing configurations are orthonormal; an identity and a swap
    configuration overlap only when they carry identical, replica-aligned
    site charges, in which case the four-leg flavor loop gives 1/d^2.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    gram = np.eye(32)
    for c in range(16):
        if c % 4 == c // 4:
            gram[c, 16 + c] = gram[16 + c, c] = 1.0 / d**2
    return gram


def _sector_vectors(d: int, q1: int, q2: int) -> dict[int, np.ndarray]:
    """Overlaps of the unnormalized charge-(q1,q2) pairing states.

    v[tau][i] = <(q1,q2); tau | basis state i>.  A configuration sees the
    opposite pairing only when its site charges are replica aligned, with
    the d^2 state normalization cancelling the 1/d^2 loop overlap.
    """
    vectors = {}
    for tau in (0, 1):
        v = np.zeros(32)
        for c in range(16):
            w1, w2 = c % 4, c // 4
            if (sum(_window_charges(w1)), sum(_window_charges(w2))) != (q1, q2):
                continue
            v[16 * tau + c] = float(d * d)
            if w1 == w2:
                v[16 * (1 - tau) + c] = 1.0
        vectors[tau] = v
    return vectors


def averaged_gate_paired(d: int) -> np.ndarray:
    """Matrix of the averaged replicated gate in the paired basis.

    Entry [out, in] is the element between normalized paired configurations;
    rows and columns follow the 16 * pairing + (w1 + 4 * w2) layout.
    """
    if d != int(d) or d < 1:
        raise ValueError(f"averaged gate needs integer d >= 1, got {d}")
    d = int(d)
    gate = np.zeros((32, 32))
    for q1 in range(3):
        for q2 in range(3):
            v = _sector_vectors(d, q1, q2)
            if d == 1 and q1 == q2 and q1 != 1:
                # one-dimensional block paired with itself: the identity and
                # swap states coincide, single rank-one term of weight 1
                gate += np.outer(v[0], v[0])
                continue
            w_diag = weingarten_weight("identity", "identity", q1, q2, d)
            gate += w_diag * (np.outer(v[0], v[0]) + np.outer(v[1], v[1]))
            if q1 == q2:
                w_off = weingarten_weight("identity", "swap", q1, q2, d)
                gate += w_off * (np.outer(v[0], v[1]) + np.outer(v[1], v[0]))
    return gate


@dataclass(frozen=True)
class HaarAverage:
    """Monte Carlo estimate of the averaged gate in the paired basis."""

    elements: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        if self.elements.shape != (32, 32) or self.stderr.shape != (32, 32):
            raise ValueError("elements and stderr must be 32x32")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def _window_projectors(d: int) -> np.ndarray:
    """dmat[w, s] = 1/d if two-site state s carries window w, else 0."""
    m = (2 * d) ** 2
    dmat = np.zeros((4, m))
    for s in range(m):
        s1, s2 = divmod(s, 2 * d)
        dmat[2 * (s1 // d) + (s2 // d), s] = 1.0 / d
    return dmat


def _haar_stack(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count Haar unitaries of size dim via QR with the phase fix."""
    z = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    diag = np.einsum("bii->bi", r)
    return q * (diag / np.abs(diag))[:, None, :]


def _gate_stack(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count block-Haar two-site gates on the (2d)^2 product basis."""
    m = (2 * d) ** 2
    charge = np.zeros(m, dtype=int)
    for s in range(m):
        s1, s2 = divmod(s, 2 * d)
        charge[s] = s1 // d + s2 // d
    u = np.zeros((count, m, m), dtype=complex)
    for q in range(3):
        idx = np.flatnonzero(charge == q)
        u[:, idx[:, None], idx[None, :]] = _haar_stack(len(idx), count, rng)
    return u


def _batch_elements(u: np.ndarray, dmat: np.ndarray) -> np.ndarray:
    """Per-sample 32x32 paired matrix elements of U (x) U (x) U* (x) U*.

    Pairing states are products of diagonal projectors, so every element
    contracts to traces of U D U(dag) chains; no replicated operator is
    ever formed.
    """
    # same pairing on both sides: two disjoint flavor loops, one per pair
    t = np.einsum("ox,bxy,iy->boi", dmat, np.abs(u) ** 2, dmat)
    same = np.einsum("boi,bpj->bopij", t, t)
    # opposite pairings: one loop through all four copies
    m_out = np.einsum("bux,ou,buy->boxy", u.conj(), dmat, u)
    cross = np.einsum("boyx,bpxy,ix,jy->bopij", m_out, m_out, dmat, dmat)
    same16 = same.transpose(0, 2, 1, 4, 3).reshape(-1, 16, 16)
    cross16 = cross.transpose(0, 2, 1, 4, 3).reshape(-1, 16, 16)
    out = np.empty((u.shape[0], 32, 32), dtype=complex)
    out[:, :16, :16] = same16
    out[:, 16:, 16:] = same16
    out[:, 16:, :16] = cross16
    out[:, :16, 16:] = cross16
    return out


def haar_mc_average(d: int, n_samples: int, seed: int = 0) -> HaarAverage:
    """Estimate the averaged gate by sampling block-Haar gates directly."""
    if d != int(d) or d < 1:
        raise ValueError(f"haar_mc_average needs integer d >= 1, got {d}")
    if n_samples < 1000:
        raise ValueError(f"n_samples must be >= 1000, got {n_samples}")
    d = int(d)
    dmat = _window_projectors(d)
    means: list[np.ndarray] = []
    weights: list[float] = []
    for batch_index, size in core.batch_sizes(n_samples, _MC_BATCH):
        rng = core.stream(seed, "replica-haar-mc", batch_index)
        u = _gate_stack(d, size, rng)
        means.append(_batch_elements(u, dmat).mean(axis=0))
        weights.append(size / n_samples)
    stacked = np.array(means)
    w = np.array(weights)[:, None, None]
    mean = (w * stacked).sum(axis=0)
    n_batches = len(means)
    scatter = (w**2 * np.abs(stacked - mean) ** 2).sum(axis=0)
    stderr = np.sqrt(scatter * n_batches / (n_batches - 1)) if n_batches > 1 else np.zeros((32, 32))
    return HaarAverage(elements=mean, stderr=stderr, n_samples=n_samples)


def projected_gate_deviation(d: int) -> float:
    """Max-norm remainder of the dilute-domain truncation at two replicas.

    The identity-pairing block of the averaged gate equals the coupled-chain
    gate with the exact coupling a(d) = 1/(4 d^4 - 1), so comparing against
    it returns only roundoff.  The truncated expansion keeps the leading
    swap-domain weight 1/(4 d^4) instead; the element-wise gap against that
    gate is the O(d^-8) remainder, 1/(16 d^4 (4 d^4 - 1)) exactly.
    """
    if d != int(d) or d < 2:
        raise ValueError(f"deviation needs integer d >= 2, got {d}")
    d = int(d)
    restricted = averaged_gate_paired(d)[:16, :16]
    truncated = build_pair_gate(2, 0.25 / d**4).table
    # the table is symmetric, so the (in, out) storage order matches
    return float(np.abs(restricted - truncated).max())
