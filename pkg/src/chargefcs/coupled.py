"""Coupled replica chains: the effective stochastic model at large d.

n copies of the brick-wall exclusion process interact through a weak
pairwise exchange of strength a: on each bond the two-site windows of all
chains update together with probabilities from

    G = K^(1) ... K^(n) + a sum_{alpha<beta} P^(alpha) P^(beta) K^(rest)

where K is the half-swap gate of a single chain (identity on frozen windows
01 -> {01, 10} each with 1/2, and likewise for 10) and P projects onto the
antisymmetric combination of the two movable window states. Expanded in the
occupation basis this gives, e.g. for n=2 inputs where both chains are
movable, probability (1+a)/4 to land on the two equal-alignment outputs and
(1-a)/4 on the other two.

Tracing out any chain reproduces the single-chain process exactly (every P
has zero column sums), so all single-chain observables are a-independent;
the coupling shows up only in cross-chain correlations, which is what the
circuit-averaged cumulant combinations measure.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, isinf

import numpy as np

from . import core, sep
from .core import JointHistogram, ModelParams

_MAX_EXACT_STATES = 2 * 10**7


def _window_charge(w: int) -> int:
    # w = 2 * left + right for one chain's two-site window
    return (w >> 1) + (w & 1)


def _single_chain_blocks() -> tuple[np.ndarray, np.ndarray]:
    """K (half swap) and P (antisymmetric projector) on one window.

    Basis order 00, 01, 10, 11; both operators act only on the movable
    middle block {01, 10}.
    """
    K = np.eye(4)
    K[1:3, 1:3] = 0.5
    P = np.zeros((4, 4))
    P[1:3, 1:3] = [[0.5, -0.5], [-0.5, 0.5]]
    return K, P


@dataclass(frozen=True)
class PairGateTable:
    """Joint transition table of one bond, row-stochastic over windows.

    Window configurations are encoded as sum_alpha w_alpha 4^alpha with
    w_alpha = 2 * (left occupation) + (right occupation) of chain alpha.
    ``table[w_in, w_out]`` is the probability of the joint transition.
    """

    n_chains: int
    a: float
    table: np.ndarray

    def __post_init__(self):
        dim = 4**self.n_chains
        if self.table.shape != (dim, dim):
            raise ValueError("table shape mismatch")
        if np.any(self.table < -1e-15):
            raise ValueError("negative transition probability")
        if not np.allclose(self.table.sum(axis=1), 1.0, atol=1e-13):
            raise ValueError("rows must sum to 1")
        for w_in, w_out in zip(*np.nonzero(self.table > 0)):
            for alpha in range(self.n_chains):
                qi = _window_charge((w_in >> (2 * alpha)) & 3)
                qo = _window_charge((w_out >> (2 * alpha)) & 3)
                if qi != qo:
                    raise ValueError("transition changes a window charge")


def build_pair_gate(n_chains: int, a: float) -> PairGateTable:
    """Transition table of the n-chain coupled gate at coupling a."""
    if n_chains not in (2, 3):
        raise ValueError("gate table implemented for 2 or 3 chains")
    if not 0.0 <= a < 1.0:
        raise ValueError(f"coupling must be in [0, 1), got {a}")
    K, P = _single_chain_blocks()
    dim = 4**n_chains

    def chain_product(ops):
        # joint operator with ops[alpha] acting on chain alpha's window;
        # chain 0 is the least significant base-4 digit
        out = np.ones((1, 1))
        for op in ops:
            out = np.kron(op, out)
        return out

    G = chain_product([K] * n_chains)
    for alpha, beta in itertools.combinations(range(n_chains), 2):
        ops = [K] * n_chains
        ops[alpha] = P
        ops[beta] = P
        G = G + a * chain_product(ops)
    # G is symmetric, so operator and row-stochastic orientations agree
    table = np.ascontiguousarray(G.T)
    table[np.abs(table) < 1e-17] = 0.0
    return PairGateTable(n_chains=n_chains, a=a, table=table)


def _chain_transfers(n_chains: int) -> np.ndarray:
    """delta[alpha, w_in, w_out]: left-to-right charge moved in chain alpha.

    +1 when that chain's window goes 10 -> 01, -1 for 01 -> 10, else 0.
    """
    dim = 4**n_chains
    delta = np.zeros((n_chains, dim, dim), dtype=np.int8)
    for alpha in range(n_chains):
        for w_in in range(dim):
            for w_out in range(dim):
                left_in = (w_in >> (2 * alpha + 1)) & 1
                left_out = (w_out >> (2 * alpha + 1)) & 1
                delta[alpha, w_in, w_out] = left_in - left_out
    return delta


# ------------------------------------------------------------- Monte Carlo

def coupled_mc_run(params: ModelParams, n_samples: int) -> JointHistogram:
    """Joint transfer statistics of the coupled chains by direct sampling.

    Chains start from independent draws of the same biased product measure,
    matching the replica ensemble of a diagonal initial density matrix.
    """
    n = params.n_chains
    if n not in (2, 3):
        raise ValueError("coupled runs use 2 or 3 chains")
    gate = build_pair_gate(n, params.coupling)
    cum = np.cumsum(gate.table, axis=1)
    delta = _chain_transfers(n)
    total = JointHistogram(n)
    for batch_index, size in core.batch_sizes(n_samples):
        total = total.merge(_coupled_batch(params, gate, cum, delta,
                                           batch_index, size))
    return total


def _coupled_batch(params: ModelParams, gate: PairGateTable, cum: np.ndarray,
                   delta: np.ndarray, batch_index: int,
                   size: int) -> JointHistogram:
    rng = core.stream(params.seed, "coupled-mc", batch_index)
    n, L, t = params.n_chains, params.L, params.t
    rho_l, rho_r = params.densities
    # occ[alpha, x, sample]
    occ = np.empty((n, L, size), dtype=np.uint8)
    half = L // 2
    for rows, rho in (((slice(None), slice(0, half)), rho_l),
                      ((slice(None), slice(half, L)), rho_r)):
        if rho in (0.0, 1.0):
            occ[rows] = np.uint8(rho)
        else:
            u = rng.random((n, rows[1].stop - rows[1].start, size),
                           dtype=np.float32)
            occ[rows] = u < np.float32(rho)
    q = np.zeros((n, size), dtype=np.int32)
    weights = (4 ** np.arange(n)).astype(np.int32)
    shift = 2 * np.arange(n)[:, None]
    cb_left = sep.central_bond(L)[0]
    for _ in range(t):
        for parity in (0, 1):
            for x in sep.layer_bond_lefts(L, parity):
                w = (2 * occ[:, x].astype(np.int32)
                     + occ[:, x + 1]).T @ weights
                u = rng.random(size)
                w_out = (u[:, None] > cum[w]).sum(axis=1).astype(np.int32)
                # cumsum of a row can undershoot 1.0 by one ulp
                np.minimum(w_out, 4**n - 1, out=w_out)
                if x == cb_left:
                    for alpha in range(n):
                        q[alpha] += delta[alpha, w, w_out]
                occ[:, x] = (w_out >> (shift + 1)) & 1
                occ[:, x + 1] = (w_out >> shift) & 1
    rows = np.ascontiguousarray(q.T)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    return JointHistogram(n, {tuple(int(v) for v in row): int(c)
                              for row, c in zip(uniq, counts)})


# ------------------------------------------------------------ exact engine

def _vec_to_table_perm(n_chains: int) -> np.ndarray:
    """Window relabeling between state-vector and gate-table conventions.

    The state vector orders a bond's two sites as c_x + 2^n c_{x+1} with
    c = sum_alpha occ_alpha 2^alpha; the table uses
    sum_alpha (2 occ_left + occ_right) 4^alpha.
    """
    nloc = 1 << n_chains
    perm = np.empty(nloc * nloc, dtype=np.int64)
    for cl in range(nloc):
        for cr in range(nloc):
            w = 0
            for alpha in range(n_chains):
                w += (2 * ((cl >> alpha) & 1) + ((cr >> alpha) & 1)) \
                    * 4**alpha
            perm[cl + nloc * cr] = w
    return perm


def _initial_vector(params: ModelParams) -> np.ndarray:
    """Product distribution over the joint occupation state space."""
    n, L = params.n_chains, params.L
    rho_l, rho_r = params.densities
    site_vecs = {}
    for rho in {rho_l, rho_r}:
        v = np.ones(1)
        for _ in range(n):
            v = np.kron(np.array([1.0 - rho, rho]), v)
        site_vecs[rho] = v
    p = np.ones(1)
    for x in range(L - 1, -1, -1):
        rho = rho_l if x < L // 2 else rho_r
        p = np.kron(p, site_vecs[rho])
    return p


def _bond_view(vec: np.ndarray, nloc: int, L: int, x: int) -> np.ndarray:
    """(rest, window) view of the state vector for bond (x, x+1)."""
    low = nloc**x
    w2 = nloc * nloc
    high = vec.size // (low * w2)
    v = vec.reshape(high, w2, low)
    return np.moveaxis(v, 1, 2).reshape(high * low, w2)


def _scatter_bond(vec_out: np.ndarray, updated: np.ndarray, nloc: int,
                  L: int, x: int) -> None:
    low = nloc**x
    w2 = nloc * nloc
    high = vec_out.size // (low * w2)
    u = updated.reshape(high, low, w2)
    vec_out.reshape(high, w2, low)[:] = np.moveaxis(u, 2, 1)


def _check_exact_size(params: ModelParams) -> int:
    nloc = 1 << params.n_chains
    n_states = nloc**params.L
    if n_states > _MAX_EXACT_STATES:
        raise ValueError(
            f"state space {n_states} exceeds {_MAX_EXACT_STATES}")
    return nloc


def exact_coupled_cgf(params: ModelParams, lambda_vec) -> complex:
    """Joint generating function E[exp(i sum_alpha lambda_alpha Q_alpha)].

    Contracts the tilted joint transfer exactly; the tilt multiplies every
    central-bond transition by the product of per-chain phases.
    """
    nloc = _check_exact_size(params)
    n, L, t = params.n_chains, params.L, params.t
    lam = np.asarray(lambda_vec, dtype=float)
    if lam.shape != (n,):
        raise ValueError(f"lambda_vec must have length {n}")
    gate = build_pair_gate(n, params.coupling)
    perm = _vec_to_table_perm(n)
    # operator orientation: out rows, in columns, in the vector basis
    op = gate.table.T[np.ix_(perm, perm)]
    delta = _chain_transfers(n)
    phase = np.ones((4**n, 4**n), dtype=complex)
    for alpha in range(n):
        phase *= np.exp(1j * lam[alpha] * delta[alpha])
    # phase is (in, out) in table windows; op is (out, in) in vector windows
    op_tilted = op.astype(complex) * phase.T[np.ix_(perm, perm)]
    cb_left = sep.central_bond(L)[0]
    vec = _initial_vector(params).astype(complex)
    for _ in range(t):
        for parity in (0, 1):
            for x in sep.layer_bond_lefts(L, parity):
                block = _bond_view(vec, nloc, L, x)
                use = op_tilted if x == cb_left else op
                _scatter_bond(vec, block @ use.T, nloc, L, x)
    return complex(vec.sum())


def _monomials(n_chains: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree <= degree, graded order."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.product(range(total + 1), repeat=n_chains):
            if sum(combo) == total:
                out.append(combo)
    return out


def _stacked_central_operator(op: np.ndarray, delta: np.ndarray,
                              mons: list[tuple[int, ...]]) -> np.ndarray:
    """Joint (monomial, window) update of one central-bond application.

    A transition shifts each counter by its realized transfer, so the
    monomials mix binomially: Q^k -> sum_j C(k,j) Q^j delta^{k-j}.
    """
    n = delta.shape[0]
    w2 = op.shape[0]
    nm = len(mons)
    mixed = np.zeros((nm * w2, nm * w2))
    for (k, mk) in enumerate(mons):
        for (j, mj) in enumerate(mons):
            if any(a > b for a, b in zip(mj, mk)):
                continue
            coef = np.ones((w2, w2))
            for alpha in range(n):
                ka, ja = mk[alpha], mj[alpha]
                if ka > ja:
                    coef *= comb(ka, ja) * delta[alpha].astype(float) \
                        ** (ka - ja)
            mixed[k * w2:(k + 1) * w2, j * w2:(j + 1) * w2] = op * coef
    return mixed


def _propagate_accumulators(params: ModelParams, degree: int):
    """Yield (step, accumulator array) for t = 0 .. params.t."""
    nloc = _check_exact_size(params)
    n, L, t = params.n_chains, params.L, params.t
    gate = build_pair_gate(n, params.coupling)
    perm = _vec_to_table_perm(n)
    op = gate.table.T[np.ix_(perm, perm)]
    delta_tab = _chain_transfers(n)
    # move delta into vector-basis windows, aligned with op as (out, in)
    delta = delta_tab[:, perm][:, :, perm]
    delta = np.transpose(delta, (0, 2, 1))
    mons = _monomials(n, degree)
    nm = len(mons)
    w2 = nloc * nloc
    mixed = _stacked_central_operator(op, delta, mons)
    cb_left = sep.central_bond(L)[0]
    acc = np.zeros((nm, nloc**L))
    acc[0] = _initial_vector(params)
    yield 0, acc
    for step in range(1, t + 1):
        for parity in (0, 1):
            for x in sep.layer_bond_lefts(L, parity):
                low = nloc**x
                high = acc[0].size // (low * w2)
                blocks = acc.reshape(nm, high, w2, low)
                blocks = np.moveaxis(blocks, 2, 3)  # (nm, high, low, w2)
                if x == cb_left:
                    stacked = np.moveaxis(
                        blocks.reshape(nm, high * low, w2), 0, 1)
                    stacked = stacked.reshape(high * low, nm * w2)
                    stacked = stacked @ mixed.T
                    back = np.moveaxis(
                        stacked.reshape(high * low, nm, w2), 1, 0)
                    back = back.reshape(nm, high, low, w2)
                else:
                    # plain bonds leave the monomials alone
                    back = np.ascontiguousarray(blocks) @ op.T
                acc = np.ascontiguousarray(
                    np.moveaxis(back, 3, 2)).reshape(nm, nloc**L)
        yield step, acc


def exact_coupled_moments(params: ModelParams,
                          degree: int = 2) -> dict[tuple[int, ...], float]:
    """Exact raw cross-moments E[prod_alpha Q_alpha^{k_alpha}], sum k <= degree.

    Propagates monomial accumulators jointly with the state distribution;
    one matrix product per bond, so the result carries no differentiation
    error. For the whole time series in one pass use
    exact_coupled_moment_series.
    """
    for step, acc in _propagate_accumulators(params, degree):
        pass
    mons = _monomials(params.n_chains, degree)
    return {m: float(acc[i].sum()) for i, m in enumerate(mons)}


def exact_coupled_moment_series(
        params: ModelParams,
        degree: int = 2) -> dict[int, dict[tuple[int, ...], float]]:
    """exact_coupled_moments at every depth 0 .. params.t from one pass."""
    mons = _monomials(params.n_chains, degree)
    out = {}
    for step, acc in _propagate_accumulators(params, degree):
        out[step] = {m: float(acc[i].sum()) for i, m in enumerate(mons)}
    return out


# ----------------------------------------------- averaged cumulant combos

def c2bar(params: ModelParams, engine: str = "exact",
          n_samples: int = 100_000) -> float:
    """Circuit-averaged variance E[Q1^2] - E[Q1 Q2] of one chain.

    Equals the single-chain variance minus the cross-replica covariance;
    at a=0 the chains decouple and this is exactly the SEP variance.
    """
    if params.n_chains != 2:
        raise ValueError("c2bar needs n_chains=2")
    if engine == "exact":
        m = exact_coupled_moments(params, degree=2)
        return m[(2, 0)] - m[(1, 1)]
    if engine == "mc":
        jh = coupled_mc_run(params, n_samples)
        return jh.moment((2, 0)) - jh.moment((1, 1))
    raise ValueError(f"unknown engine {engine!r}")


def c3bar(params: ModelParams, engine: str = "exact",
          n_samples: int = 100_000) -> float:
    """Circuit-averaged third cumulant from three replicas.

    E[Q1^3] - 3 E[Q1^2 Q2] + 2 E[Q1 Q2 Q3]: the per-realization third
    cumulant of the transfer, averaged over circuits, written as replica
    cross-moments.
    """
    if params.n_chains != 3:
        raise ValueError("c3bar needs n_chains=3")
    if engine == "exact":
        m = exact_coupled_moments(params, degree=3)
        return m[(3, 0, 0)] - 3.0 * m[(2, 1, 0)] + 2.0 * m[(1, 1, 1)]
    if engine == "mc":
        jh = coupled_mc_run(params, n_samples)
        return (jh.moment((3, 0, 0)) - 3.0 * jh.moment((2, 1, 0))
                + 2.0 * jh.moment((1, 1, 1)))
    raise ValueError(f"unknown engine {engine!r}")


def variance_deficit_exact(params: ModelParams) -> float:
    """Single-chain variance minus the circuit-averaged variance.

    The quantity that the interchain coupling generates; it vanishes at
    a=0 and decays as t^{-1/2} at late times.
    """
    single = ModelParams(L=params.L, t=params.t, mu=params.mu,
                         seed=params.seed)
    c2_sep = sep.exact_sep_cumulants(single, max_order=2)[1]
    return c2_sep - c2bar(params, engine="exact")
