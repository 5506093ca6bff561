"""Exact two-magnon dynamics behind the variance deficit.

The circuit-averaged two-replica dynamics restricted to one overturned spin
per chain closes on an L x L amplitude array A(x1, x2). One brick-wall
layer applies, on every bond window, the same block operator as the coupled
gate: K (x) K + a P (x) P, where K averages the two window amplitudes and P
keeps only their antisymmetric part. Bond windows are disjoint, so the
blocks commute and the layer is their exact product, all orders in a.

The deficit of the transferred-charge variance follows from the overlap

    M(t) = <r,r| T_2(t) |l,l> - (<r| T_1(t) |l>)^2

with l and r indicator vectors over the two halves of the chain, and

    delta C_2(mu, t) = tanh^2(mu/2) M(t).

A softened continuous-time route replaces each product of bond projectors
by the quadratic Hamiltonian H_2 = H_1 (x) 1 + 1 (x) H_1 - a sum_x
|v_x><v_x|, whose late-time deficit is a / (16 sqrt(pi t)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from . import sep


@dataclass(frozen=True)
class MagnonVector2:
    """Amplitudes over pairs (x1, x2) of magnon positions, one per chain."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=float)
        if amp.ndim != 2 or amp.shape[0] != amp.shape[1]:
            raise ValueError("amplitudes must be a square matrix")
        if not np.isfinite(amp).all():
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def L(self) -> int:
        return self.amplitudes.shape[0]


def left_indicator(L: int) -> np.ndarray:
    """Unnormalized indicator of the left half, |l> = sum_{x<L/2} |x>."""
    v = np.zeros(L)
    v[: L // 2] = 1.0
    return v


def right_indicator(L: int) -> np.ndarray:
    v = np.zeros(L)
    v[L // 2:] = 1.0
    return v


def initial_pair_vector(L: int) -> MagnonVector2:
    l = left_indicator(L)
    return MagnonVector2(np.outer(l, l))


def layer_apply_single(u: np.ndarray, parity: int) -> np.ndarray:
    """One single-magnon brick-wall layer: average within each bond."""
    u = u.copy()
    for x in sep.layer_bond_lefts(len(u), parity):
        m = 0.5 * (u[x] + u[x + 1])
        u[x] = m
        u[x + 1] = m
    return u


def layer_apply_two_magnon(vec: MagnonVector2, parity: int,
                           a: float) -> MagnonVector2:
    """One coupled layer: product of K(x)K + a P(x)P over the layer bonds.

    For each bond the antisymmetric weight is read off before the block is
    averaged, so every bond applies its full block operator exactly.
    """
    A = vec.amplitudes.copy()
    L = A.shape[0]
    for x in sep.layer_bond_lefts(L, parity):
        y = x + 1
        v = a * 0.25 * (A[x, x] - A[x, y] - A[y, x] + A[y, y])
        rm = 0.5 * (A[x, :] + A[y, :])
        A[x, :] = rm
        A[y, :] = rm
        cm = 0.5 * (A[:, x] + A[:, y])
        A[:, x] = cm
        A[:, y] = cm
        A[x, x] += v
        A[y, y] += v
        A[x, y] -= v
        A[y, x] -= v
    return MagnonVector2(A)


def _guard_depth(L: int, t: int, boundary_guard: bool) -> None:
    limit = (L // 2) ** 2 / 4
    if boundary_guard and t > limit:
        raise ValueError(
            f"t={t} exceeds the diffusive boundary guard {limit}; "
            "pass boundary_guard=False for finite-system studies")


def m_of_t_discrete_series(L: int, t_max: int, a: float,
                           boundary_guard: bool = True) -> np.ndarray:
    """M(t) for t = 0 .. t_max from one propagation of |l,l>."""
    if L < 2 or L % 2:
        raise ValueError("L must be even and >= 2")
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    _guard_depth(L, t_max, boundary_guard)
    r = right_indicator(L)
    vec = initial_pair_vector(L)
    u = left_indicator(L)
    out = np.empty(t_max + 1)
    out[0] = 0.0
    for step in range(1, t_max + 1):
        for parity in (0, 1):
            vec = layer_apply_two_magnon(vec, parity, a)
            u = layer_apply_single(u, parity)
        coupled_part = r @ vec.amplitudes @ r
        out[step] = coupled_part - (r @ u) ** 2
    return out


def m_of_t_discrete(L: int, t: int, a: float,
                    boundary_guard: bool = True) -> float:
    """Overlap deficit M(t) of the discrete coupled layers.

    tanh^2(mu/2) * M(t) is the exact variance deficit C2_SEP - C2bar of
    the coupled chains at the same L, t, a.
    """
    return float(m_of_t_discrete_series(L, t, a, boundary_guard)[t])


def variance_deficit_discrete(L: int, t: int, mu: float, a: float,
                              boundary_guard: bool = True) -> float:
    """tanh^2(mu/2) * M(t); mu = inf gives the bare overlap deficit."""
    scale = 1.0 if math.isinf(mu) else math.tanh(mu / 2.0) ** 2
    return scale * m_of_t_discrete(L, t, a, boundary_guard)


# ----------------------------------------------------- softened Hamiltonian

def single_chain_hamiltonian(L: int, periodic: bool = False):
    """H_1 = sum over bonds of the antisymmetric window projector.

    Tridiagonal with diagonal 1 (1/2 at open ends) and off-diagonal -1/2;
    plane waves see the band 1 - cos k.
    """
    bonds = [(x, x + 1) for x in range(L - 1)]
    if periodic:
        bonds.append((L - 1, 0))
    rows, cols, vals = [], [], []
    for x, y in bonds:
        rows += [x, y, x, y]
        cols += [x, y, y, x]
        vals += [0.5, 0.5, -0.5, -0.5]
    return sparse.csr_matrix(
        sparse.coo_matrix((vals, (rows, cols)), shape=(L, L)))


def hamiltonian_h2(L: int, a: float, periodic: bool = False):
    """H_2 = H_1 (x) 1 + 1 (x) H_1 - a sum_x |v_x><v_x| on L^2 states."""
    h1 = single_chain_hamiltonian(L, periodic)
    eye = sparse.identity(L, format="csr")
    h2 = sparse.kron(h1, eye, format="csr") + sparse.kron(eye, h1,
                                                          format="csr")
    bonds = [(x, x + 1) for x in range(L - 1)]
    if periodic:
        bonds.append((L - 1, 0))
    rows, vals = [], []
    for x, y in bonds:
        idx = [x * L + x, x * L + y, y * L + x, y * L + y]
        sgn = [1.0, -1.0, -1.0, 1.0]
        for i, si in zip(idx, sgn):
            for j, sj in zip(idx, sgn):
                rows.append((i, j))
                vals.append(-a * 0.25 * si * sj)
    r, c = zip(*rows)
    h2 = h2 + sparse.coo_matrix((vals, (r, c)), shape=(L * L, L * L)).tocsr()
    return h2


def m_of_t_hamiltonian_series(L: int, times, a: float) -> np.ndarray:
    """M_H(t) on an evenly spaced time grid, one Krylov-free propagation.

    Late times approach a / (16 sqrt(pi t)).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(times <= 0):
        raise ValueError("times must be a nonempty 1-d grid of t > 0")
    steps = np.diff(times)
    if times.size > 2 and not np.allclose(steps, steps[0], rtol=1e-9):
        raise ValueError("times must be evenly spaced")
    h2 = hamiltonian_h2(L, a)
    h1 = single_chain_hamiltonian(L)
    l2 = np.outer(left_indicator(L), left_indicator(L)).ravel()
    r = right_indicator(L)
    r2 = np.outer(r, r).ravel()
    if times.size == 1:
        prop2 = expm_multiply(-times[0] * h2, l2)[None, :]
        prop1 = expm_multiply(-times[0] * h1, left_indicator(L))[None, :]
    else:
        kwargs = dict(start=times[0], stop=times[-1], num=times.size,
                      endpoint=True)
        prop2 = expm_multiply(-h2, l2, **kwargs)
        prop1 = expm_multiply(-h1, left_indicator(L), **kwargs)
    if not (np.isfinite(prop2).all() and np.isfinite(prop1).all()):
        raise RuntimeError("propagation step-size failure")
    coupled_part = prop2 @ r2
    free_part = (prop1 @ r) ** 2
    return coupled_part - free_part


def m_of_t_hamiltonian(L: int, t_real: float, a: float) -> float:
    """Overlap deficit of the softened model at one time."""
    return float(m_of_t_hamiltonian_series(L, np.array([t_real]), a)[0])


def hamiltonian_prediction(t_real, a: float):
    """Late-time closed form a / (16 sqrt(pi t)) of the softened deficit."""
    return a / (16.0 * np.sqrt(np.pi * np.asarray(t_real, dtype=float)))


# -------------------------------------------------------- spectral checks

def _plane_wave_pair(L: int, m1: int, m2: int, antisymmetric: bool):
    k1 = 2.0 * np.pi * m1 / L
    k2 = 2.0 * np.pi * m2 / L
    x = np.arange(L)
    w1 = np.exp(1j * k1 * x)
    w2 = np.exp(1j * k2 * x)
    psi = np.outer(w1, w2)
    psi = psi - np.outer(w2, w1) if antisymmetric else psi + np.outer(w2, w1)
    energy = 2.0 - np.cos(k1) - np.cos(k2)
    return psi.ravel(), energy


def antisymmetric_sector_check(L: int, a: float, m1: int, m2: int) -> float:
    """Eigenstate residual of an antisymmetrized plane-wave pair.

    Uses the periodic variant of H_2 so momenta are exact quantum numbers.
    Antisymmetric pairs never see the contact interaction, so the residual
    must vanish for every a; must be below 1e-10.
    """
    if (m1 - m2) % L == 0:
        raise ValueError("momentum indices must differ: the state vanishes")
    psi, energy = _plane_wave_pair(L, m1, m2, antisymmetric=True)
    psi = psi / np.linalg.norm(psi)
    h2 = hamiltonian_h2(L, a, periodic=True)
    return float(np.linalg.norm(h2 @ psi - energy * psi))


def symmetric_sector_residual(L: int, a: float, m1: int, m2: int) -> float:
    """Same residual for the symmetric pair; order a when a > 0."""
    psi, energy = _plane_wave_pair(L, m1, m2, antisymmetric=False)
    psi = psi / np.linalg.norm(psi)
    h2 = hamiltonian_h2(L, a, periodic=True)
    return float(np.linalg.norm(h2 @ psi - energy * psi))
