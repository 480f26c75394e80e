"""Analog beamformer initialization, normalization, repair, and the
alternating interference-suppression loop.

The loop alternately re-solves four convex subproblems (relay receive, relay
transmit, source, destination), tightening each interference cap by a factor
kappa per pass down to a floor eta, re-normalizing every solution onto the
constant-modulus circle, and re-running the closed-form power allocation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import AngleSet, LinkSet, UpaSpec, steering_vector
from .positioning import LinkBudget
from .rates import EffectiveGains, PowerPair, achievable_rates, effective_gains, optimal_powers
from .solver import solve_bf_subproblem

CM_TOL = 1e-9  # constant-modulus classification tolerance


@dataclass(frozen=True)
class Beamformer:
    """Per-element complex weights with magnitude cap 1/sqrt(N)."""

    weights: np.ndarray
    cap: float

    def __post_init__(self) -> None:
        if np.max(np.abs(self.weights)) > self.cap + CM_TOL:
            raise ValueError("beamformer exceeds its element magnitude cap")

    @property
    def cm_flag(self) -> bool:
        return bool(np.all(np.abs(np.abs(self.weights) - self.cap) <= CM_TOL))


@dataclass(frozen=True)
class SuppressionSchedule:
    """Interference-cap schedule eta_i = floor + mu_i, tightened by kappa."""

    eta_floor: float
    kappa: float
    mu1: float = 0.0
    mu2: float = 0.0
    mu3: float = 0.0
    mu4: float = 0.0

    def __post_init__(self) -> None:
        if self.eta_floor < 0:
            raise ValueError("eta floor must be nonnegative")
        if self.kappa <= 1:
            raise ValueError("kappa must exceed 1")
        if min(self.mu1, self.mu2, self.mu3, self.mu4) < 0:
            raise ValueError("suppression state must be nonnegative")


def eta_floor_rule(p_s_tot: float, p_v_tot: float, noise1: float, noise2: float) -> float:
    """Default interference-amplitude floor tied to the noise levels."""
    return min(
        math.sqrt(noise1) / (10.0 * math.sqrt(p_s_tot)),
        math.sqrt(noise2) / (10.0 * math.sqrt(p_v_tot)),
    )


@dataclass(frozen=True)
class AisState:
    """Loop state: the four beamformers, schedule, powers, and traces."""

    w_s: Beamformer
    w_r: Beamformer
    w_t: Beamformer
    w_d: Beamformer
    schedule: SuppressionSchedule
    powers: PowerPair
    gains: EffectiveGains
    rate_trace: tuple[float, ...]
    gain_trace: tuple[EffectiveGains, ...]
    power_trace: tuple[PowerPair, ...]
    k: int

    def __post_init__(self) -> None:
        if len(self.rate_trace) != self.k + 1:
            raise ValueError("rate trace must hold one entry per iteration plus the start")


def init_beamformers(
    upa_s: UpaSpec,
    upa_r: UpaSpec,
    upa_t: UpaSpec,
    upa_d: UpaSpec,
    s2v_angles: AngleSet,
    v2d_angles: AngleSet,
) -> tuple[Beamformer, Beamformer, Beamformer, Beamformer]:
    """Normalized LoS steering vectors for all four arrays."""

    def bf(upa: UpaSpec, angles: AngleSet) -> Beamformer:
        n = upa.n_tot
        return Beamformer(steering_vector(upa, angles) / math.sqrt(n), cap=1.0 / math.sqrt(n))

    return (
        bf(upa_s, s2v_angles),
        bf(upa_r, s2v_angles),
        bf(upa_t, v2d_angles),
        bf(upa_d, v2d_angles),
    )


def normalize_cm(w: np.ndarray, cap: float) -> Beamformer:
    """Push every element onto the constant-modulus circle of radius cap.

    Zero elements have no phase; they map to cap * exp(j0) by convention.
    """
    w = np.asarray(w, dtype=complex)
    mags = np.abs(w)
    out = np.full(w.shape, cap + 0j)
    nz = mags > 0
    out[nz] = cap * w[nz] / mags[nz]
    return Beamformer(out, cap=cap)


def interior_census(w: np.ndarray, cap: float) -> int:
    """Number of elements strictly inside the cap circle."""
    return int(np.sum(np.abs(np.asarray(w)) < cap - CM_TOL))


@dataclass(frozen=True)
class RepairReport:
    """Outcome of one repair pass."""

    pairs_repaired: int
    pairs_skipped: int  # interior pairs without the constant-ratio property
    interior_before: int
    interior_after: int


def _constant_ratio(s1: complex, i1: complex, s2: complex, i2: complex) -> bool:
    cross = abs(s1 * i2 - s2 * i1)
    scale = max(abs(s1) * abs(i2), abs(s2) * abs(i1), 1e-300)
    return cross <= 1e-9 * scale


def _repair_pair(
    w1: complex, w2: complex, s1: complex, s2: complex, cap: float
) -> tuple[complex, complex]:
    """Re-phase a constant-ratio pair onto the cap circle.

    Preserves the pair's contribution conj(w1)*s1 + conj(w2)*s2; under the
    constant-ratio property the interference contribution is proportional and
    is preserved too. When the current contribution is too short to close a
    triangle with both elements at the cap, the weaker side is anti-aligned at
    the cap and one element stays interior.
    """
    if abs(s1) < abs(s2):
        w2n, w1n = _repair_pair(w2, w1, s2, s1, cap)
        return w1n, w2n
    contrib = w1.conjugate() * s1 + w2.conjugate() * s2
    a_bar = abs(contrib)
    b_bar = cap * abs(s1)
    c_bar = cap * abs(s2)
    u = cmath.phase(contrib) if a_bar > 0 else 0.0
    th1 = cmath.phase(s1) if abs(s1) > 0 else 0.0
    th2 = cmath.phase(s2) if abs(s2) > 0 else 0.0

    if a_bar >= b_bar - c_bar and a_bar > 0:
        # both elements reach the cap: solve the phase triangle
        v1 = math.acos(
            min(1.0, max(-1.0, (a_bar * a_bar + b_bar * b_bar - c_bar * c_bar) / (2 * a_bar * b_bar)))
        )
        v2 = math.acos(
            min(1.0, max(-1.0, (a_bar * a_bar + c_bar * c_bar - b_bar * b_bar) / (2 * a_bar * c_bar)))
        )
        w1n = cap * cmath.exp(-1j * (u - v1 - th1))
        w2n = cap * cmath.exp(-1j * (u + v2 - th2))
        return w1n, w2n
    if a_bar == 0.0 and b_bar == c_bar:
        # degenerate triangle: anti-aligned pair at the cap sums to zero
        return cap * cmath.exp(1j * th1), cap * cmath.exp(-1j * (math.pi - th2))
    # weaker side anti-aligned at the cap, stronger side interior
    w2n = cap * cmath.exp(-1j * (u - th2 + math.pi))
    w1n = ((a_bar + c_bar) / abs(s1)) * cmath.exp(-1j * (u - th1))
    return w1n, w2n


def cm_repair(
    w: np.ndarray,
    h_sig: np.ndarray,
    h_int: np.ndarray,
    cap: float,
    report: bool = False,
):
    """Drive interior elements onto the cap circle without moving either
    inner product, pairing interior elements that share the constant-ratio
    property; non-qualifying pairs are skipped and counted."""
    w = np.asarray(w, dtype=complex).copy()
    h_sig = np.asarray(h_sig, dtype=complex)
    h_int = np.asarray(h_int, dtype=complex)
    interior_before = interior_census(w, cap)
    repaired = 0
    skipped_pairs: set[tuple[int, int]] = set()

    while True:
        interior = [int(n) for n in np.flatnonzero(np.abs(w) < cap - CM_TOL)]
        pair = None
        for a_i in range(len(interior)):
            for b_i in range(a_i + 1, len(interior)):
                i, j = interior[a_i], interior[b_i]
                if (i, j) in skipped_pairs:
                    continue
                if _constant_ratio(h_sig[i], h_int[i], h_sig[j], h_int[j]):
                    pair = (i, j)
                    break
                skipped_pairs.add((i, j))
            if pair:
                break
        if pair is None:
            break
        i, j = pair
        # use whichever channel's entries carry magnitude for the construction
        if max(abs(h_sig[i]), abs(h_sig[j])) >= max(abs(h_int[i]), abs(h_int[j])):
            ref = h_sig
        else:
            ref = h_int
        w[i], w[j] = _repair_pair(w[i], w[j], ref[i], ref[j], cap)
        repaired += 1

    if report:
        return w, RepairReport(
            pairs_repaired=repaired,
            pairs_skipped=len(skipped_pairs),
            interior_before=interior_before,
            interior_after=interior_census(w, cap),
        )
    return w


def initial_state(links: LinkSet, budget: LinkBudget, schedule: SuppressionSchedule) -> AisState:
    """Steering-vector start with its interference levels, powers, and rate."""
    w_s, w_r, w_t, w_d = init_beamformers(
        links.upa_s, links.upa_r, links.upa_t, links.upa_d, links.s2v_angles, links.v2d_angles
    )
    mu2 = float(abs(np.vdot(w_r.weights, links.si.entries @ w_t.weights)))
    mu4 = float(abs(np.vdot(w_d.weights, links.s2d.entries @ w_s.weights)))
    schedule = replace(schedule, mu1=mu2, mu2=mu2, mu3=mu4, mu4=mu4)
    gains = effective_gains(w_s, w_r, w_t, w_d, links.s2v, links.si, links.v2d, links.s2d)
    powers = optimal_powers(gains, budget.p_s_tot, budget.p_v_tot, budget.noise1, budget.noise2)
    _, _, r = achievable_rates(gains, powers, budget.noise1, budget.noise2)
    return AisState(
        w_s=w_s,
        w_r=w_r,
        w_t=w_t,
        w_d=w_d,
        schedule=schedule,
        powers=powers,
        gains=gains,
        rate_trace=(r,),
        gain_trace=(gains,),
        power_trace=(powers,),
        k=0,
    )


def ais_iterate(state: AisState, links: LinkSet, budget: LinkBudget) -> AisState:
    """One alternating pass over the four arrays plus the power update."""
    sch = state.schedule
    eta0 = sch.eta_floor
    h_s2v = links.s2v.entries
    h_v2d = links.v2d.entries
    h_s2d = links.s2d.entries
    h_si = links.si.entries

    mu1 = sch.mu2 / sch.kappa
    w_r_raw = solve_bf_subproblem(
        h_s2v @ state.w_s.weights, h_si @ state.w_t.weights, eta0 + mu1, state.w_r.cap
    )
    w_r = normalize_cm(w_r_raw, state.w_r.cap)

    mu2 = mu1 / sch.kappa
    w_t_raw = solve_bf_subproblem(
        h_v2d.conj().T @ state.w_d.weights, h_si.conj().T @ w_r.weights, eta0 + mu2, state.w_t.cap
    )
    w_t = normalize_cm(w_t_raw, state.w_t.cap)

    mu3 = sch.mu4 / sch.kappa
    w_s_raw = solve_bf_subproblem(
        h_s2v.conj().T @ w_r.weights, h_s2d.conj().T @ state.w_d.weights, eta0 + mu3, state.w_s.cap
    )
    w_s = normalize_cm(w_s_raw, state.w_s.cap)

    mu4 = mu3 / sch.kappa
    w_d_raw = solve_bf_subproblem(
        h_v2d @ w_t.weights, h_s2d @ w_s.weights, eta0 + mu4, state.w_d.cap
    )
    w_d = normalize_cm(w_d_raw, state.w_d.cap)

    gains = effective_gains(w_s, w_r, w_t, w_d, links.s2v, links.si, links.v2d, links.s2d)
    powers = optimal_powers(gains, budget.p_s_tot, budget.p_v_tot, budget.noise1, budget.noise2)
    _, _, r = achievable_rates(gains, powers, budget.noise1, budget.noise2)
    return AisState(
        w_s=w_s,
        w_r=w_r,
        w_t=w_t,
        w_d=w_d,
        schedule=replace(sch, mu1=mu1, mu2=mu2, mu3=mu3, mu4=mu4),
        powers=powers,
        gains=gains,
        rate_trace=state.rate_trace + (r,),
        gain_trace=state.gain_trace + (gains,),
        power_trace=state.power_trace + (powers,),
        k=state.k + 1,
    )


def run_ais(
    links: LinkSet,
    budget: LinkBudget,
    schedule: SuppressionSchedule,
    eps_r: float = 0.01,
    max_iters: int = 50,
) -> AisState:
    """Iterate to convergence: stop once the rate gain drops to eps_r or less."""
    if eps_r <= 0:
        raise ValueError("rate tolerance must be positive")
    if max_iters < 1:
        raise ValueError("need at least one iteration")
    state = initial_state(links, budget, schedule)
    while state.k < max_iters:
        new_state = ais_iterate(state, links, budget)
        improved = new_state.rate_trace[-1] - state.rate_trace[-1]
        state = new_state
        if improved <= eps_r:
            break
    return state
