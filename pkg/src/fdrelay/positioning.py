"""UAV relay placement: closed-form optimum and LoS-adjusted deployment.

The conditional optimum places the relay on the segment between the two
ground nodes at the minimum height, balancing the two links' ideal-beamforming
rate upper bounds. The deployed position then moves to the nearest grid point
whose two links both draw line-of-sight in the trial's environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import EnvParams, EnvironmentRealization, ROLE_S2V, ROLE_V2D, Vec3

_TAG_TIEBREAK = 21  # seed purpose tag for equidistant-candidate tie breaking


class NoLosPositionError(RuntimeError):
    """The feasible box holds no grid point with LoS on both links."""


@dataclass(frozen=True)
class FeasibleBox:
    """Deployment region x in [0, x_d], y in [0, y_d], h in [h_min, h_max]."""

    x_d: float
    y_d: float
    h_min: float
    h_max: float
    eps_x: float = 1.0
    eps_y: float = 1.0
    eps_h: float = 1.0

    def __post_init__(self) -> None:
        if self.x_d < 0 or self.y_d < 0:
            raise ValueError("box extents must be nonnegative")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if min(self.eps_x, self.eps_y, self.eps_h) <= 0:
            raise ValueError("grid steps must be positive")

    def contains(self, p: Vec3, slack: float = 1e-9) -> bool:
        return (
            -slack <= p.x <= self.x_d + slack
            and -slack <= p.y <= self.y_d + slack
            and self.h_min - slack <= p.z <= self.h_max + slack
        )


@dataclass(frozen=True)
class LinkBudget:
    """Array-gain products, power caps, and noise powers of the two hops."""

    n_s2v: int  # transmit elements times receive elements, first hop
    n_v2d: int  # same product for the second hop
    p_s_tot: float  # watts
    p_v_tot: float  # watts
    noise1: float  # watts, at the relay receiver
    noise2: float  # watts, at the destination receiver

    def __post_init__(self) -> None:
        if min(self.n_s2v, self.n_v2d) < 1:
            raise ValueError("array products must be positive")
        if min(self.p_s_tot, self.p_v_tot, self.noise1, self.noise2) <= 0:
            raise ValueError("powers and noise levels must be positive")


class DegenerateEndpointsError(ValueError):
    """Source and destination are the same ground point."""


def conditional_optimal_position(
    budget: LinkBudget, box: FeasibleBox, env: EnvParams, dn: Vec3
) -> tuple[Vec3, float]:
    """Closed-form relay position on the SN-DN segment at height h_min.

    Returns the position and the segment fraction rho in [0, 1]. rho pins to
    0 (above the source) or 1 (above the destination) when one link's budget
    cannot catch up even at the extreme placement; equal budgets give the
    midpoint; otherwise the balancing root of the quadratic obtained by
    equating the two distance-scaled budgets.
    """
    x_d, y_d = dn.x, dn.y
    d_sq = x_d * x_d + y_d * y_d
    if d_sq == 0.0:
        raise DegenerateEndpointsError("SN and DN coincide")
    alpha = env.alpha_los
    h = box.h_min
    q_s = budget.n_s2v * budget.p_s_tot / budget.noise1
    q_v = budget.n_v2d * budget.p_v_tot / budget.noise2
    edge = h**alpha / (d_sq + h * h) ** (alpha / 2.0)

    if q_s / q_v <= edge:
        rho = 0.0
    elif q_v / q_s <= edge:
        rho = 1.0
    elif q_s == q_v:
        rho = 0.5
    else:
        big_a = q_s ** (2.0 / alpha)
        big_b = q_v ** (2.0 / alpha)
        a = (big_a - big_b) * d_sq
        b = -2.0 * big_a * d_sq
        c = big_a * d_sq + (big_a - big_b) * h * h
        if abs(a) < 1e-12 * abs(b):
            # near-degenerate quadratic: the linear root is the stable form
            rho = -c / b
        else:
            disc = b * b - 4.0 * a * c
            rho = (-b - math.sqrt(disc)) / (2.0 * a)
        rho = min(1.0, max(0.0, rho))
    return Vec3(rho * x_d, rho * y_d, h), rho


def approx_upper_bounds(
    position: Vec3, budget: LinkBudget, env: EnvParams, sn: Vec3, dn: Vec3
) -> tuple[float, float]:
    """Ideal-beamforming LoS-only rate bounds of the two hops, bps/Hz."""
    if position.z <= 0:
        raise ValueError("relay must be above ground")
    g_ref = env.ref_amplitude**2
    d1 = sn.distance_to(position)
    d2 = dn.distance_to(position)
    snr1 = g_ref * budget.n_s2v * budget.p_s_tot / (d1**env.alpha_los * budget.noise1)
    snr2 = g_ref * budget.n_v2d * budget.p_v_tot / (d2**env.alpha_los * budget.noise2)
    return math.log2(1.0 + snr1), math.log2(1.0 + snr2)


def strict_upper_bounds(h_s2v, h_v2d, budget: LinkBudget) -> tuple[float, float]:
    """All-path ideal-beamforming rate bounds from the channels' path lists."""
    for ch in (h_s2v, h_v2d):
        if ch.role == "SI":
            raise ValueError("self-interference channel carries no path metadata")
    s1 = sum(abs(c.gain) ** 2 for c in h_s2v.components)
    s2 = sum(abs(c.gain) ** 2 for c in h_v2d.components)
    r1 = math.log2(1.0 + s1 * budget.n_s2v * budget.p_s_tot / budget.noise1)
    r2 = math.log2(1.0 + s2 * budget.n_v2d * budget.p_v_tot / budget.noise2)
    return r1, r2


def _both_los(
    env_real: EnvironmentRealization, sn: Vec3, dn: Vec3, candidate: Vec3
) -> bool:
    return env_real.los_indicator(ROLE_S2V, sn, candidate) and env_real.los_indicator(
        ROLE_V2D, dn, candidate
    )


def los_adjusted_position(
    env_real: EnvironmentRealization,
    env: EnvParams,
    p_star: Vec3,
    box: FeasibleBox,
    sn: Vec3,
    dn: Vec3,
    rng: np.random.Generator | None = None,
) -> Vec3:
    """Nearest dual-LoS grid point around the closed-form optimum.

    Expands cubic neighborhood rings around p_star (heights only upward from
    h_min), fully evaluating each ring before choosing the member closest to
    p_star; exact distance ties are broken uniformly with the trial seed.
    Raises :class:`NoLosPositionError` once the box is exhausted.
    """
    if not box.contains(p_star):
        raise ValueError("designed position lies outside the feasible box")
    if _both_los(env_real, sn, dn, p_star):
        return p_star
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence(
                (env_real.master_seed, env_real.trial_index, _TAG_TIEBREAK)
            )
        )

    ex, ey, eh = box.eps_x, box.eps_y, box.eps_h
    # ring index bounds that still intersect the box
    t_x = max(math.ceil((box.x_d - p_star.x) / ex), math.ceil(p_star.x / ex))
    t_y = max(math.ceil((box.y_d - p_star.y) / ey), math.ceil(p_star.y / ey))
    t_h = math.ceil((box.h_max - box.h_min) / eh)
    t_cap = max(t_x, t_y, t_h)

    t = 1
    while t <= t_cap:
        hits: list[tuple[float, Vec3]] = []
        for i in range(-t, t + 1):
            for j in range(-t, t + 1):
                for k in range(0, t + 1):
                    if max(abs(i), abs(j), k) != t:
                        continue  # ring members only; inner cube already seen
                    cand = Vec3(p_star.x + i * ex, p_star.y + j * ey, box.h_min + k * eh)
                    if not box.contains(cand):
                        continue
                    if _both_los(env_real, sn, dn, cand):
                        hits.append((p_star.distance_to(cand), cand))
        if hits:
            best = min(d for d, _ in hits)
            tied = [c for d, c in hits if d == best]
            if len(tied) == 1:
                return tied[0]
            return tied[int(rng.integers(len(tied)))]
        t += 1
    raise NoLosPositionError("no LoS position found")
