"""Seeded Monte Carlo harness: trials, schemes, misalignment, and sweeps.

Each trial derives every random stream from (master_seed, trial_index) plus a
purpose tag, so trials are bit-reproducible and order-independent. Within a
trial the proposed pipeline and the two baselines (steered beams at the
designed position; alternating optimization at a random position) share one
environment realization, giving paired comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .beamforming import (
    AisState,
    SuppressionSchedule,
    eta_floor_rule,
    initial_state,
    run_ais,
)
from .channel import (
    AngleSet,
    EnvParams,
    EnvironmentRealization,
    LinkSet,
    UpaSpec,
    Vec3,
    build_links,
)
from .positioning import (
    FeasibleBox,
    LinkBudget,
    NoLosPositionError,
    approx_upper_bounds,
    conditional_optimal_position,
    los_adjusted_position,
    strict_upper_bounds,
)
from .rates import achievable_rates, effective_gains

_TAG_DN = 31
_TAG_RANDPOS = 32
_TAG_MISALIGN = 33

SCHEMES = ("proposed", "randpos_ais", "despos_steer")
MIN_GROUND_SEPARATION = 10.0  # meters; closer DN draws are resampled


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description with defaults matching the usual setup."""

    dn_rule: str = "disk"  # "fixed", "disk", or "circle"
    dn_x: float = 400.0
    dn_y: float = 300.0
    dn_radius_m: float = 500.0
    h_min: float = 100.0
    h_max: float = 300.0
    eps_x: float = 1.0
    eps_y: float = 1.0
    eps_h: float = 1.0
    upa_s: UpaSpec = field(default_factory=lambda: UpaSpec(4, 4))
    upa_r: UpaSpec = field(default_factory=lambda: UpaSpec(4, 4))
    upa_t: UpaSpec = field(default_factory=lambda: UpaSpec(4, 4))
    upa_d: UpaSpec = field(default_factory=lambda: UpaSpec(4, 4))
    p_s_tot: float = 0.1  # watts (20 dBm)
    p_v_tot: float = 0.1
    noise1: float = 1e-14  # watts (-110 dBm)
    noise2: float = 1e-14
    env: EnvParams = field(default_factory=EnvParams)
    kappa: float = 10.0
    eps_r: float = 0.01
    max_iters: int = 50
    delta_m_deg: float = 0.0
    trials: int = 200
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dn_rule not in ("fixed", "disk", "circle"):
            raise ValueError(f"unknown DN placement rule {self.dn_rule!r}")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.delta_m_deg < 0:
            raise ValueError("misalignment half-width must be nonnegative")
        if self.kappa <= 1:
            raise ValueError("kappa must exceed 1")
        if self.eps_r <= 0:
            raise ValueError("rate tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("need at least one iteration")
        if self.workers < 1:
            raise ValueError("need at least one worker")

    @property
    def budget(self) -> LinkBudget:
        return LinkBudget(
            n_s2v=self.upa_s.n_tot * self.upa_r.n_tot,
            n_v2d=self.upa_t.n_tot * self.upa_d.n_tot,
            p_s_tot=self.p_s_tot,
            p_v_tot=self.p_v_tot,
            noise1=self.noise1,
            noise2=self.noise2,
        )

    @property
    def schedule(self) -> SuppressionSchedule:
        return SuppressionSchedule(
            eta_floor=eta_floor_rule(self.p_s_tot, self.p_v_tot, self.noise1, self.noise2),
            kappa=self.kappa,
        )


@dataclass(frozen=True)
class TrialResult:
    """Everything one trial produced, for aggregation and debugging."""

    trial_index: int
    dn: Vec3
    rho: float
    designed_position: Vec3
    random_position: Vec3
    fallback: bool
    rates: dict[str, float]
    approx_bound_s2v: float
    approx_bound_v2d: float
    strict_bound_s2v: float
    strict_bound_v2d: float
    strict_bound_min: float
    iters: dict[str, int]
    powers_proposed: tuple[float, float]
    rate_trace: tuple[float, ...]
    si_gain_trace: tuple[float, ...]
    s2d_gain_trace: tuple[float, ...]
    power_trace: tuple[tuple[float, float], ...]


def _rng(scenario: Scenario, trial_index: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((scenario.master_seed, trial_index, tag))
    )


def _sample_dn(scenario: Scenario, trial_index: int) -> Vec3:
    """Destination draw under the scenario's placement rule.

    Disk/circle samples are mirrored into the first quadrant (the deployment
    box spans [0, x_d] x [0, y_d]); rotational symmetry makes the mirroring
    statistically neutral. Draws closer than the minimum ground separation are
    rejected and redrawn.
    """
    if scenario.dn_rule == "fixed":
        return Vec3(scenario.dn_x, scenario.dn_y, 0.0)
    rng = _rng(scenario, trial_index, _TAG_DN)
    for _ in range(1000):
        if scenario.dn_rule == "disk":
            radius = scenario.dn_radius_m * math.sqrt(rng.uniform())
        else:
            radius = scenario.dn_radius_m
        phi = rng.uniform(0.0, 2.0 * math.pi)
        if radius < MIN_GROUND_SEPARATION:
            continue
        return Vec3(abs(radius * math.cos(phi)), abs(radius * math.sin(phi)), 0.0)
    raise ValueError("DN sampling kept violating the minimum ground separation")


def _snap(value: float, step: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, round(value / step) * step))


def _sample_random_position(scenario: Scenario, trial_index: int, box: FeasibleBox) -> Vec3:
    rng = _rng(scenario, trial_index, _TAG_RANDPOS)
    x = _snap(rng.uniform(0.0, box.x_d), box.eps_x, 0.0, box.x_d)
    y = _snap(rng.uniform(0.0, box.y_d), box.eps_y, 0.0, box.y_d)
    h = _snap(rng.uniform(box.h_min, box.h_max), box.eps_h, box.h_min, box.h_max)
    return Vec3(x, y, h)


def _perturbed_angles(angles: AngleSet, offsets: np.ndarray) -> AngleSet:
    el = min(math.pi / 2, max(-math.pi / 2, angles.elevation + offsets[0]))
    az = (angles.azimuth + offsets[1]) % (2.0 * math.pi)
    return AngleSet(el, az)


def apply_misalignment(links: LinkSet, delta_m_deg: float, rng: np.random.Generator) -> LinkSet:
    """Perturb every departure/arrival angle of the two relay links.

    Offsets are uniform on [-delta/2, +delta/2]; the underlying uniform block
    is drawn once regardless of delta, so sweeps over delta with the same
    trial seed are paired (common random numbers). With delta 0 the original
    links object is returned unchanged.
    """
    from .channel import ChannelMatrix, PathComponent, steering_vector

    n_rows = 1 + max(
        sum(1 for c in links.s2v.components if not c.is_los),
        sum(1 for c in links.v2d.components if not c.is_los),
    )
    block = rng.uniform(-0.5, 0.5, size=(2, n_rows, 4))
    if delta_m_deg == 0.0:
        return links
    delta = math.radians(delta_m_deg)

    def perturb(channel, upa_tx, upa_rx, link_idx):
        comps = []
        entries = np.zeros_like(channel.entries)
        nlos_row = 0
        for comp in channel.components:
            if comp.is_los:
                row = 0
            else:
                nlos_row += 1
                row = nlos_row
            offs = delta * block[link_idx, row]
            dep = _perturbed_angles(comp.departure, offs[0:2])
            arr = _perturbed_angles(comp.arrival, offs[2:4])
            new = PathComponent(gain=comp.gain, departure=dep, arrival=arr, is_los=comp.is_los)
            comps.append(new)
            entries += new.gain * np.outer(
                steering_vector(upa_rx, arr), steering_vector(upa_tx, dep).conj()
            )
        return ChannelMatrix(entries=entries, role=channel.role, components=tuple(comps))

    return replace(
        links,
        s2v=perturb(links.s2v, links.upa_s, links.upa_r, 0),
        v2d=perturb(links.v2d, links.upa_t, links.upa_d, 1),
    )


def _evaluate_rate(
    state: AisState, links: LinkSet, scenario: Scenario
) -> float:
    """End-to-end rate of a designed state against (possibly perturbed) channels."""
    gains = effective_gains(
        state.w_s, state.w_r, state.w_t, state.w_d, links.s2v, links.si, links.v2d, links.s2d
    )
    _, _, r = achievable_rates(gains, state.powers, scenario.noise1, scenario.noise2)
    return r


def run_trial(scenario: Scenario, trial_index: int) -> TrialResult:
    """One full paired trial: proposed pipeline, both baselines, both bounds."""
    sn = Vec3(0.0, 0.0, 0.0)
    dn = _sample_dn(scenario, trial_index)
    box = FeasibleBox(
        x_d=dn.x,
        y_d=dn.y,
        h_min=scenario.h_min,
        h_max=scenario.h_max,
        eps_x=scenario.eps_x,
        eps_y=scenario.eps_y,
        eps_h=scenario.eps_h,
    )
    env_real = EnvironmentRealization(
        scenario.env,
        scenario.master_seed,
        trial_index,
        grid_step=(scenario.eps_x, scenario.eps_y, scenario.eps_h),
    )
    budget = scenario.budget

    p_star, rho = conditional_optimal_position(budget, box, scenario.env, dn)
    fallback = False
    try:
        designed = los_adjusted_position(env_real, scenario.env, p_star, box, sn, dn)
    except NoLosPositionError:
        designed = p_star
        fallback = True

    def links_at(pos: Vec3) -> LinkSet:
        return build_links(
            env_real,
            scenario.env,
            sn,
            dn,
            pos,
            scenario.upa_s,
            scenario.upa_r,
            scenario.upa_t,
            scenario.upa_d,
        )

    links_des = links_at(designed)
    rand_pos = _sample_random_position(scenario, trial_index, box)
    links_rand = links_at(rand_pos)

    mis_rng = _rng(scenario, trial_index, _TAG_MISALIGN)
    links_des_eval = apply_misalignment(links_des, scenario.delta_m_deg, mis_rng)
    mis_rng_rand = _rng(scenario, trial_index, _TAG_MISALIGN)
    links_rand_eval = apply_misalignment(links_rand, scenario.delta_m_deg, mis_rng_rand)

    proposed = run_ais(links_des, budget, scenario.schedule, scenario.eps_r, scenario.max_iters)
    steer = initial_state(links_des, budget, scenario.schedule)
    rand_ais = run_ais(links_rand, budget, scenario.schedule, scenario.eps_r, scenario.max_iters)

    rates = {
        "proposed": _evaluate_rate(proposed, links_des_eval, scenario),
        "despos_steer": _evaluate_rate(steer, links_des_eval, scenario),
        "randpos_ais": _evaluate_rate(rand_ais, links_rand_eval, scenario),
    }
    ab1, ab2 = approx_upper_bounds(designed, budget, scenario.env, sn, dn)
    sb1, sb2 = strict_upper_bounds(links_des.s2v, links_des.v2d, budget)

    return TrialResult(
        trial_index=trial_index,
        dn=dn,
        rho=rho,
        designed_position=designed,
        random_position=rand_pos,
        fallback=fallback,
        rates=rates,
        approx_bound_s2v=ab1,
        approx_bound_v2d=ab2,
        strict_bound_s2v=sb1,
        strict_bound_v2d=sb2,
        strict_bound_min=min(sb1, sb2),
        iters={"proposed": proposed.k, "randpos_ais": rand_ais.k, "despos_steer": 0},
        powers_proposed=(proposed.powers.p_s, proposed.powers.p_v),
        rate_trace=proposed.rate_trace,
        si_gain_trace=tuple(g.g_si for g in proposed.gain_trace),
        s2d_gain_trace=tuple(g.g_s2d for g in proposed.gain_trace),
        power_trace=tuple((p.p_s, p.p_v) for p in proposed.power_trace),
    )


def _run_trial_tuple(args: tuple[Scenario, int]) -> TrialResult:
    return run_trial(*args)


def run_trials(scenario: Scenario, trials: int | None = None) -> list[TrialResult]:
    """All trials of a scenario, sorted by trial index regardless of workers."""
    n = scenario.trials if trials is None else trials
    indices = list(range(n))
    if scenario.workers > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=scenario.workers) as pool:
            results = list(pool.map(_run_trial_tuple, [(scenario, i) for i in indices]))
    else:
        results = [run_trial(scenario, i) for i in indices]
    return sorted(results, key=lambda r: r.trial_index)


@dataclass(frozen=True)
class OutputRow:
    """One aggregated line of a sweep table."""

    sweep_param: str
    sweep_value: float
    scheme: str
    mean_rate_bps_hz: float
    stderr: float
    n_trials: int
    mean_iters: float
    fallback_frac: float

    FIELDS = (
        "sweep_param",
        "sweep_value",
        "scheme",
        "mean_rate_bps_hz",
        "stderr",
        "n_trials",
        "mean_iters",
        "fallback_frac",
    )


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate(results: list[TrialResult], sweep_param: str, sweep_value: float) -> list[OutputRow]:
    """Four rows per sweep point: the three schemes plus the strict bound."""
    fallback_frac = float(np.mean([r.fallback for r in results]))
    rows = []
    for scheme in SCHEMES:
        mean, se = _mean_stderr([r.rates[scheme] for r in results])
        mean_iters = float(np.mean([r.iters[scheme] for r in results]))
        rows.append(
            OutputRow(sweep_param, sweep_value, scheme, mean, se, len(results), mean_iters, fallback_frac)
        )
    mean, se = _mean_stderr([r.strict_bound_min for r in results])
    rows.append(
        OutputRow(sweep_param, sweep_value, "strict_bound", mean, se, len(results), 0.0, fallback_frac)
    )
    return rows


SWEEPABLE = ("p_s_tot_dbm", "p_v_tot_dbm", "distance_m", "array", "delta_m_deg")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def apply_sweep_value(scenario: Scenario, name: str, value: float) -> Scenario:
    """Scenario variant with one swept parameter replaced."""
    if name == "p_s_tot_dbm":
        return replace(scenario, p_s_tot=dbm_to_watts(value))
    if name == "p_v_tot_dbm":
        return replace(scenario, p_v_tot=dbm_to_watts(value))
    if name == "distance_m":
        return replace(scenario, dn_rule="circle", dn_radius_m=value)
    if name == "array":
        n = int(value)
        if n != value or n < 1:
            raise ValueError("array size must be a positive integer")
        upa = UpaSpec(n, n)
        return replace(scenario, upa_s=upa, upa_r=upa, upa_t=upa, upa_d=upa)
    if name == "delta_m_deg":
        return replace(scenario, delta_m_deg=value)
    raise ValueError(f"unknown sweep parameter {name!r}")


@dataclass(frozen=True)
class SweepSpec:
    """A parameter name, its values, and the base scenario to vary."""

    param: str
    values: tuple[float, ...]
    base: Scenario

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE:
            raise ValueError(f"unknown sweep parameter {self.param!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")


def run_sweep(spec: SweepSpec) -> list[OutputRow]:
    """Aggregated rows for every swept value, in input order."""
    rows: list[OutputRow] = []
    for value in spec.values:
        scenario = apply_sweep_value(spec.base, spec.param, value)
        results = run_trials(scenario)
        rows.extend(aggregate(results, spec.param, value))
    return rows
