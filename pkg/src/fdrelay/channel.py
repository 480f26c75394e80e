"""Channel synthesis for a ground-UAV-ground mmWave relay.

Builds steering vectors for uniform planar arrays, link geometry, line-of-sight
and multipath path gains, logistic LoS probabilities, the far-field channel
matrices of the three links (source-to-UAV, UAV-to-destination, and the blocked
source-to-destination interference path), and the near-field self-interference
channel between the relay's transmit and receive panels.

All randomness flows through :class:`EnvironmentRealization`, which derives
every stream from ``(master_seed, trial_index)`` plus a purpose tag, so a trial
replays bit-exactly and blockage is a property of the environment rather than
of query order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8

ROLE_S2V = "S2V"
ROLE_V2D = "V2D"
ROLE_S2D = "S2D"
ROLE_SI = "SI"
FARFIELD_ROLES = (ROLE_S2V, ROLE_V2D, ROLE_S2D)

_ROLE_IDS = {ROLE_S2V: 1, ROLE_V2D: 2, ROLE_S2D: 3, ROLE_SI: 4}
_TAG_NLOS = 11  # seed purpose tag for per-role multipath draws


class DegenerateGeometryError(ValueError):
    """Two endpoints coincide; the link direction is undefined."""


@dataclass(frozen=True)
class Vec3:
    """Point in the ground-anchored coordinate frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("Vec3 components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Vec3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class UpaSpec:
    """Uniform planar array: ``rows x cols`` elements, spacing in wavelengths."""

    rows: int
    cols: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("UPA needs at least one element per axis")
        if self.spacing_over_lambda <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_tot(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class AngleSet:
    """Elevation in [-pi/2, pi/2], azimuth in [0, 2*pi)."""

    elevation: float
    azimuth: float

    def __post_init__(self) -> None:
        if not (-math.pi / 2 - 1e-12 <= self.elevation <= math.pi / 2 + 1e-12):
            raise ValueError("elevation outside [-pi/2, pi/2]")
        if not (0.0 <= self.azimuth < 2 * math.pi + 1e-12):
            raise ValueError("azimuth outside [0, 2*pi)")


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: complex amplitude plus departure/arrival angles."""

    gain: complex
    departure: AngleSet
    arrival: AngleSet
    is_los: bool


@dataclass(frozen=True)
class EnvParams:
    """Propagation environment parameters."""

    fc_hz: float = 38e9
    alpha_los: float = 1.9
    alpha_nlos: float = 3.3
    num_nlos: int = 4
    sigma_f: float = 0.5
    los_a: float = 11.95
    los_b: float = 0.14
    panel_separation: float = 10.0  # Tx/Rx panel center offset, in wavelengths

    def __post_init__(self) -> None:
        if self.fc_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if not (0 < self.alpha_los <= self.alpha_nlos):
            raise ValueError("need 0 < alpha_los <= alpha_nlos")
        if self.num_nlos < 0:
            raise ValueError("NLoS path count must be >= 0")
        if self.sigma_f <= 0:
            raise ValueError("shadow-factor std must be positive")
        if self.los_a <= 0 or self.los_b <= 0:
            raise ValueError("logistic parameters must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc_hz

    @property
    def ref_amplitude(self) -> float:
        """Free-space amplitude coefficient c / (4*pi*f_c)."""
        return SPEED_OF_LIGHT / (4.0 * math.pi * self.fc_hz)


@dataclass(frozen=True)
class ChannelMatrix:
    """Complex channel (rx_elements x tx_elements) with its path metadata."""

    entries: np.ndarray
    role: str
    components: tuple[PathComponent, ...]

    def __post_init__(self) -> None:
        if self.role not in _ROLE_IDS:
            raise ValueError(f"unknown channel role {self.role!r}")


def steering_vector(upa: UpaSpec, angles: AngleSet) -> np.ndarray:
    """Array response of a horizontal UPA toward (elevation, azimuth).

    Element (m, n), 0-based and vectorized row-major with m outermost, has
    phase 2*pi*(d/lambda)*cos(el)*(m*cos(az) + n*sin(az)); element (0, 0) is
    the phase reference. The squared norm is always rows*cols.
    """
    m = np.arange(upa.rows, dtype=float)[:, None]
    n = np.arange(upa.cols, dtype=float)[None, :]
    proj = m * math.cos(angles.azimuth) + n * math.sin(angles.azimuth)
    phase = 2.0 * math.pi * upa.spacing_over_lambda * math.cos(angles.elevation) * proj
    return np.exp(1j * phase).ravel()


def link_geometry(src: Vec3, dst: Vec3) -> tuple[float, AngleSet]:
    """Distance and (elevation, azimuth) of the src -> dst line.

    Elevation is arctan(dz / horizontal distance); azimuth is the
    four-quadrant angle of (dx, dy) mapped into [0, 2*pi). A vertical link
    has azimuth 0 by convention.
    """
    dx = dst.x - src.x
    dy = dst.y - src.y
    dz = dst.z - src.z
    horiz = math.hypot(dx, dy)
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        raise DegenerateGeometryError("degenerate geometry: endpoints coincide")
    if horiz == 0.0:
        elevation = math.pi / 2 if dz > 0 else -math.pi / 2
        azimuth = 0.0
    else:
        elevation = math.atan(dz / horiz)
        azimuth = math.atan2(dy, dx) % (2.0 * math.pi)
        # the modulo of a tiny negative angle rounds up to exactly 2*pi
        if azimuth >= 2.0 * math.pi:
            azimuth = 0.0
    return dist, AngleSet(elevation, azimuth)


def los_path_gain(distance: float, env: EnvParams) -> float:
    """Line-of-sight amplitude (c/(4*pi*f_c)) * d^(-alpha_los/2)."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return env.ref_amplitude * distance ** (-env.alpha_los / 2.0)


def nlos_path_gain(distance: float, env: EnvParams, draw: complex) -> complex:
    """Multipath amplitude (c/(4*pi*f_c)) * d^(-alpha_nlos/2) * draw.

    ``draw`` is a circularly-symmetric complex Gaussian sample of std sigma_f,
    supplied by the environment realization.
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    return env.ref_amplitude * distance ** (-env.alpha_nlos / 2.0) * draw


def los_probability(elevation: float, env: EnvParams) -> float:
    """Logistic LoS probability 1 / (1 + a*exp(-b*(deg(el) - a)))."""
    deg = math.degrees(elevation)
    return 1.0 / (1.0 + env.los_a * math.exp(-env.los_b * (deg - env.los_a)))


def _hash_uniform(*key_parts) -> float:
    """Deterministic uniform in [0, 1) keyed by the given integers/strings."""
    text = "|".join(str(p) for p in key_parts)
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


@dataclass(frozen=True)
class NlosDraw:
    """Raw per-path draws; the distance-dependent factor is applied later."""

    departure: AngleSet
    arrival: AngleSet
    gain_draw: complex


class EnvironmentRealization:
    """Seeded, position-consistent randomness for one Monte Carlo trial.

    The LoS indicator at a query position is a pure function of
    (master_seed, trial_index, link role, grid cell): a sha256-derived uniform
    compared against the logistic LoS probability evaluated at the snapped
    position. Multipath draws are made once per (trial, role) in a fixed
    order and are position-independent.
    """

    def __init__(
        self,
        env: EnvParams,
        master_seed: int,
        trial_index: int = 0,
        grid_step: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ) -> None:
        if any(s <= 0 for s in grid_step):
            raise ValueError("grid steps must be positive")
        self.env = env
        self.master_seed = int(master_seed)
        self.trial_index = int(trial_index)
        self.grid_step = tuple(float(s) for s in grid_step)
        self._nlos_cache: dict[str, tuple[NlosDraw, ...]] = {}

    def quantize(self, position: Vec3) -> tuple[int, int, int]:
        """Snap a position to its LoS-field cell (absolute grid from origin)."""
        ex, ey, eh = self.grid_step
        return (round(position.x / ex), round(position.y / ey), round(position.z / eh))

    def cell_center(self, cell: tuple[int, int, int]) -> Vec3:
        ex, ey, eh = self.grid_step
        return Vec3(cell[0] * ex, cell[1] * ey, cell[2] * eh)

    def los_indicator(self, role: str, ground: Vec3, uav: Vec3) -> bool:
        """Bernoulli LoS state of a ground-to-UAV link at the UAV's grid cell."""
        if role not in (ROLE_S2V, ROLE_V2D):
            raise ValueError(f"LoS field only covers ground-UAV links, got {role!r}")
        cell = self.quantize(uav)
        snapped = self.cell_center(cell)
        _, angles = link_geometry(ground, snapped)
        p = los_probability(angles.elevation, self.env)
        u = _hash_uniform(self.master_seed, self.trial_index, role, *cell)
        return u < p

    def nlos_draws(self, role: str) -> tuple[NlosDraw, ...]:
        """The trial's multipath draws for one link role (cached, fixed order)."""
        if role not in FARFIELD_ROLES:
            raise ValueError(f"no multipath draws for role {role!r}")
        if role not in self._nlos_cache:
            ss = np.random.SeedSequence(
                (self.master_seed, self.trial_index, _TAG_NLOS, _ROLE_IDS[role])
            )
            rng = np.random.default_rng(ss)
            draws = []
            for _ in range(self.env.num_nlos):
                dep_az = rng.uniform(0.0, 2.0 * math.pi)
                dep_el = rng.uniform(0.0, math.pi / 2)
                arr_az = rng.uniform(0.0, 2.0 * math.pi)
                arr_el = rng.uniform(0.0, math.pi / 2)
                re, im = rng.normal(0.0, self.env.sigma_f / math.sqrt(2.0), size=2)
                draws.append(
                    NlosDraw(
                        departure=AngleSet(dep_el, dep_az),
                        arrival=AngleSet(arr_el, arr_az),
                        gain_draw=complex(re, im),
                    )
                )
            self._nlos_cache[role] = tuple(draws)
        return self._nlos_cache[role]


def _rank1(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    return np.outer(rx, tx.conj())


def build_farfield_channel(
    role: str,
    env_real: EnvironmentRealization,
    env: EnvParams,
    src: Vec3,
    dst: Vec3,
    tx_upa: UpaSpec,
    rx_upa: UpaSpec,
) -> ChannelMatrix:
    """Far-field channel: LoS rank-1 term (if drawn) plus NLoS superposition.

    The ground-to-destination link (S2D) never carries a LoS term; for the
    two UAV links the LoS indicator comes from the position-consistent field,
    with the UAV endpoint being dst for S2V and src for V2D. LoS amplitude,
    distance, and angles use the actual (unsnapped) positions; only the
    indicator is evaluated on the grid.
    """
    if role not in FARFIELD_ROLES:
        raise ValueError(f"far-field builder got role {role!r}")
    dist, _ = link_geometry(src, dst)
    components: list[PathComponent] = []

    if role != ROLE_S2D:
        ground, uav = (src, dst) if role == ROLE_S2V else (dst, src)
        if env_real.los_indicator(role, ground, uav):
            _, los_angles = link_geometry(ground, uav)
            beta0 = los_path_gain(dist, env)
            components.append(
                PathComponent(
                    gain=complex(beta0), departure=los_angles, arrival=los_angles, is_los=True
                )
            )

    for draw in env_real.nlos_draws(role):
        gain = nlos_path_gain(dist, env, draw.gain_draw)
        components.append(
            PathComponent(gain=gain, departure=draw.departure, arrival=draw.arrival, is_los=False)
        )

    entries = np.zeros((rx_upa.n_tot, tx_upa.n_tot), dtype=complex)
    for comp in components:
        a_rx = steering_vector(rx_upa, comp.arrival)
        a_tx = steering_vector(tx_upa, comp.departure)
        entries += comp.gain * _rank1(a_rx, a_tx)
    return ChannelMatrix(entries=entries, role=role, components=tuple(components))


def _panel_element_positions(upa: UpaSpec, env: EnvParams, center_z: float) -> np.ndarray:
    """Element coordinates of a horizontal panel centered at (0, 0, center_z).

    The m index runs along the body x-axis, n along y; the grid is centered
    on the panel center.
    """
    d = upa.spacing_over_lambda * env.wavelength
    m = (np.arange(upa.rows) - (upa.rows - 1) / 2.0) * d
    n = (np.arange(upa.cols) - (upa.cols - 1) / 2.0) * d
    xs = np.repeat(m, upa.cols)
    ys = np.tile(n, upa.rows)
    return np.column_stack([xs, ys, np.full(upa.n_tot, center_z)])


def si_element_distances(env: EnvParams, tx_upa: UpaSpec, rx_upa: UpaSpec) -> np.ndarray:
    """Pairwise Rx-element to Tx-element distances of the two relay panels.

    The panels are horizontal and stacked along the body vertical axis, the
    receive panel a fixed multiple of the wavelength above the transmit one.
    Stacking along the array normal keeps the self-interference subspace away
    from the steering directions of ground nodes at ordinary elevations.
    """
    if env.panel_separation <= 0:
        raise ValueError("panel separation must be positive")
    offset = env.panel_separation * env.wavelength
    tx_pos = _panel_element_positions(tx_upa, env, 0.0)
    rx_pos = _panel_element_positions(rx_upa, env, offset)
    diff = rx_pos[:, None, :] - tx_pos[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def build_si_channel(env: EnvParams, tx_upa: UpaSpec, rx_upa: UpaSpec) -> ChannelMatrix:
    """Near-field self-interference channel between the relay's panels.

    Entry (m, n) = (c/(4*pi*f_c)) * r_mn^(-alpha_los/2) * exp(-j*2*pi*r_mn/lambda)
    with r_mn the exact element-to-element distance; no plane-wave assumption.
    """
    r = si_element_distances(env, tx_upa, rx_upa)
    amp = env.ref_amplitude * r ** (-env.alpha_los / 2.0)
    entries = amp * np.exp(-2j * math.pi * r / env.wavelength)
    return ChannelMatrix(entries=entries, role=ROLE_SI, components=())


@dataclass(frozen=True)
class LinkSet:
    """The four channels of one trial plus the LoS-design angles and arrays."""

    s2v: ChannelMatrix
    v2d: ChannelMatrix
    s2d: ChannelMatrix
    si: ChannelMatrix
    s2v_angles: AngleSet
    v2d_angles: AngleSet
    upa_s: UpaSpec
    upa_r: UpaSpec
    upa_t: UpaSpec
    upa_d: UpaSpec


def build_links(
    env_real: EnvironmentRealization,
    env: EnvParams,
    sn: Vec3,
    dn: Vec3,
    uav: Vec3,
    upa_s: UpaSpec,
    upa_r: UpaSpec,
    upa_t: UpaSpec,
    upa_d: UpaSpec,
) -> LinkSet:
    """Synthesize all four channels for a UAV position within one trial."""
    s2v = build_farfield_channel(ROLE_S2V, env_real, env, sn, uav, upa_s, upa_r)
    v2d = build_farfield_channel(ROLE_V2D, env_real, env, uav, dn, upa_t, upa_d)
    s2d = build_farfield_channel(ROLE_S2D, env_real, env, sn, dn, upa_s, upa_d)
    si = build_si_channel(env, upa_t, upa_r)
    _, s2v_angles = link_geometry(sn, uav)
    _, v2d_angles = link_geometry(dn, uav)
    return LinkSet(
        s2v=s2v,
        v2d=v2d,
        s2d=s2d,
        si=si,
        s2v_angles=s2v_angles,
        v2d_angles=v2d_angles,
        upa_s=upa_s,
        upa_r=upa_r,
        upa_t=upa_t,
        upa_d=upa_d,
    )
