"""Flat-fading channel synthesis for two links sharing two surfaces.

Each link sees a weak direct path plus cascaded paths through BOTH
surfaces, so reconfiguring either surface perturbs both links. The
scatter statistics are Rayleigh: per-element incident/departing gains
are i.i.d. circularly-symmetric complex Gaussians whose scale is set so
the aggregate cascade through surface r has the rms amplitude given by
``path_gain_profile[link][surface]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ris import RisConfig, RisSurface, element_reflections

__all__ = [
    "CO_LOCATED",
    "SEPARATED",
    "Environment",
    "ChannelRealization",
    "LinkChannel",
    "cascade_profile",
    "draw_realization",
    "link_gain",
    "best_case_gain",
]

CO_LOCATED = "co_located"
SEPARATED = "separated"

# Separated placement: surfaces sit on orthogonal axes, so each surface
# catches the cross link's transmission 10 dB (amplitude) below its own.
SEPARATED_CROSS_REL_DB = -10.0

_N_LINKS = 2
_EXHAUSTIVE_LIMIT = 20


def cascade_profile(
    own_rms: tuple[float, float], scenario_kind: str, cross_rel_db: float | None = None
) -> np.ndarray:
    """Build the 2x2 cascade-rms matrix (rows: links, cols: surfaces).

    Link ``l`` is served by surface ``l``; the off-diagonal entries carry
    the cross-coupling. Co-located placement couples symmetrically at
    full strength, separated placement attenuates the cross terms.
    """
    if scenario_kind not in (CO_LOCATED, SEPARATED):
        raise ValueError(f"unknown scenario_kind {scenario_kind!r}")
    if cross_rel_db is None:
        cross_rel_db = 0.0 if scenario_kind == CO_LOCATED else SEPARATED_CROSS_REL_DB
    cross = 10.0 ** (cross_rel_db / 20.0)
    p = np.array(
        [
            [own_rms[0], own_rms[0] * cross],
            [own_rms[1] * cross, own_rms[1]],
        ]
    )
    return p


@dataclass(frozen=True)
class Environment:
    """Static description of the shared RF environment for one experiment."""

    seed: int
    surfaces: tuple[RisSurface, RisSurface]
    link_freqs_hz: tuple[float, float]
    path_gain_profile: np.ndarray
    direct_path_rel_db: float = -20.0
    scenario_kind: str = SEPARATED

    def __post_init__(self) -> None:
        if len(self.surfaces) != _N_LINKS:
            raise ValueError("exactly two surfaces are required")
        if len(self.link_freqs_hz) != _N_LINKS:
            raise ValueError("exactly two link frequencies are required")
        if not self.link_freqs_hz[0] < self.link_freqs_hz[1]:
            raise ValueError("link_freqs_hz must be strictly increasing")
        if min(self.link_freqs_hz) <= 0:
            raise ValueError("link frequencies must be positive")
        if self.direct_path_rel_db >= 0:
            raise ValueError("direct_path_rel_db must be negative (direct path weaker)")
        if self.scenario_kind not in (CO_LOCATED, SEPARATED):
            raise ValueError(f"unknown scenario_kind {self.scenario_kind!r}")
        profile = np.ascontiguousarray(self.path_gain_profile, dtype=float)
        if profile.shape != (_N_LINKS, _N_LINKS):
            raise ValueError("path_gain_profile must be a 2x2 (link, surface) matrix")
        if np.any(profile < 0):
            raise ValueError("path_gain_profile entries must be non-negative")
        profile.setflags(write=False)
        object.__setattr__(self, "path_gain_profile", profile)

    @property
    def n_links(self) -> int:
        return _N_LINKS


@dataclass(frozen=True)
class ChannelRealization:
    """One frozen draw of the scatter environment.

    ``incident[link][surface]`` and ``departing[link][surface]`` hold the
    per-element complex gains of the Tx->surface and surface->Rx legs;
    ``direct`` holds the Tx->Rx gain per link. Drawn once per experiment
    and immutable thereafter (static indoor environment).
    """

    incident: tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    departing: tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    direct: np.ndarray

    def __post_init__(self) -> None:
        for grid in (self.incident, self.departing):
            for per_link in grid:
                for arr in per_link:
                    arr.setflags(write=False)
        self.direct.setflags(write=False)


@dataclass(frozen=True)
class LinkChannel:
    """Flat-fading complex gain of one link under specific configurations."""

    gain: complex

    def __post_init__(self) -> None:
        if not np.isfinite(self.gain):
            raise ValueError("link gain must be finite")


def draw_realization(env: Environment) -> ChannelRealization:
    """Draw the per-element and direct gains for ``env``, seeded by ``env.seed``.

    The draw order is fixed (link-major, surface-minor, incident before
    departing, direct gains last) so a given seed always yields the same
    realization regardless of caller. Scales are chosen so that
    E|sum_m a_m G b_m|^2 equals ``path_gain_profile[l][r]**2`` (the state
    -independent reflection magnitude makes this hold for any config)
    and E|direct|^2 sits ``direct_path_rel_db`` below the total cascade
    power.
    """
    rng = np.random.default_rng(env.seed)

    def _cn(scale: float, n: int) -> np.ndarray:
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return scale / np.sqrt(2.0) * z

    incident: list[tuple[np.ndarray, np.ndarray]] = []
    departing: list[tuple[np.ndarray, np.ndarray]] = []
    for link in range(_N_LINKS):
        inc_row: list[np.ndarray] = []
        dep_row: list[np.ndarray] = []
        for r, surface in enumerate(env.surfaces):
            n = surface.n_elements
            rho = surface.response.reflection_magnitude
            target = env.path_gain_profile[link, r]
            # Per-leg rms s with n * rho^2 * s^4 = target^2.
            leg_rms = float(np.sqrt(target / (rho * np.sqrt(n)))) if target > 0 else 0.0
            inc_row.append(_cn(leg_rms, n))
            dep_row.append(_cn(leg_rms, n))
        incident.append((inc_row[0], inc_row[1]))
        departing.append((dep_row[0], dep_row[1]))

    direct = np.empty(_N_LINKS, dtype=complex)
    scale_lin = 10.0 ** (env.direct_path_rel_db / 10.0)
    for link in range(_N_LINKS):
        cascade_power = float(np.sum(env.path_gain_profile[link] ** 2))
        direct[link] = _cn(float(np.sqrt(scale_lin * cascade_power)), 1)[0]

    return ChannelRealization(
        incident=(incident[0], incident[1]),
        departing=(departing[0], departing[1]),
        direct=direct,
    )


def link_gain(
    real: ChannelRealization,
    configs: tuple[RisConfig, RisConfig],
    env: Environment,
    link: int,
) -> LinkChannel:
    """Complex gain of ``link``: direct path plus both surfaces' cascades.

    Both surfaces always contribute to both links; each element enters as
    incident * reflection(state, f_link) * departing.
    """
    if link not in (0, 1):
        raise ValueError(f"link must be 0 or 1, got {link!r}")
    freq = env.link_freqs_hz[link]
    total = complex(real.direct[link])
    for r, surface in enumerate(env.surfaces):
        cfg = configs[r]
        if cfg.n_elements != surface.n_elements:
            raise ValueError(
                f"config for surface {r} has {cfg.n_elements} elements, "
                f"surface declares {surface.n_elements}"
            )
        gamma = element_reflections(surface.response, cfg.states, freq)
        total += complex(np.sum(real.incident[link][r] * gamma * real.departing[link][r]))
    return LinkChannel(gain=total)


def best_case_gain(
    real: ChannelRealization,
    env: Environment,
    link: int,
    surface: int,
    other_config: RisConfig | None = None,
) -> float:
    """Exact maximum of |link gain| over all configs of one surface.

    Enumerates every 2^n configuration of ``surface`` with the other
    surface frozen at ``other_config`` (all-zero states when omitted).
    Refuses surfaces above 20 elements: the enumeration is the point,
    and beyond that it stops being one.
    """
    n = env.surfaces[surface].n_elements
    if n > _EXHAUSTIVE_LIMIT:
        raise ValueError(f"best_case_gain refuses n_elements={n} > {_EXHAUSTIVE_LIMIT}")
    other = 1 - surface
    if other_config is None:
        other_config = RisConfig(np.zeros(env.surfaces[other].n_elements, dtype=np.uint8))

    best = -np.inf
    bit_index = np.arange(n)
    for code in range(1 << n):
        states = ((code >> bit_index) & 1).astype(np.uint8)
        pair: list[RisConfig] = [None, None]  # type: ignore[list-item]
        pair[surface] = RisConfig(states)
        pair[other] = other_config
        mag = abs(link_gain(real, (pair[0], pair[1]), env, link).gain)
        if mag > best:
            best = mag
    return float(best)
