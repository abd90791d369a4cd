"""Physical channel synthesis from thin-wire dipole geometry.

All radiating elements (transmitter, receiver, surface elements) are thin
wire dipoles parallel to the z-axis carrying a sinusoidal current profile.
The mutual impedance between two dipoles is the classic induced-EMF double
integral over both wire axes; evaluating it across every element pair fills
the surface coupling matrix Z_II, the surface-to-receiver row z_RI and the
transmitter-to-surface column z_IT that feed the impedance channel model.

Free-space propagation, SI units throughout.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidGeometry, QuadratureNotConverged
from .network import DEFAULT_Z0, ChannelTerms
from .serialize import complex_from_pairs, complex_to_pairs

C_LIGHT = 299_792_458.0
FREE_SPACE_IMPEDANCE = 377.0
DIPOLE_LENGTH_FRACTION = 1.0 / 32.0  # dipole length as a fraction of the wavelength
DIPOLE_RADIUS_FRACTION = 1.0 / 500.0  # wire radius as a fraction of the wavelength
# The self-impedance integrand has a near-field ridge of width equal to the
# wire radius; 48 nodes per half-axis panel hold the order-doubling check
# below 2e-8 there, while 16 (enough for every mutual term) misses by orders
# of magnitude.
DEFAULT_QUADRATURE_ORDER = 48
DEFAULT_REFINE_TOL = 1e-6

_CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dipole:
    """Thin wire dipole parallel to the z-axis."""

    center: tuple[float, float, float]
    length: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise InvalidGeometry(f"center must be a 3-tuple, got {self.center}")
        if self.length <= 0 or self.radius <= 0:
            raise InvalidGeometry("dipole length and radius must be positive")
        if self.radius >= self.length:
            raise InvalidGeometry("wire radius must be smaller than the dipole length")


@dataclass(frozen=True)
class DerivedConstants:
    """Wavelength, wavenumber and free-space impedance for one carrier frequency."""

    wavelength: float
    wavenumber: float
    eta0: float = FREE_SPACE_IMPEDANCE

    @classmethod
    def from_frequency(cls, frequency_hz: float) -> "DerivedConstants":
        if frequency_hz <= 0:
            raise ValueError(f"frequency must be positive, got {frequency_hz}")
        lam = C_LIGHT / frequency_hz
        return cls(wavelength=lam, wavenumber=2.0 * np.pi / lam)


def _panel_nodes(center: float, half_length: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [c-h, c+h], split at c where the current kink sits."""
    t, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in ((center - half_length, center), (center, center + half_length)):
        mid, scale = 0.5 * (hi + lo), 0.5 * (hi - lo)
        nodes.append(mid + scale * t)
        weights.append(scale * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _impedance_integral(a: Dipole, b: Dipole, d_xy: float,
                        constants: DerivedConstants, order: int) -> complex:
    k0 = constants.wavenumber
    az, bz = a.center[2], b.center[2]
    a_nodes, a_w = _panel_nodes(az, 0.5 * a.length, order)
    b_nodes, b_w = _panel_nodes(bz, 0.5 * b.length, order)

    dz = a_nodes[:, None] - b_nodes[None, :]
    d = np.sqrt(d_xy * d_xy + dz * dz)
    bracket = (dz * dz / (d * d)) * (3.0 / (d * d) + 3j * k0 / d - k0 * k0) \
        - (1j * k0 + 1.0 / d) / d + k0 * k0
    current = (np.sin(k0 * (0.5 * b.length - np.abs(b_nodes - bz)))[None, :]
               * np.sin(k0 * (0.5 * a.length - np.abs(a_nodes - az)))[:, None]
               / (np.sin(0.5 * k0 * a.length) * np.sin(0.5 * k0 * b.length)))
    kernel = (1j * constants.eta0 / (4.0 * np.pi * k0)) * bracket \
        * np.exp(-1j * k0 * d) / d * current
    return complex(a_w @ kernel @ b_w)


def mutual_impedance(a: Dipole, b: Dipole, constants: DerivedConstants,
                     quadrature_order: int = DEFAULT_QUADRATURE_ORDER, *,
                     check: bool = True,
                     refine_tol: float = DEFAULT_REFINE_TOL) -> complex:
    """Mutual impedance between dipoles ``a`` and ``b`` (self impedance when equal).

    The lateral distance collapses to the wire radius for the self term.  With
    ``check`` enabled the integral is also evaluated at twice the order and
    the refined value is returned; a relative disagreement beyond
    ``refine_tol`` raises :class:`QuadratureNotConverged`.
    """
    if a == b:
        d_xy = a.radius
    else:
        d_xy = float(np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]))
        z_overlap = (max(a.center[2] - 0.5 * a.length, b.center[2] - 0.5 * b.length)
                     < min(a.center[2] + 0.5 * a.length, b.center[2] + 0.5 * b.length))
        if d_xy < a.radius + b.radius and z_overlap:
            raise InvalidGeometry(
                f"dipoles at {a.center} and {b.center} overlap (lateral distance {d_xy:.3e})")
    coarse = _impedance_integral(a, b, d_xy, constants, quadrature_order)
    if not check:
        return coarse
    fine = _impedance_integral(a, b, d_xy, constants, 2 * quadrature_order)
    err = abs(fine - coarse)
    if err > refine_tol * max(abs(fine), np.finfo(float).tiny):
        raise QuadratureNotConverged(
            f"order {quadrature_order} vs {2 * quadrature_order} disagree by "
            f"{err / abs(fine):.3e} relative (tolerance {refine_tol:.1e})")
    return fine


def default_grid_layout(m: int) -> tuple[int, int]:
    """rows x cols = m, the factorization closest to square with rows <= cols."""
    if m < 1:
        raise InvalidGeometry(f"element count must be positive, got {m}")
    best = (1, m)
    for rows in range(1, int(np.sqrt(m)) + 1):
        if m % rows == 0:
            best = (rows, m // rows)
    return best


def place_ris_grid(m: int, spacing: float, layout: tuple[int, int],
                   length: float, radius: float) -> list[Dipole]:
    """Surface elements on the y-z plane (x = 0), centered at the origin.

    Spacing ``d`` applies along both y and z; ordering is row-major with y
    fastest and z slowest.
    """
    rows, cols = layout
    if rows * cols != m:
        raise InvalidGeometry(f"layout {rows}x{cols} does not hold {m} elements")
    if spacing <= 2.0 * radius:
        raise InvalidGeometry(
            f"element spacing {spacing:.3e} must exceed the wire diameter {2 * radius:.3e}")
    dipoles = []
    for i in range(rows):
        z = (i - 0.5 * (rows - 1)) * spacing
        for j in range(cols):
            y = (j - 0.5 * (cols - 1)) * spacing
            dipoles.append(Dipole((0.0, y, z), length, radius))
    return dipoles


@dataclass
class ScenarioConfig:
    """Deployment description: carrier, endpoint positions and surface layout."""

    frequency_hz: float
    tx_position: tuple[float, float, float]
    rx_position: tuple[float, float, float]
    m: int
    spacing: float  # meters
    group_size: int = 1
    grid: tuple[int, int] | None = None
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER
    z_rt: complex = 0.0
    z0: float = DEFAULT_Z0

    def __post_init__(self):
        self.tx_position = tuple(float(c) for c in self.tx_position)
        self.rx_position = tuple(float(c) for c in self.rx_position)
        self.m = int(self.m)
        self.group_size = int(self.group_size)
        if self.m < 1:
            raise ConfigError(f"m must be positive, got {self.m}")
        if self.m % self.group_size != 0:
            raise ConfigError(f"group_size {self.group_size} does not divide m {self.m}")
        if self.grid is None:
            self.grid = default_grid_layout(self.m)
        self.grid = (int(self.grid[0]), int(self.grid[1]))
        if self.grid[0] * self.grid[1] != self.m:
            raise ConfigError(f"grid {self.grid} does not hold m={self.m} elements")
        self.z_rt = complex(self.z_rt)

    @property
    def constants(self) -> DerivedConstants:
        return DerivedConstants.from_frequency(self.frequency_hz)

    @property
    def spacing_over_lambda(self) -> float:
        return self.spacing / self.constants.wavelength

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        """Build from the documented configuration keys (GHz / wavelength-relative units)."""
        required = ("frequency_ghz", "tx_xyz", "rx_xyz", "m", "spacing_over_lambda")
        for key in required:
            if key not in data:
                raise ConfigError(f"missing configuration key '{key}'")
        known = set(required) | {"group_size", "grid", "quadrature_order", "z_rt", "z0"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            frequency_hz = float(data["frequency_ghz"]) * 1e9
            lam = C_LIGHT / frequency_hz
            z_rt = 0.0
            if data.get("z_rt") is not None:
                pair = data["z_rt"]
                z_rt = complex(pair[0], pair[1]) if isinstance(pair, (list, tuple)) else complex(pair)
            return cls(
                frequency_hz=frequency_hz,
                tx_position=tuple(data["tx_xyz"]),
                rx_position=tuple(data["rx_xyz"]),
                m=int(data["m"]),
                spacing=float(data["spacing_over_lambda"]) * lam,
                group_size=int(data.get("group_size", 1)),
                grid=tuple(data["grid"]) if data.get("grid") else None,
                quadrature_order=int(data.get("quadrature_order", DEFAULT_QUADRATURE_ORDER)),
                z_rt=z_rt,
                z0=float(data.get("z0", DEFAULT_Z0)),
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"malformed configuration value: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def element_dipoles(self) -> list[Dipole]:
        lam = self.constants.wavelength
        return place_ris_grid(self.m, self.spacing, self.grid,
                              lam * DIPOLE_LENGTH_FRACTION, lam * DIPOLE_RADIUS_FRACTION)

    def endpoint_dipoles(self) -> tuple[Dipole, Dipole]:
        lam = self.constants.wavelength
        length, radius = lam * DIPOLE_LENGTH_FRACTION, lam * DIPOLE_RADIUS_FRACTION
        return (Dipole(self.tx_position, length, radius),
                Dipole(self.rx_position, length, radius))


def build_scenario(config: ScenarioConfig) -> ChannelTerms:
    """Fill z_RI, Z_II and z_IT from the dipole geometry; z_RT defaults to zero.

    Z_II is symmetric by construction: the upper triangle is computed and
    mirrored exactly.
    """
    constants = config.constants
    order = config.quadrature_order
    elements = config.element_dipoles()
    tx, rx = config.endpoint_dipoles()

    # The grid is regular, so an element pair's integral depends only on the
    # absolute index offsets; memoize on those to skip repeated geometry.
    m = config.m
    rows, cols = config.grid
    z_ii = np.zeros((m, m), dtype=complex)
    memo: dict[tuple[int, int], complex] = {}
    for i in range(m):
        for j in range(i, m):
            key = (abs(i // cols - j // cols), abs(i % cols - j % cols))
            if key not in memo:
                memo[key] = mutual_impedance(elements[i], elements[j], constants, order)
            z_ii[i, j] = memo[key]
            if j > i:
                z_ii[j, i] = z_ii[i, j]
    z_ri = np.array([mutual_impedance(rx, el, constants, order) for el in elements])
    z_it = np.array([mutual_impedance(el, tx, constants, order) for el in elements])
    return ChannelTerms(z_rt=config.z_rt, z_ri=z_ri, z_ii=z_ii, z_it=z_it, z0=config.z0)


def decouple(terms: ChannelTerms) -> ChannelTerms:
    """Copy with the off-diagonal (mutual coupling) entries of Z_II set to exact zeros."""
    return ChannelTerms(z_rt=terms.z_rt, z_ri=terms.z_ri.copy(),
                        z_ii=np.diag(np.diag(terms.z_ii)),
                        z_it=terms.z_it.copy(), z0=terms.z0)


def terms_to_dict(terms: ChannelTerms) -> dict:
    return {
        "z_rt": complex_to_pairs(terms.z_rt),
        "z_ri": complex_to_pairs(terms.z_ri),
        "z_ii": complex_to_pairs(terms.z_ii),
        "z_it": complex_to_pairs(terms.z_it),
        "z0": terms.z0,
    }


def terms_from_dict(data: dict) -> ChannelTerms:
    return ChannelTerms(
        z_rt=complex(complex_from_pairs(data["z_rt"])),
        z_ri=complex_from_pairs(data["z_ri"]),
        z_ii=complex_from_pairs(data["z_ii"]),
        z_it=complex_from_pairs(data["z_it"]),
        z0=float(data["z0"]),
    )


def config_hash(config: ScenarioConfig) -> str:
    """Stable digest over every field that influences the computed terms."""
    payload = {
        "version": _CACHE_FORMAT_VERSION,
        "frequency_hz": config.frequency_hz,
        "tx": config.tx_position,
        "rx": config.rx_position,
        "m": config.m,
        "spacing": config.spacing,
        "grid": config.grid,
        "quadrature_order": config.quadrature_order,
        "z_rt": [config.z_rt.real, config.z_rt.imag],
        "z0": config.z0,
        "dipole": [DIPOLE_LENGTH_FRACTION, DIPOLE_RADIUS_FRACTION],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def default_cache_dir() -> Path:
    env = os.environ.get("BDRIS_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "bdris"


def load_or_build(config: ScenarioConfig, cache_dir: str | Path | None = None,
                  use_cache: bool = True) -> ChannelTerms:
    """Build the channel terms, reusing a JSON cache keyed by the config hash."""
    if not use_cache:
        return build_scenario(config)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache / f"terms_{config_hash(config)}.json"
    if path.is_file():
        return terms_from_dict(json.loads(path.read_text()))
    terms = build_scenario(config)
    cache.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(terms_to_dict(terms)))
    tmp.replace(path)
    return terms
