"""Design maths for a polarization-sorting metasurface.

The device has three strips, one per Pauli basis.  Every strip focuses the
two eigenpolarizations of its basis to two spots with hyperbolic lens phases.
A nanopillar acts on polarization as a rotated birefringent waveplate.

Conventions:
    * lengths: micrometres for positions and focal length, nanometres for
      pitch, wavelength and pillar sizes;
    * phases are wrapped to [0, 2*pi);
    * Stokes vector s = (s1, s2, s3) = (<Z>, <X>, <Y>) of the qubit, with
      H = |0>, V = |1>, so s1 = (I_H - I_V) / (I_H + I_V) and so on;
    * in this module CIRC_L = (H + iV)/sqrt(2) and CIRC_R = (H - iV)/sqrt(2),
      the handedness under which a half-wave pillar maps L to R with phase
      phi_x + 2 theta.  :mod:`metashadow.measure` labels (H + iV)/sqrt(2) as
      "R"; the Stokes helpers below follow the measurement labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError
from .measure.povm import OCTAHEDRON_LABELS, octahedron_povm
from .measure.sampling import born_probabilities
from .qcore import X, Y, Z, check_density_matrix, ket_to_dm

TWO_PI = 2 * np.pi
PITCH_NM = 500.0
FOCAL_LENGTH_UM = 150.0
WAVELENGTH_NM = 810.0
LENGTH_RANGE_NM = (100.0, 300.0)
TIE_ATOL = 1e-12
STOKES_ATOL = 1e-9
LIBRARY_FILE = "circular_pillars.csv"

_S = 1 / np.sqrt(2)
POL_H = np.array([1, 0], dtype=complex)
POL_V = np.array([0, 1], dtype=complex)
POL_PLUS = np.array([_S, _S], dtype=complex)
POL_MINUS = np.array([_S, -_S], dtype=complex)
CIRC_L = np.array([_S, 1j * _S], dtype=complex)
CIRC_R = np.array([_S, -1j * _S], dtype=complex)


def wrap_phase(phi):
    """Map phases to [0, 2*pi)."""
    w = np.mod(phi, TWO_PI)
    # np.mod rounds tiny negatives up to exactly 2*pi
    w = np.where(w >= TWO_PI, 0.0, w)
    return float(w) if np.ndim(w) == 0 else w


def phase_distance(a, b):
    """Shortest distance between two phases on the circle, in [0, pi]."""
    return np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi)


# -- lens phases ----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """One strip of the metasurface and the two focal spots it targets."""

    name: str
    basis: str
    labels: tuple[str, str]
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    focus_plus: tuple[float, float]
    focus_minus: tuple[float, float]
    pitch_nm: float = PITCH_NM

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, columns) of pixels, i.e. (y, x) counts."""
        p = self.pitch_nm * 1e-3
        nx = int(round((self.x_range[1] - self.x_range[0]) / p))
        ny = int(round((self.y_range[1] - self.y_range[0]) / p))
        return ny, nx

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """x and y coordinates (um) of pixel centres."""
        p = self.pitch_nm * 1e-3
        ny, nx = self.shape
        xs = self.x_range[0] + p * (np.arange(nx) + 0.5)
        ys = self.y_range[0] + p * (np.arange(ny) + 0.5)
        return xs, ys


def region_layout() -> tuple[Region, Region, Region]:
    """The three 210 x 70 um strips, eigenstate + focused at x0 = +35 um."""
    full = (-105.0, 105.0)
    return (
        Region("sigma_x", "x", ("+", "-"), full, (-35.0, 35.0), (35.0, 0.0), (-35.0, 0.0)),
        Region("sigma_y", "y", ("L", "R"), full, (-105.0, -35.0), (35.0, -70.0), (-35.0, -70.0)),
        Region("sigma_z", "z", ("H", "V"), full, (35.0, 105.0), (35.0, 70.0), (-35.0, 70.0)),
    )


def region_by_name(name: str) -> Region:
    for r in region_layout():
        if r.name == name or r.basis == name:
            return r
    raise DomainError(f"unknown region {name!r}")


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """Wrapped lens phase on a pixel grid; ``grid[i, j]`` sits at (xs[j], ys[i])."""

    grid: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    pitch_nm: float
    focal_length_um: float
    wavelength_nm: float
    focus: tuple[float, float]

    def __post_init__(self):
        if self.grid.shape != (self.ys.size, self.xs.size):
            raise DomainError("phase grid does not match its pixel coordinates")


def phase_at(x, y, focus: tuple[float, float], focal_length_um: float = FOCAL_LENGTH_UM,
             wavelength_nm: float = WAVELENGTH_NM):
    """Unwrapped hyperbolic lens phase at (x, y) um; zero at the focus."""
    if not focal_length_um > 0 or not wavelength_nm > 0:
        raise DomainError("focal length and wavelength must be positive")
    f = focal_length_um
    lam = wavelength_nm * 1e-3
    r2 = (np.asarray(x) - focus[0]) ** 2 + (np.asarray(y) - focus[1]) ** 2
    return -(TWO_PI / lam) * (np.sqrt(r2 + f * f) - f)


def phase_profile(
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    focus: tuple[float, float],
    focal_length_um: float = FOCAL_LENGTH_UM,
    wavelength_nm: float = WAVELENGTH_NM,
    pitch_nm: float = PITCH_NM,
) -> PhaseProfile:
    """Evaluate the lens phase at the pixel centres of a rectangular extent."""
    region = Region("", "", ("", ""), tuple(x_range), tuple(y_range), focus, focus, pitch_nm)
    xs, ys = region.pixel_centers()
    if xs.size == 0 or ys.size == 0:
        raise DomainError("extent is smaller than one pixel")
    grid = wrap_phase(phase_at(xs[None, :], ys[:, None], focus, focal_length_um, wavelength_nm))
    return PhaseProfile(grid, xs, ys, pitch_nm, focal_length_um, wavelength_nm, tuple(focus))


def region_phase_profiles(region: Region, focal_length_um: float = FOCAL_LENGTH_UM,
                          wavelength_nm: float = WAVELENGTH_NM) -> tuple[PhaseProfile, PhaseProfile]:
    """Target phases for the + and - eigenpolarization of ``region``."""
    return tuple(
        phase_profile(region.x_range, region.y_range, focus, focal_length_um, wavelength_nm, region.pitch_nm)
        for focus in (region.focus_plus, region.focus_minus)
    )


def write_phase_csv(profile: PhaseProfile, path) -> Path:
    """Grid CSV: header row of x centres, then one row per y with y first."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y_um\\x_um", *(repr(float(x)) for x in profile.xs)])
        for y, row in zip(profile.ys, profile.grid):
            w.writerow([repr(float(y)), *(repr(float(v)) for v in row)])
    return path


# -- nanopillars ----------------------------------------------------------------


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def pillar_unitary(theta: float, phi_x: float, phi_y: float) -> np.ndarray:
    """Jones matrix R(theta) diag(e^{i phi_x}, e^{i phi_y}) R(-theta)."""
    d = np.diag([np.exp(1j * phi_x), np.exp(1j * phi_y)])
    return rotation(theta) @ d @ rotation(-theta)


def circular_design(phi_plus: float, phi_minus: float) -> tuple[float, float]:
    """Rotation and phase of a half-wave pillar giving phi_plus on L and phi_minus on R.

    With phi_y = phi_x - pi the pillar sends L to e^{i(phi_x + 2 theta)} R and
    R to e^{i(phi_x - 2 theta)} L.
    """
    theta = (phi_plus - phi_minus) / 4
    phi_x = (phi_plus + phi_minus) / 2
    return theta, phi_x


def circular_output_phases(theta: float, phi_x: float) -> tuple[float, float]:
    """Phases picked up by L and R through a half-wave pillar, wrapped."""
    u = pillar_unitary(theta, phi_x, phi_x - np.pi)
    a_l = np.vdot(CIRC_R, u @ CIRC_L)
    a_r = np.vdot(CIRC_L, u @ CIRC_R)
    return wrap_phase(np.angle(a_l)), wrap_phase(np.angle(a_r))


@dataclass(frozen=True)
class PillarSpec:
    """A nanopillar: rotation (rad), side lengths (nm), phases (turns), transmittances."""

    theta: float
    l_x: float
    l_y: float
    phi_x: float
    phi_y: float
    t_x: float
    t_y: float

    def __post_init__(self):
        lo, hi = LENGTH_RANGE_NM
        if not (lo <= self.l_x <= hi and lo <= self.l_y <= hi):
            raise DomainError(f"pillar lengths ({self.l_x}, {self.l_y}) nm outside [{lo}, {hi}]")
        if not (0.0 <= self.t_x <= 1.0 and 0.0 <= self.t_y <= 1.0):
            raise DomainError("transmittances must lie in [0, 1]")

    @property
    def phi_x_rad(self) -> float:
        return TWO_PI * self.phi_x

    @property
    def phi_y_rad(self) -> float:
        return TWO_PI * self.phi_y

    @property
    def min_transmittance(self) -> float:
        return min(self.t_x, self.t_y)

    def unitary(self) -> np.ndarray:
        return pillar_unitary(self.theta, self.phi_x_rad, self.phi_y_rad)


def load_library(path=None) -> list[PillarSpec]:
    """Read a pillar table; the bundled circular-region library by default."""
    if path is None:
        text = resources.files("metashadow").joinpath("data", LIBRARY_FILE).read_text(encoding="utf-8")
    else:
        path = Path(path)
        if not path.exists():
            raise DomainError(f"pillar library not found: {path}")
        text = path.read_text(encoding="utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        raise DomainError("pillar library is empty")
    return [
        PillarSpec(
            0.0,
            float(r["l_x_nm"]),
            float(r["l_y_nm"]),
            float(r["phi_x_over_2pi"]),
            float(r["phi_y_over_2pi"]),
            float(r["t_x"]),
            float(r["t_y"]),
        )
        for r in rows
    ]


def select_pillar(target_phi_x: float, library: Sequence[PillarSpec]) -> PillarSpec:
    """Library entry whose phi_x is closest to the target on the circle.

    Ties (within 1e-12 rad) go to the entry with the larger min(t_x, t_y).
    """
    if len(library) == 0:
        raise DomainError("pillar library is empty")
    dist = phase_distance(np.array([p.phi_x_rad for p in library]), target_phi_x)
    best = dist.min()
    close = [p for p, dd in zip(library, dist) if dd <= best + TIE_ATOL]
    return max(close, key=lambda p: p.min_transmittance)


def library_max_gap(library: Sequence[PillarSpec]) -> float:
    """Largest circular gap (rad) between consecutive library phases."""
    phis = np.sort(wrap_phase(np.array([p.phi_x_rad for p in library])))
    gaps = np.diff(np.append(phis, phis[0] + TWO_PI))
    return float(gaps.max())


@dataclass(frozen=True, eq=False)
class CircularDesign:
    """Pillar choice for every pixel of the circular-basis strip."""

    region: Region
    theta: np.ndarray
    phi_x_target: np.ndarray
    index: np.ndarray
    library: tuple[PillarSpec, ...]

    def pillar(self, i: int, j: int) -> PillarSpec:
        return replace(self.library[int(self.index[i, j])], theta=float(self.theta[i, j]))


def design_circular_region(region: Region | None = None, library: Sequence[PillarSpec] | None = None,
                           focal_length_um: float = FOCAL_LENGTH_UM,
                           wavelength_nm: float = WAVELENGTH_NM) -> CircularDesign:
    """Solve rotation and pick a library pillar at every pixel of a circular strip."""
    region = region_by_name("sigma_y") if region is None else region
    library = tuple(load_library() if library is None else library)
    plus, minus = region_phase_profiles(region, focal_length_um, wavelength_nm)
    theta, phi_x = circular_design(plus.grid, minus.grid)
    phi_x = wrap_phase(phi_x)
    lib = np.array([p.phi_x_rad for p in library])
    dist = phase_distance(lib[None, None, :], phi_x[..., None])
    # tie rule identical to select_pillar
    score = np.where(dist <= dist.min(axis=-1, keepdims=True) + TIE_ATOL,
                     np.array([p.min_transmittance for p in library]), -1.0)
    index = np.argmax(score, axis=-1)
    return CircularDesign(region, theta, phi_x, index, library)


def linear_theta(region: Region) -> float:
    """Constant pillar rotation of a linear-basis strip."""
    if region.basis == "z":
        return 0.0
    if region.basis == "x":
        return np.pi / 4
    raise DomainError(f"region {region.name} is not a linear-polarization strip")


def write_layout_manifest(path, library: Sequence[PillarSpec] | None = None) -> Path:
    """Per-pixel text manifest: region, pixel x, pixel y, theta, l_x, l_y.

    Pixel indices count from the lower-left corner of each strip.  Pillar
    sizes of the linear strips are left empty: only the circular library ships.
    """
    path = Path(path)
    design = design_circular_region(library=library)
    lx = np.array([p.l_x for p in design.library])[design.index]
    ly = np.array([p.l_y for p in design.library])[design.index]
    lines = ["region pixel_x pixel_y theta l_x l_y"]
    for region in region_layout():
        ny, nx = region.shape
        if region.basis == "y":
            for i in range(ny):
                for j in range(nx):
                    lines.append(f"{region.name} {j} {i} {float(design.theta[i, j])!r} {lx[i, j]:g} {ly[i, j]:g}")
        else:
            t = repr(float(linear_theta(region)))
            lines.extend(f"{region.name} {j} {i} {t} - -" for i in range(ny) for j in range(nx))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# -- Stokes reconstruction -------------------------------------------------------


@dataclass(frozen=True)
class StokesVector:
    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        if self.s1**2 + self.s2**2 + self.s3**2 > 1 + STOKES_ATOL:
            raise DomainError(f"Stokes vector ({self.s1}, {self.s2}, {self.s3}) lies outside the unit ball")

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])


def _intensity_array(intensities) -> np.ndarray:
    if isinstance(intensities, Mapping):
        try:
            return np.array([float(intensities[k]) for k in OCTAHEDRON_LABELS])
        except KeyError as e:
            raise DomainError(f"missing intensity for {e.args[0]!r}") from None
    arr = np.asarray(intensities, dtype=float)
    if arr.shape != (6,):
        raise DomainError(f"expected six intensities ordered {OCTAHEDRON_LABELS}")
    return arr


def stokes_from_intensities(intensities) -> StokesVector:
    """Normalized Stokes parameters from the six focal-spot intensities.

    Args:
        intensities: six values ordered H, V, +, -, R, L (or a mapping with
            those keys), with R = (H + iV)/sqrt(2).
    """
    i = _intensity_array(intensities)
    if np.any(i < 0):
        raise DomainError("intensities must be non-negative")
    pairs = i.reshape(3, 2)
    den = pairs.sum(axis=1)
    if np.any(den <= 0):
        raise DomainError("each basis pair needs a positive total intensity")
    s = (pairs[:, 0] - pairs[:, 1]) / den
    return StokesVector(*map(float, s))


def ideal_router_intensities(rho: np.ndarray) -> np.ndarray:
    """Focal intensities of a lossless router: 3x the octahedron probabilities."""
    rho = np.asarray(rho, dtype=complex)
    rho = ket_to_dm(rho) if rho.ndim == 1 else check_density_matrix(rho)
    if rho.shape != (2, 2):
        raise DomainError("the router acts on a single polarization qubit")
    return 3 * born_probabilities(rho, [octahedron_povm()])


def bloch_stokes(rho: np.ndarray) -> np.ndarray:
    """(<Z>, <X>, <Y>): the Stokes vector a perfect polarimeter would report."""
    rho = np.asarray(rho, dtype=complex)
    rho = ket_to_dm(rho) if rho.ndim == 1 else rho
    return np.array([np.trace(rho @ P).real for P in (Z, X, Y)])


__all__ = [
    "CIRC_L",
    "CIRC_R",
    "CircularDesign",
    "PhaseProfile",
    "PillarSpec",
    "Region",
    "StokesVector",
    "bloch_stokes",
    "circular_design",
    "circular_output_phases",
    "design_circular_region",
    "ideal_router_intensities",
    "library_max_gap",
    "linear_theta",
    "load_library",
    "phase_at",
    "phase_distance",
    "phase_profile",
    "pillar_unitary",
    "region_by_name",
    "region_layout",
    "region_phase_profiles",
    "rotation",
    "select_pillar",
    "stokes_from_intensities",
    "wrap_phase",
    "write_layout_manifest",
    "write_phase_csv",
]
