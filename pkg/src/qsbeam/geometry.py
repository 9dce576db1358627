"""Hybrid antenna-array geometry and steering vectors.

The modeled array combines three cylindrical sub-arrays (vertically stacked
circular loops of radiating elements) with one circular sub-array in the
z = 0 plane. Directions are (phi, theta) pairs with phi the elevation angle
measured from the +z axis and theta the azimuth, both in radians inside the
library; degrees appear only at the CLI boundary.

Steering vectors come in two flavors: the direct form concatenates the
response of every physical element (this is what the beamformer and the DoA
pipeline consume), and the loop-product form composes per-sub-array steering
vectors with Kronecker products (useful for structure-exploiting analyses).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Element gain pattern: callable of (phi, theta) in radians -> amplitude gain.
GainPattern = Callable[[float, float], float]


def isotropic_gain(phi: float, theta: float) -> float:
    """Unit gain in every direction."""
    return 1.0


def cos_power_gain(peak_elevation_rad: float, exponent: float) -> GainPattern:
    """Analytic cos-power element pattern.

    Returns a pattern g(phi, theta) = max(0, cos(phi - peak))^exponent. Small
    exponents give broad coverage, large exponents a narrow lobe about the
    peak elevation. Azimuthally omnidirectional.

    Parameters
    ----------
    peak_elevation_rad : float
        Elevation (from the +z axis) of maximum gain.
    exponent : float
        Cosine power; must be >= 0.
    """
    if exponent < 0:
        raise ValueError("cos-power exponent must be >= 0")

    def gain(phi: float, theta: float) -> float:
        c = math.cos(phi - peak_elevation_rad)
        return max(0.0, c) ** exponent

    return gain


def dipole_gain(phi: float, theta: float) -> float:
    """Short-dipole proxy pattern: |sin(phi)|, null at zenith."""
    return abs(math.sin(phi))


# Named element patterns selectable from configs. "bowtie" is a broad
# pattern peaked at 45 degrees elevation (proxy for a wideband planar
# element pointed at the scan region); "dipole" is the classic sin(phi)
# doughnut; "cos4" is a narrow zenith-pointing lobe.
GAIN_PATTERNS: dict[str, GainPattern] = {
    "isotropic": isotropic_gain,
    "bowtie": cos_power_gain(math.radians(45.0), 0.5),
    "dipole": dipole_gain,
    "cos4": cos_power_gain(0.0, 4.0),
}


def resolve_gain_pattern(name_or_fn: str | GainPattern) -> GainPattern:
    """Look up a named pattern, or pass a callable through unchanged."""
    if callable(name_or_fn):
        return name_or_fn
    try:
        return GAIN_PATTERNS[name_or_fn]
    except KeyError:
        known = ", ".join(sorted(GAIN_PATTERNS))
        raise ValueError(
            f"unknown gain pattern {name_or_fn!r}; known patterns: {known}"
        ) from None


@dataclass(frozen=True)
class ArrayParams:
    """Geometry parameters of the hybrid array.

    Defaults reproduce the reference configuration: three cylinders of two
    20-element loops each plus one 20-element circular loop (140 elements),
    half-wavelength loop spacing and element spacing, 10 GHz carrier.

    Attributes
    ----------
    n_per_loop : int
        Elements per circular loop of a cylinder.
    loops_per_cylinder : int
        Stacked loops per cylinder.
    n_cylinders : int
        Number of cylindrical sub-arrays.
    circular_elements : int
        Elements of the standalone circular loop (0 disables it).
    d_v_wavelengths : float
        Vertical spacing between stacked loops, in wavelengths.
    d_r_wavelengths : float
        Element spacing along a loop (chord length), in wavelengths.
    carrier_freq_hz : float
        Carrier frequency; wavelength is derived from it.
    gain_pattern : str
        Name of the per-element gain pattern (see GAIN_PATTERNS).
    """

    n_per_loop: int = 20
    loops_per_cylinder: int = 2
    n_cylinders: int = 3
    circular_elements: int = 20
    d_v_wavelengths: float = 0.5
    d_r_wavelengths: float = 0.5
    carrier_freq_hz: float = 10e9
    gain_pattern: str = "isotropic"

    def __post_init__(self) -> None:
        if self.n_per_loop < 1 or self.loops_per_cylinder < 1 or self.n_cylinders < 1:
            raise ValueError("loop/cylinder counts must be >= 1")
        if self.circular_elements < 0:
            raise ValueError("circular_elements must be >= 0")
        if self.d_v_wavelengths <= 0 or self.d_r_wavelengths <= 0:
            raise ValueError("element spacings must be > 0")
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency must be > 0")
        # Force an early failure on unknown pattern names.
        resolve_gain_pattern(self.gain_pattern)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def elements_per_cylinder(self) -> int:
        return self.n_per_loop * self.loops_per_cylinder

    @property
    def total_elements(self) -> int:
        return self.n_cylinders * self.elements_per_cylinder + self.circular_elements


@dataclass(frozen=True)
class Element:
    """One radiating element: a position in meters and a gain pattern."""

    position: np.ndarray
    gain: GainPattern = isotropic_gain


@dataclass(frozen=True)
class ArrayLayout:
    """Concrete element layout with sub-array structure.

    ``sub_ranges`` lists (start, stop) index ranges, one per cylinder in
    order followed by the circular loop when present; the direct element
    ordering is cylinder-major, loop-minor, circular loop last.
    """

    elements: tuple[Element, ...]
    wavelength_m: float
    sub_ranges: tuple[tuple[int, int], ...] = ()
    params: ArrayParams | None = None
    _positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.elements:
            raise ValueError("layout must contain at least one element")
        pos = np.array([e.position for e in self.elements], dtype=float)
        object.__setattr__(self, "_positions", pos)

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def positions(self) -> np.ndarray:
        """Element positions as an (n, 3) array in meters."""
        return self._positions

    def gains(self, phi: float, theta: float) -> np.ndarray:
        """Per-element amplitude gains toward (phi, theta)."""
        return np.array([e.gain(phi, theta) for e in self.elements], dtype=float)

    def response(self, phi: float, theta: float) -> np.ndarray:
        """Un-normalized element response g_n * exp(-j K . r_n)."""
        k = wavevector(phi, theta, self.wavelength_m)
        phases = self._positions @ k
        return self.gains(phi, theta) * np.exp(-1j * phases)

    def sub_layouts(self) -> list["ArrayLayout"]:
        """One layout per sub-array (cylinders in order, then the loop)."""
        if not self.sub_ranges:
            return [self]
        subs = []
        for start, stop in self.sub_ranges:
            subs.append(
                ArrayLayout(
                    elements=self.elements[start:stop],
                    wavelength_m=self.wavelength_m,
                    sub_ranges=((0, stop - start),),
                    params=self.params,
                )
            )
        return subs


@dataclass(frozen=True)
class SteeringVector:
    """Array manifold vector for one direction, unit 2-norm."""

    values: np.ndarray
    direction: tuple[float, float]

    @property
    def n(self) -> int:
        return len(self.values)


def wavevector(phi: float, theta: float, wavelength_m: float) -> np.ndarray:
    """Propagation wavevector for a plane wave from (phi, theta).

    Components are (2*pi/lambda) * (sin(phi)sin(theta), sin(phi)cos(theta),
    cos(phi)); phi is elevation from +z, theta azimuth.
    """
    if wavelength_m <= 0:
        raise ValueError("wavelength must be > 0")
    k = 2.0 * math.pi / wavelength_m
    sp = math.sin(phi)
    return np.array([k * sp * math.sin(theta), k * sp * math.cos(theta), k * math.cos(phi)])


def phase_shift(k: np.ndarray, position: np.ndarray) -> float:
    """Spatial phase K . r_n accumulated at an element position."""
    return float(np.dot(np.asarray(k, dtype=float), np.asarray(position, dtype=float)))


def ring_radius(spacing_m: float, n_elements: int) -> float:
    """Ring radius giving chord spacing `spacing_m` between n elements.

    A one-element ring degenerates to a point (radius 0).
    """
    if n_elements < 1:
        raise ValueError("ring needs at least one element")
    if n_elements == 1:
        return 0.0
    return spacing_m / (2.0 * math.sin(math.pi / n_elements))


def build_hybrid_layout(params: ArrayParams) -> ArrayLayout:
    """Build the hybrid layout described by ``params``.

    Cylinders are centered on the x axis with a surface-to-surface gap of
    one element spacing; each cylinder stacks ``loops_per_cylinder`` loops
    at heights p * d_v starting in the z = 0 plane. The circular sub-array
    sits at z = 0, centered at the origin, rotated half an angular step so
    its elements never coincide with a cylinder loop.

    Returns
    -------
    ArrayLayout
        Elements ordered cylinder-major, loop-minor, circular loop last.
    """
    lam = params.wavelength_m
    d_r = params.d_r_wavelengths * lam
    d_v = params.d_v_wavelengths * lam
    gain = resolve_gain_pattern(params.gain_pattern)

    radius = ring_radius(d_r, params.n_per_loop)
    pitch = 2.0 * radius + d_r  # center-to-center distance of adjacent cylinders
    elements: list[Element] = []
    sub_ranges: list[tuple[int, int]] = []

    for m in range(params.n_cylinders):
        start = len(elements)
        x_center = (m - (params.n_cylinders - 1) / 2.0) * pitch
        for p in range(params.loops_per_cylinder):
            h = p * d_v
            for n in range(params.n_per_loop):
                ang = 2.0 * math.pi * n / params.n_per_loop
                pos = np.array(
                    [x_center + radius * math.cos(ang), radius * math.sin(ang), h]
                )
                elements.append(Element(position=pos, gain=gain))
        sub_ranges.append((start, len(elements)))

    if params.circular_elements > 0:
        start = len(elements)
        radius_c = ring_radius(d_r, params.circular_elements)
        for n in range(params.circular_elements):
            ang = 2.0 * math.pi * (n + 0.5) / params.circular_elements
            pos = np.array([radius_c * math.cos(ang), radius_c * math.sin(ang), 0.0])
            elements.append(Element(position=pos, gain=gain))
        sub_ranges.append((start, len(elements)))

    return ArrayLayout(
        elements=tuple(elements),
        wavelength_m=lam,
        sub_ranges=tuple(sub_ranges),
        params=params,
    )


def _normalized(values: np.ndarray, direction: tuple[float, float]) -> SteeringVector:
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise ValueError("steering vector is identically zero (all element gains 0)")
    return SteeringVector(values=values / norm, direction=direction)


def sub_steering_vector(layout: ArrayLayout, phi: float, theta: float) -> SteeringVector:
    """Unit-norm steering vector of a single (sub-)layout.

    Entries are g_n(phi, theta) * exp(-j K . r_n) divided by the vector
    2-norm.

    Parameters
    ----------
    layout : ArrayLayout
        Any non-empty layout; typically one entry of ``sub_layouts()``.
    phi, theta : float
        Direction in radians (phi from +z, theta azimuth).
    """
    return _normalized(layout.response(phi, theta), (phi, theta))


def steering_vector(layout: ArrayLayout, phi: float, theta: float) -> SteeringVector:
    """Direct-form steering vector over every physical element, unit norm.

    This is the form consumed by the beamformer and the DoA pipeline; its
    length equals the physical element count.
    """
    return _normalized(layout.response(phi, theta), (phi, theta))


def hybrid_steering_vector(layout: ArrayLayout, phi: float, theta: float) -> SteeringVector:
    """Loop-product steering vector: Kronecker composition of sub-arrays.

    Each sub-array contributes its unit-norm steering vector; the composite
    is their Kronecker product (cylinders in order, circular loop last),
    renormalized to unit norm. Requires a layout with sub-array structure
    (see ``build_hybrid_layout``).
    """
    if not layout.sub_ranges:
        raise ValueError("layout has no sub-array structure")
    parts = [sub_steering_vector(sub, phi, theta).values for sub in layout.sub_layouts()]
    composite = parts[0]
    for part in parts[1:]:
        composite = np.kron(composite, part)
    return _normalized(composite, (phi, theta))


def steering_matrix(
    layout: ArrayLayout, directions: Sequence[tuple[float, float]]
) -> np.ndarray:
    """Stack direct-form steering vectors as columns of an (n, k) matrix."""
    cols = [steering_vector(layout, phi, theta).values for phi, theta in directions]
    return np.column_stack(cols)
