"""Spinor wavefunctions on chains and square tori.

Amplitudes live in dense arrays of shape ``geometry.shape + (2,)`` where the
last axis is the spin (0 = up, 1 = down).  The flat basis index used by every
matrix in the package is the row-major index of that array, i.e.
``2 * site + spin`` on a line and ``2 * (ix * Ly + iy) + spin`` on a torus.

The private ``_rotate`` / ``_translate`` kernels accept trailing batch axes
after the spin axis, which is how whole unitaries are assembled column by
column without ever writing down a sparse matrix by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, GeometryMismatch

NORM_TOL = 1e-10


# ---------------------------------------------------------------------------
# geometries


@dataclass(frozen=True)
class Line:
    """Finite chain of ``length`` sites with integer coordinates.

    Site index ``i`` has coordinate ``i - offset``.  The default offset centres
    the chain, so ``Line(2 * N + 1)`` spans ``-N .. N``.
    """

    length: int
    offset: int | None = None

    def __post_init__(self) -> None:
        if int(self.length) < 1:
            raise ConfigError(f"line length must be positive, got {self.length}")
        object.__setattr__(self, "length", int(self.length))
        if self.offset is None:
            object.__setattr__(self, "offset", self.length // 2)
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def centered(cls, n_steps: int) -> "Line":
        """Chain of ``2 n + 1`` sites, wide enough that ``n`` steps never wrap."""
        return cls(2 * int(n_steps) + 1)

    @classmethod
    def ending_at_zero(cls, length: int) -> "Line":
        """Chain with coordinates ``-(length-1) .. 0``; used for a wall at x = 0."""
        return cls(length, length - 1)

    @property
    def shape(self) -> tuple[int]:
        return (self.length,)

    @property
    def n_sites(self) -> int:
        return self.length

    @property
    def ndim(self) -> int:
        return 1

    def coords(self) -> np.ndarray:
        return np.arange(self.length) - self.offset

    def index_of(self, site: int) -> tuple[int]:
        i = int(site) + self.offset
        if not 0 <= i < self.length:
            raise ConfigError(f"site {site} outside line {self.coords()[0]}..{self.coords()[-1]}")
        return (i,)

    def padded(self, pad: int) -> "Line":
        return Line(self.length + 2 * pad, self.offset + pad)


@dataclass(frozen=True)
class Torus2D:
    """``lx`` by ``ly`` square lattice; coordinates start at ``-l // 2``."""

    lx: int
    ly: int

    def __post_init__(self) -> None:
        if int(self.lx) < 1 or int(self.ly) < 1:
            raise ConfigError(f"torus sides must be positive, got {self.lx}x{self.ly}")
        object.__setattr__(self, "lx", int(self.lx))
        object.__setattr__(self, "ly", int(self.ly))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.lx, self.ly)

    @property
    def n_sites(self) -> int:
        return self.lx * self.ly

    @property
    def ndim(self) -> int:
        return 2

    def x_coords(self) -> np.ndarray:
        return np.arange(self.lx) - self.lx // 2

    def y_coords(self) -> np.ndarray:
        return np.arange(self.ly) - self.ly // 2

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_coords(), self.y_coords(), indexing="ij")

    def index_of(self, site: Sequence[int]) -> tuple[int, int]:
        x, y = (int(v) for v in site)
        ix, iy = x + self.lx // 2, y + self.ly // 2
        if not (0 <= ix < self.lx and 0 <= iy < self.ly):
            raise ConfigError(f"site {(x, y)} outside torus {self.lx}x{self.ly}")
        return (ix, iy)


Geometry = Union[Line, Torus2D]


# ---------------------------------------------------------------------------
# angle profiles


@dataclass(frozen=True)
class Uniform:
    theta: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), float(self.theta))


@dataclass(frozen=True)
class TanhStep:
    """Smooth step ``(a + b) / 2 + (b - a) / 2 * tanh(x / width)``."""

    theta_minus: float
    theta_plus: float
    width: float = 3.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = float(self.theta_minus), float(self.theta_plus)
        return 0.5 * (a + b) + 0.5 * (b - a) * np.tanh(x / float(self.width))


@dataclass(frozen=True)
class Piecewise:
    """``theta_minus`` for ``x < boundary`` and ``theta_plus`` for ``x >= boundary``."""

    boundary: int
    theta_minus: float
    theta_plus: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        return np.where(x >= self.boundary, float(self.theta_plus), float(self.theta_minus))


@dataclass(frozen=True)
class Table:
    """Explicit per-site angles; ``values[i]`` sits at coordinate ``start + i``.

    Coordinates outside the table take the nearest end value.
    """

    values: tuple[float, ...]
    start: int = 0

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in np.ravel(self.values))
        if not vals:
            raise ConfigError("angle table is empty")
        object.__setattr__(self, "values", vals)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        idx = np.clip(np.asarray(x, dtype=int) - self.start, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]


AngleProfile = Union[Uniform, TanhStep, Piecewise, Table]


def as_profile(value: float | AngleProfile) -> AngleProfile:
    """Promote a bare number to a :class:`Uniform` profile."""
    if isinstance(value, (Uniform, TanhStep, Piecewise, Table)):
        return value
    v = float(value)
    if not np.isfinite(v):
        raise ConfigError(f"angle must be finite, got {value!r}")
    return Uniform(v)


def site_angles(profile: AngleProfile, geometry: Geometry) -> np.ndarray:
    """Angles on every site; 2D profiles are functions of the y coordinate."""
    if isinstance(geometry, Line):
        return profile(geometry.coords())
    _, y = geometry.coords()
    return profile(y)


def profile_to_dict(profile: AngleProfile) -> dict:
    if isinstance(profile, Uniform):
        return {"kind": "uniform", "theta": profile.theta}
    if isinstance(profile, TanhStep):
        return {"kind": "tanh", "theta_minus": profile.theta_minus,
                "theta_plus": profile.theta_plus, "width": profile.width}
    if isinstance(profile, Piecewise):
        return {"kind": "piecewise", "boundary": profile.boundary,
                "theta_minus": profile.theta_minus, "theta_plus": profile.theta_plus}
    return {"kind": "table", "values": list(profile.values), "start": profile.start}


def profile_from_dict(doc: dict | float) -> AngleProfile:
    if not isinstance(doc, dict):
        return as_profile(doc)
    try:
        kind = doc["kind"]
        if kind == "uniform":
            return as_profile(doc["theta"])
        if kind == "tanh":
            return TanhStep(float(doc["theta_minus"]), float(doc["theta_plus"]),
                            float(doc.get("width", 3.0)))
        if kind == "piecewise":
            return Piecewise(int(doc.get("boundary", 0)), float(doc["theta_minus"]),
                             float(doc["theta_plus"]))
        if kind == "table":
            return Table(tuple(doc["values"]), int(doc.get("start", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad angle profile {doc!r}: {exc}") from exc
    raise ConfigError(f"unknown angle profile kind {doc.get('kind')!r}")


# ---------------------------------------------------------------------------
# translation rules and boundaries


@dataclass(frozen=True)
class BothOpposite:
    """Up moves +1, down moves -1."""


@dataclass(frozen=True)
class UpOnly:
    """Up moves +1, down stays."""


@dataclass(frozen=True)
class DownOnly:
    """Down moves -1, up stays."""


@dataclass(frozen=True)
class Axis2D:
    """Independent displacement vectors for each spin on a torus."""

    up: tuple[int, int]
    down: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "up", tuple(int(v) for v in self.up))
        object.__setattr__(self, "down", tuple(int(v) for v in self.down))


TranslationRule = Union[BothOpposite, UpOnly, DownOnly, Axis2D]


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class ReflectingEdge:
    """Hard wall at the last site of a line.

    At the wall, up flips into down with phase ``exp(i phi)``.  The far end of
    the finite chain is closed the same way (down flips into up with the same
    phase), which keeps the step unitary and local.
    """

    phi: float = 0.0


@dataclass(frozen=True)
class Open:
    """Amplitude pushed past either end is discarded.

    On its own this is a projection, not a unitary.  Protocols use it to cut a
    window out of the infinite lattice, which is exact when the walk happens to
    decouple at the window ends.
    """


Boundary = Union[Periodic, ReflectingEdge, Open]


def rule_displacements(rule: TranslationRule, ndim: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Displacement vectors ``(up, down)`` of a translation rule."""
    if ndim == 1:
        table = {BothOpposite: ((1,), (-1,)), UpOnly: ((1,), (0,)), DownOnly: ((0,), (-1,))}
        for kind, disp in table.items():
            if isinstance(rule, kind):
                return disp
        raise GeometryMismatch(f"{type(rule).__name__} is not a 1D translation rule")
    if isinstance(rule, Axis2D):
        return rule.up, rule.down
    raise GeometryMismatch(f"{type(rule).__name__} is not a 2D translation rule")


# ---------------------------------------------------------------------------
# kernels (spin axis = geometry ndim, optional trailing batch axes)


def _spin(arr: np.ndarray, ndim: int, s: int) -> np.ndarray:
    return arr[(slice(None),) * ndim + (s,)]


def _rotate(arr: np.ndarray, theta: np.ndarray) -> np.ndarray:
    ndim = theta.ndim
    extra = arr.ndim - ndim - 1
    c = np.cos(0.5 * theta).reshape(theta.shape + (1,) * extra)
    s = np.sin(0.5 * theta).reshape(theta.shape + (1,) * extra)
    up, dn = _spin(arr, ndim, 0), _spin(arr, ndim, 1)
    return np.stack([c * up - s * dn, s * up + c * dn], axis=ndim)


def _shift(a: np.ndarray, disp: Sequence[int], periodic: bool) -> np.ndarray:
    out = a
    for axis, d in enumerate(disp):
        if d == 0:
            continue
        out = np.roll(out, d, axis=axis)
        if not periodic:
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(0, d) if d > 0 else slice(d, None)
            out[tuple(sl)] = 0
    return out


def _translate(arr: np.ndarray, ndim: int, rule: TranslationRule, boundary: Boundary) -> np.ndarray:
    d_up, d_dn = rule_displacements(rule, ndim)
    up, dn = _spin(arr, ndim, 0), _spin(arr, ndim, 1)
    if isinstance(boundary, ReflectingEdge):
        if ndim != 1 or not isinstance(rule, BothOpposite):
            raise GeometryMismatch("ReflectingEdge requires a 1D BothOpposite translation")
        ph = np.exp(1j * boundary.phi)
        new_up = np.empty_like(up, dtype=complex)
        new_dn = np.empty_like(dn, dtype=complex)
        new_up[1:] = up[:-1]
        new_up[0] = ph * dn[0]
        new_dn[:-1] = dn[1:]
        new_dn[-1] = ph * up[-1]
        return np.stack([new_up, new_dn], axis=1)
    periodic = isinstance(boundary, Periodic)
    if not periodic and not isinstance(boundary, Open):
        raise GeometryMismatch(f"unknown boundary {boundary!r}")
    return np.stack([_shift(up, d_up, periodic), _shift(dn, d_dn, periodic)], axis=ndim)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class SpinorState:
    """Normalized spinor wavefunction on a line or torus."""

    geometry: Geometry
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        expected = self.geometry.shape + (2,)
        if amps.shape != expected:
            if amps.size != 2 * self.geometry.n_sites:
                raise GeometryMismatch(f"expected {2 * self.geometry.n_sites} amplitudes, got {amps.size}")
            amps = amps.reshape(expected)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if abs(self.norm_sq() - 1.0) > NORM_TOL:
            raise ConfigError(f"state is not normalized (|psi|^2 = {self.norm_sq():.3e})")

    @classmethod
    def _unchecked(cls, geometry: Geometry, amps: np.ndarray) -> "SpinorState":
        obj = object.__new__(cls)
        amps = np.asarray(amps, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(obj, "geometry", geometry)
        object.__setattr__(obj, "amplitudes", amps)
        return obj

    @classmethod
    def from_vector(cls, geometry: Geometry, vec: np.ndarray, normalize: bool = False) -> "SpinorState":
        v = np.asarray(vec, dtype=complex).reshape(geometry.shape + (2,))
        if normalize:
            nrm = np.linalg.norm(v)
            if nrm == 0:
                raise ConfigError("cannot normalize a zero vector")
            v = v / nrm
        return cls(geometry, v)

    def to_vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1).copy()

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def inner(self, other: "SpinorState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def localized_state(geometry: Geometry, site, spin_amplitudes: Sequence[complex]) -> SpinorState:
    """Walker sitting on a single site with the given (unnormalized) spinor."""
    spinor = np.asarray(spin_amplitudes, dtype=complex).reshape(2)
    nrm = np.linalg.norm(spinor)
    if nrm == 0 or not np.isfinite(nrm):
        raise ConfigError("spinor must have finite nonzero norm")
    amps = np.zeros(geometry.shape + (2,), dtype=complex)
    if isinstance(geometry, Line) and np.ndim(site) > 0:
        site = np.ravel(site)[0]
    amps[geometry.index_of(site)] = spinor / nrm
    return SpinorState(geometry, amps)


def apply_rotation(state: SpinorState, profile: float | AngleProfile) -> SpinorState:
    """Multiply the spinor on each site by ``R_y(theta(site))``."""
    theta = site_angles(as_profile(profile), state.geometry)
    return SpinorState._unchecked(state.geometry, _rotate(state.amplitudes, theta))


def apply_translation(state: SpinorState, rule: TranslationRule,
                      boundary: Boundary = Periodic()) -> SpinorState:
    """Spin-dependent shift of the amplitudes."""
    if isinstance(rule, UpOnly) and isinstance(boundary, ReflectingEdge):
        # flipping up into down at the wall would collide with the resident down
        # amplitude, so no unitary in-site reflection exists for this rule
        raise GeometryMismatch("ReflectingEdge cannot be unitary for UpOnly; use BothOpposite")
    out = _translate(state.amplitudes, state.geometry.ndim, rule, boundary)
    return SpinorState._unchecked(state.geometry, out)


def position_distribution(state: SpinorState) -> np.ndarray:
    """Probability per site, shaped like the geometry."""
    return np.sum(np.abs(state.amplitudes) ** 2, axis=-1)


def probability_in_window(state: SpinorState, center, radius: int) -> float:
    """Probability within Chebyshev distance ``radius`` of ``center``."""
    if radius < 0:
        raise ConfigError("radius must be non-negative")
    p = position_distribution(state)
    geom = state.geometry
    if isinstance(geom, Line):
        mask = np.abs(geom.coords() - np.ravel(center)[0]) <= radius
    else:
        x, y = geom.coords()
        cx, cy = center
        mask = np.maximum(np.abs(x - cx), np.abs(y - cy)) <= radius
    return float(np.clip(p[mask].sum(), 0.0, 1.0))
