"""Named walk protocols, evolution, and one-step unitaries.

A protocol is an ordered tuple of steps stored in *application* order, so the
first entry acts first.  Products written right-to-left in the physics
convention (``U = T R``) therefore appear here as ``[Rotate, Translate]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .errors import ConfigError, GeometryMismatch, NonUnitary, SizeCapExceeded
from .lattice import (
    AngleProfile,
    Axis2D,
    BothOpposite,
    Boundary,
    DownOnly,
    Geometry,
    Line,
    Open,
    Periodic,
    ReflectingEdge,
    SpinorState,
    Torus2D,
    TranslationRule,
    Uniform,
    UpOnly,
    _rotate,
    _translate,
    as_profile,
    profile_from_dict,
    profile_to_dict,
    rule_displacements,
    site_angles,
)

DENSE_CAP = 20_000
UNITARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class Rotate:
    profile: AngleProfile

    def __post_init__(self) -> None:
        object.__setattr__(self, "profile", as_profile(self.profile))


@dataclass(frozen=True)
class Translate:
    rule: TranslationRule
    boundary: Boundary = Periodic()


@dataclass(frozen=True)
class ZRotate:
    """Site-uniform ``exp(-i angle sigma_z / 2)``; breaks the chiral symmetry."""

    angle: float


Step = Union[Rotate, Translate, ZRotate]


@dataclass(frozen=True)
class WalkProtocol:
    steps: tuple[Step, ...]
    geometry: Geometry
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        for st in self.steps:
            if isinstance(st, Translate):
                rule_displacements(st.rule, self.geometry.ndim)
                if isinstance(st.boundary, ReflectingEdge) and not isinstance(self.geometry, Line):
                    raise GeometryMismatch("reflecting edges exist only on a line")
                if isinstance(st.boundary, Open) and not isinstance(self.geometry, Line):
                    raise GeometryMismatch("open windows are only supported on a line")

    @property
    def dim(self) -> int:
        return 2 * self.geometry.n_sites

    def _pad(self) -> int:
        pad = 0
        for st in self.steps:
            if isinstance(st, Translate) and isinstance(st.boundary, Open):
                up, dn = rule_displacements(st.rule, 1)
                pad += max(abs(up[0]), abs(dn[0]))
        return pad

    def _run(self, arr: np.ndarray, geometry: Geometry) -> np.ndarray:
        ndim = geometry.ndim
        for st in self.steps:
            if isinstance(st, Rotate):
                arr = _rotate(arr, site_angles(st.profile, geometry))
            elif isinstance(st, Translate):
                arr = _translate(arr, ndim, st.rule, st.boundary)
            else:
                ph = np.exp(-0.5j * st.angle)
                arr = np.array(arr, dtype=complex)
                arr[(slice(None),) * ndim + (0,)] *= ph
                arr[(slice(None),) * ndim + (1,)] *= np.conj(ph)
        return arr

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        """One period acting on ``geometry.shape + (2,) + batch`` amplitudes."""
        pad = self._pad()
        if pad == 0:
            return self._run(arr, self.geometry)
        # cut a window from the infinite chain: evaluate on a padded copy,
        # keep only the original sites
        big = self.geometry.padded(pad)
        ext = np.zeros((big.length,) + arr.shape[1:], dtype=complex)
        ext[pad:pad + self.geometry.length] = arr
        out = self._run(ext, big)
        return out[pad:pad + self.geometry.length]

    def to_dict(self) -> dict:
        return {"label": self.label, "geometry": geometry_to_dict(self.geometry),
                "steps": [step_to_dict(s) for s in self.steps]}


# ---------------------------------------------------------------------------
# protocol families


def _opt_profile(v) -> AngleProfile:
    return as_profile(v)


@dataclass(frozen=True)
class Conventional1D:
    theta: AngleProfile
    boundary: Boundary = Periodic()

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _opt_profile(self.theta))


@dataclass(frozen=True)
class SplitStep1D:
    theta1: AngleProfile
    theta2: AngleProfile
    boundary: Boundary = Periodic()

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta1", _opt_profile(self.theta1))
        object.__setattr__(self, "theta2", _opt_profile(self.theta2))


@dataclass(frozen=True)
class TimeShiftedSplitStep1D:
    """``U' = T_up R(theta1) T_down R(theta2)``."""

    theta1: AngleProfile
    theta2: AngleProfile
    boundary: Boundary = Periodic()

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta1", _opt_profile(self.theta1))
        object.__setattr__(self, "theta2", _opt_profile(self.theta2))


@dataclass(frozen=True)
class Reflecting1D:
    theta: AngleProfile
    phi: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _opt_profile(self.theta))


@dataclass(frozen=True)
class TwoDSixOp:
    theta1: AngleProfile
    theta2: AngleProfile

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta1", _opt_profile(self.theta1))
        object.__setattr__(self, "theta2", _opt_profile(self.theta2))


@dataclass(frozen=True)
class TwoDSimple:
    theta1: AngleProfile
    theta2: AngleProfile

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta1", _opt_profile(self.theta1))
        object.__setattr__(self, "theta2", _opt_profile(self.theta2))


ProtocolFamily = Union[Conventional1D, SplitStep1D, TimeShiftedSplitStep1D,
                       Reflecting1D, TwoDSixOp, TwoDSimple]

# the three translations of the six-operation walk and the two of the simple one
SIXOP_T1 = Axis2D((1, 1), (-1, -1))
SIXOP_T2 = Axis2D((0, 1), (0, -1))
SIXOP_T3 = Axis2D((1, 0), (-1, 0))
SIMPLE_T1 = Axis2D((1, 0), (-1, 0))
SIMPLE_T2 = Axis2D((0, 1), (0, -1))


def family_steps(family: ProtocolFamily) -> tuple[Step, ...]:
    if isinstance(family, Conventional1D):
        return (Rotate(family.theta), Translate(BothOpposite(), family.boundary))
    if isinstance(family, SplitStep1D):
        b = family.boundary
        return (Rotate(family.theta1), Translate(UpOnly(), b),
                Rotate(family.theta2), Translate(DownOnly(), b))
    if isinstance(family, TimeShiftedSplitStep1D):
        b = family.boundary
        return (Rotate(family.theta2), Translate(DownOnly(), b),
                Rotate(family.theta1), Translate(UpOnly(), b))
    if isinstance(family, Reflecting1D):
        return (Rotate(family.theta), Translate(BothOpposite(), ReflectingEdge(family.phi)))
    if isinstance(family, TwoDSixOp):
        return (Rotate(family.theta1), Translate(SIXOP_T1), Rotate(family.theta2),
                Translate(SIXOP_T2), Rotate(family.theta1), Translate(SIXOP_T3))
    if isinstance(family, TwoDSimple):
        return (Rotate(family.theta1), Translate(SIMPLE_T1),
                Rotate(family.theta2), Translate(SIMPLE_T2))
    raise ConfigError(f"unknown protocol family {family!r}")


def is_2d(family: ProtocolFamily) -> bool:
    return isinstance(family, (TwoDSixOp, TwoDSimple))


def build_protocol(family: ProtocolFamily, geometry: Geometry, label: str = "") -> WalkProtocol:
    """Assemble the step list of a named family on a geometry."""
    if is_2d(family) != isinstance(geometry, Torus2D):
        raise GeometryMismatch(f"{type(family).__name__} cannot run on {type(geometry).__name__}")
    for name, value in vars(family).items():
        if isinstance(value, Uniform) and not np.isfinite(value.theta):
            raise ConfigError(f"{name} is not finite")
    return WalkProtocol(family_steps(family), geometry, label or type(family).__name__)


# ---------------------------------------------------------------------------
# drivers


def evolve(state: SpinorState, protocol: WalkProtocol, n_steps: int) -> SpinorState:
    """Apply ``n_steps`` periods; raises if the norm drifts by more than 1e-10."""
    for s in evolve_iter(state, protocol, n_steps):
        state = s
    return state


def evolve_iter(state: SpinorState, protocol: WalkProtocol, n_steps: int) -> Iterator[SpinorState]:
    """Yield the state after each of ``n_steps`` periods."""
    if state.geometry != protocol.geometry:
        raise GeometryMismatch("state and protocol live on different geometries")
    if n_steps < 0:
        raise ConfigError("n_steps must be non-negative")
    arr = state.amplitudes
    n0 = state.norm_sq()
    for _ in range(int(n_steps)):
        arr = protocol.apply_array(arr)
        nrm = float(np.vdot(arr, arr).real)
        if abs(nrm - n0) > UNITARY_TOL:
            raise NonUnitary(f"norm changed by {nrm - n0:.3e} in one step")
        yield SpinorState._unchecked(state.geometry, arr)


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def one_step_unitary(protocol: WalkProtocol, cap: int = DENSE_CAP, chunk: int = 1024) -> np.ndarray:
    """Dense matrix whose column ``j`` is the protocol applied to basis state ``j``."""
    dim = protocol.dim
    if dim > cap:
        raise SizeCapExceeded(f"{dim} basis states exceed the dense cap {cap}")
    shape = protocol.geometry.shape + (2,)
    u = np.empty((dim, dim), dtype=complex)
    for start in range(0, dim, chunk):
        stop = min(dim, start + chunk)
        basis = np.zeros((dim, stop - start), dtype=complex)
        basis[np.arange(start, stop), np.arange(stop - start)] = 1.0
        out = protocol.apply_array(basis.reshape(shape + (stop - start,)))
        u[:, start:stop] = out.reshape(dim, stop - start)
    err = unitarity_error(u)
    if err > UNITARY_TOL:
        raise NonUnitary(f"one-step operator deviates from unitarity by {err:.3e}")
    return u


# ---------------------------------------------------------------------------
# momentum space



def _rot_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _uniform_value(profile: AngleProfile) -> float:
    if not isinstance(profile, Uniform):
        raise ConfigError("momentum-space matrices need translation-invariant (uniform) angles")
    return float(profile.theta)


def momentum_step_matrix(source: ProtocolFamily | WalkProtocol, k) -> np.ndarray:
    """Bloch unitary ``U(k)`` (2x2, broadcast over ``k``).

    A spin displaced by ``d`` picks up ``exp(i k . d)``, i.e. one step of
    ``T`` is ``exp(i k sigma_z)`` in 1D.  ``k`` is a scalar/array in 1D and a
    pair ``(kx, ky)`` of broadcastable arrays in 2D.
    """
    if isinstance(source, WalkProtocol):
        steps, ndim = source.steps, source.geometry.ndim
    else:
        steps, ndim = family_steps(source), 2 if is_2d(source) else 1
    if ndim == 1:
        kvec = (np.asarray(k, dtype=float),)
    else:
        kx, ky = np.broadcast_arrays(np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float))
        kvec = (kx, ky)
    shape = kvec[0].shape
    u = np.broadcast_to(np.eye(2, dtype=complex), shape + (2, 2)).copy()
    for st in steps:
        if isinstance(st, Rotate):
            u = _rot_matrix(_uniform_value(st.profile)) @ u
        elif isinstance(st, ZRotate):
            u = np.diag([np.exp(-0.5j * st.angle), np.exp(0.5j * st.angle)]) @ u
        else:
            d_up, d_dn = rule_displacements(st.rule, ndim)
            ph_up = np.exp(1j * sum(kc * d for kc, d in zip(kvec, d_up)))
            ph_dn = np.exp(1j * sum(kc * d for kc, d in zip(kvec, d_dn)))
            u = np.stack([u[..., 0, :] * ph_up[..., None], u[..., 1, :] * ph_dn[..., None]], axis=-2)
    return u


# ---------------------------------------------------------------------------
# JSON documents


def geometry_to_dict(geometry: Geometry) -> dict:
    if isinstance(geometry, Line):
        return {"kind": "line", "length": geometry.length, "offset": geometry.offset}
    return {"kind": "torus", "lx": geometry.lx, "ly": geometry.ly}


def geometry_from_dict(doc: dict) -> Geometry:
    try:
        if doc["kind"] == "line":
            return Line(int(doc["length"]), doc.get("offset"))
        if doc["kind"] == "torus":
            return Torus2D(int(doc["lx"]), int(doc["ly"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad geometry {doc!r}: {exc}") from exc
    raise ConfigError(f"unknown geometry kind {doc.get('kind')!r}")


def boundary_to_dict(b: Boundary) -> dict:
    if isinstance(b, ReflectingEdge):
        return {"kind": "reflecting", "phi": b.phi}
    return {"kind": "open" if isinstance(b, Open) else "periodic"}


def boundary_from_dict(doc: dict | None) -> Boundary:
    if doc is None:
        return Periodic()
    kind = doc.get("kind", "periodic")
    if kind == "periodic":
        return Periodic()
    if kind == "open":
        return Open()
    if kind == "reflecting":
        return ReflectingEdge(float(doc.get("phi", 0.0)))
    raise ConfigError(f"unknown boundary kind {kind!r}")


def step_to_dict(st: Step) -> dict:
    if isinstance(st, Rotate):
        return {"op": "rotate", "profile": profile_to_dict(st.profile)}
    if isinstance(st, ZRotate):
        return {"op": "zrotate", "angle": st.angle}
    up, dn = rule_displacements(st.rule, 2 if isinstance(st.rule, Axis2D) else 1)
    return {"op": "translate", "rule": type(st.rule).__name__, "up": list(up), "down": list(dn),
            "boundary": boundary_to_dict(st.boundary)}


_FAMILY_NAMES = {
    "conventional": Conventional1D,
    "split_step": SplitStep1D,
    "time_shifted": TimeShiftedSplitStep1D,
    "reflecting": Reflecting1D,
    "sixop": TwoDSixOp,
    "simple2d": TwoDSimple,
}


def family_to_dict(family: ProtocolFamily) -> dict:
    name = {v: k for k, v in _FAMILY_NAMES.items()}[type(family)]
    doc: dict = {"family": name}
    for key, value in vars(family).items():
        if key == "boundary":
            doc[key] = boundary_to_dict(value)
        elif key == "phi":
            doc[key] = float(value)
        else:
            doc[key] = profile_to_dict(value)
    return doc


def family_from_dict(doc: dict) -> ProtocolFamily:
    try:
        cls = _FAMILY_NAMES[doc["family"]]
    except KeyError as exc:
        raise ConfigError(f"unknown or missing protocol family in {doc!r}") from exc
    kwargs = {}
    for key, value in doc.items():
        if key == "family":
            continue
        if key == "boundary":
            kwargs[key] = boundary_from_dict(value)
        elif key == "phi":
            kwargs[key] = float(value)
        else:
            kwargs[key] = profile_from_dict(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {doc['family']}: {exc}") from exc
