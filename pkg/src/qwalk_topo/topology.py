"""Topological invariants of walk bands and bound-state charges.

Winding numbers count how often the Bloch vector circles the great circle
perpendicular to the chiral axis ``A``.  Chern numbers are computed twice:
from the solid angle swept by ``n(k)`` and from plaquette products of the
upper-band eigenvector (Fukui-Hatsugai-Suzuki).  The charge operator for
bound states is ``i Gamma = A.sigma``, whose eigenvalues are real.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    GaplessBand,
    NonPlanar,
    NumericalFailure,
    OnCriticalLine,
    SymmetryBroken,
)
from .lattice import Geometry, Torus2D
from .protocols import (
    Conventional1D,
    ProtocolFamily,
    SplitStep1D,
    TimeShiftedSplitStep1D,
    TwoDSimple,
    TwoDSixOp,
    is_2d,
    momentum_step_matrix,
)
from .spectral import (
    SIGMA,
    BlochBand,
    QuasiEnergySpectrum,
    band_from_unitary,
    bloch_band,
    brillouin_zone,
    k_grid,
)

PLANAR_TOL = 1e-6
INTEGER_TOL = 1e-6
CHERN_TOL = 1e-3
LINE_TOL = 1e-9


# ---------------------------------------------------------------------------
# chiral symmetry


@dataclass(frozen=True, eq=False)
class ChiralFrame:
    """Chiral axis ``A`` and ``Gamma = exp(-i pi A.sigma / 2) = -i A.sigma``.

    ``Gamma`` squares to ``-1``; :attr:`charge` is ``i Gamma = A.sigma``,
    which squares to ``+1`` and is the operator whose eigenvalues define the
    bound-state charges.
    """

    A: np.ndarray
    gamma: np.ndarray

    @property
    def charge(self) -> np.ndarray:
        return 1j * self.gamma


def chiral_frame(theta1: float) -> ChiralFrame:
    a = np.array([np.cos(0.5 * theta1), 0.0, np.sin(0.5 * theta1)])
    return ChiralFrame(a, -1j * np.einsum("a,aij->ij", a, SIGMA))


def frame_for(family: ProtocolFamily) -> ChiralFrame:
    """Chiral frame set by the first rotation angle of a uniform 1D family."""
    from .protocols import _uniform_value

    if isinstance(family, Conventional1D):
        return chiral_frame(_uniform_value(family.theta))
    if isinstance(family, (SplitStep1D, TimeShiftedSplitStep1D)):
        return chiral_frame(_uniform_value(family.theta1))
    raise ConfigError(f"no chiral frame defined for {type(family).__name__}")


def lift(op: np.ndarray, n_sites: int) -> np.ndarray:
    """Site-local 2x2 operator acting identically on every site."""
    return np.kron(np.eye(n_sites), op)


def verify_chiral_symmetry(u: np.ndarray, frame: ChiralFrame, geometry: Geometry | None = None) -> float:
    """Max-entry residual of ``Gamma^-1 U Gamma - U^dagger`` with ``Gamma`` lifted site-locally."""
    n_sites = u.shape[0] // 2 if geometry is None else geometry.n_sites
    if 2 * n_sites != u.shape[0]:
        raise ConfigError("geometry does not match the operator dimension")
    g = lift(frame.gamma, n_sites)
    conj = g.conj().T @ u @ g
    return float(np.max(np.abs(conj - u.conj().T)))


# ---------------------------------------------------------------------------
# 1D winding


def _accumulated_angle(n: np.ndarray, A: np.ndarray) -> tuple[float, float]:
    e1 = np.array([0.0, 1.0, 0.0])
    e2 = np.cross(e1, A)
    ang = np.arctan2(n @ e2, n @ e1)
    d = np.diff(np.append(ang, ang[0]))
    d = np.mod(d + np.pi, 2 * np.pi) - np.pi
    return float(d.sum()), float(np.max(np.abs(d)))


def winding_number(band: BlochBand, frame: ChiralFrame) -> int:
    """Signed number of turns of ``n(k)`` around the axis ``A``.

    Raises
    ------
    GaplessBand
        A grid point has an undefined Bloch vector.
    NonPlanar
        ``max |n.A|`` exceeds ``PLANAR_TOL``.
    NumericalFailure
        Consecutive samples still subtend more than ``pi/2`` after one grid
        refinement, or the accumulated angle is not an integer turn count.
    """
    if band.is_2d:
        raise ConfigError("winding number needs a 1D band")
    if np.any(band.gapless) or np.any(np.isnan(band.n)):
        raise GaplessBand("winding number undefined: band is gapless on the grid")
    dev = float(np.max(np.abs(band.n @ frame.A)))
    if dev > PLANAR_TOL:
        raise NonPlanar(f"Bloch vectors leave the plane normal to A (max |n.A| = {dev:.2e})")
    total, jump = _accumulated_angle(band.n, frame.A)
    if jump > 0.5 * np.pi:
        fine = bloch_band(band.family, n_k=4 * len(band.k))
        if np.any(fine.gapless):
            raise GaplessBand("winding number undefined: refined band is gapless")
        total, jump = _accumulated_angle(fine.n, frame.A)
        if jump > 0.5 * np.pi:
            raise NumericalFailure("angle steps exceed pi/2 even after refinement")
    w = total / (2 * np.pi)
    if abs(w - round(w)) > INTEGER_TOL:
        raise NumericalFailure(f"accumulated winding {w:.6f} is not an integer")
    return int(round(w))


def on_critical_line_1d(theta1: float, theta2: float, tol: float = 1e-12) -> bool:
    """``theta2 = +-theta1`` or ``2 pi +- theta1`` modulo ``4 pi`` (split-step gap closings)."""
    for base in (theta2 - theta1, theta2 + theta1):
        r = np.mod(base, 2 * np.pi)
        if min(r, 2 * np.pi - r) < tol:
            return True
    return False


def critical_distance_1d(theta1: float, theta2: float) -> float:
    """Distance in angle space to the nearest split-step critical line."""
    out = np.inf
    for base in (theta2 - theta1, theta2 + theta1):
        r = np.mod(base, 2 * np.pi)
        out = min(out, r, 2 * np.pi - r)
    return float(out / np.sqrt(2.0))


def winding_closed_form(theta1: float, theta2: float) -> int:
    """Split-step winding: 1 when ``|tan(theta2/2) / tan(theta1/2)| < 1``, else 0."""
    if on_critical_line_1d(theta1, theta2):
        raise OnCriticalLine(f"(theta1, theta2) = ({theta1:.6g}, {theta2:.6g}) closes a gap")
    t1, t2 = abs(np.tan(0.5 * theta1)), abs(np.tan(0.5 * theta2))
    return int(t2 < t1)


# ---------------------------------------------------------------------------
# Chern numbers


def _solid_angle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) \
        + np.einsum("...i,...i->...", c, a)
    return 2.0 * np.arctan2(num, den)


def _check_2d(band: BlochBand) -> None:
    if not band.is_2d:
        raise ConfigError("Chern numbers need a 2D band")
    if np.any(band.gapless) or np.any(np.isnan(band.n)):
        raise GaplessBand("Chern number undefined: band is gapless on the grid")


def chern_solid_angle_value(band: BlochBand) -> float:
    """Unrounded degree of ``n(k)``: signed spherical-triangle areas over ``4 pi``.

    Each grid plaquette is split into two triangles.  The overall sign is
    chosen so the value equals the plaquette Chern number of the upper band.
    """
    _check_2d(band)
    n = band.n
    n10 = np.roll(n, -1, axis=0)
    n01 = np.roll(n, -1, axis=1)
    n11 = np.roll(n10, -1, axis=1)
    omega = _solid_angle(n, n10, n11) + _solid_angle(n, n11, n01)
    return float(omega.sum() / (4 * np.pi))


def chern_number_solid_angle(band: BlochBand) -> int:
    c = chern_solid_angle_value(band)
    if abs(c - round(c)) > CHERN_TOL:
        raise NumericalFailure(f"solid-angle Chern value {c:.5f} is not an integer")
    return int(round(c))


def band_eigenvectors(band: BlochBand, upper: bool = True) -> np.ndarray:
    """Eigenvectors of ``n.sigma`` with eigenvalue ``+1`` (upper band) or ``-1``."""
    _check_2d(band)
    h = np.einsum("...a,aij->...ij", band.n, SIGMA)
    _, vecs = np.linalg.eigh(h)
    return vecs[..., 1 if upper else 0]


def chern_plaquette_value(field: np.ndarray) -> float:
    """Sum of plaquette Berry phases over ``2 pi`` for a periodic ``(Nx, Ny, d)`` field."""
    field = np.asarray(field, dtype=complex)

    def link(a, b):
        z = np.einsum("...i,...i->...", a.conj(), b)
        mag = np.abs(z)
        if np.any(mag < 1e-14):
            raise NumericalFailure("vanishing link overlap; refine the grid")
        return z / mag

    u1 = link(field, np.roll(field, -1, axis=0))
    u2 = link(field, np.roll(field, -1, axis=1))
    f = np.angle(u1 * np.roll(u2, -1, axis=0) / (np.roll(u1, -1, axis=1) * u2))
    return float(f.sum() / (2 * np.pi))


def chern_number_berry_plaquette(field: np.ndarray | BlochBand, upper: bool = True) -> int:
    """Lattice field-strength Chern number of an eigenvector field (or of a band)."""
    if isinstance(field, BlochBand):
        field = band_eigenvectors(field, upper)
    c = chern_plaquette_value(field)
    return int(round(c))


# ---------------------------------------------------------------------------
# gaps and gapless lines


def _min_distance(E: np.ndarray, target: float) -> np.ndarray:
    return E if target == 0.0 else np.pi - E


def _energies(family: ProtocolFamily, k) -> np.ndarray:
    return band_from_unitary(momentum_step_matrix(family, k))[0]


def min_gap(family: ProtocolFamily, target: float = 0.0, n_k: int | None = None) -> float:
    """Smallest distance of the bands ``+-E(k)`` to ``target`` (0 or pi).

    The coarse grid minimum is refined once on a 33-point (per axis) grid
    spanning two coarse spacings around the minimizer.
    """
    if target not in (0.0, np.pi):
        raise ConfigError("gap target must be 0 or pi")
    lo, hi = brillouin_zone(family)
    if is_2d(family):
        n = 128 if n_k is None else int(n_k)
        kx, ky = k_grid(family, n)
        d = _min_distance(_energies(family, (kx, ky)), target)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        h = (hi - lo) / n
        t = np.linspace(-h, h, 33)
        fx, fy = np.meshgrid(kx[i, j] + t, ky[i, j] + t, indexing="ij")
        d2 = _min_distance(_energies(family, (fx, fy)), target)
        return float(min(d.min(), d2.min()))
    n = 1024 if n_k is None else int(n_k)
    k = k_grid(family, n)
    d = _min_distance(_energies(family, k), target)
    i = int(np.argmin(d))
    h = (hi - lo) / n
    d2 = _min_distance(_energies(family, k[i] + np.linspace(-h, h, 33)), target)
    return float(min(d.min(), d2.min()))


@dataclass(frozen=True)
class GaplessClass:
    """Analytic classification of a six-operation parameter point."""

    at_0: tuple[str, ...]
    at_pi: tuple[str, ...]

    @property
    def status(self) -> str:
        if self.at_0 and self.at_pi:
            return "GaplessAt0AndPi"
        if self.at_0:
            return "GaplessAt0"
        if self.at_pi:
            return "GaplessAtPi"
        return "Gapped"

    @property
    def gapped(self) -> bool:
        return not (self.at_0 or self.at_pi)


def _on(value: float, offset: float, period: float, tol: float) -> bool:
    r = np.mod(value - offset, period)
    return bool(min(r, period - r) < tol)


def gapless_lines_sixop(theta1: float, theta2: float, tol: float = LINE_TOL) -> GaplessClass:
    """Lines of the six-operation walk on which the gap at 0 or pi closes.

    Line labels: ``"t1+t2/2"`` for ``theta1 + theta2/2``, ``"t1-t2/2"`` for
    ``theta1 - theta2/2`` and ``"t2=2n*pi"``.  Odd multiples of pi in
    ``theta2`` only close the gap where they cross the other two families.
    """
    plus, minus = theta1 + 0.5 * theta2, theta1 - 0.5 * theta2
    z, p = [], []
    if _on(plus, 0.0, 2 * np.pi, tol):
        z.append("t1+t2/2=2n*pi")
    if _on(minus, np.pi, 2 * np.pi, tol):
        z.append("t1-t2/2=(2n+1)*pi")
    if _on(plus, np.pi, 2 * np.pi, tol):
        p.append("t1+t2/2=(2n+1)*pi")
    if _on(minus, 0.0, 2 * np.pi, tol):
        p.append("t1-t2/2=2n*pi")
    if _on(theta2, 0.0, 2 * np.pi, tol):
        z.append("t2=2n*pi")
        p.append("t2=2n*pi")
    return GaplessClass(tuple(z), tuple(p))


def sixop_line_distance(theta1: float, theta2: float) -> float:
    """Euclidean distance in the angle plane to the nearest analytic gapless line."""
    plus, minus = theta1 + 0.5 * theta2, theta1 - 0.5 * theta2
    norm = np.sqrt(1.25)

    def dist(v, period):
        r = np.mod(v, period)
        return min(r, period - r)

    return float(min(dist(plus, np.pi) / norm, dist(minus, np.pi) / norm, dist(theta2, 2 * np.pi)))


# ---------------------------------------------------------------------------
# phase diagrams


@dataclass(frozen=True)
class PhaseDiagramCell:
    theta1: float
    theta2: float
    invariant: int | None   # None on a critical line
    min_gap_0: float
    min_gap_pi: float


def _cell_1d(theta1: float, theta2: float, n_k: int) -> PhaseDiagramCell:
    fam = SplitStep1D(theta1, theta2)
    g0, gpi = min_gap(fam, 0.0, n_k), min_gap(fam, np.pi, n_k)
    try:
        w: int | None = abs(winding_number(bloch_band(fam, n_k=n_k), chiral_frame(theta1)))
    except (GaplessBand, NumericalFailure):
        w = None
    if on_critical_line_1d(theta1, theta2, 1e-9):
        w = None
    return PhaseDiagramCell(float(theta1), float(theta2), w, g0, gpi)


def _cell_2d(family_cls, theta1: float, theta2: float, n_k: int) -> PhaseDiagramCell:
    fam = family_cls(theta1, theta2)
    g0, gpi = min_gap(fam, 0.0, n_k), min_gap(fam, np.pi, n_k)
    c: int | None
    if min(g0, gpi) < 1e-6:
        c = None
    else:
        try:
            c = chern_number_berry_plaquette(bloch_band(fam, n_k=n_k))
        except (GaplessBand, NumericalFailure):
            c = None
    return PhaseDiagramCell(float(theta1), float(theta2), c, g0, gpi)


def _sweep(fn: Callable[[float, float], PhaseDiagramCell], t1: Sequence[float], t2: Sequence[float],
           workers: int) -> list[PhaseDiagramCell]:
    pairs = [(a, b) for a in t1 for b in t2]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda p: fn(*p), pairs))
    return [fn(a, b) for a, b in pairs]


def phase_diagram_1d(theta1: Sequence[float], theta2: Sequence[float], n_k: int = 1024,
                     workers: int = 1) -> list[PhaseDiagramCell]:
    """Split-step winding numbers (as ``|W|``) and gaps, in row-major grid order."""
    return _sweep(lambda a, b: _cell_1d(a, b, n_k), theta1, theta2, workers)


def phase_diagram_2d(family: str, theta1: Sequence[float], theta2: Sequence[float],
                     n_k: int = 128, workers: int = 1) -> list[PhaseDiagramCell]:
    """Upper-band Chern numbers and gaps for ``"sixop"`` or ``"simple2d"``."""
    cls = {"sixop": TwoDSixOp, "simple2d": TwoDSimple}.get(family)
    if cls is None:
        raise ConfigError(f"unknown 2D family {family!r}")
    return _sweep(lambda a, b: _cell_2d(cls, a, b, n_k), theta1, theta2, workers)


# ---------------------------------------------------------------------------
# bound-state charges


@dataclass(frozen=True)
class BoundStateCharges:
    Q0: int
    Qpi: int
    q0_states: tuple[int, ...]
    qpi_states: tuple[int, ...]


def _site_mask(geometry: Geometry, region) -> np.ndarray:
    if region is None:
        return np.ones(geometry.n_sites, dtype=bool)
    if callable(region):
        coords = geometry.coords()
        mask = region(*coords) if isinstance(geometry, Torus2D) else region(coords)
        return np.asarray(mask, dtype=bool).ravel()
    mask = np.asarray(region, dtype=bool).ravel()
    if mask.size != geometry.n_sites:
        raise ConfigError("region mask must have one entry per site")
    return mask


def _charges(v: np.ndarray, frame: ChiralFrame, mask: np.ndarray, tol: float) -> tuple[int, ...]:
    if v.shape[1] == 0:
        return ()
    if not mask.all():
        w = v.reshape(len(mask), 2, -1)[mask].reshape(-1, v.shape[1])
        evals, evecs = np.linalg.eigh(w.conj().T @ w)
        v = v @ evecs[:, evals > 0.5]
        if v.shape[1] == 0:
            return ()
        v, _ = np.linalg.qr(v)
    n = v.shape[0] // 2
    qv = np.einsum("ij,sjm->sim", frame.charge, v.reshape(n, 2, -1)).reshape(v.shape)
    leak = np.linalg.norm(qv - v @ (v.conj().T @ qv), axis=0)
    if np.max(leak) > tol:
        raise SymmetryBroken(f"subspace is not invariant under the charge operator (leak {np.max(leak):.2e})")
    m = v.conj().T @ qv
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if np.max(np.abs(np.abs(ev) - 1.0)) > tol:
        raise SymmetryBroken("charge eigenvalues are not +-1")
    return tuple(int(round(e)) for e in ev)


def bound_state_charges(spectrum: QuasiEnergySpectrum, frame: ChiralFrame, window: float = 1e-6,
                        region=None, tol: float = 1e-6) -> BoundStateCharges:
    """Chiral charges of the ``E = 0`` and ``E = pi`` eigenspaces.

    Parameters
    ----------
    spectrum : QuasiEnergySpectrum
        Spectrum of a chiral-symmetric walk.
    frame : ChiralFrame
        Frame whose :attr:`~ChiralFrame.charge` operator is applied on every site.
    window : float
        Eigenphases within ``window`` of 0 (of pi) span the subspace.
    region : bool mask over sites or callable of the coordinates, optional
        Keep only the part of each subspace living in this region.  On a
        ring a domain wall comes with a partner wall; the region isolates one.
    tol : float
        Invariance tolerance; a larger leak raises :class:`SymmetryBroken`.
    """
    mask = _site_mask(spectrum.geometry, region)
    v0 = spectrum.vectors[:, spectrum.select(0.0, window)]
    vpi = spectrum.vectors[:, spectrum.select(np.pi, window)]
    q0 = _charges(v0, frame, mask, tol)
    qpi = _charges(vpi, frame, mask, tol)
    return BoundStateCharges(int(sum(q0)), int(sum(qpi)), q0, qpi)


__all__ = [
    "BoundStateCharges", "ChiralFrame", "GaplessClass", "PhaseDiagramCell",
    "band_eigenvectors", "bound_state_charges", "chern_number_berry_plaquette",
    "chern_number_solid_angle", "chern_plaquette_value", "chern_solid_angle_value",
    "chiral_frame", "critical_distance_1d", "frame_for", "gapless_lines_sixop", "lift", "min_gap",
    "on_critical_line_1d", "phase_diagram_1d", "phase_diagram_2d", "sixop_line_distance",
    "verify_chiral_symmetry", "winding_closed_form", "winding_number",
]
