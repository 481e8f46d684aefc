"""Band structures, finite-system spectra, and strip spectra.

Bloch unitaries follow the convention of :func:`momentum_step_matrix`
(a spin displaced by ``d`` picks up ``exp(i k.d)``) and are written as
``U(k) = cos E - i sin E n.sigma`` with ``E`` in ``[0, pi]``.

Strip spectra are different: there the mixed representation uses plane waves
``exp(i kx x)``, so the slope ``dE/dkx`` of a branch is its physical velocity
along +x.  The two conventions differ by ``kx -> -kx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, GaplessPoint, NonUnitary, NumericalFailure, SizeCapExceeded
from .lattice import Geometry, Line, SpinorState, Torus2D, _rotate, rule_displacements, site_angles
from .protocols import (
    ProtocolFamily,
    Rotate,
    TwoDSimple,
    TwoDSixOp,
    WalkProtocol,
    ZRotate,
    family_steps,
    is_2d,
    momentum_step_matrix,
    unitarity_error,
)

TOL_GAPLESS = 1e-9
RESIDUAL_TOL = 1e-8

SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


# ---------------------------------------------------------------------------
# Bloch bands


def _finish(E: np.ndarray, n: np.ndarray, strict: bool, what: str):
    gapless = np.abs(np.sin(E)) < TOL_GAPLESS
    if np.any(gapless):
        if strict:
            raise GaplessPoint(f"{what}: gap closes (|sin E| < {TOL_GAPLESS:g})")
        n = np.where(gapless[..., None], np.nan, n)
    if np.ndim(E) == 0:
        return float(E), n.reshape(3)
    return E, n


def _polar(cos_e: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``E`` and unit ``n`` from ``cos E`` and the unnormalized ``sin E n``.

    Using ``arctan2`` keeps full precision near the band edges at 0 and pi,
    where ``arccos`` alone would lose half the digits.
    """
    se = np.linalg.norm(v, axis=-1)
    return np.arctan2(se, cos_e), _safe_div(v, se[..., None])


def _safe_div(num: np.ndarray, sin_e: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / sin_e


def band_conventional(theta: float, k, strict: bool = True):
    """Quasi-energy and Bloch vector of ``U = T R_y(theta)``.

    ``cos E = cos(theta/2) cos k`` and
    ``n = (sin(theta/2) sin k, sin(theta/2) cos k, -cos(theta/2) sin k) / sin E``.

    With ``strict`` a gapless sample raises :class:`GaplessPoint`; otherwise
    its Bloch vector is reported as NaN.
    """
    k = np.asarray(k, dtype=float)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    v = np.stack([s * np.sin(k), s * np.cos(k), -c * np.sin(k)], axis=-1)
    E, n = _polar(c * np.cos(k), v)
    return _finish(E, n, strict, "conventional band")


def band_splitstep(theta1: float, theta2: float, k, strict: bool = True):
    """Split-step band: ``cos E = c2 c1 cos k - s1 s2`` with the matching Bloch vector."""
    k = np.asarray(k, dtype=float)
    c1, s1 = np.cos(0.5 * theta1), np.sin(0.5 * theta1)
    c2, s2 = np.cos(0.5 * theta2), np.sin(0.5 * theta2)
    v = np.stack([c2 * s1 * np.sin(k) + 0 * k,
                  s2 * c1 + c2 * s1 * np.cos(k),
                  -c2 * c1 * np.sin(k)], axis=-1)
    E, n = _polar(c2 * c1 * np.cos(k) - s1 * s2, v)
    return _finish(E, n, strict, "split-step band")


def sixop_cos_energy(theta1: float, theta2: float, kx, ky) -> np.ndarray:
    kx, ky = np.asarray(kx, dtype=float), np.asarray(ky, dtype=float)
    c2 = np.cos(0.5 * theta2)
    return (np.cos(kx) * np.cos(kx + 2 * ky) * np.cos(theta1) * c2
            - np.sin(kx) * np.sin(kx + 2 * ky) * c2
            - np.cos(kx) ** 2 * np.sin(theta1) * np.sin(0.5 * theta2))


def simple_cos_energy(theta1: float, theta2: float, kx, ky) -> np.ndarray:
    kx, ky = np.asarray(kx, dtype=float), np.asarray(ky, dtype=float)
    return (np.cos(kx + ky) * np.cos(0.5 * theta1) * np.cos(0.5 * theta2)
            - np.cos(kx - ky) * np.sin(0.5 * theta1) * np.sin(0.5 * theta2))


def _sin_e_n(u: np.ndarray) -> np.ndarray:
    tr = np.einsum("...ij,aji->...a", u, SIGMA)
    return (1j * tr).real / 2.0


def bloch_vector(u: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Read ``n`` off ``U = cos E - i sin E n.sigma`` (unit determinant assumed)."""
    return _safe_div(_sin_e_n(u), np.sin(E)[..., None])


def band_from_unitary(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upper-band ``E`` in ``[0, pi]`` and unit ``n`` of unit-determinant Bloch matrices."""
    return _polar(0.5 * np.trace(u, axis1=-2, axis2=-1).real, _sin_e_n(u))


def band_2d_sixop(theta1: float, theta2: float, kx, ky, strict: bool = True):
    u = momentum_step_matrix(TwoDSixOp(theta1, theta2), (kx, ky))
    E, n = _polar(sixop_cos_energy(theta1, theta2, kx, ky), _sin_e_n(u))
    return _finish(E, n, strict, "six-operation band")


def band_2d_simple(theta1: float, theta2: float, kx, ky, strict: bool = True):
    u = momentum_step_matrix(TwoDSimple(theta1, theta2), (kx, ky))
    E, n = _polar(simple_cos_energy(theta1, theta2, kx, ky), _sin_e_n(u))
    return _finish(E, n, strict, "simple 2D band")


def brillouin_zone(family: ProtocolFamily) -> tuple[float, float]:
    """Interval of each momentum component; the six-op walk has a halved zone."""
    if isinstance(family, TwoDSixOp):
        return (-0.5 * np.pi, 0.5 * np.pi)
    return (-np.pi, np.pi)


def k_grid(family: ProtocolFamily, n: int | None = None):
    """Uniform grid over the zone with the endpoint excluded (1D array or 2D meshes)."""
    lo, hi = brillouin_zone(family)
    if is_2d(family):
        n = 256 if n is None else int(n)
        k = lo + (hi - lo) * np.arange(n) / n
        return tuple(np.meshgrid(k, k, indexing="ij"))
    n = 1024 if n is None else int(n)
    return lo + (hi - lo) * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class BlochBand:
    """Upper band ``E(k)`` in ``[0, pi]`` and unit Bloch vectors on a k grid."""

    family: ProtocolFamily
    k: np.ndarray | tuple[np.ndarray, np.ndarray] = field(repr=False)
    energy: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)

    @property
    def gapless(self) -> np.ndarray:
        return np.abs(np.sin(self.energy)) < TOL_GAPLESS

    @property
    def gapped_at_0(self) -> bool:
        return bool(np.min(self.energy) >= TOL_GAPLESS)

    @property
    def gapped_at_pi(self) -> bool:
        return bool(np.min(np.pi - self.energy) >= TOL_GAPLESS)

    @property
    def is_2d(self) -> bool:
        return isinstance(self.k, tuple)

    @property
    def spacing(self) -> float:
        k0 = self.k[0] if self.is_2d else self.k
        return float(np.ravel(np.diff(k0, axis=0))[0])


def bloch_band(family: ProtocolFamily, k=None, n_k: int | None = None) -> BlochBand:
    """Evaluate the band of a translation-invariant family on a grid.

    Energies come from the trace of the Bloch unitary, so the same code path
    serves every family; the closed forms above are independent checks.
    """
    if k is None:
        k = k_grid(family, n_k)
    u = momentum_step_matrix(family, k)
    det = np.linalg.det(u)
    if np.max(np.abs(det - 1.0)) > 1e-10:
        raise ConfigError("band extraction assumes a unit-determinant Bloch unitary")
    E, n = band_from_unitary(u)
    gapless = np.abs(np.sin(E)) < TOL_GAPLESS
    n = np.where(gapless[..., None], np.nan, n)
    return BlochBand(family, k, E, n)


def group_velocity(band: BlochBand) -> np.ndarray:
    """``dE/dk`` of the upper band by periodic central differences.

    1D bands return an array shaped like ``k``; 2D bands append a component
    axis ``(d/dkx, d/dky)``.
    """
    h = band.spacing
    E = band.energy
    if not band.is_2d:
        return (np.roll(E, -1) - np.roll(E, 1)) / (2 * h)
    gx = (np.roll(E, -1, axis=0) - np.roll(E, 1, axis=0)) / (2 * h)
    gy = (np.roll(E, -1, axis=1) - np.roll(E, 1, axis=1)) / (2 * h)
    return np.stack([gx, gy], axis=-1)


def velocity_conventional(theta: float, k) -> np.ndarray:
    """Closed-form ``dE/dk = cos(theta/2) sin k / sin E`` of the conventional walk."""
    k = np.asarray(k, dtype=float)
    E, _ = band_conventional(theta, k, strict=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.cos(0.5 * theta) * np.sin(k) / np.sin(E)


# ---------------------------------------------------------------------------
# finite systems


def quasi_energies(eigenvalues: np.ndarray) -> np.ndarray:
    """``E = -arg(lambda)`` mapped into ``(-pi, pi]``."""
    E = -np.angle(eigenvalues)
    return np.where(E <= -np.pi, E + 2 * np.pi, E)


def distance_to(E: np.ndarray, target: float) -> np.ndarray:
    """Distance on the quasi-energy circle."""
    d = np.mod(np.asarray(E) - target + np.pi, 2 * np.pi) - np.pi
    return np.abs(d)


def _unitary_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # complex Schur form of a normal matrix is diagonal, and the Schur vectors
    # stay orthonormal inside degenerate eigenspaces
    t, z = scipy.linalg.schur(u, output="complex")
    return np.diag(t).copy(), z


@dataclass(frozen=True, eq=False)
class QuasiEnergySpectrum:
    """Sorted eigenphases with orthonormal eigenvectors as columns."""

    geometry: Geometry
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.energies)

    def state(self, i: int) -> SpinorState:
        return SpinorState.from_vector(self.geometry, self.vectors[:, i], normalize=True)

    def site_probabilities(self) -> np.ndarray:
        """``(n_states,) + geometry.shape`` probabilities."""
        p = np.abs(self.vectors) ** 2
        p = p.reshape(self.geometry.shape + (2, -1)).sum(axis=self.geometry.ndim)
        return np.moveaxis(p, -1, 0)

    def participation_ratio(self) -> np.ndarray:
        p = self.site_probabilities().reshape(len(self), -1)
        return 1.0 / np.sum(p ** 2, axis=1)

    def position_expectation(self) -> np.ndarray:
        p = self.site_probabilities()
        if isinstance(self.geometry, Line):
            return p @ self.geometry.coords()
        x, y = self.geometry.coords()
        return np.stack([np.tensordot(p, x, 2), np.tensordot(p, y, 2)], axis=-1)

    def mean_abs_y(self) -> np.ndarray:
        if not isinstance(self.geometry, Torus2D):
            raise ConfigError("mean |y| is defined for 2D geometries only")
        _, y = self.geometry.coords()
        return np.tensordot(self.site_probabilities(), np.abs(y), 2)

    def select(self, target: float, window: float) -> np.ndarray:
        """Indices of eigenphases within ``window`` of ``target`` on the circle."""
        return np.flatnonzero(distance_to(self.energies, target) < window)


def diagonalize(u: np.ndarray, geometry: Geometry | None = None) -> QuasiEnergySpectrum:
    """Eigendecomposition of a dense unitary; residuals are checked per pair."""
    u = np.asarray(u, dtype=complex)
    err = unitarity_error(u)
    if err > RESIDUAL_TOL:
        raise NonUnitary(f"input deviates from unitarity by {err:.3e}")
    lam, vecs = _unitary_eig(u)
    resid = np.linalg.norm(u @ vecs - vecs * lam[None, :], axis=0)
    if np.max(resid) > RESIDUAL_TOL:
        raise NonUnitary(f"eigen-residual {np.max(resid):.3e} exceeds {RESIDUAL_TOL:g}")
    E = quasi_energies(lam)
    order = np.argsort(E, kind="stable")
    if geometry is None:
        geometry = Line(u.shape[0] // 2)
    return QuasiEnergySpectrum(geometry, E[order], vecs[:, order])


# ---------------------------------------------------------------------------
# strips: plane wave along x, real space along y


def _y_line(family_or_protocol, ly: int) -> Line:
    return Line(ly, ly // 2)


def strip_steps(family: ProtocolFamily | WalkProtocol):
    steps = family.steps if isinstance(family, WalkProtocol) else family_steps(family)
    return tuple(steps)


def strip_unitary(family: ProtocolFamily | WalkProtocol, kx: float, ly: int) -> np.ndarray:
    """``2 ly`` square unitary of the strip at momentum ``kx`` (periodic in y)."""
    steps = strip_steps(family)
    yline = _y_line(family, ly)
    dim = 2 * ly
    arr = np.eye(dim, dtype=complex).reshape(ly, 2, dim)
    for st in steps:
        if isinstance(st, Rotate):
            arr = _rotate(arr, site_angles(st.profile, yline))
        elif isinstance(st, ZRotate):
            arr = arr.copy()
            arr[:, 0] *= np.exp(-0.5j * st.angle)
            arr[:, 1] *= np.exp(0.5j * st.angle)
        else:
            d_up, d_dn = rule_displacements(st.rule, 2)
            up = np.roll(arr[:, 0], d_up[1], axis=0) * np.exp(-1j * kx * d_up[0])
            dn = np.roll(arr[:, 1], d_dn[1], axis=0) * np.exp(-1j * kx * d_dn[0])
            arr = np.stack([up, dn], axis=1)
    return arr.reshape(dim, dim)


def profile_boundaries(family: ProtocolFamily | WalkProtocol, ly: int, tol: float = 1e-12) -> np.ndarray:
    """Half-integer y positions where any rotation angle changes (cyclically)."""
    yline = _y_line(family, ly)
    y = yline.coords()
    jumps = np.zeros(ly, dtype=bool)
    for st in strip_steps(family):
        if isinstance(st, Rotate):
            th = site_angles(st.profile, yline)
            jumps |= np.abs(th - np.roll(th, 1)) > tol
    return y[jumps] - 0.5


def cyclic_distance(y: np.ndarray, b: float, ly: int) -> np.ndarray:
    d = np.mod(y - b, ly)
    return np.minimum(d, ly - d)


@dataclass(frozen=True, eq=False)
class StripSpectrum:
    """Eigenphases per ``kx`` with localization data for edge tagging."""

    kx: np.ndarray
    energies: np.ndarray          # (n_k, n_states)
    mean_y: np.ndarray
    nearest_boundary: np.ndarray  # index into ``boundaries`` (-1 without boundaries)
    boundary_distance: np.ndarray # <distance to nearest boundary>
    participation: np.ndarray
    edge: np.ndarray              # bool tags
    boundaries: np.ndarray
    ly: int
    y: np.ndarray                 # y coordinates of the diagonalized sites
    vectors: np.ndarray | None = field(default=None, repr=False)


def y_sector(family: ProtocolFamily | WalkProtocol, ly: int, parity: int) -> np.ndarray:
    """Basis indices of the strip sites with ``y`` of the given parity.

    Raises when the walk mixes the two parities, since the sector is then not
    invariant.
    """
    y = _y_line(family, ly).coords()
    sites = np.flatnonzero(np.mod(y, 2) == parity % 2)
    idx = np.stack([2 * sites, 2 * sites + 1], axis=1).ravel()
    u = strip_unitary(family, 0.3, ly)
    other = np.setdiff1d(np.arange(2 * ly), idx)
    if ly % 2 or np.max(np.abs(u[np.ix_(other, idx)]), initial=0.0) > 1e-12:
        raise ConfigError("this walk does not conserve y parity on the strip")
    return idx


def strip_spectrum(family: ProtocolFamily | WalkProtocol, kx: Sequence[float], ly: int,
                   pr_fraction: float = 0.2, distance_cutoff: float = 5.0,
                   workers: int = 1, cap: int = 20_000, y_parity: int | None = None,
                   keep_vectors: bool = False) -> StripSpectrum:
    """Diagonalize the strip at every ``kx`` and tag boundary-localized states.

    A state is an edge state when its participation ratio is below
    ``pr_fraction`` times the number of diagonalized sites, or its mean
    distance to the nearest angle boundary is below ``distance_cutoff``
    sites.  Without any boundary nothing is tagged.

    ``y_parity`` restricts the problem to one of the two decoupled y
    sublattices of walks whose steps always move y by an even amount (the
    six-operation walk); this removes the trivial twofold copy of every level.
    """
    if 2 * ly > cap:
        raise SizeCapExceeded(f"strip of {2 * ly} states exceeds cap {cap}")
    kx = np.asarray(kx, dtype=float)
    y_all = _y_line(family, ly).coords().astype(float)
    idx = np.arange(2 * ly) if y_parity is None else y_sector(family, ly, y_parity)
    y = y_all[idx[::2] // 2]
    n_sites = len(y)
    bnds = profile_boundaries(family, ly)

    def one(k: float):
        u = strip_unitary(family, k, ly)[np.ix_(idx, idx)]
        lam, vecs = _unitary_eig(u)
        E = quasi_energies(lam)
        order = np.argsort(E, kind="stable")
        E, vecs = E[order], vecs[:, order]
        p = (np.abs(vecs) ** 2).reshape(n_sites, 2, -1).sum(axis=1)
        pr = 1.0 / np.sum(p ** 2, axis=0)
        if len(bnds):
            dist = np.stack([cyclic_distance(y, b, ly) @ p for b in bnds])
            near = np.argmin(dist, axis=0)
            bdist = dist[near, np.arange(dist.shape[1])]
            edge = (pr < pr_fraction * n_sites) | (bdist < distance_cutoff)
        else:
            near = np.full(len(E), -1)
            bdist = np.full(len(E), np.inf)
            edge = np.zeros(len(E), dtype=bool)
        return E, y @ p, near, bdist, pr, edge, (vecs if keep_vectors else None)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, kx))
    else:
        rows = [one(k) for k in kx]
    cols = list(zip(*rows))
    arrs = [np.array(c) for c in cols[:6]]
    vecs = np.array(cols[6]) if keep_vectors else None
    return StripSpectrum(kx, *arrs, bnds, int(ly), y, vecs)


def strip_k_grid(family: ProtocolFamily, n: int = 101) -> np.ndarray:
    """``n`` momenta covering the family's zone, endpoint excluded."""
    lo, hi = brillouin_zone(family)
    return lo + (hi - lo) * np.arange(n) / n


# ---------------------------------------------------------------------------
# edge branches


def bulk_gaps(families: Sequence[ProtocolFamily], n_k: int = 256) -> tuple[float, float]:
    """Largest half-widths ``(g0, gpi)`` free of bulk states of every family."""
    g0, gpi = np.pi, np.pi
    for fam in families:
        E = bloch_band(fam, n_k=n_k).energy
        g0 = min(g0, float(E.min()))
        gpi = min(gpi, float(np.pi - E.max()))
    return g0, gpi


def in_gap(E: np.ndarray, g0: float, gpi: float, margin: float = 0.0) -> np.ndarray:
    a = np.abs(E)
    return (a < g0 - margin) | (a > np.pi - gpi + margin)


@dataclass(frozen=True)
class EdgeBranch:
    boundary: int
    gap: str          # "0" or "pi"
    kx: np.ndarray
    energy: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        dE = np.mod(np.diff(self.energy) + np.pi, 2 * np.pi) - np.pi
        return dE / np.diff(self.kx)


def edge_branches(strip: StripSpectrum, g0: float, gpi: float, margin: float = 0.0) -> list[EdgeBranch]:
    """Runs of consecutive ``kx`` carrying an in-gap edge state on one boundary.

    Within one gap a boundary may host at most one such state per ``kx``;
    otherwise the run is ambiguous and an error is raised.  Runs wrap
    cyclically around the momentum grid.
    """
    out: list[EdgeBranch] = []
    nk = len(strip.kx)
    period = nk * (strip.kx[1] - strip.kx[0])
    for b in range(len(strip.boundaries)):
        for gap, sel in (("0", lambda e: np.abs(e) < g0 - margin),
                         ("pi", lambda e: np.abs(e) > np.pi - gpi + margin)):
            pick = np.full(nk, np.nan)
            for i in range(nk):
                m = strip.edge[i] & (strip.nearest_boundary[i] == b) & sel(strip.energies[i])
                if m.sum() > 1:
                    raise NumericalFailure(f"boundary {b} has {m.sum()} in-gap states at kx={strip.kx[i]:.4f}")
                if m.any():
                    pick[i] = strip.energies[i][m][0]
            present = ~np.isnan(pick)
            if not present.any():
                continue
            if present.all():
                starts = [0]
            else:
                starts = [i for i in range(nk) if present[i] and not present[i - 1]]
            for s0 in starts:
                ks, es = [], []
                i = s0
                while present[i % nk] and len(ks) < nk:
                    j = i % nk
                    ks.append(strip.kx[j] + period * (i // nk))
                    es.append(pick[j])
                    i += 1
                out.append(EdgeBranch(b, gap, np.array(ks), np.array(es)))
    return out


@dataclass(frozen=True)
class EdgeCurve:
    """Closed edge curve built by chaining in-gap runs of one boundary.

    ``winding`` counts net traversals of the quasi-energy circle and ``loops``
    the number of passes through the momentum zone needed to close the curve.
    """

    boundary: int
    runs: tuple[int, ...]
    winding: int
    loops: int

    @property
    def winding_per_loop(self) -> float:
        return self.winding / self.loops


def chain_edge_branches(branches: Sequence[EdgeBranch], period: float) -> list[EdgeCurve]:
    """Join in-gap runs of each boundary across the bulk bands into closed curves.

    A run that leaves a gap moving up (down) in energy continues as the next
    run of the same boundary, in increasing ``kx``, that lies in the other gap
    and moves in the same direction.  Runs whose slopes change sign cannot be
    continued this way and raise :class:`NumericalFailure`.
    """
    info = []
    for br in branches:
        sl = br.slopes
        sign = int(np.sign(sl[0])) if len(sl) else 0
        if len(sl) == 0 or np.any(np.sign(sl) != sign) or sign == 0:
            raise NumericalFailure(f"run on boundary {br.boundary} is not monotone")
        info.append(sign)
    used = [False] * len(branches)
    curves: list[EdgeCurve] = []
    for i0 in range(len(branches)):
        if used[i0]:
            continue
        b, sign = branches[i0].boundary, info[i0]
        chain, cur, total_e, total_k = [], i0, 0.0, 0.0
        for _ in range(len(branches) + 1):
            used[cur] = True
            chain.append(cur)
            br = branches[cur]
            total_e += float(np.sum(np.mod(np.diff(br.energy) + np.pi, 2 * np.pi) - np.pi))
            total_k += br.kx[-1] - br.kx[0]
            cands = [j for j, o in enumerate(branches)
                     if o.boundary == b and o.gap != br.gap and info[j] == sign]
            if not cands:
                raise NumericalFailure(f"run on boundary {b} has no continuation")
            gaps_k = [np.mod(branches[j].kx[0] - br.kx[-1], period) for j in cands]
            nxt = cands[int(np.argmin(gaps_k))]
            total_k += min(gaps_k)
            step = np.mod(sign * (branches[nxt].energy[0] - br.energy[-1]), 2 * np.pi)
            total_e += sign * step
            cur = nxt
            if cur == i0:
                break
        else:
            raise NumericalFailure("edge runs do not close into a curve")
        curves.append(EdgeCurve(b, tuple(chain), int(round(total_e / (2 * np.pi))),
                                int(round(total_k / period))))
    return curves
