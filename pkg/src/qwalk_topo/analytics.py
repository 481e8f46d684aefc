"""Closed-form results: long-time position distributions and exact bound states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigError, NoBoundState
from .lattice import Line, Open, Piecewise, SpinorState, localized_state
from .protocols import (
    ProtocolFamily,
    Reflecting1D,
    SplitStep1D,
    WalkProtocol,
    build_protocol,
    evolve,
    is_2d,
    momentum_step_matrix,
)
from .spectral import SIGMA, band_from_unitary

N_K_ASYMPTOTIC = 2 ** 20


# ---------------------------------------------------------------------------
# asymptotic distribution


def _spin(spin: Sequence[complex]) -> np.ndarray:
    s = np.asarray(spin, dtype=complex).reshape(2)
    nrm = np.linalg.norm(s)
    if nrm == 0:
        raise ConfigError("initial spin has zero norm")
    return s / nrm


def band_velocities(family: ProtocolFamily, spin: Sequence[complex], n_k: int = N_K_ASYMPTOTIC):
    """Velocities and weights of both bands for a walker started at one site.

    Returns ``(v, w)`` with shape ``(2, n_k)``: row 0 is the upper band
    ``E(k)``, row 1 the lower band ``-E(k)``.  Velocities are physical
    (``x`` increases when spin up moves); with Bloch matrices built from
    ``exp(+i k d)`` this means ``v = -dE/dk`` for the upper band.  Weights are
    ``(1 +- <s|n.sigma|s>) / (2 n_k)`` so they sum to one.
    """
    if is_2d(family):
        raise ConfigError("asymptotic distributions are implemented for 1D walks")
    s = _spin(spin)
    k = -np.pi + 2 * np.pi * np.arange(n_k) / n_k
    u = momentum_step_matrix(family, k)
    if np.max(np.abs(np.linalg.det(u) - 1.0)) > 1e-10:
        raise ConfigError("velocity extraction assumes a unit-determinant Bloch unitary")
    e_up, n = band_from_unitary(u)
    spin_n = np.einsum("i,aij,j->a", s.conj(), SIGMA, s).real
    # at gapless samples both bands are degenerate and share the weight equally
    w_up = 0.5 * (1.0 + np.nan_to_num(n @ spin_n, nan=0.0))
    h = 2 * np.pi / n_k

    def d(f):
        # periodic five-point derivative
        return (-np.roll(f, -2) + 8 * np.roll(f, -1) - 8 * np.roll(f, 1) + np.roll(f, 2)) / (12 * h)

    # cos E is smooth even where E(k) has a kink at a band touching
    sin_e = np.sin(e_up)
    touching = sin_e < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        dE = np.where(touching, d(e_up), -d(np.cos(e_up)) / sin_e)
    v = np.stack([-dE, dE])
    w = np.stack([w_up, 1.0 - w_up]) / n_k
    return v, w


@dataclass(frozen=True, eq=False)
class AsymptoticDistribution:
    """Density of the rescaled position ``X = x / N`` as ``N`` grows."""

    X: np.ndarray
    density: np.ndarray
    spin: np.ndarray
    family: ProtocolFamily
    velocities: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def total(self) -> float:
        return float(trapezoid(self.density, self.X))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """Exact CDF of the velocity measure evaluated at ``x``."""
        v, w = self.velocities.ravel(), self.weights.ravel()
        order = np.argsort(v, kind="stable")
        cum = np.cumsum(w[order])
        pos = np.searchsorted(v[order], np.asarray(x, dtype=float), side="right")
        return np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)

    def characteristic(self, s: float) -> complex:
        """``<exp(-i s X)>`` under the limiting distribution."""
        return complex(np.sum(self.weights * np.exp(-1j * s * self.velocities)))


def asymptotic_distribution(family: ProtocolFamily, spin: Sequence[complex],
                            X: np.ndarray | None = None, n_k: int = N_K_ASYMPTOTIC) -> AsymptoticDistribution:
    """Bin ``(1 +- <n.sigma>) / 2`` weighted velocities onto an X grid.

    Each grid point is the center of a bin one grid spacing wide; every
    momentum sample drops its weight into the bin containing its velocity.
    """
    if X is None:
        X = np.linspace(-1.0, 1.0, 401)
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or len(X) < 2 or np.any(np.diff(X) <= 0):
        raise ConfigError("X grid must be strictly increasing")
    v, w = band_velocities(family, spin, n_k)
    edges = np.concatenate([[X[0] - 0.5 * (X[1] - X[0])], 0.5 * (X[1:] + X[:-1]),
                            [X[-1] + 0.5 * (X[-1] - X[-2])]])
    hist, _ = np.histogram(v.ravel(), bins=edges, weights=w.ravel())
    return AsymptoticDistribution(X, hist / np.diff(edges), _spin(spin), family, v, w)


def closed_form_theta_half(X) -> np.ndarray:
    """``(1/pi) / ((1 + X) sqrt(1 - X^2))`` on ``|X| < 1/sqrt(2)``.

    Returns ``+inf`` at ``|X| = 1/sqrt(2)`` and 0 outside the support.
    """
    X = np.asarray(X, dtype=float)
    edge = 1.0 / np.sqrt(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 / (np.pi * (1.0 + X) * np.sqrt(1.0 - X ** 2))
    out = np.where(np.abs(X) < edge, out, 0.0)
    out = np.where(np.isclose(np.abs(X), edge, rtol=0, atol=1e-12), np.inf, out)
    return out if out.ndim else float(out)


def density_theta_half(X) -> np.ndarray:
    """Limiting density for ``theta = pi/2`` and spin up, derived from the velocity measure.

    ``1 / (pi (1 - X) sqrt(1 - 2 X^2))`` on ``|X| < 1/sqrt(2)``; spin up
    moves toward ``+x`` so the mass leans to positive ``X``.
    """
    X = np.asarray(X, dtype=float)
    edge = 1.0 / np.sqrt(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 / (np.pi * (1.0 - X) * np.sqrt(1.0 - 2.0 * X ** 2))
    out = np.where(np.abs(X) < edge, out, 0.0)
    out = np.where(np.isclose(np.abs(X), edge, rtol=0, atol=1e-12), np.inf, out)
    return out if out.ndim else float(out)


def empirical_positions(family: ProtocolFamily, spin: Sequence[complex], n_steps: int):
    """Exact position distribution after ``n_steps`` from the origin.

    Returns ``(x, p)`` on a line of ``2 n_steps + 1`` sites.
    """
    g = Line.centered(n_steps)
    state = localized_state(g, 0, _spin(spin))
    out = evolve(state, build_protocol(family, g), n_steps)
    return g.coords(), np.sum(np.abs(out.amplitudes) ** 2, axis=1)


def empirical_characteristic(family: ProtocolFamily, spin: Sequence[complex], n_steps: int,
                             s: Sequence[float]) -> np.ndarray:
    """``<exp(-i s x / N)>`` of the exact distribution after ``N`` steps."""
    x, p = empirical_positions(family, spin, n_steps)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.exp(-1j * np.outer(s, x) / n_steps) @ p


def ks_distance(dist: AsymptoticDistribution, n_steps: int) -> float:
    """Sup distance between the limiting CDF and the exact CDF of ``x / N``."""
    x, p = empirical_positions(dist.family, dist.spin, n_steps)
    X = x / n_steps
    emp = np.cumsum(p)
    ana_right = dist.cdf(X)
    ana_left = dist.cdf(X - 1e-12)
    emp_left = np.concatenate([[0.0], emp[:-1]])
    return float(max(np.max(np.abs(emp - ana_right)), np.max(np.abs(emp_left - ana_left))))


# ---------------------------------------------------------------------------
# reflecting boundary


@dataclass(frozen=True, eq=False)
class ReflectingBoundState:
    """Exact edge state of the reflecting walk on ``x <= 0``.

    The amplitude at site ``x = -j`` is ``edge_spinor * zeta**j`` where
    ``zeta`` is the eigenvalue of the transfer matrix ``K`` with
    ``|zeta| < 1``.
    """

    energy: float
    phi: float
    theta: float
    edge_spinor: np.ndarray
    zeta: complex
    decay_length: float
    transfer: np.ndarray = field(repr=False)
    transfer_eigenvalues: tuple[complex, complex] = ()
    transfer_vectors: np.ndarray = field(default=None, repr=False)

    def amplitudes(self, length: int) -> np.ndarray:
        """Normalized ``(length, 2)`` amplitudes on ``Line.ending_at_zero(length)``."""
        j = np.arange(length)[::-1]
        arr = (self.zeta ** j)[:, None] * self.edge_spinor[None, :]
        return arr / np.linalg.norm(arr)

    def state(self, length: int) -> SpinorState:
        return SpinorState(Line.ending_at_zero(length), self.amplitudes(length))


def transfer_matrix(theta: float, energy: float) -> np.ndarray:
    """``K`` mapping ``(a, b)`` at site ``-j`` to site ``-j-1`` for eigenphase ``energy``."""
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    if abs(c) < 1e-15:
        raise ConfigError("transfer matrix is singular at cos(theta/2) = 0")
    lam = np.exp(-1j * energy)
    return np.array([[(lam + s * s / lam) / c, s / lam], [s / lam, c / lam]], dtype=complex)


def bound_state_energy(theta: float, phi: float) -> float:
    """Quasi-energy of the reflecting-edge state: 0 or pi by the sign of ``e^{i phi} sin(theta/2)``."""
    s = np.sin(0.5 * theta)
    sign = np.cos(phi) * np.sign(s)
    return float(np.pi) if sign > 0 else 0.0


def reflecting_bound_state(theta: float, phi: float) -> ReflectingBoundState:
    """Solve the reflecting walk's edge state in closed form.

    Raises
    ------
    ConfigError
        ``phi`` is not 0 or pi modulo ``2 pi`` (no chiral symmetry).
    NoBoundState
        ``theta`` is a multiple of ``2 pi``: the state delocalizes.
    """
    ph = np.mod(phi, 2 * np.pi)
    if min(ph, 2 * np.pi - ph) > 1e-12 and abs(ph - np.pi) > 1e-12:
        raise ConfigError("the bound-state solution requires phi = 0 or pi")
    c = np.cos(0.5 * theta)
    if 1.0 - c * c < 1e-14:
        raise NoBoundState("theta is a multiple of 2 pi; the decay length diverges")
    E = bound_state_energy(theta, ph)
    cosE = np.cos(E)
    disc = cosE * cosE - c * c
    if disc < 0:
        raise NoBoundState("no normalizable solution")
    eph = np.exp(1j * ph)
    if abs(c) < 1e-15:
        # theta = pi (mod 2 pi): the state sits entirely on the edge site
        spinor = np.array([0.0, 1.0], dtype=complex)
        return ReflectingBoundState(E, float(phi), float(theta), spinor, 0.0, 0.0,
                                    np.full((2, 2), np.nan), (0.0, np.inf), None)
    roots = ((cosE + np.sqrt(disc)) / c, (cosE - np.sqrt(disc)) / c)
    zeta = min(roots, key=abs)
    K = transfer_matrix(theta, E)
    evals, evecs = np.linalg.eig(K)
    order = np.argsort(np.abs(evals))[::-1]
    evals, evecs = evals[order], evecs[:, order]
    spinor = np.array([1.0, eph / zeta], dtype=complex)
    spinor /= np.linalg.norm(spinor)
    return ReflectingBoundState(
        energy=E, phi=float(phi), theta=float(theta), edge_spinor=spinor, zeta=complex(zeta),
        decay_length=float(1.0 / abs(np.log(abs(zeta)))), transfer=K,
        transfer_eigenvalues=(complex(evals[0]), complex(evals[1])), transfer_vectors=evecs,
    )


def decay_length_formula(theta: float) -> float:
    """``1 / |log(1 - |sin(theta/2)|) - log|cos(theta/2)||``."""
    s, c = abs(np.sin(0.5 * theta)), abs(np.cos(0.5 * theta))
    return float(1.0 / abs(np.log(1.0 - s) - np.log(c)))


def reflecting_chain(theta: float, phi: float, length: int) -> WalkProtocol:
    return build_protocol(Reflecting1D(theta, phi), Line.ending_at_zero(length))


# ---------------------------------------------------------------------------
# coexisting 0 and pi states


def zero_pi_protocol(length: int = 40) -> WalkProtocol:
    """Walk ``T_down R(theta2) T_up`` with ``theta2 = -pi`` on ``x <= 0`` and ``+pi`` on ``x > 0``.

    The chain is a window of the infinite lattice (open ends), which stays
    unitary because the end sites carry exact spin flips.  Its sites run
    from ``-(length//2 - 1)`` to ``length//2``.
    """
    if length < 4 or length % 2:
        raise ConfigError("length must be an even number >= 4")
    g = Line(length, offset=length // 2 - 1)
    fam = SplitStep1D(0.0, Piecewise(1, -np.pi, np.pi), boundary=Open())
    return build_protocol(fam, g, "zero-pi pair")


def zero_pi_pair_analytic(length: int = 40) -> tuple[SpinorState, SpinorState]:
    """``(|0> (up + down)/sqrt2, |0> (up - down)/sqrt2)``: the E = 0 and E = pi eigenstates."""
    g = zero_pi_protocol(length).geometry
    r = 1 / np.sqrt(2.0)
    return localized_state(g, 0, (r, r)), localized_state(g, 0, (r, -r))


__all__ = [
    "AsymptoticDistribution", "ReflectingBoundState", "asymptotic_distribution", "band_velocities",
    "bound_state_energy", "closed_form_theta_half", "decay_length_formula", "density_theta_half",
    "empirical_characteristic", "empirical_positions", "ks_distance", "reflecting_bound_state",
    "reflecting_chain", "transfer_matrix", "zero_pi_pair_analytic", "zero_pi_protocol",
]
