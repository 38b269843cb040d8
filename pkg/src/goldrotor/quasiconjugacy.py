"""The map Lambda from quantum states to the classical cylinder.

Lambda(psi) = (theta(psi), P(psi)) where theta is the median angle of |psi|^2
measured from 0 and P the one-sided median momentum index.  Momenta are
integer mode indices throughout (hbar is carried as metadata by callers),
so the classical side is run with kick K / hbar in index units.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .classical import TWO_PI, ClassicalState, ModelParams, h_tilde_prime_n
from .quantum import (
    KickMultiplier,
    QuantumState,
    _check_grid,
    evolve,
    kick_strength,
    multiplier_for,
    synthesize,
    u_observable,
)

INNER_BAND = 20
OUTER_BAND = 200
MASS_LEVEL = 0.9
TIE_TOL = 1e-12
DEFAULT_STEP_CAP = 40_000


class Region(enum.Enum):
    QUANTUM = "Quantum"
    SEMICLASSICAL = "SemiClassical"
    CLASSICAL = "Classical"

    def __str__(self) -> str:
        return self.value


class ConfigurationWarning(UserWarning):
    pass


def cumulative_density(s: QuantumState, grid: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Grid angles theta_j and the exact normalised int_0^theta_j |psi|^2.

    |psi|^2 has bandwidth 2M, which the grid (>= 8M) resolves exactly, so the
    running integral follows from its Fourier coefficients.
    """
    G = _check_grid(s.M, grid)
    dens = np.abs(synthesize(s, G)) ** 2
    D = np.fft.fft(dens) / G
    k = np.fft.fftfreq(G, d=1.0 / G)
    E = np.zeros(G, dtype=np.complex128)
    nz = k != 0
    E[nz] = D[nz] / (1j * k[nz])
    theta = TWO_PI * np.arange(G + 1) / G
    periodic = np.fft.ifft(E) * G
    periodic = np.append(periodic, periodic[0])
    cum = D[0].real * theta + (periodic - E.sum()).real
    total = D[0].real * TWO_PI
    return theta, cum / total


def theta_of(s: QuantumState, grid: int | None = None) -> float:
    """sup{zeta : int_0^zeta |psi|^2 < 1/2} with linear interpolation on the grid."""
    theta, cum = cumulative_density(s, grid)
    # cum is nondecreasing up to rounding; first index reaching one half
    j = int(np.argmax(cum >= 0.5))
    if j == 0:
        return 0.0
    c0, c1 = cum[j - 1], cum[j]
    frac = (0.5 - c0) / (c1 - c0) if c1 > c0 else 0.0
    return float(theta[j - 1] + frac * (theta[j] - theta[j - 1]))


def p_of(s: QuantumState, tol: float = TIE_TOL) -> int:
    """Largest m with sum_{k <= m} |a_k|^2 <= 1/2 (ties at exactly 1/2 included)."""
    cum = np.cumsum(s.masses())
    ok = np.nonzero(cum <= 0.5 + tol)[0]
    if len(ok) == 0:
        return -s.M - 1
    return int(ok[-1]) - s.M


def has_median_tie(s: QuantumState, tol: float = TIE_TOL) -> bool:
    """True when a one-sided or symmetric cumulative mass sits at 1/2."""
    w = s.masses()
    one = np.cumsum(w)
    M = s.M
    sym = np.cumsum(np.concatenate([[w[M]], w[M + 1 :] + w[M - 1 :: -1][:M]]))
    return bool(np.any(np.abs(one - 0.5) <= tol) or np.any(np.abs(sym - 0.5) <= tol))


def lambda_map(s: QuantumState, grid: int | None = None) -> ClassicalState:
    return ClassicalState(theta_of(s, grid), float(p_of(s)))


def v_observable(s: ClassicalState) -> float:
    return abs(s.P)


def band_masses(s: QuantumState) -> tuple[float, float]:
    """(mass on |m| <= 20, mass on |m| > 200)."""
    w = s.masses()
    m = np.abs(s.modes)
    return float(w[m <= INNER_BAND].sum()), float(w[m > OUTER_BAND].sum())


def classify_region(s: QuantumState, strict: bool = False) -> Region:
    if strict and s.M <= OUTER_BAND:
        warnings.warn(
            f"band M={s.M} cannot hold modes beyond {OUTER_BAND}; Classical region is empty",
            ConfigurationWarning,
            stacklevel=2,
        )
    inner, outer = band_masses(s)
    if inner > MASS_LEVEL:
        return Region.QUANTUM
    if outer > MASS_LEVEL:
        return Region.CLASSICAL
    return Region.SEMICLASSICAL


def arc_distance(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class TraceStep:
    n: int
    classical_image: ClassicalState
    quantum_projection: ClassicalState
    angle_gap: float
    momentum_gap: float


@dataclass
class CorrespondenceTrace:
    steps: list[TraceStep] = field(default_factory=list)
    hbar: float = 1.0
    leak: float = 0.0

    def max_gaps(self) -> tuple[float, float]:
        if not self.steps:
            return 0.0, 0.0
        return max(t.angle_gap for t in self.steps), max(t.momentum_gap for t in self.steps)


def _classical_image(start: ClassicalState, n: int, params: ModelParams, kick_index: float) -> ClassicalState:
    if n == 0:
        return start
    theta = start.theta + TWO_PI * params.turn_fraction(n)
    if kick_index == 0:
        return ClassicalState(theta, start.P)
    return ClassicalState(theta, start.P - kick_index * h_tilde_prime_n(start.theta, n, params))


def correspondence_trace(
    s: QuantumState,
    n_max: int,
    params: ModelParams,
    method: str = "convolution",
    mult: KickMultiplier | None = None,
    grid: int | None = None,
    every: int = 1,
) -> CorrespondenceTrace:
    """Record f^n(Lambda psi) against Lambda(F^n psi) for n = 0 .. n_max.

    Purely diagnostic; no bound on the gaps is asserted.  The classical kick is
    K / hbar in momentum-index units (or -c when ``mult`` overrides the kick).
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if mult is None:
        mult = multiplier_for(params, s.M)
    kick_index = -mult.c
    start = lambda_map(s, grid)
    trace = CorrespondenceTrace(hbar=params.hbar)

    def record(n: int, state: QuantumState) -> None:
        cl = _classical_image(start, n, params, kick_index)
        qu = start if n == 0 else lambda_map(state, grid)
        trace.steps.append(
            TraceStep(n, cl, qu, arc_distance(cl.theta, qu.theta), abs(cl.P - qu.P))
        )

    record(0, s)
    state = s
    for n, state in evolve(s, params, n_max, method=method, mult=mult, grid=grid if method == "grid" else None):
        if n % every == 0 or n == n_max:
            record(n, state)
    trace.leak = state.leak
    return trace


__all__ = [
    "Region",
    "ConfigurationWarning",
    "CorrespondenceTrace",
    "TraceStep",
    "theta_of",
    "p_of",
    "lambda_map",
    "v_observable",
    "u_observable",
    "classify_region",
    "correspondence_trace",
    "has_median_tie",
    "band_masses",
    "arc_distance",
    "kick_strength",
]
