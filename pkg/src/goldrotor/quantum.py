"""Quantised kicked rotor F = rotation' o kick' on truncated Fourier vectors.

A state psi(theta) = sum_m a_m e^{i m theta} is stored densely for
|m| <= M.  The kick multiplies psi by e^{i c H(theta)} with c = -K / hbar and
the free rotation maps psi(theta) to psi(theta - lambda), i.e.
a_m -> a_m e^{-i m lambda}.

Mass pushed beyond |m| = M is dropped and added to ``QuantumState.leak``; it
is never silently renormalised away.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np
from scipy.signal import fftconvolve

from .classical import TWO_PI, ModelParams, h_n_exact, tent

METHODS = ("convolution", "grid")


class ConfigurationError(ValueError):
    """Incompatible bandwidths, grid sizes or methods."""


@dataclass(frozen=True)
class QuantumState:
    """Coefficients a_m for m = -M .. M (``coeffs[m + M]``)."""

    coeffs: np.ndarray
    leak: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=np.complex128)
        if a.ndim != 1 or len(a) % 2 == 0:
            raise ConfigurationError("coefficient vector must have odd length 2M + 1")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def M(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def masses(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.M:
            return 0j
        return complex(self.coeffs[m + self.M])

    def with_phase(self, alpha: float) -> "QuantumState":
        return replace(self, coeffs=self.coeffs * np.exp(1j * alpha))

    def padded(self, M: int) -> "QuantumState":
        """Embed in a wider band |m| <= M (M >= self.M)."""
        if M < self.M:
            raise ConfigurationError(f"cannot pad from M={self.M} down to M={M}")
        a = np.zeros(2 * M + 1, dtype=np.complex128)
        a[M - self.M : M + self.M + 1] = self.coeffs
        return QuantumState(a, self.leak)

    def truncated(self, M: int) -> "QuantumState":
        """Restrict to |m| <= M, booking the dropped mass as leak."""
        if M > self.M:
            raise ConfigurationError(f"cannot truncate from M={self.M} up to M={M}")
        a = self.coeffs[self.M - M : self.M + M + 1]
        lost = float(np.sum(self.masses())) - float(np.sum(np.abs(a) ** 2))
        return QuantumState(a.copy(), self.leak + max(lost, 0.0))

    def renormalized(self) -> "QuantumState":
        return replace(self, coeffs=self.coeffs / self.norm())

    # constructors

    @classmethod
    def from_coeffs(cls, coeffs, normalize: bool = True) -> "QuantumState":
        a = np.asarray(coeffs, dtype=np.complex128)
        if normalize:
            nrm = np.linalg.norm(a)
            if nrm == 0:
                raise ValueError("zero state")
            a = a / nrm
        return cls(a)

    @classmethod
    def pure_mode(cls, m0: int, M: int) -> "QuantumState":
        if abs(m0) > M:
            raise ConfigurationError(f"mode {m0} outside band |m| <= {M}")
        a = np.zeros(2 * M + 1, dtype=np.complex128)
        a[m0 + M] = 1.0
        return cls(a)

    @classmethod
    def gaussian(cls, sigma: float, M: int, center: float = 0.0) -> "QuantumState":
        """|a_m|^2 a discrete Gaussian of standard deviation sigma."""
        m = np.arange(-M, M + 1)
        return cls.from_coeffs(np.exp(-((m - center) ** 2) / (4.0 * sigma**2)))

    @classmethod
    def uniform(cls, M: int) -> "QuantumState":
        """psi constant on the circle (only a_0 nonzero)."""
        return cls.pure_mode(0, M)

    @classmethod
    def random(cls, M: int, rng: np.random.Generator, width: int | None = None) -> "QuantumState":
        """Complex Gaussian coefficients on |m| <= width (default M)."""
        width = M if width is None else min(width, M)
        a = np.zeros(2 * M + 1, dtype=np.complex128)
        k = 2 * width + 1
        a[M - width : M + width + 1] = rng.normal(size=k) + 1j * rng.normal(size=k)
        return cls.from_coeffs(a)


def projective_distance(a: QuantumState, b: QuantumState) -> float:
    """min over alpha of ||a - e^{i alpha} b|| (bands must match)."""
    if a.M != b.M:
        raise ConfigurationError("states live on different bands")
    ov = np.vdot(b.coeffs, a.coeffs)
    phase = ov / abs(ov) if ov != 0 else 1.0
    return float(np.linalg.norm(a.coeffs - phase * b.coeffs))


@dataclass(frozen=True)
class KickMultiplier:
    """Fourier coefficients g_m, |m| <= B, of e^{i c H(theta)}."""

    c: float
    B: int
    coeffs: np.ndarray
    tail_bound: float

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.B:
            return 0j
        return complex(self.coeffs[m + self.B])

    def truncated_mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def _arc_integral(a, lo: float, hi: float):
    """int_lo^hi e^{i a theta} d theta, stable through a = 0."""
    a = np.asarray(a, dtype=np.float64)
    half = 0.5 * (hi - lo)
    return np.exp(1j * a * (lo + hi) / 2) * (hi - lo) * np.sinc(a * half / math.pi)


def kick_coefficients_array(c: float, m: np.ndarray) -> np.ndarray:
    """g_m in closed form for an array of integer modes."""
    m = np.asarray(m, dtype=np.float64)
    upper = np.exp(-0.5j * c * math.pi) * _arc_integral(c - m, 0.0, math.pi)
    lower = np.exp(1.5j * c * math.pi) * _arc_integral(-(c + m), math.pi, TWO_PI)
    return (upper + lower) / TWO_PI


def kick_tail_bound(c: float, B: int) -> float:
    """Certified bound on sum_{|m| > B} |g_m|^2.

    Integrating by parts twice, |g_m| <= (2|c|/pi + c^2) / m^2 (two slope
    corners of height 2|c| and |f''| = c^2 on each linear piece), and
    sum_{m > B} m^-4 <= 1 / (3 B^3).
    """
    A = 2.0 * abs(c) / math.pi + c * c
    return 2.0 * A * A / (3.0 * B**3)


def kick_coeffs(c: float, B: int) -> KickMultiplier:
    if B < 1:
        raise ConfigurationError(f"multiplier bandwidth must be >= 1, got {B}")
    m = np.arange(-B, B + 1)
    g = kick_coefficients_array(c, m)
    if c == 0:
        g = np.zeros(2 * B + 1, dtype=np.complex128)
        g[B] = 1.0
        tail = 0.0
    else:
        tail = kick_tail_bound(c, B)
    g.setflags(write=False)
    return KickMultiplier(c=float(c), B=B, coeffs=g, tail_bound=tail)


def default_grid(M: int) -> int:
    """Smallest power of two >= 8 M."""
    return 1 << max(3, math.ceil(math.log2(8 * M)))


def _check_grid(M: int, grid: int | None) -> int:
    G = default_grid(M) if grid is None else int(grid)
    if G < 8 * M:
        raise ConfigurationError(f"grid size {G} below 8M = {8 * M}")
    return G


def synthesize(s: QuantumState, G: int) -> np.ndarray:
    """psi(theta_j) at theta_j = 2 pi j / G."""
    buf = np.zeros(G, dtype=np.complex128)
    buf[s.modes % G] = s.coeffs
    return np.fft.ifft(buf) * G


def analyze(values: np.ndarray, M: int) -> np.ndarray:
    """Coefficients |m| <= M of grid samples (aliasing folded in)."""
    G = len(values)
    spec = np.fft.fft(values) / G
    return spec[np.arange(-M, M + 1) % G]


@lru_cache(maxsize=16)
def _tent_phase(c: float, G: int) -> np.ndarray:
    theta = TWO_PI * np.arange(G) / G
    out = np.exp(1j * c * tent(theta))
    out.setflags(write=False)
    return out


def multiply_on_grid(s: QuantumState, phase: np.ndarray) -> QuantumState:
    """Pointwise multiplication by grid samples ``phase``, then truncation."""
    G = len(phase)
    before = float(np.sum(s.masses()))
    a = analyze(synthesize(s, G) * phase, s.M)
    after = float(np.sum(np.abs(a) ** 2))
    return QuantumState(a, s.leak + max(before - after, 0.0))


def apply_kick(s: QuantumState, mult: KickMultiplier, method: str = "convolution", grid: int | None = None) -> QuantumState:
    """psi -> e^{i c H} psi, truncated back to |m| <= M."""
    if method == "convolution":
        if grid is not None:
            raise ConfigurationError("grid size only applies to the grid method")
        before = float(np.sum(s.masses()))
        full = fftconvolve(s.coeffs, mult.coeffs)
        # full[j] holds mode j - M - B
        a = full[mult.B : mult.B + 2 * s.M + 1]
        after = float(np.sum(np.abs(a) ** 2))
        return QuantumState(a, s.leak + max(before - after, 0.0))
    if method == "grid":
        G = _check_grid(s.M, grid)
        return multiply_on_grid(s, _tent_phase(mult.c, G))
    raise ConfigurationError(f"unknown kick method {method!r}; expected one of {METHODS}")


def rotate_turns(s: QuantumState, x: float) -> QuantumState:
    """Free rotation by 2 pi x."""
    phase = np.exp(-2j * math.pi * np.mod(s.modes * x, 1.0))
    return replace(s, coeffs=s.coeffs * phase)


def apply_rotation(s: QuantumState, lam: float) -> QuantumState:
    """a_m -> a_m e^{-i m lambda}."""
    return rotate_turns(s, lam / TWO_PI)


def kick_strength(params: ModelParams) -> float:
    return -params.K / params.hbar


def multiplier_for(params: ModelParams, M: int) -> KickMultiplier:
    # bandwidth 2M covers every coupling inside the band exactly
    return kick_coeffs(kick_strength(params), 2 * M)


def step(
    s: QuantumState,
    params: ModelParams,
    method: str = "convolution",
    mult: KickMultiplier | None = None,
    grid: int | None = None,
) -> QuantumState:
    """One Floquet period: kick with c = -K/hbar, then rotate by lambda.

    ``mult`` may be passed to reuse precomputed coefficients (or to run the
    c = 0 control).
    """
    if mult is None:
        mult = multiplier_for(params, s.M)
    return rotate_turns(apply_kick(s, mult, method, grid), params.turn_fraction(1))


def evolve(
    s: QuantumState,
    params: ModelParams,
    n: int,
    method: str = "convolution",
    mult: KickMultiplier | None = None,
    grid: int | None = None,
    renormalize_every: int | None = None,
) -> Iterator[tuple[int, QuantumState]]:
    """Yield (k, F^k psi) for k = 1 .. n."""
    if mult is None:
        mult = multiplier_for(params, s.M)
    x = params.turn_fraction(1)
    for k in range(1, n + 1):
        s = rotate_turns(apply_kick(s, mult, method, grid), x)
        if renormalize_every and k % renormalize_every == 0:
            s = s.renormalized()
        yield k, s


def iterate_closed_form(s: QuantumState, n: int, params: ModelParams, grid: int | None = None) -> QuantumState:
    """F^n psi = e^{-i K H_n / hbar} psi(theta - n lambda), one multiplication."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    G = _check_grid(s.M, grid)
    Hn = h_n_exact(n, params)
    theta = TWO_PI * np.arange(G) / G
    phase = np.exp(1j * kick_strength(params) * Hn(theta))
    return multiply_on_grid(rotate_turns(s, params.turn_fraction(n)), phase)


def u_observable(s: QuantumState, tol: float = 1e-12) -> int:
    """Largest m >= 0 with sum_{|k| <= m} |a_k|^2 <= 1/2, or -1 if none.

    ``tol`` absorbs rounding so that exact ties at 1/2 count as <= 1/2.
    """
    w = s.masses()
    M = s.M
    sym = np.empty(M + 1)
    sym[0] = w[M]
    sym[1:] = w[M + 1 :] + w[M - 1 :: -1][:M]
    cum = np.cumsum(sym)
    ok = np.nonzero(cum <= 0.5 + tol)[0]
    return int(ok[-1]) if len(ok) else -1


def perturbation_gaps(
    coeffs: np.ndarray,
    lam: np.ndarray,
    h: Callable[[np.ndarray], np.ndarray],
    grid: int,
) -> tuple[np.ndarray, float]:
    """|c~_m - c_m e^{i lambda_m}| for psi~ = e^{i h} psi_lambda, and sup|h| on the grid.

    ``coeffs`` is c_m for |m| <= M; the result is returned for the same modes.
    """
    M = (len(coeffs) - 1) // 2
    s = QuantumState(coeffs * np.exp(1j * lam))
    theta = TWO_PI * np.arange(grid) / grid
    hv = h(theta)
    tilde = analyze(synthesize(s, grid) * np.exp(1j * hv), M)
    return np.abs(tilde - s.coeffs), float(np.max(np.abs(hv)))
