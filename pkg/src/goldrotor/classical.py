"""Classical kicked rotor f = rotation o kick on the cylinder T^1 x R.

Angles are radians in [0, 2 pi).  Internally the circle is often handled in
"turns" x = theta / (2 pi) in [0, 1), which is where the high-precision
rotation fractions live.

The kick potential is the mean-zero tent H(theta) = theta - pi/2 on [0, pi],
3 pi/2 - theta on [pi, 2 pi).  Its derivative is taken as +1 on the closed
upper half [0, pi] and -1 on (pi, 2 pi).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .goldenmean import (
    fibonacci_q,
    golden_fraction,
    golden_fractions,
    is_below,
)

TWO_PI = 2.0 * math.pi
# breakpoints closer than this (radians) are treated as one
MERGE_TOL = 1e-15


@dataclass(frozen=True)
class ModelParams:
    """Kick strength, Planck constant and rotation angle lambda = omega T.

    ``rotation`` is lambda / (2 pi) as an exact fraction; ``None`` selects the
    golden mean at full precision.
    """

    K: float = 1.0
    hbar: float = 1.0
    rotation: Fraction | None = None

    def __post_init__(self):
        if self.K == 0 or not math.isfinite(self.K):
            raise ValueError(f"kick strength K must be finite and nonzero, got {self.K}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.rotation is not None and not isinstance(self.rotation, Fraction):
            object.__setattr__(self, "rotation", Fraction(self.rotation))

    @classmethod
    def golden_mean(cls, K: float = 1.0, hbar: float = 1.0) -> "ModelParams":
        return cls(K=K, hbar=hbar, rotation=None)

    @classmethod
    def rational(cls, p: int, q: int, K: float = 1.0, hbar: float = 1.0) -> "ModelParams":
        return cls(K=K, hbar=hbar, rotation=Fraction(p, q))

    @property
    def golden(self) -> bool:
        return self.rotation is None

    @property
    def lam(self) -> float:
        """lambda reduced mod 2 pi."""
        return TWO_PI * self.turn_fraction(1)

    def turn_fraction(self, k: int) -> float:
        """frac(k * lambda / 2 pi)."""
        if self.rotation is None:
            return golden_fraction(k)
        r = self.rotation * k
        return float(r - math.floor(r))

    def turn_fractions(self, n: int, start: int = 0) -> np.ndarray:
        """frac(k * lambda / 2 pi) for k = start .. start + n - 1."""
        if self.rotation is None:
            return golden_fractions(n, start)
        p, q = self.rotation.numerator, self.rotation.denominator
        k = np.arange(start, start + n, dtype=np.int64)
        return ((k * p) % q) / q

    def describe(self) -> str:
        if self.rotation is None:
            return "golden"
        return f"rational:{self.rotation.numerator}/{self.rotation.denominator}"


GOLDEN_PARAMS = ModelParams.golden_mean()


@dataclass(frozen=True)
class ClassicalState:
    theta: float
    P: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


def tent(theta):
    """The mean-zero tent potential H."""
    t = np.mod(theta, TWO_PI)
    out = np.where(t <= math.pi, t - math.pi / 2, 1.5 * math.pi - t)
    return float(out) if np.ndim(out) == 0 else out


def tent_slope(theta):
    """H'(theta): +1 on [0, pi], -1 on (pi, 2 pi)."""
    t = np.mod(theta, TWO_PI)
    out = np.where(t <= math.pi, 1, -1)
    return int(out) if np.ndim(out) == 0 else out


def _slope_turns(x):
    # same as tent_slope, argument in turns
    return np.where(np.mod(x, 1.0) <= 0.5, 1, -1)


def step(s: ClassicalState, params: ModelParams) -> ClassicalState:
    """One period: kick P -> P - K H'(theta), then rotate theta -> theta + lambda."""
    return ClassicalState(s.theta + params.lam, s.P - params.K * tent_slope(s.theta))


def iterate(s: ClassicalState, n: int, params: ModelParams) -> ClassicalState:
    """f^n by the closed form (theta + n lambda, P - K H~'_n(theta))."""
    return ClassicalState(
        s.theta + TWO_PI * params.turn_fraction(n),
        s.P - params.K * h_tilde_prime_n(s.theta, n, params),
    )


def h_tilde_prime_n(theta, n: int, params: ModelParams):
    """sum_{k=0}^{n-1} H'(theta + k lambda); an integer with the parity of n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    fr = params.turn_fractions(n)
    t = np.mod(np.asarray(theta, dtype=np.float64) / TWO_PI, 1.0)
    if t.ndim == 0:
        return int(_slope_turns(t + fr).sum())
    return np.array([_slope_turns(ti + fr).sum() for ti in t.flat], dtype=np.int64).reshape(t.shape)


@dataclass(frozen=True)
class PiecewiseLinear:
    """A continuous-on-the-circle piecewise-linear (or step) function.

    ``values[i]`` is the value at ``breakpoints[i]`` (right limit for step
    functions) and ``slopes[i]`` the slope on [b_i, b_{i+1}); the last piece
    wraps around to b_0 + 2 pi.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __len__(self) -> int:
        return len(self.breakpoints)

    def _piece(self, theta):
        t = np.mod(np.asarray(theta, dtype=np.float64), TWO_PI)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        offset = t - self.breakpoints[idx]
        # before the first breakpoint we are on the wrapped last piece
        offset = np.where(idx < 0, offset + TWO_PI, offset)
        return idx, offset

    def __call__(self, theta):
        idx, offset = self._piece(theta)
        out = self.values[idx] + self.slopes[idx] * offset
        return float(out) if np.ndim(out) == 0 else out

    def lengths(self) -> np.ndarray:
        b = self.breakpoints
        return np.diff(np.append(b, b[0] + TWO_PI))

    def sup_abs(self) -> float:
        # extrema of a piecewise-linear function sit on breakpoints
        return float(np.max(np.abs(self.values)))

    def max_abs_slope(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def integral(self) -> float:
        L = self.lengths()
        return float(math.fsum(self.values * L + 0.5 * self.slopes * L * L))


def _merge_events(pos: np.ndarray, weight: np.ndarray, tol: float):
    """Sort circle events (turns) and merge those closer than tol."""
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    weight = weight[order]
    if len(pos) == 0:
        return pos, weight
    new_group = np.empty(len(pos), dtype=bool)
    new_group[0] = True
    new_group[1:] = np.diff(pos) > tol
    gid = np.cumsum(new_group) - 1
    mpos = pos[new_group]
    mweight = np.zeros(len(mpos), dtype=weight.dtype)
    np.add.at(mweight, gid, weight)
    # a group spanning the wrap point 1 -> 0
    if len(mpos) > 1 and 1.0 - mpos[-1] + mpos[0] <= tol:
        mweight[0] += mweight[-1]
        mpos, mweight = mpos[:-1], mweight[:-1]
    keep = mweight != 0
    return mpos[keep], mweight[keep]


def _mid_first_piece(b: np.ndarray) -> float:
    if len(b) > 1:
        return 0.5 * (b[0] + b[1])
    return b[0] + 0.5


def h_n_exact(n: int, params: ModelParams) -> PiecewiseLinear:
    """Exact piecewise-linear form of H_n(theta) = sum_{k=1}^n H(theta - k lambda).

    The summand k has its minimum at k lambda (slope jumps by +2) and its
    maximum at k lambda + pi (slope jumps by -2).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    shifts = np.asarray(params.turn_fractions(n, start=1))
    ups = shifts
    downs = np.mod(shifts + 0.5, 1.0)
    pos, w = _merge_events(
        np.concatenate([ups, downs]),
        np.concatenate([np.full(n, 2, dtype=np.int64), np.full(n, -2, dtype=np.int64)]),
        MERGE_TOL / TWO_PI,
    )
    if len(pos) == 0:
        # constant function (exact cancellation at a resonance)
        v0 = float(math.fsum(tent(TWO_PI * np.mod(-shifts, 1.0))))
        return PiecewiseLinear(np.zeros(1), np.array([v0]), np.zeros(1, dtype=np.int64))
    s0 = int(_slope_turns(_mid_first_piece(pos) - shifts).sum())
    slopes = s0 + np.concatenate([[0], np.cumsum(w[1:])])
    b = TWO_PI * pos
    v0 = math.fsum(tent(TWO_PI * np.mod(pos[0] - shifts, 1.0)))
    increments = slopes[:-1] * np.diff(b)
    values = v0 + np.concatenate([[0.0], np.cumsum(increments)])
    return PiecewiseLinear(b, values, slopes.astype(np.int64))


def sup_abs_hqn(n: int) -> float:
    """Exact sup of |H_{q_n}| for the golden rotation (attained at a breakpoint)."""
    return h_n_exact(fibonacci_q(n), GOLDEN_PARAMS).sup_abs()


def hqn_max_slope(n: int) -> float:
    """Largest |H'_{q_n}|; bounded by 3 for the golden rotation."""
    return h_n_exact(fibonacci_q(n), GOLDEN_PARAMS).max_abs_slope()


def h_tilde_prime_steps(n: int, params: ModelParams) -> PiecewiseLinear:
    """H~'_n as an exact integer step function (slopes all zero).

    Term k equals +1 exactly for theta in [-k lambda, pi - k lambda] (mod 2 pi).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    fr = np.asarray(params.turn_fractions(n))
    ups = np.mod(-fr, 1.0)
    downs = np.mod(0.5 - fr, 1.0)
    pos, w = _merge_events(
        np.concatenate([ups, downs]),
        np.concatenate([np.full(n, 2, dtype=np.int64), np.full(n, -2, dtype=np.int64)]),
        MERGE_TOL / TWO_PI,
    )
    if len(pos) == 0:
        level = int(_slope_turns(0.25 + fr).sum())
        return PiecewiseLinear(np.zeros(1), np.array([level], dtype=np.int64), np.zeros(1, dtype=np.int64))
    level0 = int(_slope_turns(_mid_first_piece(pos) + fr).sum())
    levels = level0 + np.concatenate([[0], np.cumsum(w[1:])])
    return PiecewiseLinear(TWO_PI * pos, levels.astype(np.int64), np.zeros(len(pos), dtype=np.int64))


def h_tilde_prime_distribution(n: int, params: ModelParams) -> dict[int, float]:
    """Fraction of the circle on which H~'_n takes each value."""
    sf = h_tilde_prime_steps(n, params)
    frac = sf.lengths() / TWO_PI
    out: dict[int, float] = {}
    for level, f in zip(sf.values.tolist(), frac.tolist()):
        out[level] = out.get(level, 0.0) + f
    return dict(sorted(out.items()))


def diffusion_measure_exact(n: int, N: float, params: ModelParams) -> float:
    """Linear measure of {theta : |K H~'_n(theta)| < N} in [0, 2 pi]."""
    if N <= 0:
        raise ValueError(f"N must be positive, got {N}")
    sf = h_tilde_prime_steps(n, params)
    inside = np.abs(params.K * sf.values) < N
    return float(math.fsum(sf.lengths()[inside]))


def diffusion_measure_montecarlo(
    n: int,
    N: float,
    params: ModelParams,
    samples: int = 1_000_000,
    seed: int | None = 0,
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Monte-Carlo estimate of diffusion_measure_exact and its standard error.

    Independent of the breakpoint sweep: for each sampled theta the orbit
    points in [0, pi] are counted by binary search in the sorted rotation
    fractions.
    """
    rng = np.random.default_rng(seed)
    fr = np.sort(np.asarray(params.turn_fractions(n)))
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        t = rng.random(m)
        # theta + k lambda in [0, pi]  <=>  frac(k rho) in [a, a + 1/2] mod 1
        a = np.mod(-t, 1.0)
        hi = a + 0.5
        wrap = hi > 1.0
        count = np.where(
            wrap,
            (n - np.searchsorted(fr, a, side="left")) + np.searchsorted(fr, hi - 1.0, side="right"),
            np.searchsorted(fr, hi, side="right") - np.searchsorted(fr, a, side="left"),
        )
        level = 2 * count - n
        hits += int(np.count_nonzero(np.abs(params.K * level) < N))
        done += m
    p = hits / samples
    return TWO_PI * p, TWO_PI * math.sqrt(p * (1.0 - p) / samples)


def recipe_indices(n_max: int) -> list[int]:
    """Fibonacci indices k with q_k even, r_k < r and q_k <= n_max."""
    out = []
    k = 1
    while fibonacci_q(k) <= n_max:
        if fibonacci_q(k) % 2 == 0 and is_below(k):
            out.append(k)
        k += 1
    return out


@dataclass
class DiffusionSearch:
    target: float
    found: int | None
    found_measure: float | None
    best_n: int
    best_measure: float
    tried: list[tuple[int, float]] = field(default_factory=list)


def search_diffusion_step(
    N: float,
    eps: float,
    params: ModelParams,
    indices: Sequence[int] | None = None,
    n_max: int = 100_000,
) -> DiffusionSearch:
    """Smallest sum of distinct q_k (k from ``indices``) whose exact diffusion
    measure is below ``eps``.

    Every subset sum <= n_max is tried in increasing order; the best one is
    reported when none reaches the target.
    """
    if indices is None:
        indices = recipe_indices(n_max)
    qs = sorted({fibonacci_q(k) for k in indices})
    sums = set()
    for r in range(1, len(qs) + 1):
        for combo in itertools.combinations(qs, r):
            s = sum(combo)
            if s <= n_max:
                sums.add(s)
    result = DiffusionSearch(target=eps, found=None, found_measure=None, best_n=0, best_measure=math.inf)
    for n in sorted(sums):
        m = diffusion_measure_exact(n, N, params)
        result.tried.append((n, m))
        if m < result.best_measure:
            result.best_n, result.best_measure = n, m
        if m < eps:
            result.found, result.found_measure = n, m
            break
    return result


@dataclass(frozen=True)
class TrinomialModel:
    """Idealised model: each step keeps the value with prob 1 - 2 delta and
    moves it by -1 or +1 with prob delta each.  ``masses[k + n]`` = |E_{n,k}|.
    """

    n: int
    delta: float
    masses: np.ndarray

    def __getitem__(self, k: int) -> float:
        if abs(k) > self.n:
            return 0.0
        return float(self.masses[k + self.n])

    def as_dict(self) -> dict[int, float]:
        return {k: float(m) for k, m in zip(range(-self.n, self.n + 1), self.masses)}


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")


def trinomial_masses(n: int, delta: float) -> TrinomialModel:
    _check_delta(delta)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    m = np.ones(1)
    for _ in range(n):
        m = _trinomial_step(m, delta)
    return TrinomialModel(n=n, delta=delta, masses=m)


def _trinomial_step(m: np.ndarray, delta: float) -> np.ndarray:
    out = np.zeros(len(m) + 2)
    out[1:-1] += (1.0 - 2.0 * delta) * m
    out[:-2] += delta * m
    out[2:] += delta * m
    return out


def trinomial_central_masses(n_max: int, delta: float) -> np.ndarray:
    """|E_{n,0}| for n = 0 .. n_max from a single recurrence run."""
    _check_delta(delta)
    out = np.empty(n_max + 1)
    m = np.ones(1)
    out[0] = 1.0
    for n in range(1, n_max + 1):
        m = _trinomial_step(m, delta)
        out[n] = m[n]
    return out


def ensemble_momenta(thetas: Iterable[float], n: int, params: ModelParams) -> np.ndarray:
    """P after n steps from (theta, 0) for each theta."""
    return -params.K * np.asarray(h_tilde_prime_n(np.asarray(list(thetas), dtype=float), n, params), dtype=float)
