"""Experiment runners shared by the command line and the acceptance tests.

Each runner returns ``(rows, metadata)``: rows are flat dicts ready for CSV,
metadata echoes the configuration plus precision settings and norm leak.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .classical import (
    ModelParams,
    diffusion_measure_exact,
    diffusion_measure_montecarlo,
    h_n_exact,
    h_tilde_prime_distribution,
    recipe_indices,
    search_diffusion_step,
    trinomial_masses,
)
from .goldenmean import (
    FRAC_BITS,
    GOLDEN_DIGITS,
    convergent,
    decompose,
    decomposition_bound,
    delta_n,
    fibonacci_q,
    halfcircle_counts,
    is_below,
    scaled_error_below_half,
)
from .quantum import (
    METHODS,
    ConfigurationError,
    QuantumState,
    default_grid,
    evolve,
    kick_coeffs,
    kick_strength,
)
from .quasiconjugacy import classify_region, correspondence_trace, p_of, theta_of, u_observable

log = logging.getLogger(__name__)

EDGE_WARN = 1e-8
LEMMA_SELECTORS = ("convergents", "4.1", "4.2", "4.3", "4.4")


def parse_lambda(spec: str) -> Fraction | None:
    """'golden' -> None, 'rational:p/q' -> Fraction(p, q)."""
    spec = spec.strip()
    if spec == "golden":
        return None
    if spec.startswith("rational:"):
        body = spec.split(":", 1)[1]
        try:
            p, q = body.split("/")
            return Fraction(int(p), int(q))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"bad rational lambda {spec!r}") from exc
    raise ConfigurationError(f"lambda must be 'golden' or 'rational:p/q', got {spec!r}")


def parse_initial(spec: str, M: int) -> QuantumState:
    """'mode:5', 'gaussian:sigma=5,center=0' or 'uniform'."""
    kind, _, body = spec.strip().partition(":")
    try:
        if kind == "mode":
            return QuantumState.pure_mode(int(body), M)
        if kind == "uniform":
            return QuantumState.uniform(M)
        if kind == "gaussian":
            opts = dict(item.split("=") for item in body.split(",") if item)
            unknown = set(opts) - {"sigma", "center"}
            if unknown:
                raise ConfigurationError(f"unknown gaussian options {sorted(unknown)}")
            sigma = float(opts.get("sigma", 5.0))
            if sigma <= 0:
                raise ConfigurationError("gaussian sigma must be positive")
            return QuantumState.gaussian(sigma, M, center=float(opts.get("center", 0.0)))
    except ValueError as exc:
        raise ConfigurationError(f"bad initial state {spec!r}: {exc}") from exc
    raise ConfigurationError(f"unknown initial state {spec!r}")


@dataclass
class ExperimentConfig:
    experiment: str = "quantum-localize"
    K: float = 1.0
    hbar: float = 1.0
    lam: str = "golden"
    M: int = 1024
    B: int | None = None
    grid: int | None = None
    method: str = "convolution"
    steps: list[int] = field(default_factory=list)
    fib: list[int] = field(default_factory=list)
    samples: int = 1_000_000
    N: float = 5.0
    eps: float | None = None
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    initial: str = "gaussian:sigma=5,center=0"
    contrast: str | None = None
    record_every: int = 1
    renormalize_every: int | None = None
    selector: str = "convergents"
    delta: float | None = None
    histogram: bool = False
    search: bool = False
    k_max: int | None = None
    q_max: int = 987
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(msg: str):
            raise ConfigurationError(msg)

        if not math.isfinite(self.K):
            bad("K must be finite")
        if not self.hbar > 0:
            bad("hbar must be positive")
        parse_lambda(self.lam)
        if self.contrast is not None:
            parse_lambda(self.contrast)
        if self.M < 1:
            bad("M must be >= 1")
        if self.B is not None and self.B < 1:
            bad("B must be >= 1")
        if self.grid is not None and self.grid < 8 * self.M:
            bad(f"grid must be >= 8M = {8 * self.M}")
        if self.method not in METHODS:
            bad(f"method must be one of {METHODS}")
        if any(n < 0 for n in self.steps):
            bad("step counts must be non-negative")
        if any(k < 1 for k in self.fib):
            bad("Fibonacci indices must be >= 1")
        if self.samples < 1:
            bad("samples must be >= 1")
        if not self.N > 0:
            bad("N must be positive")
        if self.eps is not None and not self.eps > 0:
            bad("eps must be positive")
        if self.format not in ("csv", "json"):
            bad("format must be csv or json")
        if self.record_every < 1:
            bad("record_every must be >= 1")
        if self.renormalize_every is not None and self.renormalize_every < 1:
            bad("renormalize_every must be >= 1")
        if self.selector not in LEMMA_SELECTORS:
            bad(f"selector must be one of {LEMMA_SELECTORS}")
        if self.delta is not None and not 0 < self.delta < 0.5:
            bad("delta must lie in (0, 1/2)")
        if self.workers < 1:
            bad("workers must be >= 1")

    def params(self, lam: str | None = None) -> ModelParams:
        return ModelParams(K=self.K, hbar=self.hbar, rotation=parse_lambda(lam or self.lam))


def metadata(config: ExperimentConfig, **extra: Any) -> dict[str, Any]:
    meta = {
        "tool": "goldrotor",
        "version": __version__,
        "config": asdict(config),
        "precision": {"golden_digits": GOLDEN_DIGITS, "fraction_bits": FRAC_BITS},
    }
    meta.update(extra)
    return meta


# lemma checks


def _row(check: str, case: Any, measured: Any, bound: Any, margin: Any, passed: bool) -> dict[str, Any]:
    return {"check": check, "case": case, "measured": measured, "bound": bound, "margin": margin, "passed": bool(passed)}


def _convergent_rows(n_max: int = 90) -> list[dict]:
    rows = []
    for n in range(1, n_max + 1):
        c, c1 = convergent(n), convergent(n + 1)
        if n >= 2:
            d = fibonacci_q(n + 1) - fibonacci_q(n) - fibonacci_q(n - 1)
            rows.append(_row("recurrence", n, d, 0, 0, d == 0))
        rows.append(_row("p_equals_next_q", n, c.p - fibonacci_q(n + 1), 0, 0, c.p == fibonacci_q(n + 1)))
        diff = c1.value - c.value
        want = Fraction((-1) ** (n + 1), c1.q * c.q)
        rows.append(_row("consecutive_difference", n, str(diff - want), 0, 0, diff == want))
        even = c.q % 2 == 0
        rows.append(_row("parity", n, int(even), int((n - 1) % 3 == 0), 0, even == ((n - 1) % 3 == 0)))
        rows.append(_row("below_golden", n, int(is_below(n)), "", "", True))
        if n >= 3:
            ok = scaled_error_below_half(n)
            rows.append(_row("scaled_error", n, 2 * math.pi * delta_n(n), 0.5, 0.5 - 2 * math.pi * delta_n(n), ok))
    return rows


def _decomposition_rows(k_max: int) -> list[dict]:
    rows = []
    lo = 2
    while lo <= k_max:
        hi = min(k_max, 10 ** (len(str(lo))) - 1)
        worst_k, worst_margin, ok = lo, math.inf, True
        for k in range(lo, hi + 1):
            d = decompose(k)
            valid = sum(d.parts) == k and all(a < b for a, b in zip(d.parts, d.parts[1:]))
            margin = decomposition_bound(k) - len(d)
            ok = ok and valid and margin >= 0
            if margin < worst_margin:
                worst_k, worst_margin = k, margin
        rows.append(_row("decomposition_length", f"{lo}..{hi} worst k={worst_k}", len(decompose(worst_k)),
                         decomposition_bound(worst_k), worst_margin, ok))
        lo = hi + 1
    return rows


def _halfcircle_rows(q_max: int, samples: int, rng: np.random.Generator) -> list[dict]:
    rows = []
    thetas = rng.random(samples) * 2 * math.pi
    n = 1
    while fibonacci_q(n) <= q_max:
        q = fibonacci_q(n)
        dev = np.abs(halfcircle_counts(thetas, q) - q / 2)
        worst = float(dev.max())
        rows.append(_row("halfcircle_fibonacci", f"n={n} q={q}", worst, 3.0, 3.0 - worst, worst <= 3.0))
        n += 1
    return rows


def _discrepancy_rows(k_max: int, samples: int, rng: np.random.Generator) -> list[dict]:
    rows = []
    ks = rng.integers(2, k_max + 1, size=samples)
    thetas = rng.random(samples) * 2 * math.pi
    order = np.argsort(ks)
    for i in order:
        k = int(ks[i])
        count = int(halfcircle_counts(np.array([thetas[i]]), k)[0])
        dev = abs(count - k / 2)
        bound = 3 * decomposition_bound(k)
        rows.append(_row("halfcircle_general", f"k={k} theta={thetas[i]:.6f}", dev, bound, bound - dev, dev <= bound))
    return rows


def _hqn_rows(n_max: int) -> list[dict]:
    rows = []
    for n in range(1, n_max + 1):
        q = fibonacci_q(n)
        pl = h_n_exact(q, ModelParams.golden_mean())
        sup = pl.sup_abs()
        envelope = n / 1.5**n
        slope = pl.max_abs_slope()
        rows.append({
            "check": "hqn_decay",
            "case": n,
            "q": q,
            "sup_abs": sup,
            "envelope": envelope,
            "ratio": sup / envelope,
            "max_abs_slope": slope,
            "measured": slope,
            "bound": 3,
            "margin": 3 - slope,
            "passed": slope <= 3,
        })
    return rows


def run_lemma_checks(selector: str, config: ExperimentConfig | None = None) -> tuple[list[dict], dict]:
    config = config or ExperimentConfig(experiment="lemmas", selector=selector)
    rng = np.random.default_rng(config.seed)
    if selector == "convergents":
        rows = _convergent_rows()
    elif selector == "4.1":
        rows = _halfcircle_rows(config.q_max, min(config.samples, 1000), rng)
    elif selector == "4.2":
        rows = _decomposition_rows(config.k_max or 10**6)
    elif selector == "4.3":
        rows = _discrepancy_rows(config.k_max or 10**5, min(config.samples, 1000), rng)
    elif selector == "4.4":
        n_max = 1
        while fibonacci_q(n_max + 1) <= max(config.q_max, 2584):
            n_max += 1
        rows = _hqn_rows(n_max)
    else:
        raise ConfigurationError(f"unknown lemma selector {selector!r}")
    violations = sum(not r["passed"] for r in rows)
    return rows, metadata(config, selector=selector, violations=violations)


# classical diffusion


def _diffusion_row(args) -> dict:
    n, N, params, samples, seed = args
    exact = diffusion_measure_exact(n, N, params)
    mc, se = diffusion_measure_montecarlo(n, N, params, samples=samples, seed=seed)
    return {
        "n": n,
        "N": N,
        "exact_measure": exact,
        "montecarlo_measure": mc,
        "montecarlo_stderr": se,
    }


def run_classical_diffusion(config: ExperimentConfig) -> tuple[list[dict], dict]:
    params = config.params()
    steps = list(config.steps) + [fibonacci_q(k) for k in config.fib]
    extra: dict[str, Any] = {}
    if config.search:
        eps = config.eps if config.eps is not None else 0.1 * 2 * math.pi
        n_cap = max(steps) if steps else 100_000
        found = search_diffusion_step(config.N, eps, params, indices=config.fib or None, n_max=n_cap)
        extra["search"] = {
            "target": eps,
            "found": found.found,
            "found_measure": found.found_measure,
            "best_n": found.best_n,
            "best_measure": found.best_measure,
            "indices": list(config.fib or recipe_indices(n_cap)),
            "tried": len(found.tried),
        }
        steps = [found.found if found.found is not None else found.best_n]
    if not steps:
        raise ConfigurationError("no step counts given (use --steps, --fib or --search)")
    jobs = [(n, config.N, params, config.samples, config.seed + i) for i, n in enumerate(steps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_diffusion_row, jobs))
    else:
        rows = [_diffusion_row(j) for j in jobs]
    if config.histogram:
        rows = _histogram_rows(steps, config)
    return rows, metadata(config, **extra)


def _histogram_rows(steps: list[int], config: ExperimentConfig) -> list[dict]:
    """Exact distribution of H~'_n next to the idealised trinomial masses.

    The trinomial model runs one step per Zeckendorf part of n with a +-2
    jump per step; delta defaults to the mean of delta_k over those parts.
    The comparison is diagnostic only.
    """
    params = config.params()
    rows = []
    for n in steps:
        parts = [i for i in decompose(n).indices if i >= 1]
        delta = config.delta or (float(np.mean([delta_n(i) for i in parts])) if parts else delta_n(1))
        model = trinomial_masses(len(parts), delta)
        offset = n - 2 * (n // 2)
        for value, frac in h_tilde_prime_distribution(n, params).items():
            rows.append({
                "n": n,
                "value": value,
                "exact_fraction": frac,
                "trinomial_mass": model[(value - offset) // 2],
                "delta": delta,
            })
    return rows


# quantum localisation


def _quantum_run(config: ExperimentConfig, lam: str, label: str) -> tuple[list[dict], float]:
    state = parse_initial(config.initial, config.M)
    rotation = parse_lambda(lam)
    if config.K == 0:
        # free-rotation control: ModelParams insists on K != 0, the kick is overridden
        params = ModelParams(K=1.0, hbar=config.hbar, rotation=rotation)
        mult = kick_coeffs(0.0, config.B or 2 * config.M)
    else:
        params = ModelParams(K=config.K, hbar=config.hbar, rotation=rotation)
        mult = kick_coeffs(kick_strength(params), config.B or 2 * config.M)
    n_max = max(config.steps) if config.steps else 10_000
    grid = config.grid if config.method == "grid" else None
    obs_grid = config.grid or default_grid(config.M)

    def row(n: int, s: QuantumState) -> dict:
        return {
            "run": label,
            "lambda": lam,
            "n": n,
            "u": u_observable(s),
            "norm_leak": s.leak,
            "region": str(classify_region(s)),
            "theta_of": theta_of(s, obs_grid),
            "p_of": p_of(s),
        }

    rows = [row(0, state)]
    warned = False
    s = state
    for n, s in evolve(state, params, n_max, method=config.method, mult=mult, grid=grid,
                       renormalize_every=config.renormalize_every):
        if not warned and s.masses()[[0, -1]].sum() > EDGE_WARN:
            log.warning("%s run: edge mass exceeds %.0e at step %d; increase M", label, EDGE_WARN, n)
            warned = True
        if n % config.record_every == 0 or n == n_max:
            rows.append(row(n, s))
    return rows, s.leak


def run_quantum_localization(config: ExperimentConfig) -> tuple[list[dict], dict]:
    rows, leak = _quantum_run(config, config.lam, "primary")
    extra: dict[str, Any] = {"norm_leak": leak, "max_u": max(r["u"] for r in rows)}
    if config.contrast is not None:
        crows, cleak = _quantum_run(config, config.contrast, "contrast")
        rows += crows
        extra["contrast_norm_leak"] = cleak
        extra["contrast_max_u"] = max(r["u"] for r in crows)
    extra["renormalized_every"] = config.renormalize_every
    return rows, metadata(config, **extra)


def run_trace(config: ExperimentConfig) -> tuple[list[dict], dict]:
    state = parse_initial(config.initial, config.M)
    params = config.params()
    n_max = max(config.steps) if config.steps else 1000
    trace = correspondence_trace(state, n_max, params, method=config.method,
                                 grid=config.grid, every=config.record_every)
    rows = [
        {
            "n": t.n,
            "classical_theta": t.classical_image.theta,
            "classical_P": t.classical_image.P,
            "quantum_theta": t.quantum_projection.theta,
            "quantum_P": t.quantum_projection.P,
            "angle_gap": t.angle_gap,
            "momentum_gap": t.momentum_gap,
        }
        for t in trace.steps
    ]
    return rows, metadata(config, norm_leak=trace.leak, momentum_units="index (multiply by hbar)")


def run_kick_coeffs(c: float, B: int, config: ExperimentConfig) -> tuple[list[dict], dict]:
    mult = kick_coeffs(c, B)
    rows = [
        {"m": m, "re": g.real, "im": g.imag, "abs": abs(g)}
        for m, g in zip(range(-B, B + 1), mult.coeffs.tolist())
    ]
    return rows, metadata(config, c=c, B=B, tail_bound=mult.tail_bound, truncated_mass=mult.truncated_mass())


# output


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"not serialisable: {type(obj)}")


def render(rows: list[dict], meta: dict, fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps({"metadata": meta, "rows": rows}, default=_jsonable, indent=1)
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, default=_jsonable, sort_keys=True) + "\n")
    if rows:
        fields: list[str] = []
        for r in rows:
            fields.extend(k for k in r if k not in fields)
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_output(rows: list[dict], meta: dict, path: str | None, fmt: str) -> str:
    text = render(rows, meta, fmt)
    if path:
        Path(path).write_text(text)
    return text


def read_csv_output(text: str) -> tuple[dict, list[dict]]:
    """Parse text produced by render(..., 'csv')."""
    first, _, body = text.partition("\n")
    if not first.startswith("# "):
        raise ValueError("missing metadata line")
    meta = json.loads(first[2:])
    rows = list(csv.DictReader(io.StringIO(body)))
    return meta, rows
