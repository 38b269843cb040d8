"""Command line entry point: ``goldrotor <subcommand> [options]``.

Exit status: 0 on success, 1 when a lemma check is violated, 2 on a
configuration or I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import (
    LEMMA_SELECTORS,
    ExperimentConfig,
    run_classical_diffusion,
    run_kick_coeffs,
    run_lemma_checks,
    run_quantum_localization,
    run_trace,
    write_output,
)
from .quantum import METHODS, ConfigurationError

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--K", type=float, default=1.0, help="kick strength")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", default="golden", help="'golden' or 'rational:p/q' (turns)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="write to this file instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _quantum_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=int, default=1024, help="state bandwidth |m| <= M")
    p.add_argument("--B", type=int, help="kick multiplier bandwidth (default 2M)")
    p.add_argument("--grid", type=int, help="grid size for the grid method (default: power of two >= 8M)")
    p.add_argument("--method", choices=METHODS, default="convolution")
    p.add_argument("--initial", default="gaussian:sigma=5,center=0",
                   help="'mode:5', 'gaussian:sigma=5,center=0' or 'uniform'")
    p.add_argument("--record-every", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goldrotor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lemmas", help="number-theoretic checks")
    p.add_argument("selector", choices=LEMMA_SELECTORS)
    p.add_argument("--k-max", type=int, help="largest k (4.2 default 1e6, 4.3 default 1e5)")
    p.add_argument("--q-max", type=int, default=987)
    p.add_argument("--samples", type=int, default=1000)
    _common(p)

    p = sub.add_parser("classical-diffusion", help="exact and Monte-Carlo diffusion measure")
    p.add_argument("--steps", type=_int_list, default=[], help="explicit step counts n")
    p.add_argument("--fib", type=_int_list, default=[], help="Fibonacci indices k (n = q_k)")
    p.add_argument("--N", type=float, default=5.0, help="momentum bound")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--search", action="store_true", help="search subset sums of --fib indices")
    p.add_argument("--eps", type=float, help="target measure for --search (default 0.1 * 2 pi)")
    p.add_argument("--histogram", action="store_true", help="emit H~'_n distribution vs trinomial model")
    p.add_argument("--delta", type=float, help="trinomial delta for --histogram")
    p.add_argument("--workers", type=int, default=1)
    _common(p)

    p = sub.add_parser("quantum-localize", help="evolve a state and record u(F^n psi)")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--contrast", help="companion run lambda, e.g. rational:1/1")
    p.add_argument("--renormalize-every", type=int)
    _quantum_opts(p)
    _common(p)

    p = sub.add_parser("trace", help="correspondence trace f^n o Lambda vs Lambda o F^n")
    p.add_argument("--steps", type=int, default=1000)
    _quantum_opts(p)
    _common(p)

    p = sub.add_parser("kick-coeffs", help="dump Fourier coefficients of e^{icH}")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--B", type=int, default=64)
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kw = dict(
        experiment=args.command,
        K=args.K,
        hbar=args.hbar,
        lam=args.lam,
        seed=args.seed,
        output=args.output,
        format=args.format,
    )
    if args.command == "lemmas":
        kw.update(selector=args.selector, k_max=args.k_max, q_max=args.q_max, samples=args.samples)
    elif args.command == "classical-diffusion":
        kw.update(steps=args.steps, fib=args.fib, N=args.N, samples=args.samples, search=args.search,
                  eps=args.eps, histogram=args.histogram, delta=args.delta, workers=args.workers)
    elif args.command in ("quantum-localize", "trace"):
        kw.update(steps=[args.steps], M=args.M, B=args.B, grid=args.grid, method=args.method,
                  initial=args.initial, record_every=args.record_every)
        if args.command == "quantum-localize":
            kw.update(contrast=args.contrast, renormalize_every=args.renormalize_every)
    elif args.command == "kick-coeffs":
        kw.update(B=args.B)
    return ExperimentConfig(**kw)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if args.command == "lemmas":
            rows, meta = run_lemma_checks(config.selector, config)
        elif args.command == "classical-diffusion":
            rows, meta = run_classical_diffusion(config)
        elif args.command == "quantum-localize":
            rows, meta = run_quantum_localization(config)
        elif args.command == "trace":
            rows, meta = run_trace(config)
        else:
            rows, meta = run_kick_coeffs(args.c, args.B, config)
    except (ConfigurationError, ValueError) as exc:
        print(f"goldrotor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = write_output(rows, meta, config.output, config.format)
    except OSError as exc:
        print(f"goldrotor: cannot write {config.output}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not config.output:
        sys.stdout.write(text)
    return EXIT_VIOLATION if meta.get("violations") else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
