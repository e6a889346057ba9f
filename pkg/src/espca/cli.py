"""Command line entry point: ``espca run ...``."""
import argparse
import logging
import sys
from dataclasses import asdict

from .errors import EspcaError
from .es import EsConfig
from .gp import GpConfig
from .harness import ExperimentConfig, emit_outputs, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="espca", description="Non-linear PCA experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run repeated experiments and write result files")
    run.add_argument("--dataset", required=True, help="circles, spheres, stripes, or a delimited data file")
    run.add_argument("--schema", help="JSON schema sidecar for a data file")
    run.add_argument("--method", default="pca", help="comma-separated: pca,kpca,es-global,es-partial,gp,es")
    run.add_argument("--k", type=int, default=1)
    run.add_argument("--repeats", type=int, default=15)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="results")
    run.add_argument("--config", help="key = value file with ES settings")
    run.add_argument("--generations", type=int)
    run.add_argument("--population", type=int)
    run.add_argument("--sigma", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--batch-size", type=int)
    run.add_argument("--pca-refresh", type=int)
    run.add_argument("--objective", choices=("global", "partial"))
    run.add_argument("--center-fitness", action="store_true", default=None,
                     help="subtract the population mean objective before each ES step")
    run.add_argument("--gp-population", type=int)
    run.add_argument("--gp-generations", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--log-level", default="WARNING")
    return parser


def config_from_args(args):
    overrides = dict(
        generations=args.generations,
        population=args.population,
        noise_std=args.sigma,
        learning_rate=args.alpha,
        batch_size=args.batch_size,
        pca_refresh=args.pca_refresh,
        objective=args.objective,
        center_fitness=args.center_fitness,
    )
    es = EsConfig.from_file(args.config, **overrides) if args.config else EsConfig().replace(**overrides)
    gp_cfg = asdict(GpConfig())
    if args.gp_population is not None:
        gp_cfg["population"] = args.gp_population
    if args.gp_generations is not None:
        gp_cfg["generations"] = args.gp_generations
    return ExperimentConfig(
        dataset=args.dataset,
        schema=args.schema,
        methods=tuple(m for m in args.method.split(",") if m.strip()),
        k=args.k,
        repeats=args.repeats,
        seed=args.seed,
        out=args.out,
        es=es,
        gp=GpConfig(**gp_cfg),
        workers=args.workers,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        records = run_experiment(cfg)
        emit_outputs(cfg, records, cfg.out)
    except (EspcaError, OSError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
