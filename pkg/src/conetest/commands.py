import json
import logging
import sys
import time

import click
import numpy as np

from conetest.cones import cone_from_dict, cone_to_dict, project
from conetest.config import CONE_NAMES, EXPERIMENTS, ConfigError, resolve_config
from conetest.experiments import NUMERICAL_ERRORS, ExperimentReport, build_cone, build_identifier, run_experiment
from conetest.gaussian import derive_seed
from conetest.lowerbound import (
    MonotoneFGPrior,
    OrthantSparsePrior,
    lower_bound_curve,
    projection_prior_for,
    simple_vs_simple_error,
)
from conetest.report import render_report, write_report

RADIUS_EXPERIMENTS = {
    "orthant": "orthant-scaling",
    "monotone": "monotone-scaling",
    "monotone-centered": "monotone-scaling",
    "circular": "circular",
    "subspace": "subspace-scaling",
    "product": "product-suboptimality",
    "k-ell": "product-suboptimality",
}


def _progress(quiet):
    if quiet:
        return lambda msg: None
    return lambda msg: click.echo(msg, err=True)


def _fail(status, code, message, field=None):
    payload = {"status": status}
    if field is not None:
        payload["field"] = field
    payload["message"] = message
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _exit_for(e):
    if isinstance(e, ConfigError):
        _fail("config_error", 2, e.message, e.field)
    if isinstance(e, FileNotFoundError):
        _fail("config_error", 2, str(e), "config")
    if isinstance(e, NUMERICAL_ERRORS):
        _fail("numerical_error", 3, str(e))
    click.echo(f"Error: {e}", err=True)
    sys.exit(1)


def _int_list(name, text):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(name, "must be comma-separated integers")


def _float_list(name, text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(name, "must be comma-separated numbers")


def _run_options(fn):
    options = [
        click.option("--dims", default=None, help="Comma-separated dimensions, e.g. '16,64,256'."),
        click.option("--sigma", type=float, default=None, help="Noise level (default 1)."),
        click.option("--rho", type=float, default=None, help="Target uniform error (default 0.1)."),
        click.option("--alpha", type=float, default=None, help="Circular half-angle in radians (default pi/4)."),
        click.option("--n", "n", type=int, default=None, help="Monte Carlo replicates per evaluation."),
        click.option("--seed", type=int, default=None, help="Base seed (default $CONETEST_SEED or 0)."),
        click.option("--out", default=None, help="Output path (default: stdout)."),
        click.option("--format", "fmt", default=None, type=click.Choice(["csv", "json"]), help="Output format."),
        click.option("--bisect-iters", type=int, default=None, help="Bisection halvings (default 8)."),
        click.option("--n-directions", type=int, default=None, help="Random alternative directions (default 4)."),
        click.option("--workers", type=int, default=None, help="Threads for Monte Carlo blocks (default 1)."),
        click.option("--pieces", default=None, help="Comma-separated piece counts for kpiece."),
        click.option("--ell", type=int, default=None, help="Circular block size of the K_ell product cone."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve(ctx, experiment, cone=None, **flags):
    pieces = flags.pop("pieces", None)
    return resolve_config(
        ctx.obj["config_path"],
        experiment=experiment,
        cone=cone,
        dims=_int_list("dims", flags.pop("dims", None)),
        pieces=_int_list("pieces", pieces),
        format=flags.pop("fmt", None),
        **flags,
    )


def _emit(report, cfg):
    if cfg.out:
        path = write_report(report, cfg.out, cfg.format)
        click.echo(f"Wrote {len(report.rows)} rows to {path}", err=True)
    else:
        click.echo(render_report(report, cfg.format), nl=False)


def _run(ctx, experiment, cone=None, **flags):
    try:
        cfg = _resolve(ctx, experiment, cone, **flags)
        report = run_experiment(cfg, log=_progress(ctx.obj["quiet"]))
        _emit(report, cfg)
    except Exception as e:
        _exit_for(e)


@click.group()
@click.option("--config", "config_path", default=None, type=click.Path(), help="YAML experiment config; flags override it.")
@click.option("--verbose", is_flag=True, help="Log library progress at INFO level.")
@click.option("--quiet", is_flag=True, help="Suppress progress lines on stderr.")
@click.pass_context
def cli(ctx, config_path, verbose, quiet):
    """Cone-vs-cone Gaussian hypothesis testing: geometry, radii and lower bounds."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(name)s %(levelname)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["quiet"] = quiet


@cli.command("project")
@click.option("--cone", "cone_name", default=None, type=click.Choice(CONE_NAMES), help="Named cone.")
@click.option("--cone-json", default=None, type=click.Path(exists=True), help="Cone description as JSON.")
@click.option("--dim", type=int, default=None, help="Dimension for a named cone (default: length of --x).")
@click.option("--alpha", type=float, default=np.pi / 4, help="Circular half-angle in radians.", show_default=True)
@click.option("--ell", type=int, default=1, help="Circular block size of the K_ell product cone.", show_default=True)
@click.option("--x", "x_text", required=True, help="Comma-separated point to project.")
def project_cmd(cone_name, cone_json, dim, alpha, ell, x_text):
    """Project a point onto a cone and print the result as JSON."""
    try:
        x = np.array(_float_list("x", x_text))
        if cone_json:
            with open(cone_json) as f:
                cone = cone_from_dict(json.load(f))
        elif cone_name:
            cone = build_cone(cone_name, dim or x.size, alpha, ell)
        else:
            raise ConfigError("cone", "give --cone or --cone-json")
        proj = project(cone, x)
        click.echo(json.dumps({"cone": cone_to_dict(cone), "x": x.tolist(), "projection": proj.tolist(),
                               "norm": float(np.linalg.norm(proj))}))
    except Exception as e:
        _exit_for(e)


@cli.command()
@click.option("--cone", default="monotone", type=click.Choice(CONE_NAMES), help="Cone to summarize.", show_default=True)
@_run_options
@click.pass_context
def geometry(ctx, cone, **flags):
    """Width, mean projection, δ²_LR and δ²_OPT for each dimension."""
    _run(ctx, "geometry-report", cone, **flags)


@cli.command()
@click.option("--cone", default="orthant", type=click.Choice(sorted(RADIUS_EXPERIMENTS)), help="Cone of alternatives.",
              show_default=True)
@click.option("--curve", is_flag=True,
              help="Emit one row per error-curve evaluation instead of one per dimension.")
@_run_options
@click.pass_context
def radius(ctx, cone, curve, **flags):
    """Estimated GLRT critical radius for each dimension."""
    _run(ctx, RADIUS_EXPERIMENTS[cone], cone if cone == "monotone-centered" else None, curve=curve or None, **flags)


@cli.command("lower-bound")
@click.option("--prior", default="orthant-sparse", type=click.Choice(["orthant-sparse", "monotone-fg", "projection"]),
              help="Prior over the alternative.", show_default=True)
@click.option("--cone", default="circular", type=click.Choice(CONE_NAMES), help="Cone for the projection prior.",
              show_default=True)
@click.option("--eps", "eps_text", default="0,0.5,1,1.5,2,3,4", help="Comma-separated radii.", show_default=True)
@click.option("--centered", is_flag=True, help="Center the monotone prior (tests span(1) against M).")
@click.option("--remainder", default="first", type=click.Choice(["first", "last"]),
              help="Monotone block that absorbs leftover coordinates.", show_default=True)
@_run_options
@click.pass_context
def lower_bound(ctx, prior, cone, eps_text, centered, remainder, **flags):
    """Lower-bound curve: χ² moment and error lower bound against ε."""
    try:
        cfg = _resolve(ctx, "lower-bounds", None, **flags)
        epsilons = _float_list("eps", eps_text)
        if not epsilons or any(e < 0 for e in epsilons):
            raise ConfigError("eps", "nonnegative values required")
        log = _progress(ctx.obj["quiet"])
        started = time.time()
        rows = []
        for d in cfg.dims:
            seed = derive_seed(cfg.seed, d)
            if prior == "orthant-sparse":
                sampler = OrthantSparsePrior(d)
            elif prior == "monotone-fg":
                sampler = MonotoneFGPrior(d, centered=centered, remainder=remainder)
            else:
                sampler = projection_prior_for(build_cone(cone, d, cfg.alpha, cfg.ell), n=cfg.n, seed=seed)
            log(f"[HEAD] {prior} d={d}")
            for point in lower_bound_curve(sampler, epsilons, n_pairs=cfg.n, seed=seed, sigma=cfg.sigma):
                row = {"prior": prior, "d": d}
                row.update(point.to_dict())
                row["simple_lb"] = simple_vs_simple_error(point.epsilon, cfg.sigma)
                rows.append(row)
        report = ExperimentReport("lower-bound", rows, {
            "config": cfg.to_dict(),
            "prior": prior,
            "build": build_identifier(),
            "wall_time_s": round(time.time() - started, 3),
        })
        _emit(report, cfg)
    except Exception as e:
        _exit_for(e)


@cli.command()
@click.argument("name", type=click.Choice(EXPERIMENTS))
@click.option("--cone", default=None, type=click.Choice(CONE_NAMES), help="Cone for concentration/geometry studies.")
@_run_options
@click.pass_context
def experiment(ctx, name, cone, **flags):
    """Run a registered scaling study by NAME."""
    _run(ctx, name, cone, **flags)
