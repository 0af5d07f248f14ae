"""Command-line interface.

    hypocert kalman zoo:sugimoto
    hypocert analyze zoo:timoshenko --param a=1
    hypocert verify zoo:toy2x2 --format json --csv sweep.csv
    hypocert zoo list
    hypocert zoo emit timoshenko > timo.json

Exit status: 0 on success or CERTIFIED, 1 on a FAILED verdict, 2 on bad input.
"""
from __future__ import annotations

import json
import sys
from fractions import Fraction

import click

from . import report as rp
from .errors import InvalidSystem
from .kalman import kalman_certificate
from .zoo import emit_system, load_system, zoo_file, zoo_names

__all__ = ["main"]

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


def _params(values: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for item in values:
        if "=" not in item:
            raise click.BadParameter(f"expected name=value, got {item!r}", param_hint="--param")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _fraction(ctx, param, value):
    if value is None:
        return None
    try:
        f = Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"not a rational number: {value!r}") from None
    if f <= 0:
        raise click.BadParameter("must be positive")
    return f


def _load(ref: str, params: tuple[str, ...]):
    try:
        sf = load_system(ref)
        overrides = _params(params)
        sf.to_spec(overrides)
    except InvalidSystem as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    return sf, overrides


def _emit(rep: rp.Report, fmt: str, csv_path: str | None) -> None:
    click.echo(rep.to_json() if fmt == "json" else rep.render_text())
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            fh.write(rep.to_csv())


def _common(f):
    f = click.option("--param", "params", multiple=True, metavar="NAME=VALUE",
                     help="Override a parameter of the system file.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
                     show_default=True)(f)
    f = click.option("--kmax", type=click.IntRange(min=0), default=None,
                     help="Largest Kalman order tried (default n-1).")(f)
    return f


def _options(kmax, xi_min_exp=8, xi_max_exp=20, eps_max=None, eps_min=None, seed=0):
    opts = rp.Options(kmax=kmax, xi_min_exp=xi_min_exp, xi_max_exp=xi_max_exp, seed=seed)
    if eps_max is not None:
        opts.eps_max = eps_max
    if eps_min is not None:
        opts.eps_min = eps_min
    if opts.xi_max_exp - opts.xi_min_exp < 1:
        raise click.BadParameter("need --xi-max-exp > --xi-min-exp")
    try:
        opts.eps_sweep()
    except ValueError:
        raise click.BadParameter("no sweep value lies in [--eps-min, --eps-max]") from None
    return opts


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Decay-rate certificates for partially dissipative hyperbolic systems."""


@main.command()
@click.argument("system")
@_common
def kalman(system, params, fmt, kmax):
    """Kalman order K, exponents alpha and beta, exceptional frequencies."""
    sf, overrides = _load(system, params)
    cert = kalman_certificate(sf.to_spec(overrides), kmax)
    if fmt == "json":
        click.echo(json.dumps(cert.as_dict(), indent=2, sort_keys=True))
    elif cert.holds:
        click.echo(f"K={cert.K} alpha={cert.alpha} beta={cert.beta}")
        click.echo("generic ranks: " + " ".join(map(str, cert.generic_ranks)))
    else:
        click.echo("Kalman condition fails")
        click.echo("generic ranks: " + " ".join(map(str, cert.generic_ranks)))
        for r in cert.exceptional_points:
            click.echo(f"  rank drop at xi ~ {r.approx:.12g}")
    sys.exit(EXIT_OK if cert.holds else EXIT_FAILED)


@main.command()
@click.argument("system")
@_common
@click.option("--eps-max", callback=_fraction, default=None, help="Largest epsilon tried.")
@click.option("--eps-min", callback=_fraction, default=None, help="Smallest epsilon tried.")
def analyze(system, params, fmt, kmax, eps_max, eps_min):
    """Tree paths, improved exponents and Lyapunov functionals (no numerics)."""
    sf, overrides = _load(system, params)
    rep = rp.analyze(sf, overrides, _options(kmax, eps_max=eps_max, eps_min=eps_min))
    _emit(rep, fmt, None)
    sys.exit(EXIT_FAILED if rep.verdict == rp.FAILED else EXIT_OK)


@main.command()
@click.argument("system")
@_common
@click.option("--xi-min-exp", type=int, default=8, show_default=True,
              help="Spectral fits use |xi| = 2^j (HF) and 2^-j (LF) from this j ...")
@click.option("--xi-max-exp", type=int, default=20, show_default=True, help="... to this j.")
@click.option("--eps-max", callback=_fraction, default=None)
@click.option("--eps-min", callback=_fraction, default=None)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the random monitor states.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Write the xi sweeps to this CSV file.")
def verify(system, params, fmt, kmax, xi_min_exp, xi_max_exp, eps_max, eps_min, seed, csv_path):
    """analyze plus spectral exponent fits and Lyapunov monitoring."""
    sf, overrides = _load(system, params)
    opts = _options(kmax, xi_min_exp, xi_max_exp, eps_max, eps_min, seed)
    rep = rp.run_verify(sf, overrides, opts)
    _emit(rep, fmt, csv_path)
    sys.exit(EXIT_FAILED if rep.verdict == rp.FAILED else EXIT_OK)


@main.group()
def zoo():
    """Built-in example systems."""


@zoo.command("list")
def zoo_list():
    for name in zoo_names():
        click.echo(name)


@zoo.command("emit")
@click.argument("name")
def zoo_emit(name):
    try:
        sf = zoo_file(name)
    except InvalidSystem as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    click.echo(emit_system(sf), nl=False)


if __name__ == "__main__":  # pragma: no cover
    main()
