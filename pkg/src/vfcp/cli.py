"""Command-line surface: gen / compress / decompress / verify / track / stats.

Field files are headerless little-endian float32 raw binaries, one per
component, with a JSON metadata sidecar carrying dims and spacing.  A field
"prefix" P maps to P.u.f32, P.v.f32 and P.json.
"""

from __future__ import annotations

import sys
import time
from dataclasses import fields as dc_fields
from pathlib import Path

import click

from . import codec, tracking
from .codec import Archive, Config
from .field import (SYNTHETIC_KINDS, FieldError, FieldSeries, gen_synthetic,
                    load_meta, load_raw, save_raw)

_DEFAULTS = Config()


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


def _parse_dims(s: str):
    try:
        h, w, t = (int(x) for x in s.lower().split("x"))
    except ValueError:
        _fail(f"bad --dims {s!r}, expected HxWxT")
    return h, w, t


def _paths(prefix: str):
    p = Path(prefix)
    return p.with_suffix(p.suffix + ".u.f32"), \
        p.with_suffix(p.suffix + ".v.f32"), p.with_suffix(p.suffix + ".json")


def _load_field(prefix: str) -> FieldSeries:
    up, vp, mp = _paths(prefix)
    for path in (up, vp, mp):
        if not path.exists():
            _fail(f"missing field file {path}")
    m = load_meta(mp)
    return load_raw(up, vp, m["H"], m["W"], m["T"], m["dx"], m["dy"], m["dt"])


def codec_options(fn):
    """Codec flags; every default comes straight from Config."""
    opts = [
        click.option("--predictor", type=click.Choice(codec.PREDICTORS),
                     default=_DEFAULTS.predictor, show_default=True),
        click.option("--bx", type=int, default=_DEFAULTS.bx, show_default=True,
                     help="block width for mode selection"),
        click.option("--by", type=int, default=_DEFAULTS.by, show_default=True,
                     help="block height for mode selection"),
        click.option("--stride", type=int, default=_DEFAULTS.stride,
                     show_default=True, help="scoring subsample stride"),
        click.option("--theta", type=float, default=_DEFAULTS.theta,
                     show_default=True, help="relative-improvement gate"),
        click.option("--lam", type=float, default=_DEFAULTS.lam,
                     show_default=True, help="overflow penalty weight"),
        click.option("--radius", type=int, default=_DEFAULTS.radius,
                     show_default=True, help="residual index range"),
        click.option("--d-max", type=float, default=_DEFAULTS.d_max,
                     show_default=True, help="RK2 displacement cap (cells)"),
        click.option("--n-max", type=int, default=_DEFAULTS.n_max,
                     show_default=True, help="substep cap"),
        click.option("--backend", type=click.Choice(("zlib", "identity")),
                     default=_DEFAULTS.backend, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(kw, stats=False) -> Config:
    names = {f.name for f in dc_fields(Config)}
    return Config(stats=stats, **{k: v for k, v in kw.items() if k in names})


def _eps_options(fn):
    fn = click.option("--eps", type=float, default=None,
                      help="absolute error bound (field units)")(fn)
    fn = click.option("--eps-rel", type=float, default=None,
                      help="error bound as a fraction of the value range")(fn)
    return fn


def _resolve_eps(eps, eps_rel):
    if (eps is None) == (eps_rel is None):
        _fail("exactly one of --eps / --eps-rel is required")
    if eps is not None:
        return eps, False
    return eps_rel, True


@click.group()
def main():
    """Error-bounded compressor for 2D time-varying vector fields that
    preserves every critical-point trajectory exactly."""


@main.command()
@click.option("--kind", type=click.Choice(SYNTHETIC_KINDS), required=True)
@click.option("--dims", required=True, help="HxWxT")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dx", type=float, default=1.0, show_default=True)
@click.option("--dy", type=float, default=1.0, show_default=True)
@click.option("--dt", type=float, default=1.0, show_default=True)
@click.option("--out", "prefix", required=True, help="output field prefix")
def gen(kind, dims, seed, dx, dy, dt, prefix):
    """Generate a synthetic field and write raw components + sidecar."""
    H, W, T = _parse_dims(dims)
    try:
        f = gen_synthetic(kind, H, W, T, seed=seed, dx=dx, dy=dy, dt=dt)
    except FieldError as e:
        _fail(str(e))
    up, vp, mp = _paths(prefix)
    save_raw(f, up, vp, mp)
    click.echo(f"wrote {up} {vp} {mp}")


@main.command()
@click.option("--input", "prefix", required=True, help="field prefix")
@click.option("--out", "out_path", required=True, help="archive path")
@_eps_options
@codec_options
def compress(prefix, out_path, eps, eps_rel, **kw):
    """Compress a field under an error bound; print CR/PSNR/timing."""
    e, rel = _resolve_eps(eps, eps_rel)
    f = _load_field(prefix)
    cfg = _config(kw)
    try:
        t0 = time.perf_counter()
        a = codec.compress(f, e, cfg, relative=rel)
        blob = a.to_bytes()
        t1 = time.perf_counter()
    except (FieldError, ValueError) as err:
        _fail(str(err))
    Path(out_path).write_bytes(blob)
    recon = codec.decompress(a)
    from .field import psnr
    q = psnr(f, recon, len(blob))
    click.echo(f"cr={q.cr:.6g}")
    click.echo(f"psnr={q.psnr_joint:.6g}")
    click.echo(f"max_abs_err={q.max_abs_err:.6g}")
    click.echo(f"seconds={t1 - t0:.3f}")


@main.command()
@click.option("--archive", "arc_path", required=True)
@click.option("--out", "prefix", required=True, help="output field prefix")
def decompress(arc_path, prefix):
    """Decode an archive back to raw field files."""
    try:
        a = Archive.load(arc_path)
        f = codec.decompress(a)
    except (ValueError, OSError) as err:
        _fail(str(err))
    up, vp, mp = _paths(prefix)
    save_raw(f, up, vp, mp)
    click.echo(f"wrote {up} {vp} {mp}")


@main.command()
@click.option("--input", "prefix", required=True, help="original field prefix")
@click.option("--archive", "arc_path", required=True)
def verify(prefix, arc_path):
    """Check predicate and trajectory preservation of an archive."""
    f = _load_field(prefix)
    try:
        a = Archive.load(arc_path)
        recon = codec.decompress(a)
        report = tracking.verify(f, recon, Path(arc_path).stat().st_size,
                                 scale=a.scale)
    except (ValueError, OSError, tracking.TopologyError) as err:
        _fail(str(err))
    for line in report.lines():
        click.echo(line)
    if not report.ok:
        sys.exit(2)


@main.command()
@click.option("--input", "prefix", required=True, help="field prefix")
@click.option("--out", "csv_path", required=True, help="trajectory CSV path")
def track(prefix, csv_path):
    """Extract critical-point trajectories of a field to CSV."""
    from .field import to_fixed
    f = _load_field(prefix)
    try:
        g = tracking.extract_trajectories(to_fixed(f), f.dx, f.dy, f.dt)
    except tracking.TopologyError as err:
        _fail(str(err))
    tracking.write_trajectory_csv(g, csv_path)
    click.echo(f"components={g.n_components}")
    click.echo(f"wrote {csv_path}")


@main.command()
@click.option("--input", "prefix", required=True, help="field prefix")
@click.option("--pmf-out", required=True, help="PMF/CCDF CSV path")
@click.option("--runs-out", required=True, help="run-length CCDF CSV path")
@_eps_options
@codec_options
def stats(prefix, pmf_out, runs_out, eps, eps_rel, **kw):
    """Compress with diagnostics and write residual distribution CSVs."""
    e, rel = _resolve_eps(eps, eps_rel)
    f = _load_field(prefix)
    cfg = _config(kw, stats=True)
    try:
        a = codec.compress(f, e, cfg, relative=rel)
    except (FieldError, ValueError) as err:
        _fail(str(err))
    rs = tracking.residual_stats(a.stats.symbols, cfg.radius)
    rs.write_pmf_csv(pmf_out)
    rs.write_runs_csv(runs_out)
    click.echo(f"overflow_rate={rs.overflow_rate:.6g}")
    click.echo(f"run_mean={rs.run_mean:.6g}")
    click.echo(f"wrote {pmf_out} {runs_out}")


if __name__ == "__main__":
    main()
