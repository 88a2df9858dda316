"""``wvstack`` command-line front end.

Every subcommand reads and writes under one workspace directory::

    data/                  simulated dataset (manifests, slc/, geom/, truth.csv, aoi.json)
    index.jsonl            vignette index
    stacks/<id>/           coregistered stacks (manifest.json, rasters, stage1/, qa/)
    coregister/<id>/       steps 1-2 only
    geocoded/<id>.*        single-scene geocoding
    tseries/<id>/          deformation products
    composites/<id>.png
    reports/<command>.json run reports (effective configuration + QA)
"""

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import shutil
import sys
from importlib import resources

import numpy as np

from . import catalog, dataset, insar, simulator
from . import stack as stk
from .errors import DataError, NumericalError, StackTooSmall, UsageError, WvstackError
from .geometry.geocode import geocode
from .geometry.io import read_text, write_raster, write_text
from .timeutil import format_time, parse_time

log = logging.getLogger("wvstack")


@dataclasses.dataclass
class RunConfig:
    workspace: str = "."
    posting: float = 2.5
    analysis_posting: float = 5.0
    window: int = 1024
    cutoff: float = 0.5
    k: int = 3
    seed: int = 0
    jobs: int = 1
    looks: tuple = (5, 5)
    max_baseline_days: float = 48.0
    min_overlap: float = 0.5
    height: float = 0.0
    allow_small_window: bool = False

    def validate(self):
        ratio = self.analysis_posting / self.posting
        if self.posting <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise UsageError("analysis posting must be a whole multiple of the posting")
        if self.window < 1024:
            if not self.allow_small_window:
                raise UsageError("correlation window below 1024 px requires allow_small_window")
            log.warning("correlation window %d px is below the 1024 px minimum", self.window)
        if not 0 <= self.cutoff <= 1:
            raise UsageError("coherence cutoff must be in [0, 1]")
        if self.k < 1 or self.jobs < 1:
            raise UsageError("k and jobs must be positive")
        return self

    @property
    def factor(self):
        return int(round(self.analysis_posting / self.posting))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("workspace")
        d["looks"] = list(self.looks)
        return d


def load_config(args):
    cfg = RunConfig()
    if args.config:
        with open(args.config, "rb") as f:
            doc = json.loads(f.read().decode("utf-8"))
        doc = doc.get("config", doc)  # a run report works as a config file
        fields = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(doc) - fields
        if unknown:
            raise UsageError(f"unknown configuration keys {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **doc)
    cfg.looks = tuple(int(x) for x in cfg.looks)
    ws = args.workspace or os.environ.get("WVSTACK_WORKSPACE") or cfg.workspace
    cfg = dataclasses.replace(cfg, workspace=ws)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


# --- helpers ----------------------------------------------------------------

def _ws(cfg, *parts):
    return os.path.join(cfg.workspace, *parts)


def _report(cfg, command, arguments, results, artifacts=()):
    rel = sorted(os.path.relpath(a, cfg.workspace) for a in artifacts)
    write_text(_ws(cfg, "reports", f"{command}.json"),
               {"command": command, "config": cfg.to_dict(), "arguments": arguments,
                "results": results, "artifacts": rel})


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def read_aoi(spec, cfg):
    """AOI from a JSON file (``{"aoi": ring}`` or a bare ring) or a ``minlon,minlat,maxlon,maxlat`` box."""
    if spec is None:
        path = _ws(cfg, "data", "aoi.json")
        if not os.path.exists(path):
            raise UsageError("no --aoi given and the workspace has no data/aoi.json")
        spec = path
    if os.path.exists(spec):
        doc = read_text(spec)
        ring = doc["aoi"] if isinstance(doc, dict) else doc
        return catalog.as_polygon(ring)
    try:
        x0, y0, x1, y1 = (float(v) for v in spec.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot read AOI {spec!r}") from exc
    return catalog.as_polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def open_index(cfg):
    path = _ws(cfg, "index.jsonl")
    if os.path.exists(path):
        return catalog.VignetteIndex.load(path)
    index = catalog.VignetteIndex()
    for m in dataset.load_manifests(_ws(cfg, "data")):
        index.add_manifest(m)
    return index


def _interval(args):
    start = parse_time(args.start) if args.start else None
    end = parse_time(args.end) if args.end else None
    return None if start is None and end is None else (start, end)


def _choose_stack(cfg, aoi, key=None):
    # min_count 1 so that a single rendered acquisition reaches the StackTooSmall check
    groups = catalog.group_stacks(open_index(cfg).query(aoi), cfg.min_overlap, min_count=1)
    rendered = []
    for sk, members in groups:
        recs = [r for r in members if not r.raster_uri.startswith("sim://")]
        name = f"T{sk.relative_orbit:03d}{sk.pass_direction[0].upper()}_{sk.beam}"
        if key and key != name:
            continue
        rendered.append((len(recs), name, recs))
    if not rendered:
        raise UsageError("no stack matches the AOI" + (f" and key {key}" if key else ""))
    rendered.sort(key=lambda x: (-x[0], x[1]))
    return rendered[0][2]


def _stack_dir(cfg, path=None):
    if path:
        return path
    root = _ws(cfg, "stacks")
    found = sorted(d for d in os.listdir(root) if os.path.exists(os.path.join(root, d, "manifest.json"))) \
        if os.path.isdir(root) else []
    if not found:
        raise UsageError("no stack in the workspace; run `wvstack stack` first or pass --stack")
    return os.path.join(root, found[0])


def _loader(cfg):
    root = _ws(cfg, "data")
    return lambda rec: dataset.load_scene(root, rec)


def _savefig(fig, path):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": None})


def _plot_offsets(offsets, times, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 3.5))
    days = [(t - times[0]).total_seconds() / 86400.0 for t in times]
    ax.plot(days, [o.dt_azimuth for o in offsets], "o", label="along-track (ms)")
    ax.plot(days, [o.d_range for o in offsets], "s", label="slant range (m)")
    ax.axhline(0, color="0.6", lw=0.8)
    ax.set_xlabel("days since reference")
    ax.set_ylabel("offset")
    ax.legend(frameon=False)
    fig.tight_layout()
    _savefig(fig, path)
    plt.close(fig)


def _plot_tseries(res, table, path_hist, path_map):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    days = [(t - res.epochs[0]).total_seconds() / 86400.0 for t in res.epochs]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k in insar.sample_points(len(res.series), 5):
        s = res.series[int(k)]
        ax.errorbar(days, s.los_mm, yerr=s.sigma_mm, marker="o", ms=3, capsize=2)
    ax.set_xlabel("days since first epoch")
    ax.set_ylabel("LOS displacement (mm)")
    fig.tight_layout()
    _savefig(fig, path_hist)
    plt.close(fig)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    sc = ax.scatter(table["east"], table["north"], c=table["cumulative_mm"], s=1, cmap="RdBu",
                    rasterized=True)
    fig.colorbar(sc, ax=ax, label="cumulative LOS (mm)")
    ax.set_aspect("equal")
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    fig.tight_layout()
    _savefig(fig, path_map)
    plt.close(fig)


# --- subcommands --------------------------------------------------------------

def cmd_simulate(cfg, args):
    if args.spec:
        with open(args.spec, "rb") as f:
            doc = json.loads(f.read().decode("utf-8"))
    else:
        doc = json.loads(resources.files("wvstack").joinpath("data/demo_spec.json").read_text("utf-8"))
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = simulator.SimulationSpec.from_dict(doc)
    out = _ws(cfg, "data")
    if os.path.exists(os.path.join(out, "spec.json")):
        if not args.force:
            raise UsageError(f"{out} already holds a dataset; use --force to replace it")
        shutil.rmtree(out)
    result = simulator.simulate(spec, out)
    arts = [os.path.join(out, "spec.json")]
    _report(cfg, "simulate", {"spec": args.spec or "<bundled demo>"},
            {"planned_vignettes": len(result["plan"]), "rendered": len(result["rendered"]),
             "seed": spec.seed}, arts)
    print(f"planned {len(result['plan'])} vignettes, rendered {len(result['rendered'])} into {out}")


def cmd_index(cfg, args):
    root = args.data or _ws(cfg, "data")
    manifests = dataset.load_manifests(root)
    index = catalog.VignetteIndex()
    flags = {}
    for m in manifests:
        index.add_manifest(m)
        if m.flags:
            flags[m.granule_id] = list(m.flags)
    path = _ws(cfg, "index.jsonl")
    index.save(path)
    _report(cfg, "index", {"data": root}, {"granules": len(manifests), "vignettes": len(index),
                                           "flagged_granules": flags}, [path])
    print(f"indexed {len(index)} vignettes from {len(manifests)} granules")


def cmd_query(cfg, args):
    aoi = read_aoi(args.aoi, cfg)
    hits = open_index(cfg).query(aoi, _interval(args), beam=args.beam, relative_orbit=args.track,
                                 pass_direction=args.pass_direction)
    path = _ws(cfg, "query.csv")
    os.makedirs(cfg.workspace, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["vignette_id", "sensing_start", "beam", "relative_orbit", "pass_direction"])
        for r in hits:
            w.writerow([r.vignette_id, format_time(r.sensing_start), r.beam, r.relative_orbit,
                        r.pass_direction])
    _report(cfg, "query", {"aoi": args.aoi, "start": args.start, "end": args.end, "beam": args.beam,
                           "track": args.track, "pass": args.pass_direction},
            {"matches": len(hits)}, [path])
    print(f"{len(hits)} matching vignettes")


def cmd_coverage(cfg, args):
    doc = read_text(args.regions)
    rows = catalog.coverage_stats(open_index(cfg), {k: v for k, v in sorted(doc.items())})
    path = _ws(cfg, "coverage.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["region", "count"])
        w.writerows(rows)
    _report(cfg, "coverage", {"regions": args.regions}, dict(rows), [path])
    for name, n in rows:
        print(f"{name}\t{n}")


def cmd_stacks(cfg, args):
    aoi = read_aoi(args.aoi, cfg)
    found = catalog.discover_stacks(open_index(cfg), aoi, cfg.min_overlap, args.min_count)
    out = [{"relative_orbit": k.relative_orbit, "beam": k.beam, "pass_direction": k.pass_direction,
            "members": [r.vignette_id for r in members]} for k, members in found]
    path = _ws(cfg, "stacks.json")
    write_text(path, out)
    _report(cfg, "stacks", {"aoi": args.aoi, "min_count": args.min_count},
            {"stacks": len(out), "sizes": [len(s["members"]) for s in out]}, [path])
    for s in out:
        print(f"T{s['relative_orbit']:03d}{s['pass_direction'][0].upper()}_{s['beam']}\t{len(s['members'])}")


def cmd_geocode(cfg, args):
    index = open_index(cfg)
    if args.vignette not in index:
        raise UsageError(f"unknown vignette {args.vignette!r}")
    rec = index.get(args.vignette)
    grid = stk.aoi_grid(read_aoi(args.aoi, cfg), cfg.posting)
    slc, geom, orbit = _loader(cfg)(rec)
    ras = geocode(slc, geom, orbit, grid, cfg.height)
    stem = _ws(cfg, "geocoded", rec.vignette_id)
    write_raster(stem, ras, {"vignette_id": rec.vignette_id, "stage": 1})
    cover = float(ras.mask.mean())
    _report(cfg, "geocode", {"vignette": args.vignette, "aoi": args.aoi},
            {"grid_shape": list(grid.shape), "valid_fraction": cover},
            [stem + ".json", stem + ".slc", stem + ".mask"])
    print(f"geocoded {rec.vignette_id}: {grid.n_north}x{grid.n_east} cells, {cover:.1%} valid")


def cmd_coregister(cfg, args):
    aoi = read_aoi(args.aoi, cfg)
    members = _choose_stack(cfg, aoi, args.key)
    if len(members) < 2:
        raise StackTooSmall(f"stack has {len(members)} rendered member(s); at least 2 are needed")
    out = _ws(cfg, "coregister", stk.stack_id_for(min(members, key=lambda r: r.sensing_start)))
    co = stk.coregister_members(members, aoi, cfg.posting, load=_loader(cfg), out_dir=out,
                                window=cfg.window, k=cfg.k, height=cfg.height, jobs=cfg.jobs,
                                allow_small_window=cfg.allow_small_window)
    _plot_offsets(co.offsets, [s[0].sensing_start for s in co.scenes], os.path.join(out, "qa", "offsets.png"))
    _report(cfg, "coregister", {"aoi": args.aoi, "key": args.key},
            {"members": co.ids, "reference": co.reference, "n_edges": len(co.edges),
             "offsets": {o.scene: {"dt_azimuth_ms": o.dt_azimuth, "d_range_m": o.d_range,
                                   "residual_m": o.residual} for o in co.offsets}},
            [os.path.join(out, "qa", n) for n in ("edges.csv", "offsets.csv", "offsets.png")])
    for o in co.offsets:
        print(f"{o.scene}\t{o.dt_azimuth:+.3f} ms\t{o.d_range:+.3f} m")


def cmd_stack(cfg, args):
    aoi = read_aoi(args.aoi, cfg)
    members = _choose_stack(cfg, aoi, args.key)
    if len(members) < 2:
        raise StackTooSmall(f"stack has {len(members)} rendered member(s); at least 2 are needed")
    out = _ws(cfg, "stacks", stk.stack_id_for(min(members, key=lambda r: r.sensing_start)))
    man = stk.generate_stack(members, aoi, cfg.posting, load=_loader(cfg), out_dir=out,
                             window=cfg.window, k=cfg.k, height=cfg.height, jobs=cfg.jobs,
                             keep_stage1=not args.drop_stage1,
                             allow_small_window=cfg.allow_small_window)
    problems = stk.check_conformance(out)
    if problems:
        raise WvstackError("stack failed conformance: " + "; ".join(problems))
    _plot_offsets([m.offset for m in man.members], [m.sensing_start for m in man.members],
                  os.path.join(out, "qa", "offsets.png"))
    arts = [os.path.join(out, "manifest.json")] + [
        os.path.join(out, "qa", n) for n in ("edges.csv", "offsets.csv", "residuals.csv", "offsets.png")]
    _report(cfg, "stack", {"aoi": args.aoi, "key": args.key, "drop_stage1": args.drop_stage1},
            {"stack_id": man.stack_id, "directory": os.path.relpath(out, cfg.workspace),
             "reference": man.reference, **man.qa}, arts)
    print(f"stack {man.stack_id}: {len(man.members)} members, max residual "
          f"{man.qa['max_residual_shift_px']:.3f} px")


def cmd_tseries(cfg, args):
    sdir = _stack_dir(cfg, args.stack)
    man = stk.StackManifest.load(sdir)
    res = insar.stack_time_series(man, cfg.factor, cfg.looks, cfg.cutoff, cfg.max_baseline_days, cfg.jobs)
    out = _ws(cfg, "tseries", man.stack_id)
    os.makedirs(out, exist_ok=True)
    arts = []
    if len(res.series):
        table = insar.cumulative_deformation(res.series, res.grid)
        insar.write_points(os.path.join(out, "points.csv"), table)
        names = insar.write_series_files(os.path.join(out, "series"), res.series, args.series_count)
        _plot_tseries(res, table, os.path.join(out, "history.png"), os.path.join(out, "points.png"))
        arts += [os.path.join(out, n) for n in ("points.csv", "history.png", "points.png")]
        arts += [os.path.join(out, "series", n) for n in names]
        cum = table["cumulative_mm"]
        stats = {"min_cumulative_mm": float(cum.min()), "max_cumulative_mm": float(cum.max()),
                 "median_sigma_last_mm": float(np.median(res.series.sigma_mm[:, -1]))}
    else:
        stats = {}
    with open(os.path.join(out, "failed.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["row", "col", "rms_misclosure_rad"])
        w.writerows(res.series.failed)
    arts.append(os.path.join(out, "failed.csv"))
    coh = [float(i.coherence[i.mask].mean()) for i in res.interferograms if i.mask.any()]
    _report(cfg, "tseries", {"stack": os.path.relpath(sdir, cfg.workspace), "series_count": args.series_count},
            {"stack_id": man.stack_id, "analysis_posting_m": res.grid.posting,
             "interferograms": len(res.interferograms),
             "mean_coherence": _json_safe(float(np.mean(coh)) if coh else float("nan")),
             "selected_points": len(res.points), "selected_fraction": res.points.fraction,
             "inverted_points": len(res.series), "unwrap_failures": len(res.series.failed), **stats},
            arts)
    print(f"{len(res.series)} points on a {res.grid.posting:g} m grid "
          f"({res.points.fraction:.1%} of valid cells), {len(res.series.failed)} unwrap failures")


def cmd_composite(cfg, args):
    sdir = _stack_dir(cfg, args.stack)
    man = stk.StackManifest.load(sdir)
    if args.dates:
        dates = args.dates.split(",")
    else:
        ids = man.ids
        if len(ids) < 3:
            raise UsageError("composite needs a stack with at least three members")
        dates = [ids[0], ids[len(ids) // 2], ids[-1]]
    lo, hi = (float(v) for v in args.stretch.split(","))
    img = stk.rgb_composite(man, dates, (lo, hi))
    path = _ws(cfg, "composites", f"{man.stack_id}.png")
    stk.write_png(path, img)
    _report(cfg, "composite", {"stack": os.path.relpath(sdir, cfg.workspace), "dates": dates,
                               "stretch": [lo, hi]}, {"shape": list(img.shape)}, [path])
    print(f"wrote {path}")


# --- entry point ------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); a run report is accepted too")
    common.add_argument("--workspace", help="workspace directory (default: $WVSTACK_WORKSPACE or .)")
    common.add_argument("--jobs", type=int, help="worker cap")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wvstack", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    s.add_argument("--spec", help="simulation spec (JSON); default: bundled demo")
    s.add_argument("--force", action="store_true", help="replace an existing dataset")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("index", parents=[common], help="index granule manifests")
    s.add_argument("--data", help="dataset directory (default: <workspace>/data)")
    s.set_defaults(fn=cmd_index)

    s = sub.add_parser("query", parents=[common], help="spatio-temporal query")
    s.add_argument("--aoi", help="AOI JSON file or minlon,minlat,maxlon,maxlat")
    s.add_argument("--start")
    s.add_argument("--end")
    s.add_argument("--beam", choices=["WV1", "WV2"])
    s.add_argument("--track", type=int)
    s.add_argument("--pass", dest="pass_direction", choices=["ascending", "descending"])
    s.set_defaults(fn=cmd_query)

    s = sub.add_parser("coverage", parents=[common], help="vignette counts per region")
    s.add_argument("--regions", required=True, help="JSON object mapping names to lon/lat rings")
    s.set_defaults(fn=cmd_coverage)

    s = sub.add_parser("stacks", parents=[common], help="discover repeat-pass stacks")
    s.add_argument("--aoi")
    s.add_argument("--min-count", type=int, default=2)
    s.set_defaults(fn=cmd_stacks)

    s = sub.add_parser("geocode", parents=[common], help="geocode one vignette onto the AOI grid")
    s.add_argument("--vignette", required=True)
    s.add_argument("--aoi")
    s.set_defaults(fn=cmd_geocode)

    for name, fn, text in (("coregister", cmd_coregister, "steps 1-2: offsets only"),
                           ("stack", cmd_stack, "steps 1-3: coregistered stack")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--aoi")
        s.add_argument("--key", help="stack key such as T038D_WV1 (default: largest stack)")
        if name == "stack":
            s.add_argument("--drop-stage1", action="store_true", help="delete stage-1 rasters")
        s.set_defaults(fn=fn)

    s = sub.add_parser("tseries", parents=[common], help="deformation time series from a stack")
    s.add_argument("--stack", help="stack directory (default: first under <workspace>/stacks)")
    s.add_argument("--series-count", type=int, default=64, help="per-point series files to write")
    s.set_defaults(fn=cmd_tseries)

    s = sub.add_parser("composite", parents=[common], help="RGB composite of three members")
    s.add_argument("--stack")
    s.add_argument("--dates", help="three comma-separated member ids (R,G,B)")
    s.add_argument("--stretch", default="2,98", help="percentile pair")
    s.set_defaults(fn=cmd_composite)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        os.makedirs(cfg.workspace, exist_ok=True)
        args.fn(cfg, args)
    except WvstackError as exc:
        kind = next((c.__name__ for c in (UsageError, DataError, NumericalError) if isinstance(exc, c)),
                    "error")
        print(f"wvstack {args.command}: {kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"wvstack {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
