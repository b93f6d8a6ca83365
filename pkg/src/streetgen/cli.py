"""Command-line entry point: ``streetgen <command> ...``.

Exit status is 0 on a clean run, 1 when the run finished with diagnostics
(partial output was still written) and 2 on fatal errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import engine, io, synthetic
from .errors import StreetGenError
from .network import build_topology
from .roundabout import detect_roundabouts
from .settings import load_settings

log = logging.getLogger("streetgen")

EXIT_OK, EXIT_DIAG, EXIT_FATAL = 0, 1, 2
STATE_NAME = "state.pkl"


def _emit(diags) -> None:
    for d in diags:
        print(f"diagnostic: {d}", file=sys.stderr)


def _write_outputs(store, out: Path, layers=io.LAYERS) -> None:
    io.export_geojson(store, out, layers)
    io.export_traffic_xml(store, out / "traffic.xml")
    io.save_state(store, out / STATE_NAME)


def _load(args, settings):
    axes, objects, warnings = io.load_network(args.network, settings)
    topo = build_topology(axes, settings["network.snap_tol"])
    return axes, objects, topo, warnings + [d.message for d in topo.diagnostics]


def cmd_build(args) -> int:
    settings = load_settings(args.settings)
    _, objects, topo, diags = _load(args, settings)
    store = engine.StreetModelStore(settings)
    store.object_inputs.update({o.id: o for o in objects})
    scope = None
    if args.scope:
        scope = engine.edges_of_axes(topo, args.scope.split(","))
        missing = set(args.scope.split(",")) - set(topo.axes)
        if missing:
            raise StreetGenError(f"unknown axis ids in --scope: {', '.join(sorted(missing))}")
    t0 = time.perf_counter()
    if args.parallel > 1 and scope is None:
        report = engine.build_parallel(store, topo, args.parallel)
    else:
        report = engine.generate(store, topo, scope)
    if not report.ok:
        _emit(diags + report.diagnostics)
        return EXIT_FATAL
    out = Path(args.out)
    _write_outputs(store, out)
    diags += report.diagnostics
    _emit(diags)
    print(f"built {len(topo.edges)} edges, {len(topo.nodes)} nodes in "
          f"{time.perf_counter() - t0:.2f} s -> {out}")
    return EXIT_DIAG if diags else EXIT_OK


def cmd_update(args) -> int:
    out = Path(args.out)
    state = Path(args.state) if args.state else out / STATE_NAME
    store = io.load_state(state)
    if args.settings:
        store.settings = load_settings(args.settings)
    _, objects, topo, diags = _load(args, store.settings)
    store.object_inputs = {o.id: o for o in objects}
    t0 = time.perf_counter()
    report = engine.update_network(store, topo)
    if not report.ok:
        _emit(diags + report.diagnostics)
        return EXIT_FATAL
    _write_outputs(store, out)
    diags += report.diagnostics
    _emit(diags)
    print(f"update: {report.summary()} in {1000 * (time.perf_counter() - t0):.1f} ms")
    return EXIT_DIAG if diags else EXIT_OK


def cmd_export(args) -> int:
    store = io.load_state(args.state)
    out = Path(args.out)
    if args.format == "geojson":
        layers = args.layers.split(",") if args.layers else io.LAYERS
        bad = [l for l in layers if l not in io.LAYERS]
        if bad:
            raise StreetGenError(f"unknown layers: {', '.join(bad)}")
        for f in io.export_geojson(store, out, layers):
            print(f)
    else:
        out.mkdir(parents=True, exist_ok=True)
        print(io.export_traffic_xml(store, out / "traffic.xml"))
    return EXIT_OK


def cmd_detect(args) -> int:
    if args.network:
        settings = load_settings(args.settings)
        _, _, topo, _ = _load(args, settings)
        cands = detect_roundabouts(topo, settings)
    else:
        store = io.load_state(args.state)
        cands = sorted(store.values("roundabouts").values(), key=lambda c: c.id)
    rows = [{"id": c.id, "center": [round(c.center[0], 3), round(c.center[1], 3)],
             "radius": round(c.radius, 3), "score": round(c.score, 6), "accepted": c.accepted,
             "evidence": c.evidence} for c in cands]
    print(json.dumps(rows, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_partition(args) -> int:
    settings = load_settings(args.settings)
    axes, _, _ = io.load_network(args.network, settings)
    clusters = engine.partition_axes(axes, args.k, settings["engine.kmeans_seed"],
                                     settings["engine.kmeans_max_iter"])
    print(json.dumps({f"cluster{i}": c for i, c in enumerate(clusters)}, indent=2))
    return EXIT_OK


def _grid_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w < 2 or h < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2x2 nodes")
    return w, h


def cmd_bench(args) -> int:
    settings = load_settings(args.settings)
    w, h = args.grid
    axes = synthetic.grid(w, h, spacing=args.spacing)
    if args.write:
        io.write_network(axes, args.write)
    t0 = time.perf_counter()
    topo = build_topology(axes, settings["network.snap_tol"])
    t1 = time.perf_counter()
    store = engine.StreetModelStore(settings)
    if args.parallel > 1:
        report = engine.build_parallel(store, topo, args.parallel)
    elif args.loop:
        for eid in sorted(topo.edges):
            report = engine.generate(store, topo, [eid])
    else:
        report = engine.generate(store, topo)
    t2 = time.perf_counter()
    print(json.dumps({"grid": f"{w}x{h}", "edges": len(topo.edges), "nodes": len(topo.nodes),
                      "topology_s": round(t1 - t0, 3), "generate_s": round(t2 - t1, 3),
                      "workers": args.parallel, "loop": args.loop, "ok": report.ok,
                      "junction_solves": store.stats["junction_solves"]}, sort_keys=True))
    return EXIT_OK if report.ok else EXIT_FATAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streetgen", description="Street model generation from road axes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, network=True):
        if network:
            sp.add_argument("network", help="GeoJSON FeatureCollection of road axes")
        sp.add_argument("--settings", help="settings file (default: $STREETGEN_SETTINGS)")

    b = sub.add_parser("build", help="full build from a network file")
    common(b)
    b.add_argument("--scope", help="comma-separated axis ids to build (default: all)")
    b.add_argument("--out", default="streetgen_out")
    b.add_argument("--parallel", type=int, default=1, metavar="N")
    b.set_defaults(func=cmd_build)

    u = sub.add_parser("update", help="incremental update against a stored state")
    common(u)
    u.add_argument("--state", help=f"state file (default: OUT/{STATE_NAME})")
    u.add_argument("--out", default="streetgen_out")
    u.set_defaults(func=cmd_update)

    e = sub.add_parser("export", help="export a stored state")
    e.add_argument("--state", default=f"streetgen_out/{STATE_NAME}")
    e.add_argument("--format", choices=("geojson", "traffic-xml"), default="geojson")
    e.add_argument("--layers", help=f"comma-separated subset of {','.join(io.LAYERS)}")
    e.add_argument("--out", default="streetgen_out")
    e.set_defaults(func=cmd_export)

    d = sub.add_parser("detect-roundabouts", help="list roundabout candidates")
    d.add_argument("network", nargs="?", help="network file (default: read --state)")
    d.add_argument("--state", default=f"streetgen_out/{STATE_NAME}")
    d.add_argument("--settings")
    d.set_defaults(func=cmd_detect)

    k = sub.add_parser("partition", help="k-means clusters of axes")
    common(k)
    k.add_argument("--k", type=int, required=True)
    k.set_defaults(func=cmd_partition)

    g = sub.add_parser("bench", help="time a build on a synthetic grid")
    g.add_argument("--grid", type=_grid_size, required=True, metavar="WxH")
    g.add_argument("--spacing", type=float, default=50.0)
    g.add_argument("--parallel", type=int, default=1, metavar="N")
    g.add_argument("--loop", action="store_true", help="one generate call per edge")
    g.add_argument("--write", help="also write the grid as a network file")
    g.add_argument("--settings")
    g.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except (StreetGenError, OSError) as exc:
        print(f"streetgen: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
