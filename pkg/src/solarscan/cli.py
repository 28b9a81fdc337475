"""Command-line entry points: inspect, report, serve, synth."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .analytics import fleet_csv, report_from_dict
from .config import load_config
from .errors import ConfigError, PipelineStageError, SolarScanError


class _Parser(argparse.ArgumentParser):
    """Argparse that exits 1 on usage errors instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="solarscan",
                     description="Thermal ortho inspection of solar PV sites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_inspect = sub.add_parser("inspect", help="run the inspection pipeline")
    p_inspect.add_argument("--config", required=True, type=Path,
                           help="TOML inspection config")
    p_inspect.add_argument("--out", type=Path, default=None,
                           help="override the configured output directory")
    p_inspect.add_argument("--workers", type=int, default=None,
                           help="override the configured worker count")

    p_report = sub.add_parser("report", help="summarize finished runs")
    p_report.add_argument("--results", required=True, type=Path, nargs="+",
                          help="one or more result directories")
    p_report.add_argument("--fleet", action="store_true",
                          help="aggregate sites into a fleet CSV")
    p_report.add_argument("--csv", type=Path, default=None,
                          help="write the fleet CSV here instead of stdout")

    p_serve = sub.add_parser("serve", help="serve a run for review")
    p_serve.add_argument("--results", required=True, type=Path)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8008)
    p_serve.add_argument("--frontend", type=Path, default=None,
                         help="directory with a built review console to mount at /")

    p_synth = sub.add_parser("synth", help="generate a synthetic site fixture")
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--size", type=int, default=4096,
                         help="raster size in pixels per side")
    p_synth.add_argument("--gsd", type=float, default=0.05,
                         help="ground sampling distance in meters")
    return parser


def _cmd_inspect(args) -> int:
    overrides: dict = {}
    if args.out is not None:
        overrides.setdefault("run", {})["output_dir"] = str(args.out)
    if args.workers is not None:
        overrides.setdefault("run", {})["workers"] = args.workers
    config = load_config(args.config, overrides or None)
    from .pipeline import run_inspection
    result = run_inspection(config)
    rep = result.report
    print(f"site {rep.site_id}: rating {rep.rating}  "
          f"OR {rep.or_ratio:.4f}  dT_max {rep.delta_t_max:.1f} C  "
          f"APM {rep.apm:.2f}")
    print(f"detections: {rep.n_counted}  "
          f"panels: {rep.n_panels} ({rep.n_uninspectable} uninspectable)")
    print(f"results: {result.output_dir}")
    return 0


def _cmd_report(args) -> int:
    loaded = []
    for d in args.results:
        path = Path(d) / "report.json"
        if not path.is_file():
            raise ConfigError(f"no report.json under {d}")
        loaded.append(report_from_dict(
            json.loads(path.read_text(encoding="utf-8"))))
    if args.fleet:
        text = fleet_csv(loaded)
        if args.csv is not None:
            args.csv.write_text(text, encoding="utf-8")
            print(f"wrote {args.csv}")
        else:
            print(text, end="")
        return 0
    for meta, rep in loaded:
        print(f"{meta.site_id:20s} {rep.rating}  OR {rep.or_ratio:.4f}  "
              f"dT_max {rep.delta_t_max:.1f} C  APM {rep.apm:.2f}  "
              f"loss ${rep.revenue_loss_usd:,.0f}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    app = create_app(Path(args.results), frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_synth(args) -> int:
    from .synth import generate_site
    summary = generate_site(args.out, seed=args.seed, size_px=args.size,
                            gsd=args.gsd)
    print(f"site: {summary['n_tables']} tables, {summary['n_panels']} panels, "
          f"{summary['capacity_mw_dc']:.3f} MW dc, "
          f"angle {summary['site_angle_deg']:.1f} deg")
    print(f"planted defects: {len(summary['planted'])}")
    print(f"files: {', '.join(summary['files'])} in {summary['out_dir']}")
    return 0


_COMMANDS = {
    "inspect": _cmd_inspect,
    "report": _cmd_report,
    "serve": _cmd_serve,
    "synth": _cmd_synth,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"solarscan: {exc}", file=sys.stderr)
        return 1
    except PipelineStageError as exc:
        print(f"solarscan: stage '{exc.stage}' failed: {exc}", file=sys.stderr)
        return 2
    except SolarScanError as exc:
        print(f"solarscan: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
