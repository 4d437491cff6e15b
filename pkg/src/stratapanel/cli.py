"""Command line entry points.

    stratapanel build-panel project.json -o panel.svg [--level ID] [--order a,b,c]
    stratapanel validate dataset.json
    stratapanel serve [--host H] [--port N] [--data-dir DIR] [--ui-dir DIR]
    stratapanel make-fixture --out DIR

Exit codes: 0 success / clean, 1 io or validation error, 2 unknown
correlation or log ids passed on the command line.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import io as pio
from . import layout as playout
from . import render as prender


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def cmd_build_panel(args: argparse.Namespace) -> int:
    try:
        project = pio.load_project(_read(args.project))
    except OSError as exc:
        print(f"error: cannot read {args.project}: {exc}", file=sys.stderr)
        return 1
    except (pio.ParseError, pio.SchemaError, pio.ValidationError, pio.DanglingReference) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    panel = project.panel
    if args.order is not None:
        order = [token.strip() for token in args.order.split(",") if token.strip()]
        try:
            panel = playout.reorder_logs(panel, order)
        except playout.NotAPermutation as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if args.level is not None:
        if not any(c.id == args.level for c in panel.correlations):
            print(f"error: unknown correlation {args.level!r}", file=sys.stderr)
            return 2
        panel = replace(panel, leveling=args.level)
    project = replace(project, panel=panel)

    svg = prender.render_panel(project.panel, playout.layout_panel(project))
    try:
        Path(args.output).write_text(svg, encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
        return 1
    print(
        f"{len(project.logs)} logs, {len(project.dataset.contacts)} contacts, "
        f"{len(project.panel.correlations)} correlations"
    )
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        pio.load_dataset(_read(args.dataset))
    except OSError as exc:
        print(f"error: cannot read {args.dataset}: {exc}", file=sys.stderr)
        return 1
    except (pio.ParseError, pio.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except pio.ValidationError as exc:
        for finding in exc.findings:
            print(finding)
        return 1
    print("OK: dataset is valid")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, default_ui_dir, empty_project
    from .model import Panel, Project
    from .layout import PanelStyle
    from .model import default_rock_catalog

    data_dir = Path(args.data_dir) if args.data_dir else None
    project = None
    if data_dir is not None:
        project_file = data_dir / "project.json"
        dataset_file = data_dir / "dataset.json"
        try:
            if project_file.is_file():
                project = pio.load_project(project_file.read_bytes())
                print(f"loaded project from {project_file}")
            elif dataset_file.is_file():
                dataset = pio.load_dataset(dataset_file.read_bytes())
                project = Project(
                    dataset=dataset,
                    logs=(),
                    panel=Panel(
                        id="panel",
                        log_order=(),
                        correlations=(),
                        leveling=None,
                        rock_catalog=default_rock_catalog(),
                        style=PanelStyle(),
                    ),
                )
                print(f"loaded dataset from {dataset_file}")
        except (pio.ParseError, pio.SchemaError, pio.ValidationError, pio.DanglingReference) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if project is None:
        project = empty_project()

    ui_dir = Path(args.ui_dir) if args.ui_dir else default_ui_dir()
    app = create_app(project, data_dir=data_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_make_fixture(args: argparse.Namespace) -> int:
    from . import fixture

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = fixture.hbdq_dataset()
    project = fixture.hbdq_project(dataset)
    (out / "dataset.json").write_bytes(pio.save_dataset(dataset))
    (out / "project.json").write_bytes(pio.save_project(project))
    print(
        f"wrote {out / 'dataset.json'} and {out / 'project.json'} "
        f"({len(dataset.contacts)} contacts, {len(dataset.crossbeds)} cross beds, "
        f"{len(project.logs)} logs, {len(project.panel.correlations)} correlations)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratapanel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-panel", help="render a project to an SVG correlation panel")
    p.add_argument("project", help="path to an incorr-project/1 JSON file")
    p.add_argument("-o", "--output", required=True, help="output SVG path")
    p.add_argument("--level", help="correlation id to use as leveling horizon")
    p.add_argument("--order", help="comma-separated log ids overriding the panel order")
    p.set_defaults(func=cmd_build_panel)

    p = sub.add_parser("validate", help="validate an incorr-dataset/1 JSON file")
    p.add_argument("dataset", help="path to the dataset file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the local HTTP API / UI server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--data-dir", help="directory with project.json / dataset.json; mutations persist here")
    p.add_argument("--ui-dir", help="directory with built frontend assets (default: auto-detect)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-fixture", help="write the synthetic four-outcrop example data")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
