"""Command line entry point.

Subcommands share one set of experiment flags. A YAML or JSON config file
passed with ``--config`` supplies defaults and explicit flags win. Errors
raised by the package are printed with their category and turned into a
nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

from . import __version__
from .diffusion import build_collection, collection_report, topic_active_users
from .errors import ConfigurationError, HomophilyError
from .events import all_topics, default_origin, read_action_log, slice_events
from .experiment import (
    BASELINE,
    ExperimentConfig,
    load_inputs,
    read_report,
    run_experiment,
    summarize,
    summary_table,
    write_report,
)
from .graph import attribute_subgraph, attribute_values, connected_component_count, load_graph_files
from .metrics import assemble_feature_vector, feature_report
from .predictor import ActivityIndex, DBNPredictor, predict_probabilities
from .synth import SynthConfig, write_synthetic

log = logging.getLogger("homophily_diffusion")

_LIST_FIELDS = {"topics", "attributes", "methods"}
_SKIP_FIELDS = {"trends"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON file with experiment settings")
    defaults = ExperimentConfig()
    for f in fields(ExperimentConfig):
        if f.name in _SKIP_FIELDS:
            continue
        default = getattr(defaults, f.name)
        kw = {"dest": f.name, "default": argparse.SUPPRESS}
        if f.name in _LIST_FIELDS:
            kw["type"] = lambda s: [x for x in s.split(",") if x]
            kw["metavar"] = "A,B,..."
        elif isinstance(default, bool):
            kw["type"] = _parse_bool
            kw["metavar"] = "BOOL"
        elif isinstance(default, int):
            kw["type"] = int
        elif isinstance(default, float) or f.name == "origin":
            kw["type"] = float
        elif f.name == "max_horizon":
            kw["type"] = int
        p.add_argument(_flag(f.name), **kw)
    p.add_argument(
        "--trend",
        action="append",
        default=[],
        metavar="TOPIC:KIND=PATH",
        help="trend CSV for one topic and kind (search or news); repeatable",
    )


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if hasattr(args, f.name)}
    cfg = replace(cfg, **overrides)
    if args.trend:
        trends = {t: dict(k) for t, k in cfg.trends.items()}
        for item in args.trend:
            try:
                key, path = item.split("=", 1)
                topic, kind = key.rsplit(":", 1)
            except ValueError as exc:
                raise ConfigurationError(f"--trend expects TOPIC:KIND=PATH, got {item!r}") from exc
            trends.setdefault(topic, {})[kind] = path
        cfg.trends = trends
    cfg.validate()
    return cfg


def _need(value, flag: str):
    if value is None:
        raise ConfigurationError(f"{flag} is required")
    return value


def _output(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _select_graph(graph, attribute, value):
    if attribute is None:
        return graph
    if value is None:
        raise ConfigurationError("--value is required with --attribute")
    return attribute_subgraph(graph, attribute, value)


def _slotted(cfg, events):
    origin = cfg.origin if cfg.origin is not None else default_origin(events, cfg.slice_duration)
    return origin, slice_events(events, origin, cfg.slice_duration)


def cmd_ingest_check(args) -> int:
    cfg = _experiment_config(args)
    graph = load_graph_files(
        _need(cfg.edges, "--edges"), _need(cfg.users, "--users"), require_reciprocal=cfg.require_reciprocal
    )
    summary = {
        "users": len(graph),
        "edges": graph.n_edges,
        "components": connected_component_count(graph),
    }
    if cfg.actions:
        events = read_action_log(cfg.actions)
        origin, slotted = _slotted(cfg, events)
        summary.update(
            events=len(events),
            topics=all_topics(events),
            slots=max(slotted) if slotted else 0,
            origin=origin,
            unknown_users=len({e.user for e in events} - set(graph.users)),
        )
    print(json.dumps(summary, sort_keys=True, indent=1))
    return 0


def cmd_build(args) -> int:
    cfg = _experiment_config(args)
    data = load_inputs(cfg)
    _, slotted = _slotted(cfg, data.events)
    graph = _select_graph(data.graph, args.attribute, args.value)
    coll = build_collection(graph, slotted, args.topic, args.horizon)
    _output(collection_report(coll), args.out)
    return 0


def cmd_metrics(args) -> int:
    cfg = _experiment_config(args)
    data = load_inputs(cfg)
    _, slotted = _slotted(cfg, data.events)
    cells = [(BASELINE, None, data.graph)]
    for attr in cfg.attributes if args.all_attributes else []:
        cells += [(attr, v, attribute_subgraph(data.graph, attr, v)) for v in attribute_values(data.graph, attr)]
    if args.attribute is not None:
        cells = [(args.attribute, args.value, _select_graph(data.graph, args.attribute, args.value))]
    rows = []
    for name, value, graph in cells:
        coll = build_collection(graph, slotted, args.topic, args.horizon)
        if coll.is_empty():
            log.info("skip %s=%s: empty collection", name, value)
            continue
        eta = len(topic_active_users(graph, slotted, args.topic, 1, args.horizon))
        vec = assemble_feature_vector(coll, graph, eta, cfg.rate_time_unit)
        label = None if value is None else getattr(value, "value", value)
        rows.append((args.topic, name, label, args.horizon, vec))
    _output(feature_report(rows), args.out)
    return 0


def cmd_predict(args) -> int:
    cfg = _experiment_config(args)
    data = load_inputs(cfg)
    _, slotted = _slotted(cfg, data.events)
    graph = _select_graph(data.graph, args.attribute, args.value)
    index = ActivityIndex(graph, slotted, args.topic, args.horizon)
    params = cfg.predictor_params()
    method = args.method
    if method in ("DBN", "GenModel"):
        model = DBNPredictor(params, use_features=method == "DBN").fit(index, args.horizon)
        probs = model.predict(index, args.horizon)
        if args.model_out:
            Path(args.model_out).write_text(model.to_json() + "\n", encoding="utf-8")
    else:
        probs = predict_probabilities(method, index, args.horizon, params)
    lines = ["user,probability,included"]
    for user in sorted(probs):
        p = probs[user]
        lines.append(f"{user},{p!r},{int(p > 0 and p >= params.tau)}")
    _output("\n".join(lines) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _experiment_config(args)
    rows = run_experiment(cfg)
    if args.out:
        write_report(rows, args.out)
    else:
        write_report(rows, sys.stdout)
    if args.summary:
        Path(args.summary).write_text(summary_table(summarize(rows)), encoding="utf-8")
    return 0


def cmd_summarize(args) -> int:
    rows = read_report(args.report)
    _output(summary_table(summarize(rows)), args.out)
    return 0


def cmd_synth(args) -> int:
    base = SynthConfig()
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        if args.config.endswith((".yaml", ".yml")):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        known = {f.name for f in fields(SynthConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown synth keys: {', '.join(sorted(unknown))}")
        base = replace(base, **data)
    overrides = {f.name: getattr(args, f.name) for f in fields(SynthConfig) if getattr(args, f.name, None) is not None}
    cfg = replace(base, **overrides)
    paths = write_synthetic(args.outdir, cfg)
    print(json.dumps(paths, sort_keys=True, indent=1))
    return 0


def _add_cell_flags(p, *, horizon_required=True) -> None:
    p.add_argument("--topic", required=True)
    p.add_argument("--horizon", type=int, required=horizon_required)
    p.add_argument("--attribute", help="restrict to the subgraph of one attribute value")
    p.add_argument("--value", help="attribute value used with --attribute")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homophily-diffusion",
        description="Reconstruct topic diffusion, predict the next slot and score homophily distortion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="parse and validate inputs, print a summary")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("build", help="print the diffusion collection of one topic")
    _add_experiment_flags(p)
    _add_cell_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("metrics", help="print diffusion feature vectors")
    _add_experiment_flags(p)
    _add_cell_flags(p)
    p.add_argument("--all-attributes", action="store_true", help="also score every attribute value subgraph")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("predict", help="per-user probabilities of acting in the next slot")
    _add_experiment_flags(p)
    _add_cell_flags(p)
    p.add_argument("--method", default="DBN")
    p.add_argument("--model-out", help="write the fitted DBN/GenModel as JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run the full train/predict/score protocol")
    _add_experiment_flags(p)
    p.add_argument("--out", help="report file, one JSON record per line (default: stdout)")
    p.add_argument("--summary", help="also write the summary table here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("summarize", help="average a report over topics and horizons")
    p.add_argument("report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("synth", help="write a synthetic data set with planted homophily")
    p.add_argument("outdir")
    p.add_argument("--config", help="YAML or JSON file with generator settings")
    defaults = asdict(SynthConfig())
    for f in fields(SynthConfig):
        if f.name == "attributes":
            continue
        kind = type(defaults[f.name])
        p.add_argument(_flag(f.name), dest=f.name, type=kind, default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HomophilyError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
