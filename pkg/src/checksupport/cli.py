"""Command-line interface.

Settings resolve as flags > environment > ``~/.checksupport.toml`` > defaults.
Set ``SOURCE_DATE_EPOCH`` to pin report timestamps for reproducible output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from checksupport import checklist, evaluate, inference, pipeline, report
from checksupport.errors import (
    CheckSupportError,
    DocumentNotFound,
    UsageError,
)
from checksupport.inference import Stage, default_stage_configs, with_overrides
from checksupport.text_ingest import load_text

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("checksupport")

ENV_BACKEND = "CHECKSUPPORT_BACKEND_URL"
ENV_MODEL = "CHECKSUPPORT_MODEL"
ENV_CONFIG = "CHECKSUPPORT_CONFIG"

_STAGE_NAMES = {s.value: s for s in Stage}
_OVERRIDE_FIELDS = ("temperature", "context_limit_chars", "min_extract_chars", "window_overlap")


@dataclass
class CliConfig:
    backend_url: str = inference.DEFAULT_BACKEND_URL
    model: str = inference.DEFAULT_MODEL
    seed: int | None = inference.DEFAULT_SEED
    templates_dir: Path | None = None
    timeout: float = inference.DEFAULT_TIMEOUT_S
    stage_overrides: dict = field(default_factory=dict)

    def stage_configs(self):
        return with_overrides(default_stage_configs(), self.stage_overrides)

    def backend(self):
        return inference.make_backend(self.backend_url, timeout=self.timeout)


def _config_file() -> Path:
    return Path(os.environ.get(ENV_CONFIG) or Path.home() / ".checksupport.toml")


def _add_override(overrides: dict, stage_name: str, key: str, value) -> None:
    stage = _STAGE_NAMES.get(stage_name)
    if stage is None:
        raise UsageError(f"unknown stage {stage_name!r}; expected one of {', '.join(_STAGE_NAMES)}")
    if key not in _OVERRIDE_FIELDS:
        raise UsageError(f"unknown stage setting {key!r}")
    overrides.setdefault(stage, {})[key] = value


def _parse_assignment(text: str, cast):
    stage, sep, value = text.partition("=")
    if not sep:
        raise UsageError(f"expected STAGE=VALUE, got {text!r}")
    try:
        return stage, cast(value)
    except ValueError:
        raise UsageError(f"bad value in {text!r}") from None


def resolve_config(args: argparse.Namespace) -> CliConfig:
    cfg = CliConfig()
    path = _config_file()
    if path.is_file():
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        cfg.backend_url = data.get("backend_url", cfg.backend_url)
        cfg.model = data.get("model", cfg.model)
        cfg.seed = data.get("seed", cfg.seed)
        cfg.timeout = float(data.get("timeout", cfg.timeout))
        if data.get("templates_dir"):
            cfg.templates_dir = Path(data["templates_dir"]).expanduser()
        for stage_name, values in data.get("stages", {}).items():
            for key, value in values.items():
                _add_override(cfg.stage_overrides, stage_name, key, value)

    cfg.backend_url = os.environ.get(ENV_BACKEND) or cfg.backend_url
    cfg.model = os.environ.get(ENV_MODEL) or cfg.model

    if getattr(args, "backend", None):
        cfg.backend_url = args.backend
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "templates_dir", None):
        cfg.templates_dir = Path(args.templates_dir)
    if getattr(args, "timeout", None) is not None:
        cfg.timeout = args.timeout
    for text in getattr(args, "temperature", None) or []:
        stage, value = _parse_assignment(text, float)
        _add_override(cfg.stage_overrides, stage, "temperature", value)
    for text in getattr(args, "context_limit", None) or []:
        stage, value = _parse_assignment(text, int)
        _add_override(cfg.stage_overrides, stage, "context_limit_chars", value)
    if getattr(args, "min_extract_chars", None) is not None:
        _add_override(cfg.stage_overrides, "extract", "min_extract_chars", args.min_extract_chars)

    try:
        cfg.stage_configs()
    except TypeError as exc:
        raise UsageError(f"invalid stage override: {exc}") from exc
    return cfg


def _clock():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return lambda: datetime.now(timezone.utc)
    try:
        fixed = datetime.fromtimestamp(int(epoch), timezone.utc)
    except ValueError:
        raise UsageError(f"SOURCE_DATE_EPOCH must be an integer, got {epoch!r}") from None
    return lambda: fixed


def _candidates(cfg: CliConfig, args) -> list[str]:
    names = list(args.checklists) if args.checklists else checklist.available_names(cfg.templates_dir)
    if args.allow_na:
        names.append(pipeline.NOT_APPLICABLE)
    return names


def _load_manuscript(path: str):
    if not Path(path).is_file():
        raise DocumentNotFound(f"manuscript not found: {path}")
    return load_text(path)


# -- commands ---------------------------------------------------------------------------


def cmd_recommend(args, out=None) -> int:
    out = out or sys.stdout
    cfg = resolve_config(args)
    manuscript = _load_manuscript(args.manuscript)
    configs = cfg.stage_configs()
    rec = pipeline.recommend(
        manuscript,
        _candidates(cfg, args),
        cfg.backend(),
        model=cfg.model,
        seed=cfg.seed,
        cfg=configs[Stage.RECOMMEND],
    )
    out.write(report.emit_recommendation(rec))
    return 0


def cmd_complete(args, out=None) -> int:
    out = out or sys.stdout
    cfg = resolve_config(args)
    manuscript = _load_manuscript(args.manuscript)
    configs = cfg.stage_configs()
    backend = cfg.backend()

    name = args.checklist
    if name == "auto":
        rec = pipeline.recommend(
            manuscript, _candidates(cfg, args), backend, model=cfg.model, seed=cfg.seed, cfg=configs[Stage.RECOMMEND]
        )
        logger.info("recommended checklist: %s", rec.chosen)
        if rec.chosen == pipeline.NOT_APPLICABLE:
            print("no reporting checklist applies; nothing to complete", file=sys.stderr)
            out.write(report.emit_recommendation(rec))
            return 0
        name = rec.chosen
    template = checklist.resolve(name, cfg.templates_dir)

    completed = pipeline.complete_checklist(
        manuscript,
        template,
        backend,
        model=cfg.model,
        seed=cfg.seed,
        configs=configs,
        clock=_clock(),
        max_workers=args.workers,
    )
    fmt = report.ReportFormat(args.format)
    data = report.render(completed, template, fmt)
    target = Path(args.out) if args.out else Path(report.report_filename(Path(args.manuscript).stem, template.name, fmt))
    target.write_bytes(data)
    logger.info("run took %d ms", completed.provenance.elapsed_ms)
    out.write(f"{target}\n")
    return 0


def cmd_templates_list(args, out=None) -> int:
    out = out or sys.stdout
    cfg = resolve_config(args)
    for name in checklist.available_names(cfg.templates_dir):
        out.write(name + "\n")
    return 0


def cmd_eval(args, out=None) -> int:
    out = out or sys.stdout
    if args.mode == "manuscript":
        truths = evaluate.load_manuscript_truths(args.truth)
        predictions = evaluate.load_manuscript_predictions(args.predictions)
        metrics = evaluate.manuscript_accuracy(predictions, truths)
    else:
        truths = evaluate.load_item_truths(args.truth)
        predictions = evaluate.load_item_predictions(args.predictions)
        categories = None
        if args.categories:
            categories = {a.manuscript_id: a.true_category for a in evaluate.load_manuscript_truths(args.categories)}
        metrics = evaluate.item_accuracy(predictions, truths, categories, strict=args.strict)
    payload = json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
        out.write(metrics.table() + "\n")
    else:
        out.write(payload)
        print(metrics.table(), file=sys.stderr)
    return 0


# -- parser -----------------------------------------------------------------------------


def _common_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--backend", help="model server URL or scripted:<script.json>")
    common.add_argument("--model", help="model id passed to the backend")
    common.add_argument("--seed", type=int, help="sampling seed sent to the backend")
    common.add_argument("--templates-dir", help="directory of extra checklist files")
    common.add_argument("--timeout", type=float, help="seconds per model call")
    common.add_argument("--temperature", action="append", metavar="STAGE=T",
                        help="override a stage temperature (stages: recommend, guidance, extract, item)")
    common.add_argument("--context-limit", action="append", metavar="STAGE=N",
                        help="override a stage character budget")
    common.add_argument("--min-extract-chars", type=int, help="shortest acceptable section extract")
    common.add_argument("--verbose", "-v", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="checksupport", parents=[common], description="Recommend and complete manuscript reporting checklists."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recommend", parents=[common], help="print the best-fitting checklist name")
    p.add_argument("manuscript")
    p.add_argument("--checklists", nargs="+", metavar="NAME", help="candidate names (default: all available)")
    p.add_argument("--allow-na", action="store_true", help=f"add {pipeline.NOT_APPLICABLE!r} as a candidate")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("complete", parents=[common], help="fill in a checklist and write a report")
    p.add_argument("manuscript")
    p.add_argument("--checklist", required=True, help="builtin name, user template name, file path, or 'auto'")
    p.add_argument("--out", help="report path (default <manuscript>.<checklist>.report.<ext>)")
    p.add_argument("--format", choices=[f.value for f in report.ReportFormat], default="md")
    p.add_argument("--workers", type=int, default=1, help="concurrent item completions")
    p.add_argument("--checklists", nargs="+", metavar="NAME", help="candidates for --checklist auto")
    p.add_argument("--allow-na", action="store_true")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("templates", parents=[common], help="inspect checklist templates")
    tsub = p.add_subparsers(dest="templates_command", required=True)
    t = tsub.add_parser("list", parents=[common], help="list available checklist names")
    t.set_defaults(func=cmd_templates_list)

    p = sub.add_parser("eval", parents=[common], help="score predictions against annotations")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mode", choices=["manuscript", "item"], required=True)
    p.add_argument("--categories", help="manuscript annotations giving each manuscript's category (item mode)")
    strictness = p.add_mutually_exclusive_group()
    strictness.add_argument("--strict", dest="strict", action="store_true", default=True,
                            help="count NotReported predictions as errors (default)")
    strictness.add_argument("--lenient", dest="strict", action="store_false",
                            help="count NotReported as correct when the annotation agrees")
    p.add_argument("--output", help="write metrics JSON here and print the table instead")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CheckSupportError as exc:
        print(f"checksupport: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
