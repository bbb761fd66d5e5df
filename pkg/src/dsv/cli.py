"""Command-line entry point: ``dsv <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 64 usage.
``verify`` exits 1 when a certified property fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dsv import io
from dsv.baselines import SELECTOR_NAMES
from dsv.errors import DegenerateError, ValidationError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _methods(text: str) -> list:
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in SELECTOR_NAMES]
    if not names or bad:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {bad}; choose from {','.join(SELECTOR_NAMES)}" if bad else "empty method list")
    return names


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dsv", description="Label-free augmentation hyperparameter selection.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("select", help="run selectors on a run directory")
    s.add_argument("--run", required=True, type=Path)
    s.add_argument("--methods", type=_methods, default=list(SELECTOR_NAMES))
    s.add_argument("--seed", type=_nonneg_int, default=0)
    s.add_argument("--clamp", choices=("max", "min"), default="max")
    s.add_argument("--components", type=int, default=1, help="Gaussian mixture size for anomaly scores")
    s.add_argument("--out", type=Path)

    e = sub.add_parser("evaluate", help="aggregate AUC tables")
    e.add_argument("--fixtures", type=Path, help="directory with cutout/cutavg/cutdiff/cutpaste .tsv (default: bundled)")
    e.add_argument("--per-augmentation", action="store_true")
    e.add_argument("--out", type=Path)

    v = sub.add_parser("verify", help="randomized certification of the bounds")
    v.add_argument("--instances", type=_nonneg_int, default=1000)
    v.add_argument("--seed", type=_nonneg_int, default=0)
    v.add_argument("--out", type=Path)

    g = sub.add_parser("synth", help="generate a synthetic run directory")
    g.add_argument("--config", type=Path, help="JSON object of generator settings")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--seed", type=_nonneg_int)
    g.add_argument("--binary", action="store_true", help="write embeddings in the raw float container")

    r = sub.add_parser("report", help="render a JSON report")
    r.add_argument("--in", dest="inp", required=True, type=Path)
    r.add_argument("--format", choices=("json", "text"), default="text")
    return p


# -- rendering -------------------------------------------------------------------------------------

def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _fmt(v, digits=4) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def _table(header: list, rows: list) -> str:
    cells = [header] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    return "\n".join(lines)


def render_text(report: dict) -> str:
    schema = report.get("schema", "")
    if schema.startswith("dsv.selection"):
        out = [f"task {report['task_id']}  seed {report['seed']}  clamp {report['clamp']}", ""]
        out.append(_table(["method", "index", "hp", "auc"],
                          [[m["method"], m["chosen_index"], m["chosen_hp"], m["auc"]] for m in report["methods"]]))
        out.append("")
        out.append(_table(["index", "hp", "l_dis", "l_sep", "l_val"],
                          [[c["index"], c["hp"], c["l_dis"], c["l_sep"], c["l_val"]] for c in report["candidates"]]))
        if report.get("average_auc") is not None:
            out += ["", f"average auc over candidates: {report['average_auc']:.4f}"]
    elif schema.startswith("dsv.evaluation"):
        augs = report["augmentations"]
        methods = list(report["mean_auc"][augs[0]])
        out = ["mean AUC", _table(["method"] + augs, [[m] + [report["mean_auc"][a][m] for a in augs] for m in methods]),
               "", "average rank",
               _table(["method"] + augs, [[m] + [report["average_rank"][a][m] for a in augs] for m in methods]),
               "", f"one-sided Wilcoxon p (row beats column), {report['wilcoxon']['pairs']} pooled pairs"]
        pooled = report["wilcoxon"]["pooled"]
        out.append(_table(["method"] + methods, [[a] + [pooled[a][b] for b in methods] for a in methods]))
    elif schema.startswith("dsv.verify"):
        out = [f"seed {report['seed']}  overall {'ok' if report['ok'] else 'FAILED'}", ""]
        out.append(_table(["lemma", "family", "passed", "total", "max_violation", "certified", "ok"],
                          [[r["lemma"], r["family"], r["passed"], r["instances"], r["max_violation"],
                            "yes" if r["certified"] else "no", "yes" if r["ok"] else "no"]
                           for r in report["records"]]))
    else:
        raise ValidationError(f"unrecognized report schema {schema!r}")
    return "\n".join(out) + "\n"


def _emit(report: dict, out: Path | None) -> None:
    text = to_json(report)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


# -- subcommands -----------------------------------------------------------------------------------

def cmd_select(args) -> int:
    from dsv.harness import run_selection
    run = io.load_run(args.run)
    report = run_selection(run, methods=args.methods, seed=args.seed, clamp=args.clamp,
                           n_components=args.components)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from dsv.harness import evaluate_tables
    tables = io.load_fixtures(args.fixtures)
    report = evaluate_tables(tables, per_augmentation=args.per_augmentation)
    _emit(report, args.out)
    if args.out is not None:
        sys.stdout.write(render_text(report))
    return EXIT_OK


def cmd_verify(args) -> int:
    from dsv.theory import certify
    if args.instances < 1:
        raise ValidationError("verify: --instances must be at least 1")
    report = certify(instances=args.instances, seed=args.seed)
    if args.out is not None:
        _emit(report, args.out)
    sys.stdout.write(render_text(report))
    return EXIT_OK if report["ok"] else EXIT_CHECK_FAILED


def cmd_synth(args) -> int:
    from dsv.synth import SynthConfig, generate_run
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"{args.config}: config not found") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(data)
    except TypeError as exc:
        raise ValidationError(f"synth: bad config value ({exc})") from None
    manifest = io.save_run(generate_run(cfg), args.out, binary=args.binary)
    (args.out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(f"{manifest}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = json.loads(args.inp.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"{args.inp}: report not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.inp}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(report, dict):
        raise ValidationError(f"{args.inp}: report must be a JSON object")
    sys.stdout.write(to_json(report) if args.format == "json" else render_text(report))
    return EXIT_OK


COMMANDS = {"select": cmd_select, "evaluate": cmd_evaluate, "verify": cmd_verify,
            "synth": cmd_synth, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except DegenerateError as exc:
        print(f"dsv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, KeyError) as exc:
        print(f"dsv: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FloatingPointError as exc:
        print(f"dsv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
