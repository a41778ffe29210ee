"""Command-line pipeline driver.

One binary, one stage per subcommand: synth -> ingest -> fit-afm ->
features -> benchmark -> ablate / importance / trends -> serve. Stages
communicate through the documented file formats, every report embeds the
resolved configuration and input hashes, and a fixed root seed makes rerun
outputs byte-identical.

Configuration precedence: flags > ENGAGECAST_* environment variables >
--config JSON file > defaults. Recognized variables: ENGAGECAST_SEED,
ENGAGECAST_JOBS, ENGAGECAST_OUT_DIR, and for `serve` also ENGAGECAST_PANEL,
ENGAGECAST_MATRIX, ENGAGECAST_MATRIX_SCHEMA, ENGAGECAST_MODEL_MINUTES,
ENGAGECAST_MODEL_SKILLS, ENGAGECAST_SCENARIOS, ENGAGECAST_STORE,
ENGAGECAST_STATIC_DIR, ENGAGECAST_BLOCKED_PHRASES, ENGAGECAST_SESSION_SEED,
ENGAGECAST_HOST, ENGAGECAST_PORT.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ._util import read_json, sha256_file, stable_dumps, write_json
from .afm import export_params, import_params
from .benchmark import (
    RunConfig,
    ingest_pipeline,
    run_benchmark,
    run_importance,
    table2_rows,
)
from .evaluation import BootstrapConfig, SplitSpec
from .explain import ablation_grid, table5_conditions
from .features import read_matrix, write_matrix
from .ingest import ingest_report, parse_events, read_panel, write_panel
from .predictors import PredictorKind
from .reports import (
    write_ablation_csv,
    write_group_weights_csv,
    write_importance_csv,
    write_table2_csv,
    write_table4_csv,
    write_target_trend_csv,
    write_trends_csv,
)
from .svgplot import bar_chart, line_chart
from .synth import EffortRegime, RegimeConfig, SkillRegime, generate, write_events_csv

ENV_PREFIX = "ENGAGECAST_"


class CliError(RuntimeError):
    pass


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    return cast(raw)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        data = read_json(args.config)
    config = RunConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        config = RunConfig.from_dict({**config.to_dict(), "seed": args.seed})
    if getattr(args, "jobs", None) is not None:
        config.jobs = args.jobs
    if getattr(args, "folds", None) is not None:
        config.split = SplitSpec(config.split.dev_fraction, args.folds, config.split.seed)
    if getattr(args, "dev_fraction", None) is not None:
        config.split = SplitSpec(args.dev_fraction, config.split.cv_folds, config.split.seed)
    if getattr(args, "replicates", None) is not None:
        config.bootstrap = BootstrapConfig(
            args.replicates, config.bootstrap.level, config.bootstrap.seed
        )
    if getattr(args, "predictors", None):
        config.predictors = tuple(
            PredictorKind(name.strip()) for name in args.predictors.split(",")
        )
    if getattr(args, "sensitivity", False):
        config.sensitivity = True
    return config


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_events(path: str):
    with open(path, encoding="utf-8") as f:
        result = parse_events(f)
    return result


def _read_panel(path: str):
    with open(path, encoding="utf-8") as f:
        return read_panel(f)


def _read_matrix(matrix_path: str, schema_path: str):
    schema = read_json(schema_path)
    with open(matrix_path, encoding="utf-8") as f:
        return read_matrix(f, schema)


def cmd_synth(args) -> int:
    out = _out_dir(args)
    config = RegimeConfig(
        n_students=args.students,
        n_weeks=args.weeks,
        n_skills=args.skills,
        effort_regime=EffortRegime(args.effort_regime),
        skill_regime=SkillRegime(args.skill_regime),
        gap_probability=args.gap_probability,
        seed=args.seed if args.seed is not None else 0,
    )
    events, truth = generate(config)
    with open(out / "events.csv", "w", encoding="utf-8", newline="") as f:
        write_events_csv(events, f)
    write_json(out / "truth.json", truth)
    print(f"wrote {len(events)} events to {out / 'events.csv'}")
    return 0


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    parsed = _read_events(args.events)
    data = ingest_pipeline(parsed.events, config.ingest, config.afm)
    with open(out / "panel.csv", "w", encoding="utf-8", newline="") as f:
        write_panel(data.panel, f)
    write_json(out / "ingest_report.json", ingest_report(parsed, data.panel))
    write_json(out / "afm_params.json", export_params(data.fits))
    with open(out / "mastery.csv", "w", encoding="utf-8", newline="") as f:
        f.write("student_id,skill,week\n")
        for student, skill, week in data.mastery:
            f.write(f"{student},{skill},{week}\n")
    print(f"wrote panel ({len(data.panel)} rows) to {out / 'panel.csv'}")
    return 0


def cmd_fit_afm(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    parsed = _read_events(args.events)
    from .afm import QMatrix, mastery_sweep, rolling_refit

    qmatrix = QMatrix.from_events(parsed.events)
    fits = rolling_refit(parsed.events, config.afm, qmatrix)
    mastery = mastery_sweep(parsed.events, qmatrix, config.afm, fits)
    write_json(out / "afm_params.json", export_params(fits))
    with open(out / "mastery.csv", "w", encoding="utf-8", newline="") as f:
        f.write("student_id,skill,week\n")
        for student, skill, week in mastery:
            f.write(f"{student},{skill},{week}\n")
    print(f"wrote {len(fits)} weekly fits to {out / 'afm_params.json'}")
    return 0


def cmd_features(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    parsed = _read_events(args.events)
    panel = _read_panel(args.panel)

    from .afm import learner_states_by_week
    from .benchmark import quartile_reference_for
    from .evaluation import student_split
    from .features import build_matrix

    fits = import_params(read_json(args.afm_params))
    states = learner_states_by_week(fits, parsed.events, config.afm)
    # Start-quartile boundaries come from development students only; the
    # split is reproducible from the config seed.
    dev, _ = student_split({r.student_id for r in panel}, config.split)
    reference = quartile_reference_for(panel, dev, config.features.early_weeks)
    fm = build_matrix(panel, states, config.features, reference)
    with open(out / "matrix.csv", "w", encoding="utf-8", newline="") as f:
        schema = write_matrix(fm, f)
    write_json(out / "matrix_schema.json", schema)
    print(f"wrote matrix ({len(fm.rows)} rows) to {out / 'matrix.csv'}")
    return 0


def cmd_benchmark(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    panel = _read_panel(args.panel)
    matrix = _read_matrix(args.matrix, args.matrix_schema)
    report = run_benchmark(panel, matrix, config)
    report["artifacts"] = {
        "panel": sha256_file(args.panel),
        "matrix": sha256_file(args.matrix),
    }
    write_json(out / "report.json", report)
    with open(out / "table2.csv", "w", encoding="utf-8", newline="") as f:
        write_table2_csv(report, f)
    with open(out / "table4.csv", "w", encoding="utf-8", newline="") as f:
        write_table4_csv(report, f)
    with open(out / "trends.csv", "w", encoding="utf-8", newline="") as f:
        write_trends_csv(report, f)
    for target in report["trends"]:
        with open(out / f"trends_{target}.csv", "w", encoding="utf-8", newline="") as f:
            write_target_trend_csv(report, target, f)
    if args.save_models:
        models_dir = Path(args.save_models)
        models_dir.mkdir(parents=True, exist_ok=True)
        for key, doc in report["models"].items():
            kind, target = key.split(":")
            write_json(models_dir / f"model_{kind}_{target}.json", doc)
    for row in table2_rows(report):
        print(
            f"{row['target']}: top={row['top_model']} mae={row['top_model_mae']:.3f} "
            f"delta={row['delta_pct']:.1f}% vs baseline avg {row['baseline_mae']:.3f}"
        )
    print(f"wrote report to {out / 'report.json'}")
    return 0


def cmd_ablate(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    panel = _read_panel(args.panel)
    matrix = _read_matrix(args.matrix, args.matrix_schema)
    kind = PredictorKind(args.model)
    results = {}
    for target in config.targets:
        results[target] = ablation_grid(
            panel, matrix, target,
            kind=kind,
            conditions=table5_conditions(),
            hyperparams=config.hyper_for(kind),
            split=config.split,
            bootstrap=config.bootstrap,
            seed=config.seed,
        )
    write_json(
        out / "ablation.json",
        {
            "config": config.to_dict(),
            "artifacts": {
                "panel": sha256_file(args.panel),
                "matrix": sha256_file(args.matrix),
            },
            "results": results,
        },
    )
    with open(out / "ablation.csv", "w", encoding="utf-8", newline="") as f:
        write_ablation_csv(results, f)
    print(f"wrote ablation grid to {out / 'ablation.csv'}")
    return 0


def cmd_importance(args) -> int:
    out = _out_dir(args)
    config = _load_run_config(args)
    panel = _read_panel(args.panel)
    matrix = _read_matrix(args.matrix, args.matrix_schema)
    report = run_importance(panel, matrix, config)
    report["config"] = config.to_dict()
    report["artifacts"] = {
        "panel": sha256_file(args.panel),
        "matrix": sha256_file(args.matrix),
    }
    write_json(out / "importance.json", report)
    with open(out / "importance.csv", "w", encoding="utf-8", newline="") as f:
        write_importance_csv(report, f)
    with open(out / "group_weights.csv", "w", encoding="utf-8", newline="") as f:
        write_group_weights_csv(report, f)
    for target, block in sorted(report["targets"].items()):
        for model, table in sorted(block["models"].items()):
            top = sorted(
                table["per_feature"].items(), key=lambda kv: -kv[1]
            )[: args.top_k]
            svg = bar_chart(top, title=f"{target} importance ({model})")
            (out / f"importance_{target}_{model}.svg").write_text(svg, encoding="utf-8")
    print(f"wrote importance tables to {out / 'importance.csv'}")
    return 0


def cmd_trends(args) -> int:
    out = _out_dir(args)
    report = read_json(args.report)
    with open(out / "trends.csv", "w", encoding="utf-8", newline="") as f:
        write_trends_csv(report, f)
    for target in report["trends"]:
        with open(out / f"trends_{target}.csv", "w", encoding="utf-8", newline="") as f:
            write_target_trend_csv(report, target, f)
    for target, rows in sorted(report["trends"].items()):
        weeks = [r["week"] for r in rows]
        truth = [r["truth_mean"] for r in rows]
        std = [r["truth_std"] for r in rows]
        series = {"truth": truth}
        model_names = sorted(rows[0]["pred_mean"]) if rows else []
        for name in model_names:
            series[name] = [r["pred_mean"][name] for r in rows]
        svg = line_chart(
            weeks,
            series,
            band=([t + s for t, s in zip(truth, std)],
                  [t - s for t, s in zip(truth, std)]),
            title=f"weekly {target}: truth vs predictions",
        )
        (out / f"trends_{target}.svg").write_text(svg, encoding="utf-8")
    print(f"wrote trend series to {out / 'trends.csv'}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import AppState, ServiceConfig, create_app

    model_paths = {}
    if args.model_minutes:
        model_paths["minutes"] = args.model_minutes
    if args.model_skills:
        model_paths["skills"] = args.model_skills
    blocked = tuple(
        line.strip()
        for line in (
            Path(args.blocked_phrases).read_text(encoding="utf-8").splitlines()
            if args.blocked_phrases
            else ["low learning rate"]
        )
        if line.strip()
    )
    config = ServiceConfig(
        panel_path=args.panel,
        matrix_path=args.matrix,
        matrix_schema_path=args.matrix_schema,
        model_paths=model_paths,
        scenarios_path=args.scenarios,
        store_path=args.store,
        static_dir=args.static_dir,
        blocked_phrases=blocked,
        session_seed=args.session_seed,
    )
    app = create_app(AppState.from_config(config))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="engagecast",
        description="Weekly engagement forecasting pipeline and service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_file=True):
        p.add_argument("--seed", type=int,
                       default=_env_default("SEED", int, None))
        p.add_argument("--jobs", type=int,
                       default=_env_default("JOBS", int, None))
        p.add_argument("--out-dir", default=_env_default("OUT_DIR", str, "."))
        if config_file:
            p.add_argument("--config", help="JSON run-config file")

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    common(p, config_file=False)
    p.add_argument("--students", type=int, default=425)
    p.add_argument("--weeks", type=int, default=39)
    p.add_argument("--skills", type=int, default=60)
    p.add_argument("--effort-regime", default="surge_plateau",
                   choices=[r.value for r in EffortRegime])
    p.add_argument("--skill-regime", default="rise_then_decline",
                   choices=[r.value for r in SkillRegime])
    p.add_argument("--gap-probability", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="events -> panel with targets")
    common(p)
    p.add_argument("--events", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit-afm", help="rolling learner-model fits + mastery events")
    common(p)
    p.add_argument("--events", required=True)
    p.set_defaults(func=cmd_fit_afm)

    p = sub.add_parser("features", help="panel + fits -> feature matrix")
    common(p)
    p.add_argument("--events", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--afm-params", required=True)
    p.set_defaults(func=cmd_features)

    def protocol(p):
        p.add_argument("--panel", required=True)
        p.add_argument("--matrix", required=True)
        p.add_argument("--matrix-schema", required=True)
        p.add_argument("--predictors", help="comma-separated kind names")
        p.add_argument("--replicates", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--dev-fraction", type=float)

    p = sub.add_parser("benchmark", help="run the predictor benchmark")
    common(p)
    protocol(p)
    p.add_argument("--sensitivity", action="store_true")
    p.add_argument("--save-models")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("ablate", help="feature-group ablation grid")
    common(p)
    protocol(p)
    p.add_argument("--model", default="gradient_boost")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("importance", help="fold-averaged feature importance")
    common(p)
    protocol(p)
    p.add_argument("--top-k", type=int, default=15)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("trends", help="weekly trend CSV + SVG from a report")
    common(p, config_file=False)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_trends)

    p = sub.add_parser("serve", help="run the forecast/recommendation service")
    common(p, config_file=False)
    p.add_argument("--panel", default=_env_default("PANEL", str, None))
    p.add_argument("--matrix", default=_env_default("MATRIX", str, None))
    p.add_argument("--matrix-schema",
                   default=_env_default("MATRIX_SCHEMA", str, None))
    p.add_argument("--model-minutes",
                   default=_env_default("MODEL_MINUTES", str, None))
    p.add_argument("--model-skills",
                   default=_env_default("MODEL_SKILLS", str, None))
    p.add_argument("--scenarios", default=_env_default("SCENARIOS", str, None))
    p.add_argument("--store", default=_env_default("STORE", str, None))
    p.add_argument("--static-dir", default=_env_default("STATIC_DIR", str, None))
    p.add_argument("--blocked-phrases",
                   default=_env_default("BLOCKED_PHRASES", str, None))
    p.add_argument("--session-seed", type=int,
                   default=_env_default("SESSION_SEED", int, 0))
    p.add_argument("--host", default=_env_default("HOST", str, "127.0.0.1"))
    p.add_argument("--port", type=int, default=_env_default("PORT", int, 8000))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError, KeyError) as exc:
        print(stable_dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
