"""Command-line pipeline driver.

Subcommands mirror the pipeline stages::

    agxai train    --dataset survey.csv --out run/        # grid search + fit
    agxai explain  --dataset survey.csv --out run/        # attributions
    agxai run-loop --dataset survey.csv --out run/ --mock replay.json
    agxai analyze  scores.csv --out run/                  # trends + figures

train writes cv_report.csv and forest.json; explain reads forest.json and
writes shap.csv and beeswarm.svg; run-loop archives a refinement session
under <out>/session; analyze writes round_summary.csv,
trajectory_summary.csv, classification_report.csv, fits.json, and one
trajectory SVG per (group, metric including the Average pseudo-metric).

A JSON config file (--config) may supply any long flag as a default, keyed
by its name with dashes as underscores. Explicit flags win. Exit codes:
0 success, 1 input or validation problems, 2 runtime or session failures.
All outputs are deterministic in (inputs, seed): reruns rewrite identical
bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import agent_loop, evaluation, forest as forest_mod, render, shap as shap_mod
from .dataset import default_schema, load_dataset, load_schema
from .errors import ModelError, PipelineError, SessionError
from .evaluation import AVERAGE, METRICS, Group
from .trajectory_stats import GamConfig, classify_trend

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this pipeline reserves 2
    # for runtime failures, so usage problems report as validation instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _setting(args, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _read_dataset(args, config):
    dataset_path = _setting(args, config, "dataset")
    if not dataset_path:
        raise ValueError("--dataset is required (flag or config key)")
    schema_path = _setting(args, config, "schema")
    schema = (load_schema(Path(schema_path).read_text(encoding="utf-8"))
              if schema_path else default_schema())
    return load_dataset(Path(dataset_path).read_text(encoding="utf-8"), schema), dataset_path


def _out_dir(args, config) -> Path:
    out = _setting(args, config, "out")
    if not out:
        raise ValueError("--out is required (flag or config key)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_grid(text: str, seed: int) -> tuple[forest_mod.ForestConfig, ...]:
    """Grid syntax: comma-separated n_estimators:max_depth pairs, with
    none/unlimited for unbounded depth, e.g. 100:10,200:none."""
    configs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        n_text, _, d_text = item.partition(":")
        depth = None if d_text.lower() in ("", "none", "unlimited", "null") \
            else int(d_text)
        configs.append(forest_mod.ForestConfig(int(n_text), depth, seed))
    if not configs:
        raise ValueError(f"empty grid spec: {text!r}")
    return tuple(configs)


def _parse_lambda_grid(text: str) -> tuple[float, ...]:
    """Either comma-separated values or lo:hi:count on a log scale."""
    if ":" in text:
        lo, hi, count = text.split(":")
        return tuple(
            float(10.0 ** e)
            for e in np.linspace(np.log10(float(lo)), np.log10(float(hi)),
                                 int(count))
        )
    return tuple(float(v) for v in text.split(","))


# --- train ----------------------------------------------------------------------

def cmd_train(args) -> int:
    config = _load_config(args.config)
    data, _ = _read_dataset(args, config)
    out = _out_dir(args, config)
    seed = int(_setting(args, config, "seed", forest_mod.DEFAULT_SEED))
    grid_text = _setting(args, config, "grid")
    grid = _parse_grid(grid_text, seed) if grid_text else forest_mod.default_grid(seed)

    report = forest_mod.grid_search(data, grid)
    (out / "cv_report.csv").write_text(forest_mod.cv_report_to_csv(report),
                                       encoding="utf-8")
    fitted = forest_mod.fit_forest(data, report.best_config)
    (out / "forest.json").write_text(forest_mod.forest_to_json(fitted),
                                     encoding="utf-8")
    for cfg, r2 in report.entries:
        marker = " *" if cfg == report.best_config else ""
        print(f"n_estimators={cfg.n_estimators} max_depth={cfg.max_depth} "
              f"loo_r2={r2:.4f}{marker}")
    print(f"wrote {out / 'cv_report.csv'} and {out / 'forest.json'}")
    return EXIT_OK


# --- explain --------------------------------------------------------------------

LOCAL_ACCURACY_TOL = 1e-8


def cmd_explain(args) -> int:
    config = _load_config(args.config)
    data, _ = _read_dataset(args, config)
    out = _out_dir(args, config)
    forest_path = out / "forest.json"
    if not forest_path.exists():
        raise ValueError(f"{forest_path} not found; run `agxai train` first")
    fitted = forest_mod.forest_from_json(forest_path.read_text(encoding="utf-8"))
    top_k = int(_setting(args, config, "top_k", 20))

    matrix = shap_mod.explain_dataset(fitted, data)
    for i in range(len(data)):
        prediction = forest_mod.predict(fitted, data.features[i])
        residual = abs(matrix.base_value + matrix.values[i].sum() - prediction)
        if residual > LOCAL_ACCURACY_TOL:
            raise ModelError(
                f"local accuracy self-check failed on row {data.row_ids[i]!r}: "
                f"|base + sum(shap) - prediction| = {residual:.3e}"
            )

    ranking = shap_mod.rank_features(matrix, top_k=top_k)
    swarm = shap_mod.beeswarm_export(matrix, ranking)
    (out / "shap.csv").write_text(shap_mod.shap_matrix_to_csv(matrix),
                                  encoding="utf-8")
    (out / "beeswarm.svg").write_text(render.plot_beeswarm(swarm),
                                      encoding="utf-8")
    for entry in ranking.entries:
        print(f"{entry.name}: mean|shap|={entry.mean_abs_shap:.5f}")
    print(f"wrote {out / 'shap.csv'} and {out / 'beeswarm.svg'}")
    return EXIT_OK


# --- run-loop -------------------------------------------------------------------

def _variable_list_text(ranking: shap_mod.FeatureRanking, schema) -> str:
    categories = {e.name: e.category.value for e in schema.entries}
    lines = [
        f"{i + 1}. {entry.name} ({categories.get(entry.name, 'Unknown')})"
        for i, entry in enumerate(ranking.entries)
    ]
    return "\n".join(lines)


def cmd_run_loop(args) -> int:
    config = _load_config(args.config)
    data, dataset_path = _read_dataset(args, config)
    out = _out_dir(args, config)
    rounds = int(_setting(args, config, "rounds", agent_loop.DEFAULT_ROUNDS))
    seed = int(_setting(args, config, "seed", 0))
    top_k = int(_setting(args, config, "top_k", 20))

    beeswarm_path = out / "beeswarm.svg"
    forest_path = out / "forest.json"
    if not beeswarm_path.exists() or not forest_path.exists():
        raise ValueError(
            f"{out} is missing forest.json or beeswarm.svg; "
            "run `agxai train` and `agxai explain` first"
        )
    shap_image = beeswarm_path.read_bytes()
    fitted = forest_mod.forest_from_json(forest_path.read_text(encoding="utf-8"))
    matrix = shap_mod.explain_dataset(fitted, data)
    ranking = shap_mod.rank_features(matrix, top_k=top_k)
    variable_list = _variable_list_text(ranking, data.schema)

    template_paths = config.get("templates")
    templates = (
        agent_loop.PromptTemplates.from_files(
            template_paths["prompt1"], template_paths["prompt2"],
            template_paths["prompt3"])
        if template_paths else agent_loop.PromptTemplates.defaults()
    )

    mock = _setting(args, config, "mock")
    if mock:
        client, executor = agent_loop.load_replay(mock)
    else:
        client = agent_loop.HttpLlmClient()
        worker = config.get("executor")
        if not worker:
            raise ValueError(
                'real runs need an "executor" command in the config file'
            )
        executor = agent_loop.SubprocessExecutor(worker)

    session = agent_loop.run_session(
        dataset_path,
        shap_image,
        variable_list,
        templates,
        client,
        executor,
        rounds=rounds,
        seed=seed,
        time_limit_s=float(config.get("time_limit_s",
                                      agent_loop.DEFAULT_TIME_LIMIT_S)),
        continue_on_error=bool(args.continue_on_error
                               or config.get("continue_on_error", False)),
    )
    agent_loop.archive_session(session, out / "session",
                               timestamp=config.get("timestamp"))

    print("round  new_figures  cumulative")
    for round_index, new, cumulative in agent_loop.progression_report(session):
        print(f"{round_index:>5}  {new:>11}  {cumulative:>10}")
    print(f"archived session under {out / 'session'}")

    failed = [r for r in session.rounds if r.status == agent_loop.STATUS_FAILED]
    if failed:
        reasons = "; ".join(
            f"round {r.round_index}: {r.failure_reason}" for r in failed
        )
        print(f"session failed ({reasons})", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# --- analyze --------------------------------------------------------------------

def _classification_rows(matrix, summary, gam_config, rho, alpha):
    for group in summary.groups:
        for metric in (AVERAGE, *METRICS):
            token = metric if metric == AVERAGE else metric.value
            series = evaluation.metric_series(summary, group, metric)
            groups = evaluation.raw_round_groups(matrix, group, metric)
            result = classify_trend(series, groups, gam_config,
                                    rho=rho, alpha=alpha)
            yield group, token, series, evaluation.metric_sems(
                summary, group, metric), result


def _fits_document(rows) -> str:
    doc = {}
    for group, token, series, sems, result in rows:
        gam = result.gam
        doc.setdefault(group.value, {})[token] = {
            "verdict": result.verdict.value,
            "peak_round": result.peak_round,
            "peak_value": result.peak_value,
            "delta_aic": result.delta_aic,
            "note": result.note,
            "series": {"x": series.x.tolist(), "y": series.y.tolist(),
                       "sem": sems.tolist()},
            "anova": {"f": result.anova.f_stat,
                      "df_between": result.anova.df_between,
                      "df_within": result.anova.df_within,
                      "p": result.anova.p_value},
            "linear": {"alpha0": result.linear.alpha0,
                       "alpha1": result.linear.alpha1,
                       "r2": result.linear.r2,
                       "rss": result.linear.rss,
                       "aic": result.linear.aic,
                       "slope_p": result.linear.slope_p},
            "gam": {"lambda": gam.lam, "edf": gam.edf, "rss": gam.rss,
                    "aic": gam.aic, "gcv": gam.gcv,
                    "grid_x": gam.grid_x.tolist(),
                    "curve": gam.curve.tolist(),
                    "lower": gam.lower.tolist(),
                    "upper": gam.upper.tolist()},
        }
    return json.dumps(doc, indent=1)


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    rho = float(_setting(args, config, "rho", 0.25))
    alpha = float(_setting(args, config, "alpha", 0.05))
    lambda_text = _setting(args, config, "lambda_grid")
    gam_config = (GamConfig(lambda_grid=_parse_lambda_grid(lambda_text))
                  if lambda_text else GamConfig())

    matrix = evaluation.scores_from_csv(
        Path(args.scores).read_text(encoding="utf-8"))
    summary = evaluation.aggregate(matrix)
    (out / "round_summary.csv").write_text(evaluation.summary_to_csv(summary),
                                           encoding="utf-8")

    trajectory_lines = ["group,metric,round0,peak_rounds,peak,last_round,last,"
                        "delta_peak_vs_round0,delta_last_vs_peak"]
    for group in summary.groups:
        for metric in (AVERAGE, *METRICS):
            t = evaluation.summarize_trajectory(summary, group, metric)
            peak_rounds = ";".join(str(r) for r in t.peak_rounds)
            trajectory_lines.append(
                f"{group.value},{t.metric},{t.round0!r},{peak_rounds},"
                f"{t.peak!r},{t.last_round},{t.last!r},"
                f"{t.delta_peak_vs_round0!r},{t.delta_last_vs_peak!r}"
            )
    (out / "trajectory_summary.csv").write_text(
        "\n".join(trajectory_lines) + "\n", encoding="utf-8")

    rows = list(_classification_rows(matrix, summary, gam_config, rho, alpha))
    report = io.StringIO()
    writer = csv.writer(report, lineterminator="\n")
    writer.writerow(["group", "metric", "verdict", "peak_round", "peak_value",
                     "delta_aic", "alpha0", "alpha1", "slope_p", "anova_f",
                     "anova_p", "note"])
    for group, token, series, sems, result in rows:
        def opt(v):
            return "" if v is None else repr(v)

        writer.writerow([
            group.value, token, result.verdict.value,
            opt(result.peak_round), opt(result.peak_value),
            opt(result.delta_aic), repr(result.linear.alpha0),
            repr(result.linear.alpha1), repr(result.linear.slope_p),
            repr(result.anova.f_stat), repr(result.anova.p_value), result.note,
        ])
        svg = render.plot_trajectory(series, sems, result,
                                     title=f"{group.value} {token}")
        (out / f"{group.value}_{token}.svg").write_text(svg, encoding="utf-8")
        print(f"{group.value} {token}: {result.verdict.value}"
              + (f" (peak at round {result.peak_round:.2f})"
                 if result.peak_round is not None else ""))
    (out / "classification_report.csv").write_text(report.getvalue(),
                                                   encoding="utf-8")
    (out / "fits.json").write_text(_fits_document(rows), encoding="utf-8")
    print(f"wrote analysis outputs under {out}")
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agxai",
                     description="Yield-model explanation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file with flag defaults")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="study seed")

    p_train = sub.add_parser("train", help="grid-search and fit the forest")
    common(p_train)
    p_train.add_argument("--dataset", help="survey CSV")
    p_train.add_argument("--schema", help="variable catalog CSV (default: built-in)")
    p_train.add_argument("--grid", help="e.g. 100:10,200:none")
    p_train.set_defaults(func=cmd_train)

    p_explain = sub.add_parser("explain", help="attribute predictions")
    common(p_explain)
    p_explain.add_argument("--dataset", help="survey CSV")
    p_explain.add_argument("--schema", help="variable catalog CSV")
    p_explain.add_argument("--top-k", dest="top_k", type=int,
                           help="features in the beeswarm (default 20)")
    p_explain.set_defaults(func=cmd_explain)

    p_loop = sub.add_parser("run-loop", help="run the refinement session")
    common(p_loop)
    p_loop.add_argument("--dataset", help="survey CSV")
    p_loop.add_argument("--schema", help="variable catalog CSV")
    p_loop.add_argument("--rounds", type=int, help="refinement rounds (default 10)")
    p_loop.add_argument("--mock", help="replay JSON for a scripted session")
    p_loop.add_argument("--top-k", dest="top_k", type=int,
                        help="variables listed to the model (default 20)")
    p_loop.add_argument("--continue-on-error", action="store_true",
                        help="keep going past a failed round")
    p_loop.set_defaults(func=cmd_run_loop)

    p_analyze = sub.add_parser("analyze", help="trend-classify score CSV")
    common(p_analyze)
    p_analyze.add_argument("scores", help="scores CSV "
                           "(evaluator_id,group,round,metric,score)")
    p_analyze.add_argument("--rho", type=float,
                           help="CI-exclusion fraction per side (default 0.25)")
    p_analyze.add_argument("--alpha", type=float,
                           help="slope significance level (default 0.05)")
    p_analyze.add_argument("--lambda-grid", dest="lambda_grid",
                           help="comma values or lo:hi:count log grid")
    p_analyze.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SessionError as exc:
        print(f"agxai: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PipelineError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"agxai: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
