"""Command-line pipeline orchestration.

Subcommands: ingest, synth, pairs, match, attrs, eval, curve. All runs are
seeded and config-driven; every artifact embeds the resolved config digest
and tool version, and identical config + seed reruns produce byte-identical
files.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import __version__
from .attrkit import (
    VARIATION,
    identify_attributes,
    heuristic_labels,
)
from .catalog import CatalogStore, export_catalog, ingest_catalog
from .config import RunConfig, load_config
from .errors import ConfigError, VarmatchError
from .evalkit import (
    auroc,
    attr_accuracy,
    basic_metrics,
    classify_score,
    confusion,
    learning_curve,
    summarize_recall,
)
from .matchkit import (
    ATTR_GEN_PARAMS,
    BaselineHandle,
    ClassifierHandle,
    EndpointConfig,
    GenerativeHandle,
    GenParams,
    OracleHandle,
    RemoteHandle,
)
from .normalize import DEFAULT_TOKENIZER
from .pairforge import (
    NegativeMix,
    export_pairs,
    extract_positive_pairs,
    read_pairs,
    sample_negatives,
    sample_random_negatives,
    split_dataset,
)
from .report import (
    CURVE_COLUMNS,
    METRICS_COLUMNS,
    bar_figure,
    curve_figure,
    curve_rows,
    write_csv,
    write_json,
)
from .synth import SynthSpec, synth_catalog

EXIT_CODES = {"config": 2, "data": 3, "transport": 4, "parse": 5, "internal": 1}


def _fail(error: VarmatchError) -> None:
    click.echo(f"error[{error.category}]: {error}", err=True)
    if isinstance(error, ConfigError):
        for violation in error.violations:
            click.echo(f"  - {violation}", err=True)
    sys.exit(EXIT_CODES.get(error.category, 1))


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except VarmatchError as error:
            _fail(error)

    return wrapper


def config_options(func):
    func = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                        help="JSON config file; flags override its values.")(func)
    func = click.option("--seed", type=int, default=None, help="Run seed.")(func)
    func = click.option("--workers", type=int, default=None, help="Bound on request concurrency.")(func)
    return func


def _resolve(config_path, **overrides) -> RunConfig:
    return load_config(config_path, overrides)


@click.group()
@click.version_option(version=__version__, prog_name="varmatch")
def main():
    """Variant-product matching pipeline."""


@main.command()
@click.argument("catalog", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Re-export the normalized catalog here.")
@handle_errors
def ingest(catalog, out):
    """Validate and summarize a catalog file."""
    store = ingest_catalog(catalog)
    report = store.report
    click.echo(report.summary())
    if out:
        export_catalog(store, out)
        click.echo(f"wrote {out}")


@main.command()
@config_options
@click.option("--out", type=click.Path(), required=True, help="Catalog file to write.")
@click.option("--types", type=int, default=2, show_default=True)
@click.option("--brands-per-type", type=int, default=2, show_default=True)
@click.option("--groups-per-brand", type=int, default=5, show_default=True)
@click.option("--size-min", type=int, default=2, show_default=True)
@click.option("--size-max", type=int, default=4, show_default=True)
@click.option("--variation-keys", type=int, default=1, show_default=True,
              help="Planted variation keys per group.")
@click.option("--variation-keys-max", type=int, default=None,
              help="Upper bound when planting a seeded range of keys.")
@click.option("--variation-key-pool", default=None,
              help="Comma-separated pool to draw variation keys from.")
@click.option("--common-keys", default="fabric,origin", show_default=True,
              help="Comma-separated common attribute keys.")
@click.option("--per-group-keys", default="", help="Comma-separated per-group serial keys.")
@click.option("--per-product-keys", default="", help="Comma-separated per-product serial keys.")
@click.option("--common-value-choices", type=int, default=8, show_default=True)
@click.option("--variation-value-choices", type=int, default=None,
              help="Restrict variation values to the first N vocabulary entries.")
@handle_errors
def synth(config_path, seed, workers, out, types, brands_per_type, groups_per_brand,
          size_min, size_max, variation_keys, variation_keys_max, variation_key_pool,
          common_keys, per_group_keys, per_product_keys, common_value_choices,
          variation_value_choices):
    """Generate a seeded synthetic catalog."""
    config = _resolve(config_path, seed=seed, workers=workers)
    split_csv = lambda raw: tuple(k.strip() for k in raw.split(",") if k.strip())
    spec_kwargs = {}
    if variation_key_pool:
        spec_kwargs["variation_key_pool"] = split_csv(variation_key_pool)
    spec = SynthSpec(
        n_types=types,
        brands_per_type=brands_per_type,
        groups_per_brand=groups_per_brand,
        group_size_range=(size_min, size_max),
        variation_keys_per_group=(
            (variation_keys, variation_keys_max) if variation_keys_max else variation_keys
        ),
        common_keys=split_csv(common_keys),
        per_group_keys=split_csv(per_group_keys),
        per_product_keys=split_csv(per_product_keys),
        common_value_choices=common_value_choices,
        variation_value_choices=variation_value_choices,
        **spec_kwargs,
    )
    store = synth_catalog(spec, config.seed)
    export_catalog(store, out, extra_meta={"seed": config.seed, **config.artifact_meta()})
    click.echo(f"wrote {out}: {len(store.products)} products, {len(store.groups)} groups")


def _negative_mix(config: RunConfig) -> NegativeMix:
    return NegativeMix(hard=config.mix_hard, medium=config.mix_medium, easy=config.mix_easy)


@main.command()
@config_options
@click.option("--catalog", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Pair file to write.")
@click.option("--mix", default=None, help="hard,medium,easy fractions (e.g. 0.5,0.3,0.2).")
@click.option("--count", type=int, default=None, help="Negatives to sample (default: one per positive).")
@click.option("--ratio", type=float, default=None, help="Train fraction.")
@click.option("--budget", type=int, default=None, help="Serialization token budget.")
@click.option("--sampler", type=click.Choice(["informed", "random"]), default=None)
@handle_errors
def pairs(config_path, seed, workers, catalog, out, mix, count, ratio, budget, sampler):
    """Build positives, sample negatives, split and export."""
    overrides = {"seed": seed, "workers": workers, "ratio": ratio, "budget": budget,
                 "sampler": sampler, "negatives": count}
    if mix is not None:
        parts = [p.strip() for p in mix.split(",")]
        if len(parts) != 3:
            raise ConfigError(["mix: expected three comma-separated fractions"])
        try:
            hard, medium, easy = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(["mix: fractions must be numbers"])
        overrides.update({"mix_hard": hard, "mix_medium": medium, "mix_easy": easy})
    config = _resolve(config_path, **overrides)

    store = ingest_catalog(catalog)
    positives = extract_positive_pairs(store)
    n_negatives = config.negatives if config.negatives is not None else len(positives)
    if config.sampler == "informed":
        negatives = sample_negatives(store, positives, _negative_mix(config), n_negatives, config.seed)
    else:
        negatives = sample_random_negatives(store, positives, n_negatives, config.seed)
    split = split_dataset(positives + negatives, config.ratio, config.seed)
    export_pairs(split, store, DEFAULT_TOKENIZER, out, config.budget,
                 extra_meta=config.artifact_meta())

    tallies: dict[str, int] = {}
    for pair in split.train + split.eval:
        tallies[pair.bucket] = tallies.get(pair.bucket, 0) + 1
    click.echo(f"positives={len(positives)} negatives={len(negatives)}")
    click.echo("bucket tallies (after split): "
               + " ".join(f"{k}={v}" for k, v in sorted(tallies.items())))
    click.echo(split.report.summary())
    click.echo(f"train={len(split.train)} eval={len(split.eval)} "
               f"train_fraction={split.train_fraction():.4f}")
    click.echo(f"wrote {out}")


def _build_backend(config: RunConfig, store: CatalogStore | None) -> ClassifierHandle:
    if config.backend == "baseline":
        return BaselineHandle()
    if config.backend == "oracle":
        if store is None:
            raise ConfigError(["backend: oracle requires --catalog"])
        return OracleHandle.from_store(store)
    if config.backend == "remote":
        if not config.scoring_endpoint:
            raise ConfigError(["scoring_endpoint: required for the remote backend"])
        endpoint = EndpointConfig(config.scoring_endpoint, timeout=config.timeout,
                                  max_attempts=config.max_attempts, concurrency=config.workers)
        return RemoteHandle(endpoint, DEFAULT_TOKENIZER, config.budget)
    if not config.generative_endpoint:
        raise ConfigError(["generative_endpoint: required for the generative backend"])
    endpoint = EndpointConfig(config.generative_endpoint, timeout=config.timeout,
                              max_attempts=config.max_attempts, concurrency=config.workers)
    params = GenParams(max_tokens=config.match_max_tokens,
                       temperature=config.match_temperature, top_k=config.match_top_k)
    return GenerativeHandle(endpoint, params)


@main.command()
@config_options
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True,
              help="Exported pair file.")
@click.option("--catalog", type=click.Path(exists=True), required=True)
@click.option("--backend", type=click.Choice(["baseline", "oracle", "remote", "generative"]),
              default=None)
@click.option("--endpoint", default=None, help="Scoring or completion endpoint URL.")
@click.option("--split", "which_split", type=click.Choice(["train", "eval"]), default="eval",
              show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Score file to write.")
@handle_errors
def match(config_path, seed, workers, pairs_path, catalog, backend, endpoint, which_split, out):
    """Score an exported pair set against a chosen backend."""
    overrides = {"seed": seed, "workers": workers, "backend": backend}
    config = _resolve(config_path, **overrides)
    if endpoint:
        key = "scoring_endpoint" if config.backend == "remote" else "generative_endpoint"
        config = _resolve(config_path, **{**overrides, key: endpoint})
    store = ingest_catalog(catalog)
    pair_file = read_pairs(pairs_path)
    rows = pair_file.rows_for(which_split)
    handle = _build_backend(config, store)
    scores = handle.score_batch(
        [(store.products[r.pair.left_id], store.products[r.pair.right_id]) for r in rows]
    )
    with Path(out).open("w", encoding="utf-8") as sink:
        meta = {"record": "meta", "kind": "scores", "backend": handle.kind,
                "split": which_split, "seed": config.seed, **config.artifact_meta()}
        sink.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for row, score in zip(rows, scores):
            sink.write(json.dumps({
                "record": "score",
                "left_id": row.pair.left_id,
                "right_id": row.pair.right_id,
                "gold": row.pair.label,
                "score": score.probability,
            }, ensure_ascii=False) + "\n")
    click.echo(f"scored {len(rows)} pairs with backend={handle.kind}; wrote {out}")


@main.command()
@config_options
@click.option("--catalog", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["heuristic", "generative", "generative-rag"]),
              default="heuristic", show_default=True)
@click.option("--endpoint", default=None, help="Completion endpoint URL.")
@click.option("--out", type=click.Path(), required=True, help="Attribute report to write.")
@handle_errors
def attrs(config_path, seed, workers, catalog, method, endpoint, out):
    """Label variation/common attributes for each catalog group."""
    overrides = {"seed": seed, "workers": workers}
    if endpoint:
        overrides["generative_endpoint"] = endpoint
    config = _resolve(config_path, **overrides)
    store = ingest_catalog(catalog)
    handle = None
    if method != "heuristic":
        if not config.generative_endpoint:
            raise ConfigError(["generative_endpoint: required for generative methods"])
        endpoint_config = EndpointConfig(config.generative_endpoint, timeout=config.timeout,
                                         max_attempts=config.max_attempts,
                                         concurrency=config.workers)
        handle = GenerativeHandle(endpoint_config, ATTR_GEN_PARAMS)
    attr_params = GenParams(max_tokens=config.attr_max_tokens,
                            temperature=config.attr_temperature, top_p=config.attr_top_p)

    n_done = n_failed = 0
    with Path(out).open("w", encoding="utf-8") as sink:
        meta = {"record": "meta", "kind": "attrs", "method": method,
                "seed": config.seed, **config.artifact_meta()}
        sink.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for group_id in sorted(store.groups):
            members = store.group_members(group_id)
            if len(members) < 2:
                continue
            record = {"record": "attrs", "group_id": group_id, "method": method}
            try:
                if method == "heuristic":
                    record.update({"labels": heuristic_labels(members),
                                   "penalty_count": 0, "raw": None})
                else:
                    result = identify_attributes(handle, members,
                                                 use_rag=(method == "generative-rag"),
                                                 store=store, params=attr_params)
                    record.update({
                        "labels": result.labels,
                        "penalty_count": result.penalty_count,
                        "raw": {
                            "Different": list(result.prediction.different),
                            "Same": list(result.prediction.same),
                            "Reason": list(result.prediction.reason),
                        },
                    })
                n_done += 1
            except VarmatchError as error:
                # one bad group must not abort the batch
                record.update({"labels": None, "penalty_count": None, "raw": None,
                               "error": str(error), "error_category": error.category})
                n_failed += 1
            sink.write(json.dumps(record, ensure_ascii=False) + "\n")
    click.echo(f"labeled {n_done} groups ({n_failed} failed); wrote {out}")


def _read_jsonl(path: str) -> tuple[dict, list[dict]]:
    meta: dict = {}
    records: list[dict] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("record") == "meta":
                meta = obj
            else:
                records.append(obj)
    return meta, records


@main.command("eval")
@config_options
@click.option("--scores", "scores_path", type=click.Path(exists=True), default=None,
              help="Score file from `varmatch match`.")
@click.option("--attrs-report", type=click.Path(exists=True), default=None,
              help="Attribute report from `varmatch attrs`.")
@click.option("--catalog", type=click.Path(exists=True), default=None,
              help="Catalog with gold variation keys (required with --attrs-report).")
@click.option("--threshold", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Report directory.")
@handle_errors
def eval_cmd(config_path, seed, workers, scores_path, attrs_report, catalog, threshold, out_dir):
    """Compute metrics reports (and figures) from score / attribute files."""
    config = _resolve(config_path, seed=seed, workers=workers, threshold=threshold)
    if not scores_path and not attrs_report:
        raise ConfigError(["eval: provide --scores and/or --attrs-report"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload: dict = {"seed": config.seed, **config.artifact_meta()}
    csv_rows = []

    if scores_path:
        _, records = _read_jsonl(scores_path)
        score_values = [float(r["score"]) for r in records]
        gold = [r["gold"] for r in records]
        verdicts = [classify_score(v, config.threshold) for v in score_values]
        metrics = basic_metrics(confusion(verdicts, gold), config.digest())
        has_both = len({g for g in gold}) == 2
        metrics.auroc = auroc(score_values, gold) if has_both else None
        payload["match"] = metrics.as_row()
        payload["match"]["threshold"] = config.threshold
        csv_rows.append({"kind": "match", "seed": config.seed, "skipped": 0,
                         **metrics.as_row()})
        figure_values = {"accuracy": metrics.accuracy, "precision": metrics.precision,
                         "recall": metrics.recall, "f1": metrics.f1}
        if metrics.auroc is not None:
            figure_values = {"auroc": metrics.auroc, **figure_values}
        bar_figure(figure_values, out / "match_metrics.png", title="variant match metrics")

    if attrs_report:
        if not catalog:
            raise ConfigError(["catalog: required with --attrs-report"])
        store = ingest_catalog(catalog)
        _, records = _read_jsonl(attrs_report)
        recall_inputs = []
        correct_common = total_common = correct_variation = total_variation = 0
        evaluated = 0
        for record in records:
            labels = record.get("labels")
            group = store.groups.get(record.get("group_id"))
            if labels is None or group is None or group.gold_variation_keys is None:
                continue
            evaluated += 1
            predicted_variation = {k for k, v in labels.items() if v == VARIATION}
            recall_inputs.append((predicted_variation, set(group.gold_variation_keys)))
            member_keys: set[str] = set()
            for member in store.group_members(group.group_id):
                member_keys.update(member.attribute_keys())
            gold_map = {key: (VARIATION if key in group.gold_variation_keys else "common")
                        for key in member_keys}
            acc = attr_accuracy(labels, gold_map)
            correct_common += acc.common.correct
            total_common += acc.common.total
            correct_variation += acc.variation.correct
            total_variation += acc.variation.total
        recall_all = summarize_recall(recall_inputs)
        recall_cs = summarize_recall(recall_inputs, filter_keys={"color", "size"})
        overall_total = total_common + total_variation
        payload["attrs"] = {
            "groups_evaluated": evaluated,
            "recall_all": recall_all.mean_recall,
            "recall_all_skipped": recall_all.skipped,
            "recall_color_size": recall_cs.mean_recall,
            "recall_color_size_skipped": recall_cs.skipped,
            "accuracy_common": (correct_common / total_common) if total_common else 0.0,
            "accuracy_variation": (correct_variation / total_variation) if total_variation else 0.0,
            "accuracy_all": ((correct_common + correct_variation) / overall_total)
            if overall_total else 0.0,
        }
        csv_rows.append({"kind": "attrs", "seed": config.seed,
                         "config_digest": config.digest(), "n": evaluated,
                         "recall": payload["attrs"]["recall_all"],
                         "accuracy": payload["attrs"]["accuracy_all"],
                         "skipped": recall_all.skipped, "flags": ""})
        bar_figure({
            "recall (color,size)": payload["attrs"]["recall_color_size"],
            "recall (all)": payload["attrs"]["recall_all"],
            "acc common": payload["attrs"]["accuracy_common"],
            "acc variation": payload["attrs"]["accuracy_variation"],
            "acc all": payload["attrs"]["accuracy_all"],
        }, out / "attr_metrics.png", title="attribute identification")

    write_json(payload, out / "report.json")
    write_csv(csv_rows, METRICS_COLUMNS, out / "report.csv")
    click.echo(f"wrote {out / 'report.json'}")
    for key in ("match", "attrs"):
        if key in payload:
            click.echo(f"{key}: " + json.dumps(payload[key], sort_keys=True))


@main.command()
@config_options
@click.option("--catalog", type=click.Path(exists=True), required=True)
@click.option("--sizes", required=True, help="Comma-separated ascending train sizes.")
@click.option("--backend", type=click.Choice(["baseline", "oracle", "remote", "generative"]),
              default=None)
@click.option("--endpoint", default=None)
@click.option("--sampler", type=click.Choice(["informed", "random"]), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Report directory.")
@handle_errors
def curve(config_path, seed, workers, catalog, sizes, backend, endpoint, sampler, out_dir):
    """Run the training-set-size learning curve for a backend."""
    overrides = {"seed": seed, "workers": workers, "backend": backend, "sampler": sampler}
    config = _resolve(config_path, **overrides)
    if endpoint:
        key = "scoring_endpoint" if config.backend == "remote" else "generative_endpoint"
        config = _resolve(config_path, **{**overrides, key: endpoint})
    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(["sizes: must be comma-separated integers"])
    store = ingest_catalog(catalog)
    handle = _build_backend(config, store)
    points = learning_curve(
        store, size_list, handle, config.seed,
        mix=_negative_mix(config), sampler=config.sampler,
        ratio=config.ratio, threshold=config.threshold,
        config_digest=config.digest(),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = curve_rows(points, seed=config.seed)
    write_csv(rows, CURVE_COLUMNS, out / "curve.csv")
    write_json(rows, out / "curve.json")
    curve_figure(points, out / "curve.png", title=f"{handle.kind} learning curve")
    click.echo(f"wrote {out / 'curve.csv'}")
    for row in rows:
        click.echo(json.dumps(row, sort_keys=True))


if __name__ == "__main__":
    main()
