"""Command-line entry point.

Subcommands: synth, process, train, eval, cv, infer, bench. Config-driven
commands take one JSON document plus ``--set path.key=value`` overrides and
write only into the configured output directory. Exit codes: 0 ok,
2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import config as cfgmod
from .bench import CSV_HEADER, bench_inference
from .dsp.pipeline import (
    PipelineConfig,
    read_segment_dump,
    run_pipeline_config,
    write_segment_dump,
)
from .errors import ConfigError, ConfigInvalidValue, DataError, PulseSenseError
from .ingest import align, parse_canonical, parse_esp32_csv, parse_labels, write_canonical
from .nn.model import init_params
from .nn.serialize import load_model, save_model
from .streaming import StreamingPredictor, streaming_column_means
from .synth import generate
from .training import (
    TrainingConfig,
    evaluate,
    kfold_cv,
    split_segments,
    train,
)

MODE_THRESHOLDS = {"heart": 1.5, "breath": 0.75}


def _write(path: str, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def _out_dir(cfg: dict) -> str:
    out = cfgmod.validate_output(cfgmod.require_block(cfg, "output"))
    os.makedirs(out, exist_ok=True)
    return out


def _load_stream(cfg_ingest: dict):
    with open(cfg_ingest["path"], "rb") as fh:
        data = fh.read()
    if cfg_ingest.get("format", "canonical") == "esp32":
        return parse_esp32_csv(data, cfg_ingest.get("sample_rate_hz"))
    return parse_canonical(data)


def _load_recording(cfg: dict):
    ingest = cfgmod.validate_ingest(cfgmod.require_block(cfg, "ingest"))
    stream = _load_stream(ingest)
    labels_cfg = ingest.get("labels")
    if labels_cfg is None:
        raise ConfigInvalidValue("ingest.labels is required for this command")
    with open(labels_cfg["path"], "rb") as fh:
        labels = parse_labels(fh.read(), labels_cfg["kind"])
    return align(stream, labels)


def cmd_synth(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    scenario = cfgmod.scenario_from_config(cfgmod.require_block(cfg, "synth"))
    out = _out_dir(cfg)
    rec = generate(scenario)
    _write(os.path.join(out, "stream.jsonl"), write_canonical(rec.stream))
    for name, series in (("heart", rec.heart), ("breath", rec.breath),
                         ("apnea", rec.apnea)):
        lines = [f"{float(t)!r},{float(v)!r}"
                 for t, v in zip(series.timestamps, series.values)]
        _write(os.path.join(out, f"labels_{name}.csv"), "\n".join(lines) + "\n")
    print(f"wrote {rec.stream.frame_count} frames "
          f"({scenario.name}) to {out}")
    return 0


def _process_segments(cfg: dict):
    pipeline_cfg = PipelineConfig.from_dict(cfg.get("pipeline", {}))
    recording = _load_recording(cfg)
    segments = run_pipeline_config(recording, pipeline_cfg)
    return segments, pipeline_cfg, recording


def cmd_process(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    out = _out_dir(cfg)
    segments, pipeline_cfg, _ = _process_segments(cfg)
    _write(os.path.join(out, "segments.psseg"), write_segment_dump(segments))
    w, s = segments[0].values.shape
    summary = {"count": len(segments), "window_packets": w, "subcarriers": s,
               "pipeline": pipeline_cfg.to_dict()}
    _write(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    print(f"wrote {len(segments)} segments of {w}x{s} to {out}")
    return 0


def _segments_for_training(cfg: dict, training_cfg: TrainingConfig):
    if training_cfg.segments_path:
        with open(training_cfg.segments_path, "rb") as fh:
            x, y = read_segment_dump(fh.read())
        pipeline_cfg = PipelineConfig.from_dict(cfg.get("pipeline", {}))
        return x, y, pipeline_cfg
    segments, pipeline_cfg, _ = _process_segments(cfg)
    x = np.stack([seg.values for seg in segments])
    y = np.asarray([seg.label for seg in segments])
    return x, y, pipeline_cfg


def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    out = _out_dir(cfg)
    training_cfg = TrainingConfig.from_dict(cfg.get("training", {}))
    x, y, pipeline_cfg = _segments_for_training(cfg, training_cfg)
    head = "binary" if pipeline_cfg.mode == "apnea" else "regression"
    model_cfg = cfgmod.model_config_from_dict(
        cfg.get("model", {}), input_dim=x.shape[2], head=head)

    idx = split_segments(x.shape[0], training_cfg)
    params, history = train((x[idx.train], y[idx.train]), model_cfg, training_cfg,
                            val_segments=(x[idx.val], y[idx.val]))
    threshold = MODE_THRESHOLDS.get(pipeline_cfg.mode, 1.5)
    report = evaluate(params, (x[idx.test], y[idx.test]), threshold=threshold)

    _write(os.path.join(out, "model.psnn"),
           save_model(params, extra={"pipeline": pipeline_cfg.to_dict()}))
    _write(os.path.join(out, "history.csv"), history.to_csv())
    _write(os.path.join(out, "metrics.json"), report.to_json() + "\n")
    print(f"trained {history.stopped_epoch} epochs "
          f"(best {history.best_epoch}); metrics in {out}")
    return 0


def cmd_eval(args) -> int:
    with open(args.model, "rb") as fh:
        params, _ = load_model(fh.read())
    with open(args.data, "rb") as fh:
        x, y = read_segment_dump(fh.read())
    report = evaluate(params, (x, y), threshold=args.threshold,
                      decision_threshold=args.decision_threshold)
    text = report.to_json() + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cv(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    out = _out_dir(cfg)
    training_cfg = TrainingConfig.from_dict(cfg.get("training", {}))
    x, y, pipeline_cfg = _segments_for_training(cfg, training_cfg)
    head = "binary" if pipeline_cfg.mode == "apnea" else "regression"
    model_cfg = cfgmod.model_config_from_dict(
        cfg.get("model", {}), input_dim=x.shape[2], head=head)
    threshold = MODE_THRESHOLDS.get(pipeline_cfg.mode, 1.5)
    reports, aggregate = kfold_cv((x, y), model_cfg, training_cfg, k=args.k,
                                  threshold=threshold)
    doc = aggregate.to_json_dict()
    _write(os.path.join(out, "cv.json"), json.dumps(doc, indent=2) + "\n")
    print(f"{args.k}-fold CV done; aggregate in {out}/cv.json")
    return 0


def _iter_canonical_packets(path: str):
    """Yield (timestamp, complex row) pairs without materializing the file."""
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            if line.strip():
                header = json.loads(line)
                break
        if header is None or header.get("schema") != "pulse-sense/csi/v1":
            from .errors import SchemaMismatch
            raise SchemaMismatch("stream source is not canonical JSONL")
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            yield float(obj["t"]), (np.asarray(obj["re"], dtype=np.float64)
                                    + 1j * np.asarray(obj["im"], dtype=np.float64))


def cmd_infer(args) -> int:
    with open(args.model, "rb") as fh:
        params, extra = load_model(fh.read())
    pipeline_block = {}
    if extra and "pipeline" in extra:
        pipeline_block = extra["pipeline"]
    if args.config:
        cfg = cfgmod.load_config(args.config, args.set)
        if "pipeline" in cfg:
            pipeline_block = cfg["pipeline"]
    pipeline_cfg = PipelineConfig.from_dict(pipeline_block)

    with open(args.stream, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
    fs = float(header["sample_rate_hz"])

    mu, _count = streaming_column_means(
        (row for _, row in _iter_canonical_packets(args.stream)),
        pipeline_cfg.subcarriers)
    predictor = StreamingPredictor(params, pipeline_cfg, fs, mu)

    sink = open(args.out, "w") if args.out else sys.stdout
    try:
        for t, row in _iter_canonical_packets(args.stream):
            for t_end, pred in predictor.push(t, row):
                sink.write(f"{t_end!r},{pred!r}\n")
        for t_end, pred in predictor.finish():
            sink.write(f"{t_end!r},{pred!r}\n")
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_bench(args) -> int:
    if args.model:
        with open(args.model, "rb") as fh:
            params, _ = load_model(fh.read())
        name = os.path.basename(args.model)
    else:
        from .nn.model import ModelConfig
        params = init_params(ModelConfig(input_dim=args.input_dim), seed=0)
        name = "fresh"
    report = bench_inference(params, args.seq_len, args.batch,
                             n_preds_target=args.n_preds, model_name=name)
    text = CSV_HEADER + "\n" + report.csv_row() + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsesense",
        description="CSI vital-sign estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--set", action="append", metavar="PATH.KEY=VALUE",
                       help="override a config value")
        p.set_defaults(fn=fn)
        return p

    add_config_cmd("synth", cmd_synth, "generate a synthetic recording")
    add_config_cmd("process", cmd_process, "run the DSP pipeline, dump segments")
    add_config_cmd("train", cmd_train, "train a model on processed segments")
    cv = add_config_cmd("cv", cmd_cv, "k-fold cross-validation")
    cv.add_argument("--k", type=int, default=10)

    ev = sub.add_parser("eval", help="evaluate a model on a segment dump")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--threshold", type=float, default=1.5)
    ev.add_argument("--decision-threshold", type=float, default=0.5)
    ev.add_argument("--out")
    ev.set_defaults(fn=cmd_eval)

    inf = sub.add_parser("infer", help="streaming inference over a recording")
    inf.add_argument("--model", required=True)
    inf.add_argument("--stream", required=True, help="canonical JSONL recording")
    inf.add_argument("--config", help="optional config overriding the pipeline block")
    inf.add_argument("--set", action="append", metavar="PATH.KEY=VALUE")
    inf.add_argument("--out")
    inf.set_defaults(fn=cmd_infer)

    be = sub.add_parser("bench", help="inference throughput report")
    be.add_argument("--model")
    be.add_argument("--input-dim", type=int, default=64,
                    help="used when no --model is given")
    be.add_argument("--seq-len", type=int, required=True)
    be.add_argument("--batch", type=int, default=64)
    be.add_argument("--n-preds", type=int, default=2048)
    be.add_argument("--out")
    be.set_defaults(fn=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except PulseSenseError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
