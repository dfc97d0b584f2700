"""Batch command-line entry point.

Commands: synth, augment, invert, diagnose {psd-shift | triangle-spectrum |
local-snr | apex-sweep}, stratify, metrics.  Every command takes explicit
seeds and writes a machine-readable manifest, so runs are byte-reproducible
regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .augment import load_policy
from .dataset import load_corpus_index, save_fold_assignment, stratify_folds
from .metrics import bootstrap_ci, evaluate_metric, load_predictions, select_threshold
from .records import load_metadata, load_record, save_metadata, save_record
from .rpeaks import RPeakSet, detect_rpeaks, load_peak_list, save_peak_list
from .spectral import (
    DiagnosticsParams,
    apex_bias_sweep,
    local_snr,
    psd_shift,
    triangle_spectrum,
)
from .star import star_inverse
from .synth import SynthSpec, synth_ecg
from . import augment as augment_mod

MANIFEST_VERSION = "starmanifest/1"


def _find_records(directory: str) -> list[str]:
    names = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if name.endswith(".csv") or os.path.exists(path + ".hdr"):
            names.append(name)
    return names


def _write_manifest(out_dir: str, command: str, args: dict, records: list) -> None:
    doc = {
        "format": MANIFEST_VERSION,
        "toolkit_version": __version__,
        "command": command,
        "args": args,
        "records": sorted(records, key=lambda r: r.get("record", "")),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _loggable(entry: dict) -> dict:
    out = {}
    for key, value in entry.items():
        if key == "metadata":
            continue
        if isinstance(value, (np.integer,)):
            value = int(value)
        elif isinstance(value, (np.floating,)):
            value = float(value)
        out[key] = value
    return out


def cmd_augment(args) -> int:
    policy = load_policy(args.policy)
    if args.seed is not None:
        policy = augment_mod.PolicyConfig(steps=policy.steps,
                                          master_seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    names = _find_records(args.in_dir)
    failures = []
    entries = []

    def work(name):
        record = load_record(os.path.join(args.in_dir, name))
        out, log = augment_mod.apply_policy(record, policy)
        save_record(out, os.path.join(args.out_dir, name))
        meta_name = None
        if args.emit_meta:
            for entry in log:
                if entry["kind"] == "star" and "metadata" in entry:
                    meta_name = name + ".meta"
                    save_metadata(entry["metadata"],
                                  os.path.join(args.out_dir, meta_name))
        return {
            "record": name,
            "steps": [_loggable(e) for e in log],
            "meta_file": meta_name,
        }

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = {name: pool.submit(work, name) for name in names}
    for name, fut in futures.items():
        try:
            entries.append(fut.result())
        except Exception as exc:
            failures.append(name)
            entries.append({"record": name, "error": str(exc)})
    _write_manifest(args.out_dir, "augment", {
        "policy": os.path.abspath(args.policy),
        "master_seed": policy.master_seed,
        "emit_meta": bool(args.emit_meta),
    }, entries)
    if failures:
        print(f"augment: {len(failures)} record(s) failed: {failures}",
              file=sys.stderr)
        return 1
    return 0


def cmd_invert(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    names = _find_records(args.in_dir)
    entries = []
    failures = []
    for name in names:
        meta_path = os.path.join(args.meta_dir, name + ".meta")
        if not os.path.exists(meta_path):
            entries.append({"record": name, "skipped": "missing metadata"})
            print(f"invert: skipping {name}: no metadata", file=sys.stderr)
            continue
        try:
            record = load_record(os.path.join(args.in_dir, name))
            meta = load_metadata(meta_path)
            restored = star_inverse(record, meta)
            save_record(restored, os.path.join(args.out_dir, name))
            entry = {"record": name}
            if args.reference:
                ref = load_record(os.path.join(args.reference, name))
                num = float(np.linalg.norm(restored.data - ref.data))
                den = float(np.linalg.norm(ref.data))
                entry["relative_l2_error"] = num / den if den else num
                print(f"{name}\t{entry['relative_l2_error']:.3e}")
            entries.append(entry)
        except Exception as exc:
            failures.append(name)
            entries.append({"record": name, "error": str(exc)})
    _write_manifest(args.out_dir, "invert", {
        "meta_dir": os.path.abspath(args.meta_dir),
        "reference": os.path.abspath(args.reference) if args.reference else None,
    }, entries)
    return 1 if failures else 0


def _emit_table(rows, out_path):
    text = "\n".join("\t".join(str(v) for v in row) for row in rows) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_diagnose(args) -> int:
    params = DiagnosticsParams(
        welch_segment_s=args.welch_segment,
        snr_window_ms=args.snr_window_ms,
        snr_cap_db=args.snr_cap_db,
    )
    if args.subcommand == "triangle-spectrum":
        freqs = np.arange(0.0, args.freq_max + 1e-12, args.freq_step)
        mags = triangle_spectrum(args.duration, freqs)
        _emit_table(zip(freqs, mags), args.out)
        return 0
    record = load_record(args.record)
    if args.subcommand == "psd-shift":
        other = load_record(args.other)
        lead = args.lead
        freqs, delta, flagged = psd_shift(record.data[lead], other.data[lead],
                                          record.fs_hz, params)
        _emit_table(
            ((f, d, int(fl)) for f, d, fl in zip(freqs, delta, flagged)),
            args.out)
        return 0
    peaks = (RPeakSet(indices=load_peak_list(args.peaks), ref_lead=args.lead)
             if args.peaks else detect_rpeaks(record, ref_lead=args.lead))
    if args.subcommand == "local-snr":
        snrs = local_snr(record, peaks, params)
        _emit_table(zip(peaks.indices, snrs), args.out)
        return 0
    if args.subcommand == "apex-sweep":
        fractions = np.linspace(0.0, 1.0, args.sweep_points)
        curve = apex_bias_sweep(record, peaks, args.alpha, fractions)
        _emit_table(zip(fractions, curve), args.out)
        return 0
    raise AssertionError(args.subcommand)


def cmd_stratify(args) -> int:
    index = load_corpus_index(args.index)
    assignment = stratify_folds(index, k=args.k, seed=args.seed)
    save_fold_assignment(assignment, args.out)
    return 0


def cmd_metrics(args) -> int:
    preds = load_predictions(args.predictions)
    report = {}
    for metric in args.metric:
        if args.bootstrap:
            point, lo, hi, redrawn = bootstrap_ci(
                preds, metric, n_boot=args.bootstrap, alpha=args.alpha,
                seed=args.seed)
            report[metric] = {"point": point, "ci_lower": lo, "ci_upper": hi,
                              "redrawn_resamples": redrawn}
        else:
            report[metric] = {"point": evaluate_metric(preds, metric)}
    if args.threshold_criterion:
        thresholds, degenerate = select_threshold(preds,
                                                  args.threshold_criterion)
        report["thresholds"] = {
            "criterion": args.threshold_criterion,
            "values": [float(v) for v in thresholds],
            "degenerate_classes": degenerate,
        }
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_synth(args) -> int:
    if args.duration <= 0:
        print("synth: duration must be positive", file=sys.stderr)
        return 1
    os.makedirs(args.out_dir, exist_ok=True)
    entries = []
    for i in range(args.count):
        seed = args.seed + i
        spec = SynthSpec(
            fs_hz=args.fs, duration_s=args.duration,
            heart_rate_bpm=args.heart_rate,
            hr_jitter_fraction=args.jitter, noise_sigma=args.noise,
            n_leads=args.leads, seed=seed,
        )
        record, peaks, _ = synth_ecg(spec)
        name = f"{record.record_id}.sig"
        save_record(record, os.path.join(args.out_dir, name))
        save_peak_list(peaks.indices,
                       os.path.join(args.out_dir, name + ".peaks"))
        entries.append({"record": name, "seed": seed,
                        "n_peaks": len(peaks)})
    _write_manifest(args.out_dir, "synth", {
        "fs": args.fs, "duration": args.duration,
        "heart_rate": args.heart_rate, "jitter": args.jitter,
        "noise": args.noise, "leads": args.leads,
        "seed": args.seed, "count": args.count,
    }, entries)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starkit",
        description="Beat-wise ECG resampling toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="apply a policy to a directory of records")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the policy's master seed")
    p.add_argument("--emit-meta", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("invert", help="invert transforms from metadata")
    p.add_argument("in_dir")
    p.add_argument("meta_dir")
    p.add_argument("out_dir")
    p.add_argument("--reference", default=None,
                   help="directory of originals for error reporting")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("diagnose", help="frequency-domain diagnostics")
    p.add_argument("subcommand", choices=["psd-shift", "triangle-spectrum",
                                          "local-snr", "apex-sweep"])
    p.add_argument("--record")
    p.add_argument("--other")
    p.add_argument("--peaks")
    p.add_argument("--lead", type=int, default=0)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--freq-max", type=float, default=10.0)
    p.add_argument("--freq-step", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--sweep-points", type=int, default=11)
    p.add_argument("--welch-segment", type=float, default=2.0)
    p.add_argument("--snr-window-ms", type=float, default=200.0)
    p.add_argument("--snr-cap-db", type=float, default=60.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("stratify", help="source-aware multi-label fold split")
    p.add_argument("index")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stratify)

    p = sub.add_parser("metrics", help="multi-label ranking metrics")
    p.add_argument("predictions")
    p.add_argument("--metric", action="append",
                   default=None,
                   choices=["auroc_micro", "auroc_macro", "ap_micro",
                            "ap_macro"])
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-criterion", default=None,
                   choices=["youden_j", "f1"])
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate synthetic fixtures")
    p.add_argument("out_dir")
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--heart-rate", type=float, default=60.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--leads", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "metrics" and args.metric is None:
        args.metric = ["auroc_micro", "auroc_macro"]
    try:
        return args.func(args)
    except Exception as exc:
        print(f"starkit {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
