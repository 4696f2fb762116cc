"""Command line entry point.

``leocd pipeline`` runs everything; the other subcommands run one stage
each, reading and writing the same raster/CSV/JSON files so they compose.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 link outage.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import plots
from .changescore import calibrate_threshold, score_changes_baseline, segment
from .cloudmask import apply_mask, binarize, detect_clouds_baseline, load_cloud_probability
from .config import PipelineConfig, config_from_dict, load_config
from .energy import total_energy
from .errors import ConfigError, LeocdError
from .linksim import (
    default_modcod_table,
    link_state,
    load_modcod_table,
    select_rate,
)
from .metrics import (
    cumulative_download_curve,
    format_db,
    psnr,
    roc_auc,
    score_histograms,
)
from .pipeline import STAGES, _write_csv, run_pipeline
from .raster import (
    atomic_write_text,
    load_band_stack,
    load_binary_map,
    load_score_map,
    select_bands,
    store_band_stack,
    store_binary_map,
    store_score_map,
    zscore_normalize,
)
from .selection import VolumeConfig, build_selection, load_selection, store_selection
from .synthetic import SyntheticSpec, generate_synthetic



def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if getattr(args, "seed", None) is not None:
        if cfg.synthetic is None:
            raise ConfigError("--seed only applies to synthetic runs")
        cfg.synthetic = dataclasses.replace(cfg.synthetic, seed=args.seed)
    if getattr(args, "epsilon", None) is not None:
        cfg.calibration = dataclasses.replace(cfg.calibration, epsilon=args.epsilon)
    if getattr(args, "tau", None) is not None:
        cfg.calibration = dataclasses.replace(cfg.calibration, tau=args.tau)
    if getattr(args, "modcod", None) is not None:
        cfg.modcod = args.modcod
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    return cfg


def _table(cfg: PipelineConfig):
    return load_modcod_table(cfg.modcod) if cfg.modcod else default_modcod_table()


# ---------------------------------------------------------------------------
# subcommands


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    report = run_pipeline(cfg, stop_after=args.stage)
    summary = {k: report.sections[k] for k in ("calibration", "selection", "link", "energy",
                                               "reconstruction") if k in report.sections}
    summary["output_dir"] = str(cfg.output_dir)
    _emit(summary)
    return 0


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = cfg.synthetic or SyntheticSpec()
    overrides = {k: v for k, v in {
        "height": args.height, "width": args.width, "bands": args.bands,
        "change_fraction": args.change_fraction, "cloud_fraction": args.cloud_fraction,
        "noise_std": args.noise_std,
    }.items() if v is not None}
    spec = dataclasses.replace(spec, **overrides)
    scene = generate_synthetic(spec)
    out = Path(cfg.output_dir)
    store_band_stack(scene.reference, out / "reference")
    store_band_stack(scene.observed, out / "observed")
    store_binary_map(scene.change_truth, out / "change_truth")
    store_binary_map(scene.cloud_truth, out / "cloud_truth")
    _emit({"output_dir": str(out), "spec": dataclasses.asdict(spec),
           "changed_pixels": scene.change_truth.count, "cloud_pixels": scene.cloud_truth.count})
    return 0


def cmd_normalize(args) -> int:
    stack = load_band_stack(args.input)
    if args.bands:
        stack = select_bands(stack, args.bands.split(","))
    store_band_stack(zscore_normalize(stack), args.output)
    return 0


def cmd_cloudmask(args) -> int:
    cfg = _config(args)
    cc = cfg.cloud
    if args.gamma is not None:
        cc = dataclasses.replace(cc, gamma=args.gamma)
    stack = load_band_stack(args.input)
    shape = (stack.height, stack.width)
    if args.probability:
        prob = load_cloud_probability(args.probability, shape)
    else:
        prob = detect_clouds_baseline(stack, cc)
    mask = binarize(prob, cc.gamma)
    out = Path(args.out or cfg.output_dir)
    store_score_map(prob, out / "cloud_probability")
    store_binary_map(mask, out / "cloud_mask")
    if args.apply:
        store_band_stack(apply_mask(load_band_stack(args.apply), mask), out / "cloud_removed")
    _emit({"cloud_pixels": mask.count, "gamma": cc.gamma})
    return 0


def cmd_score(args) -> int:
    ref = load_band_stack(args.reference)
    obs = load_band_stack(args.observed)
    cloud = load_binary_map(args.cloud, (ref.height, ref.width))
    store_score_map(score_changes_baseline(ref, obs, cloud, args.masked_score), args.output)
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    scores = load_score_map(args.scores)
    truth = load_binary_map(args.truth, scores.shape)
    if cfg.calibration.tau is not None:
        result = {"tau": cfg.calibration.tau, "tau_source": "override"}
        tau = cfg.calibration.tau
    else:
        res = calibrate_threshold(scores, truth, cfg.calibration.epsilon)
        tau = res.tau
        result = dataclasses.asdict(res) | {"tau_source": "calibrated",
                                            "epsilon": cfg.calibration.epsilon}
    if args.out:
        out = Path(args.out)
        store_binary_map(segment(scores, tau), out / "prediction")
        atomic_write_text(out / "calibration.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    _emit(result)
    return 0


def cmd_select(args) -> int:
    pred = load_binary_map(args.prediction)
    vcfg = VolumeConfig(args.bands_per_pixel, args.bits, args.overhead)
    sel = build_selection(pred, vcfg)
    store_selection(sel, vcfg, args.output)
    _emit({"selected_pixels": sel.n_selected, "volume_bits": sel.volume_bits})
    return 0


def cmd_link(args) -> int:
    cfg = _config(args)
    table = _table(cfg)
    if args.snr_db is not None:
        rate, name = select_rate(table, args.snr_db, cfg.link.bandwidth_hz)
        _emit({"snr_db": args.snr_db, "rate_bps": rate, "modcod": name})
        return 0
    t = args.time if args.time is not None else 0.0
    st = link_state(cfg.pass_, cfg.link, table, t)
    _emit(dataclasses.asdict(st))
    return 0


def cmd_energy(args) -> int:
    cfg = _config(args)
    sel, vcfg = load_selection(args.selection)
    if args.rate_bps is not None:
        rate, name = args.rate_bps, None
    else:
        st = link_state(cfg.pass_, cfg.link, _table(cfg), args.time or 0.0)
        rate, name = st.rate_bps, st.modcod
    rep = total_energy(sel, rate, cfg.energy, vcfg, cfg.link.p_tx_w, name)
    if args.out:
        atomic_write_text(args.out, json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    _emit(rep.to_dict())
    return 0


def cmd_metrics(args) -> int:
    cfg = _config(args)
    out = Path(args.out or cfg.output_dir)
    result = {}
    tau = cfg.calibration.tau
    if args.scores:
        scores = load_score_map(args.scores)
        curve = cumulative_download_curve(scores)
        _write_csv(out / "cumulative.csv", ["threshold", "fraction"], curve)
        if cfg.figures:
            plots.plot_cumulative(curve, tau, out / "figures" / "cumulative.png")
        if args.truth:
            truth = load_binary_map(args.truth, scores.shape)
            roc = roc_auc(scores, truth)
            result["auc"] = roc.auc
            _write_csv(out / "roc.csv", ["threshold", "fpr", "tpr"], roc.points)
            hist = score_histograms(scores, truth, cfg.metrics.n_bins)
            _write_csv(out / "histograms.csv", ["bin_lo", "bin_hi", "changed", "unchanged"],
                       [(float(hist.edges[k]), float(hist.edges[k + 1]),
                         float(hist.changed[k]), float(hist.unchanged[k]))
                        for k in range(len(hist.changed))])
            if cfg.figures:
                plots.plot_roc(roc.points, roc.auc, out / "figures" / "roc.png")
                plots.plot_histograms(hist, tau, out / "figures" / "histograms.png")
    if args.reconstructed and args.observed:
        a = load_band_stack(args.reconstructed)
        b = load_band_stack(args.observed)
        max_value = args.max_value or float(2 ** b.bit_depth - 1)
        result["psnr_db"] = format_db(psnr(a, b, max_value))
    atomic_write_text(out / "metrics.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    _emit(result)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (or file, where noted)")
    common.add_argument("--seed", type=int, help="synthetic scene seed")
    common.add_argument("--epsilon", type=float, help="allowed miss rate on changed pixels")
    common.add_argument("--tau", type=float, help="fixed score threshold (skips calibration)")
    common.add_argument("--modcod", help="MODCOD CSV replacing the bundled DVB-S2 table")
    common.add_argument("--stage", choices=STAGES, help="stop the pipeline after this stage")
    common.add_argument("--workers", type=int, help="threads for per-tile work")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="leocd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage end to end")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic image pair")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--bands", type=int)
    p.add_argument("--change-fraction", type=float)
    p.add_argument("--cloud-fraction", type=float)
    p.add_argument("--noise-std", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("normalize", parents=[common], help="select bands and z-score a stack")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--bands", help="comma-separated band labels, in output order")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("cloudmask", parents=[common], help="cloud probability and mask")
    p.add_argument("input", help="normalized RGBNir stack")
    p.add_argument("--probability", help="external cloud probability map instead of the baseline")
    p.add_argument("--gamma", type=float)
    p.add_argument("--apply", help="stack to write with cloudy pixels zeroed")
    p.set_defaults(func=cmd_cloudmask)

    p = sub.add_parser("score", parents=[common], help="baseline change scores")
    p.add_argument("reference")
    p.add_argument("observed")
    p.add_argument("output")
    p.add_argument("--cloud", required=True, help="cloud mask")
    p.add_argument("--masked-score", type=float, default=0.0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", parents=[common], help="threshold meeting the miss-rate bound")
    p.add_argument("scores")
    p.add_argument("truth")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("select", parents=[common], help="selection and data volume")
    p.add_argument("prediction")
    p.add_argument("output")
    p.add_argument("--bands-per-pixel", type=int, required=True)
    p.add_argument("--bits", type=int, default=12)
    p.add_argument("--overhead", default="none", choices=("none", "coord_list", "bitmap"))
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("link", parents=[common], help="slant range, SNR and MODCOD")
    p.add_argument("--time", type=float, help="seconds into the pass (default 0, pass start)")
    p.add_argument("--snr-db", type=float, help="pick a MODCOD for this SNR directly")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("energy", parents=[common], help="energy report for a selection")
    p.add_argument("selection")
    p.add_argument("--rate-bps", type=float)
    p.add_argument("--time", type=float)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("metrics", parents=[common], help="ROC/AUC, curves, histograms, PSNR")
    p.add_argument("--scores")
    p.add_argument("--truth")
    p.add_argument("--reconstructed")
    p.add_argument("--observed")
    p.add_argument("--max-value", type=float)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LeocdError as exc:
        print(f"leocd: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
