"""End-to-end driver: band selection, standardization, cloud removal, change
scoring, threshold segmentation, link budget and energy accounting, then
gateway reconstruction and metrics. Every intermediate lands in the output
directory so stages can be inspected or rerun from files.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import plots
from .changescore import (
    calibrate_threshold,
    calibration_split,
    mask_scores,
    miss_rate,
    score_changes_baseline,
    segment,
)
from .cloudmask import apply_mask, binarize, detect_clouds_baseline, load_cloud_probability, union
from .config import PipelineConfig
from .energy import processing_energy, total_energy, transmission_energy
from .errors import ConfigError, DataError, LeocdError
from .linksim import (
    default_modcod_table,
    link_state,
    load_modcod_table,
    stepped_transmission,
)
from .metrics import (
    confusion,
    cumulative_download_curve,
    format_db,
    psnr,
    roc_auc,
    score_histograms,
)
from .raster import (
    BinaryMap,
    ScoreMap,
    atomic_write_text,
    load_band_stack,
    load_binary_map,
    load_score_map,
    reconstruct,
    select_bands,
    store_band_stack,
    store_binary_map,
    store_score_map,
    transmission_set,
    zscore_normalize,
)
from .selection import VolumeConfig, build_selection, data_volume, store_selection
from .synthetic import generate_synthetic

log = logging.getLogger(__name__)

STAGES = (
    "load", "bands", "normalize", "cloudmask", "score", "calibrate",
    "select", "link", "energy", "reconstruct", "metrics",
)


@dataclass
class RunReport:
    sections: dict[str, Any] = field(default_factory=dict)
    manifest: list[dict] = field(default_factory=list)
    generated_at: str = ""

    def to_dict(self) -> dict:
        out = dict(self.sections)
        out["manifest"] = self.manifest
        out["generated_at"] = self.generated_at
        return out

    def __getitem__(self, key):
        return self.sections[key]


@contextlib.contextmanager
def _stage(name: str):
    log.debug("stage %s", name)
    try:
        yield
    except LeocdError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["inf" if isinstance(v, float) and math.isinf(v) else repr(v) if isinstance(v, float) else v
                    for v in row])
    atomic_write_text(path, buf.getvalue())


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: PipelineConfig, stop_after: str | None = None) -> RunReport:
    """Run every stage in order and write artifacts under ``cfg.output_dir``.

    ``stop_after`` names the last stage to run; the report then only carries
    the sections produced so far. Failures are re-raised tagged with the
    stage that hit them.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ConfigError(f"unknown stage {stop_after!r}; expected one of {STAGES}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _Artifacts(out)
    report = RunReport()
    sec = report.sections
    sec["config"] = cfg.to_dict()
    tile_shape = tuple(cfg.tile_size)

    def done(stage: str) -> bool:
        return stop_after == stage

    # 1. inputs
    with _stage("load"):
        truth = None
        if cfg.synthetic is not None:
            scene = generate_synthetic(cfg.synthetic)
            reference, observed, truth = scene.reference, scene.observed, scene.change_truth
            store_band_stack(reference, art("reference"))
            store_band_stack(observed, art("observed"))
            store_binary_map(truth, art("change_truth"))
            store_binary_map(scene.cloud_truth, art("cloud_truth"))
        else:
            reference = load_band_stack(cfg.inputs.reference)
            observed = load_band_stack(cfg.inputs.observed)
            if cfg.inputs.change_truth is not None:
                truth = load_binary_map(cfg.inputs.change_truth, (observed.height, observed.width))
        if reference.geometry != observed.geometry:
            raise DataError(f"reference {reference.geometry} and observed {observed.geometry} differ")
        if reference.band_labels != observed.band_labels:
            raise DataError("reference and observed band labels differ")
        h, w, d = observed.geometry
        sec["inputs"] = {"height": h, "width": w, "bands": d, "band_labels": observed.band_labels,
                         "bit_depth": observed.bit_depth, "has_truth": truth is not None}
    if done("load"):
        return _finish(report, art)

    # 2. band selection
    with _stage("bands"):
        need_cloud_bands = cfg.cloud.source == "baseline"
        ref_cd = select_bands(reference, cfg.change_bands)
        obs_cd = select_bands(observed, cfg.change_bands)
        obs_cl = select_bands(observed, cfg.cloud_bands) if need_cloud_bands else None
    if done("bands"):
        return _finish(report, art)

    # 3. standardization, each image against its own statistics
    with _stage("normalize"):
        ref_cd = zscore_normalize(ref_cd)
        obs_cd = zscore_normalize(obs_cd)
        store_band_stack(ref_cd, art("reference_norm"))
        store_band_stack(obs_cd, art("observed_norm"))
        if obs_cl is not None:
            obs_cl = zscore_normalize(obs_cl)
    if done("normalize"):
        return _finish(report, art)

    # 4. clouds
    with _stage("cloudmask"):
        if cfg.cloud.source == "baseline":
            cloud_prob = detect_clouds_baseline(obs_cl, cfg.cloud, cfg.workers, tile_shape)
        elif cfg.cloud.source == "external":
            cloud_prob = load_cloud_probability(cfg.cloud.external_path, (h, w))
        else:
            cloud_prob = ScoreMap(np.zeros((h, w)))
        cloud = binarize(cloud_prob, cfg.cloud.gamma)
        if cfg.cloud.mask_reference and cfg.cloud.source == "baseline":
            ref_cl = zscore_normalize(select_bands(reference, cfg.cloud_bands))
            ref_prob = detect_clouds_baseline(ref_cl, cfg.cloud, cfg.workers, tile_shape)
            cloud = union(cloud, binarize(ref_prob, cfg.cloud.gamma))
        store_score_map(cloud_prob, art("cloud_probability"))
        store_binary_map(cloud, art("cloud_mask"))
        obs_cd = apply_mask(obs_cd, cloud)
        if cfg.cloud.mask_reference:
            ref_cd = apply_mask(ref_cd, cloud)
        store_band_stack(obs_cd, art("observed_cloud_removed"))
        sec["cloud"] = {"source": cfg.cloud.source, "gamma": cfg.cloud.gamma,
                        "cloud_pixels": cloud.count, "cloud_fraction": cloud.count / (h * w)}
    if done("cloudmask"):
        return _finish(report, art)

    # 5. change scores
    with _stage("score"):
        if cfg.scorer.kind == "baseline_distance":
            scores = score_changes_baseline(ref_cd, obs_cd, cloud, cfg.scorer.masked_pixel_score,
                                            cfg.workers, tile_shape)
        else:
            scores = load_score_map(cfg.scorer.external_path, (h, w))
            scores = mask_scores(scores, cloud, cfg.scorer.masked_pixel_score)
        store_score_map(scores, art("change_scores"))
    if done("score"):
        return _finish(report, art)

    # 6. threshold: calibrated on the held-in pixels unless fixed by the user
    with _stage("calibrate"):
        opts = cfg.calibration
        calib = {"epsilon": opts.epsilon}
        held_in = None
        if truth is not None:
            held_in = calibration_split((h, w), opts.calibration_fraction, opts.split_seed)
        if opts.tau is not None:
            tau = opts.tau
            calib.update(tau=tau, tau_source="override")
        else:
            if truth is None:
                raise DataError("calibration needs a change truth map, or set tau explicitly")
            if not np.any(truth.as_bool() & held_in):
                # nothing to miss: the bound holds for every tau, take the largest
                tau = 1.0
                calib.update(tau=tau, tau_source="no_changed_pixels", n_changed=0,
                             achieved_miss_rate=None)
            else:
                res = calibrate_threshold(scores, truth, opts.epsilon, held_in)
                tau = res.tau
                calib.update(tau=tau, tau_source="calibrated", n_changed=res.n_changed,
                             achieved_miss_rate=res.achieved_miss_rate)
        if truth is not None:
            calib["calibration_miss_rate"] = miss_rate(scores, truth, tau, held_in)
            calib["heldout_miss_rate"] = miss_rate(scores, truth, tau, ~held_in)
            calib["calibration_fraction"] = opts.calibration_fraction
        pred = segment(scores, tau)
        store_binary_map(pred, art("prediction"))
        sec["calibration"] = calib
    if done("calibrate"):
        return _finish(report, art)

    # 7. selection alpha = s^p
    with _stage("select"):
        vopt = cfg.volume
        vcfg = VolumeConfig(
            bands_per_pixel=vopt.bands_per_pixel or d,
            bits_per_sample=vopt.bits_per_sample or observed.bit_depth,
            coordinate_overhead=vopt.coordinate_overhead,
        )
        sel = build_selection(pred, vcfg)
        store_selection(sel, vcfg, art("selection"))
        sec["selection"] = {"selected_pixels": sel.n_selected, "total_pixels": h * w,
                            "selected_fraction": sel.n_selected / (h * w),
                            "volume_bits": sel.volume_bits,
                            "bands_per_pixel": vcfg.bands_per_pixel,
                            "bits_per_sample": vcfg.bits_per_sample,
                            "coordinate_overhead": vcfg.coordinate_overhead}
    if done("select"):
        return _finish(report, art)

    # 8. link
    with _stage("link"):
        table = load_modcod_table(cfg.modcod) if cfg.modcod else default_modcod_table()
        tx = cfg.transmission
        t0 = 0.0 if tx.policy == "start" else tx.t_s
        state = link_state(cfg.pass_, cfg.link, table, t0)
        link_sec = {"policy": tx.policy, "t_s": state.t_s, "slant_range_m": state.slant_range_m,
                    "snr_db": state.snr_db, "rate_bps": state.rate_bps, "modcod": state.modcod}
        rate, modcod = state.rate_bps, state.modcod
        if tx.policy == "stepped":
            bits = sel.volume_bits / cfg.energy.rho if cfg.energy.compress_before_transmit else sel.volume_bits
            if bits > 0:
                st = stepped_transmission(bits, cfg.pass_, cfg.link, table, t0, tx.dt_s)
                rate = st.effective_rate_bps
                modcod = "stepped"
                link_sec.update(effective_rate_bps=rate, airtime_s=st.airtime_s, end_s=st.end_s)
        sec["link"] = link_sec
    if done("link"):
        return _finish(report, art)

    # 9. energy
    with _stage("energy"):
        p_tx = cfg.link.p_tx_w
        er = total_energy(sel, rate, cfg.energy, vcfg, p_tx, modcod)
        full_bits = data_volume(BinaryMap(np.ones((h, w), dtype=np.uint8)), vcfg)
        base_split = (processing_energy(full_bits, cfg.energy),
                      transmission_energy(full_bits, rate, cfg.energy, p_tx))
        sec["energy"] = er.to_dict()
        atomic_write_text(art("energy.json"), _dump_json(er.to_dict()))
        if cfg.figures:
            plots.plot_energy((er.e_proc_j, er.e_trans_j), base_split, er.savings_fraction,
                              art("figures/energy.png"))
    if done("energy"):
        return _finish(report, art)

    # 10. gateway reconstruction from the full-spectrum selected pixels
    with _stage("reconstruct"):
        sent = transmission_set(observed, sel.alpha)
        recon = reconstruct(reference, sent, reference.geometry)
        store_band_stack(recon, art("reconstruction"))
        max_value = cfg.metrics.psnr_max_value or float(2 ** observed.bit_depth - 1)
        p = psnr(recon, observed, max_value)
        sec["reconstruction"] = {"transmitted_pixels": len(sent), "psnr_db": format_db(p),
                                 "psnr_max_value": max_value}
        if cfg.figures:
            plots.plot_images(reference, observed, recon,
                              "inf" if math.isinf(p) else f"{p:.1f} dB", art("figures/images.png"))
    if done("reconstruct"):
        return _finish(report, art)

    # 11. metrics
    with _stage("metrics"):
        msec: dict[str, Any] = {}
        curve = cumulative_download_curve(scores)
        _write_csv(art("cumulative.csv"), ["threshold", "fraction"], curve)
        if cfg.figures:
            plots.plot_cumulative(curve, tau, art("figures/cumulative.png"))
        if truth is not None:
            cc = confusion(pred, truth)
            msec["confusion"] = cc.to_dict()
            msec["confusion_calibration_set"] = confusion(pred, truth, held_in).to_dict()
            hist = score_histograms(scores, truth, cfg.metrics.n_bins)
            _write_csv(art("histograms.csv"), ["bin_lo", "bin_hi", "changed", "unchanged"],
                       [(float(hist.edges[k]), float(hist.edges[k + 1]),
                         float(hist.changed[k]), float(hist.unchanged[k]))
                        for k in range(cfg.metrics.n_bins)])
            if cfg.figures:
                plots.plot_histograms(hist, tau, art("figures/histograms.png"))
            if 0 < truth.count < h * w:
                roc = roc_auc(scores, truth)
                msec["auc"] = roc.auc
                msec["roc_points"] = len(roc.points)
                _write_csv(art("roc.csv"), ["threshold", "fpr", "tpr"], roc.points)
                if cfg.figures:
                    plots.plot_roc(roc.points, roc.auc, art("figures/roc.png"))
            else:
                msec["auc"] = None
        sec["metrics"] = msec

    return _finish(report, art)


class _Artifacts:
    """Hands out output paths and remembers them for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.names: list[str] = []

    def __call__(self, name: str) -> Path:
        self.names.append(name)
        return self.root / name

    def files(self) -> list[Path]:
        found = set()
        for name in self.names:
            p = self.root / name
            for cand in (p, p.with_name(p.name + ".json"), p.with_name(p.name + ".bin"),
                         p.with_name(p.name + ".selection.json")):
                if cand.is_file():
                    found.add(cand)
        return sorted(found)


def _finish(report: RunReport, art: _Artifacts) -> RunReport:
    report.manifest = [{"path": p.relative_to(art.root).as_posix(), "sha256": _sha256(p)}
                       for p in art.files()]
    report.generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    atomic_write_text(art.root / "report.json", _dump_json(report.to_dict()))
    return report
