"""Command-line interface: ``softgt {fuse-gt,metrics,augment,stats}``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
Log verbosity is read from ``SOFTGT_LOG_LEVEL`` (default ``INFO``).
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .augment import DEFAULT_SEED, AugmentConfig, SamplePair, augment_pair, sample_seed
from .errors import (
    InvalidArgumentError, ManifestError, NiftiFormatError, NoOverlapError, SoftGTError,
    UndefinedMetricError,
)
from .fusion import DEFAULT_DILATION_RADIUS, FusionEntry, FusionInput, generate_soft_gt
from .manifest import DatasetManifest, load_manifest, read_csv, write_csv
from .metrics import (
    DEFAULT_LEVELS, abs_csa_error, average_surface_distance, csa, dice, relative_volume_error, std_csa,
)
from .nifti import read_nifti, write_nifti
from .registration import register_com, write_warp_csv
from .stats import PAIRWISE_COLUMNS, pairwise_wilcoxon
from .volume import resample_like

log = logging.getLogger("softgt")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

COVERAGE_COLUMNS = ("participant", "contrast", "fov_coverage")
METRICS_COLUMNS = ("participant", "contrast", "dice", "rve", "asd", "gt_csa", "pred_csa", "abs_csa_error", "reason")
PANEL_COLUMNS = ("participant", "n_contrasts", "mean_pred_csa", "std_pred_csa", "mean_gt_csa", "std_gt_csa", "reason")
AUGMENT_COLUMNS = ("participant", "contrast", "sample", "seed", "image", "label")


def exit_code_for(exc):
    if isinstance(exc, (OSError, NiftiFormatError)):
        return EXIT_IO
    if isinstance(exc, (SoftGTError, ValueError)):
        return EXIT_VALIDATION
    return EXIT_INTERNAL


def _require(record, key, pid, contrast):
    path = record.get(key)
    if path is None:
        raise ManifestError(f"({pid}, {contrast}) has no '{key}' file")
    if not Path(path).exists():
        raise FileNotFoundError(2, "missing input file", str(path))
    return path


def _run(jobs, fn, items):
    """Map ``fn`` over ``items`` keeping input order; exceptions are returned, not raised."""
    def safe(item):
        try:
            return fn(item)
        except Exception as exc:  # reported per item by the caller
            return exc

    if jobs <= 1:
        return [safe(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(safe, items))


def _report_errors(failures):
    for label, exc in failures:
        log.error("%s: %s: %s", label, type(exc).__name__, exc)
    return max(exit_code_for(exc) for _, exc in failures) if failures else EXIT_OK


# --- fuse-gt ----------------------------------------------------------------

def _fuse_participant(job):
    pid, records, cfg = job
    wanted = cfg.contrasts or sorted(records)
    missing = [c for c in wanted if c not in records]
    if missing:
        raise ManifestError(f"contrasts {missing} not available")
    if cfg.ref_contrast not in wanted:
        raise InvalidArgumentError(f"reference contrast {cfg.ref_contrast!r} not among fused contrasts {wanted}")
    segs = {c: read_nifti(_require(records[c], "seg", pid, c)) for c in wanted}
    ref = segs[cfg.ref_contrast]
    entries = []
    for c in sorted(wanted):
        on_ref = resample_like(segs[c], ref, "linear")
        try:
            warp = register_com(on_ref, ref)
        except NoOverlapError as exc:
            raise NoOverlapError(f"{c} -> {cfg.ref_contrast}: {exc}") from exc
        entries.append(FusionEntry(c, segs[c], warp))
    bundle = generate_soft_gt(FusionInput(entries), cfg.ref_contrast, cfg.dilation_radius)

    pdir = cfg.out / pid
    pdir.mkdir(parents=True, exist_ok=True)
    write_nifti(bundle.reference_soft, pdir / f"{pid}_softgt_ref-{cfg.ref_contrast}.nii.gz")
    outputs = {}
    for e in entries:
        path = pdir / f"{pid}_{e.contrast_id}_softgt.nii.gz"
        write_nifti(bundle.native_soft[e.contrast_id], path)
        write_warp_csv(e.warp_to_ref, pdir / f"{pid}_{e.contrast_id}_warp.csv")
        outputs[e.contrast_id] = path
    cover = [{"participant": pid, "contrast": c, "fov_coverage": bundle.coverage[c]} for c in sorted(bundle.coverage)]
    return outputs, cover


def cmd_fuse_gt(args):
    manifest = load_manifest(args.manifest)
    args.out.mkdir(parents=True, exist_ok=True)
    args.contrasts = [c.strip() for c in args.contrasts.split(",") if c.strip()] if args.contrasts else None
    pids = sorted(manifest.records)
    results = _run(args.jobs, _fuse_participant, [(pid, manifest.records[pid], args) for pid in pids])
    failures = [(pid, r) for pid, r in zip(pids, results) if isinstance(r, Exception)]
    cover_rows = []
    new_records = {}
    for pid, res in zip(pids, results):
        if isinstance(res, Exception):
            continue
        outputs, cover = res
        cover_rows.extend(cover)
        new_records[pid] = {c: {**manifest.records[pid][c], "gt": path} for c, path in outputs.items()}
    write_csv(args.out / "fov_coverage.csv", COVERAGE_COLUMNS, cover_rows)
    DatasetManifest([p for p in manifest.participants if p in new_records], new_records,
                    manifest.contrasts).save(args.out / "manifest_softgt.json")
    log.info("fused %d/%d participants into %s", len(new_records), len(pids), args.out)
    return _report_errors(failures)


# --- metrics ----------------------------------------------------------------

def _metrics_record(job):
    pid, contrast, rec, cfg = job
    row = {"participant": pid, "contrast": contrast}
    pred_key = "pred" if "pred" in rec else "seg"
    pred = read_nifti(_require(rec, pred_key, pid, contrast))
    gt = read_nifti(_require(rec, "gt", pid, contrast))
    reasons = []
    row["dice"] = dice(pred, gt, cfg.threshold)
    for name, fn in (("rve", relative_volume_error), ("asd", average_surface_distance)):
        try:
            row[name] = fn(pred, gt, cfg.threshold)
        except UndefinedMetricError as exc:
            reasons.append(f"{name}: {exc}")
    if "levels" in rec:
        lv = read_nifti(_require(rec, "levels", pid, contrast))
        for name, vol in (("gt_csa", gt), ("pred_csa", pred)):
            try:
                row[name] = csa(vol, lv, cfg.levels).level_mean
            except UndefinedMetricError as exc:
                reasons.append(f"{name}: {exc}")
        if row.get("gt_csa") is not None and row.get("pred_csa") is not None:
            row["abs_csa_error"] = abs_csa_error(row["gt_csa"], row["pred_csa"])
    else:
        reasons.append("csa: no level map")
    row["reason"] = "; ".join(reasons) or None
    return row


def _panel_rows(rows, ddof):
    by_pid = {}
    for r in rows:
        by_pid.setdefault(r["participant"], []).append(r)
    out = []
    for pid in sorted(by_pid):
        pred = {r["contrast"]: r["pred_csa"] for r in by_pid[pid] if r.get("pred_csa") is not None}
        gt = {r["contrast"]: r["gt_csa"] for r in by_pid[pid] if r.get("gt_csa") is not None}
        row = {"participant": pid, "n_contrasts": len(pred)}
        reasons = []
        for prefix, vals in (("pred", pred), ("gt", gt)):
            if vals:
                row[f"mean_{prefix}_csa"] = float(np.mean(list(vals.values())))
            try:
                row[f"std_{prefix}_csa"] = std_csa(vals, ddof)
            except InvalidArgumentError as exc:
                reasons.append(f"std_{prefix}_csa: {exc}")
        row["reason"] = "; ".join(reasons) or None
        out.append(row)
    return out


def _pairwise_table(rows, group, value, pair):
    table = {}
    for r in rows:
        v = r.get(value)
        if v is None or v == "":
            continue
        table.setdefault(r[group], {})[r[pair]] = float(v)
    return table


def cmd_metrics(args):
    manifest = load_manifest(args.manifest)
    args.out.mkdir(parents=True, exist_ok=True)
    args.levels = tuple(int(s) for s in args.levels.split(","))
    ddof = 0 if args.std == "population" else 1
    jobs = [(pid, c, rec, args) for pid, c, rec in manifest.iter_records()]
    results = _run(args.jobs, _metrics_record, jobs)
    rows, failures = [], []
    for (pid, c, _, _), res in zip(jobs, results):
        if isinstance(res, Exception):
            failures.append((f"{pid}/{c}", res))
        else:
            rows.append(res)
    write_csv(args.out / "metrics_per_image.csv", METRICS_COLUMNS, rows)
    write_csv(args.out / "contrast_panels.csv", PANEL_COLUMNS, _panel_rows(rows, ddof))
    pairs = pairwise_wilcoxon(_pairwise_table(rows, "contrast", "pred_csa", "participant"))
    write_csv(args.out / "wilcoxon_pairwise.csv", PAIRWISE_COLUMNS, pairs)
    log.info("wrote metrics for %d images to %s", len(rows), args.out)
    return _report_errors(failures)


# --- augment ----------------------------------------------------------------

def _augment_one(job):
    pid, contrast, rec, k, seed, cfg, out = job
    label_key = "gt" if "gt" in rec else "seg"
    image = read_nifti(_require(rec, "image", pid, contrast))
    label = read_nifti(_require(rec, label_key, pid, contrast))
    res = augment_pair(SamplePair(image, label), cfg, seed=seed)
    pdir = out / pid
    pdir.mkdir(parents=True, exist_ok=True)
    ip = write_nifti(res.image, pdir / f"{pid}_{contrast}_aug{k:03d}_image.nii.gz")
    lp = write_nifti(res.label, pdir / f"{pid}_{contrast}_aug{k:03d}_label.nii.gz")
    return {"participant": pid, "contrast": contrast, "sample": k, "seed": seed,
            "image": str(ip.relative_to(out)), "label": str(lp.relative_to(out))}


def cmd_augment(args):
    manifest = load_manifest(args.manifest)
    if args.config is not None:
        cfg = AugmentConfig.load(args.config)
    else:
        cfg = AugmentConfig()
        log.info("no augmentation config given; using defaults")
    seed = cfg.seed if args.seed is None else args.seed
    args.out.mkdir(parents=True, exist_ok=True)
    jobs = []
    index = 0
    for pid, contrast, rec in manifest.iter_records():
        for k in range(args.samples):
            jobs.append((pid, contrast, rec, k, sample_seed(seed, index), cfg, args.out))
            index += 1
    results = _run(args.jobs, _augment_one, jobs)
    rows, failures = [], []
    for job, res in zip(jobs, results):
        if isinstance(res, Exception):
            failures.append((f"{job[0]}/{job[1]}#{job[3]}", res))
        else:
            rows.append(res)
    write_csv(args.out / "augmented.csv", AUGMENT_COLUMNS, rows)
    return _report_errors(failures)


# --- stats ------------------------------------------------------------------

def cmd_stats(args):
    rows = read_csv(args.input)
    if rows:
        for col in (args.group, args.value, args.pair):
            if col not in rows[0]:
                raise InvalidArgumentError(f"{args.input}: no column {col!r}")
    table = _pairwise_table(rows, args.group, args.value, args.pair)
    out = args.out
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "stats_pairwise.csv"
    write_csv(out, PAIRWISE_COLUMNS, pairwise_wilcoxon(table))
    return EXIT_OK


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="softgt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1, help="worker threads (default: all cores)")

    f = sub.add_parser("fuse-gt", help="build soft ground truth across contrasts")
    f.add_argument("--manifest", type=Path, required=True)
    f.add_argument("--out", type=Path, required=True)
    f.add_argument("--ref-contrast", default="T2w")
    f.add_argument("--contrasts", default=None, help="comma-separated subset to fuse (default: all)")
    f.add_argument("--dilation-radius", type=int, default=DEFAULT_DILATION_RADIUS)
    common(f)
    f.set_defaults(func=cmd_fuse_gt)

    m = sub.add_parser("metrics", help="Dice/RVE/ASD/CSA per image plus cross-contrast statistics")
    m.add_argument("--manifest", type=Path, required=True)
    m.add_argument("--out", type=Path, required=True)
    m.add_argument("--threshold", type=float, default=0.5)
    m.add_argument("--levels", default=",".join(str(l) for l in DEFAULT_LEVELS))
    m.add_argument("--std", choices=("population", "sample"), default="population")
    common(m)
    m.set_defaults(func=cmd_metrics)

    a = sub.add_parser("augment", help="write augmented image/label pairs")
    a.add_argument("--manifest", type=Path, required=True)
    a.add_argument("--config", type=Path, default=None)
    a.add_argument("--seed", type=int, default=None, help=f"overrides the config seed (config default {DEFAULT_SEED})")
    a.add_argument("--samples", type=_positive_int, default=1, help="augmented samples per record")
    a.add_argument("--out", type=Path, required=True)
    common(a)
    a.set_defaults(func=cmd_augment)

    s = sub.add_parser("stats", help="pairwise Wilcoxon tests with Bonferroni correction on a CSV")
    s.add_argument("--in", dest="input", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--group", default="contrast")
    s.add_argument("--value", default="pred_csa")
    s.add_argument("--pair", default="participant")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("SOFTGT_LOG_LEVEL", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code is reserved for I/O here
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        log.error("%s: %s", type(exc).__name__, exc)
        if code == EXIT_INTERNAL:
            log.debug("traceback", exc_info=True)
        return code


if __name__ == "__main__":
    sys.exit(main())
