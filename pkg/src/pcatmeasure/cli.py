"""Command-line interface: ``pcat measure | batch | split | phantom | report``.

Protocol parameters come from the defaults, then an optional INI config file
(``--config``), then command-line flags, later sources winning. The batch
worker count comes from ``--workers``, else the ``PCAT_WORKERS`` environment
variable, else the ``[run]`` section of the config file, else 1.

Exit codes: 0 success (a batch with failed cases still exits 0), 1 usage
error, 2 fatal I/O error, 3 invalid configuration or manifest, 4 the
measurement itself failed (split-failed, no-bifurcation, short-centerline,
geometry-mismatch). On failure the error class is printed to stderr as
``error-class: <name>``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import pcat
from .errors import ConfigError, PcatError, SplitFailedError, VolumeIOError
from .phantom import PRESETS, PhantomSpec, render, render_labels
from .report import SCHEMA_VERSION, CaseRecord, aggregate, dice, dump_json, write_report
from .volume_io import BinaryMask, VoxelGrid, load_volume, save_volume

log = logging.getLogger("pcatmeasure")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONFIG, EXIT_MEASURE = 0, 1, 2, 3, 4
SPLIT_MODES = ("auto", "labels", "components")
RCA_LABEL, LCA_LABEL = 1, 2
WORKERS_ENV = "PCAT_WORKERS"
_CASE_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

# ProtocolParams fields settable from the config file / flags, with their types
_PARAM_TYPES = {
    "skip_mm": float,
    "segment_mm": float,
    "spur_mm": float,
    "min_component_voxels": int,
    "region_mode": str,
    "annulus_mm": float,
    "lm_search_mm": float,
    "lpcat_budget": str,
    "lookahead_mm": float,
    "histogram_bin_hu": float,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, VolumeIOError):
        return EXIT_IO
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_MEASURE


@dataclass(frozen=True)
class CaseInputs:
    case_id: str
    image: str
    coronary_mask: str | None = None
    aorta_mask: str | None = None
    rca_mask: str | None = None
    lca_mask: str | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "case_id" and v is not None}


@dataclass(frozen=True)
class RunConfig:
    params: pcat.ProtocolParams = field(default_factory=pcat.ProtocolParams)
    split_mode: str = "auto"
    rca_seed: tuple[float, float, float] | None = None
    out_dir: Path = Path(".")
    debug_dir: Path | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.split_mode not in SPLIT_MODES:
            raise ConfigError(f"split mode must be one of {SPLIT_MODES}, got {self.split_mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def echo(self) -> dict:
        """Parameters that shape the result (no paths, no worker count)."""
        return {
            **self.params.to_dict(),
            "split_mode": self.split_mode,
            "rca_seed": list(self.rca_seed) if self.rca_seed is not None else None,
            "sd_divisor": "N",
        }


# ------------------------------------------------------------------ config


def _read_config_file(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is None:
        return cp
    if not Path(path).is_file():
        raise VolumeIOError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    unknown = set(cp.sections()) - {"protocol", "run"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    return cp


def build_config(args: argparse.Namespace) -> RunConfig:
    cp = _read_config_file(getattr(args, "config", None))
    values: dict = {}
    window = [pcat.HuWindow().lo, pcat.HuWindow().hi]
    if cp.has_section("protocol"):
        for key, raw in cp.items("protocol"):
            try:
                if key in _PARAM_TYPES:
                    values[key] = _PARAM_TYPES[key](raw)
                elif key == "window_lo":
                    window[0] = float(raw)
                elif key == "window_hi":
                    window[1] = float(raw)
                else:
                    raise ConfigError(f"unknown protocol key {key!r}")
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key in _PARAM_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "window", None) is not None:
        window = list(args.window)

    run = dict(cp.items("run")) if cp.has_section("run") else {}
    unknown = set(run) - {"split", "workers", "debug_dir", "rca_seed"}
    if unknown:
        raise ConfigError(f"unknown run key(s): {sorted(unknown)}")
    split_mode = getattr(args, "split", None) or run.get("split", "auto")
    seed = getattr(args, "rca_seed", None)
    if seed is None and run.get("rca_seed"):
        try:
            seed = [float(v) for v in run["rca_seed"].replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"bad rca_seed {run['rca_seed']!r}") from exc
        if len(seed) != 3:
            raise ConfigError("rca_seed needs three coordinates")
    debug = getattr(args, "debug_dir", None) or run.get("debug_dir")

    workers = getattr(args, "workers", None)
    if workers is None:
        raw = os.environ.get(WORKERS_ENV) or run.get("workers")
        try:
            workers = int(raw) if raw else 1
        except ValueError as exc:
            raise ConfigError(f"worker count must be an integer, got {raw!r}") from exc

    params = pcat.ProtocolParams(window=pcat.HuWindow(*window), **values)
    return RunConfig(
        params=params,
        split_mode=split_mode,
        rca_seed=tuple(seed) if seed is not None else None,
        out_dir=Path(getattr(args, "out", None) or "."),
        debug_dir=Path(debug) if debug else None,
        workers=workers,
    )


# ------------------------------------------------------------- one case


def _split(inputs: CaseInputs, image: VoxelGrid, aorta: BinaryMask | None, cfg: RunConfig):
    """RCA and LCA masks (either may be None when only one territory is given)."""
    if inputs.coronary_mask is None:
        rca = load_volume(inputs.rca_mask).as_mask() if inputs.rca_mask else None
        lca = load_volume(inputs.lca_mask).as_mask() if inputs.lca_mask else None
        return rca, lca, {"mode": "separate-masks"}

    cor = load_volume(inputs.coronary_mask)
    image.check_geometry(cor, "image and coronary mask")
    mode = cfg.split_mode
    if mode == "auto":
        labels = set(np.unique(cor.data).tolist()) - {0}
        mode = "labels" if {RCA_LABEL, LCA_LABEL} <= labels else "components"
    if mode == "labels":
        rca, lca = cor.as_mask(RCA_LABEL), cor.as_mask(LCA_LABEL)
        missing = [n for n, m in (("RCA (1)", rca), ("LCA (2)", lca)) if not m.data.any()]
        if missing:
            raise SplitFailedError(f"component split failed: label(s) {', '.join(missing)} absent")
    else:
        rca, lca = pcat.split_arteries(
            cor.as_mask(), aorta, cfg.params.min_component_voxels, cfg.rca_seed
        )
    return rca, lca, {"mode": mode, "rca_voxels": rca.count, "lca_voxels": lca.count}


def _dump_debug(debug_dir: Path, case_id: str, name: str, c: pcat.Centerline, region) -> None:
    d = debug_dir / case_id
    save_volume(c.skeleton, d / f"{name}_skeleton.nii.gz")
    save_volume(region.mask, d / f"{name}_region.nii.gz")
    dump_json({"ostium": c.ostium, **c.graph.to_json_dict()}, d / f"{name}_graph.json")


def _measure_territory(name, image, mask, aorta, cfg: RunConfig, case_id: str):
    image.check_geometry(mask, f"image and {name} mask")
    c = pcat.extract_centerline(mask, aorta, cfg.params)
    build = pcat.rpcat_region if name == "rpcat" else pcat.lpcat_region
    region = build(mask, aorta, cfg.params, centerline=c)
    if cfg.debug_dir is not None:
        _dump_debug(cfg.debug_dir, case_id, name, c, region)
    return pcat.measure(region, image, cfg.params.window, cfg.params.histogram_bin_hu)


def _error(exc: BaseException) -> dict:
    cls = exc.error_class if isinstance(exc, PcatError) else "internal-error"
    return {"error_class": cls, "message": str(exc)}


def run_case(inputs: CaseInputs, cfg: RunConfig) -> dict:
    """Full pipeline for one case. Never raises for pipeline errors: they are
    recorded in the returned document, one entry per failed stage."""
    t0 = time.perf_counter()
    errors: dict[str, dict] = {}
    results: dict[str, pcat.PcatMeasurement | None] = {"rpcat": None, "lpcat": None}
    split_info: dict = {}
    try:
        image = load_volume(inputs.image)
        aorta = None
        if inputs.aorta_mask:
            aorta = load_volume(inputs.aorta_mask).as_mask()
            image.check_geometry(aorta, "image and aorta mask")
        rca, lca, split_info = _split(inputs, image, aorta, cfg)
        for name, mask in (("rpcat", rca), ("lpcat", lca)):
            if mask is None:
                continue
            try:
                results[name] = _measure_territory(name, image, mask, aorta, cfg, inputs.case_id)
            except PcatError as exc:
                errors[name] = _error(exc)
    except PcatError as exc:
        errors["case"] = _error(exc)
    except Exception as exc:  # keep one bad case from taking down a batch
        log.exception("case %s crashed", inputs.case_id)
        errors["case"] = _error(exc)

    record = CaseRecord(inputs.case_id, results["rpcat"], results["lpcat"], errors)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "pcatmeasure", "version": __version__},
        **record.to_dict(),
        "inputs": inputs.as_dict(),
        "parameters": cfg.echo(),
        "split": split_info,
        "metadata": {
            "generated_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": round(time.perf_counter() - t0, 3),
        },
    }


def _run_case_star(job):
    return run_case(*job)


# ------------------------------------------------------------- commands


def cmd_measure(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if args.coronary_mask is None and args.rca_mask is None and args.lca_mask is None:
        raise _UsageError("give --coronary-mask, or --rca-mask and/or --lca-mask")
    if args.coronary_mask is not None and (args.rca_mask or args.lca_mask):
        raise _UsageError("--coronary-mask cannot be combined with --rca-mask/--lca-mask")
    case_id = args.case_id or _case_id_from(args.image)
    inputs = CaseInputs(case_id, args.image, args.coronary_mask, args.aorta_mask, args.rca_mask, args.lca_mask)
    doc = run_case(inputs, cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / f"{case_id}.json"
    dump_json(doc, out)
    _print_summary(doc)
    print(f"wrote {out}")
    status = doc["status"]
    if status in ("ok", "truncated"):
        return EXIT_OK
    first = next(doc["errors"][k] for k in ("case", "rpcat", "lpcat") if k in doc["errors"])
    print(f"error-class: {first['error_class']}", file=sys.stderr)
    print(f"error: {first['message']}", file=sys.stderr)
    return EXIT_IO if first["error_class"] == "io-error" else EXIT_MEASURE


def _case_id_from(path: str) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return re.sub(r"[^A-Za-z0-9._-]", "_", name) or "case"


def _print_summary(doc: dict) -> None:
    for t in ("rpcat", "lpcat"):
        m = doc.get(t)
        if m is None:
            continue
        mean = m["mean_attenuation_hu"]
        mean_s = "n/a" if mean is None else f"{mean:.2f} HU"
        flag = " (truncated)" if m["truncated"] else ""
        print(f"{doc['case_id']} {t.upper()}: mean {mean_s}, volume {m['volume_ml']:.4f} ml, "
              f"{m['voxel_count']} voxels{flag}")


def read_manifest(path: str | Path) -> list[CaseInputs]:
    """Parse a case manifest; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise VolumeIOError(f"manifest not found: {path}")
    base = path.parent
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        missing = {"case_id", "image", "coronary_mask"} - cols
        if missing:
            raise ConfigError(f"manifest {path} lacks column(s): {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise ConfigError(f"empty manifest: {path}")

    def resolve(p: str | None) -> str | None:
        if p is None or not p.strip():
            return None
        q = Path(p.strip())
        return str(q if q.is_absolute() else base / q)

    cases, seen = [], set()
    for n, row in enumerate(rows, start=2):
        cid = (row.get("case_id") or "").strip()
        if not _CASE_ID.match(cid):
            raise ConfigError(f"manifest line {n}: invalid case id {cid!r}")
        if cid in seen:
            raise ConfigError(f"duplicate case id {cid!r} (manifest line {n})")
        seen.add(cid)
        if not (row.get("image") or "").strip() or not (row.get("coronary_mask") or "").strip():
            raise ConfigError(f"manifest line {n}: image and coronary_mask are required")
        cases.append(CaseInputs(cid, resolve(row["image"]), resolve(row["coronary_mask"]),
                                resolve(row.get("aorta_mask"))))
    return cases


def run_batch(cases: list[CaseInputs], cfg: RunConfig) -> list[dict]:
    jobs = [(c, cfg) for c in cases]
    if cfg.workers == 1 or len(jobs) == 1:
        return [run_case(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        return list(pool.map(_run_case_star, jobs))


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    cases = read_manifest(args.manifest)
    docs = run_batch(cases, cfg)

    case_dir = cfg.out_dir / "cases"
    case_dir.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        dump_json(doc, case_dir / f"{doc['case_id']}.json")
    report = aggregate([CaseRecord.from_dict(d) for d in docs])
    header = {"tool": {"name": "pcatmeasure", "version": __version__}, "parameters": cfg.echo()}
    metadata = {"generated_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    paths = write_report(report, cfg.out_dir, header, metadata)

    failed = report.n_total - report.status_counts.get("ok", 0) - report.status_counts.get("truncated", 0)
    print(f"{report.n_total} case(s): " + ", ".join(f"{k} {v}" for k, v in report.status_counts.items()))
    if failed:
        print(f"warning: {failed} case(s) failed", file=sys.stderr)
    print(f"wrote {paths['json']}")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    cor = load_volume(args.coronary_mask)
    aorta = load_volume(args.aorta_mask).as_mask() if args.aorta_mask else None
    rca, lca = pcat.split_arteries(cor.as_mask(), aorta, cfg.params.min_component_voxels, cfg.rca_seed)
    out = cfg.out_dir
    labels = np.zeros(cor.dims, dtype=np.uint8)
    labels[rca.data] = RCA_LABEL
    labels[lca.data] = LCA_LABEL
    save_volume(rca, out / "rca_mask.nii.gz")
    save_volume(lca, out / "lca_mask.nii.gz")
    save_volume(cor.with_data(labels), out / "labels.nii.gz", dtype=np.uint8)
    summary: dict = {"rca_voxels": rca.count, "lca_voxels": lca.count}
    if args.reference:
        ref = load_volume(args.reference)
        summary["dice"] = {
            "rca": dice(rca, ref.as_mask(RCA_LABEL)),
            "lca": dice(lca, ref.as_mask(LCA_LABEL)),
        }
    dump_json(summary, out / "split.json")
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_phantom(args: argparse.Namespace) -> int:
    if args.spec:
        spec = PhantomSpec.load(args.spec)
    else:
        kwargs = {}
        if args.spacing is not None:
            kwargs["spacing"] = args.spacing
        if args.merged:
            if args.preset != "coronary":
                raise _UsageError("--merged applies to the coronary preset only")
            kwargs["merged"] = True
        try:
            spec = PRESETS[args.preset](**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        image, vessel, aorta = render(spec)
    except ValueError as exc:
        raise ConfigError(f"cannot render phantom: {exc}") from exc
    out = Path(args.out)
    save_volume(image, out / "image.nii.gz", dtype=np.int16)
    coronary = render_labels(spec) if spec.vessel_labels else vessel
    save_volume(coronary, out / "coronary_mask.nii.gz", dtype=np.uint8)
    save_volume(aorta, out / "aorta_mask.nii.gz")
    spec.save(out / "phantom.json")
    print(f"wrote phantom to {out} (dims {spec.dims}, spacing {spec.spacing})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    files: list[Path] = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(p.glob("*.json")))
        elif p.is_file():
            files.append(p)
        else:
            raise VolumeIOError(f"no such file or directory: {p}")
    if not files:
        raise ConfigError("no case JSON files given")
    docs = []
    for f in files:
        try:
            docs.append(json.loads(f.read_text()))
        except (OSError, ValueError) as exc:
            raise VolumeIOError(f"cannot read case file {f}: {exc}") from exc
    try:
        records = [CaseRecord.from_dict(d) for d in docs]
        report = aggregate(records)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid case records: {exc}") from exc
    header = {"tool": {"name": "pcatmeasure", "version": __version__}}
    metadata = {"generated_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    paths = write_report(report, args.out, header, metadata)
    print(f"{report.n_total} case(s) aggregated; wrote {paths['json']}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("protocol (defaults: 10 mm skip, 40 mm segment, [-190, -30] HU)")
    g.add_argument("--config", help="INI file with [protocol] and [run] sections")
    g.add_argument("--skip-mm", dest="skip_mm", type=float, help="RCA arc length skipped from the ostium")
    g.add_argument("--segment-mm", dest="segment_mm", type=float, help="measured segment length")
    g.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"), help="fat HU window, inclusive")
    g.add_argument("--spur-mm", dest="spur_mm", type=float, help="skeleton spurs shorter than this are pruned")
    g.add_argument("--min-component-voxels", dest="min_component_voxels", type=int,
                   help="smallest component kept when splitting arteries")
    g.add_argument("--region-mode", dest="region_mode", choices=pcat.REGION_MODES,
                   help="sphere: radius = vessel diameter; annulus: wall + --annulus-mm")
    g.add_argument("--annulus-mm", dest="annulus_mm", type=float)
    g.add_argument("--lm-search-mm", dest="lm_search_mm", type=float,
                   help="how far from the ostium to look for the LM bifurcation")
    g.add_argument("--lpcat-budget", dest="lpcat_budget", choices=pcat.LPCAT_BUDGETS)
    g.add_argument("--lookahead-mm", dest="lookahead_mm", type=float)
    g.add_argument("--histogram-bin-hu", dest="histogram_bin_hu", type=float)
    g.add_argument("--split", choices=SPLIT_MODES,
                   help="auto: use labels 1 (RCA) / 2 (LCA) when present, else connected components")
    g.add_argument("--rca-seed", dest="rca_seed", nargs=3, type=float, metavar=("X", "Y", "Z"),
                   help="world point (mm) near the RCA, overrides the laterality rule")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcat", description="Pericoronary adipose tissue measurement from CCTA.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("measure", help="measure RPCAT and LPCAT for one case")
    m.add_argument("--image", required=True, help="CCTA volume (NIfTI)")
    m.add_argument("--coronary-mask", dest="coronary_mask", help="coronary segmentation (binary or labels 1/2)")
    m.add_argument("--rca-mask", dest="rca_mask", help="RCA mask, instead of --coronary-mask")
    m.add_argument("--lca-mask", dest="lca_mask", help="LCA mask, instead of --coronary-mask")
    m.add_argument("--aorta-mask", dest="aorta_mask", help="optional aorta mask, used to place the ostia")
    m.add_argument("--case-id", dest="case_id")
    m.add_argument("--out", default=".", help="output directory for <case_id>.json")
    m.add_argument("--debug-dir", dest="debug_dir", help="dump skeletons, graphs and regions here")
    _add_protocol_flags(m)
    m.set_defaults(func=cmd_measure)

    b = sub.add_parser("batch", help="measure every case of a manifest and aggregate")
    b.add_argument("manifest", help="CSV with columns case_id,image,coronary_mask[,aorta_mask]")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--workers", type=int, help=f"worker processes (env {WORKERS_ENV})")
    b.add_argument("--debug-dir", dest="debug_dir")
    _add_protocol_flags(b)
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("split", help="split a coronary mask into RCA and LCA")
    s.add_argument("--coronary-mask", dest="coronary_mask", required=True)
    s.add_argument("--aorta-mask", dest="aorta_mask")
    s.add_argument("--reference", help="label map (1 = RCA, 2 = LCA) to score the split with Dice")
    s.add_argument("--out", required=True)
    _add_protocol_flags(s)
    s.set_defaults(func=cmd_split)

    p = sub.add_parser("phantom", help="write a synthetic phantom as NIfTI files")
    p.add_argument("--preset", choices=sorted(PRESETS), default="coronary")
    p.add_argument("--spec", help="PhantomSpec JSON instead of a preset")
    p.add_argument("--spacing", type=float, help="isotropic voxel size (mm) for the preset")
    p.add_argument("--merged", action="store_true", help="join RCA and LCA (coronary preset)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    r = sub.add_parser("report", help="aggregate per-case JSON files into a cohort report")
    r.add_argument("inputs", nargs="+", help="case JSON files or directories of them")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pcat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PcatError as exc:
        print(f"error-class: {exc.error_class}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
