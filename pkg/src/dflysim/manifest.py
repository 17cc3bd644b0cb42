"""Experiment manifests: line-oriented key=value stanzas driving sweep runs.

A manifest is blank-line-separated records. The first record is the header
(must carry version=1, may set output_dir); every following record is one
experiment row:

    version=1
    output_dir=results

    params=4,2,2
    engine=dla
    voq=on
    buffer=16
    pattern=uniform
    loads=0.1,0.2,0.3
    seeds=1

Each row produces exactly one CSV and one JSON result file, named by row
index and row hash. A row whose JSON file already exists with a matching row
hash is skipped, so re-running an unchanged manifest is a no-op and partially
completed sweeps resume where they stopped.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import __version__
from .errors import DflyError, ManifestError
from .routing import ENGINES, synthesize
from .simulator import SimConfig, sweep
from .topology import DragonflyParams, build_topology
from .traffic import make_pattern

CSV_HEADER = "load,accepted,engine,voq,buffer,seed"

_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


@dataclass
class ManifestRow:
    index: int                      # 1-based position in the manifest
    params: DragonflyParams
    engine: str
    voq: bool
    buffer_depth: int
    pattern: str
    loads: list[float]
    seeds: list[int]
    warmup_ms: float = 0.2
    measure_ms: float = 1.0
    data_vls: int = 8
    pattern_args: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        p = self.params
        return {
            "params": [p.a, p.h, p.p, p.g],
            "engine": self.engine,
            "voq": self.voq,
            "buffer": self.buffer_depth,
            "pattern": self.pattern,
            "pattern_args": self.pattern_args,
            "loads": self.loads,
            "seeds": self.seeds,
            "warmup_ms": self.warmup_ms,
            "measure_ms": self.measure_ms,
            "data_vls": self.data_vls,
        }

    @property
    def row_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def basename(self) -> str:
        q = "voq" if self.voq else "novoq"
        return (
            f"row{self.index:02d}_{self.engine}_{q}_b{self.buffer_depth}"
            f"_{self.pattern}_{self.row_hash[:8]}"
        )


@dataclass
class Manifest:
    rows: list[ManifestRow]
    output_dir: str | None
    manifest_hash: str


def _records(text: str):
    rec: dict[str, str] = {}
    order = 0
    for lineno, raw in enumerate(text.splitlines() + [""], 1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            if rec:
                order += 1
                yield order, rec
                rec = {}
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in rec:
            raise ManifestError(f"line {lineno}: duplicate key {key!r} in record")
        rec[key] = value


def _parse_bool(value: str, what: str) -> bool:
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ManifestError(f"{what}: expected on/off, got {value!r}")


_ROW_KEYS = {
    "params", "engine", "voq", "buffer", "pattern", "loads", "seeds",
    "warmup_ms", "measure_ms", "data_vls", "hotspot_fraction", "stencil_dims",
}


def parse_manifest(text: str) -> Manifest:
    records = list(_records(text))
    if not records:
        raise ManifestError("empty manifest (missing version header)")
    _, header = records[0]
    if header.get("version") != "1":
        raise ManifestError("manifest header must declare version=1")
    unknown = set(header) - {"version", "output_dir"}
    if unknown:
        raise ManifestError(f"unknown header keys: {sorted(unknown)}")

    rows = []
    for index, (_, rec) in enumerate(records[1:], 1):
        where = f"row {index}"
        unknown = set(rec) - _ROW_KEYS
        if unknown:
            raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
        missing = {"params", "engine", "voq", "buffer", "pattern", "loads", "seeds"} - set(rec)
        if missing:
            raise ManifestError(f"{where}: missing keys {sorted(missing)}")
        engine = rec["engine"]
        if engine not in ENGINES:
            raise ManifestError(
                f"{where}: unknown engine {engine!r} (expected one of {sorted(ENGINES)})"
            )
        try:
            params = DragonflyParams.parse(rec["params"])
            loads = [float(w) for w in rec["loads"].split(",") if w.strip()]
            seeds = [int(w) for w in rec["seeds"].split(",") if w.strip()]
        except DflyError:
            raise
        except ValueError as exc:
            raise ManifestError(f"{where}: {exc}") from None
        if not seeds:
            raise ManifestError(f"{where}: needs at least one seed")
        if any(l < 0 or l > 1 for l in loads) or loads != sorted(loads):
            raise ManifestError(f"{where}: loads must be ascending fractions in [0, 1]")
        pattern = rec["pattern"]
        pattern_args: dict = {}
        if "hotspot_fraction" in rec:
            pattern_args["fraction"] = float(rec["hotspot_fraction"])
        if "stencil_dims" in rec:
            pattern_args["dims"] = [int(w) for w in rec["stencil_dims"].split(",")]
        make_pattern(pattern, **pattern_args)  # validates the name/args early
        rows.append(ManifestRow(
            index=index,
            params=params,
            engine=engine,
            voq=_parse_bool(rec["voq"], f"{where}: voq"),
            buffer_depth=int(rec["buffer"]),
            pattern=pattern,
            loads=loads,
            seeds=seeds,
            warmup_ms=float(rec.get("warmup_ms", 0.2)),
            measure_ms=float(rec.get("measure_ms", 1.0)),
            data_vls=int(rec.get("data_vls", 8)),
            pattern_args=pattern_args,
        ))
    manifest_hash = hashlib.sha256(text.encode()).hexdigest()[:16]
    return Manifest(rows=rows, output_dir=header.get("output_dir"), manifest_hash=manifest_hash)


def run_row(row: ManifestRow, out_dir: str, manifest_hash: str, force: bool = False) -> str:
    """Execute one manifest row; returns 'done' or 'skipped'.

    Writes <basename>.csv and <basename>.json atomically. Skips the row when
    its JSON output already exists with the same row hash (resume semantics).
    """
    base = os.path.join(out_dir, row.basename())
    json_path, csv_path = base + ".json", base + ".csv"
    if not force and os.path.exists(json_path):
        try:
            with open(json_path) as fh:
                prior = json.load(fh)
            if prior.get("row_hash") == row.row_hash and os.path.exists(csv_path):
                return "skipped"
        except (OSError, json.JSONDecodeError):
            pass

    topo = build_topology(row.params)
    routing = synthesize(topo, row.engine)
    runs = []
    sim_config = None
    csv_lines = [f"# manifest={manifest_hash} tool=dflysim/{__version__} row={row.row_hash}",
                 CSV_HEADER]
    for seed in row.seeds:
        config = SimConfig(
            topology=topo,
            routing=routing,
            pattern=make_pattern(row.pattern, **row.pattern_args),
            voq=row.voq,
            buffer_depth=row.buffer_depth,
            data_vls=row.data_vls,
            warmup_s=row.warmup_ms * 1e-3,
            measure_s=row.measure_ms * 1e-3,
            seed=seed,
        )
        if sim_config is None:
            # the full simulator configuration; load and seed vary per run
            sim_config = {k: v for k, v in config.canonical().items()
                          if k not in ("offered_load", "seed")}
        for result in sweep(config, row.loads):
            csv_lines.append(result.csv_row())
            runs.append({
                "config_hash": result.config_hash,
                "offered": result.offered,
                "accepted": result.accepted,
                "seed": result.seed,
                "injected_packets": result.injected_packets,
                "delivered_packets": result.delivered_packets,
                "measured_packets": result.measured_packets,
                "counted_endnodes": result.counted_endnodes,
                "per_endnode": list(result.per_endnode),
            })
    doc = {
        "format_version": 1,
        "tool": f"dflysim/{__version__}",
        "manifest_hash": manifest_hash,
        "row_hash": row.row_hash,
        "row": row.canonical(),
        "sim_config": sim_config,
        "runs": runs,
    }
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(csv_path, "\n".join(csv_lines) + "\n")
    _atomic_write(json_path, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return "done"


def _atomic_write(path: str, content: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _row_task(args):
    row, out_dir, manifest_hash, force = args
    try:
        return row.index, run_row(row, out_dir, manifest_hash, force), ""
    except Exception as exc:  # reported per row, never aborts the pool
        return row.index, "failed", f"{type(exc).__name__}: {exc}"


def run_manifest(manifest: Manifest, out_dir: str, jobs: int = 1, force: bool = False,
                 log=print) -> list[tuple[int, str, str]]:
    """Run every row; returns [(row index, status, detail)] in row order."""
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(row, out_dir, manifest.manifest_hash, force) for row in manifest.rows]
    if jobs <= 1:
        statuses = [_row_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            statuses = list(pool.map(_row_task, tasks))
    for index, status, detail in statuses:
        row = manifest.rows[index - 1]
        note = f" ({detail})" if detail else ""
        log(f"row {index:02d} {row.engine} {row.basename()}: {status}{note}")
    return statuses
