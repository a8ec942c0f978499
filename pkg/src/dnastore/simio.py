"""Experiment configuration, reads ingestion, and results persistence."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import IdsParams, MultiDrawParams
from .gf4 import from_dna
from .inner_codes import IndexCodebook, bundled_codebook, even_marker_positions
from .scldpc import ProtographSpec
from .strand import CodeConfig


class ConfigError(ValueError):
    """Configuration validation failure; message carries the field path."""


@dataclass
class SimConfig:
    """Fully resolved experiment configuration."""

    p_ins: float = 0.0
    p_del: float = 0.0
    p_sub: float = 0.0
    n_strands: int = 16
    coverage: float = 1.0
    block_len: int = 90
    n_markers: int | None = None  # default: one per 10 data symbols
    codebook: str = "3_1"  # '3_1', '6_2', 'identity:K', or a file path
    outer_rate: float | None = None
    protograph: dict | None = None
    variant: str = "coded"
    omega: float = 2.5
    calibration_samples: int = 50
    calibration_cache: str | None = None
    phi: int = 20
    trials: int = 100
    strand_len_target: int | None = None
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def ids(self) -> IdsParams:
        return IdsParams(p_ins=self.p_ins, p_del=self.p_del, p_sub=self.p_sub)

    def load_codebook(self) -> IndexCodebook:
        name = self.codebook
        if name in ("3_1", "6_2"):
            return bundled_codebook(name)
        if name.startswith("identity:"):
            return IndexCodebook.identity(int(name.split(":")[1]))
        return IndexCodebook.load(name)

    def code_config(self) -> CodeConfig:
        book = self.load_codebook()
        n_markers = self.n_markers if self.n_markers is not None else self.block_len // 10
        markers = even_marker_positions(self.block_len, n_markers)
        try:
            return CodeConfig(
                n_strands=self.n_strands,
                block_len=self.block_len,
                codebook=book,
                marker_positions=tuple(markers),
                outer_rate=self.outer_rate,
            )
        except ValueError as e:
            raise ConfigError(f"code: {e}") from e

    def multi_draw(self) -> MultiDrawParams:
        return MultiDrawParams(n_strands=self.n_strands, coverage=self.coverage)

    def protograph_spec(self) -> ProtographSpec:
        if self.protograph is None:
            raise ConfigError("protograph: missing")
        d = self.protograph
        try:
            return ProtographSpec(
                base=np.array(d["base"]),
                coupling_len=d.get("coupling_len", self.n_strands // 2),
                memory=d.get("memory", 2),
                lift=d["lift"],
            )
        except KeyError as e:
            raise ConfigError(f"protograph.{e.args[0]}: missing") from e

    def validate(self) -> None:
        try:
            self.ids()
        except ValueError as e:
            raise ConfigError(f"channel: {e}") from e
        if self.n_strands < 1:
            raise ConfigError("geometry.n_strands: must be >= 1")
        if self.coverage <= 0:
            raise ConfigError("geometry.coverage: must be positive")
        cfg = self.code_config()
        if self.variant not in ("genie", "uncoded", "coded", "coded-cluster"):
            raise ConfigError(f"decoding.variant: unknown {self.variant!r}")
        if self.protograph is not None:
            spec = self.protograph_spec()
            if spec.n_cols != cfg.n_outer:
                raise ConfigError(
                    f"protograph: lifted column count {spec.n_cols} != no={cfg.n_outer}"
                )
        if cfg.n_outer % self.n_strands != 0:
            raise ConfigError("code: no must be divisible by M")

    def echo(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "raw"}
        return d


_FIELD_MAP = {
    ("channel", "p_ins"): "p_ins",
    ("channel", "p_del"): "p_del",
    ("channel", "p_sub"): "p_sub",
    ("geometry", "n_strands"): "n_strands",
    ("geometry", "coverage"): "coverage",
    ("code", "block_len"): "block_len",
    ("code", "n_markers"): "n_markers",
    ("code", "codebook"): "codebook",
    ("code", "outer_rate"): "outer_rate",
    ("code", "protograph"): "protograph",
    ("decoding", "variant"): "variant",
    ("clustering", "omega"): "omega",
    ("clustering", "calibration_samples"): "calibration_samples",
    ("clustering", "calibration_cache"): "calibration_cache",
    ("estimator", "phi"): "phi",
    ("estimator", "trials"): "trials",
    ("estimator", "strand_len_target"): "strand_len_target",
    ("seed",): "seed",
    ("threads",): "threads",
}


def load_config(path) -> SimConfig:
    """Parse a JSON config file, apply defaults, and validate."""
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"parse error: {e}") from e
    cfg = SimConfig(raw=raw)
    seen = set()
    for keys, attr in _FIELD_MAP.items():
        node = raw
        ok = True
        for k in keys:
            if isinstance(node, dict) and k in node:
                node = node[k]
            else:
                ok = False
                break
        if ok:
            setattr(cfg, attr, node)
            seen.add(keys[0])
    if "channel" in raw and "p_sub" not in raw.get("channel", {}):
        warnings.warn("channel.p_sub missing; defaulting to 0")
    cfg.validate()
    return cfg


@dataclass
class ReadArchive:
    reads: list  # list of uint8 arrays
    metadata: dict = field(default_factory=dict)


def ingest_reads(path) -> ReadArchive:
    """Plain text (one read per line) or FASTQ (sequence lines only)."""
    reads = []
    with open(path) as f:
        lines = f.read().splitlines()
    fastq = bool(lines) and lines[0].startswith("@")
    if fastq:
        for rec_start in range(0, len(lines), 4):
            rec = lines[rec_start: rec_start + 4]
            if len(rec) < 2:
                break
            lineno = rec_start + 2
            try:
                reads.append(from_dna(rec[1].strip()))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from e
    else:
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                reads.append(from_dna(line))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from e
    return ReadArchive(reads=reads, metadata={"path": str(path), "format": "fastq" if fastq else "text"})


def emit_results(
    records: list,
    path,
    fmt: str,
    config_echo: dict | None = None,
    seed: int | None = None,
    timestamp: bool = False,
) -> None:
    """Write result records with provenance (config echo, seed, version).

    Timestamps are opt-in so that identical (seed, config) runs produce
    byte-identical files.
    """
    meta = {"version": __version__, "seed": seed, "config": config_echo}
    if timestamp:
        meta["created"] = datetime.now(timezone.utc).isoformat()
    if fmt == "json":
        with open(path, "w") as f:
            json.dump({"meta": meta, "results": records}, f, indent=2, sort_keys=True)
            f.write("\n")
    elif fmt == "csv":
        columns: list[str] = []
        for rec in records:
            for k in rec:
                if k not in columns:
                    columns.append(k)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            for k, v in (("version", __version__), ("seed", seed)):
                f.write(f"# {k}: {v}\n")
            if config_echo is not None:
                f.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
            if timestamp:
                f.write(f"# created: {meta['created']}\n")
            writer.writerow(columns)
            for rec in records:
                writer.writerow([rec.get(c, "") for c in columns])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def app_matrix_to_csv(app: np.ndarray, path) -> None:
    """Debug dump: one row per position, four probability columns."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["p0", "p1", "p2", "p3"])
        for row in np.asarray(app):
            writer.writerow([f"{v:.12g}" for v in row])
