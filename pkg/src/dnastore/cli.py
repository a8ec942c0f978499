"""Command-line driver for simulation, rate estimation, and decoding runs.

Exit codes: 0 on success, 2 for configuration/validation errors, 1 for
runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bcjr import BcjrDecoder, UndecodableRead, app_to_binary_llr
from .channel import MultiDrawParams, channel_pass
from .cluster import calibrate_cluster, decide_index
from .gf4 import random_symbols, to_dna
from .inner_codes import SearchInfeasible, distance_spectrum, search_index_code
from .metrics import (
    FerOptions,
    estimate_air,
    estimate_outage,
    noiseless_air_benchmark,
    run_fer,
    substream,
)
from .scldpc import Gf4Encoder, ParityCheckMatrix, design_rate, expand_protograph
from .simio import ConfigError, SimConfig, emit_results, ingest_reads, load_config
from .strand import encode_pool


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnastore", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", default="json", choices=["json", "csv"])
        p.add_argument("--timestamp", action="store_true",
                       help="include a wall-clock timestamp in the output metadata")

    p = sub.add_parser("simulate", help="encode a pool and run one channel pass")
    common(p)
    p.add_argument("--c", type=float, default=None, help="coverage (overrides config)")

    p = sub.add_parser("air", help="estimate the BCJR-once achievable rate")
    common(p)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--omega", type=float, default=None)

    p = sub.add_parser("outage", help="estimate the information-outage probability")
    common(p)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--ro-prime", type=float, required=True, dest="ro_prime")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--omega", type=float, default=None)

    p = sub.add_parser("fer", help="end-to-end frame error rate with the outer code")
    common(p)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--parity-check", default=None,
                   help="load a lifted parity-check matrix instead of expanding one")

    p = sub.add_parser("decode-reads", help="decode an external reads file")
    common(p)
    p.add_argument("--reads", required=True, help="plain-text or FASTQ reads file")
    p.add_argument("--offset-mode", default="search", choices=["search", "zero"],
                   help="'search': try all M seed-derived offsets per read; "
                        "'zero': decode without offsets")

    p = sub.add_parser("search-index-code", help="exhaustive/greedy index-codebook search")
    common(p, config_required=False)
    p.add_argument("--n", type=int, required=True, help="half-codeword length")
    p.add_argument("--size", type=int, required=True, help="codebook size")
    p.add_argument("--min-dist", type=int, required=True, dest="min_dist")

    p = sub.add_parser("calibrate-cluster", help="fit the intra-strand LLR distance model")
    common(p)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    return parser


def _resolve(cfg: SimConfig, args) -> SimConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "c", None) is not None:
        cfg.coverage = args.c
    if getattr(args, "omega", None) is not None:
        cfg.omega = args.omega
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    cfg.validate()
    return cfg


def _emit(records, args, cfg: SimConfig | None):
    echo = cfg.echo() if cfg is not None else None
    seed = cfg.seed if cfg is not None else getattr(args, "seed", None)
    if args.out == "-":
        json.dump({"meta": {"version": __version__, "seed": seed, "config": echo},
                   "results": records}, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        emit_results(records, args.out, args.format, config_echo=echo, seed=seed,
                     timestamp=args.timestamp)


def _calibration(cfg: SimConfig, code_cfg, decoder=None):
    rng = substream(cfg.seed, 4)
    return calibrate_cluster(cfg.ids(), code_cfg, cfg.omega, cfg.calibration_samples,
                             rng, decoder=decoder)


def cmd_simulate(args) -> list:
    cfg = _resolve(load_config(args.config), args)
    code_cfg = cfg.code_config()
    rng = substream(cfg.seed, 0)
    blocks = np.stack([random_symbols(code_cfg.block_len, rng) for _ in range(cfg.n_strands)])
    pool = encode_pool(blocks, code_cfg, cfg.seed)
    out = channel_pass(pool.strands, cfg.ids(), cfg.multi_draw(), rng)
    records = [
        {"read": to_dna(y), "source": int(src)}
        for y, src in zip(out.reads, out.ground_truth)
    ]
    return [{"n_reads": len(records),
             "strand_len": code_cfg.strand_len,
             "reads": records}], cfg


def cmd_air(args):
    cfg = _resolve(load_config(args.config), args)
    code_cfg = cfg.code_config()
    cal = None
    if cfg.variant == "coded-cluster":
        cal = _calibration(cfg, code_cfg)
    res = estimate_air(code_cfg, cfg.ids(), cfg.coverage, cfg.variant, cfg.phi,
                       cfg.seed, cal=cal, threads=cfg.threads)
    lo, hi = res.confidence_interval()
    return [{
        "rate": res.rate,
        "std_error": res.std_error,
        "ci_low": lo,
        "ci_high": hi,
        "phi": cfg.phi,
        "coverage": cfg.coverage,
        "variant": cfg.variant,
        "rate_limit": code_cfg.rate_limit,
        "noiseless_benchmark": noiseless_air_benchmark(code_cfg, cfg.coverage),
    }], cfg


def cmd_outage(args):
    cfg = _resolve(load_config(args.config), args)
    code_cfg = cfg.code_config()
    cal = None
    if cfg.variant == "coded-cluster":
        cal = _calibration(cfg, code_cfg)
    res = estimate_outage(code_cfg, cfg.ids(), cfg.coverage, args.ro_prime, cfg.trials,
                          cfg.seed, variant=cfg.variant, cal=cal, threads=cfg.threads)
    return [{
        "q_out": res.q_out,
        "trials": res.trials,
        "below": res.below,
        "ro_prime": res.ro_prime,
        "ci_low": res.ci_low,
        "ci_high": res.ci_high,
        "coverage": cfg.coverage,
        "variant": cfg.variant,
    }], cfg


def cmd_fer(args):
    cfg = _resolve(load_config(args.config), args)
    code_cfg = cfg.code_config()
    if args.parity_check is not None:
        H = ParityCheckMatrix.load(args.parity_check)
        spec = H.spec
    else:
        spec = cfg.protograph_spec()
        H = expand_protograph(spec, substream(cfg.seed, 5))
    cal = None
    if cfg.variant == "coded-cluster":
        cal = _calibration(cfg, code_cfg)
    options = FerOptions(variant=cfg.variant)
    res = run_fer(code_cfg, cfg.ids(), cfg.coverage, H, cfg.trials, cfg.seed,
                  options=options, cal=cal, threads=cfg.threads)
    return [{
        "fer": res.fer,
        "frames": res.frames,
        "errors": res.errors,
        "coverage": cfg.coverage,
        "variant": cfg.variant,
        "design_rate": design_rate(spec) if spec is not None else None,
        "per_frame": res.per_frame,
    }], cfg


def cmd_decode_reads(args):
    cfg = _resolve(load_config(args.config), args)
    code_cfg = cfg.code_config()
    archive = ingest_reads(args.reads)
    decoder = BcjrDecoder(code_cfg, cfg.ids())
    if args.offset_mode == "zero":
        offsets = [np.zeros(code_cfg.strand_len, dtype=np.uint8)]
    else:
        from .strand import offset_sequence
        offsets = [offset_sequence(cfg.seed, i, code_cfg.strand_len)
                   for i in range(cfg.n_strands)]
    records = []
    n_rejected = 0
    for j, y in enumerate(archive.reads):
        best = None
        for off in offsets:
            try:
                f, _ = decoder.evidence(np.asarray(y, dtype=np.uint8)[: code_cfg.strand_len
                                        + decoder.trellis.d_max], off)
            except UndecodableRead:
                continue
            if best is None or f > best[0]:
                best = (f, off)
        if best is None:
            n_rejected += 1
            records.append({"read_id": j, "decodable": False})
            continue
        app = decoder.decode(y, best[1])
        est, overflow = decide_index(app, code_cfg)
        llr = app_to_binary_llr(app)
        records.append({
            "read_id": j,
            "decodable": True,
            "index": est,
            "index_overflow": bool(overflow),
            "log_evidence": best[0],
            "data_hat": to_dna(app[code_cfg.kix // 2: code_cfg.kix // 2
                                   + code_cfg.block_len].argmax(axis=1)),
            "mean_abs_llr": float(np.mean(np.abs(llr))),
        })
    return [{"n_reads": len(archive.reads), "n_rejected": n_rejected,
             "reads": records}], cfg


def cmd_search_index_code(args):
    seed = args.seed if args.seed is not None else 0
    rng = substream(seed, 6)
    book, exhaustive = search_index_code(args.n, args.size, args.min_dist, rng)
    spec = distance_spectrum(book)
    return [{
        "n": args.n,
        "size": args.size,
        "min_dist": spec.min_distance,
        "exhaustive": exhaustive,
        "spectrum": {str(k): v for k, v in spec.as_sorted_items()},
        "codewords": ["".join(str(s) for s in w) for w in book.codewords],
    }], None


def cmd_calibrate_cluster(args):
    cfg = _resolve(load_config(args.config), args)
    if getattr(args, "samples", None) is not None:
        cfg.calibration_samples = args.samples
    code_cfg = cfg.code_config()
    cal = _calibration(cfg, code_cfg)
    return [{
        "mu": cal.mu,
        "sigma": cal.sigma,
        "omega": cal.omega,
        "threshold": cal.threshold,
        "samples": cfg.calibration_samples,
    }], cfg


_COMMANDS = {
    "simulate": cmd_simulate,
    "air": cmd_air,
    "outage": cmd_outage,
    "fer": cmd_fer,
    "decode-reads": cmd_decode_reads,
    "search-index-code": cmd_search_index_code,
    "calibrate-cluster": cmd_calibrate_cluster,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        records, cfg = _COMMANDS[args.command](args)
    except (ConfigError, SearchInfeasible) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {e}", file=sys.stderr)
        return 1
    _emit(records, args, cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
