"""Command-line surface.

Every run resolves its configuration (builtin preset < config file < flags),
validates it, then executes and writes results plus a manifest JSON naming
the resolved configuration, the seed, and the checkpoint hash. All
randomness flows from --seed, so a repeated run reproduces its CSV outputs
byte for byte. The only honored environment variable is
LATENTGUESS_OUT_DIR, a fallback for --out-dir.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

ENV_OUT_DIR = "LATENTGUESS_OUT_DIR"

_COMMANDS = ("train", "sample", "cpg", "dpg", "static", "build-testsets",
             "eval-cpg", "sweep", "bench", "export-latent")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="root RNG seed for the run")
    p.add_argument("--out-dir", type=str, default=None,
                   help=f"output directory (default: ${ENV_OUT_DIR} or '.')")
    p.add_argument("--config", type=str, default=None,
                   help="JSON file supplying defaults for any flag of this subcommand")
    p.add_argument("--threads", type=int, default=1,
                   help="cap on BLAS worker threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latentguess",
                                 description="Latent-representation password guessing toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a leak file")
    p.add_argument("--corpus", required=True, help="leak file (one password per line, optional count<TAB>pw)")
    p.add_argument("--out", default="model.ckpt", help="checkpoint path (rewritten every epoch)")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--resume", action="store_true", help="continue training --out if it exists")
    p.add_argument("--loss-csv", default=None, help="per-epoch loss CSV (default <out>.losses.csv)")
    for flag, typ in (("--latent-dim", int), ("--max-len", int), ("--hidden", int),
                      ("--blocks", int), ("--epochs", int), ("--batch-size", int),
                      ("--lr", float), ("--lam", float), ("--eps", float), ("--gamma", float),
                      ("--span-k", int)):
        p.add_argument(flag, type=typ, default=None, help="override the preset value")
    p.add_argument("--noise-mode", choices=("char", "span"), default=None)
    _add_common(p)

    p = sub.add_parser("sample", help="unconditional guesses from the prior")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default="guesses.txt")
    p.add_argument("--filtered", action="store_true", help="deduplicate via Bloom filter")
    p.add_argument("--fp-rate", type=float, default=0.01)
    _add_common(p)

    p = sub.add_parser("cpg", help="conditional guesses for a template")
    p.add_argument("--model", required=True)
    p.add_argument("--template", required=True,
                   help="display form; '*' is the wildcard, escape a literal star as '\\*'")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--out", default="cpg_guesses.txt")
    _add_common(p)

    p = sub.add_parser("dpg", help="dynamic attack against a target leak file")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--alpha", type=str, default="0.10",
                   help="hot-start quota: fraction in (0,1] or absolute count")
    p.add_argument("--sigma", type=float, default=0.35)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--trace-stride", type=int, default=1000)
    p.add_argument("--out-prefix", default="dpg")
    _add_common(p)

    p = sub.add_parser("static", help="prior-only attack against a target leak file")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--trace-stride", type=int, default=1000)
    p.add_argument("--out-prefix", default="static")
    _add_common(p)

    p = sub.add_parser("build-testsets", help="biased template test sets from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--p", type=float, default=0.5, help="per-character wildcard probability")
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--preset", choices=("desk", "paper"), default="desk",
                   help="desk scales the class bounds by corpus size; paper keeps them")
    _add_common(p)

    p = sub.add_parser("eval-cpg", help="match rate of CPG over built test sets")
    p.add_argument("--model", required=True)
    p.add_argument("--testsets", required=True, help="directory written by build-testsets")
    p.add_argument("--n", type=int, default=1000, help="coherent guesses per template")
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--out", default="eval_cpg.csv")
    _add_common(p)

    p = sub.add_parser("sweep", help="alpha/sigma grid of dynamic attacks")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--alphas", type=str, default="0.10,0.15")
    p.add_argument("--sigmas", type=str, default="0.15,0.35,0.8")
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--seeds", type=str, default="0,1,2")
    p.add_argument("--out", default="sweep.csv")
    _add_common(p)

    p = sub.add_parser("bench", help="guess throughput measurement")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--sink", default="bench_guesses.txt")
    p.add_argument("--out", default="bench.json")
    _add_common(p)

    p = sub.add_parser("export-latent", help="encode passwords/templates to latent CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="file with one password/template per line")
    p.add_argument("--out", default="latents.csv")
    _add_common(p)

    return ap


def _apply_config_file(args: argparse.Namespace) -> None:
    if not args.config:
        return
    with open(args.config, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("config file must contain a JSON object")
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"config file sets unknown option: {key}")
        # explicit CLI flags win; config only fills defaults
        if f"--{key}" not in sys.argv and attr != "config":
            setattr(args, attr, value)


def _resolve_out_dir(args) -> Path:
    out_dir = args.out_dir or os.environ.get(ENV_OUT_DIR) or "."
    return Path(out_dir)


def _parse_alpha(text: str):
    v = float(text)
    if v >= 1.0 and float(int(v)) == v and "." not in text:
        return int(v)
    return v


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, name: str, args, extra: dict) -> Path:
    doc = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "command"},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    doc.update(extra)
    path = out_dir / f"{name}.manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_config_file(args)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    threads = max(1, int(getattr(args, "threads", 1) or 1))
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(threads))

    try:
        return _dispatch(args)
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename or e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    # heavy imports happen after the thread cap is in place
    import numpy as np

    from . import charspace as cs
    from . import cwae, harness, latent
    from .cpg import CpgRequest, cpg_attack
    from .dpg import DpgConfig, dpg_attack, sweep_dpg

    out_dir = _resolve_out_dir(args)
    rng = np.random.default_rng(args.seed)
    cmd = args.command

    def outpath(name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else out_dir / p

    if cmd == "train":
        preset = dict(cwae.PRESETS[args.preset])
        for key in ("latent_dim", "max_len", "hidden", "blocks", "epochs",
                    "batch_size", "lr", "lam", "eps", "gamma"):
            v = getattr(args, key)
            if v is not None:
                preset[key] = v
        noise_mode = args.noise_mode or "char"
        span_k = args.span_k if args.span_k is not None else 5
        dataset = harness.load_leak(args.corpus, max_len=preset["max_len"])
        hyper = cwae.TrainHyper(
            lam=preset["lam"], eps=preset["eps"], gamma=preset["gamma"],
            batch_size=preset["batch_size"], lr=preset["lr"], epochs=preset["epochs"],
            noise_mode=noise_mode, span_k=span_k,
        )
        ckpt_path = outpath(args.out)
        if args.resume and ckpt_path.exists():
            model = cwae.load_checkpoint(ckpt_path)
        else:
            cfg = cwae.ModelConfig(
                alphabet=dataset.alphabet, latent_dim=preset["latent_dim"],
                max_len=preset["max_len"], hidden=preset["hidden"],
                blocks=preset["blocks"], seed=args.seed,
            )
            model = cwae.init_model(cfg, rng=np.random.default_rng(args.seed))
        out_dir.mkdir(parents=True, exist_ok=True)
        records = []

        def progress(epoch, rec):
            print(f"epoch {epoch + 1}/{hyper.epochs}: reconstruction={rec.reconstruction:.4f} "
                  f"mmd={rec.mmd:.4f} total={rec.total:.4f}")
            records.append(rec)

        passwords = dataset.expanded()
        cwae.train(model, passwords, hyper, rng, checkpoint_path=ckpt_path, progress=progress)
        loss_csv = outpath(args.loss_csv) if args.loss_csv else ckpt_path.with_suffix(".losses.csv")
        with open(loss_csv, "w", encoding="utf-8", newline="\n") as f:
            f.write("epoch,reconstruction,mmd,total\n")
            for i, r in enumerate(records, 1):
                f.write(f"{i},{r.reconstruction!r},{r.mmd!r},{r.total!r}\n")
        _write_manifest(out_dir, ckpt_path.stem, args, {
            "checkpoint_sha256": _sha256(ckpt_path),
            "corpus_unique": dataset.n_unique,
            "corpus_skipped": dataset.skipped,
            "final_losses": model.meta.get("final_losses"),
        })
        print(f"wrote {ckpt_path}")
        return 0

    if cmd == "sample":
        model = cwae.load_checkpoint(args.model)
        if args.n < 1:
            raise ValueError("--n must be >= 1")
        out_dir.mkdir(parents=True, exist_ok=True)
        report = harness.throughput_bench(model, args.n, outpath(args.out),
                                          filtered=args.filtered, rng=rng)
        _write_manifest(out_dir, Path(args.out).stem, args, {
            "checkpoint_sha256": _sha256(args.model),
            "emitted": report.emitted,
        })
        print(f"wrote {outpath(args.out)} ({report.emitted} guesses)")
        return 0

    if cmd == "cpg":
        model = cwae.load_checkpoint(args.model)
        t = model.alphabet.parse_template(args.template)
        req = CpgRequest(template=t, n=args.n, sigma=args.sigma,
                         max_attempts=args.max_attempts)
        if len(t) > model.config.max_len:
            raise ValueError(f"template over-length: {len(t)} > {model.config.max_len}")
        res = cpg_attack(model, req, rng)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(outpath(args.out), "w", encoding="utf-8", newline="\n") as f:
            for g in res.guesses:
                f.write(g + "\n")
        _write_manifest(out_dir, Path(args.out).stem, args, {
            "checkpoint_sha256": _sha256(args.model),
            "guesses": len(res.guesses),
            "attempts_used": res.attempts_used,
            "coherence_rate": res.coherence_rate,
        })
        print(f"{len(res.guesses)} template-coherent guesses "
              f"(coherence rate {res.coherence_rate:.3f}) -> {outpath(args.out)}")
        return 0

    if cmd in ("dpg", "static"):
        model = cwae.load_checkpoint(args.model)
        target_ds = harness.load_leak(args.target, max_len=model.config.max_len,
                                      alphabet=model.alphabet)
        target = target_ds.passwords
        if cmd == "dpg":
            cfg = DpgConfig(alpha=_parse_alpha(args.alpha), sigma=args.sigma,
                            budget=args.budget, dedup=args.dedup,
                            trace_stride=args.trace_stride)
            trace, state = dpg_attack(model, target, cfg, rng, seed=args.seed)
        else:
            from .dpg import static_attack
            trace, state = static_attack(model, target, args.budget, rng,
                                         dedup=args.dedup, trace_stride=args.trace_stride,
                                         seed=args.seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_path = outpath(f"{args.out_prefix}.trace.csv")
        trace.write_csv(trace_path)
        _write_manifest(out_dir, args.out_prefix, args, {
            "checkpoint_sha256": _sha256(args.model),
            "target_unique": len(target),
            "final_matches": trace.final_matches,
            "hot_start_at": state.hot_start_at,
            "alpha_resolved": state.alpha_resolved,
        })
        print(f"{trace.final_matches}/{len(target)} matched in {state.guesses_counted} "
              f"guesses -> {trace_path}")
        return 0

    if cmd == "build-testsets":
        dataset = harness.load_leak(args.corpus, max_len=args.max_len)
        bounds = (harness.TESTSET_CLASSES if args.preset == "paper"
                  else harness.scale_class_bounds(dataset.n_unique))
        sets = harness.build_biased_testsets(dataset, args.p, args.per_class, rng,
                                             bounds=bounds)
        out_dir.mkdir(parents=True, exist_ok=True)
        a = dataset.alphabet
        index_rows = []
        for label, lst in sets.items():
            if not lst:
                print(f"class {label}: unpopulated (bounds {bounds[label]})")
            for i, ts in enumerate(lst):
                fname = f"testset_{label}_{i:03d}.txt"
                with open(out_dir / fname, "w", encoding="utf-8", newline="\n") as f:
                    f.write(a.format_template(ts.template) + "\n")
                    for member in ts.members:
                        f.write(member + "\n")
                index_rows.append((label, fname, len(ts.members)))
        with open(out_dir / "testsets_index.csv", "w", encoding="utf-8", newline="\n") as f:
            f.write("class,file,members\n")
            for label, fname, n in index_rows:
                f.write(f"{label},{fname},{n}\n")
        _write_manifest(out_dir, "testsets", args, {
            "bounds": {k: list(v) for k, v in bounds.items()},
            "emitted": {k: len(v) for k, v in sets.items()},
        })
        print(f"wrote {len(index_rows)} test sets -> {out_dir}")
        return 0

    if cmd == "eval-cpg":
        model = cwae.load_checkpoint(args.model)
        a = model.alphabet
        ts_dir = Path(args.testsets)
        index = ts_dir / "testsets_index.csv"
        if not index.exists():
            raise FileNotFoundError(str(index))
        rows = []
        with open(index, "r", encoding="utf-8") as f:
            next(f)
            for line in f:
                label, fname, _ = line.rstrip("\n").split(",")
                with open(ts_dir / fname, "r", encoding="utf-8") as tf:
                    lines = tf.read().splitlines()
                t = a.parse_template(lines[0])
                members = set(lines[1:])
                req = CpgRequest(template=t, n=args.n, sigma=args.sigma,
                                 max_attempts=args.max_attempts)
                res = cpg_attack(model, req, rng)
                matched = len(members & set(res.guesses))
                rows.append((label, fname, len(members), matched,
                             matched / len(members) if members else 0.0))
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(outpath(args.out), "w", encoding="utf-8", newline="\n") as f:
            f.write("class,file,members,matched,fraction\n")
            for label, fname, nm, got, frac in rows:
                f.write(f"{label},{fname},{nm},{got},{frac!r}\n")
        _write_manifest(out_dir, Path(args.out).stem, args,
                        {"checkpoint_sha256": _sha256(args.model), "templates": len(rows)})
        print(f"evaluated {len(rows)} templates -> {outpath(args.out)}")
        return 0

    if cmd == "sweep":
        model = cwae.load_checkpoint(args.model)
        target_ds = harness.load_leak(args.target, max_len=model.config.max_len,
                                      alphabet=model.alphabet)
        alphas = [_parse_alpha(s) for s in args.alphas.split(",") if s]
        sigmas = [float(s) for s in args.sigmas.split(",") if s]
        seeds = [int(s) for s in args.seeds.split(",") if s]
        rows = sweep_dpg(model, target_ds.passwords, alphas, sigmas, args.budget, seeds)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(outpath(args.out), "w", encoding="utf-8", newline="\n") as f:
            f.write("alpha,sigma,budget,mean,std,finals\n")
            for r in rows:
                finals = ";".join(str(v) for v in r["final_matches"])
                f.write(f"{r['alpha']},{r['sigma']},{r['budget']},{r['mean']!r},{r['std']!r},{finals}\n")
        _write_manifest(out_dir, Path(args.out).stem, args,
                        {"checkpoint_sha256": _sha256(args.model), "cells": len(rows)})
        print(f"swept {len(rows)} cells -> {outpath(args.out)}")
        return 0

    if cmd == "bench":
        model = cwae.load_checkpoint(args.model)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = harness.throughput_bench(model, args.n, outpath(args.sink),
                                          filtered=args.filtered, rng=rng)
        doc = {
            "n_guesses": report.n_guesses, "seconds": report.seconds,
            "guesses_per_second": report.guesses_per_second,
            "filtered": report.filtered, "emitted": report.emitted,
            "machine": report.machine,
        }
        with open(outpath(args.out), "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        _write_manifest(out_dir, Path(args.out).stem, args,
                        {"checkpoint_sha256": _sha256(args.model),
                         "guesses_per_second": report.guesses_per_second})
        print(f"{report.guesses_per_second:.0f} guesses/second "
              f"({'filtered' if report.filtered else 'raw'}) -> {outpath(args.out)}")
        return 0

    if cmd == "export-latent":
        model = cwae.load_checkpoint(args.model)
        a = model.alphabet
        with open(args.input, "r", encoding="utf-8") as f:
            texts = [a.parse_template(line) for line in f.read().splitlines() if line]
        if not texts:
            raise ValueError("empty input file")
        pts = cwae.encode_latent_batch(model, texts)
        out_dir.mkdir(parents=True, exist_ok=True)
        latent.export_csv(pts, outpath(args.out))
        _write_manifest(out_dir, Path(args.out).stem, args,
                        {"checkpoint_sha256": _sha256(args.model), "points": len(texts)})
        print(f"exported {len(texts)} latent vectors -> {outpath(args.out)}")
        return 0

    raise ValueError(f"unknown command: {cmd}")


if __name__ == "__main__":
    sys.exit(main())
