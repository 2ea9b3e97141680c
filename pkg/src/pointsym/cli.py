"""Batch command line: gen, jet, train, discover, sparsify, eval, report, run."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import discover, io, jetdata, pdegen, pipeline, sparsify, surrogate
from .presets import PRESET_NAMES, get_preset

log = logging.getLogger("pointsym")


class UsageError(Exception):
    """Bad names, missing or mismatched inputs: exit code 2."""


def _preset(name: str, config: str | None = None):
    try:
        pr = get_preset(name)
    except KeyError as e:
        raise UsageError(e.args[0]) from None
    if config:
        try:
            overrides = json.loads(Path(config).read_text())
            pr = pr.with_overrides(**overrides)
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise UsageError(f"bad config {config}: {e}") from None
    return pr


def _write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(io.dumps(obj) + "\n")


def _read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _need(path: Path, what: str) -> Path:
    if not path.with_suffix(".json").exists():
        raise UsageError(f"no {what} found at {path}")
    return path


def _source_name(meta: dict) -> str | None:
    src = meta.get("source", {})
    return src.get("pde") or src.get("static")


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    pr = _preset(args.pde, args.config)
    if pr.static:
        raise UsageError(f"{pr.name} is static; use `pointsym jet --pde {pr.name}` to sample it")
    stride = pr.store_stride if args.space_stride is None else args.space_stride
    grid = pr.grid_spec()
    traj = pdegen.generate(pr.name, grid, pr.N_f, pr.N_ics, args.seed, pr.scale, space_stride=stride)
    out = Path(args.out) / "trajectory"
    pdegen.save_trajectory(traj, out)
    print(f"wrote {out}.bin/.json  shape {list(traj.data.shape)}")
    return 0


def cmd_jet(args) -> int:
    if bool(args.input) == bool(args.pde):
        raise UsageError("give exactly one of --in DIR or --pde NAME")
    if args.pde:
        pr = _preset(args.pde, args.config)
        overrides = {}
        if args.order is not None:
            overrides["order"] = args.order
        if args.space_stride is not None:
            overrides["jet_stride"] = args.space_stride
        if args.time_accuracy is not None:
            overrides["time_accuracy"] = args.time_accuracy
        pr = pr.with_overrides(**overrides)
        if pr.static:
            ds = pipeline.static_dataset(pr.name, seed=args.seed)
        else:
            ds = pipeline.preset_jets(pr, args.seed)
    else:
        traj = pdegen.load_trajectory(_need(Path(args.input) / "trajectory", "trajectory dataset"))
        name = traj.meta.get("pde")
        pr = get_preset(name) if name in PRESET_NAMES else None
        order = args.order if args.order is not None else (pr.order if pr else 2)
        acc = args.time_accuracy if args.time_accuracy is not None else (pr.time_accuracy if pr else 2)
        try:
            ds = jetdata.estimate_jet(traj, order, space_stride=args.space_stride or 1, time_accuracy=acc)
        except ValueError as e:
            raise UsageError(str(e)) from None
    out = Path(args.out) / "jets"
    jetdata.save_jets(ds, out)
    print(f"wrote {out}.bin/.json  {len(ds)} points, channels {', '.join(ds.names())}")
    return 0


def cmd_train(args) -> int:
    ds = jetdata.load_jets(_need(Path(args.input) / "jets", "jet dataset"))
    cfg = surrogate.MlpConfig(hidden_layers=args.layers, width=args.hidden, activation=args.activation, lr=args.lr,
                              batch_size=args.batch_size, epochs=args.epochs, seed=args.seed,
                              max_train=args.max_train or None, schedule=args.schedule)
    model = pipeline.fit_surrogate(ds, cfg)
    out = Path(args.out) / "model"
    surrogate.save_model(model, out)
    print(f"wrote {out}.bin/.json  val_loss {model.info.get('val_loss', float('nan')):.3e}")
    return 0


def cmd_discover(args) -> int:
    ds = jetdata.load_jets(_need(Path(args.jets) / "jets", "jet dataset"))
    if bool(args.model) == bool(args.analytic):
        raise UsageError("give exactly one of --model DIR or --analytic NAME")
    if args.analytic:
        try:
            model = surrogate.analytic_rhs(args.analytic)
        except KeyError as e:
            raise UsageError(e.args[0]) from None
    else:
        model = surrogate.load_model(_need(Path(args.model) / "model", "model"))
    name = _source_name(ds.meta)
    pr = get_preset(name) if name in PRESET_NAMES else None
    threshold = args.threshold if args.threshold is not None else (pr.threshold if pr else 0.5)
    library = args.library or (pr.library if pr else "poly2")
    samples = args.samples if args.samples is not None else (pr.samples if pr else 100)
    try:
        basis, result = pipeline.run_discovery(ds, model, library, samples, threshold, args.seed, args.eps1, args.mode)
    except (KeyError, ValueError) as e:
        msg = e.args[0] if e.args else str(e)
        raise UsageError(f"model and jets do not fit together: {msg}") from None
    result["config"]["preset"] = name
    _write_json(args.out, result)
    print(discover.format_spectrum(basis))
    for k, e in enumerate(basis.expressions, 1):
        print(f"  v{k} = {e}")
    return 0


def cmd_sparsify(args) -> int:
    result = _read_json(args.input)
    name = result.get("config", {}).get("preset")
    pr = get_preset(name) if name in PRESET_NAMES else None
    params = sparsify.LadmapParams(
        eps1=args.eps1 if args.eps1 is not None else (pr.ladmap_eps1 if pr else 1e-4),
        eps2=args.eps2 if args.eps2 is not None else (pr.ladmap_eps2 if pr else 1e-4),
        beta0=args.beta0, max_iter=args.max_iter, restarts=args.restarts,
    )
    out = pipeline.sparsify_basis(result, params)
    _write_json(args.out, out)
    diag = out["ladmap_diagnostics"]
    if "skipped" in diag:
        print("no generators found; nothing to sparsify")
        return 0
    print(f"l1,1 {diag['objective_in']:.6g} -> {diag['objective_out']:.6g}  "
          f"({diag['iterations']} iterations, converged={diag['converged']})")
    for k, e in enumerate(out["expressions_sparse"], 1):
        print(f"  v{k} = {e}")
    return 0


def cmd_eval(args) -> int:
    result = _read_json(args.input)
    try:
        ev = pipeline.evaluate(result, args.truth, linear=args.linear)
    except (KeyError, ValueError) as e:
        raise UsageError(e.args[0]) from None
    if ev["grassmann_distance"] is None:
        print(f"d_G undefined: {ev['note']}")
    else:
        print(f"d_G = {ev['grassmann_distance']:.6e}  (d = {ev['d']}, reference {args.truth})")
    if args.out:
        _write_json(args.out, ev)
    return 0


def cmd_report(args) -> int:
    result = _read_json(args.input)
    basis = pipeline.basis_from_result(result)
    print(discover.format_spectrum(basis, tail=args.tail))
    for k, e in enumerate(basis.expressions, 1):
        print(f"  v{k} = {e}")
    if result.get("expressions_sparse"):
        print("sparsified:")
        for k, e in enumerate(result["expressions_sparse"], 1):
            print(f"  v{k} = {e}")
    return 0


def cmd_run(args) -> int:
    """gen -> jet -> (train) -> discover -> sparsify -> eval in one go, from a preset."""
    pr = _preset(args.pde, args.config)
    out = Path(args.out)
    ds = pipeline.preset_jets(pr, args.seed)
    if args.nn:
        act = "relu" if pr.static else "sigmoid"
        cfg = surrogate.MlpConfig(activation=act, epochs=args.epochs, seed=args.seed)
        model = pipeline.fit_surrogate(ds, cfg)
        surrogate.save_model(model, out / "model")
    else:
        model = surrogate.analytic_rhs(pr.analytic)
    basis, result = pipeline.run_discovery(ds, model, pr.library, pr.samples, pr.threshold, args.seed)
    result["config"]["preset"] = pr.name
    result = pipeline.sparsify_basis(result, sparsify.LadmapParams(eps1=pr.ladmap_eps1, eps2=pr.ladmap_eps2))
    _write_json(out / "result.json", result)
    ev = pipeline.evaluate(result, pr.truth)
    _write_json(out / "eval.json", ev)
    print(discover.format_spectrum(basis))
    for k, e in enumerate(result.get("expressions_sparse", []), 1):
        print(f"  v{k} = {e}")
    dg = ev["grassmann_distance"]
    print(f"d_G vs {pr.truth}: " + (f"{dg:.6e}" if dg is not None else ev["note"]))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointsym", description="Discover Lie point symmetries from data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="simulate a built-in PDE")
    g.add_argument("--pde", required=True, help=f"one of {', '.join(PRESET_NAMES)}")
    g.add_argument("--config", help="JSON file of preset overrides")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--space-stride", type=int, help="spatial stride of the stored dataset (default from preset)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    j = sub.add_parser("jet", help="estimate jets from a dataset or a preset")
    j.add_argument("--in", dest="input", help="directory written by gen")
    j.add_argument("--pde", help="regenerate from a preset, differentiating on the full grid")
    j.add_argument("--config")
    j.add_argument("--seed", type=int, default=0)
    j.add_argument("--order", type=int)
    j.add_argument("--space-stride", type=int, help="keep every k-th grid point after differentiation")
    j.add_argument("--time-accuracy", type=int, choices=(2, 4))
    j.add_argument("--out", required=True)
    j.set_defaults(func=cmd_jet)

    t = sub.add_parser("train", help="fit the right-hand side with an MLP")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--hidden", type=int, default=200)
    t.add_argument("--layers", type=int, default=3)
    t.add_argument("--activation", default="sigmoid", choices=("sigmoid", "relu", "tanh"))
    t.add_argument("--lr", type=float, default=surrogate.MlpConfig.lr)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--epochs", type=int, default=surrogate.MlpConfig.epochs)
    t.add_argument("--max-train", type=int, default=surrogate.MlpConfig.max_train, help="0 = use every point")
    t.add_argument("--schedule", default=surrogate.MlpConfig.schedule, choices=("constant", "cosine"))
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("discover", help="build the criterion system and extract the null space")
    d.add_argument("--jets", required=True)
    d.add_argument("--model")
    d.add_argument("--analytic")
    d.add_argument("--library", choices=("poly2", "linear", "affine"))
    d.add_argument("--samples", type=int)
    d.add_argument("--threshold", type=float)
    d.add_argument("--eps1", type=float, default=discover.EPS1_DEFAULT, help="Gram-path ratio test")
    d.add_argument("--mode", default="auto", choices=("auto", "dense", "gram"))
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_discover)

    s = sub.add_parser("sparsify", help="rotate the basis towards sparsity")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--eps1", type=float)
    s.add_argument("--eps2", type=float)
    s.add_argument("--beta0", type=float, default=sparsify.LadmapParams.beta0)
    s.add_argument("--max-iter", type=int, default=sparsify.LadmapParams.max_iter)
    s.add_argument("--restarts", type=int, default=sparsify.LadmapParams.restarts)
    s.set_defaults(func=cmd_sparsify)

    e = sub.add_parser("eval", help="Grassmann distance to a reference algebra")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--linear", action="store_true", help="compare degree-1 parts only")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="print spectrum and generators")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--tail", type=int)
    r.set_defaults(func=cmd_report)

    u = sub.add_parser("run", help="whole pipeline for a preset")
    u.add_argument("--pde", required=True)
    u.add_argument("--config")
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--nn", action="store_true", help="train an MLP instead of using the analytic right-hand side")
    u.add_argument("--epochs", type=int, default=surrogate.MlpConfig.epochs)
    u.add_argument("--out", required=True)
    u.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
