"""Command line front end.

Subcommands: spirals (dataset generation), train, predict, eval, gridsearch.
Standard output carries only each command's documented payload; everything
else goes to stderr.  Exit codes: 0 success, 2 usage or configuration error,
3 numeric failure during training.

The default worker count comes from the MACSVM_THREADS environment variable
(1 if unset); results are bitwise identical for any thread count.
"""

import argparse
import dataclasses
import itertools
import os
import sys

import numpy as np

from .data import (Dataset, ParseError, SplitSpec, gen_spirals, load_delimited,
                   split, standardize_apply, standardize_fit)
from .model_io import ModelFile, load_model, save_model
from .ridge import NumericError
from .training import TrainConfig, predict_collapsed, train_mac

# TrainConfig field -> flag, used to name the offending flag in config errors.
_FIELD_FLAGS = {
    "latent_dim": "--latent-dim",
    "basis_count": "--basis-count",
    "sigma": "--sigma",
    "lam": "--lam",
    "C": "--cost",
    "mu0": "--mu0",
    "mu_factor": "--mu-factor",
    "mu_max_stages": "--stages",
    "inner_tol": "--inner-tol",
    "inner_max_iters": "--inner-iters",
    "init": "--init",
    "patience": "--patience",
    "simplex_scale": "--simplex-scale",
    "svm_tol": "--svm-tol",
    "svm_max_epochs": "--svm-epochs",
    "threads": "--threads",
}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("MACSVM_THREADS", "1")))
    except ValueError:
        return 1


def _sigma_arg(s: str):
    if s == "auto":
        return "auto"
    return float(s)


def _basis_arg(s: str):
    if s == "linear":
        return None
    return int(s)


def _add_config_flags(p: argparse.ArgumentParser, require_dims: bool):
    p.add_argument("--latent-dim", type=int, required=require_dims,
                   help="dimension of the learned coordinates")
    p.add_argument("--basis-count", type=_basis_arg, default=None,
                   help="number of radial basis centers, or 'linear' (default)")
    p.add_argument("--sigma", type=_sigma_arg, default="auto",
                   help="basis width, or 'auto' for the median center distance")
    p.add_argument("--lam", type=float, default=1e-3, help="map ridge weight")
    p.add_argument("--cost", type=float, default=10.0, help="SVM cost parameter")
    p.add_argument("--mu0", type=float, default=2.0, help="initial penalty weight")
    p.add_argument("--mu-factor", type=float, default=1.5, help="penalty growth per stage")
    p.add_argument("--stages", type=int, default=20, help="maximum penalty stages")
    p.add_argument("--inner-tol", type=float, default=1e-4)
    p.add_argument("--inner-iters", type=int, default=50)
    p.add_argument("--init", default="simplex", help="'simplex' or 'random'")
    p.add_argument("--patience", type=int, default=1,
                   help="stages without validation improvement before stopping")
    p.add_argument("--simplex-scale", type=float, default=4.0)
    p.add_argument("--svm-tol", type=float, default=1e-6)
    p.add_argument("--svm-epochs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--standardize", action="store_true",
                   help="standardize features (statistics are stored in the model)")


def _add_val_flags(p: argparse.ArgumentParser, default_frac=None):
    p.add_argument("--val", default=None, help="validation data file")
    p.add_argument("--val-frac", type=float, default=default_frac,
                   help="fraction of --data held out for validation")


def _make_config(args, **overrides) -> TrainConfig:
    kwargs = dict(
        latent_dim=args.latent_dim,
        basis_count=args.basis_count,
        sigma=args.sigma,
        lam=args.lam,
        C=args.cost,
        mu0=args.mu0,
        mu_factor=args.mu_factor,
        mu_max_stages=args.stages,
        inner_tol=args.inner_tol,
        inner_max_iters=args.inner_iters,
        init=args.init,
        patience=args.patience,
        seed=args.seed,
        simplex_scale=args.simplex_scale,
        svm_tol=args.svm_tol,
        svm_max_epochs=args.svm_epochs,
        threads=args.threads,
    )
    kwargs.update(overrides)
    try:
        return TrainConfig(**kwargs)
    except ValueError as e:
        msg = str(e)
        for fld, flag in _FIELD_FLAGS.items():
            msg = msg.replace(fld, flag)
        raise UsageError(msg) from None


class UsageError(Exception):
    pass


def _load_train_val(args):
    """Training/validation datasets plus the label names, honoring --val/--val-frac."""
    ds, names = load_delimited(args.data)
    val = None
    if args.val is not None:
        vds, vnames = load_delimited(args.val)
        if vds.dim != ds.dim:
            raise UsageError(f"--val has {vds.dim} features, --data has {ds.dim}")
        code = {nm: i for i, nm in enumerate(names)}
        unknown = [nm for nm in vnames if nm not in code]
        if unknown:
            raise UsageError(f"--val labels not present in --data: {unknown}")
        remap = np.array([code[nm] for nm in vnames])
        val = Dataset(vds.X, remap[vds.y], ds.class_count)
    elif args.val_frac is not None:
        if not 0.0 < args.val_frac < 1.0:
            raise UsageError("--val-frac must lie strictly between 0 and 1")
        ds, val = split(ds, SplitSpec([1.0 - args.val_frac, args.val_frac], args.seed))
    return ds, val, names


def _standardize(args, ds, val):
    if not args.standardize:
        return ds, val, None, None
    mean, scale = standardize_fit(ds.X)
    ds = Dataset(standardize_apply(ds.X, mean, scale), ds.y, ds.class_count)
    if val is not None:
        val = Dataset(standardize_apply(val.X, mean, scale), val.y, val.class_count)
    return ds, val, mean, scale


def _config_echo(cfg: TrainConfig, standardized: bool) -> dict:
    echo = dataclasses.asdict(cfg)
    # execution details, not modeling parameters; keeping them out means the
    # written file is identical for any worker count
    echo.pop("threads", None)
    echo.pop("record_steps", None)
    echo["standardize"] = standardized
    return echo


def _write_trace(path, history):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("stage,iter,mu,penalty_obj,nested_obj,train_err,val_err\n")
        for h in history:
            fh.write("%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                h.stage, h.iteration, h.mu, h.penalty_obj, h.nested_obj,
                h.train_err, h.val_err))


def _model_input_dim(mf: ModelFile) -> int:
    m = mf.model
    if m.map.centers is not None:
        return m.map.centers.C.shape[1]
    return m.map.W.shape[1]


def _model_features(mf: ModelFile, X: np.ndarray) -> np.ndarray:
    if mf.standardize_mean is not None:
        return standardize_apply(X, mf.standardize_mean, mf.standardize_scale)
    return X


def cmd_spirals(args) -> int:
    if args.k < 2:
        raise UsageError("--k must be at least 2")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.noise < 0:
        raise UsageError("--noise must be nonnegative")
    if args.turns <= 0:
        raise UsageError("--turns must be positive")
    ds = gen_spirals(args.k, args.n, args.noise, args.turns, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(ds.n):
            fh.write("%.17g,%.17g,%d\n" % (ds.X[i, 0], ds.X[i, 1], ds.y[i]))
    return 0


def cmd_train(args) -> int:
    ds, val, names = _load_train_val(args)
    ds, val, mean, scale = _standardize(args, ds, val)
    cfg = _make_config(args)
    model, state = train_mac(cfg, ds, val)
    if args.trace_out:
        _write_trace(args.trace_out, state.history)
    mf = ModelFile(model=model, labels=names, config=_config_echo(cfg, args.standardize),
                   standardize_mean=mean, standardize_scale=scale)
    save_model(mf, args.model_out)
    return 0


def _read_feature_rows(path, D):
    """Feature matrix for prediction: D data columns, optionally a trailing label column."""
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty file")
    delim = "\t" if "\t" in lines[0][1] else ","
    rows = [(no, ln.split(delim)) for no, ln in lines]
    arity = len(rows[0][1])
    for no, cells in rows:
        if len(cells) != arity:
            raise ParseError(f"row {no}: expected {arity} columns, got {len(cells)}")
    if arity == D:
        label_col = None
    elif arity == D + 1:
        label_col = arity - 1
    else:
        raise UsageError(f"model expects {D} features, {path} has {arity} columns")

    def numeric(s):
        try:
            float(s)
            return True
        except ValueError:
            return False

    first = rows[0][1]
    header = any(not numeric(first[c]) for c in range(arity) if c != label_col)
    body = rows[1:] if header else rows
    if not body:
        raise ParseError(f"{path}: no data rows")
    X = np.empty((len(body), D))
    for r, (no, cells) in enumerate(body):
        j = 0
        for c in range(arity):
            if c == label_col:
                continue
            try:
                v = float(cells[c].strip())
            except ValueError:
                raise ParseError(f"row {no}, column {c}: not a number: {cells[c]!r}") from None
            if not np.isfinite(v):
                raise ParseError(f"row {no}, column {c}: non-finite value")
            X[r, j] = v
            j += 1
    return X


def cmd_predict(args) -> int:
    mf = load_model(args.model)
    X = _read_feature_rows(args.data, _model_input_dim(mf))
    codes = predict_collapsed(mf.model, _model_features(mf, X))
    out = [mf.labels[c] for c in codes]
    if args.out == "-":
        sys.stdout.write("\n".join(out) + "\n")
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(out) + "\n")
    return 0


def cmd_eval(args) -> int:
    mf = load_model(args.model)
    ds, names = load_delimited(args.data)
    D = _model_input_dim(mf)
    if ds.dim != D:
        raise UsageError(f"model expects {D} features, {args.data} has {ds.dim}")
    code = {nm: i for i, nm in enumerate(mf.labels)}
    unknown = [nm for nm in names if nm not in code]
    if unknown:
        raise UsageError(f"labels not present in the model: {unknown}")
    remap = np.array([code[nm] for nm in names])
    truth = remap[ds.y]
    pred = predict_collapsed(mf.model, _model_features(mf, ds.X))
    K = mf.model.svms.class_count
    confusion = np.zeros((K, K), dtype=np.int64)
    for t, p in zip(truth, pred):
        confusion[t, p] += 1
    lines = ["labels " + " ".join(mf.labels),
             "error %.6f" % float(np.mean(pred != truth))]
    for row in confusion:
        lines.append("confusion " + " ".join(str(int(v)) for v in row))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _grid_tokens(text, parse):
    toks = [t for t in text.split(",") if t.strip() != ""]
    return [parse(t.strip()) for t in toks]


def _param_count(cfg: TrainConfig, D: int, K: int) -> int:
    L = cfg.latent_dim
    if cfg.basis_count is None:
        return L * D + K * (L + 1)
    M = cfg.basis_count
    return M * D + L * M + K * (L + 1)


def cmd_gridsearch(args) -> int:
    try:
        sigmas = _grid_tokens(args.sigma_grid, _sigma_arg) if args.sigma_grid else [args.sigma]
        costs = _grid_tokens(args.cost_grid, float) if args.cost_grid else [args.cost]
        lams = _grid_tokens(args.lam_grid, float) if args.lam_grid else [args.lam]
        bases = _grid_tokens(args.basis_grid, _basis_arg) if args.basis_grid else [args.basis_count]
        latents = _grid_tokens(args.latent_grid, int) if args.latent_grid else [args.latent_dim]
    except ValueError as e:
        raise UsageError(f"bad grid value: {e}") from None
    combos = list(itertools.product(sigmas, costs, lams, bases, latents))
    if not combos:
        raise UsageError("empty grid")
    if args.latent_dim is None and not args.latent_grid:
        raise UsageError("--latent-dim or --latent-grid is required")

    ds, val, names = _load_train_val(args)
    if val is None:
        raise UsageError("gridsearch needs --val or --val-frac")
    ds, val, mean, scale = _standardize(args, ds, val)

    rows = []
    best = None
    for idx, (sg, cost, lam, basis, latent) in enumerate(combos):
        cfg = _make_config(args, sigma=sg, C=cost, lam=lam,
                           basis_count=basis, latent_dim=latent)
        model, _ = train_mac(cfg, ds, val)
        err = float(np.mean(predict_collapsed(model, val.X) != val.y))
        params = _param_count(cfg, ds.dim, ds.class_count)
        key = (err, params, idx)
        rows.append((key, sg, cost, lam, basis, latent, err, params))
        if best is None or key < best[0]:
            best = (key, model, cfg)

    rows.sort(key=lambda r: r[0])
    out = ["sigma cost lam basis_count latent_dim params val_error"]
    for _, sg, cost, lam, basis, latent, err, params in rows:
        out.append("%s %.6g %.6g %s %d %d %.6f" % (
            sg if isinstance(sg, str) else "%.6g" % sg,
            cost, lam, "linear" if basis is None else str(basis),
            latent, params, err))
    sys.stdout.write("\n".join(out) + "\n")

    _, model, cfg = best
    mf = ModelFile(model=model, labels=names, config=_config_echo(cfg, args.standardize),
                   standardize_mean=mean, standardize_scale=scale)
    save_model(mf, args.model_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macsvm",
        description="Nonlinear low-dimensional SVM trained by penalized alternation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spirals", help="generate an interleaved-spirals dataset")
    p.add_argument("--k", type=int, required=True, help="number of classes")
    p.add_argument("--n", type=int, required=True, help="points per class")
    p.add_argument("--noise", type=float, default=0.025)
    p.add_argument("--turns", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spirals)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True, help="training data file")
    _add_val_flags(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace-out", default=None,
                   help="objective/error trace file (CSV)")
    _add_config_flags(p, require_dims=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write one label per input row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="error rate and confusion counts")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch", help="train over a hyperparameter grid")
    p.add_argument("--data", required=True)
    _add_val_flags(p, default_frac=0.2)
    p.add_argument("--model-out", required=True, help="where the best model is written")
    p.add_argument("--sigma-grid", default=None, help="comma-separated widths")
    p.add_argument("--cost-grid", default=None)
    p.add_argument("--lam-grid", default=None)
    p.add_argument("--basis-grid", default=None, help="counts or 'linear'")
    p.add_argument("--latent-grid", default=None)
    _add_config_flags(p, require_dims=False)
    p.set_defaults(func=cmd_gridsearch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
