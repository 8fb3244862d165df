"""Command-line surface: divergences, oracle checks, fits, training, sweeps.

Subcommands: div (closed forms + optional MC cross-check), integrand
(plot-ready pointwise tables), fit (bivariate mixture fitting), train /
sweep (VAE runs and alpha grids), dataset (container builders). Every
file-writing command takes --out and leaves a manifest.json naming its
outputs and the sha256 of its configuration. Exit codes: 0 success, 2 bad
input or unparseable files, 3 numerical failure.
"""

import argparse
import csv
import json
import pathlib
import sys

import numpy as np

from . import fit2d
from .divergence import (
    DivergenceSpec,
    Family,
    gjs_dual_full,
    gjs_full,
    kl_full,
)
from .errors import InputError, NumericalError
from .gaussian import (
    FullGaussian,
    SkewConvention,
    intermediate_full,
    load_json,
    log_pdf,
)
from .oracle import DensityHandle, default_bounds_1d, integrand_1d, mc_gjs, mc_kl
from .vae import (
    TrainConfig,
    VaeArch,
    VaeModel,
    build_digits_desk,
    convert_idx,
    data_dir,
    estimate_log_evidence,
    latent_traversal,
    load_split,
    make_ring,
    train,
    traversal_csv,
    traversal_png,
    write_container,
)
from .vae.train import config_hash

_CLOSED_FORM = {
    Family.KL_FORWARD: lambda f1, f2, s: kl_full(f1, f2),
    Family.KL_REVERSE: lambda f1, f2, s: kl_full(f2, f1),
    Family.GJS: lambda f1, f2, s: gjs_full(f1, f2, s.alpha, s.convention),
    Family.GJS_DUAL: lambda f1, f2, s: gjs_dual_full(f1, f2, s.alpha, s.convention),
}


def _to_full(g):
    return g if isinstance(g, FullGaussian) else g.to_full()


def _spec_from_args(args) -> DivergenceSpec:
    family = Family.coerce(args.family)
    if getattr(args, "dual", False):
        if family is not Family.GJS:
            raise InputError("--dual only applies to --family gjs")
        family = Family.GJS_DUAL
    conv = SkewConvention.coerce(args.conv) if args.conv else None
    return DivergenceSpec(
        family=family,
        alpha=args.alpha,
        lambda_skew=args.lambda_skew,
        convention=conv,
        weight=getattr(args, "weight", 1.0),
        mmd_bandwidth=getattr(args, "bandwidth", 1.0),
    )


def _spec_row(spec: DivergenceSpec):
    return {
        "family": spec.family.value,
        "alpha": spec.alpha,
        "lambda": spec.lambda_skew,
        "convention": spec.convention.value if spec.convention else None,
        "weight": spec.weight,
        "mmd_bandwidth": spec.mmd_bandwidth,
    }


def _out_dir(args):
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, command, config, files):
    payload = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "files": sorted(files),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return payload


def cmd_div(args):
    g1 = load_json(args.left)
    g2 = load_json(args.right)
    spec = _spec_from_args(args)
    if spec.family not in _CLOSED_FORM:
        raise InputError(
            f"family {spec.family.value} has no Gaussian closed form; "
            "closed-form families: kl-forward, kl-reverse, gjs, gjs-dual"
        )
    value = float(_CLOSED_FORM[spec.family](_to_full(g1), _to_full(g2), spec))
    print(repr(value))
    payload = {"spec": _spec_row(spec), "value": value}
    if args.oracle is not None:
        n, seed = (int(v) for v in args.oracle)
        hp = DensityHandle.from_gaussian(_to_full(g1))
        hq = DensityHandle.from_gaussian(_to_full(g2))
        if spec.family is Family.KL_FORWARD:
            est = mc_kl(hp, hq, n, seed)
        elif spec.family is Family.KL_REVERSE:
            est = mc_kl(hq, hp, n, seed)
        else:
            est = mc_gjs(
                hp, hq, spec.alpha, spec.convention,
                spec.family is Family.GJS_DUAL, n, seed,
            )
        print(f"mc {est.value!r} std_error {est.std_error!r}")
        payload["mc"] = {
            "value": est.value,
            "std_error": est.std_error,
            "n_samples": est.n_samples,
            "seed": est.seed,
        }
    if args.json:
        path = pathlib.Path(args.json)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_integrand(args):
    g1 = load_json(args.left)
    g2 = load_json(args.right)
    if g1.dim != 1 or g2.dim != 1:
        raise InputError("integrand dumps need 1-D Gaussians")
    hp = DensityHandle.from_gaussian(g1)
    hq = DensityHandle.from_gaussian(g2)
    families = [Family.coerce(tok) for tok in args.families.split(",") if tok.strip()]
    if not families:
        raise InputError("--families is empty")
    n_points = int(args.points)
    if n_points < 3 or n_points % 2 == 0:
        raise InputError("--points must be odd and >= 3 for Simpson consistency")
    lo = args.lo
    hi = args.hi
    if lo is None or hi is None:
        auto_lo, auto_hi = default_bounds_1d(hp, hq)
        lo = auto_lo if lo is None else float(lo)
        hi = auto_hi if hi is None else float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InputError(f"bad grid bounds [{lo}, {hi}]")

    xs = np.linspace(float(lo), float(hi), n_points)
    batch = xs[:, None]
    conv = SkewConvention.coerce(args.conv) if args.conv else None
    lam = float(args.lambda_skew)
    f1, f2 = _to_full(g1), _to_full(g2)
    p_dens = np.exp(np.asarray(hp.log_pdf(batch), float))
    q_dens = np.exp(np.asarray(hq.log_pdf(batch), float))
    columns = {
        "x": xs,
        "p": p_dens,
        "q": q_dens,
        "mix_arith": (1.0 - lam) * p_dens + lam * q_dens,
        "geo_original": np.exp(
            log_pdf(intermediate_full(f1, f2, args.alpha, SkewConvention.ORIGINAL), batch)
        ),
        "geo_primed": np.exp(
            log_pdf(intermediate_full(f1, f2, args.alpha, SkewConvention.PRIMED), batch)
        ),
    }
    for family in families:
        spec = DivergenceSpec(
            family=family, alpha=args.alpha, lambda_skew=lam, convention=conv
        )
        label = "integrand_" + family.value.replace("-", "_")
        columns[label] = np.asarray(integrand_1d(hp, hq, spec)(xs), float)

    out = _out_dir(args)
    csv_path = out / "integrand.csv"
    names = list(columns)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n_points):
            writer.writerow([repr(float(columns[c][i])) for c in names])
    config = {
        "left": json.loads(pathlib.Path(args.left).read_text()),
        "right": json.loads(pathlib.Path(args.right).read_text()),
        "families": [f.value for f in families],
        "alpha": float(args.alpha),
        "lambda": lam,
        "convention": conv.value if conv else None,
        "lo": float(lo),
        "hi": float(hi),
        "points": n_points,
    }
    _write_manifest(out, "integrand", config, ["integrand.csv"])
    print(str(csv_path))
    return 0


def cmd_fit(args):
    mix = fit2d.MixtureSpec.load_json(args.mixture)
    spec = _spec_from_args(args)
    samples = fit2d.mixture_sample(mix, args.n_data, args.data_seed)
    opt = {
        "lr": args.lr,
        "iters": args.iters,
        "n_model_samples": args.model_samples,
        "seed": args.seed,
    }
    trace = fit2d.fit(samples, spec, opt)
    out = _out_dir(args)
    trace.save_json(out / "trace.json")
    summary = fit2d.fitted_summary(trace)
    summary_payload = {
        "mu": [float(v) for v in summary["mu"]],
        "sigma": [[float(v) for v in row] for row in summary["sigma"]],
        "det_sigma": float(summary["det_sigma"]),
        "final_loss": float(summary["final_loss"]),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    g = trace.final.to_gaussian()
    fit2d.level_set_dump(
        g,
        out / "fitted_levels.csv",
        lo=(args.grid_lo, args.grid_lo),
        hi=(args.grid_hi, args.grid_hi),
        resolution=args.grid_res,
    )
    config = {
        "mixture": mix.to_json_dict(),
        "spec": _spec_row(spec),
        "n_data": int(args.n_data),
        "data_seed": int(args.data_seed),
        "opt": {k: (float(v) if k == "lr" else int(v)) for k, v in opt.items()},
        "grid": {
            "lo": float(args.grid_lo),
            "hi": float(args.grid_hi),
            "resolution": int(args.grid_res),
        },
    }
    _write_manifest(
        out, "fit", config, ["trace.json", "summary.json", "fitted_levels.csv"]
    )
    print(json.dumps(summary_payload, sort_keys=True))
    return 0


def _parse_hidden(text):
    try:
        dims = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise InputError(f"--hidden must be comma-separated integers, got {text!r}") from None
    if not dims:
        raise InputError("--hidden is empty")
    return dims


def _train_once(arch, train_x, test_x, spec, args, seed, dataset_path):
    cfg = TrainConfig(
        reg=spec,
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        seed=seed,
        dataset_path=str(dataset_path),
        eval_mode=args.eval_mode,
    )
    model = VaeModel.init(arch, seed=seed)
    trained, record = train(model, (train_x, test_x), cfg)
    evidence = estimate_log_evidence(trained, test_x, args.evidence_k, seed=seed)
    final = record.final()
    row = {
        "family": spec.family.value,
        "convention": spec.convention.value if spec.convention else "",
        "alpha": spec.alpha,
        "seed": seed,
        "final_train_recon": final["train_recon"],
        "final_test_recon": final["test_recon"],
        "final_div": final["train_div"],
        "log_evidence": evidence,
    }
    return trained, record, row


def _resolve_data(args):
    dataset_path = pathlib.Path(args.data) if args.data else data_dir()
    train_x, test_x = load_split(dataset_path)
    return dataset_path, train_x, test_x


def _train_config_dict(args, dataset_path):
    return {
        "dataset_path": str(dataset_path),
        "hidden": list(_parse_hidden(args.hidden)),
        "latent": int(args.latent),
        "decoder": args.decoder,
        "batch_size": int(args.batch_size),
        "epochs": int(args.epochs),
        "lr": float(args.lr),
        "eval_mode": args.eval_mode,
        "evidence_k": int(args.evidence_k),
    }


def cmd_train(args):
    dataset_path, train_x, test_x = _resolve_data(args)
    spec = _spec_from_args(args)
    arch = VaeArch(
        input_dim=train_x.shape[1],
        hidden_dims=_parse_hidden(args.hidden),
        latent_dim=args.latent,
        decoder_output=args.decoder,
    )
    trained, record, row = _train_once(
        arch, train_x, test_x, spec, args, args.seed, dataset_path
    )
    out = _out_dir(args)
    record.save_jsonl(out / "record.jsonl")
    with open(out / "final.json", "w", encoding="utf-8") as fh:
        json.dump(row, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files = ["record.jsonl", "final.json"]
    if args.traversal:
        grid = latent_traversal(
            trained, test_x[0], list(range(arch.latent_dim)), 10, (-3.0, 3.0)
        )
        traversal_png(grid, out / "traversal.png")
        traversal_csv(grid, out / "traversal.csv")
        files += ["traversal.png", "traversal.csv"]
    config = {"spec": _spec_row(spec), "seed": int(args.seed)}
    config.update(_train_config_dict(args, dataset_path))
    _write_manifest(out, "train", config, files)
    print(json.dumps(row, sort_keys=True))
    return 0


_SUMMARY_COLUMNS = [
    "family",
    "convention",
    "alpha",
    "seed",
    "final_train_recon",
    "final_test_recon",
    "final_div",
    "log_evidence",
]


def cmd_sweep(args):
    dataset_path, train_x, test_x = _resolve_data(args)
    families = [Family.coerce(tok) for tok in args.families.split(",") if tok.strip()]
    convs = [SkewConvention.coerce(tok) for tok in args.convs.split(",") if tok.strip()]
    try:
        alphas = [float(tok) for tok in args.alphas.split(",") if tok.strip()]
        seeds = [int(tok) for tok in args.seeds.split(",") if tok.strip()]
    except ValueError as exc:
        raise InputError(f"bad --alphas/--seeds list: {exc}") from None
    if not (families and convs and alphas and seeds):
        raise InputError("--families, --convs, --alphas, --seeds must be nonempty")
    arch = VaeArch(
        input_dim=train_x.shape[1],
        hidden_dims=_parse_hidden(args.hidden),
        latent_dim=args.latent,
        decoder_output=args.decoder,
    )
    out = _out_dir(args)
    rows = []
    files = []
    # Deterministic matrix order: families, then conventions, alphas, seeds.
    for family in families:
        for conv in convs:
            for alpha in alphas:
                for seed in seeds:
                    spec = DivergenceSpec(
                        family=family,
                        alpha=alpha,
                        convention=conv,
                        weight=args.weight,
                        mmd_bandwidth=args.bandwidth,
                    )
                    _, record, row = _train_once(
                        arch, train_x, test_x, spec, args, seed, dataset_path
                    )
                    slug = (
                        f"{family.value}_{conv.value}_{alpha:g}_{seed}".replace("-", "_")
                    )
                    record.save_jsonl(out / f"record_{slug}.jsonl")
                    files.append(f"record_{slug}.jsonl")
                    rows.append(row)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row[c] if isinstance(row[c], str) else repr(float(row[c]))
                    if isinstance(row[c], float)
                    else row[c]
                    for c in _SUMMARY_COLUMNS
                ]
            )
    files.append("summary.csv")
    config = {
        "families": [f.value for f in families],
        "convs": [c.value for c in convs],
        "alphas": alphas,
        "seeds": seeds,
        "weight": float(args.weight),
        "bandwidth": float(args.bandwidth),
    }
    config.update(_train_config_dict(args, dataset_path))
    _write_manifest(out, "sweep", config, files)
    print(str(out / "summary.csv"))
    return 0


def cmd_dataset(args):
    if args.kind == "digits":
        out = pathlib.Path(args.out) if args.out else data_dir()
        train_path, test_path = build_digits_desk(
            out, seed=args.seed, n_train=args.n_train, n_test=args.n_test
        )
        config = {
            "kind": "digits",
            "seed": int(args.seed),
            "n_train": int(args.n_train),
            "n_test": int(args.n_test),
        }
        _write_manifest(out, "dataset", config, [train_path.name, test_path.name])
        print(str(train_path))
        print(str(test_path))
        return 0
    if args.kind == "ring":
        out = pathlib.Path(args.out) if args.out else data_dir()
        out.mkdir(parents=True, exist_ok=True)
        rows = make_ring(args.n, args.seed, noise=args.noise)
        n_test = int(round(args.test_fraction * rows.shape[0]))
        if not 0 < n_test < rows.shape[0]:
            raise InputError(
                f"--test-fraction {args.test_fraction} leaves no train/test split for n={args.n}"
            )
        write_container(out / "train.gjsd", rows[: rows.shape[0] - n_test])
        write_container(out / "test.gjsd", rows[rows.shape[0] - n_test :])
        config = {
            "kind": "ring",
            "n": int(args.n),
            "seed": int(args.seed),
            "noise": float(args.noise),
            "test_fraction": float(args.test_fraction),
        }
        _write_manifest(out, "dataset", config, ["train.gjsd", "test.gjsd"])
        print(str(out / "train.gjsd"))
        print(str(out / "test.gjsd"))
        return 0
    # convert
    shape = convert_idx(args.idx, args.out_file)
    print(f"{args.out_file} {shape[0]}x{shape[1]}")
    return 0


def _add_spec_flags(sub, *, with_weight=False):
    sub.add_argument("--family", default="gjs", help="divergence family")
    sub.add_argument("--alpha", type=float, default=0.5, help="geometric skew in [0,1]")
    sub.add_argument(
        "--lambda", dest="lambda_skew", type=float, default=0.5,
        help="arithmetic mixture weight in [0,1]",
    )
    sub.add_argument(
        "--conv", choices=["original", "primed"], default=None,
        help="geometric-mean convention",
    )
    sub.add_argument(
        "--dual", action="store_true",
        help="use the dual form (intermediate on the left of each KL)",
    )
    if with_weight:
        sub.add_argument("--weight", type=float, default=1.0, help="loss-level multiplier")
        sub.add_argument("--bandwidth", type=float, default=1.0, help="MMD kernel width")


def _add_train_flags(sub):
    sub.add_argument("--data", default=None, help="dataset directory (default $GJS_DATA_DIR)")
    sub.add_argument("--hidden", default="256,256", help="comma-separated hidden widths")
    sub.add_argument("--latent", type=int, default=10, help="latent dimension")
    sub.add_argument("--decoder", choices=["mse", "bernoulli"], default="mse")
    sub.add_argument("--batch-size", type=int, default=64)
    sub.add_argument("--epochs", type=int, default=20)
    sub.add_argument("--lr", type=float, default=1e-3)
    sub.add_argument(
        "--eval-mode", choices=["mean-latent", "sample-latent"], default="mean-latent"
    )
    sub.add_argument("--evidence-k", type=int, default=128, help="prior draws for log evidence")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gjsd",
        description="Skew-geometric Jensen-Shannon divergence toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    div = subs.add_parser("div", help="closed-form divergence between two Gaussians")
    div.add_argument("left", help="JSON file: {mu, sigma} or {mu, log_var}")
    div.add_argument("right", help="JSON file: second Gaussian")
    _add_spec_flags(div)
    div.add_argument(
        "--oracle", nargs=2, metavar=("N", "SEED"), default=None,
        help="append a Monte Carlo estimate with N samples",
    )
    div.add_argument("--json", default=None, help="also write the result as JSON")
    div.set_defaults(func=cmd_div)

    integ = subs.add_parser("integrand", help="pointwise integrand/mean-density table")
    integ.add_argument("left")
    integ.add_argument("right")
    integ.add_argument(
        "--families", default="gjs", help="comma-separated integrand families"
    )
    _add_spec_flags(integ)
    integ.add_argument("--lo", type=float, default=None, help="grid lower bound")
    integ.add_argument("--hi", type=float, default=None, help="grid upper bound")
    integ.add_argument("--points", type=int, default=2001, help="odd grid size")
    integ.add_argument("--out", required=True, help="output directory")
    integ.set_defaults(func=cmd_integrand)

    fit_p = subs.add_parser("fit", help="fit one Gaussian to mixture samples")
    fit_p.add_argument("mixture", help="MixtureSpec JSON file")
    _add_spec_flags(fit_p)
    fit_p.add_argument("--n-data", type=int, default=512, help="data sample count")
    fit_p.add_argument("--data-seed", type=int, default=0)
    fit_p.add_argument("--lr", type=float, default=0.05)
    fit_p.add_argument("--iters", type=int, default=500)
    fit_p.add_argument("--model-samples", type=int, default=2048)
    fit_p.add_argument("--seed", type=int, default=0, help="model-sample seed")
    fit_p.add_argument("--grid-lo", type=float, default=-8.0)
    fit_p.add_argument("--grid-hi", type=float, default=8.0)
    fit_p.add_argument("--grid-res", type=int, default=200)
    fit_p.add_argument("--out", required=True)
    fit_p.set_defaults(func=cmd_fit)

    tr = subs.add_parser("train", help="train one VAE")
    _add_spec_flags(tr, with_weight=True)
    _add_train_flags(tr)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument(
        "--traversal", action="store_true", help="also dump a latent traversal grid"
    )
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    sw = subs.add_parser("sweep", help="train a matrix of VAEs, emit summary CSV")
    sw.add_argument("--families", default="gjs-dual")
    sw.add_argument("--convs", default="primed")
    sw.add_argument("--alphas", default="0.1,0.3,0.5,0.7,0.9")
    sw.add_argument("--seeds", default="1")
    sw.add_argument("--weight", type=float, default=1.0)
    sw.add_argument("--bandwidth", type=float, default=1.0)
    _add_train_flags(sw)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    ds = subs.add_parser("dataset", help="build or convert datasets")
    ds_subs = ds.add_subparsers(dest="kind", required=True)
    digits = ds_subs.add_parser("digits", help="augmented 8x8 digits, 4096/1024 split")
    digits.add_argument("--out", default=None, help="output directory (default $GJS_DATA_DIR)")
    digits.add_argument("--seed", type=int, default=0)
    digits.add_argument("--n-train", type=int, default=4096)
    digits.add_argument("--n-test", type=int, default=1024)
    digits.set_defaults(func=cmd_dataset)
    ring = ds_subs.add_parser("ring", help="noisy 2-D ring in [0,1]^2")
    ring.add_argument("--out", default=None)
    ring.add_argument("--n", type=int, default=1024)
    ring.add_argument("--seed", type=int, default=0)
    ring.add_argument("--noise", type=float, default=0.05)
    ring.add_argument("--test-fraction", type=float, default=0.125)
    ring.set_defaults(func=cmd_dataset)
    conv = ds_subs.add_parser("convert", help="IDX image file -> container")
    conv.add_argument("idx", help="IDX unsigned-byte image file")
    conv.add_argument("--out-file", required=True, help="container path to write")
    conv.set_defaults(func=cmd_dataset)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
