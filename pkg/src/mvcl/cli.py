"""Command-line surface: synth | train | eval | gradcheck | benchmark.

Exit codes: 0 success, 2 bad usage or input, 3 io failure, 4 numeric
divergence during training, 5 gradient check exceeded its bound. Every
command is deterministic given its flags; seeds are always explicit flags
or config entries.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    MultiViewDataset,
    SplitPlan,
    SynthSpec,
    default_synth_spec,
    load_views,
    preprocess,
    save_views,
    synth_generate,
)
from .errors import DimError, MvclError, NumericDivergence
from .evaluate import (
    benchmark,
    default_d_sweep,
    fuse,
    knn_classify,
    accuracy_pct,
    report_to_csv,
    report_to_dict,
)
from .grad import finite_diff_check, grad_wrt_F, grad_wrt_P, random_instance
from .loss import HyperParams, ProjectionSet, RecoverySet, total_loss
from .optim import (
    AdamParams,
    TrainConfig,
    config_to_dict,
    load_model,
    save_model,
    train,
)

GRADCHECK_BOUND = 1e-5
CONFIG_SCHEMA_VERSION = 1


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """JSON-backed run settings; unknown keys are rejected on load."""

    train: TrainConfig
    split: SplitPlan | None = None
    center: bool = True
    unit_variance: bool = False
    d_sweep: tuple[int, ...] | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        allowed = {"schema_version", "hyper", "adam", "train", "split", "preprocess", "d_sweep"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if obj.get("schema_version") != CONFIG_SCHEMA_VERSION:
            raise ValueError("config must declare schema_version = 1")

        def section(name, allowed_keys):
            sec = obj.get(name, {})
            extra = set(sec) - set(allowed_keys)
            if extra:
                raise ValueError(f"unknown keys in '{name}': {sorted(extra)}")
            return sec

        hyper = section(
            "hyper",
            {"d", "alpha", "beta", "sigma1", "sigma2", "sigma3", "fea_include_self_view"},
        )
        if "d" not in hyper:
            raise ValueError("config 'hyper' section must set d")
        adam = section("adam", {"gamma", "beta1", "beta2", "epsilon"})
        tr = section("train", {"max_iters", "tol", "seed"})
        pre = section("preprocess", {"center", "unit_variance"})
        cfg = TrainConfig(hp=HyperParams(**hyper), adam=AdamParams(**adam), **tr)
        plan = None
        if "split" in obj:
            sp = section("split", {"M", "repeats", "seed"})
            plan = SplitPlan(**sp)
        sweep = obj.get("d_sweep")
        return cls(
            train=cfg,
            split=plan,
            center=bool(pre.get("center", True)),
            unit_variance=bool(pre.get("unit_variance", False)),
            d_sweep=None if sweep is None else tuple(int(x) for x in sweep),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "hyper": dataclasses.asdict(self.train.hp),
            "adam": dataclasses.asdict(self.train.adam),
            "train": {
                "max_iters": self.train.max_iters,
                "tol": self.train.tol,
                "seed": self.train.seed,
            },
            "preprocess": {"center": self.center, "unit_variance": self.unit_variance},
        }
        if self.split is not None:
            out["split"] = dataclasses.asdict(self.split)
        if self.d_sweep is not None:
            out["d_sweep"] = list(self.d_sweep)
        return out


def _variant_label(hp: HyperParams) -> str:
    return "CMC-ablation" if hp.alpha == 0.0 and hp.beta == 0.0 else "triple-head"


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    base = default_synth_spec(seed=args.seed)
    spec = SynthSpec(
        classes=args.classes,
        per_class=args.per_class,
        dims=_parse_int_list(args.dims) if args.dims else base.dims,
        shared_dims=args.shared if args.shared is not None else base.shared_dims,
        specific_dims=args.specific if args.specific is not None else base.specific_dims,
        redundant_copies=args.redundant if args.redundant is not None else base.redundant_copies,
        noise_std=args.noise,
        seed=args.seed,
    )
    ds = synth_generate(spec)
    outdir = Path(args.out)
    written = save_views(ds, outdir)
    _write_json(outdir / "spec.json", dataclasses.asdict(spec) | {"schema_version": 1})
    print(f"wrote {len(written) + 1} files to {outdir} (n={ds.n}, dims={list(ds.dims)})")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _merged_train_config(args) -> tuple[TrainConfig, bool, bool]:
    """Defaults < config file < explicit flags; returns (cfg, center, unit_variance)."""
    if args.config:
        rc = RunConfig.from_file(args.config)
        hp, adam = rc.train.hp, rc.train.adam
        max_iters, tol, seed = rc.train.max_iters, rc.train.tol, rc.train.seed
        center, unit_variance = rc.center, rc.unit_variance
    else:
        if args.d is None:
            raise ValueError("subspace dimension required: pass --d or a config file")
        hp = HyperParams(d=args.d)
        adam = AdamParams()
        max_iters, tol, seed = 1000, 1e-3, 0
        center, unit_variance = True, False

    updates = {}
    if args.d is not None:
        updates["d"] = args.d
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.beta is not None:
        updates["beta"] = args.beta
    if args.sigma is not None:
        updates.update(sigma1=args.sigma, sigma2=args.sigma, sigma3=args.sigma)
    if updates:
        hp = dataclasses.replace(hp, **updates)
    if args.max_iters is not None:
        max_iters = args.max_iters
    if args.tol is not None:
        tol = args.tol
    if args.seed is not None:
        seed = args.seed
    if args.center is not None:
        center = args.center
    if args.unit_variance is not None:
        unit_variance = args.unit_variance
    cfg = TrainConfig(hp=hp, adam=adam, max_iters=max_iters, tol=tol, seed=seed)
    return cfg, center, unit_variance


def _cmd_train(args) -> int:
    paths = [p for p in args.views.split(",") if p]
    ds = load_views(paths, header=args.header)
    cfg, center, unit_variance = _merged_train_config(args)
    pre_record = {"center": center, "unit_variance": unit_variance}
    ds_p, stats = preprocess(ds, center, unit_variance)
    P, F, report = train(ds_p, cfg, preprocessing=pre_record)

    out = Path(args.out)
    save_model(out, P, F, stats, cfg)
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    _write_json(
        report_path,
        {
            "schema_version": 1,
            "variant": _variant_label(cfg.hp),
            "final_loss": report.losses[-1],
            "initial_loss": report.losses[0],
            "iterations": report.iterations,
            "converged": report.converged,
            "losses": list(report.losses),
            "preprocessing": report.preprocessing,
            "config": config_to_dict(cfg),
            "wall_ms": report.wall_ms,
        },
    )
    print(
        f"final_loss={report.losses[-1]:.6f} converged={report.converged} "
        f"iterations={report.iterations} model={out}"
    )
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _cmd_eval(args) -> int:
    P, _, stats, _ = load_model(args.model)
    gallery = load_views(args.train_views.split(","), args.train_labels, header=args.header)
    query = load_views(args.views.split(","), args.labels, header=args.header)
    if gallery.dims != tuple(a.shape[0] for a in P.mats):
        raise DimError(f"model dims {[a.shape[0] for a in P.mats]} do not match data dims {list(gallery.dims)}")
    if stats is not None:
        gallery, _ = preprocess(gallery, stats=stats)
        query, _ = preprocess(query, stats=stats)

    if args.strategy == "per-view":
        accs = []
        for m in range(gallery.V):
            pred = knn_classify(
                P.mats[m].T @ gallery.views[m], gallery.labels, P.mats[m].T @ query.views[m]
            )
            acc = accuracy_pct(pred, query.labels)
            accs.append(acc)
            print(f"view{m + 1} accuracy={acc:.2f}%")
        print(f"Mean accuracy={float(np.mean(accs)):.2f}%")
    else:
        pred = knn_classify(fuse(P, gallery), gallery.labels, fuse(P, query))
        print(f"II accuracy={accuracy_pct(pred, query.labels):.2f}%")
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def _cmd_gradcheck(args) -> int:
    dims = _parse_int_list(args.dims)
    if len(dims) != args.views:
        raise ValueError(f"--dims names {len(dims)} views but --views is {args.views}")
    ds, P, F = random_instance(args.seed, V=args.views, n=args.n, dims=dims, d=args.d)
    hp = HyperParams(
        d=args.d, alpha=args.alpha, beta=args.beta,
        sigma1=args.sigma, sigma2=args.sigma, sigma3=args.sigma,
    )
    dP = grad_wrt_P(P, F, ds, hp)
    dF = grad_wrt_F(P, F, ds, hp)

    failures = []
    for m in range(ds.V):
        def obj_p(mat, m=m):
            mats = list(P.mats)
            mats[m] = mat
            return total_loss(ProjectionSet(tuple(mats)), F, ds, hp)

        err = finite_diff_check(obj_p, P.mats[m], dP[m], h=args.h)
        print(f"P[{m}] max_rel_err={err:.3e}")
        if err > GRADCHECK_BOUND:
            failures.append(f"P[{m}]")

    for m in range(ds.V):
        def obj_f(mat, m=m):
            mats = list(F.mats)
            mats[m] = mat
            return total_loss(P, RecoverySet(tuple(mats)), ds, hp)

        err = finite_diff_check(obj_f, F.mats[m], dF[m], h=args.h)
        print(f"F[{m}] max_rel_err={err:.3e}")
        if err > GRADCHECK_BOUND:
            failures.append(f"F[{m}]")

    if failures:
        print(f"FAIL: blocks over {GRADCHECK_BOUND:g}: {', '.join(failures)}", file=sys.stderr)
        return 5
    print(f"OK: all blocks within {GRADCHECK_BOUND:g}")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def _load_data_dir(dirpath: str | Path, header: bool) -> MultiViewDataset:
    d = Path(dirpath)
    views = sorted(p for p in d.glob("view*.csv"))
    labels = d / "labels.csv"
    if not views or not labels.exists():
        raise ValueError(f"{d}: expected view*.csv files and labels.csv")
    return load_views(views, labels, header=header)


def _cmd_benchmark(args) -> int:
    ds = _load_data_dir(args.data, args.header)
    plan = SplitPlan(M=args.M, repeats=args.repeats, seed=args.seed)
    sweep = list(_parse_int_list(args.d_sweep)) if args.d_sweep else default_d_sweep(ds.dims)
    if not sweep:
        raise ValueError("empty d sweep; pass --d-sweep")
    hp = HyperParams(
        d=sweep[0], alpha=args.alpha, beta=args.beta,
        sigma1=args.sigma, sigma2=args.sigma, sigma3=args.sigma,
    )
    cfg = TrainConfig(hp=hp, max_iters=args.max_iters, tol=args.tol, seed=args.train_seed)

    report = benchmark(ds, cfg, plan, d_sweep=sweep)
    ablation = None
    if args.ablate == "cmc":
        cfg0 = dataclasses.replace(cfg, hp=dataclasses.replace(hp, alpha=0.0, beta=0.0))
        ablation = benchmark(ds, cfg0, plan, d_sweep=sweep)

    csv_text = report_to_csv(report, ablation)
    payload = {"report": report_to_dict(report)}
    if ablation is not None:
        payload["ablation"] = report_to_dict(ablation)

    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        fh.write(csv_text)
    _write_json(out.with_suffix(".json"), payload)

    for row in report.rows:
        line = f"{row.label:>6}  {row.mean_acc:6.2f} +- {row.std_acc:5.2f}  (d={row.d})"
        if ablation is not None:
            ab = {r.label: r for r in ablation.rows}[row.label]
            line += f"   vs ablation {ab.mean_acc:6.2f} +- {ab.std_acc:5.2f}  diff={row.mean_acc - ab.mean_acc:+.2f}"
        print(line)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvcl",
        description="Multi-view linear feature extraction with triple contrastive heads.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-view dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--dims", type=str, default=None, help="comma list of per-view dims")
    p.add_argument("--shared", type=int, default=None, help="dims shared across views")
    p.add_argument("--specific", type=int, default=None, help="view-specific signal dims")
    p.add_argument("--redundant", type=int, default=None, help="duplicated shared dims")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit projections on view CSVs")
    p.add_argument("--views", type=str, required=True, help="comma list of view CSVs")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, required=True, help="model JSON path")
    p.add_argument("--report", type=str, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None, help="sets all three temperatures")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--unit-variance", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--header", action="store_true", help="view CSVs carry a header row")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="1-NN accuracy of a trained model")
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--views", type=str, required=True, help="query view CSVs")
    p.add_argument("--labels", type=str, required=True)
    p.add_argument("--train-views", type=str, required=True, help="gallery view CSVs")
    p.add_argument("--train-labels", type=str, required=True)
    p.add_argument("--strategy", choices=["per-view", "fused"], default="per-view")
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="certify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--dims", type=str, default="6,5")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("benchmark", help="repeated-split 1-NN benchmark")
    p.add_argument("--data", type=str, required=True, help="directory with view*.csv and labels.csv")
    p.add_argument("--M", type=int, required=True, help="training samples per class")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--d-sweep", type=str, default=None, help="comma list of subspace dims")
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--ablate", choices=["cmc"], default=None)
    p.add_argument("--out", type=str, required=True, help="report CSV path")
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericDivergence as e:
        print(f"error: {e} (iteration {e.iteration})", file=sys.stderr)
        return 4
    except (MvclError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
