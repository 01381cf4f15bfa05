"""Command-line front end. Exit codes: 0 success, 1 validation error, 2 numerical failure."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import pipeline
from .config import RunConfig
from .dataset_io import (read_basis, read_checkpoint, read_dataset, read_mesh, write_basis,
                         write_checkpoint, write_dataset, write_mesh)
from .errors import DenError, NumericalError, ValidationError
from .metrics import write_csv

log = logging.getLogger("den")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, help="sets field, model and training seeds")
    p.add_argument("--threads", type=int, help="cap on BLAS threads")
    p.add_argument("--out-dir", default=None, help="run directory (default: current directory)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="den", description="Deep eigenspace network experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], description=help_)

    add("gen-mesh", "write the configured mesh to mesh.denm")
    p = add("gen-data", "sample fields, solve reference eigenproblems, write dataset.dend")
    p.add_argument("--mesh", help="mesh file (default: build from config)")
    p = add("build-basis", "build the spectral basis from a dataset's training split, write basis.denb")
    p.add_argument("--dataset")
    p.add_argument("--kind", choices=("pod_y", "pod_xy", "laplacian"))
    p = add("train", "train a model; writes checkpoint.denc, checkpoint_best.denc, train_report.csv")
    p.add_argument("--dataset")
    p.add_argument("--basis", help="basis file (default: build from the dataset)")
    p.add_argument("--out-checkpoint", default="checkpoint.denc")
    p = add("eval", "evaluate a checkpoint on a dataset split; per-sample, per-index and Ritz CSVs")
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--split", default="test", choices=("train", "test", "all"))
    p = add("interp-eval", "zero-shot transfer of predicted and true subspaces to another mesh")
    p.add_argument("--checkpoint")
    p.add_argument("--dataset", help="source dataset (test split is used)")
    p.add_argument("--src-mesh", help="source mesh file (default: the dataset mesh)")
    p.add_argument("--dst-mesh", help="destination mesh file (default: square with experiment.dst_subdivisions)")
    p.add_argument("--samples", type=int, help="number of test samples (default: experiment.eval_samples)")
    p = add("verify-theory", "contour design and per-sample assumption report")
    p.add_argument("--dataset")
    p.add_argument("--samples", type=int, help="limit the number of samples")
    p = add("sweep-k", "generate, train and evaluate for each wavenumber in experiment.sweep_k_squared")
    p = add("ablate", "train and evaluate mixing and basis variants")
    p.add_argument("--dataset")
    add("grad-check", "finite-difference check of the full loss on a tiny instance")
    add("params-count", "parameter counts for the configured model and each mixing variant")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(k.strip(), v.strip())
    if args.seed is not None:
        for k in ("field.seed", "model.seed", "train.seed"):
            cfg.set(k, args.seed)
    return cfg


def _path(cfg, arg, key, what):
    p = arg or cfg[key]
    if not p:
        raise ValidationError(f"no {what} given (flag or {key})")
    if not os.path.exists(p):
        raise ValidationError(f"{what} {p!r} does not exist")
    return p


class Run:
    def __init__(self, cfg: RunConfig, out_dir: str):
        self.cfg = cfg
        self.out = out_dir
        os.makedirs(out_dir, exist_ok=True)
        with open(self.file("config.txt"), "w", encoding="utf-8") as fh:
            fh.write("".join(f"{line}\n" for line in cfg.provenance()))

    def file(self, name: str) -> str:
        return os.path.join(self.out, name)

    def csv(self, name: str, rows):
        write_csv(self.file(name), rows, self.cfg.provenance())

    def text(self, name: str, d: dict):
        with open(self.file(name), "w", encoding="utf-8") as fh:
            fh.write("".join(f"{k}={v}\n" for k, v in d.items()))


def cmd_gen_mesh(args, run):
    mesh = pipeline.mesh_from_config(run.cfg)
    write_mesh(run.file("mesh.denm"), mesh)
    print(f"nodes={mesh.num_nodes} triangles={mesh.num_triangles} boundary_nodes={len(mesh.boundary_nodes)}")


def cmd_gen_data(args, run):
    mesh = read_mesh(_path(run.cfg, args.mesh, "paths.mesh", "mesh")) if (args.mesh or run.cfg["paths.mesh"]) else None
    ds = pipeline.dataset_from_config(run.cfg, mesh)
    write_dataset(run.file("dataset.dend"), ds)
    print(f"samples={ds.size} train={ds.train_count} test={ds.size - ds.train_count} failed={len(ds.failed_ids)}")


def cmd_build_basis(args, run):
    ds = read_dataset(_path(run.cfg, args.dataset, "paths.dataset", "dataset"))
    kind = args.kind or run.cfg["model.basis"]
    basis = pipeline.basis_for(kind, ds, run.cfg.get_int("model.K_pod"))
    write_basis(run.file("basis.denb"), basis)
    print(f"kind={kind} K_pod={basis.size}")


def cmd_train(args, run):
    ds = read_dataset(_path(run.cfg, args.dataset, "paths.dataset", "dataset"))
    basis = read_basis(args.basis or run.cfg["paths.basis"]) if (args.basis or run.cfg["paths.basis"]) else None
    mcfg = pipeline.model_config_from(run.cfg)
    tcfg = pipeline.train_config_from(run.cfg)
    model, report = pipeline.train_model(ds, mcfg, tcfg, basis)
    write_checkpoint(run.file(args.out_checkpoint), model, report.final_params)
    write_checkpoint(run.file("checkpoint_best.denc"), model, report.best_params)
    run.csv("train_report.csv", list(report.rows()))
    res = pipeline.full_evaluation(model, ds, "test")
    summary = {"best_epoch": report.best_epoch,
               "final_train_L1": repr(report.train_loss[-1]) if report.train_loss else "nan",
               "best_test_L1": repr(min(report.test_loss)) if report.test_loss else "nan",
               "test_mean_L1": repr(res["subspace"]["mean_L1"]),
               "test_mean_d_pr": repr(res["subspace"]["mean_d_pr"]),
               "test_mean_d_ch": repr(res["subspace"]["mean_d_ch"])}
    run.text("metrics.txt", summary)
    print(f"wall_time_s={report.wall_time:.1f}")
    for k, v in summary.items():
        print(f"{k}={v}")


def cmd_eval(args, run):
    model = read_checkpoint(_path(run.cfg, args.checkpoint, "paths.checkpoint", "checkpoint"))
    ds = read_dataset(_path(run.cfg, args.dataset, "paths.dataset", "dataset"))
    res = pipeline.full_evaluation(model, ds, args.split)
    run.csv("eval_samples.csv", pipeline.subspace_rows(res))
    run.csv("eval_indices.csv", pipeline.index_rows(res))
    run.csv("ritz_values.csv", pipeline.ritz_rows(res))
    sub = res["subspace"]
    summary = {"mean_L1": repr(sub["mean_L1"]), "mean_d_pr": repr(sub["mean_d_pr"]),
               "mean_d_ch": repr(sub["mean_d_ch"]), "max_MAPE": repr(float(np.max(res["eigenvalue"]["MAPE"]))),
               "min_CS": repr(float(np.min(res["eigenfunction"]["CS"].mean(axis=0))))}
    run.text("eval_summary.txt", summary)
    for k, v in summary.items():
        print(f"{k}={v}")


def cmd_interp_eval(args, run):
    from .interp import zero_shot_eval
    from .mesh import generate_unit_square_mesh
    model = read_checkpoint(_path(run.cfg, args.checkpoint, "paths.checkpoint", "checkpoint"))
    ds = read_dataset(_path(run.cfg, args.dataset, "paths.dataset", "dataset"))
    src = read_mesh(args.src_mesh) if args.src_mesh else ds.mesh
    dst = read_mesh(args.dst_mesh) if args.dst_mesh else \
        generate_unit_square_mesh(run.cfg.get_int("experiment.dst_subdivisions"))
    count = args.samples if args.samples is not None else run.cfg.get_int("experiment.eval_samples")
    te = np.arange(ds.train_count, ds.size)[:count]
    truth = (ds.eigvals[te], ds.eigvecs[te]) if src is ds.mesh else None
    K = ds.K
    res = zero_shot_eval(model, src, dst, ds.n[te], ds.k_squared, K, src_truth=truth)
    rows = []
    for k in range(K):
        rows.append({"index": k + 1,
                     "pred_MAE": res["pred"]["MAE"][k], "true_MAE": res["true"]["MAE"][k],
                     "raw_MAE": res["raw"]["MAE"][k],
                     "pred_CS": res["pred"]["CS"][:, k].mean(), "true_CS": res["true"]["CS"][:, k].mean(),
                     "pred_RelL1": res["pred"]["RelL1"][:, k].mean(),
                     "true_RelL1": res["true"]["RelL1"][:, k].mean()})
    run.csv("interp_indices.csv", rows)
    srows = [{"sample_id": int(ds.sample_ids[i]), "pred_d_ch": res["pred"]["d_ch"][j],
              "true_d_ch": res["true"]["d_ch"][j], "pred_d_pr": res["pred"]["d_pr"][j],
              "true_d_pr": res["true"]["d_pr"][j]} for j, i in enumerate(te)]
    run.csv("interp_samples.csv", srows)
    summary = {"src_nodes": src.num_nodes, "dst_nodes": dst.num_nodes,
               "pred_mean_d_ch": repr(float(res["pred"]["d_ch"].mean())),
               "true_mean_d_ch": repr(float(res["true"]["d_ch"].mean())),
               "pred_mean_MAE": repr(float(res["pred"]["MAE"].mean())),
               "raw_mean_MAE": repr(float(res["raw"]["MAE"].mean()))}
    run.text("interp_summary.txt", summary)
    for k, v in summary.items():
        print(f"{k}={v}")


def cmd_verify_theory(args, run):
    from .fem import build_system
    from .reference_solver import full_spectrum_boundary
    from .spectral_analysis import design_contour, riesz_projection, verify_assumptions
    ds = read_dataset(_path(run.cfg, args.dataset, "paths.dataset", "dataset"))
    count = ds.size if args.samples is None else min(args.samples, ds.size)
    mean_sys = build_system(ds.mesh, ds.n.mean(axis=0), ds.k_squared)
    ref = full_spectrum_boundary(mean_sys)
    contour = design_contour(ref, ds.K, run.cfg.get_int("experiment.quadrature_nodes"))
    systems = [ds.system(i) for i in range(count)]
    reports = verify_assumptions(contour, mean_sys, systems, ref)
    rows = []
    for i, (s, r) in enumerate(zip(systems, reports)):
        P = riesz_projection(s, contour)
        rows.append({"sample_id": int(ds.sample_ids[i]), "delta": r.delta, "R_Gamma": r.R_Gamma,
                     "M_norm": r.M_norm, "assumption1": int(r.assumption1_ok), "assumption2": int(r.assumption2_ok),
                     "assumption3": int(r.assumption3_ok), "rank_P": P.numeric_rank,
                     "idempotency": P.idempotency_defect})
    run.csv("verify_theory.csv", rows)
    ok = all(r["assumption1"] and r["assumption2"] and r["assumption3"] and r["rank_P"] == ds.K for r in rows)
    print(f"contour_center={contour.center} contour_radius={contour.radius} all_ok={int(ok)}")


def _train_eval_row(ds, mcfg, tcfg, basis=None):
    model, report = pipeline.train_model(ds, mcfg, tcfg, basis)
    res = pipeline.full_evaluation(model, ds, "test")
    sub = res["subspace"]
    return {"L1": sub["mean_L1"], "d_pr": sub["mean_d_pr"], "d_ch": sub["mean_d_ch"],
            "MAPE_max": float(np.max(res["eigenvalue"]["MAPE"])),
            "CS_min": float(np.min(res["eigenfunction"]["CS"].mean(axis=0)))}


def cmd_sweep_k(args, run):
    ks = run.cfg.get_list("experiment.sweep_k_squared", float)
    kouts = run.cfg.get_list("experiment.sweep_k_out", int)
    if len(ks) != len(kouts):
        raise ValidationError("experiment.sweep_k_squared and experiment.sweep_k_out differ in length")
    mesh = pipeline.mesh_from_config(run.cfg)
    rows = []
    for k2, kout in zip(ks, kouts):
        ds = pipeline.dataset_from_config(run.cfg, mesh, k_squared=k2)
        # widen the latent so the projected k_out columns can be independent
        d = max(run.cfg.get_int("model.channels"), kout - 1)
        row = {"k_squared": k2, "K_out": kout, "channels": d}
        row.update(_train_eval_row(ds, pipeline.model_config_from(run.cfg, k_out=kout, channels=d),
                                   pipeline.train_config_from(run.cfg)))
        rows.append(row)
        print(", ".join(f"{k}={v}" for k, v in row.items()), flush=True)
    run.csv("sweep_k.csv", rows)


def cmd_ablate(args, run):
    ds = read_dataset(args.dataset) if args.dataset else pipeline.dataset_from_config(run.cfg)
    base = pipeline.model_config_from(run.cfg)
    variants = [("mixing", m, replace(base, mixing_kind=m)) for m in run.cfg.get_list("experiment.ablate_mixing")]
    mixings = {v[1] for v in variants}
    # the base basis with the base mixing is already covered by the mixing axis
    variants += [("basis", b, replace(base, basis_kind=b)) for b in run.cfg.get_list("experiment.ablate_basis")
                 if not (b == base.basis_kind and base.mixing_kind in mixings)]
    seeds = run.cfg.get_list("experiment.ablate_seeds", int)
    from .den_model import count_params
    rows = []
    bases = {}
    for axis, name, mcfg in variants:
        if mcfg.basis_kind not in bases:
            bases[mcfg.basis_kind] = pipeline.basis_for(mcfg.basis_kind, ds, mcfg.K_pod)
        acc = []
        for seed in seeds:
            acc.append(_train_eval_row(ds, replace(mcfg, seed=seed),
                                       pipeline.train_config_from(run.cfg, seed=seed), bases[mcfg.basis_kind]))
        row = {"axis": axis, "variant": name, "mixing": mcfg.mixing_kind, "basis": mcfg.basis_kind,
               "params": count_params(mcfg), "seeds": len(seeds)}
        for k in acc[0]:
            row[k] = float(np.mean([a[k] for a in acc]))
        rows.append(row)
        print(", ".join(f"{k}={v}" for k, v in row.items()), flush=True)
    run.csv("ablation.csv", rows)


def cmd_grad_check(args, run):
    from .gradcheck import tiny_instance_check
    err, per_op = tiny_instance_check(seed=run.cfg.get_int("model.seed"))
    rows = [{"target": "den_loss", "max_rel_error": err}] + \
        [{"target": k, "max_rel_error": v} for k, v in per_op.items()]
    run.csv("grad_check.csv", rows)
    for r in rows:
        print(f"{r['target']}={r['max_rel_error']:.3e}")
    if err > 1e-4 or max(per_op.values()) > 1e-6:
        raise NumericalError("gradient check exceeded tolerance")


def cmd_params_count(args, run):
    mcfg = pipeline.model_config_from(run.cfg)
    from .den_model import count_params
    rows = pipeline.params_table(mcfg)
    run.csv("params.csv", rows)
    print(f"configured={count_params(mcfg)}")
    for r in rows:
        print(f"{r['mixing']}={r['params']}")


COMMANDS = {"gen-mesh": cmd_gen_mesh, "gen-data": cmd_gen_data, "build-basis": cmd_build_basis,
            "train": cmd_train, "eval": cmd_eval, "interp-eval": cmd_interp_eval,
            "verify-theory": cmd_verify_theory, "sweep-k": cmd_sweep_k, "ablate": cmd_ablate,
            "grad-check": cmd_grad_check, "params-count": cmd_params_count}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DEN_LOG", "WARNING"), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit 1 via _Parser.error; --help exits 0
        return int(exc.code or 0)
    try:
        cfg = _load_config(args)
        run = Run(cfg, args.out_dir or ".")
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("--threads must be positive")
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                COMMANDS[args.command](args, run)
        else:
            COMMANDS[args.command](args, run)
    except ValidationError as exc:
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except DenError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
