"""Batch command line interface.

Every command writes its outputs plus a ``manifest.json`` capturing the
resolved parameters, the seed, the wall-clock duration and (when a solver
ran) its convergence summary. All pixel indices in files and reports are
1-based; matrices use the package CSV / ``.hsm`` formats.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import fcls, nfindr
from .core import (
    AbundanceEstimate,
    SpectralScene,
    all_pixels,
    read_matrix,
    restrict_columns,
    write_matrix,
)
from .errors import UnmixError
from .glup import GlupConfig, glup_solve
from .nglup import NglupConfig, nglup_solve
from .selection import deduplicate, detect_endmembers
from .synth import SynthConfig, compute_metrics, synthesize_scene


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _write_csv_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                _fmt(v) if isinstance(v, float) else str(v) for v in row
            ) + "\n")


def _write_manifest(out_dir: Path, command: str, params: dict, seed,
                    duration: float, solver: dict | None) -> None:
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "duration_seconds": duration,
        "solver": solver,
    }
    with open(out_dir / "manifest.json", "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solver_summary(report) -> dict:
    summary = {
        "iterations": report.iterations,
        "converged": report.converged,
        "primal_residual": report.final_primal_residual,
        "dual_residual": report.final_dual_residual,
        "objective": report.objective_value,
    }
    if report.outer_iterations is not None:
        summary["outer_iterations"] = report.outer_iterations
    return summary


def _out_dir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scene(path: str) -> SpectralScene:
    return SpectralScene(read_matrix(path))


def _resolve_candidates(args, scene: SpectralScene):
    """Candidate selection shared by unmix and detect: --all, --omega FILE
    (1-based indices), or --sample K (unmix only). Returns the candidate
    set and, for --sample, the drawn 1-based indices."""
    if getattr(args, "sample", None):
        rng = np.random.default_rng(args.seed)
        drawn = np.sort(rng.choice(scene.pixel_count, size=args.sample,
                                   replace=False))
        return restrict_columns(scene, drawn), drawn + 1
    if args.omega:
        raw = read_matrix(args.omega).ravel()
        return restrict_columns(scene, raw.astype(np.int64) - 1), None
    return all_pixels(scene), None


def cmd_synth(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    config = SynthConfig(
        endmember_count=args.endmembers,
        pixel_count=args.pixels,
        band_count=args.bands,
        snr_db=args.snr,
        seed=args.seed,
        pure_pixel_placement=args.placement,
        target_max_coherence=args.target_max_coherence,
    )
    scene, truth = synthesize_scene(config)
    write_matrix(out / "scene.hsm", scene.data)
    write_matrix(out / "A.hsm", truth.true_abundances)
    write_matrix(out / "R.hsm", truth.endmember_spectra)
    params = {
        "endmembers": args.endmembers,
        "pixels": args.pixels,
        "bands": args.bands,
        "snr_db": args.snr,
        "placement": args.placement,
        "target_max_coherence": args.target_max_coherence,
        "noise_sigma": truth.noise_sigma,
        "pure_pixel_indices": (truth.endmember_pixel_indices + 1).tolist(),
        "outputs": ["scene.hsm", "A.hsm", "R.hsm"],
        "output_dir": str(out),
    }
    _write_manifest(out, "synth", params, args.seed,
                    time.perf_counter() - started, None)
    return 0


def _solve(args, scene, candidates):
    glup_config = GlupConfig(
        mu=args.mu, rho=args.rho,
        eps_primal=args.eps, eps_dual=args.eps,
        max_iterations=args.max_iter,
    )
    if args.algo == "glup":
        return glup_solve(scene, candidates, glup_config)
    warm = GlupConfig(
        mu=args.mu0 if args.mu0 is not None else args.mu,
        rho=args.rho0 if args.rho0 is not None else args.rho,
        eps_primal=args.eps, eps_dual=args.eps,
        max_iterations=args.max_iter,
    )
    config = NglupConfig(
        glup=glup_config, warm_start=warm, j_max=args.jmax,
        eps_outer=args.eps_outer, max_outer_iterations=args.max_outer,
    )
    return nglup_solve(scene, candidates, config)


def cmd_unmix(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    scene = _load_scene(args.scene)
    candidates, sampled = _resolve_candidates(args, scene)
    report = _solve(args, scene, candidates)

    write_matrix(out / "X.hsm", report.abundance.x)
    means = report.abundance.x.mean(axis=1)
    _write_csv_rows(
        out / "row_means.csv",
        ["pixel_index", "row_mean"],
        ((int(candidates.indices[i]) + 1, float(means[i]))
         for i in range(candidates.size)),
    )
    if sampled is not None:
        _write_csv_rows(out / "omega.csv", ["pixel_index"],
                        ((int(v),) for v in sampled))
    params = {
        "algo": args.algo,
        "scene": args.scene,
        "candidates": ("sample" if sampled is not None
                       else "omega" if args.omega else "all"),
        "candidate_count": candidates.size,
        "mu": args.mu,
        "rho": args.rho,
        "eps": args.eps,
        "max_iter": args.max_iter,
        "jmax": args.jmax,
        "mu0": args.mu0,
        "rho0": args.rho0,
        "eps_outer": args.eps_outer,
        "max_outer": args.max_outer,
        "output_dir": str(out),
    }
    _write_manifest(out, "unmix", params, args.seed,
                    time.perf_counter() - started, _solver_summary(report))
    if not report.converged and not args.allow_nonconverged:
        print(
            f"unmix: solver did not converge (primal "
            f"{report.final_primal_residual:.3e}, dual "
            f"{report.final_dual_residual:.3e} after {report.iterations} "
            "iterations)", file=sys.stderr,
        )
        return 1
    return 0


def cmd_detect(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    scene = _load_scene(args.scene)
    candidates, _ = _resolve_candidates(args, scene)
    abundance = AbundanceEstimate.certify(read_matrix(args.abundance))
    detected = detect_endmembers(abundance, candidates, scene, args.threshold)
    kept = deduplicate(detected, args.max_coherence)
    _write_csv_rows(
        out / "endmembers.csv",
        ["pixel_index", "row_score"],
        ((int(kept.pixel_indices[i]) + 1, float(kept.row_scores[i]))
         for i in range(kept.size)),
    )
    if kept.size:
        write_matrix(out / "endmember_spectra.hsm", kept.spectra)
    params = {
        "scene": args.scene,
        "abundance": args.abundance,
        "threshold": args.threshold,
        "max_coherence": args.max_coherence,
        "detected_before_dedup": detected.size,
        "detected": kept.size,
        "output_dir": str(out),
    }
    _write_manifest(out, "detect", params, None,
                    time.perf_counter() - started, None)
    return 0


def cmd_fcls(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    scene = _load_scene(args.scene)
    spectra = read_matrix(args.endmembers)
    result = fcls(scene, spectra)
    write_matrix(out / "A.hsm", result.abundances)
    _write_csv_rows(
        out / "residuals.csv",
        ["pixel_index", "residual"],
        ((j + 1, float(result.per_pixel_residual[j]))
         for j in range(scene.pixel_count)),
    )
    params = {
        "scene": args.scene,
        "endmembers": args.endmembers,
        "endmember_count": spectra.shape[1],
        "output_dir": str(out),
    }
    _write_manifest(out, "fcls", params, None,
                    time.perf_counter() - started, None)
    return 0


def cmd_nfindr(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    scene = _load_scene(args.scene)
    found = nfindr(scene, args.m, args.seed, args.max_sweeps)
    _write_csv_rows(
        out / "endmember_indices.csv",
        ["pixel_index"],
        ((int(v) + 1,) for v in found.pixel_indices),
    )
    write_matrix(out / "endmember_spectra.hsm", found.spectra)
    params = {
        "scene": args.scene,
        "m": args.m,
        "max_sweeps": args.max_sweeps,
        "output_dir": str(out),
    }
    _write_manifest(out, "nfindr", params, args.seed,
                    time.perf_counter() - started, None)
    return 0


def cmd_metrics(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    estimate = read_matrix(args.estimate)
    truth = read_matrix(args.truth)
    metrics = compute_metrics(estimate, truth)
    _write_csv_rows(
        out / "metrics.csv",
        ["metric", "value"],
        [
            ("rmse", metrics.rmse),
            ("rmse_conventional", metrics.rmse_conventional),
            ("max_spectral_angle_rad", metrics.max_spectral_angle_rad),
            ("avg_spectral_angle_rad", metrics.avg_spectral_angle_rad),
        ],
    )
    params = {
        "estimate": args.estimate,
        "truth": args.truth,
        "output_dir": str(out),
    }
    _write_manifest(out, "metrics", params, None,
                    time.perf_counter() - started, None)
    return 0


def _bench_trial(spec: tuple) -> dict:
    """One detection trial: synthesize, solve with all pixels as
    candidates, count rows whose mean clears the threshold."""
    (snr, trial, seed, endmembers, pixels, bands, algo, threshold,
     mu, rho, eps, max_iter, jmax) = spec
    config = SynthConfig(
        endmember_count=endmembers, pixel_count=pixels, band_count=bands,
        snr_db=snr, seed=seed,
    )
    scene, _ = synthesize_scene(config)
    candidates = all_pixels(scene)
    glup_config = GlupConfig(mu=mu, rho=rho, eps_primal=eps, eps_dual=eps,
                             max_iterations=max_iter)
    if algo == "glup":
        report = glup_solve(scene, candidates, glup_config)
    else:
        report = nglup_solve(scene, candidates, NglupConfig(
            glup=glup_config, warm_start=glup_config, j_max=jmax,
        ))
    m_hat = int((report.abundance.x.mean(axis=1) > threshold).sum())
    return {
        "snr_db": snr,
        "trial": trial,
        "seed": seed,
        "m_hat": m_hat,
        "converged": report.converged,
        "iterations": report.iterations,
        "primal_residual": report.final_primal_residual,
        "dual_residual": report.final_dual_residual,
    }


def cmd_bench_detect(args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    snrs = [float(tok) for tok in args.snr.split(",") if tok]
    specs = [
        (snr, trial, args.seed + trial, args.endmembers, args.pixels,
         args.bands, args.algo, args.threshold, args.mu, args.rho,
         args.eps, args.max_iter, args.jmax)
        for snr in snrs
        for trial in range(args.trials)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_trial, specs))
    else:
        results = [_bench_trial(spec) for spec in specs]

    _write_csv_rows(
        out / "trials.csv",
        ["snr_db", "trial", "seed", "m_hat", "converged", "iterations"],
        ((r["snr_db"], r["trial"], r["seed"], r["m_hat"],
          int(r["converged"]), r["iterations"]) for r in results),
    )
    table = []
    for snr in snrs:
        counts: dict[int, int] = {}
        for r in results:
            if r["snr_db"] == snr:
                counts[r["m_hat"]] = counts.get(r["m_hat"], 0) + 1
        for m_hat in sorted(counts):
            table.append((snr, m_hat, counts[m_hat] / args.trials, args.trials))
    _write_csv_rows(out / "bench_detect.csv",
                    ["snr_db", "m_hat", "probability", "trials"], table)

    all_converged = all(r["converged"] for r in results)
    solver = {
        "iterations": int(sum(r["iterations"] for r in results)),
        "converged": all_converged,
        "primal_residual": max(r["primal_residual"] for r in results),
        "dual_residual": max(r["dual_residual"] for r in results),
        "objective": None,
    }
    params = {
        "endmembers": args.endmembers,
        "pixels": args.pixels,
        "bands": args.bands,
        "snr": args.snr,
        "trials": args.trials,
        "algo": args.algo,
        "threshold": args.threshold,
        "mu": args.mu,
        "rho": args.rho,
        "eps": args.eps,
        "max_iter": args.max_iter,
        "jmax": args.jmax,
        "jobs": args.jobs,
        "output_dir": str(out),
    }
    _write_manifest(out, "bench-detect", params, args.seed,
                    time.perf_counter() - started, solver)
    if not all_converged and not args.allow_nonconverged:
        bad = sum(1 for r in results if not r["converged"])
        print(f"bench-detect: {bad} of {len(results)} trials did not converge",
              file=sys.stderr)
        return 1
    return 0


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=float, default=10.0,
                        help="group-lasso regularization weight")
    parser.add_argument("--rho", type=float, default=100.0,
                        help="ADMM penalty parameter")
    parser.add_argument("--eps", type=float, default=1e-5,
                        help="primal and dual residual tolerance")
    parser.add_argument("--max-iter", type=int, default=5000, dest="max_iter",
                        help="ADMM iteration cap")
    parser.add_argument("--jmax", type=int, default=1,
                        help="inner iterations per weight refresh (nglup)")
    parser.add_argument("--mu0", type=float, default=None,
                        help="warm-start mu (nglup; defaults to --mu)")
    parser.add_argument("--rho0", type=float, default=None,
                        help="warm-start rho (nglup; defaults to --rho)")
    parser.add_argument("--eps-outer", type=float, default=1e-4,
                        dest="eps_outer", help="outer-loop X-change tolerance")
    parser.add_argument("--max-outer", type=int, default=200, dest="max_outer",
                        help="outer iteration cap (nglup)")
    parser.add_argument("--allow-nonconverged", action="store_true",
                        help="exit 0 even if the solver did not converge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindunmix",
        description="Blind fully constrained hyperspectral unmixing toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--endmembers", type=int, required=True)
    p.add_argument("--pixels", type=int, required=True)
    p.add_argument("--bands", type=int, default=420)
    p.add_argument("--snr", type=float, default=50.0,
                   help="signal-to-noise ratio in dB ('inf' for noise-free)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--placement", choices=("first", "random"), default="first")
    p.add_argument("--target-max-coherence", type=float, default=0.95,
                   dest="target_max_coherence")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("unmix", help="run the GLUP or NGLUP solver")
    p.add_argument("--algo", choices=("glup", "nglup"), required=True)
    p.add_argument("--scene", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--all", action="store_true",
                       help="use every pixel as a candidate")
    group.add_argument("--omega", help="file of 1-based candidate indices")
    group.add_argument("--sample", type=int,
                       help="draw this many candidates uniformly (seeded)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --sample")
    _add_solver_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("detect", help="threshold row means and prune duplicates")
    p.add_argument("--scene", required=True)
    p.add_argument("--abundance", required=True,
                   help="abundance matrix from unmix (X.hsm)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--all", action="store_true")
    group.add_argument("--omega", help="file of 1-based candidate indices")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--max-coherence", type=float, default=0.95,
                   dest="max_coherence")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fcls", help="abundance maps for known endmembers")
    p.add_argument("--scene", required=True)
    p.add_argument("--endmembers", required=True,
                   help="endmember spectra matrix (bands x M)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fcls)

    p = sub.add_parser("nfindr", help="simplex-volume endmember extraction")
    p.add_argument("--scene", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-sweeps", type=int, default=50, dest="max_sweeps")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_nfindr)

    p = sub.add_parser("metrics", help="error statistics between two matrices")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench-detect",
                       help="seeded detection-probability benchmark")
    p.add_argument("--endmembers", type=int, required=True)
    p.add_argument("--pixels", type=int, required=True)
    p.add_argument("--bands", type=int, default=420)
    p.add_argument("--snr", required=True,
                   help="comma-separated SNR list in dB, e.g. 20,30")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; trial t uses seed + t")
    p.add_argument("--algo", choices=("glup", "nglup"), default="nglup")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel trial workers (results stay seed-ordered)")
    _add_solver_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bench_detect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnmixError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
