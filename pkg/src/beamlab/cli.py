"""Configuration-driven experiment runner.

Subcommands: eigs, simulate, identity-check, carleman, observability, hum
(each takes a TOML/JSON config) and report (consolidates finished runs).
Every run writes results.csv and summary.json with a provenance block
(config hash, seed, package/numpy versions); outputs carry no timestamps, so
a rerun with the same config and seed is bit-identical.

Exit codes: 0 completed/PASS, 1 invariant or acceptance failure,
2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backward import solve_backward_deterministic
from .basis import SpectralBasis
from .config import ConfigError, ExperimentConfig, parse_config
from .control import DualGramian, gramian_spectrum, hum_solve, verify_target
from .estimates import (backward_carleman_report, boundary_observability,
                        dual_observability, forward_carleman_report,
                        interior_observability)
from .forward import (assemble_generator, energy_report,
                      hidden_regularity_report, solve_forward)
from .identities import (FieldTerm, SemimartingaleField, identity_residual,
                         multiplier_identity_residual)
from .noise import increments_matrix, sample_path
from .weights import (HatWeightSpec, SyntheticWeight, TildeWeightSpec,
                      build_weight, suggest_lambda)


def _write_results(out_dir: Path, header: list[str], rows: list[list]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        if isinstance(v, (np.integer,)):
            return int(v)
        return v

    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_summary(out_dir: Path, cfg: ExperimentConfig, payload: dict) -> None:
    payload = dict(payload)
    payload["provenance"] = {
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "kind": cfg.kind,
        "beamlab_version": __version__,
        "numpy_version": np.__version__,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _unit_mode(n_modes: int, k: int) -> np.ndarray:
    out = np.zeros(n_modes, dtype=complex)
    if k > 0:
        out[k - 1] = 1.0
    return out


def run_eigs(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    basis = SpectralBasis(p["n_modes"])
    rows = [[m.index, m.mu, m.lam, m.sigma] for m in basis.modes]
    _write_results(out_dir, ["k", "mu", "lambda", "sigma"], rows)
    gram_dev = float(np.max(np.abs(basis.gram_matrix() - np.eye(p["n_modes"]))))
    _write_summary(out_dir, cfg, {
        "n_modes": p["n_modes"],
        "mu": [m.mu for m in basis.modes],
        "gram_deviation": gram_dev,
        "passed": gram_dev <= 1e-8,
    })
    return 0 if gram_dev <= 1e-8 else 1


def run_simulate(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    basis = SpectralBasis(p["n_modes"])
    y0 = _unit_mode(p["n_modes"], p["y0_mode"])
    f = _unit_mode(p["n_modes"], p["f_mode"]) if p["f_mode"] else None
    g = _unit_mode(p["n_modes"], p["g_mode"]) if p["g_mode"] else None
    gen = assemble_generator(basis, f=f, g=g, n_steps=p["n_steps"])
    inc = increments_matrix(cfg.seed, p["n_paths"], p["n_steps"], p["T"])
    traj = solve_forward(basis, y0, gen, inc, p["T"], scheme=p["scheme"])
    rep = energy_report(basis, traj, p["report_s"], f=f, g=g)
    traces = hidden_regularity_report(basis, traj, y0, f=f, g=g)
    rows = []
    for n, t in enumerate(traj.times):
        for k in range(p["n_modes"]):
            c = traj.states[0, n, k]
            rows.append([t, k + 1, c.real, c.imag])
    _write_results(out_dir, ["t", "k", "re_c", "im_c"], rows)
    _write_summary(out_dir, cfg, {
        "energy_C_empirical": rep["C_empirical"],
        "energy_final": float(rep["energy"][-1]),
        "trace_C_empirical": traces["C_empirical"],
        "trace_norm_sum": traces["trace_norm_sum"],
        "n_paths": p["n_paths"],
        "scheme": p["scheme"],
        "passed": True,
    })
    return 0


def _identity_cases(stochastic: bool):
    det1 = SemimartingaleField([
        FieldTerm(px=(0.0, 0.0, 1.0, -2.0, 1.0), qt=lambda t: np.exp(1j * t)),
        FieldTerm(px=(0.0, 0.3j, -0.3j), qt=lambda t: np.cos(1.3 * t) + 0.5j * t * t),
    ])
    det2 = SemimartingaleField([
        FieldTerm(px=(0.1, 0.0, 0.5, -0.6), qt=lambda t: np.exp(2j * t) * (1 + 0.5 * t)),
        FieldTerm(px=(0.0, 0.2j, 0.0, -0.2j), qt=lambda t: np.sin(t) + 1j * t),
    ])
    mix = SemimartingaleField([
        FieldTerm(px=(0.0, 1.0, 0.5j, -1.0 - 0.5j), qt=None),
        FieldTerm(px=(0.2, 0.0, -0.4j, 0.2j), qt=lambda t: np.cos(1.7 * t) + 0.3j * np.sin(t)),
    ])
    cases = [("deterministic-1", det1, False), ("deterministic-2", det2, False)]
    if stochastic:
        cases.append(("stochastic", mix, True))
    return cases


def run_identity_check(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    x = np.linspace(0.05, 0.95, p["n_x"])
    weight = SyntheticWeight([([1.0, 1.0, 0.0, -0.5], [0.7, 0.4, 0.3]),
                              ([0.0, 0.0, 1.0], [0.2, 0.0, 0.0, -0.5])])
    steps = [int(m) for m in p["steps"]]
    if any(max(steps) % m != 0 for m in steps):
        raise ConfigError("identity-check.steps must all divide the largest "
                          "entry (shared-path refinement)")
    base = sample_path(cfg.seed, 0, max(steps), 1.0)
    rows = []
    summary_cases = {}
    ok = True
    for name, fld, stochastic in _identity_cases(p["stochastic"]):
        maxima = []
        for m in steps:
            inc = base.increments.reshape(m, -1).sum(axis=1) if stochastic else None
            r5 = identity_residual(fld, weight, x, 0.0, 1.0, m, inc)
            rl = multiplier_identity_residual(fld, (-1.0, 0.0, 6.0, -4.0), x,
                                              0.0, 1.0, m, inc,
                                              A_time=[1.0, 0.5, 0.7])
            worst = max(r5["max_residual"], rl["max_first"], rl["max_third"])
            maxima.append(worst)
            rows.append([name, m, r5["max_residual"], rl["max_first"],
                         rl["max_third"]])
        slopes = [float(np.log2(maxima[i] / maxima[i + 1]))
                  for i in range(len(maxima) - 1)]
        converged = all(s >= 0.9 for s in slopes)
        ok = ok and converged
        summary_cases[name] = {"max_residuals": maxima, "slopes": slopes,
                               "converged": converged}
    _write_results(out_dir, ["case", "n_steps", "identity_residual",
                             "multiplier_first", "multiplier_third"], rows)
    _write_summary(out_dir, cfg, {"cases": summary_cases, "passed": ok})
    return 0 if ok else 1


def _random_x3_coeffs(rng, basis, scale=1.0):
    w = (1.0 + basis.lam) ** -0.75
    return scale * w * (rng.standard_normal(basis.n_modes)
                        + 1j * rng.standard_normal(basis.n_modes))


def run_carleman(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    basis = SpectralBasis(p["n_modes"])
    T = p["T"]
    rng = np.random.default_rng(cfg.seed)
    y0 = _random_x3_coeffs(rng, basis)
    f = _random_x3_coeffs(rng, basis)
    g = _random_x3_coeffs(rng, basis)
    kind = p["observation"]
    wkind = "hat" if kind == "interior" else "tilde"
    lambdas = [float(v) for v in p["lambdas"]]
    if not lambdas:
        lam0 = suggest_lambda(wkind, {"mu": p["mu"], "T": T},
                              target_exponent=p["target_exponent"])
        lambdas = [lam0, 2.0 * lam0, 4.0 * lam0]

    if kind in ("interior", "boundary"):
        gen = assemble_generator(basis, f=f, g=g, n_steps=p["n_steps"])
        inc = increments_matrix(cfg.seed, p["n_paths"], p["n_steps"], T)
        traj = solve_forward(basis, y0, gen, inc, T)
    elif kind == "backward":
        bwd = solve_backward_deterministic(basis, y0, p["n_steps"], T, h=f)
    else:
        raise ConfigError("carleman.observation must be interior|boundary|backward")

    rows = []
    ratios = []
    for lam in lambdas:
        if kind == "interior":
            w = build_weight(HatWeightSpec(lam=lam, mu=p["mu"], T=T,
                                           window=tuple(p["window"])))
            rep = forward_carleman_report(basis, traj, w, "interior",
                                          f_coeffs=f, g_coeffs=g, threads=threads)
        elif kind == "boundary":
            w = build_weight(TildeWeightSpec(lam=lam, mu=p["mu"], T=T))
            rep = forward_carleman_report(basis, traj, w, "boundary",
                                          f_coeffs=f, g_coeffs=g, threads=threads)
        else:
            w = build_weight(TildeWeightSpec(lam=lam, mu=p["mu"], T=T))
            rep = backward_carleman_report(basis, bwd, w, h_coeffs=f,
                                           threads=threads)
        ratios.append(rep["ratio"])
        rows.append([kind, lam, p["mu"], rep["lhs"], rep["rhs"], rep["ratio"],
                     rep.get("lhs_stderr", 0.0), rep.get("obs_stderr", 0.0)])
    finite = all(np.isfinite(r) for r in ratios)
    stable = all(ratios[i + 1] <= 1.10 * ratios[i] for i in range(len(ratios) - 1))
    _write_results(out_dir, ["observation", "lambda", "mu", "lhs", "rhs",
                             "ratio", "lhs_stderr", "obs_stderr"], rows)
    _write_summary(out_dir, cfg, {
        "lambdas": lambdas, "mu": p["mu"], "ratios": ratios,
        "ratio_finite": finite, "ratio_stable_under_doubling": stable,
        "passed": finite and stable,
    })
    return 0 if finite and stable else 1


def run_observability(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    basis = SpectralBasis(p["n_modes"])
    T = p["T"]
    rng = np.random.default_rng(cfg.seed)
    a_field = 0.4 * np.cos(np.pi * basis.quad.nodes) + 0.1
    b_field = 0.25 * np.sin(2.0 * np.pi * basis.quad.nodes)
    rows = []
    ratios = []
    violations = 0
    for e in range(p["n_experiments"]):
        if p["mode"] in ("interior", "boundary"):
            y0 = _random_x3_coeffs(rng, basis)
            y0 = y0 / basis.xs_norm(y0, 3.0)
            gen = assemble_generator(basis, a=a_field, b=b_field,
                                     n_steps=p["n_steps"])
            inc = increments_matrix(cfg.seed + 1000 * (e + 1), p["n_paths"],
                                    p["n_steps"], T)
            traj = solve_forward(basis, y0, gen, inc, T)
            rep = (interior_observability(basis, traj, y0)
                   if p["mode"] == "interior"
                   else boundary_observability(basis, traj, y0))
        elif p["mode"] == "dual":
            zT = _random_x3_coeffs(rng, basis)
            zT = zT / basis.xs_norm(zT, 3.0)
            bwd = solve_backward_deterministic(basis, zT, p["n_steps"], T,
                                               a=a_field)
            rep = dual_observability(basis, bwd)
        else:
            raise ConfigError("observability.mode must be interior|boundary|dual")
        ratios.append(rep["ratio"])
        violations += int(rep["violation"])
        rows.append([p["mode"], e, rep["lhs"], rep["rhs"],
                     rep["observation_term"], rep["ratio"]])
    c_emp = max(ratios)
    ok = violations == 0 and np.isfinite(c_emp)
    _write_results(out_dir, ["mode", "experiment", "lhs", "rhs",
                             "observation", "ratio"], rows)
    _write_summary(out_dir, cfg, {
        "mode": p["mode"], "C_empirical": c_emp,
        "violations": violations, "passed": ok,
    })
    return 0 if ok else 1


def run_hum(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    p = cfg.params
    basis = SpectralBasis(p["n_modes"])
    gram = DualGramian(basis, p["n_steps"], p["T"])
    spec = gramian_spectrum(gram)
    rng = np.random.default_rng(cfg.seed)
    y1 = np.zeros(p["n_modes"], dtype=complex)
    y1[:p["y1_modes"]] = (rng.standard_normal(p["y1_modes"])
                          + 1j * rng.standard_normal(p["y1_modes"]))
    sol = hum_solve(gram, y1, tol=p["tol"])
    rep = verify_target(gram, sol["zT_minimizer"], y1, tol=p["verify_tol"])
    ok = bool(sol["converged"] and rep["passed"]
              and spec["min_eigenvalue"] > 0.0)
    controls = sol["controls"]
    rows = []
    times = np.linspace(0.0, p["T"], p["n_steps"] + 1)
    for n, t in enumerate(times):
        rows.append([t, controls.u1[n].real, controls.u1[n].imag,
                     controls.u2[n].real, controls.u2[n].imag])
    _write_results(out_dir, ["t", "re_u1", "im_u1", "re_u2", "im_u2"], rows)
    _write_summary(out_dir, cfg, {
        "iterations": sol["iterations"],
        "cg_residual": sol["cg_residual"],
        "verify_max_residual": rep["max_residual"],
        "gramian_min_eigenvalue": spec["min_eigenvalue"],
        "gramian_eigenvalues": spec["eigenvalues"],
        "passed": ok,
    })
    return 0 if ok else 1


def _summary_metric(data: dict) -> str:
    for key in ("C_empirical", "verify_max_residual", "energy_C_empirical",
                "gram_deviation"):
        if key in data:
            return repr(float(data[key]))
    return ""


def run_report(results_dir: str, out_path: str | None) -> int:
    """Consolidate summary.json files into one table; no recomputation."""
    root = Path(results_dir)
    rows = []
    missing = []
    for summ in sorted(root.glob("**/summary.json")):
        try:
            data = json.loads(summ.read_text())
        except json.JSONDecodeError:
            missing.append(str(summ))
            continue
        kind = data.get("provenance", {}).get("kind", "?")
        if kind == "carleman":
            # sweep rows are copied verbatim from the run's own results.csv
            results = summ.parent / "results.csv"
            if not results.exists():
                missing.append(str(summ))
                continue
            with open(results) as fh:
                for rec in csv.DictReader(fh):
                    rows.append([str(summ.parent), rec["observation"],
                                 rec["lambda"], rec["mu"], rec["lhs"],
                                 rec["rhs"], rec["ratio"], rec["lhs_stderr"]])
        else:
            rows.append([str(summ.parent), kind, "", "", "", "",
                         _summary_metric(data), ""])
    header = ["run", "experiment", "lambda", "mu", "lhs", "rhs", "ratio",
              "stderr"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if missing:
        text += "# incomplete runs: " + "; ".join(missing) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


_RUNNERS = {
    "eigs": run_eigs,
    "simulate": run_simulate,
    "identity-check": run_identity_check,
    "carleman": run_carleman,
    "observability": run_observability,
    "hum": run_hum,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="beamlab",
        description="Spectral lab for the stochastic fourth-order Schrodinger "
                    "equation: simulation, weighted-estimate harnesses and "
                    "HUM controllability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in _RUNNERS:
        sp = sub.add_parser(kind, help=f"run a '{kind}' experiment from a config")
        sp.add_argument("config", help="TOML or JSON experiment descriptor")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker cap for path batches (1 = serial)")
    rp = sub.add_parser("report", help="consolidate finished runs into one table")
    rp.add_argument("results_dir")
    rp.add_argument("--out", help="write the table here instead of stdout")

    args = parser.parse_args(argv)
    if args.command == "report":
        return run_report(args.results_dir, args.out)

    try:
        cfg = parse_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        print(f"config error: config kind '{cfg.kind}' does not match "
              f"subcommand '{args.command}'", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    try:
        return _RUNNERS[cfg.kind](cfg, out_dir, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
