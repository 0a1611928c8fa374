"""Command-line front end.

    qtorus run CONFIG [--out DIR] [overrides]
    qtorus preset NAME --out DIR [overrides]
    qtorus list

Exit status: 0 on a completed run, 1 on configuration errors, 2 when the
tangent operator hits a near resonance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import PhaseState, phase_drift, reference_integrate
from .config import ConfigError, ExperimentConfig, config_from_dict, list_presets, load_config, preset
from .diagnostics import FrequencyDomain, resonant_measure_mc
from .lattice import CapacityError
from .operator import NearResonance
from .solver import SolverState, evaluate_solution, run

log = logging.getLogger("qtorus")

EXIT_OK, EXIT_CONFIG, EXIT_RESONANCE = 0, 1, 2


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return format(x + 0.0 if x == 0 else x, ".17g")  # no "-0"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    write_atomic(path, buf.getvalue())


@dataclass
class RunSummary:
    config: dict
    termination: str
    final_omega: list = field(default_factory=list)
    final_residual: float = math.nan
    iterations: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=True) + "\n"


def history_rows(state: SolverState, n: int):
    header = ["r", "N_r", *[f"omega_{j + 1}" for j in range(n)], "residual_l2", "step_l2",
              "support_size", "log_inverse_norm", "gevrey_sup"]
    rows = [[h.r, h.N, *h.omega, h.residual_l2, h.step_l2, h.support_size,
             h.log_inverse_norm, h.gevrey_sup] for h in state.history]
    return header, rows


def _write_torus_outputs(cfg: ExperimentConfig, state: SolverState, out: Path, H) -> dict:
    n = H.n
    header, rows = history_rows(state, n)
    write_csv(out / "history.csv", header, rows)
    for r, (_, zhat) in enumerate(state.iterates):
        write_csv(out / f"spectrum_r{r}.csv", ["j", *[f"k_{i + 1}" for i in range(n)], "value"],
                  ([j + 1, *k, v] for (j, k), v in zhat.items()))
    extra = {}
    outputs = cfg.outputs
    if outputs.get("emit_trajectories"):
        times = np.asarray(outputs.get("trajectory_times") or [0.0, 10.0], dtype=float)
        zhat, omega = state.zhat_r, state.omega_final
        _, (x, y) = evaluate_solution(zhat, omega, times)
        _, (x0, y0) = evaluate_solution(zhat, omega, 0.0)
        ref = reference_integrate(H, PhaseState(x0, y0), float(times.max()),
                                  outputs.get("reference_dt", 0.01), times)
        rx = np.array([np.interp(times, ref.t, ref.x[j]) for j in range(n)])
        ry = np.array([np.interp(times, ref.t, ref.y[j]) for j in range(n)])
        err = np.sqrt(((x - rx) ** 2 + (y - ry) ** 2).sum(axis=0))
        header = ["t", *[f"x_{j + 1}" for j in range(n)], *[f"y_{j + 1}" for j in range(n)],
                  *[f"ref_x_{j + 1}" for j in range(n)], *[f"ref_y_{j + 1}" for j in range(n)],
                  "pointwise_error"]
        write_csv(out / "trajectory.csv", header,
                  ([t, *x[:, i], *y[:, i], *rx[:, i], *ry[:, i], err[i]] for i, t in enumerate(times)))
        extra["max_pointwise_error"] = float(err.max())
        extra["reference_dt"] = ref.dt
    return extra


def run_experiment(cfg: ExperimentConfig, out: Path) -> tuple[int, RunSummary]:
    start = time.perf_counter()
    summary = RunSummary(cfg.to_dict(), "running")
    code = EXIT_OK
    try:
        if cfg.kind == "drift":
            _run_drift(cfg, out, summary)
        elif cfg.kind == "resonance-scan":
            _run_scan(cfg, out, summary)
        else:
            code = _run_torus(cfg, out, summary)
    finally:
        summary.wall_clock_s = time.perf_counter() - start
        write_atomic(out / "summary.json", summary.to_json())
    return code, summary


def _run_torus(cfg: ExperimentConfig, out: Path, summary: RunSummary) -> int:
    H = cfg.hamiltonian()
    try:
        state = run(H, cfg.solver_config())
    except NearResonance as err:
        state = getattr(err, "state", None)
        summary.termination = "near_resonance"
        summary.extra["error"] = str(err)
        if err.mode is not None:
            summary.extra["resonant_mode"] = {"j": err.mode[0] + 1, "k": list(err.mode[1])}
        if state is not None:
            _fill_summary(summary, state, H.n)
            write_csv(out / "history.csv", *history_rows(state, H.n))
        log.error("near resonance: %s", err)
        return EXIT_RESONANCE
    _fill_summary(summary, state, H.n)
    summary.termination = state.termination
    summary.extra.update(_write_torus_outputs(cfg, state, out, H))
    return EXIT_OK


def _fill_summary(summary: RunSummary, state: SolverState, n: int) -> None:
    header, rows = history_rows(state, n)
    summary.iterations = [dict(zip(header, (float(v) if not isinstance(v, int) else v for v in row)))
                          for row in rows]
    if state.omega_final is not None:
        summary.final_omega = [float(w) for w in state.omega_final]
    summary.final_residual = state.residual


def _run_drift(cfg: ExperimentConfig, out: Path, summary: RunSummary) -> None:
    n_steps = cfg.drift.get("n_steps", 101)
    rows = []
    for h in cfg.drift["h_grid"]:
        rec = phase_drift(float(h), n_steps)
        rows.append([rec.h, rec.theta_h, rec.delta_theta, rec.n_steps, rec.accumulated])
    write_csv(out / "drift.csv", ["h", "theta_h", "delta_theta", "n", "accumulated"], rows)
    summary.termination = "completed"


def _run_scan(cfg: ExperimentConfig, out: Path, summary: RunSummary) -> None:
    sc = cfg.scan
    domain = FrequencyDomain(tuple(sc["lower"]), tuple(sc["upper"]))
    samples, seed = sc.get("samples", 10000), sc.get("seed", 0)
    rows = []
    for M_box in sc["M_boxes"]:
        for tau in sc["taus"]:
            frac = resonant_measure_mc(domain, int(M_box), float(tau), samples, seed)
            rows.append([float(tau), int(M_box), samples, frac, seed])
    write_csv(out / "resonance.csv", ["tau", "M_box", "samples", "fraction", "seed"], rows)
    summary.termination = "completed"


def _apply_overrides(cfg: ExperimentConfig, args) -> None:
    if args.max_iter is not None:
        cfg.solver["max_iter"] = args.max_iter
    if args.epsilon is not None:
        cfg.perturbation["epsilon"] = args.epsilon
    if args.seed is not None:
        cfg.solver["seed"] = args.seed
        if cfg.scan:
            cfg.scan["seed"] = args.seed
    if args.strict_conditions:
        cfg.solver["strict_conditions"] = True


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qtorus", description="Quasi-periodic solutions by alternating "
                "frequency updates and dimension-enlarged Newton steps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(sp):
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--strict-conditions", action="store_true")

    r = sub.add_parser("run", help="run an experiment config (TOML or summary.json)")
    r.add_argument("config")
    overrides(r)
    pr = sub.add_parser("preset", help="run a built-in preset")
    pr.add_argument("name")
    overrides(pr)
    sub.add_parser("list", help="list built-in presets")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        print(list_presets())
        return EXIT_OK
    try:
        cfg = load_config(args.config) if args.command == "run" else preset(args.name)
        _apply_overrides(cfg, args)
        # re-validate after overrides
        cfg = config_from_dict(cfg.to_dict())
        out = Path(args.out or cfg.outputs.get("directory") or f"out/{cfg.name}")
        code, summary = run_experiment(cfg, out)
    except (ConfigError, CapacityError) as err:
        print(f"qtorus: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NearResonance as err:
        print(f"qtorus: near resonance: {err}", file=sys.stderr)
        return EXIT_RESONANCE
    except Exception as err:  # noqa: BLE001 - every failure maps onto the documented codes
        print(f"qtorus: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.name}: {summary.termination}, results in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
