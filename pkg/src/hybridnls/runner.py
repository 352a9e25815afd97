"""Run orchestration: evolve, monitor, persist.

``run`` evolves w, then v against it, fills the ledger, runs every monitor
and writes ``ledger.csv``, checkpoints and ``manifest.json`` into the output
directory.  The exit code is 0 iff all monitors pass; otherwise it is the
smallest code among the failed monitor classes (see ``EXIT_CODES``).
"""

from __future__ import annotations

import glob
import hashlib
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import read_checkpoint, write_checkpoint
from .config import LabConfig, RunConfig, dump_config, load_run_config
from .errors import GridMismatch, InvalidConfig, InvalidScenario, NonConvergence, StepRejected
from .functionals import ConservedLedger, envelope_check
from .lab import (
    FieldSampler, verify_difference_lemma, verify_fractional_chain, verify_interpolation, verify_taylor_lemma,
    write_reports,
)
from .line import (
    blow_up_monitor, boundary_mass_monitor, evolve_hybrid, guaranteed_time_line, hybrid_ledger, picard_solve_line,
)
from .scenarios import build_initial_data, plane_wave_exact
from .spectral import ComplexField, check_same_grid, lp_norm, sobolev_norm
from .torus import (
    StepperConfig, evolve_torus, guaranteed_time_torus, picard_solve_torus, quadrature_nodes, trajectory_from_samples,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NONFINITE, EXIT_BOUNDARY, EXIT_ENVELOPE, EXIT_PICARD = 0, 1, 2, 3, 4, 5
EXIT_CODES = {
    EXIT_CONFIG: "invalid config",
    EXIT_NONFINITE: "non-finite field",
    EXIT_BOUNDARY: "boundary violation",
    EXIT_ENVELOPE: "envelope violation",
    EXIT_PICARD: "Picard non-convergence",
}
ENVELOPE_KINDS = ("energy_bound", "hs_exponential", "equivalence")


@dataclass
class RunManifest:
    config: dict
    defaulted_keys: list
    config_hash: str
    code_version: str
    regime: str
    started: str = ""
    finished: str = ""
    wall_seconds: float = 0.0
    grid: dict = field(default_factory=dict)
    steps: int = 0
    monitors: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    exit_code: int = 0

    def fail(self, code: int, message: str) -> None:
        self.failures.append({"code": code, "class": EXIT_CODES[code], "message": message})
        self.exit_code = min(f["code"] for f in self.failures)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"not serializable: {type(x)}")


def _finite(x: float):
    return x if math.isfinite(x) else str(x)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _stepper(cfg: RunConfig, dt: float | None = None) -> StepperConfig:
    return StepperConfig(dt or cfg.dt, cfg.dealias_flag, cfg.picard_max_iter, cfg.picard_tol, cfg.picard_quad_nodes)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- run ---------------------------------------------------------------------

@dataclass
class RunOutcome:
    manifest: RunManifest
    ledger: ConservedLedger | None
    out_dir: Path

    @property
    def exit_code(self) -> int:
        return self.manifest.exit_code


def run(cfg: RunConfig, defaulted: list | None = None) -> RunOutcome:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = RunManifest(cfg.to_dict(), list(defaulted or []), cfg.config_hash(), __version__, cfg.regime)
    m.started = _now()
    m.grid = {"torus_n": cfg.torus_n, "line_n": cfg.line_n, "line_K": cfg.line_K,
              "line_half_length": math.pi * cfg.line_K}
    m.steps = cfg.steps
    (out / "config.resolved").write_text(dump_config(cfg))
    t0 = time.perf_counter()
    ledger = None
    try:
        v0, w0 = build_initial_data(cfg)
        m.results["guaranteed_time_torus"] = _finite(guaranteed_time_torus(w0, cfg.p, cfg.c_cal))
        m.results["guaranteed_time_line"] = _finite(guaranteed_time_line(v0, w0, cfg.p, cfg.c_cal))
        kept: dict = {}
        if cfg.solver_mode in ("strang", "both"):
            keep = _node_steps(cfg) if cfg.solver_mode == "both" else {}
            ledger = _run_strang(cfg, v0, w0, out, m, keep, kept)
        if cfg.solver_mode in ("picard", "both") and not any(f["code"] == EXIT_NONFINITE for f in m.failures):
            pl = _run_picard(cfg, v0, w0, out, m, kept)
            ledger = ledger if ledger is not None else pl
    except InvalidScenario as exc:
        m.fail(EXIT_CONFIG, str(exc))
    except StepRejected as exc:
        m.fail(EXIT_NONFINITE, str(exc))
    if ledger is not None:
        ledger.to_csv(out / "ledger.csv")
        _monitor_ledger(cfg, ledger, m)
    m.wall_seconds = time.perf_counter() - t0
    m.finished = _now()
    m.files = [{"name": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)}
               for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"]
    (out / "manifest.json").write_text(m.to_json())
    if m.exit_code:
        log.warning("run %s failed: %s", out, "; ".join(f["message"] for f in m.failures))
    return RunOutcome(m, ledger, out)


def _node_steps(cfg: RunConfig) -> dict[int, int]:
    """Strang step index -> Picard node index, for nodes that fall on a step."""
    out = {}
    for j, t in enumerate(quadrature_nodes(cfg.t_end, _stepper(cfg))):
        step = round(t / cfg.dt)
        if abs(step * cfg.dt - t) <= 1e-9 * max(1.0, t):
            out[step] = j
    return out


def _run_strang(cfg: RunConfig, v0: ComplexField, w0: ComplexField, out: Path, m: RunManifest,
                keep: dict | None = None, kept: dict | None = None) -> ConservedLedger:
    sc = _stepper(cfg)
    traj = evolve_torus(w0, cfg.t_end, sc, cfg.p, s=cfg.s_torus)
    fraction = cfg.tol("boundary_fraction")
    worst = {"share": 0.0, "time": 0.0}
    grid = v0.grid
    every = cfg.checkpoint_every

    def on_step(j, v):
        f = ComplexField(grid, v)
        share = boundary_mass_monitor(f, fraction)
        if share > worst["share"]:
            worst.update(share=share, time=float(traj.times[j]))
        if keep and j in keep:
            kept[keep[j]] = (v.copy(), traj.w[j].copy())
        if (every and j % every == 0) or j == traj.steps:
            t = float(traj.times[j])
            write_checkpoint(out / f"v_{j:06d}.bin", f, t, cfg.p)
            write_checkpoint(out / f"w_{j:06d}.bin", ComplexField(traj.grid, traj.w[j]), t, cfg.p)

    hr = evolve_hybrid(v0, traj, sc, cfg.p, on_step=on_step)
    limit = cfg.tol("boundary_mass")
    m.monitors["boundary"] = {"max_share": worst["share"], "at_time": worst["time"], "fraction": fraction,
                              "limit": limit, "passed": worst["share"] <= limit}
    if worst["share"] > limit:
        m.fail(EXIT_BOUNDARY, f"boundary mass share {worst['share']:.3e} exceeds {limit:g} at t={worst['time']:g}")
    if cfg.scenario == "plane_wave":
        exact = plane_wave_exact(cfg, traj.grid, float(traj.times[-1]))
        err = lp_norm(ComplexField(traj.grid, traj.w[-1] - exact), 2)
        m.results["plane_wave_l2_error"] = err
    m.results["final_time"] = float(traj.times[-1])
    m.results["torus_mass_drift"] = _rel_drift(traj.mass)
    m.results["torus_energy_drift"] = _rel_drift(traj.energy)
    return hr.ledger


def _rel_drift(series: np.ndarray) -> float:
    ref = abs(series[0])
    d = float(np.max(np.abs(series - series[0])))
    return d / ref if ref > 0 else d


def _run_picard(cfg: RunConfig, v0: ComplexField, w0: ComplexField, out: Path, m: RunManifest,
                kept: dict | None = None):
    sc = _stepper(cfg)
    T = cfg.t_end
    info: dict = {}
    m.monitors["picard"] = info
    if not T > 0:
        m.fail(EXIT_CONFIG, "Picard mode needs t_end > 0")
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            wr = picard_solve_torus(w0, T, sc, cfg.p, cfg.c_cal)
            info["torus"] = _diag(wr.diagnostics)
            wt = trajectory_from_samples(w0.grid, wr.times, wr.values, cfg.p, cfg.s_torus)
            vr = picard_solve_line(v0, wt, T, sc, cfg.p, cfg.c_cal)
            info["line"] = _diag(vr.diagnostics)
        except NonConvergence as exc:
            info["error"] = str(exc)
            if exc.diagnostics is not None:
                info["diagnostics"] = _diag(exc.diagnostics)
            m.fail(EXIT_PICARD, str(exc))
            return None
    ledger = hybrid_ledger(vr.values, wt, v0.grid, cfg.p)
    ledger.to_csv(out / "ledger_picard.csv")
    write_checkpoint(out / "v_picard.bin", vr.field(len(vr.times) - 1), T, cfg.p)
    write_checkpoint(out / "w_picard.bin", wr.field(len(wr.times) - 1), T, cfg.p)
    if cfg.solver_mode == "both":
        _cross_validate(cfg, wr, vr, kept or {}, v0.grid, m)
    return ledger


def _diag(d) -> dict:
    return {"iterations": d.iterations, "distances": d.distances, "ratios": d.ratios, "converged": d.converged,
            "guaranteed_time": _finite(d.guaranteed_time), "flagged": d.flagged,
            "quadrature_error": d.quadrature_error}


def _cross_validate(cfg: RunConfig, wr, vr, kept: dict, line_grid, m: RunManifest) -> None:
    """Sup-in-time L^2 distance between Picard and Strang at shared nodes."""
    tol = cfg.tol("picard_agreement")
    worst = 0.0
    for j, (v, w) in kept.items():
        worst = max(worst, _l2(v - vr.values[j], line_grid.dx), _l2(w - wr.values[j], wr.grid.dx))
    info = m.monitors["picard"]
    allow = max(tol, info["torus"]["quadrature_error"] + info["line"]["quadrature_error"])
    info["agreement"] = {"sup_l2": worst, "allowed": allow, "nodes_compared": len(kept)}
    if not kept:
        m.fail(EXIT_CONFIG, "no Picard node coincides with a Strang step; choose dt dividing the node spacing")
    elif worst > allow:
        m.fail(EXIT_PICARD, f"Picard and Strang differ by {worst:.3e} > {allow:.3e}")


def _l2(d: np.ndarray, dx: float) -> float:
    return math.sqrt(float(np.sum(np.abs(d) ** 2)) * dx)


def _monitor_ledger(cfg: RunConfig, ledger: ConservedLedger, m: RunManifest) -> None:
    if not np.all(np.isfinite(ledger.rows())):
        m.fail(EXIT_NONFINITE, "ledger contains non-finite values")
        return
    tg = m.results.get("guaranteed_time_line", math.inf)
    tg = tg if isinstance(tg, float) else math.inf
    reports = {}
    for name, h1 in (("v", ledger.h1_v), ("w", ledger.h1_w if ledger.h1_w.size else ledger.hs_w)):
        rep = blow_up_monitor(ledger.times, h1, tg, cfg.tol("blowup_ceiling"), cfg.tol("blowup_growth"))
        reports[name] = rep.__dict__
        if rep.flagged:
            m.fail(EXIT_NONFINITE, f"blow-up monitor on {name}: {rep.reason} at t={rep.first_flag_time}")
    m.monitors["blow_up"] = reports
    env = {}
    ceiling = cfg.tol("envelope_ceiling")
    for kind in ENVELOPE_KINDS:
        rep = envelope_check(ledger, kind, {"p": cfg.p, "slack": cfg.tol("envelope_slack")})
        ok = math.isfinite(rep.fitted) and rep.fitted <= ceiling and not rep.crossed
        env[kind] = {"fitted": _finite(rep.fitted), "crossed": rep.crossed, "passed": ok, **rep.details}
        if not ok:
            m.fail(EXIT_ENVELOPE, f"{kind} envelope failed (fitted {rep.fitted:g}, crossed {rep.crossed})")
    m.monitors["envelopes"] = env
    m.results["sup_mass_plus_energy_v"] = float(np.max(ledger.mass_v + ledger.energy_v))
    m.results["hybrid_mass_drift"] = float(np.max(np.abs(ledger.hybrid_mass - ledger.hybrid_mass[0])))


def run_file(path, output_dir: str | None = None) -> RunOutcome:
    cfg, defaulted = load_run_config(path)
    if output_dir is not None:
        cfg = RunConfig(**{**cfg.to_dict(), "output_dir": output_dir})
    return run(cfg, defaulted)


# -- lab ---------------------------------------------------------------------

def lab(cfg: LabConfig) -> dict[str, Path]:
    """One CSV per lemma, named ``lab_<lemma>.csv``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sampler = FieldSampler(cfg.seed, n=cfg.n, gamma=cfg.gamma, amplitude=cfg.amplitude)
    written = {}
    for lemma in cfg.lemmas:
        if lemma == "fractional_chain":
            reports = [verify_fractional_chain(sampler, cfg.p, cfg.s, cfg.samples)]
        elif lemma == "difference":
            reports = list(verify_difference_lemma(sampler, cfg.p, cfg.samples))
        elif lemma == "taylor":
            reports = list(verify_taylor_lemma(sampler, cfg.p, cfg.samples))
        else:
            reports = [verify_interpolation(sampler, cfg.p, cfg.q, cfg.samples)]
        path = out / f"lab_{lemma}.csv"
        write_reports(path, reports)
        written[lemma] = path
    return written


# -- compare -----------------------------------------------------------------

def compare(path_a, path_b) -> dict:
    """L^2, H^1 and L^inf distances between two checkpoints on one grid."""
    a = read_checkpoint(path_a)
    b = read_checkpoint(path_b)
    if a.field.grid != b.field.grid:
        raise GridMismatch(f"{a.field.grid} vs {b.field.grid}")
    check_same_grid(a.field, b.field)
    d = a.field - b.field
    return {"l2": lp_norm(d, 2), "h1": sobolev_norm(d, 1.0), "linf": lp_norm(d, math.inf),
            "t_a": a.t, "t_b": b.t}


# -- sweep -------------------------------------------------------------------

def _sweep_one(args) -> tuple[str, int]:
    path, out_dir = args
    try:
        return path, run_file(path, out_dir).exit_code
    except InvalidConfig as exc:
        log.error("%s: %s", path, exc)
        return path, EXIT_CONFIG


def sweep(pattern: str, jobs: int | None = None, base_dir: str | None = None) -> list[tuple[str, int]]:
    """Run every config matching ``pattern`` in parallel.

    Each run writes to ``<base>/<config stem>`` where base is ``base_dir``,
    else HNLS_OUTPUT_DIR, else the config's own output_dir.
    """
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise InvalidConfig(f"no config matches {pattern!r}")
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        raise InvalidConfig("sweep configs must have distinct file names")
    tasks = []
    for p in paths:
        base = base_dir or os.environ.get("HNLS_OUTPUT_DIR")
        if base is None:
            base = load_run_config(p)[0].output_dir
        tasks.append((p, str(Path(base) / Path(p).stem)))
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        return [_sweep_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_one, tasks))
