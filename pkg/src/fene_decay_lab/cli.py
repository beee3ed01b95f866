"""Experiment configuration, orchestration and persistence.

Usage: fene-decay-lab <subcommand> --config <path> [--out <dir>]

The configuration is plain ``key=value`` text, one pair per line, with
``#`` comments. Every subcommand writes the effective configuration
(``config.txt``), ``trace.csv`` when it integrates in time, binary
snapshots and ``summary.json``. The exit status is 0 exactly when every
invariant asserted by the subcommand held.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import struct
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import decay_lab as lab
from .config_space import ConfigDistribution, assemble_operators, build_basis, poincare_constant, \
    poincare_eigenpairs
from .fluid import TorusGrid, VelocityField
from .integrator import (CoupledSystem, Functionals, RunAborted, StepperConfig, SystemState,
                         duhamel_residual, localized_velocity, perturbed_configuration)
from .model import Drag, FeneParams
from .oracles import fd_poincare_lambda1
from .trace import SERIES, DecayTrace

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("simulate", "poincare", "probe-lemmas", "fit-decay", "splitting-diag",
               "steady-check", "duhamel-check", "fp-oracle")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


@dataclass(frozen=True)
class ExperimentConfig:
    # model
    dim: int = 2
    k: float = 1.0
    nu: float = 1.0
    drag: str = "corotation"
    # grid
    n: int = 32
    L: float = 16.0 * math.pi
    # basis (0 selects the dimension default: 12/6 in 2D, 8/4 in 3D)
    n_radial: int = 0
    l_max: int = 0
    # stepper
    dt: float = 1e-3
    scheme: str = "imex2"
    T_final: float = 1.0
    snapshot_stride: int = 10
    cfl_safety: float = 0.5
    # initial data
    seed: int = 0
    m: int = 1
    xi_c: float = 1.0
    eps: float = 1e-2
    u_amp: float = 1e-3
    # splitting schedule
    schedule: str = "powerlaw"
    schedule_d: int = 3
    schedule_m: int = 3
    schedule_eta: float = 1.0
    # physics switches (both false: Stokes/heat baseline)
    nonlinear: bool = True
    stress: bool = True
    # analysis
    lam: float = 1.0
    steady_tol: float = 1e-4
    t_transient: float = 1.0
    fit_t0: float = -1.0  # negative: automatic window
    fit_t1: float = -1.0
    window_tol: float = 0.05
    probe_samples: int = 400
    oracle_T: float = 1.0
    oracle_nr: int = 128
    oracle_ntheta: int = 64
    snapshots: str = "final"  # final | all | none
    out: str = "fene_out"

    def __post_init__(self):
        def bad(key, expected):
            raise ConfigError(f"invalid value for {key}={getattr(self, key)!r}: expected {expected}")

        if self.dim not in (2, 3):
            bad("dim", "2 or 3")
        if not self.k > 0:
            bad("k", "a real > 0")
        if not self.nu > 0:
            bad("nu", "a real > 0")
        try:
            Drag.parse(self.drag)
        except ValueError:
            bad("drag", "gradient or corotation")
        if self.n < 16 or self.n & (self.n - 1):
            bad("n", "a power of two >= 16")
        if not self.L > 0:
            bad("L", "a real > 0")
        if self.n_radial == 0:
            object.__setattr__(self, "n_radial", 12 if self.dim == 2 else 8)
        if self.l_max == 0:
            object.__setattr__(self, "l_max", 6 if self.dim == 2 else 4)
        if self.n_radial < 2:
            bad("n_radial", "an integer >= 2")
        if self.l_max < 2:
            bad("l_max", "an integer >= 2")
        if not self.dt > 0:
            bad("dt", "a real > 0")
        if self.scheme not in ("imex1", "imex2"):
            bad("scheme", "imex1 or imex2")
        if not self.T_final >= 0:
            bad("T_final", "a real >= 0")
        if self.snapshot_stride < 1:
            bad("snapshot_stride", "an integer >= 1")
        if not 0 < self.cfl_safety <= 1:
            bad("cfl_safety", "a real in (0, 1]")
        if self.m < 0:
            bad("m", "an integer >= 0")
        if not self.xi_c > 0:
            bad("xi_c", "a real > 0")
        if not 0 <= self.eps < 1:
            bad("eps", "a real in [0, 1)")
        if not self.u_amp >= 0:
            bad("u_amp", "a real >= 0")
        try:
            self.splitting_schedule()
        except ValueError as exc:
            raise ConfigError(f"invalid schedule: {exc}") from None
        if not self.lam > 0:
            bad("lam", "a real > 0")
        if not self.steady_tol > 0:
            bad("steady_tol", "a real > 0")
        if not 0 < self.window_tol < 1:
            bad("window_tol", "a real in (0, 1)")
        if self.probe_samples < 4:
            bad("probe_samples", "an integer >= 4")
        if not self.oracle_T >= 0:
            bad("oracle_T", "a real >= 0")
        if self.oracle_nr < 8 or self.oracle_ntheta < 8:
            bad("oracle_nr", "oracle grid sizes >= 8")
        if self.snapshots not in ("final", "all", "none"):
            bad("snapshots", "final, all or none")

    # --- derived objects ---
    @property
    def params(self) -> FeneParams:
        return FeneParams(k=self.k, nu=self.nu, dim=self.dim, drag=Drag.parse(self.drag))

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.dim, self.n, self.L)

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(self.dt, self.scheme, self.cfl_safety, self.snapshot_stride)

    def splitting_schedule(self):
        return lab.parse_schedule(self.schedule, self.schedule_d, self.schedule_m, self.schedule_eta)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> str:
        lines = ["# effective configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value text; unknown keys and malformed values raise ConfigError."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kind = _TYPES[key]
        try:
            if kind == "bool":
                values[key] = _bool(value)
            elif kind == "int":
                values[key] = int(value)
            elif kind == "float":
                values[key] = float(value)
                if not math.isfinite(values[key]):
                    raise ValueError("not finite")
            else:
                values[key] = value.strip().lower() if key != "out" else value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: invalid value for {key}: {value!r} ({kind} expected; {exc})") \
                from None
    return ExperimentConfig(**values)


# --- persistence ----------------------------------------------------------------------

SNAPSHOT_MAGIC = b"FENE"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdIIIddId")


def write_trace_csv(trace: DecayTrace, path: Path) -> None:
    """Fixed header; floats in shortest round-trip decimal form."""
    cols = [trace.t] + [trace.series(name) for name in SERIES]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(SERIES) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trace_csv(path: Path) -> DecayTrace:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["t", *SERIES]:
            raise ValueError(f"unexpected trace header {header}")
        data = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    data = data.reshape(-1, len(header))
    return DecayTrace.from_arrays(data[:, 0], **{name: data[:, i + 1] for i, name in enumerate(SERIES)})


def write_snapshot(state: SystemState, params: FeneParams, path: Path) -> None:
    """Binary layout, all little-endian:

    magic 'FENE' | u32 version | u32 dim | u32 n | f64 L | u32 n_radial |
    u32 l_max | u32 n_modes | f64 k | f64 nu | u32 drag (0 gradient, 1
    corotation) | f64 t | uhat as complex128 (dim, n, ..., n) C-order,
    interleaved re/im | coeffs as f64 (n^dim, n_modes) C-order.
    """
    g, b = state.u.grid, state.psi.basis
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.dim, g.n, g.L, b.n_radial, b.l_max,
                          b.n_modes, params.k, params.nu, int(params.drag is Drag.COROTATION), state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.u.uhat, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(state.psi.coeffs, dtype="<f8").tobytes())


def read_snapshot(path: Path, basis=None) -> tuple[SystemState, FeneParams]:
    data = Path(path).read_bytes()
    magic, version, dim, n, L, n_radial, l_max, n_modes, k, nu, drag, t = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a FENE snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    params = FeneParams(k=k, nu=nu, dim=dim, drag=Drag.COROTATION if drag else Drag.GRADIENT)
    grid = TorusGrid(dim, n, L)
    basis = basis or build_basis(params, n_radial, l_max)
    if basis.n_modes != n_modes:
        raise ValueError("snapshot basis size does not match")
    off = _HEADER.size
    n_u = dim * n**dim
    uhat = np.frombuffer(data, dtype="<c16", count=n_u, offset=off).reshape((dim,) + (n,) * dim)
    off += 16 * n_u
    coeffs = np.frombuffer(data, dtype="<f8", count=n**dim * n_modes, offset=off)
    state = SystemState(t, VelocityField(grid, uhat.astype(complex)),
                        ConfigDistribution(basis, coeffs.reshape(n**dim, n_modes).astype(float),
                                           grid.cell_volume))
    return state, params


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    return obj


# --- experiment plumbing ------------------------------------------------------------------

class Experiment:
    """Shared state of one subcommand invocation."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg, self.out = cfg, out
        self.params = cfg.params
        self.grid = cfg.grid
        self.basis = build_basis(self.params, cfg.n_radial, cfg.l_max)
        self.ops = assemble_operators(self.basis)
        self.summary: dict = {"invariants": {}}

    def check(self, name: str, ok: bool) -> bool:
        self.summary["invariants"][name] = bool(ok)
        return bool(ok)

    def initial_state(self, cfg: ExperimentConfig | None = None) -> SystemState:
        cfg = cfg or self.cfg
        u = localized_velocity(self.grid, cfg.u_amp, cfg.m, cfg.xi_c, cfg.seed)
        psi = perturbed_configuration(self.grid, self.basis, cfg.eps, cfg.xi_c, cfg.seed, ops=self.ops)
        return SystemState(0.0, u, psi)

    def system(self, cfg: ExperimentConfig | None = None) -> CoupledSystem:
        cfg = cfg or self.cfg
        return CoupledSystem(self.params, self.grid, self.basis, self.ops,
                             nonlinear=cfg.nonlinear, stress=cfg.stress)

    def simulate(self, cfg: ExperimentConfig | None = None, *, tag: str = "", keep_states: bool = False,
                 write: bool = True):
        """Run the configured trajectory, persisting trace and snapshots under ``tag``."""
        cfg = cfg or self.cfg
        system = self.system(cfg)
        schedule = cfg.splitting_schedule()
        functionals = Functionals(system, lambda t: float(lab.splitting_radius(schedule, t)), cfg.lam)
        prefix = f"{tag}_" if tag else ""
        snap_dir = self.out / f"{prefix}snapshots"

        def on_snapshot(state):
            if write and cfg.snapshots == "all":
                snap_dir.mkdir(exist_ok=True)
                write_snapshot(state, self.params, snap_dir / f"t{len(list(snap_dir.iterdir())):06d}.fene")

        try:
            result = system.run(self.initial_state(cfg), cfg.stepper, cfg.T_final, functionals,
                                keep_states=keep_states, on_snapshot=on_snapshot)
        except RunAborted as exc:
            if write:
                write_trace_csv(exc.trace, self.out / f"{prefix}trace.csv")
                write_snapshot(exc.last_state, self.params, self.out / f"{prefix}last_valid.fene")
            self.summary[f"{prefix}aborted"] = str(exc)
            self.check(f"{prefix}run_completed", False)
            raise
        if write:
            write_trace_csv(result.trace, self.out / f"{prefix}trace.csv")
            if cfg.snapshots != "none":
                write_snapshot(result.final, self.params, self.out / f"{prefix}final.fene")
        self.summary[f"{prefix}run"] = {"steps": result.steps, "rejected_steps": result.rejected_steps,
                                        "max_mass_drift": result.max_mass_drift,
                                        "final_time": result.final.t}
        self.check(f"{prefix}mass_conserved", result.max_mass_drift <= 1e-10)
        return system, result

    def window(self, t_end: float) -> tuple[float, float, dict]:
        cfg = self.cfg
        info = lab.heat_window(self.grid, cfg.nu, cfg.m, cfg.xi_c, cfg.seed, cfg.window_tol)
        t0, t1 = lab.fit_window(cfg.dt, cfg.snapshot_stride, min(info["t_box"], t_end))
        t0 = max(t0, info["t_agree_start"])
        if cfg.fit_t0 >= 0:
            t0 = cfg.fit_t0
        if cfg.fit_t1 >= 0:
            t1 = cfg.fit_t1
        return t0, t1, info


def _cmd_simulate(ex: Experiment) -> None:
    system, result = ex.simulate()
    tr = result.trace
    if ex.params.drag is Drag.COROTATION and len(tr) > 1:
        ex.summary["entropy_balance_residual"] = lab.entropy_balance_residual(tr)
    ex.summary["final"] = {name: tr.series(name)[-1] for name in SERIES}


def _cmd_poincare(ex: Experiment) -> None:
    lam1, C = poincare_constant(ex.basis, ex.ops)
    ex.summary["lambda1"] = lam1
    ex.summary["poincare_constant"] = C
    ex.check("lambda1_positive", lam1 > 0)
    if ex.cfg.dim == 2:
        oracle = fd_poincare_lambda1(ex.params, ex.cfg.oracle_nr, ex.cfg.oracle_ntheta)
        rel = abs(lam1 - oracle) / oracle
        ex.summary["oracle_lambda1"] = oracle
        ex.summary["oracle_relative_difference"] = rel
        ex.check("oracle_3_significant_digits", rel < 5e-4)


def _cmd_probe(ex: Experiment) -> None:
    cfg = ex.cfg
    r1 = lab.probe_lemma1(ex.basis, cfg.probe_samples, cfg.seed)
    ex.summary["lemma1"] = {"samples": r1.n_samples, "sup": r1.sup, "sup_half": r1.sup_half,
                            "stability_delta": r1.stability_delta, "skipped": r1.skipped,
                            "family": r1.extra["family"], "deviatoric": r1.extra["deviatoric"]}
    ex.check("lemma1_sup_finite", math.isfinite(r1.sup))
    ex.check("lemma1_stable_under_doubling", r1.stability_delta <= 0.10)
    r3 = lab.probe_lemma3(ex.basis, cfg.probe_samples, (0.1, 0.5, 1.0), cfg.seed, ex.ops)
    ex.summary["lemma3"] = {repr(eps): {"C_eps": r.sup, "C_eps_half": r.sup_half,
                                        "stability_delta": r.stability_delta,
                                        "subspace_sup": r.extra["subspace_sup"]} for eps, r in r3.items()}
    sups = [r3[e].sup for e in sorted(r3)]
    ex.check("lemma3_finite", all(math.isfinite(s) for s in sups))
    ex.check("lemma3_nonincreasing_in_eps", all(a >= b for a, b in zip(sups, sups[1:])))
    ex.check("lemma3_stable_under_doubling", all(r.stability_delta <= 0.10 for r in r3.values()))


def _heat_baseline(ex: Experiment, window) -> dict:
    # With convection and stress switched off the stepper reduces to the exact integrating
    # factor, so the baseline energy is evaluated in closed form on the same sample times.
    cfg = ex.cfg.replace(nonlinear=False, stress=False)
    u = localized_velocity(ex.grid, cfg.u_amp, cfg.m, cfg.xi_c, cfg.seed)
    times, energies = [], []
    n_steps = int(round(cfg.T_final / cfg.dt))
    decay = np.exp(-2.0 * cfg.nu * ex.grid.k2)
    e_hat = np.sum(np.abs(u.uhat) ** 2, axis=0)
    for i in range(0, n_steps + 1, cfg.snapshot_stride):
        t = i * cfg.dt
        times.append(t)
        energies.append(ex.grid.volume * float(np.sum(e_hat * decay**t)))
    trace = DecayTrace.from_arrays(times, u_l2sq=energies)
    fit = lab.fit_power_exponent(trace, "u_l2sq", window)
    return {"slope": fit.value, "confidence": fit.confidence, "expected": -(cfg.dim / 2 + cfg.m)}


def _cmd_fit_decay(ex: Experiment) -> None:
    cfg = ex.cfg
    system, result = ex.simulate()
    tr = result.trace
    lam1, _ = poincare_constant(ex.basis, ex.ops)
    t0, t1, info = ex.window(tr.t[-1])
    ex.summary["window"] = {"t_spin": t0, "t_box": t1, **info}
    ex.summary["lambda1"] = lam1
    # configuration relaxation: fit while relative_l2 is well above its roundoff floor
    rel = tr.series("relative_l2")
    alive = rel > 1e-12 * rel[0]
    rel_window = (t0, float(tr.t[alive][-1]))
    try:
        rate = lab.fit_exponential_rate(tr, "relative_l2", rel_window)
        ex.summary["relative_l2_rate"] = dataclasses.asdict(rate)
        if ex.params.drag is Drag.COROTATION:
            ex.check("relative_l2_rate_above_0.95x2lambda1", rate.value >= 0.95 * 2 * lam1)
    except lab.FitError as exc:
        ex.summary["relative_l2_rate"] = str(exc)
    fit = lab.fit_power_exponent(tr, "u_l2sq", (t0, t1))
    ex.summary["u_l2sq_slope"] = dataclasses.asdict(fit)
    ex.summary["bootstrap"] = lab.bootstrap_report(tr, cfg.dim, (t0, t1))
    combined = DecayTrace.from_arrays(tr.t, u_l2sq=tr.series("u_l2sq") + tr.series("relative_l2"))
    comb = lab.fit_power_exponent(combined, "u_l2sq", (t0, t1))
    ex.summary["combined_energy_slope"] = dataclasses.asdict(comb)
    if cfg.dim == 3:
        base = _heat_baseline(ex, (t0, t1))
        ex.summary["heat_baseline"] = base
        ex.check("heat_baseline_slope_certifies_window", abs(base["slope"] - base["expected"]) <= 0.08)
        if ex.params.drag is Drag.COROTATION:
            ex.check("u_l2sq_slope_in_[-1.9,-1.1]", -1.9 <= fit.value <= -1.1)
        else:
            ex.check("combined_energy_slope_below_-0.4", comb.value <= -0.4)
    else:
        # bounded by the initial coupled energy ||u0||^2 + lam rel0 (energy inequality)
        u2 = tr.series("u_l2sq")
        bound = tr.series("coupled_energy")[0]
        ex.summary["u_l2sq_max"] = float(u2.max())
        ex.summary["u_l2sq_bound"] = float(bound)
        ex.check("u_l2sq_bounded", bool(np.all(np.isfinite(u2)) and u2.max() <= bound))
        if ex.params.drag is Drag.COROTATION:
            lam_min = lab.lambda_min_bisect(tr)
            lo, hi = lab.monotone_threshold(tr)
            ex.summary["lambda_min"] = lam_min
            ex.summary["lambda_feasible_interval"] = [lo, hi]
            ex.check("coupled_energy_nonincreasing_at_lambda_min",
                     math.isfinite(lam_min) and lab._nonincreasing(tr, lam_min))
        else:
            e = tr.series("u_l2sq") + tr.series("relative_l2")
            ex.check("energy_nonincreasing", bool(np.all(np.diff(e) <= 0)))


def _cmd_splitting(ex: Experiment) -> None:
    system, result = ex.simulate()
    schedule = ex.cfg.splitting_schedule()
    rep = lab.splitting_inequality_check(result.trace, ex.cfg.dim, ex.cfg.t_transient)
    ex.summary["splitting"] = {"sup_after": rep.sup_after, "r_t1": rep.r_t1, "t1": rep.t1,
                               "ratio": rep.ratio}
    ex.check("splitting_ratio_bounded", rep.passed)
    t = np.linspace(0.0, max(ex.cfg.T_final, 1.0), 101)
    identity = np.max(np.abs(lab.splitting_radius(schedule, t) ** 2 * schedule.f(t) - schedule.fprime(t))
                      / schedule.fprime(t))
    ex.summary["radius_identity_error"] = float(identity)
    ex.check("radius_identity", identity <= 1e-14)


def _cmd_steady(ex: Experiment) -> None:
    system, result = ex.simulate()
    v = lab.steady_state_check(result.trace, ex.cfg.nu, ex.cfg.steady_tol, ex.cfg.t_transient)
    ex.summary["steady_state"] = dataclasses.asdict(v)
    ex.check("steady_state_pass", v.passed)


def _cmd_duhamel(ex: Experiment) -> None:
    cfg = ex.cfg
    if cfg.T_final / cfg.dt / cfg.snapshot_stride < 4:
        raise ConfigError("duhamel-check needs at least 4 stored snapshots")
    base_cfg = cfg.replace(nonlinear=False, stress=False)
    base_sys, base = ex.simulate(base_cfg, tag="stokes", keep_states=True)
    n_int = len(base.snapshots) - 1
    ex.summary["stokes_residual"] = duhamel_residual(base_sys, base.snapshots)
    ex.check("stokes_residual_below_1e-10", ex.summary["stokes_residual"] < 1e-10)
    system, full = ex.simulate(keep_states=True)
    n_int = len(full.snapshots) - 1
    if n_int % 2:
        raise ConfigError("duhamel-check needs an even number of snapshot intervals")
    fine = duhamel_residual(system, full.snapshots, 1)
    coarse = duhamel_residual(system, full.snapshots, 2)
    ex.summary["full_residual"] = {"fine": fine, "coarse": coarse, "ratio": coarse / fine}
    ex.check("full_residual_ratio_at_least_1.8", coarse / fine >= 1.8)


def _cmd_fp_oracle(ex: Experiment) -> None:
    cfg = ex.cfg
    if cfg.dim != 2:
        raise ConfigError("fp-oracle is available for dim=2 only")
    lam, vecs = poincare_eigenpairs(ex.basis, ex.ops)
    v = vecs[:, 0] / math.sqrt(vecs[:, 0] @ ex.ops.M @ vecs[:, 0])
    g0 = ex.basis.one + 0.1 * v
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    cases = {"sigma_zero": (np.zeros((2, 2)), g0), "sigma_antisymmetric": (rot, g0),
             "equilibrium_sigma_zero": (np.zeros((2, 2)), ex.basis.one),
             "equilibrium_sigma_antisymmetric": (rot, ex.basis.one)}
    out = {}
    for name, (sigma, a0) in cases.items():
        cmp_ = lab.fp_oracle_compare(ex.basis, sigma, a0, cfg.oracle_T, cfg.oracle_nr, cfg.oracle_ntheta,
                                     ops=ex.ops)
        out[name] = dataclasses.asdict(cmp_)
        limit = 0.01 if not name.startswith("equilibrium") else (1e-12 if name.endswith("zero") else 1e-10)
        ex.check(f"{name}_error", cmp_.relative_error < limit)
    ex.summary["fp_oracle"] = out


_COMMANDS = {"simulate": _cmd_simulate, "poincare": _cmd_poincare, "probe-lemmas": _cmd_probe,
             "fit-decay": _cmd_fit_decay, "splitting-diag": _cmd_splitting, "steady-check": _cmd_steady,
             "duhamel-check": _cmd_duhamel, "fp-oracle": _cmd_fp_oracle}


def run_experiment(cfg: ExperimentConfig, subcommand: str, out: Path | str | None = None) -> tuple[int, dict]:
    """Run one subcommand, write its artifacts and return (exit status, summary)."""
    if subcommand not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}")
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.echo(), encoding="utf-8")
    ex = Experiment(cfg, out)
    ex.summary["subcommand"] = subcommand
    try:
        _COMMANDS[subcommand](ex)
    except RunAborted:
        pass
    violated = sorted(name for name, ok in ex.summary["invariants"].items() if not ok)
    ex.summary["violated"] = violated
    status = 1 if violated else 0
    ex.summary["exit_status"] = status
    (out / "summary.json").write_text(
        json.dumps(_jsonable(ex.summary), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return status, ex.summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fene-decay-lab", description=__doc__.split("\n")[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="key=value configuration file")
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides 'out')")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        print(f"fene-decay-lab: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"fene-decay-lab: {exc}", file=sys.stderr)
        return 2
    try:
        status, summary = run_experiment(cfg, args.subcommand, args.out)
    except ConfigError as exc:
        print(f"fene-decay-lab: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fene-decay-lab: I/O failure: {exc}", file=sys.stderr)
        return 3
    if status:
        print(f"fene-decay-lab: violated invariants: {', '.join(summary['violated'])}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
