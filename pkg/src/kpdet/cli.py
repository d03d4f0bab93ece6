"""Batch experiment runner: parses a config, runs one named check, emits
a CSV data file plus a JSON report, and exits 0/1/2.

Config format: plain ``key = value`` lines under ``[section]`` headers.
Sections: [run] (command, out, seed, tolerance, threads, quad_n),
[kernel] (family, t, x/xs, r/rs, wedges "a:b,a:b", spikes, anchor),
[grid] (t0, x0, r0, ht, hx, hr, nt, nx, nr, r_min, r_max, r_step).
Exit codes: 0 pass, 1 residual above tolerance, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fields, fredholm, kpsolver, painleve, residuals, scattering
from .kernels import KernelSpec
from .residuals import GridField

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "run", "main"]

COMMANDS = ("tw-table", "det-eval", "kp-residual", "hirota-residual",
            "matrix-kp", "cyl-kdv", "tail-fit", "scattering-limit",
            "path-integral-check", "solve-kp", "bracket-check", "spiked-check")


class ConfigError(ValueError):
    """Malformed config; message carries the offending line number."""


@dataclass
class ExperimentConfig:
    command: str
    out: str = "."
    seed: int = 0
    tolerance: float = float("inf")
    threads: int = 0
    quad_n: int = 64
    kernel: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = ["[run]",
                 f"command = {self.command}",
                 f"out = {self.out}",
                 f"seed = {self.seed}",
                 f"tolerance = {self.tolerance!r}",
                 f"threads = {self.threads}",
                 f"quad_n = {self.quad_n}"]
        for name, sect in (("kernel", self.kernel), ("grid", self.grid)):
            if sect:
                lines.append(f"[{name}]")
                lines.extend(f"{k} = {_fmt(v)}" for k, v in sect.items())
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw or ":" in raw:
        parts = [p for p in raw.split(",") if p.strip()]
        out = []
        for p in parts:
            if ":" in p:
                out.append(tuple(float(q) for q in p.split(":")))
            else:
                out.append(_parse_value(p))
        return tuple(out)
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config(text: str) -> ExperimentConfig:
    section = None
    data: dict = {"run": {}, "kernel": {}, "grid": {}}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in data:
                raise ConfigError(f"line {ln}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        if section is None:
            raise ConfigError(f"line {ln}: key outside any section")
        key, raw = line.split("=", 1)
        data[section][key.strip()] = _parse_value(raw)
    run = data["run"]
    if "command" not in run:
        raise ConfigError("missing command in [run]")
    cmd = str(run["command"])
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}")
    return ExperimentConfig(
        command=cmd,
        out=str(run.get("out", ".")),
        seed=int(run.get("seed", 0)),
        tolerance=float(run.get("tolerance", float("inf"))),
        threads=int(run.get("threads", 0)),
        quad_n=int(run.get("quad_n", 64)),
        kernel=data["kernel"],
        grid=data["grid"],
    )


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _kernel_spec(cfg: ExperimentConfig, **overrides) -> KernelSpec:
    k = dict(cfg.kernel)
    k.update(overrides)
    family = str(k.get("family", "nw_fixed_point"))
    xs = k.get("xs", k.get("x", 0.0))
    rs = k.get("rs", k.get("r", 0.0))
    xs = tuple(np.atleast_1d(xs).astype(float))
    rs = tuple(np.atleast_1d(rs).astype(float))
    wedges = k.get("wedges", ((0.0, 0.0),))
    if wedges and not isinstance(wedges[0], tuple):
        wedges = (tuple(wedges),)
    kw = {}
    if "spikes" in k:
        kw["spikes"] = tuple(np.atleast_1d(k["spikes"]).astype(float))
    if "anchor" in k:
        kw["contour_anchor"] = float(k["anchor"])
    return KernelSpec(family, float(k.get("t", 1.0)), xs, rs,
                      tuple(tuple(w) for w in wedges), **kw)


def _grid_params(cfg, defaults):
    g = dict(defaults)
    g.update(cfg.grid)
    return g


def _field_from_cfg(cfg: ExperimentConfig, log=True) -> GridField:
    g = _grid_params(cfg, {"t0": 0.98, "x0": 0.18, "r0": 0.44,
                           "ht": 0.02, "hx": 0.02, "hr": 0.02,
                           "nt": 3, "nx": 3, "nr": 7})
    family = str(cfg.kernel.get("family", "nw_fixed_point"))
    spec_kw = {}
    if family in ("nw_fixed_point", "multiwedge_extended"):
        spec_kw["wedges"] = ((0.0, 0.0),)
    return fields.det_field(family, g["t0"], g["x0"], g["r0"],
                            g["ht"], g["hx"], g["hr"],
                            (int(g["nt"]), int(g["nx"]), int(g["nr"])),
                            n_quad=cfg.quad_n, log=log, spec_kw=spec_kw)


def run(cfg: ExperimentConfig):
    """Execute one experiment; returns (exit_code, artifact paths)."""
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, f"{cfg.command}.csv")
    json_path = os.path.join(cfg.out, f"{cfg.command}.json")
    threads = cfg.threads or (os.cpu_count() or 1)
    report: dict = {"command": cfg.command, "seed": cfg.seed}
    worst = 0.0

    if cfg.command == "tw-table":
        g = _grid_params(cfg, {"r_min": -6.0, "r_max": 4.0, "r_step": 0.1})
        hm = painleve.hastings_mcleod()
        r = np.arange(g["r_min"], g["r_max"] + 1e-12, g["r_step"])
        fgue = painleve.f_gue(r, hm)
        fgoe = painleve.f_goe(r, hm)
        _write_csv(csv_path, ["r", "f_gue", "f_goe"],
                   list(zip(r.tolist(), fgue.tolist(), fgoe.tolist())))
        report["rows"] = int(r.size)
        report["monotone"] = bool(np.all(np.diff(fgue) > 0) and np.all(np.diff(fgoe) > 0))
        worst = 0.0 if report["monotone"] else 1.0

    elif cfg.command == "det-eval":
        g = _grid_params(cfg, {"r0": -2.0, "hr": 0.5, "nr": 9})
        rvals = g["r0"] + g["hr"] * np.arange(int(g["nr"]))
        spec0 = _kernel_spec(cfg)
        def one(rv):
            return fredholm.det_one_minus(
                fredholm.assemble(_kernel_spec(cfg, r=float(rv)), cfg.quad_n))
        with ThreadPoolExecutor(max_workers=threads) as ex:
            dets = list(ex.map(one, rvals))
        # the similarity families carry a Painleve reference for comparison
        refs = None
        if spec0.family == "nw_fixed_point" and spec0.wedges == ((0.0, 0.0),):
            hm = painleve.hastings_mcleod()
            x = spec0.xs[0]
            s = (rvals / np.cbrt(spec0.t)
                 + x * x / np.cbrt(spec0.t ** 4))
            refs = painleve.f_gue(s, hm)
        elif spec0.family == "flat_fixed_point":
            hm = painleve.hastings_mcleod()
            refs = painleve.f_goe(np.cbrt(4.0 / spec0.t) * rvals, hm)
        if refs is not None:
            errs = np.abs(np.asarray(dets) - refs)
            _write_csv(csv_path, ["r", "det", "reference", "abs_err"],
                       list(zip(rvals.tolist(), dets, refs.tolist(),
                                errs.tolist())))
            worst = float(np.max(errs))
            report["max_abs_err"] = worst
        else:
            _write_csv(csv_path, ["r", "det"], list(zip(rvals.tolist(), dets)))
            worst = 0.0 if all(0.0 <= d <= 1.0 + 1e-9 for d in dets) else 1.0
        report["values"] = dets

    elif cfg.command == "hirota-residual":
        hm = painleve.hastings_mcleod()
        g = _grid_params(cfg, {"t0": 1.0, "x0": 0.2, "r0": 0.5, "h": 0.02})
        def at(h):
            fld = fields.similarity_gue_field(
                hm, g["t0"] - 2 * h, g["x0"] - 2 * h, g["r0"] - 3 * h,
                h, h, h, (5, 5, 7))
            return residuals.hirota_residual(fld)
        rep = at(g["h"])
        rep_half = at(g["h"] / 2.0)
        ratio = rep.normalized_sup / max(rep_half.normalized_sup, 1e-300)
        report.update(rep.to_dict())
        report["halving_factor"] = ratio
        worst = rep.normalized_sup if ratio >= 3.0 else float("inf")
        _write_csv(csv_path, ["term", "magnitude"],
                   list(zip(rep.extra["term_names"], rep.term_magnitudes)))

    elif cfg.command == "kp-residual":
        family = str(cfg.kernel.get("family", "nw_fixed_point"))
        if family == "airy_process":
            # two-point distribution as a function of (t, y, a)
            g = _grid_params(cfg, {"t0": 0.98, "ht": 0.02, "hy": 0.02,
                                   "ha": 0.02})
            xs = tuple(np.atleast_1d(cfg.kernel.get("xs", (-0.3, 0.4))).astype(float))
            rs = tuple(np.atleast_1d(cfg.kernel.get("rs", (0.5, 0.8))).astype(float))
            vals = np.empty((3, 3, 7))
            for i in range(3):
                for j in range(3):
                    for k in range(7):
                        vals[i, j, k] = fields.airy_two_point_logdet(
                            g["t0"] + g["ht"] * i, xs, rs,
                            (j - 1) * g["hy"], (k - 3) * g["ha"],
                            n_quad=min(cfg.quad_n, 48))
            fld = GridField(g["t0"], -g["hy"], -3 * g["ha"],
                            g["ht"], g["hy"], g["ha"], vals)
        else:
            fld = _field_from_cfg(cfg, log=True)
        rep = residuals.kp_scalar_residual(fld)
        report.update(rep.to_dict())
        worst = rep.normalized_sup
        _write_csv(csv_path, ["term", "magnitude"],
                   list(zip(rep.extra["term_names"], rep.term_magnitudes)))

    elif cfg.command == "matrix-kp":
        g = _grid_params(cfg, {"ht": 0.02, "hy": 0.02, "ha": 0.02})
        ht, hy, ha = g["ht"], g["hy"], g["ha"]
        spec = _kernel_spec(cfg)
        q_big = fields.q_stencil(spec.t - ht, spec.xs, spec.rs, ht, hy, ha,
                                 (3, 5, 9), n_quad=min(cfg.quad_n, 48))
        qf = (q_big[:, :, 2:] - q_big[:, :, :-2]) / (2 * ha)
        rep = residuals.matrix_kp_residual(qf, q_big[:, :, 1:-1], ht, hy, ha)
        ratio, tr_rel = residuals.rank_one_and_trace_check(qf[1, 2], ha)
        report.update(rep.to_dict())
        report["sv_ratio"] = ratio
        report["trace_identity_rel"] = tr_rel
        worst = (rep.normalized_sup if (ratio < 1e-4 and tr_rel < 1e-4)
                 else float("inf"))
        _write_csv(csv_path, ["quantity", "value"],
                   [("normalized_sup", rep.normalized_sup),
                    ("sv_ratio", ratio), ("trace_identity_rel", tr_rel)])

    elif cfg.command == "cyl-kdv":
        g = _grid_params(cfg, {"t0": 0.98, "r0": 0.88, "ht": 0.02,
                               "hr": 0.02, "nt": 3, "nr": 13})
        tg = g["t0"] + g["ht"] * np.arange(int(g["nt"]))
        rg = g["r0"] + g["hr"] * np.arange(int(g["nr"]))
        vals = np.empty((tg.size, 1, rg.size))
        for i, t in enumerate(tg):
            for k, r in enumerate(rg):
                spec = KernelSpec("kpz_narrow_wedge", float(t), (0.0,),
                                  (float(r - np.log(np.sqrt(np.pi * t))),))
                vals[i, 0, k] = fields.logdet_value(spec, cfg.quad_n)
        rep = residuals.cylindrical_kdv_residual(
            GridField(tg[0], 0.0, rg[0], g["ht"], 0.0, g["hr"], vals))
        report.update(rep.to_dict())
        shift = np.log(np.sqrt(np.pi))
        xa = fields.logdet_value(KernelSpec("kpz_narrow_wedge", 1.0, (0.0,),
                                            (1.0 - shift,)), cfg.quad_n)
        xb = fields.logdet_value(KernelSpec("kpz_narrow_wedge", 1.0, (0.5,),
                                            (0.75 - shift,)), cfg.quad_n)
        report["x_independence"] = abs(xa - xb)
        worst = rep.normalized_sup if report["x_independence"] < 1e-4 else float("inf")
        _write_csv(csv_path, ["term", "magnitude"],
                   list(zip(rep.extra["term_names"], rep.term_magnitudes)))

    elif cfg.command == "tail-fit":
        g = _grid_params(cfg, {"r_min": -7.0, "r_max": -5.0, "r_step": 0.25})
        r = np.arange(g["r_min"], g["r_max"] + 1e-12, g["r_step"])
        spec0 = _kernel_spec(cfg)
        lf = np.array([fields.logdet_value(_kernel_spec(cfg, r=float(rv)),
                                           max(cfg.quad_n, 96)) for rv in r])
        slope, r2 = residuals.tail_slope_fit(r, lf)
        expect = 1.0 / 6.0 if spec0.family == "flat_fixed_point" else 1.0 / 12.0
        report.update({"slope": slope, "r2": r2, "expected": expect,
                       "rel_dev": abs(slope / expect - 1.0)})
        worst = report["rel_dev"]
        _write_csv(csv_path, ["r", "log_f"], list(zip(r.tolist(), lf.tolist())))

    elif cfg.command == "scattering-limit":
        cfgw = scattering.WedgeConfig(((0.0, 0.0),), (-1.0, 1.0), (1.0, 1.2))
        rows = scattering.rk_limit_check(cfgw, (0.1, 0.05, 0.02, 0.01),
                                         n_quad=cfg.quad_n)
        table = []
        for rw in rows:
            n_pts = rw["q"].shape[0]
            for i in range(n_pts):
                for j in range(n_pts):
                    table.append((rw["t"], f"({i + 1},{j + 1})",
                                  float(rw["q"][i, j]),
                                  float(rw["target"][i, j]),
                                  float(abs(rw["q"][i, j] - rw["target"][i, j]))))
        _write_csv(csv_path, ["t", "entry", "fredholm_value", "oracle_value",
                              "abs_err"], table)
        report["errors"] = [rw["max_err"] for rw in rows]
        report["monotone_decrease"] = bool(all(np.diff(report["errors"]) < 0))
        c_fit, r2 = scattering.t0_kernel_decay_check(2.0, 0.0, -1.0, 1.0)
        report["decay_c"] = c_fit
        report["decay_r2"] = r2
        d_one = scattering.initial_data_determinant(cfgw)
        cfg0 = scattering.WedgeConfig(((0.0, 0.5),), (-1.0, 0.0, 1.0),
                                      (1.0, -0.2, 1.2))
        d_zero = scattering.initial_data_determinant(cfg0)
        report["initial_data_errs"] = [abs(d_one - 1.0), abs(d_zero)]
        ok = (report["monotone_decrease"] and c_fit > 0 and r2 > 0.99
              and max(report["initial_data_errs"]) < 1e-8)
        worst = rows[-1]["max_err"] if ok else float("inf")

    elif cfg.command == "path-integral-check":
        configs = [((-0.3, 0.4), (0.5, 0.8), 1.0),
                   ((-0.5, 0.2), (0.0, 0.3), 1.0),
                   ((0.1, 0.9), (1.0, 0.6), 2.0)]
        rows = []
        for xs, rs, t in configs:
            fp = scattering.path_integral_determinant(t, xs, rs)
            spec = KernelSpec("multiwedge_extended", t, xs, rs, ((0.0, 0.0),))
            fe = fredholm.det_one_minus(fredholm.assemble(spec, cfg.quad_n))
            rows.append((t, str(xs), str(rs), fp, fe, abs(fp - fe)))
        _write_csv(csv_path, ["t", "xs", "rs", "path_integral", "extended", "abs_err"],
                   rows)
        worst = max(rw[-1] for rw in rows)
        report["max_err"] = worst

    elif cfg.command == "solve-kp":
        # line-soliton accuracy plus the determinant-field closure test
        c, big_t, dt = 0.5, 2.0, 5e-3
        solver = kpsolver.KPSolver((-20, 20), (-0.5, 0.5), 512, 4, dt)
        phi0 = np.broadcast_to(
            kpsolver.soliton_profile(solver.r, c)[None, :], (4, 512)).copy()
        out = solver.evolve(phi0, int(big_t / dt))
        ref = kpsolver.soliton_profile(
            (solver.r - c * big_t + 20.0) % 40.0 - 20.0, c)
        soliton_err = float(np.max(np.abs(out - ref[None, :])))
        hm = painleve.hastings_mcleod(L=16.0, R=10.0, n=4001)
        rep = kpsolver.evolve_and_compare(
            lambda t, x, r: fields.phi_window_narrow_wedge(hm, t, x, r),
            1.0, 1.1, return_fields=True)
        grid = rep.pop("fields")
        report.update(rep)
        report["soliton_sup_error"] = soliton_err
        worst = rep["sup_error"] if soliton_err < 1e-6 else float("inf")
        table = [(float(xv), float(rv), float(pe), float(pt), float(abs(pe - pt)))
                 for (xv, rv, pe, pt) in grid]
        _write_csv(csv_path, ["x", "r", "phi_evolved", "phi_target", "abs_err"],
                   table)

    elif cfg.command == "bracket-check":
        def gau(c):
            def f(u, v):
                u, v = np.atleast_1d(u), np.atleast_1d(v)
                return c * np.exp(-u * u)[:, None] * np.exp(-v * v)[None, :]
            return f
        def gau_d1(c):
            def f(u, v):
                u, v = np.atleast_1d(u), np.atleast_1d(v)
                return (c * (-2 * u * np.exp(-u * u))[:, None]
                        * np.exp(-v * v)[None, :])
            return f
        def gau_d2(c):
            def f(u, v):
                u, v = np.atleast_1d(u), np.atleast_1d(v)
                return (c * np.exp(-u * u)[:, None]
                        * (-2 * v * np.exp(-v * v))[None, :])
            return f
        res = fredholm.boundary_bracket_product_check(
            [[gau(1.0)]], [[gau_d2(1.0)]], [[gau(1.0)]], [[gau_d1(1.0)]],
            max(cfg.quad_n, 96))
        report["residual"] = res
        worst = res
        _write_csv(csv_path, ["quantity", "value"], [("residual", res)])

    elif cfg.command == "spiked-check":
        spikes = tuple(np.atleast_1d(cfg.kernel.get("spikes", (0.0,))).astype(float))
        def sdet(r, anchor=0.25):
            spec = KernelSpec("kpz_spiked", 1.0, (0.0,), (float(r),),
                              spikes=spikes, contour_anchor=anchor)
            return fredholm.det_one_minus(fredholm.assemble(spec, cfg.quad_n))
        d0, d1 = sdet(0.0), sdet(1.0)
        anchor_dev = abs(d0 - sdet(0.0, anchor=0.35))
        h = 0.02
        fld = fields.det_field("kpz_spiked", 1.0 - h, 0.2 - h, 0.3 - 3 * h,
                               h, h, h, (3, 3, 7), n_quad=cfg.quad_n,
                               spec_kw={"spikes": spikes})
        res = residuals.kp_scalar_residual(fld).normalized_sup
        report.update({"det_r0": d0, "det_r1": d1, "anchor_dev": anchor_dev,
                       "imag_part": 0.0, "kp_residual": res})
        ok = (0.0 < d0 < d1 < 1.0) and anchor_dev < 1e-8
        worst = res if ok else float("inf")
        _write_csv(csv_path, ["quantity", "value"],
                   [(k, v) for k, v in report.items()
                    if isinstance(v, (int, float)) and k != "seed"])

    report["worst"] = float(worst)
    report["tolerance"] = cfg.tolerance
    report["passed"] = bool(worst <= cfg.tolerance)
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)
    return (0 if report["passed"] else 1), (csv_path, json_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kpdet", description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--quad-n", type=int, default=None)
    ap.add_argument("--tolerance", type=float, default=None)
    try:
        args = ap.parse_args(argv)
    except SystemExit:
        return 2
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.quad_n is not None:
        cfg.quad_n = args.quad_n
    if args.tolerance is not None:
        cfg.tolerance = args.tolerance
    code, paths = run(cfg)
    status = "pass" if code == 0 else "FAIL"
    print(f"{cfg.command}: {status}; artifacts: {paths[0]}, {paths[1]}")
    return code


if __name__ == "__main__":
    sys.exit(main())
