"""Command-line driver: read a run configuration, execute the requested tasks
and write ``summary.json``, ``summary.txt`` and per-task artifacts.

Configuration (INI; a JSON object with the same sections is also accepted)::

    [grid]
    x_max = 20
    n = 512
    scheme = uniform          ; or graded, with gamma = 3

    [profile]                 ; exactly one of [profile] / [half-density]
    form = exponential        ; zero | exponential | power | indicator | log-power
    c = 1
    d = 2

    [half-density]
    name = mobius             ; constant | mobius | shifted-power | log-power | delayed
    a = 1
    b = 2

    [tasks]
    run = build-kernel, verify, hs-curve, classify, riesz-compare, asymptotics

    [tolerances]
    c1 = 1e-4
    cocycle = 1e-4
    resolvent = 1e-3
    riesz = 0.1

    [output]
    dir = out

    [run]
    seed = 0

Task options live in sections named after the task, e.g. ``[hs-curve] t =
0.1, 0.5, 1`` or ``[riesz-compare] t = 1; ms = 8, 16, 24``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import re
import sys
import traceback
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classify as cl
from . import kernel as kn
from . import riesz as rz
from . import semigroup as sgp
from .numerics import Grid, probe_family
from .profiles import ProfileFunction

TASKS = ("build-kernel", "verify", "hs-curve", "classify", "riesz-compare", "asymptotics")
DEFAULT_TOL = {"c1": 1e-4, "cocycle": 1e-4, "resolvent": 1e-3, "riesz": 0.1}
PROFILE_KEYS = {"zero": (), "exponential": ("c", "d"), "power": ("alpha", "scale"),
                "indicator": ("a", "b"), "log-power": ("C", "beta")}
DENSITY_KEYS = {"constant": ("c",), "mobius": ("a", "b"), "shifted-power": ("alpha",),
                "log-power": ("alpha", "a"), "delayed": ("r", "a")}
TASK_OPTIONS = {
    "verify": {"t": "0.25, 0.5, 1", "st": "0.5, 0.5", "z": "3"},
    "hs-curve": {"t": "", "xs": "2, 4"},
    "classify": {"xs": "1, 2, 4"},
    "riesz-compare": {"t": "1", "ms": "8, 16, 24"},
    "asymptotics": {"t_min": "1e-3", "t_max": ""},
}
EXIT_OK, EXIT_TASK, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Invalid run configuration; the message names the section, key and line."""


@dataclass
class RunConfig:
    grid: Grid
    profile: Optional[ProfileFunction] = None
    density: Optional[dict] = None
    tasks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    out: str = "out"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def half_density(self) -> kn.HalfDensity:
        if self.profile is not None:
            return kn.half_density_from_profile(self.profile)
        d = dict(self.density)
        return kn.closed_form_density(d.pop("name"), **d)

    def source(self) -> dict:
        if self.profile is not None:
            return {"profile": self.profile.to_dict()}
        return {"half_density": {k: kn._jsonable(v) for k, v in self.density.items()}}


# ---------------------------------------------------------------------------
# parsing


def _line_of(text: str, section: str, key: Optional[str] = None) -> str:
    """``" (line N)"`` for a section header or a key inside it, if found."""
    if not text:
        return ""
    inside = False
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("["):
            inside = s.strip("[]").strip().lower() == section
            if inside and key is None:
                return f" (line {no})"
        elif inside and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return f" (line {no})"
    return ""


def _number(v: str):
    v = str(v).strip()
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return complex(v.replace(" ", ""))


def _numbers(v) -> list:
    if isinstance(v, (list, tuple)):
        return [_number(x) for x in v]
    return [_number(x) for x in str(v).replace(";", ",").split(",") if x.strip()]


def _load_sections(path: str) -> tuple:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError(f"{path}: JSON config must map section names to objects")
        return {k.lower(): {kk: v for kk, v in sec.items()} for k, sec in raw.items()}, ""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    return {s.lower(): dict(cp[s]) for s in cp.sections()}, text


def build_config(sections: dict, text: str = "") -> RunConfig:
    """Validate raw sections (strings or JSON values) into a ``RunConfig``."""
    def need(sec, key):
        if key not in sections.get(sec, {}):
            raise ConfigError(f"[{sec}] missing key '{key}'{_line_of(text, sec)}")
        return sections[sec][key]

    def bad(sec, key, why):
        return ConfigError(f"[{sec}] {key}: {why}{_line_of(text, sec, key)}")

    if "grid" not in sections:
        raise ConfigError("missing section [grid]")
    g = sections["grid"]
    x_max, n = need("grid", "x_max"), need("grid", "n")
    try:
        x_max = float(x_max)
    except (TypeError, ValueError):
        raise bad("grid", "x_max", "not a number") from None
    try:
        n = int(n)
    except (TypeError, ValueError):
        raise bad("grid", "n", "not an integer") from None
    scheme = str(g.get("scheme", "uniform")).strip()
    try:
        gamma = float(g.get("gamma", 3.0 if scheme == "graded" else 1.0))
        grid = Grid(x_max, n, scheme, gamma)
    except ValueError as e:
        raise ConfigError(f"[grid] {e}{_line_of(text, 'grid')}") from None

    has_p, has_d = "profile" in sections, "half-density" in sections
    if has_p == has_d:
        raise ConfigError("exactly one of [profile] and [half-density] must be present"
                          + (_line_of(text, "half-density") if has_d else ""))
    profile = density = None
    if has_p:
        sec = sections["profile"]
        form = str(need("profile", "form")).strip()
        if form not in PROFILE_KEYS:
            raise bad("profile", "form", f"unknown form {form!r} (choose from {', '.join(PROFILE_KEYS)})")
        vals = []
        for key in PROFILE_KEYS[form]:
            v = need("profile", key)
            try:
                vals.append(_number(v))
            except ValueError:
                raise bad("profile", key, "not a number") from None
        extra = set(sec) - set(PROFILE_KEYS[form]) - {"form"}
        if extra:
            raise bad("profile", sorted(extra)[0], f"not a parameter of the {form} profile")
        ctor = {"zero": ProfileFunction.zero, "exponential": ProfileFunction.exponential,
                "power": ProfileFunction.power, "indicator": ProfileFunction.indicator,
                "log-power": ProfileFunction.log_power}[form]
        try:
            profile = ctor(*vals)
        except ValueError as e:
            raise ConfigError(f"[profile] {e}{_line_of(text, 'profile')}") from None
    else:
        sec = sections["half-density"]
        name = str(need("half-density", "name")).strip()
        if name not in DENSITY_KEYS:
            raise bad("half-density", "name", f"unknown density {name!r}")
        density = {"name": name}
        for key, v in sec.items():
            if key == "name":
                continue
            if key not in DENSITY_KEYS[name]:
                raise bad("half-density", key, f"not a parameter of the {name} density")
            try:
                density[key] = _number(v)
            except ValueError:
                raise bad("half-density", key, "not a number") from None
        try:
            cfg_d = dict(density)
            kn.closed_form_density(cfg_d.pop("name"), **cfg_d)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"[half-density] invalid parameters: {e}{_line_of(text, 'half-density')}") from None

    tasks_raw = sections.get("tasks", {}).get("run", "")
    tasks = tasks_raw if isinstance(tasks_raw, list) else [t.strip() for t in str(tasks_raw).split(",") if t.strip()]
    for t in tasks:
        if t not in TASKS:
            raise bad("tasks", "run", f"unknown task {t!r} (choose from {', '.join(TASKS)})")

    tol = dict(DEFAULT_TOL)
    for key, v in sections.get("tolerances", {}).items():
        if key not in tol:
            raise bad("tolerances", key, "unknown tolerance")
        try:
            tol[key] = float(v)
        except (TypeError, ValueError):
            raise bad("tolerances", key, "not a number") from None
        if not tol[key] > 0:
            raise bad("tolerances", key, "must be positive")

    out = str(sections.get("output", {}).get("dir", "out"))
    try:
        seed = int(sections.get("run", {}).get("seed", 0))
    except (TypeError, ValueError):
        raise bad("run", "seed", "not an integer") from None

    options = {}
    for task, defaults in TASK_OPTIONS.items():
        sec = sections.get(task, {})
        for key in sec:
            if key not in defaults:
                raise bad(task, key, "unknown option")
        opts = {}
        for key, dv in defaults.items():
            v = sec.get(key, dv)
            try:
                opts[key] = _numbers(v)
            except ValueError:
                raise bad(task, key, "expected a comma-separated list of numbers") from None
        options[task] = opts

    cfg = RunConfig(grid, profile, density, tasks, tol, out, seed, options)
    validate_prerequisites(cfg, text)
    return cfg


def load_config(path: str) -> RunConfig:
    sections, text = _load_sections(path)
    return build_config(sections, text)


def _kernel_source(cfg: RunConfig) -> Optional[str]:
    """How the kernel of this configuration is obtained, or ``None`` if it is not available."""
    if cfg.profile is not None:
        return "profile"
    name = cfg.density["name"]
    if name == "mobius":
        return "profile"
    if name == "constant" and complex(cfg.density.get("c", 1.0)) == 1:
        return "profile"
    if name == "shifted-power":
        return "closed"
    return None


def validate_prerequisites(cfg: RunConfig, text: str = ""):
    needs_kernel = {"build-kernel", "verify", "hs-curve"} & set(cfg.tasks)
    if needs_kernel and _kernel_source(cfg) is None:
        raise ConfigError(f"task(s) {', '.join(sorted(needs_kernel))} need a kernel; "
                          f"the {cfg.density['name']} density has none on a grid{_line_of(text, 'tasks', 'run')}")
    phi = _profile_of(cfg)
    if "riesz-compare" in cfg.tasks:
        if phi is None or not phi.is_real:
            raise ConfigError("riesz-compare needs a real profile" + _line_of(text, "tasks", "run"))
        for t in cfg.options["riesz-compare"]["t"]:
            if not float(t) > 0:
                raise ConfigError("[riesz-compare] t: must be positive" + _line_of(text, "riesz-compare", "t"))
    if "asymptotics" in cfg.tasks:
        if phi is None:
            raise ConfigError("asymptotics needs a profile" + _line_of(text, "tasks", "run"))
        tmin = cfg.options["asymptotics"]["t_min"]
        if len(tmin) != 1 or not 0 < float(tmin[0]) < cfg.grid.x_max:
            raise ConfigError("[asymptotics] t_min: need one value in (0, x_max)"
                              + _line_of(text, "asymptotics", "t_min"))
    if "verify" in cfg.tasks:
        st = cfg.options["verify"]["st"]
        if len(st) != 2:
            raise ConfigError("[verify] st: need two values s, t" + _line_of(text, "verify", "st"))
        for t in cfg.options["verify"]["t"]:
            if not 0 <= float(t) <= cfg.grid.x_max / 2:
                raise ConfigError("[verify] t: values must lie in [0, x_max/2]" + _line_of(text, "verify", "t"))
    if "hs-curve" in cfg.tasks:
        for t in cfg.options["hs-curve"]["t"]:
            if not 0 <= float(t) <= cfg.grid.x_max:
                raise ConfigError("[hs-curve] t: values must lie in [0, x_max]" + _line_of(text, "hs-curve", "t"))


def _profile_of(cfg: RunConfig) -> Optional[ProfileFunction]:
    if cfg.profile is not None:
        return cfg.profile
    M = cfg.half_density()
    return M.profile


# ---------------------------------------------------------------------------
# tasks


class _Context:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._kernel = None

    def path(self, name: str) -> str:
        return os.path.join(self.cfg.out, name)

    @property
    def kernel(self) -> kn.PerturbationKernel:
        if self._kernel is None:
            cfg = self.cfg
            if _kernel_source(cfg) == "closed":
                self._kernel = kn.alpha_kernel(float(cfg.density["alpha"]), cfg.grid)
            else:
                self._kernel = kn.build_kernel(_profile_of(cfg), None, cfg.grid)
        return self._kernel

    @property
    def semigroup(self) -> sgp.PerturbedSemigroup:
        return sgp.PerturbedSemigroup(self.kernel)


def task_build_kernel(ctx: _Context) -> dict:
    k = ctx.kernel
    k.write(ctx.path("kernel.csv"), ctx.path("kernel.json"))
    return {"status": "ok", "rows": k.nrows, "sup_norm": k.sup_norm(), "growth": k.growth,
            "files": ["kernel.csv", "kernel.json"]}


def task_verify(ctx: _Context) -> dict:
    cfg, sg = ctx.cfg, ctx.semigroup
    tol = cfg.tolerances
    opts = cfg.options["verify"]
    rows = []
    for t in opts["t"]:
        r = sgp.verify_C1(sg, float(t), seed=cfg.seed)
        rows.append(("C1", f"t={float(t):g}", r["residual"], tol["c1"]))
    s, t = map(float, opts["st"])
    fam = probe_family(cfg.grid, cfg.seed)
    worst = max(sgp.semigroup_residual(sg, s, t, f) for f in fam)
    rows.append(("cocycle", f"s={s:g},t={t:g}", worst, tol["cocycle"]))
    M = cfg.half_density()
    if M.profile is not None or M.q_closed is not None:
        for z in opts["z"]:
            z = complex(z)
            r = sgp.resolvent_check(sg, M, z, fam[0], growth=ctx.kernel.growth)
            rows.append(("resolvent", f"z={z.real:g}{z.imag:+g}j", r["residual"] + r["tail_bound"], tol["resolvent"]))
    with open(ctx.path("verify.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "at", "residual", "tolerance", "pass"])
        for name, at, res, tl in rows:
            w.writerow([name, at, f"{res:.6e}", f"{tl:.1e}", res < tl])
    checks = [{"check": a, "at": b, "residual": c, "tolerance": d, "pass": bool(c < d)} for a, b, c, d in rows]
    ok = all(c["pass"] for c in checks)
    return {"status": "ok" if ok else "fail", "checks": checks, "files": ["verify.csv"]}


def task_hs_curve(ctx: _Context) -> dict:
    cfg = ctx.cfg
    opts = cfg.options["hs-curve"]
    x = ctx.kernel.x
    ts = np.array([float(v) for v in opts["t"]]) if opts["t"] else x[x <= x[-1] / 2]
    curve = sgp.hs_curve(ctx.semigroup, ts, [float(v) for v in opts["xs"]])
    curve.write(ctx.path("hs_curve.csv"), ctx.path("hs_curve.json"))
    return {"status": "ok", "points": int(ts.size),
            "small_t_exponent": curve.exponent if np.isfinite(curve.exponent) else None,
            "laplace_stieltjes": [[float(a), float(b)] for a, b in zip(curve.laplace_x, curve.laplace_value)],
            "files": ["hs_curve.csv", "hs_curve.json"]}


def task_classify(ctx: _Context) -> dict:
    cfg = ctx.cfg
    rep = cl.classify(cfg.half_density(), tuple(float(v) for v in cfg.options["classify"]["xs"]), _profile_of(cfg))
    rep.to_json(ctx.path("classify.json"))
    with open(ctx.path("classify.txt"), "w") as fh:
        fh.write(rep.summary_table() + "\n")
    return {"status": "ok", "verdicts": {k: v.status for k, v in sorted(rep.verdicts.items())},
            "files": ["classify.json", "classify.txt"]}


def task_riesz(ctx: _Context) -> dict:
    cfg = ctx.cfg
    opts = cfg.options["riesz-compare"]
    phi = _profile_of(cfg)
    out, ok = [], True
    with open(ctx.path("riesz.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m", "subspace_hs", "kernel_hs"])
        for t in opts["t"]:
            c = rz.compare_with_kernel_hs(phi, float(t), [int(m) for m in opts["ms"]])
            for m, v in c.m_trace:
                w.writerow([f"{float(t):g}", m, f"{v:.12g}", f"{c.kernel_value:.12g}"])
            d = c.to_dict()
            ok &= c.status == "ok" and (c.relative_gap <= cfg.tolerances["riesz"] or
                                        (c.kernel_value == 0 and c.relative_gap < 1e-6))
            out.append(d)
    return {"status": "ok" if ok else "fail", "comparisons": out, "files": ["riesz.csv"]}


def task_asymptotics(ctx: _Context) -> dict:
    cfg = ctx.cfg
    opts = cfg.options["asymptotics"]
    t_min = float(opts["t_min"][0])
    t_max = float(opts["t_max"][0]) if opts["t_max"] else None
    try:
        res = cl.small_t_study(_profile_of(cfg), cfg.grid, t_min, t_max)
    except cl.UnsupportedCaseError as e:
        return {"status": "inconclusive", "reason": str(e)}
    with open(ctx.path("asymptotics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "hs_sq", "predicted"])
        for row in zip(res["t"], res["hs_sq"], res["predicted"]):
            w.writerow([f"{v:.17g}" for v in row])
    return {"status": "ok", "law": res["law"], "fit": res["fit"], "files": ["asymptotics.csv"]}


RUNNERS = {"build-kernel": task_build_kernel, "verify": task_verify, "hs-curve": task_hs_curve,
           "classify": task_classify, "riesz-compare": task_riesz, "asymptotics": task_asymptotics}


def _summary_text(summary: dict) -> str:
    lines = [f"source: {json.dumps(summary['source'], sort_keys=True)}",
             f"grid: {json.dumps(summary['grid'], sort_keys=True)}", ""]
    for name in summary["task_order"]:
        r = summary["tasks"][name]
        lines.append(f"{name:<16}{r['status']}")
        if "error" in r:
            lines.append(f"    error: {r['error']}")
        for c in r.get("checks", []):
            lines.append(f"    {c['check']:<10}{c['at']:<14}{cl._fmt(c['residual']):<12}  (tol {c['tolerance']:.0e})")
        for k, v in sorted(r.get("verdicts", {}).items()):
            lines.append(f"    {k:<26}{v}")
        for c in r.get("comparisons", []):
            trace = ", ".join(f"m={m}: {v:.6f}" for m, v in c["m_trace"])
            lines.append(f"    t={c['t']:g}  kernel {c['kernel_value']:.6f}  {trace}  gap {c['relative_gap']:.2%}")
        if "fit" in r:
            f = r["fit"]
            lines.append("    " + ", ".join(f"{k}={cl._fmt(v)}" for k, v in sorted(f.items())
                                            if not isinstance(v, (list, dict))))
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> int:
    """Run every task in order; returns the exit status."""
    os.makedirs(cfg.out, exist_ok=True)
    ctx = _Context(cfg)
    results, failed = {}, False
    for name in cfg.tasks:
        try:
            with np.errstate(all="ignore"):
                r = RUNNERS[name](ctx)
        except Exception as e:  # collected, remaining tasks still run
            r = {"status": "error", "error": f"{type(e).__name__}: {e}"}
            if os.environ.get("SHIFTPERT_DEBUG"):
                traceback.print_exc()
        failed |= r["status"] in ("error", "fail")
        results[name] = cl._clean(r)
    summary = {"source": cfg.source(), "grid": cfg.grid.to_dict(), "seed": cfg.seed,
               "tolerances": cfg.tolerances, "task_order": list(cfg.tasks), "tasks": results,
               "status": "fail" if failed else "ok"}
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = _summary_text(summary)
    with open(os.path.join(cfg.out, "summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_TASK if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def _source_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration overrides")
    g.add_argument("--config", help="INI or JSON run configuration")
    g.add_argument("--x-max", type=float, dest="x_max")
    g.add_argument("--n", type=int)
    g.add_argument("--scheme", choices=("uniform", "graded"))
    g.add_argument("--gamma", type=float)
    g.add_argument("--profile", metavar="FORM", help="profile form, parameters via --param")
    g.add_argument("--half-density", metavar="NAME", dest="half_density",
                   help="closed-form half-density, parameters via --param")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="profile or half-density parameter (repeatable)")


def _globals(p: argparse.ArgumentParser):
    p.add_argument("--tol", action="append", default=[], metavar="[NAME=]VALUE",
                   help="tolerance override; a bare value sets every tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed of the test-function family")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftpert", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the tasks listed in a configuration file")
    r.add_argument("config")
    _globals(r)
    opts = {"verify": [("--t", "t"), ("--st", "st"), ("--z", "z")],
            "hs-curve": [("--t", "t"), ("--xs", "xs")],
            "classify": [("--xs", "xs")],
            "riesz-compare": [("--t", "t"), ("--ms", "ms")],
            "asymptotics": [("--t-min", "t_min"), ("--t-max", "t_max")]}
    helps = {"verify": "C1, cocycle and resolvent residuals",
             "hs-curve": "Hilbert-Schmidt curve and Laplace-Stieltjes values",
             "classify": "membership verdicts for the half-density",
             "riesz-compare": "subspace-geometry side against the kernel HS norm",
             "asymptotics": "small-t law of the HS curve"}
    for verb, flags in opts.items():
        s = sub.add_parser(verb, help=helps[verb])
        _source_flags(s)
        _globals(s)
        for flag, key in flags:
            s.add_argument(flag, dest=f"opt_{key}", metavar="LIST", help=f"[{verb}] {key} (comma-separated)")
    return p


def _sections_from_args(a) -> tuple:
    if getattr(a, "config", None):
        sections, text = _load_sections(a.config)
    else:
        sections, text = {}, ""
    sections = {k: dict(v) for k, v in sections.items()}
    if a.verb != "run":
        g = sections.setdefault("grid", {})
        for key in ("x_max", "n", "scheme", "gamma"):
            v = getattr(a, key, None)
            if v is not None:
                g[key] = v
        g.setdefault("x_max", 20.0)
        g.setdefault("n", 512)
        params = {}
        for item in a.param:
            if "=" not in item:
                raise ConfigError(f"--param {item!r}: expected KEY=VALUE")
            k, v = item.split("=", 1)
            params[k.strip()] = v.strip()
        if a.profile and a.half_density:
            raise ConfigError("exactly one of --profile and --half-density may be given")
        if a.profile:
            sections.pop("half-density", None)
            sections["profile"] = {"form": a.profile, **params}
        elif a.half_density:
            sections.pop("profile", None)
            sections["half-density"] = {"name": a.half_density, **params}
        elif params:
            key = "profile" if "profile" in sections else "half-density"
            sections.setdefault(key, {}).update(params)
        sections["tasks"] = {"run": a.verb}
        opt = sections.setdefault(a.verb, {})
        for k, v in vars(a).items():
            if k.startswith("opt_") and v is not None:
                opt[k[4:]] = v
    tol = sections.setdefault("tolerances", {})
    for item in a.tol:
        if "=" in item:
            k, v = item.split("=", 1)
            tol[k.strip()] = v.strip()
        else:
            for k in DEFAULT_TOL:
                tol[k] = item
    if a.out:
        sections.setdefault("output", {})["dir"] = a.out
    if a.seed is not None:
        sections.setdefault("run", {})["seed"] = a.seed
    return sections, text


def main(argv=None) -> int:
    parser = make_parser()
    a = parser.parse_args(argv)
    try:
        sections, text = _sections_from_args(a)
        cfg = build_config(sections, text)
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return EXIT_CONFIG
    if not cfg.tasks:
        sys.stderr.write("config error: [tasks] run lists no tasks\n")
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
