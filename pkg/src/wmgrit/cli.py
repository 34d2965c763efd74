"""Command-line harness: ``wmgrit solve | sweep | bound | heatmap | reproduce``.

Settings come from, in increasing priority: built-in defaults, the
``MGRIT_SEED`` environment variable (seed only), a ``--config`` file of
``key=value`` lines, and command-line flags.  Exit status is 0 on success,
1 on a configuration error and 2 on non-convergence under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import mgrit, oracle, theory
from .mgrit import RATE_METHODS, RelaxationSpec
from .problems import PROBLEM_IDS, build_problem
from .reference import TABLE_ALIASES, TABLE_IDS, load_table
from .timestepping import TABLEAU_NAMES, make_tableau

__all__ = [
    "ConfigError",
    "RunConfig",
    "SOLVE_FIELDS",
    "HEATMAP_FIELDS",
    "BOUND_FIELDS",
    "main",
    "parse_range",
    "weight_grid",
    "pick_best",
    "read_config_file",
]

SOLVE_FIELDS = ("problem", "nx", "nt", "m", "levels", "pattern", "wc", "wcc", "seed", "iters", "rate", "converged", "wall_s")
HEATMAP_FIELDS = ("re", "im", "bound")
BOUND_FIELDS = ("wc", "wcc", "bound", "method")
REPRODUCE_FIELDS = ("table", "row") + SOLVE_FIELDS[:-1] + ("ref_rate", "ref_iters", "iters_ok", "rate_ok")

DEFAULT_SEED = 42
DEFAULT_MAX_SIZE = 4_000_000
REPRODUCE_MAX_ITERS = 100
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


class ConfigError(ValueError):
    """Invalid command-line or config-file settings."""


# -- configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    problem: str = "heat1d"
    nx: int = 33
    nt: int = 65
    m: int = 2
    levels: int = 0
    relax: str = "FCF"
    wc: tuple = (1.0,)
    wcc: tuple = (1.0,)
    tableau: str = "backward-euler"
    seed: int = DEFAULT_SEED
    tol_scale: Optional[float] = None
    max_iters: Optional[int] = None
    rate_method: Optional[str] = None
    final_time: Optional[float] = None
    coarsest_max: int = 4
    out: Optional[str] = None
    format: str = "pretty"
    strict: bool = False

    def errors(self) -> list:
        errs = []
        if self.problem not in PROBLEM_IDS:
            errs.append(f"problem must be one of {', '.join(PROBLEM_IDS)}, got {self.problem!r}")
        if self.nx < 2 or self.nt < 2:
            errs.append(f"nx and nt must be >= 2, got nx={self.nx}, nt={self.nt}")
        if self.m < 2:
            errs.append(f"m must be >= 2, got {self.m}")
        if self.levels < 0 or self.levels == 1:
            errs.append(f"levels must be 0 (coarsen fully) or >= 2, got {self.levels}")
        if self.relax.upper() not in mgrit.PATTERNS:
            errs.append(f"relax must be one of {', '.join(p.lower() for p in mgrit.PATTERNS)}, got {self.relax!r}")
        if any(not w > 0 for w in self.wc):
            errs.append(f"wc weights must be > 0, got {','.join(map(str, self.wc))}")
        if any(not w > 0 for w in self.wcc):
            errs.append(f"wcc weights must be > 0, got {','.join(map(str, self.wcc))}")
        if self.tableau not in TABLEAU_NAMES:
            errs.append(f"tableau must be one of {', '.join(TABLEAU_NAMES)}, got {self.tableau!r}")
        if self.tol_scale is not None and not self.tol_scale > 0:
            errs.append(f"tol-scale must be > 0, got {self.tol_scale}")
        if self.max_iters is not None and self.max_iters < 0:
            errs.append(f"max-iters must be >= 0, got {self.max_iters}")
        if self.rate_method is not None and self.rate_method not in RATE_METHODS:
            errs.append(f"rate-method must be one of {', '.join(RATE_METHODS)}, got {self.rate_method!r}")
        if self.final_time is not None and not self.final_time > 0:
            errs.append(f"final-time must be > 0, got {self.final_time}")
        if self.coarsest_max < 2:
            errs.append(f"coarsest-max must be >= 2, got {self.coarsest_max}")
        if self.format not in ("csv", "pretty"):
            errs.append(f"format must be csv or pretty, got {self.format!r}")
        if self.m >= 2 and self.nt >= 2:
            sizes, bad = mgrit._hierarchy_sizes(self.nt, self.m, self.levels, self.coarsest_max)
            if bad is not None:
                best = mgrit.largest_valid_nt(self.nt, self.m, self.levels, self.coarsest_max)
                errs.append(
                    f"nt-1 = {bad - 1} is not divisible by m = {self.m} (level with nt = {bad}); "
                    f"largest valid nt <= {self.nt} is {best}"
                )
            elif len(sizes) < 2:
                errs.append(f"nt = {self.nt} leaves nothing to coarsen (coarsest-max = {self.coarsest_max})")
        return errs

    def validate(self) -> "RunConfig":
        errs = self.errors()
        if errs:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
        return self

    def build(self):
        kw = {} if self.final_time is None else {"final_time": self.final_time}
        return build_problem(self.problem, self.nx, self.nt, **kw)

    def spec(self) -> RelaxationSpec:
        return RelaxationSpec(self.relax.upper(), self.wc, self.wcc)

    def solve_kwargs(self, p) -> dict:
        kw = mgrit.family_defaults(p)
        for name in ("tol_scale", "max_iters", "rate_method"):
            if getattr(self, name) is not None:
                kw[name] = getattr(self, name)
        return kw


_INT_KEYS = {"nx", "nt", "m", "levels", "seed", "max_iters", "coarsest_max", "max_size", "steps", "re_steps", "im_steps", "dense_check"}
_FLOAT_KEYS = {"tol_scale", "final_time"}
_WEIGHT_KEYS = {"wc", "wcc"}
_BOOL_KEYS = {"strict"}


def _coerce(key: str, value):
    """Convert a raw string setting to its typed value."""
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _WEIGHT_KEYS:
            return tuple(float(v) for v in value.split(",") if v.strip())
        if key in _BOOL_KEYS:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value.strip()


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` settings; ``#`` starts a comment, dashes and underscores are interchangeable."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _env_seed():
    raw = os.environ.get("MGRIT_SEED")
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"MGRIT_SEED must be an integer, got {raw!r}") from None


def merge_settings(args: argparse.Namespace, allowed: Sequence[str]) -> dict:
    """Defaults < MGRIT_SEED < config file < flags, restricted to ``allowed`` keys."""
    merged = {}
    seed = _env_seed()
    if seed is not None:
        merged["seed"] = seed
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            if key not in allowed:
                raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(sorted(allowed))}")
            merged[key] = _coerce(key, value)
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = _coerce(key, value)
    return merged


def _run_config(args, extra_allowed=()) -> tuple:
    names = [f.name for f in fields(RunConfig)]
    settings = merge_settings(args, names + list(extra_allowed))
    base = {k: v for k, v in settings.items() if k in names}
    cfg = RunConfig(**base)
    return cfg, settings


# -- ranges and sweeps --------------------------------------------------------


def parse_range(text: str) -> np.ndarray:
    """``min:max:step`` (inclusive), or a single value, as rounded floats."""
    parts = [p.strip() for p in str(text).split(":")]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad range {text!r}; expected min:max:step") from None
    if len(nums) == 1:
        return np.array(nums)
    if len(nums) != 3:
        raise ConfigError(f"bad range {text!r}; expected min:max:step")
    lo, hi, step = nums
    if not step > 0 or hi < lo:
        raise ConfigError(f"empty range {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 10)


def weight_grid(wc_range: str, wcc_range: Optional[str], pattern: str) -> list:
    """Weight combinations in deterministic grid order: ``[(wc, wcc), ...]``."""
    wcs = parse_range(wc_range)
    wccs = parse_range(wcc_range) if (pattern == "FCFCF" and wcc_range) else np.array([1.0])
    return [(float(a), float(b)) for a in wcs for b in wccs]


def pick_best(records: Sequence[dict]) -> dict:
    """Record with the smallest rate among converged runs; ties go to smaller weights."""
    def key(rec):
        return (not rec["converged"], rec["rate"], rec["wc"], rec["wcc"])

    return min(records, key=key)


# -- output -------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ";".join(_fmt(float(v)) for v in value)
    return str(value)


def to_csv(records: Sequence[dict], columns: Sequence[str], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> list:
    """Inverse of :func:`to_csv` for the schemas used here."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for key, value in rec.items():
            if key in ("problem", "pattern", "method", "table", "row"):
                parsed[key] = value
            elif key in ("converged", "iters_ok", "rate_ok"):
                parsed[key] = {"true": True, "false": False}.get(value, None)
            elif key in ("nx", "nt", "m", "levels", "seed", "iters"):
                parsed[key] = int(value)
            elif key in ("wc", "wcc"):
                parsed[key] = tuple(float(v) for v in value.split(";"))
            elif key == "ref_iters":
                parsed[key] = value
            else:
                parsed[key] = float(value) if value else None
        out.append(parsed)
    return out


def _emit(text: str, out: Optional[str], append: bool = False, header_text: str = ""):
    if out:
        mode = "a" if append else "w"
        new = not os.path.exists(out) or os.path.getsize(out) == 0
        try:
            with open(out, mode) as fh:
                if append and new and header_text:
                    fh.write(header_text)
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc}") from None


def _solve_record(cfg: RunConfig, report) -> dict:
    return {
        "problem": cfg.problem,
        "nx": cfg.nx,
        "nt": cfg.nt,
        "m": cfg.m,
        "levels": cfg.levels,
        "pattern": cfg.relax.upper(),
        "wc": tuple(cfg.wc),
        "wcc": tuple(cfg.wcc),
        "seed": cfg.seed,
        "iters": report.iterations,
        "rate": float(report.rate),
        "converged": bool(report.converged),
        "wall_s": round(float(report.wall_time), 6),
    }


def _pretty_solve(rec: dict) -> str:
    w = _fmt(rec["wc"]) + ("" if rec["pattern"] != "FCFCF" else f" / wcc={_fmt(rec['wcc'])}")
    return (
        f"{rec['problem']} {rec['nx']}x{rec['nt']} m={rec['m']} levels={rec['levels'] or 'full'} "
        f"{rec['pattern']} wc={w} seed={rec['seed']}: iterations={rec['iters']} "
        f"rate={rec['rate']:.4f} converged={rec['converged']} ({rec['wall_s']:.2f} s)"
    )


# -- subcommands ----------------------------------------------------------------


def run_solve(cfg: RunConfig) -> dict:
    p = cfg.build()
    report = mgrit.solve(
        p,
        m=cfg.m,
        levels=cfg.levels,
        spec=cfg.spec(),
        seed=cfg.seed,
        coarsest_max=cfg.coarsest_max,
        tableau=make_tableau(cfg.tableau),
        **cfg.solve_kwargs(p),
    )
    return _solve_record(cfg, report)


def cmd_solve(args, stdout) -> int:
    cfg, _ = _run_config(args)
    cfg.validate()
    rec = run_solve(cfg)
    if cfg.format == "csv":
        stdout.write(to_csv([rec], SOLVE_FIELDS))
    else:
        stdout.write(_pretty_solve(rec) + "\n")
    _emit(to_csv([rec], SOLVE_FIELDS, header=False), cfg.out, append=True, header_text=",".join(SOLVE_FIELDS) + "\n")
    return EXIT_DIVERGED if cfg.strict and not rec["converged"] else EXIT_OK


def cmd_sweep(args, stdout) -> int:
    cfg, settings = _run_config(args, ("wc_range", "wcc_range"))
    wc_range = settings.get("wc_range")
    if not wc_range:
        raise ConfigError("sweep needs --wc-range min:max:step")
    grid = weight_grid(wc_range, settings.get("wcc_range"), cfg.relax.upper())
    cfg.validate()
    errs = [e for a, b in grid for e in replace(cfg, wc=(a,), wcc=(b,)).errors()]
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(dict.fromkeys(errs)))
    records = [run_solve(replace(cfg, wc=(a,), wcc=(b,))) for a, b in grid]
    best = pick_best(records)
    text = to_csv(records, SOLVE_FIELDS)
    if cfg.format == "csv":
        stdout.write(text)
    else:
        for rec in records:
            stdout.write(_pretty_solve(rec) + "\n")
        label = f"wc={best['wc'][0]:g}" + (f", wcc={best['wcc'][0]:g}" if cfg.relax.upper() == "FCFCF" else "")
        stdout.write(f"best: {label} rate={best['rate']:.4f} iterations={best['iters']}\n")
    _emit(text, cfg.out)
    return EXIT_DIVERGED if cfg.strict and not all(r["converged"] for r in records) else EXIT_OK


def _complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"bad complex number {text!r}") from None


def cmd_bound(args, stdout) -> int:
    allowed = ("lam", "mu", "problem", "nx", "nt", "m", "wc", "wcc", "relax", "tableau", "method", "final_time",
               "format", "out", "dense_check", "wc_range")
    s = merge_settings(args, allowed)
    pattern = str(s.get("relax", "FCF")).upper()
    if pattern not in ("FCF", "FCFCF"):
        raise ConfigError("bound supports relax fcf or fcfcf")
    method = s.get("method", "exact")
    if method not in ("exact", "approx"):
        raise ConfigError(f"method must be exact or approx, got {method!r}")
    m = int(s.get("m", 2))
    if m < 2:
        raise ConfigError("m must be >= 2")
    wcs = parse_range(s["wc_range"]) if s.get("wc_range") else np.array(s.get("wc", (1.0,))[:1])
    wcc = float(s.get("wcc", (1.0,))[0])
    fmt = s.get("format", "pretty")
    if any(not w > 0 for w in list(wcs) + [wcc]):
        raise ConfigError("weights must be > 0")

    explicit = "lam" in s or "mu" in s
    if explicit:
        if not ("lam" in s and "mu" in s):
            raise ConfigError("give both --lam and --mu, or a --problem")
        lam, mu = _complex(s["lam"]), _complex(s["mu"])
    else:
        kw = {} if s.get("final_time") is None else {"final_time": float(s["final_time"])}
        p = build_problem(s.get("problem", "heat1d"), int(s.get("nx", 33)), int(s.get("nt", 65)), **kw)
        tableau_name = s.get("tableau", "backward-euler")
        if tableau_name not in TABLEAU_NAMES:
            raise ConfigError(f"tableau must be one of {', '.join(TABLEAU_NAMES)}")
        lam_arr, mu_arr = theory.problem_eigenpairs(p, make_tableau(tableau_name), p.dt, m)

    records = []
    for wc in wcs:
        spec = RelaxationSpec(pattern, (float(wc),), (wcc,))
        try:
            if explicit:
                q = theory.BoundQuery(lam, mu, m, float(wc), wcc if pattern == "FCFCF" else None)
                if pattern == "FCF":
                    value = theory.fcf_bound_exact(q).value if method == "exact" else theory.fcf_bound_approx(q)
                else:
                    value = theory.fcfcf_bound_numeric(q).value if method == "exact" else theory.fcfcf_bound_approx(q)
            else:
                bad = np.nonzero((np.abs(mu_arr) >= 1) | (np.abs(lam_arr) >= 1))[0]
                if bad.size:
                    g = int(bad[0])
                    raise ValueError(f"mode gamma={g + 1} has |lambda|={abs(lam_arr[g]):.6g}, |mu|={abs(mu_arr[g]):.6g}")
                value = theory.modal_bound(lam_arr, mu_arr, m, spec, method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        label = {"exact": "exact-closed-form" if pattern == "FCF" else "numeric-scan", "approx": "approximate"}[method]
        records.append({"wc": (float(wc),), "wcc": (wcc,), "bound": float(value), "method": label})

    text = to_csv(records, BOUND_FIELDS)
    if fmt == "csv":
        stdout.write(text)
    else:
        for rec in records:
            stdout.write(f"wc={rec['wc'][0]:g} wcc={rec['wcc'][0]:g} bound={rec['bound']:.6g} ({rec['method']})\n")
    if explicit and s.get("dense_check"):
        n = int(s["dense_check"])
        for rec in records:
            wc = rec["wc"][0]
            if pattern == "FCF":
                mat = oracle.assemble_fcf_propagator(lam, mu, m, wc, n)
            else:
                mat = oracle.assemble_fcfcf_propagator(lam, mu, m, wc, wcc, n)
            stdout.write(f"  dense N_T={n}: sigma_max={oracle.spectral_norm(mat):.6g}\n")
    _emit(text, s.get("out"))
    return EXIT_OK


def _axis(text: str, steps: int, name: str):
    parts = str(text).split(":")
    try:
        if len(parts) == 2:
            return float(parts[0]), float(parts[1]), steps
        if len(parts) == 3:
            return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        pass
    raise ConfigError(f"bad {name} range {text!r}; expected min:max or min:max:steps")


def heatmap_records(scheme: str, m: int, wc: float, re_axis, im_axis) -> tuple:
    """Scan in plotted coordinates: ``re`` is ``-Re(z)`` so the decaying half-plane plots to the right."""
    lo, hi, n = re_axis
    grid = theory.heatmap_scan(make_tableau(scheme), m, wc, (-hi, -lo, n), im_axis)
    re_plot = -grid.re_values
    order = np.argsort(re_plot, kind="stable")
    records = []
    for i, im in enumerate(grid.im_values):
        for j in order:
            records.append({"re": float(re_plot[j]), "im": float(im), "bound": float(grid.values[i, j])})
    return records, grid


def cmd_heatmap(args, stdout) -> int:
    allowed = ("tableau", "m", "wc", "re", "im", "steps", "format", "out")
    s = merge_settings(args, allowed)
    scheme = s.get("tableau", "backward-euler")
    if scheme not in TABLEAU_NAMES:
        raise ConfigError(f"tableau must be one of {', '.join(TABLEAU_NAMES)}, got {scheme!r}")
    m = int(s.get("m", 2))
    wc = float(s.get("wc", (1.0,))[0])
    steps = int(s.get("steps", 50))
    if m < 2 or not wc > 0 or steps < 1:
        raise ConfigError("need m >= 2, wc > 0 and steps >= 1")
    re_axis = _axis(s.get("re", "0:10"), steps, "re")
    im_axis = _axis(s.get("im", "0:10"), steps, "im")
    if re_axis[1] < re_axis[0] or im_axis[1] < im_axis[0] or re_axis[2] < 1 or im_axis[2] < 1:
        raise ConfigError("heatmap ranges must satisfy min <= max with at least one step")
    records, grid = heatmap_records(scheme, m, wc, re_axis, im_axis)
    text = to_csv(records, HEATMAP_FIELDS)
    if s.get("format", "pretty") == "csv":
        stdout.write(text)
    else:
        vals = np.array([r["bound"] for r in records])
        valid = np.isfinite(vals)
        above = int(np.sum(vals[valid] > 1))
        stdout.write(
            f"{scheme} m={m} wc={wc:g}: {vals.size} cells, {int(valid.sum())} valid, "
            f"{above} with bound > 1"
            + (f", bound range [{vals[valid].min():.4g}, {vals[valid].max():.4g}]" if valid.any() else "")
            + "\n"
        )
    _emit(text, s.get("out"))
    return EXIT_OK


def reproduce_table(table_id: str, seed: int = DEFAULT_SEED, max_size: int = DEFAULT_MAX_SIZE, progress=None) -> tuple:
    """Run every cell of a reference table up to ``max_size`` unknowns; returns ``(table, records)``."""
    table = load_table(table_id)
    records = []
    for cell in table.cells:
        if cell.size > max_size:
            continue
        cfg = RunConfig(
            problem=cell.problem, nx=cell.nx, nt=cell.nt, m=cell.m, levels=cell.levels, relax=cell.pattern,
            wc=cell.wc, wcc=cell.wcc, seed=seed, max_iters=REPRODUCE_MAX_ITERS,
        ).validate()
        rec = run_solve(cfg)
        rec.pop("wall_s")
        rec.update(
            table=table.table_id,
            row=cell.row,
            ref_rate=cell.rate,
            ref_iters=str(cell.iters) if cell.iters is not None else f">{cell.iters_above}",
            iters_ok=cell.iters_match(rec["iters"], rec["converged"], table.iter_tolerance),
            rate_ok=cell.rate_match(rec["rate"]),
        )
        records.append(rec)
        if progress:
            progress(rec)
    return table, records


def _format_table(table, records) -> str:
    cols = table.columns
    found = {(r["row"], r["nx"], r["nt"]): r for r in records}
    head = ["row"] + [f"{nx}x{nt}" for nx, nt in cols]
    lines = [f"Table {table.table_id}: {table.title}", ""]
    body = []
    for row in table.rows:
        out = [row]
        for nx, nt in cols:
            rec = found.get((row, nx, nt))
            if rec is None:
                out.append("skipped")
                continue
            it = f"{rec['iters']}" if rec["converged"] else f">{rec['iters']}"
            ref = f"{rec['ref_rate']:.3f} ({rec['ref_iters']})" if rec["ref_rate"] is not None else f"({rec['ref_iters']})"
            mark = "ok" if rec["iters_ok"] else "DIFF"
            out.append(f"{rec['rate']:.3f} ({it}) vs {ref} {mark}")
        body.append(out)
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    for r in [head] + body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    n_ok = sum(r["iters_ok"] for r in records)
    lines.append("")
    lines.append(
        f"{n_ok}/{len(records)} cells within +-{table.iter_tolerance} iterations of the recorded values "
        f"(rates compared loosely, +-0.02); seed={records[0]['seed'] if records else '-'}"
    )
    return "\n".join(lines) + "\n"


def cmd_reproduce(args, stdout) -> int:
    if args.list:
        for tid in TABLE_IDS:
            stdout.write(f"{tid:>3}  {load_table(tid).title}\n")
        aliases = ", ".join(f"{k}={v}" for k, v in TABLE_ALIASES.items())
        stdout.write(f"aliases: {aliases}\n")
        return EXIT_OK
    if not args.table:
        raise ConfigError("reproduce needs a table id (see --list)")
    s = merge_settings(args, ("seed", "max_size", "format", "out", "strict"))
    seed = int(s.get("seed", DEFAULT_SEED))
    max_size = int(s.get("max_size", DEFAULT_MAX_SIZE))
    try:
        table, records = reproduce_table(args.table, seed, max_size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    text = to_csv(records, REPRODUCE_FIELDS)
    if s.get("format", "pretty") == "csv":
        stdout.write(text)
    else:
        stdout.write(_format_table(table, records))
        skipped = len(table.cells) - len(records)
        if skipped:
            stdout.write(f"{skipped} cells above --max-size {max_size} skipped\n")
    _emit(text, s.get("out"))
    return EXIT_DIVERGED if s.get("strict") and not all(r["converged"] for r in records) else EXIT_OK


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_common(p):
    p.add_argument("--config", help="key=value settings file (flags override it)")
    p.add_argument("--format", choices=("csv", "pretty"), default=None)
    p.add_argument("--out", help="write CSV output to this path")


def _add_run(p):
    p.add_argument("--problem", help=f"one of {', '.join(PROBLEM_IDS)}")
    p.add_argument("--nx", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--m", type=int, help="temporal coarsening factor")
    p.add_argument("--levels", type=int, help="number of levels; 0 coarsens until nt <= coarsest-max")
    p.add_argument("--relax", type=str.upper, help="f, fcf or fcfcf")
    p.add_argument("--wc", help="C-relaxation weights, comma-separated per level")
    p.add_argument("--wcc", help="second C-relaxation weights (fcfcf), comma-separated per level")
    p.add_argument("--tableau", "--scheme", dest="tableau", help=f"one of {', '.join(TABLEAU_NAMES)}")
    p.add_argument("--seed", type=int, help=f"initial-guess seed (default {DEFAULT_SEED}, or MGRIT_SEED)")
    p.add_argument("--tol-scale", dest="tol_scale", type=float, help="halt when ||r|| <= tol-scale / sqrt(hx dt)")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--rate-method", dest="rate_method", choices=RATE_METHODS)
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--coarsest-max", dest="coarsest_max", type=int)
    p.add_argument("--strict", action="store_const", const=True, default=None, help="exit 2 if any run fails to converge")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wmgrit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="run one MGRIT solve")
    _add_run(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="run a grid of relaxation weights")
    _add_run(p)
    _add_common(p)
    p.add_argument("--wc-range", dest="wc_range", help="min:max:step")
    p.add_argument("--wcc-range", dest="wcc_range", help="min:max:step (fcfcf only)")

    p = sub.add_parser("bound", help="two-level convergence bound")
    _add_common(p)
    p.add_argument("--lam", help="fine eigenvalue, e.g. 0.5+0.1j")
    p.add_argument("--mu", help="coarse eigenvalue")
    p.add_argument("--problem")
    p.add_argument("--nx", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--tableau", "--scheme", dest="tableau")
    p.add_argument("--m", type=int)
    p.add_argument("--relax", type=str.upper)
    p.add_argument("--wc")
    p.add_argument("--wcc")
    p.add_argument("--wc-range", dest="wc_range", help="min:max:step")
    p.add_argument("--method", choices=("exact", "approx"))
    p.add_argument("--dense-check", dest="dense_check", type=int, help="also report sigma_max of the N_T x N_T propagator")

    p = sub.add_parser("heatmap", help="bound over a grid of z = dt*kappa")
    _add_common(p)
    p.add_argument("--tableau", "--scheme", dest="tableau")
    p.add_argument("--m", type=int)
    p.add_argument("--wc")
    p.add_argument("--re", help="plotted real axis min:max[:steps]; samples z = -re + i*im")
    p.add_argument("--im", help="imaginary axis min:max[:steps]")
    p.add_argument("--steps", type=int, help="cells per axis when a range omits it (default 50)")

    p = sub.add_parser("reproduce", help="rerun a recorded convergence table")
    _add_common(p)
    p.add_argument("table", nargs="?", help=f"one of {', '.join(TABLE_IDS)} or an alias")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-size", dest="max_size", type=int, help=f"skip cells with nx*nt above this (default {DEFAULT_MAX_SIZE})")
    p.add_argument("--strict", action="store_const", const=True, default=None)
    p.add_argument("--list", action="store_true", help="list table ids")
    return parser


_COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "bound": cmd_bound, "heatmap": cmd_heatmap, "reproduce": cmd_reproduce}


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(stdout)
            return EXIT_CONFIG
        return _COMMANDS[args.command](args, stdout)
    except ConfigError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
