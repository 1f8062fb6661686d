"""``qcreg`` command line: reproducible experiments writing JSON, CSV and BFLD1 files.

Every subcommand takes ``--config FILE.json`` plus flags; a flag that is
given overrides the config entry of the same name.  Outputs go to
``--out`` (default ``out``), guarded by a lockfile, and each one carries
the library version and a hash of the effective config (output directory
excluded), so identical configs give byte-identical files.

Exit codes: 0 ok, 1 mathematical failure (non-convergence, failed
check), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io as _io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .beltrami import (
    BeltramiCoefficient,
    ConvergenceError,
    beltrami_residual,
    bump_profile,
    distortion_report,
    solve_h,
)
from .domains import (
    BallBump,
    Disk,
    DomainMask,
    Rectangle,
    bump_bound,
    commutator,
    corner_scan,
    holder_constant,
    log_lipschitz_constant,
    meyer_decomposition,
    shape_from_json,
    t_chi,
)
from .grid import Field, make_grid, sample
from .io import write_bfld, write_pgm, write_png
from .oracles import lookup
from .spaces import (
    CSV_COLUMNS,
    besov_domain_norm,
    besov_norm,
    lorentz_norm,
    riesz_potential_space_norm,
    sobolev_domain_norm,
    sobolev_norm,
    triebel_norm,
    w1p_domain_scan,
)
from .transforms import beurling_kernel, cos2_kernel

EXIT_OK, EXIT_MATH, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class MathFailure(Exception):
    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


# --------------------------------------------------------------------------
# coefficient specs


def _parse_number(text: str):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        try:
            return complex(text.replace(" ", ""))
        except ValueError:
            raise UsageError(f"not a number: {text!r}") from None


_GENERATORS = {
    "zero": {},
    "disk": {"k": None, "radius": 1.0, "center": 0j},
    "bump": {"k": None, "radius": 1.0, "smoothness": 1.0, "center": 0j, "phase": 0.0},
}


def parse_mu_spec(spec: str) -> list[tuple[str, dict]]:
    """``"disk:k=0.5"``, ``"bump:k=0.3,radius=1.5"``, ``"zero"``; ``;`` joins a composite sum."""
    parts = [p.strip() for p in str(spec).split(";") if p.strip()]
    if not parts:
        raise UsageError("empty coefficient spec")
    out = []
    for part in parts:
        name, _, rest = part.partition(":")
        name = name.strip()
        if name not in _GENERATORS:
            raise UsageError(f"unknown coefficient generator {name!r}")
        params = dict(_GENERATORS[name])
        for item in filter(None, (x.strip() for x in rest.split(","))):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in params:
                raise UsageError(f"bad parameter {item!r} for {name}")
            params[key] = _parse_number(val)
        if name != "zero":
            k = params["k"]
            if k is None:
                raise UsageError(f"{name} needs k")
            if isinstance(k, complex) or not 0 <= k < 1:
                raise UsageError(f"k must lie in [0, 1), got {k}")
            if not isinstance(params["radius"], float) or params["radius"] <= 0:
                raise UsageError("radius must be a positive real")
            params["center"] = complex(params["center"])
        out.append((name, params))
    return out


def build_mu(spec: str, grid) -> BeltramiCoefficient:
    total = np.zeros((grid.N, grid.N), dtype=np.complex128)
    z = grid.z
    for name, prm in parse_mu_spec(spec):
        if name == "disk":
            total += prm["k"] * (np.abs(z - prm["center"]) < prm["radius"])
        elif name == "bump":
            if not 0 < prm["smoothness"] <= 1:
                raise UsageError("smoothness must lie in (0, 1]")
            prof = bump_profile(np.abs(z - prm["center"]), prm["radius"], prm["smoothness"])
            total += prm["k"] * np.exp(1j * prm["phase"]) * prof
    try:
        return BeltramiCoefficient(Field(grid, total))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _is_smooth(spec: str) -> bool:
    return all(name in ("zero", "bump") for name, _ in parse_mu_spec(spec))


# --------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    experiment: str
    N: int = 256
    L: float = 8.0
    mu: str = "zero"
    spaces: list = field(default_factory=list)
    tol: float = 1e-10
    max_iter: int | None = None
    seed: int = 0
    out: str = "out"
    options: dict = field(default_factory=dict)

    def validate(self):
        try:
            make_grid(int(self.N), float(self.L))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        parse_mu_spec(self.mu)
        if not self.tol > 0:
            raise UsageError("tol must be positive")
        if self.max_iter is not None and int(self.max_iter) < 1:
            raise UsageError("max_iter must be >= 1")
        for sp in self.spaces:
            if len(sp) != 3:
                raise UsageError(f"space triple expected, got {sp!r}")

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(_jsonable(self.canonical()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def grid(self):
        return make_grid(int(self.N), float(self.L))


_TOP_LEVEL = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"experiment", "options"}


def load_config(experiment: str, path, overrides: dict) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    options = dict(data.pop("options", {}) or {})
    data.pop("experiment", None)
    unknown = set(data) - _TOP_LEVEL
    options.update({k: data.pop(k) for k in unknown})
    for key, val in overrides.items():
        if val is None:
            continue
        if key in _TOP_LEVEL:
            data[key] = val
        else:
            options[key] = val
    cfg = ExperimentConfig(experiment=experiment, options=options, **data)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# outputs


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(float(obj.real)), _jsonable(float(obj.imag))]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


class Output:
    def __init__(self, cfg: ExperimentConfig, images: str | None = None):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.images = images
        self.files: list[str] = []

    @property
    def stamp(self):
        return {"qcreg_version": __version__, "config_hash": self.cfg.hash}

    def json(self, name, payload):
        doc = dict(self.stamp)
        doc["config"] = self.cfg.canonical()
        doc["experiment"] = self.cfg.experiment
        doc["result"] = payload
        (self.dir / name).write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")
        self.files.append(name)

    def csv(self, name, header, rows):
        buf = _io.StringIO()
        buf.write(f"# qcreg_version={__version__} config_hash={self.cfg.hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        (self.dir / name).write_text(buf.getvalue())
        self.files.append(name)

    def field(self, name, f: Field):
        path = self.dir / f"{name}.bfld"
        write_bfld(path, f)
        meta = dict(self.stamp)
        meta.update({"N": f.grid.N, "L": f.grid.L, "format": "BFLD1"})
        (self.dir / f"{name}.bfld.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
        self.files += [f"{name}.bfld", f"{name}.bfld.json"]
        if self.images == "pgm":
            write_pgm(self.dir / f"{name}.pgm", f)
        elif self.images == "png":
            write_png(self.dir / f"{name}.png", f)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _floats(text, name):
    if isinstance(text, (list, tuple)):
        vals = list(text)
    else:
        vals = [t for t in str(text).split(",") if t.strip()]
    try:
        out = [float(v) for v in vals]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers") from None
    if not out:
        raise UsageError(f"{name}: empty list")
    return out


def _ints(text, name):
    vals = _floats(text, name)
    if any(v != int(v) for v in vals):
        raise UsageError(f"{name}: expected integers")
    return [int(v) for v in vals]


def _spaces(text):
    if isinstance(text, list):
        return [tuple(float(x) for x in t) for t in text]
    out = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            vals = _floats(chunk, "spaces")
            if len(vals) != 3:
                raise UsageError("spaces: each entry is s,p,q")
            out.append(tuple(vals))
    return out


def _domain(opt, default):
    spec = opt.get("domain", default)
    try:
        return shape_from_json(spec)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad domain descriptor: {exc}") from None


def _kernel(name):
    kernels = {"beurling": beurling_kernel, "cos2": cos2_kernel}
    if name not in kernels:
        raise UsageError(f"unknown kernel {name!r}")
    return kernels[name]()


# --------------------------------------------------------------------------
# commands


def cmd_solve(cfg: ExperimentConfig, out: Output) -> int:
    grid = cfg.grid
    mu = build_mu(cfg.mu, grid)
    try:
        sol = solve_h(mu, tol=cfg.tol, max_iter=cfg.max_iter)
    except ConvergenceError as exc:
        raise MathFailure(str(exc), {"last_residual": exc.last_residual, "residuals": exc.residuals}) from None
    out.field("h", sol.h)
    out.field("displacement", sol.displacement)
    out.json("report.json", {
        "k": mu.k,
        "N": grid.N,
        "L": grid.L,
        "iterations": sol.iterations,
        "residuals": list(sol.residuals),
        "beltrami_residual": beltrami_residual(sol),
        "distortion": distortion_report(sol),
    })
    return EXIT_OK


def _space_norm(family, f, s, p, q):
    if family == "besov":
        return besov_norm(f, s, p, q)
    if family == "triebel":
        return triebel_norm(f, s, p, q)
    raise UsageError(f"unknown family {family!r}")


def cmd_regularity_transfer(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    if not _is_smooth(cfg.mu):
        raise UsageError("regularity-transfer takes smooth coefficient generators only (bump, zero)")
    Ns = _ints(opt.get("Ns", [256, 512, 1024]), "Ns")
    spaces = _spaces(cfg.spaces or opt.get("spaces_text") or [[1.5, 2, 2], [0.8, 4, 4]])
    family = opt.get("family", "besov")
    rows, ratios = [], {}
    for N in Ns:
        grid = make_grid(N, cfg.L)
        mu = build_mu(cfg.mu, grid)
        try:
            sol = solve_h(mu, tol=cfg.tol, max_iter=cfg.max_iter)
        except ConvergenceError as exc:
            raise MathFailure(str(exc), {"last_residual": exc.last_residual}) from None
        for s, p, q in spaces:
            mn = _space_norm(family, mu.field, s, p, q)
            hn = _space_norm(family, sol.h, s, p, q)
            ratio = hn / mn if mn > 0 else "NA"
            flag = "" if s * p > 2 else "outside theorem hypothesis"
            rows.append((cfg.mu, s, p, q, N, mn, hn, ratio, flag))
            ratios.setdefault((s, p, q), []).append(ratio)
    out.csv("transfer.csv", ("generator", "s", "p", "q", "N", "mu_norm", "h_norm", "ratio", "flag"), rows)
    summary, ok = [], True
    for (s, p, q), rs in ratios.items():
        nums = [r for r in rs if r != "NA"]
        if nums:
            ref = nums[-1]
            spread = max(abs(r - ref) / ref for r in nums)
            stable = spread <= 0.25
        else:
            spread, stable = None, True
        if s * p > 2 and not stable:
            ok = False
        summary.append({"s": s, "p": p, "q": q, "ratios": rs, "max_relative_spread": spread,
                        "stable": stable, "in_hypothesis": s * p > 2})
    out.json("summary.json", {"family": family, "Ns": Ns, "rows": summary})
    return EXIT_OK if ok else EXIT_MATH


def cmd_corner(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    p_list = _floats(opt.get("p", [1.5, 2.0, 2.5]), "p")
    rect = _domain(opt, {"type": "rectangle", "corners": [[-0.5, -0.5], [0.5, 0.5]]})
    if not isinstance(rect, Rectangle):
        raise UsageError("corner needs a rectangle domain")
    Ns = _ints(opt.get("Ns", [128, 256, 512, 1024]), "Ns")
    try:
        scan = corner_scan(rect, p_list, L=opt.get("grid_L"), Ns=Ns)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [(r["p"], r["N"], r["value"], r["class"]) for r in scan.as_rows()]
    out.csv("corner.csv", ("p", "N", "value", "class"), rows)
    out.json("report.json", {"last_ratio": {str(p): r for p, r in scan.last_ratio.items()},
                             "classification": {str(p): c for p, c in scan.classification.items()},
                             "threshold": scan.threshold, "domain": rect.to_json()})
    return EXIT_OK


_DOMAIN_FUNCTIONS = ("x1-on-square", "jump-on-square", "const-on-square")
_GLOBAL_FUNCTIONS = ("gaussian",)


def _square_setup(n):
    """Unit square covered by exactly ``n x n`` cells and centred at ``c``."""
    grid = make_grid(2 * n, 2.0)
    c = -0.5 * grid.h
    return grid, DomainMask(grid, Rectangle(-0.5 + c, -0.5 + c, 0.5 + c, 0.5 + c)), c


def cmd_norms(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    fid = opt.get("f", "x1-on-square")
    space = opt.get("space", "besov")
    s = float(opt.get("s", 0.5))
    p = float(opt.get("p", 2.0))
    q = float(opt.get("q", p))
    rows, extra = [], {}
    if fid in _DOMAIN_FUNCTIONS:
        n = int(opt.get("n", 64))
        if n < 2 or n & (n - 1):
            raise UsageError("n must be a power of two >= 2")
        grid, omega, c = _square_setup(n)
        fn = {"x1-on-square": lambda x, y: x - c,
              "jump-on-square": lambda x, y: 1.0 * (x - c > 0),
              "const-on-square": lambda x, y: 1.0 + 0 * x}[fid]
        f = sample(grid, fn)
        kw = {"max_sources": int(opt.get("max_sources", 4096)), "seed": cfg.seed}
        if space == "besov":
            est = besov_domain_norm(f, omega, s, p, **kw)
        elif space == "sobolev":
            est = sobolev_domain_norm(f, omega, s, p, **kw)
        elif space == "w1p":
            alphas = _floats(opt.get("alphas", [0.5, 0.45, 0.4]), "alphas")
            scan = w1p_domain_scan(f, omega, p, alphas, **kw)
            for a, v in scan.as_rows():
                rows.append((fid, "w1p", a, p, p, grid.N, v, scan.cutoff, 0.0))
            extra = {"stabilized": scan.stabilized}
            est = None
        elif space == "lorentz":
            v = lorentz_norm(np.where(omega.chi, f.samples, 0), p, q, grid.cell_area)
            rows.append((fid, "lorentz", 0.0, p, q, grid.N, v, 0.0, 0.0))
            est = None
        else:
            raise UsageError(f"space {space!r} is not available on domains")
        if est is not None:
            rows.append((fid, space, s, p, p, grid.N, est.value, est.cutoff, est.variance))
            ref = lookup(fid, space, s, p)
            if ref is not None:
                extra = {"oracle": ref, "relative_error": abs(est.value - ref) / ref}
    elif fid in _GLOBAL_FUNCTIONS:
        grid = cfg.grid
        f = sample(grid, lambda x, y: np.exp(-(x * x + y * y)))
        if space in ("besov", "triebel"):
            v = (besov_norm if space == "besov" else triebel_norm)(f, s, p, q)
        elif space == "sobolev":
            v, q = sobolev_norm(f, s, p), 2.0
        elif space == "lorentz":
            v, s = lorentz_norm(f, p, q), 0.0
        elif space == "riesz":
            if s != 1:
                raise UsageError("riesz norm of the gaussian uses s = alpha = 1 (mean is nonzero)")
            v, p, q = riesz_potential_space_norm(f, 1.0), 2.0, 1.0
        else:
            raise UsageError(f"unknown space {space!r}")
        rows.append((fid, space, s, p, q, grid.N, v, 0.0, 0.0))
    else:
        raise UsageError(f"unknown function id {fid!r}")
    out.csv("norms.csv", CSV_COLUMNS, rows)
    out.json("report.json", {"rows": [dict(zip(CSV_COLUMNS, r)) for r in rows], **extra})
    return EXIT_OK


def cmd_tchi(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    shape = _domain(opt, {"type": "disk", "radius": 1.0})
    K = _kernel(opt.get("kernel", "beurling"))
    ring = float(opt.get("ring_cells", 2.0))
    omega = DomainMask(cfg.grid, shape)
    try:
        F = t_chi(K, omega)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    inner = omega.interior(ring)
    report = {
        "domain": shape.to_json(),
        "kernel": K.name,
        "excluded_ring_cells": ring,
        "interior_sup": float(np.abs(F.samples[inner]).max()) if inner.any() else None,
    }
    expo = opt.get("holder_exponent")
    if expo is not None:
        report["holder_exponent"] = float(expo)
        report["holder_constant"] = holder_constant(F, inner, float(expo), 0.25 * shape.diameter)
    if isinstance(shape, Disk) and K.name == "beurling":
        probes = shape.center + shape.radius * np.array([1.5, 1.75j, -2.0, 1.25 + 1.25j])
        probes = probes[np.abs(probes - shape.center) < 0.5 * cfg.L - shape.radius]
        if probes.size:
            vals = t_chi(K, omega, points=probes)
            exact = -shape.radius**2 / (probes - shape.center) ** 2
            report["exterior_probe_error"] = float(np.abs(vals - exact).max())
    out.field("tchi", F)
    out.json("report.json", report)
    return EXIT_OK


def _default_balls(shape, radii):
    balls = []
    for r in radii:
        if hasattr(shape, "boundary"):
            p, n = shape.boundary(np.array([0.0, 0.125, 0.25, 0.375]))
            for pt, nv in zip(p, n):
                balls += [BallBump(complex(pt), r), BallBump(complex(pt - 0.5 * r * nv), r)]
        center = getattr(shape, "center", 0j)
        balls.append(BallBump(complex(center), r))
    return balls


def cmd_bump_bound(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    shape = _domain(opt, {"type": "disk", "radius": 1.0})
    radii = _floats(opt.get("radii", [0.4, 0.2, 0.1, 0.05]), "radii")
    K = _kernel(opt.get("kernel", "beurling"))
    omega = DomainMask(cfg.grid, shape)
    try:
        rep = bump_bound(K, omega, _default_balls(shape, radii))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.json("report.json", {"domain": shape.to_json(), "kernel": K.name, **rep.as_dict()})
    return EXIT_MATH if rep.upward_trend else EXIT_OK


def cmd_commutator(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    shape = _domain(opt, {"type": "disk", "radius": 1.0})
    Ns = _ints(opt.get("Ns", [cfg.N]), "Ns")
    consts = []
    for N in Ns:
        grid = make_grid(N, cfg.L)
        mu = build_mu(cfg.mu, grid)
        omega = DomainMask(grid, shape)
        F = commutator(mu.field, Field(grid, omega.weights))
        consts.append(log_lipschitz_constant(F, omega.away(2.0), shape.diameter))
        if N == Ns[-1]:
            out.field("commutator", F)
    out.json("report.json", {"domain": shape.to_json(), "diameter": shape.diameter, "Ns": Ns,
                             "log_lipschitz_constant": consts, "excluded_ring_cells": 2.0})
    return EXIT_OK


def _random_smooth(grid, rng, n_bumps=5):
    vals = np.zeros((grid.N, grid.N), dtype=np.complex128)
    for _ in range(n_bumps):
        c = complex(*rng.uniform(-1.0, 1.0, 2))
        w = rng.uniform(0.2, 0.6)
        a = complex(*rng.normal(size=2))
        vals += a * np.exp(-np.abs(grid.z - c) ** 2 / w**2)
    return Field(grid, vals)


def cmd_decomposition_check(cfg: ExperimentConfig, out: Output) -> int:
    opt = cfg.options
    shape = _domain(opt, {"type": "disk", "radius": 1.0})
    K = _kernel(opt.get("kernel", "beurling"))
    n_pairs = int(opt.get("pairs", 20))
    omega = DomainMask(cfg.grid, shape)
    rng = np.random.default_rng(cfg.seed)
    idx = np.argwhere(omega.interior(2.0))
    if len(idx) < 2:
        raise UsageError("domain has too few interior samples")
    z = cfg.grid.z
    worst, factors = 0.0, []
    for _ in range(n_pairs):
        f = _random_smooth(cfg.grid, rng)
        i, j = rng.choice(len(idx), 2, replace=False)
        x, y = z[tuple(idx[i])], z[tuple(idx[j])]
        terms = meyer_decomposition(K, f, omega, x, y)
        worst = max(worst, terms.reconstruction_error / f.sup())
        factors.append(abs(terms.g4_factor))
    ok = worst <= 1e-6
    out.json("report.json", {"domain": shape.to_json(), "pairs": n_pairs,
                             "max_relative_reconstruction_error": worst,
                             "max_g4_factor": max(factors), "passed": ok})
    return EXIT_OK if ok else EXIT_MATH


COMMANDS = {
    "solve": cmd_solve,
    "regularity-transfer": cmd_regularity_transfer,
    "corner": cmd_corner,
    "norms": cmd_norms,
    "tchi": cmd_tchi,
    "bump-bound": cmd_bump_bound,
    "commutator": cmd_commutator,
    "decomposition-check": cmd_decomposition_check,
}


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcreg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qcreg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--N", type=int)
        p.add_argument("--L", type=float)
        p.add_argument("--seed", type=int)
        img = p.add_mutually_exclusive_group()
        img.add_argument("--pgm", action="store_const", const="pgm", dest="images")
        img.add_argument("--png", action="store_const", const="png", dest="images")
        return p

    p = common(sub.add_parser("solve", help="solve (I - mu B) h = mu"))
    p.add_argument("--mu")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")

    p = common(sub.add_parser("regularity-transfer", help="||h|| / ||mu|| across grid sizes"))
    p.add_argument("--mu")
    p.add_argument("--spaces", dest="spaces_text", help="s,p,q;s,p,q")
    p.add_argument("--Ns")
    p.add_argument("--family", choices=("besov", "triebel"))
    p.add_argument("--tol", type=float)

    p = common(sub.add_parser("corner", help="int_Q |grad B chi_Q|^p across grid sizes"))
    p.add_argument("--p")
    p.add_argument("--domain")
    p.add_argument("--Ns")
    p.add_argument("--grid-L", type=float, dest="grid_L")

    p = common(sub.add_parser("norms", help="function-space norm estimators"))
    p.add_argument("--space")
    p.add_argument("--f")
    p.add_argument("--s", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int, help="samples per side of the unit square")
    p.add_argument("--alphas")
    p.add_argument("--max-sources", type=int, dest="max_sources")

    p = common(sub.add_parser("tchi", help="T chi_Omega on the grid"))
    p.add_argument("--domain")
    p.add_argument("--kernel")
    p.add_argument("--holder-exponent", type=float, dest="holder_exponent")

    p = common(sub.add_parser("bump-bound", help="sup ||T_Omega phi_B|| over balls"))
    p.add_argument("--domain")
    p.add_argument("--radii")
    p.add_argument("--kernel")

    p = common(sub.add_parser("commutator", help="log-Lipschitz fit of [mu, B] chi_Omega"))
    p.add_argument("--mu")
    p.add_argument("--domain")
    p.add_argument("--Ns")

    p = common(sub.add_parser("decomposition-check", help="Meyer difference decomposition identity"))
    p.add_argument("--domain")
    p.add_argument("--kernel")
    p.add_argument("--pairs", type=int)
    return ap


_DEFAULT_MU = {"regularity-transfer": "bump:k=0.5,radius=1.5", "commutator": "bump:k=0.5,radius=1.5"}


def _error(out_dir, kind, message, details=None):
    doc = {"error": kind, "message": message, "qcreg_version": __version__}
    if details:
        doc["details"] = _jsonable(details)
    text = json.dumps(doc, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text + "\n")
        except OSError:
            pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    ns = vars(args)
    command = ns.pop("command")
    cfg_path = ns.pop("config")
    images = ns.pop("images")
    if command in _DEFAULT_MU and ns.get("mu") is None and cfg_path is None:
        ns["mu"] = _DEFAULT_MU[command]
    out_dir = ns.get("out") or "out"
    try:
        cfg = load_config(command, cfg_path, ns)
        out_dir = cfg.out
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(Path(cfg.out) / ".qcreg.lock"), timeout=0)
        try:
            with lock:
                return COMMANDS[command](cfg, Output(cfg, images))
        except Timeout:
            raise UsageError(f"output directory {cfg.out} is locked by another run") from None
    except UsageError as exc:
        _error(out_dir, "usage", str(exc))
        return EXIT_USAGE
    except MathFailure as exc:
        _error(out_dir, "math", str(exc), exc.details)
        return EXIT_MATH
    except OSError as exc:
        _error(out_dir, "io", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
