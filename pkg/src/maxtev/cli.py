"""Command line driver: analytic atlases, operator spectra, identity suites, scaling runs.

Every subcommand reads a JSON run configuration (``--config``), lets the
command-line flags override it, validates the result and writes into
``--out``:

``eigenvalues.csv``
    One row per eigenvalue (``atlas`` and ``spectrum``).
``certificates.json``
    Winding-number box trees (``atlas``).
``summary.json``
    Box, medium and per-mode counts; what ``compare`` reads back.
``verify.json`` / ``scaling.json`` / ``rays.json`` / ``compare.json``
    Reports of the other subcommands.
``manifest.json``
    Versions, config hash, wall clock, file hashes and failures.  The only
    file with timestamps; everything else is byte-identical across runs of
    the same configuration.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (including a
failed identity or scaling check), 4 mismatch in ``compare``.
"""

import argparse
import concurrent.futures as cf
import csv
import functools
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .admissibility import choose_ray
from .ball_analytic import build_determinant, determinant_oracle_residual
from .estimates import DEFAULT_LADDER, KINDS, POINTS_PER_WAVELENGTH, scaling_experiment
from .exceptions import ConfigError, InvalidMediumError, MaxtevError, UnsupportedModeError
from .grid import build_grid
from .media import TE, TM, MediumProfile, ModeIndex
from .radial_operator import (SPURIOUS_TOL, identity_residuals, resolvent_norm_scan,
                              transmission_eigenvalues_operator)
from .rootfinder import Box, find_roots

__all__ = ["RunConfig", "load_config", "compare_runs", "main"]

log = logging.getLogger("maxtev")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_MISMATCH = 0, 2, 3, 4
CSV_COLUMNS = ("method", "l", "polarization", "k_re", "k_im", "multiplicity", "residual",
               "spurious", "provenance")
ORACLE_TOL = 1e-8
IDENTITY_TOL = {"inverse_left": 1e-8, "inverse_right": 1e-8, "resolvent": 1e-7}
# radii scanned by ``rays`` to locate where the resolvent norm settles
ONSET_RADII = tuple(np.geomspace(0.5, 500.0, 31))
ONSET_FACTOR = 3.0


@dataclass
class RunConfig:
    """Validated run configuration.

    Attributes
    ----------
    medium : dict
        ``MediumProfile.to_dict`` form, e.g. ``{"type": "constant", "n0": 4}``.
    l_min, l_max : int
    polarizations : list of str
    box : tuple
        ``(re0, re1, im0, im1)`` search rectangle in ``k``.
    ray_preference, ray_margin : float
        Preferred direction of the shift ``z`` and clearance from forbidden angles.
    shift_radius : float
        ``|z|`` for the operator path and the identity suite.
    grid_N : list of int
        Operator grids, coarse to fine; the last two confirm convergence.
    scheme : str
    verify_N, probes : int
    ladder : list of float
    kinds : list of str
    points_per_wavelength : int
    scaling_theta : float or None
        Defaults to the selected ray.
    root_tol, quadrature_tol, match_rtol, residual_tol : float
    out : str
    seed : int
    """

    medium: dict
    l_min: int = 1
    l_max: int = 3
    polarizations: list = field(default_factory=lambda: [TE, TM])
    box: tuple = (0.3, 12.0, -3.0, 3.0)
    ray_preference: float = math.pi / 2
    ray_margin: float = 0.05
    shift_radius: float = 10.0
    grid_N: list = field(default_factory=lambda: [64, 96])
    scheme: str = "spectral"
    verify_N: int = 48
    probes: int = 100
    ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    kinds: list = field(default_factory=lambda: ["f-only", "g-only"])
    points_per_wavelength: int = POINTS_PER_WAVELENGTH
    scaling_theta: float = None
    root_tol: float = 1e-12
    quadrature_tol: float = 1e-6
    match_rtol: float = 1e-4
    residual_tol: float = SPURIOUS_TOL
    out: str = "maxtev-out"
    seed: int = 0

    def build_medium(self):
        return MediumProfile.from_dict(self.medium)

    def modes(self):
        return [ModeIndex(l, p) for l in range(self.l_min, self.l_max + 1) for p in self.polarizations]

    def to_dict(self):
        d = asdict(self)
        d["box"] = list(self.box)
        return d


# ----------------------------------------------------------------------
# configuration

def _number(name, x, lo=None, hi=None, integer=False, strict_lo=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(name, f"expected a number, got {x!r}")
    if integer and int(x) != x:
        raise ConfigError(name, f"expected an integer, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(name, "must be finite")
    if lo is not None and (x < lo or (strict_lo and x == lo)):
        raise ConfigError(name, f"must be {'>' if strict_lo else '>='} {lo}, got {x!r}")
    if hi is not None and x > hi:
        raise ConfigError(name, f"must be <= {hi}, got {x!r}")
    return int(x) if integer else float(x)


def parse_box(text):
    try:
        vals = [float(t) for t in str(text).split(",")]
    except ValueError:
        raise ConfigError("box", f"expected re0,re1,im0,im1, got {text!r}") from None
    return vals


def parse_modes(text):
    parts = str(text).split("..")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ConfigError("modes", f"expected l0..l1, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2:
        raise ConfigError("modes", f"expected l0..l1, got {text!r}")
    return vals


def validate(raw):
    """Build a RunConfig from a JSON-like dict, checking every field.

    Raises
    ------
    ConfigError
        With the offending field name.
    """
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "medium" not in raw:
        raise ConfigError("medium", "required")
    cfg = RunConfig(**raw)

    if not isinstance(cfg.medium, dict):
        raise ConfigError("medium", "expected an object such as {\"type\": \"constant\", \"n0\": 4}")
    try:
        medium = cfg.build_medium()
    except InvalidMediumError as e:
        raise ConfigError("medium", str(e)) from None
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError("medium", f"malformed medium description ({e})") from None

    cfg.l_min = _number("l_min", cfg.l_min, 1, integer=True)
    cfg.l_max = _number("l_max", cfg.l_max, cfg.l_min, integer=True)
    if not isinstance(cfg.polarizations, (list, tuple)) or not cfg.polarizations:
        raise ConfigError("polarizations", "expected a nonempty list of TE/TM")
    pols = []
    for p in cfg.polarizations:
        if str(p).upper() not in (TE, TM):
            raise ConfigError("polarizations", f"unknown polarization {p!r}")
        if str(p).upper() not in pols:
            pols.append(str(p).upper())
    cfg.polarizations = pols

    if not isinstance(cfg.box, (list, tuple)) or len(cfg.box) != 4:
        raise ConfigError("box", "expected [re0, re1, im0, im1]")
    box = [_number("box", b) for b in cfg.box]
    if not (box[0] < box[1] and box[2] < box[3]):
        raise ConfigError("box", f"need re0 < re1 and im0 < im1, got {box}")
    if box[0] <= 0 and box[2] <= 0 <= box[3]:
        raise ConfigError("box", "k = 0 is not a transmission eigenvalue and makes the determinants "
                          "vanish identically; start the box at Re k > 0")
    cfg.box = tuple(box)

    cfg.ray_preference = _number("ray_preference", cfg.ray_preference)
    cfg.ray_margin = _number("ray_margin", cfg.ray_margin, 0.0, math.pi / 8)
    cfg.shift_radius = _number("shift_radius", cfg.shift_radius, 0.0, strict_lo=True)
    if not isinstance(cfg.grid_N, (list, tuple)) or not cfg.grid_N:
        raise ConfigError("grid_N", "expected a nonempty list of grid sizes")
    cfg.grid_N = [_number("grid_N", n, 16, integer=True) for n in cfg.grid_N]
    if any(b <= a for a, b in zip(cfg.grid_N, cfg.grid_N[1:])):
        raise ConfigError("grid_N", "grid sizes must increase")
    if cfg.scheme not in ("spectral", "fd"):
        raise ConfigError("scheme", f"expected 'spectral' or 'fd', got {cfg.scheme!r}")
    cfg.verify_N = _number("verify_N", cfg.verify_N, 16, integer=True)
    cfg.probes = _number("probes", cfg.probes, 1, integer=True)

    if not isinstance(cfg.ladder, (list, tuple)) or len(cfg.ladder) < 2:
        raise ConfigError("ladder", "expected at least two h values")
    cfg.ladder = [_number("ladder", h, 0.0, 1.0, strict_lo=True) for h in cfg.ladder]
    if any(b >= a for a, b in zip(cfg.ladder, cfg.ladder[1:])):
        raise ConfigError("ladder", "h values must be strictly decreasing")
    if not isinstance(cfg.kinds, (list, tuple)) or not cfg.kinds:
        raise ConfigError("kinds", f"expected a nonempty list from {KINDS}")
    for k in cfg.kinds:
        if k not in KINDS:
            raise ConfigError("kinds", f"unknown source kind {k!r}")
    cfg.points_per_wavelength = _number("points_per_wavelength", cfg.points_per_wavelength, 2,
                                        integer=True)
    if cfg.scaling_theta is not None:
        cfg.scaling_theta = _number("scaling_theta", cfg.scaling_theta)
        forb = choose_ray(medium, cfg.scaling_theta, cfg.ray_margin).forbidden
        if forb.distance(cfg.scaling_theta) < cfg.ray_margin:
            raise ConfigError("scaling_theta", f"direction {cfg.scaling_theta:g} lies within "
                              f"{cfg.ray_margin:g} of a forbidden angle")

    for name in ("root_tol", "quadrature_tol", "match_rtol", "residual_tol"):
        setattr(cfg, name, _number(name, getattr(cfg, name), 0.0, 1.0, strict_lo=True))
    if not isinstance(cfg.out, str) or not cfg.out:
        raise ConfigError("out", "expected a directory path")
    cfg.seed = _number("seed", cfg.seed, 0, 2**64 - 1, integer=True)
    return cfg


def load_config(path=None, overrides=None):
    """Read a JSON config (or start empty), apply flag overrides and validate."""
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"not valid JSON ({e})") from None
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return validate(raw)


# ----------------------------------------------------------------------
# output helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(x):
    return format(float(x), ".17e")


def eigen_csv(rows):
    """CSV text with a header, ``%.17e`` floats and '.' decimals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r["method"], r["l"], r["polarization"], _fmt(r["k_re"]), _fmt(r["k_im"]),
                    r["multiplicity"], _fmt(r["residual"]), int(bool(r["spurious"])), r["provenance"]])
    return buf.getvalue()


def read_eigen_csv(path):
    rows = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(str(path), f"unexpected CSV header {rd.fieldnames}")
        for r in rd:
            rows.append({"method": r["method"], "l": int(r["l"]), "polarization": r["polarization"],
                         "k_re": float(r["k_re"]), "k_im": float(r["k_im"]),
                         "multiplicity": int(r["multiplicity"]), "residual": float(r["residual"]),
                         "spurious": bool(int(r["spurious"])), "provenance": r["provenance"]})
    return rows


class Writer:
    """Collects output files and writes the manifest last."""

    def __init__(self, out, command, cfg_text):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg_hash = hashlib.sha256(cfg_text.encode()).hexdigest()
        self.files = {}
        self.failures = []
        self.t0 = time.perf_counter()
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def write(self, name, text):
        (self.out / name).write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def fail(self, task, exc):
        log.error("%s failed: %s", task, exc)
        self.failures.append({"task": task, "error": type(exc).__name__ if isinstance(exc, BaseException)
                              else str(exc[0]), "message": str(exc) if isinstance(exc, BaseException)
                              else str(exc[1])})

    def finish(self, status):
        manifest = {
            "command": self.command,
            "status": status,
            "config_sha256": self.cfg_hash,
            "versions": {"maxtev": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "started": self.started,
            "wall_clock_s": round(time.perf_counter() - self.t0, 3),
            "files": dict(sorted(self.files.items())),
            "failures": self.failures,
        }
        (self.out / "manifest.json").write_text(dumps(manifest))


def _run_tasks(fn, tasks, jobs):
    """Run ``fn`` over ``tasks`` in order; results are ``("ok", value)`` or ``("error", (type, msg))``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _guarded(fn, task):
    try:
        return ("ok", fn(task))
    except (MaxtevError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        return ("error", (type(e).__name__, str(e)))


def _guard(fn):
    return functools.partial(_guarded, fn)


# ----------------------------------------------------------------------
# tasks (top level so they pickle)

def _atlas_task(task):
    cfg, (l, pol) = task
    cfg = RunConfig(**cfg)
    mode, medium = ModeIndex(l, pol), cfg.build_medium()
    W = build_determinant(mode, medium)
    roots, cert = find_roots(W, cfg.box, tol=cfg.root_tol, quadrature_tol=cfg.quadrature_tol,
                             return_certificate=True)
    rows = []
    for r in roots:
        res = determinant_oracle_residual(mode, medium, r.location)
        rows.append({"method": "analytic", "l": l, "polarization": pol, "k_re": r.location.real,
                     "k_im": r.location.imag, "multiplicity": r.multiplicity, "residual": res,
                     "spurious": not res <= ORACLE_TOL,
                     "provenance": f"winding;quadrature_tol={cfg.quadrature_tol:g};"
                                   f"newton_residual={r.residual:.3e};cluster={int(r.cluster)}"})
    return {"mode": str(mode), "rows": rows,
            "certificate": {"mode": str(mode), "box": list(cert["box"]), "winding": cert["winding"],
                            "multiplicity_sum": sum(r.multiplicity for r in roots),
                            "boxes": [b.to_dict() for b in cert["boxes"]]}}


def _spectrum_task(task):
    cfg, (l, pol) = task
    cfg = RunConfig(**cfg)
    mode, medium = ModeIndex(l, pol), cfg.build_medium()
    ray = choose_ray(medium, cfg.ray_preference, cfg.ray_margin)
    z = ray.z(cfg.shift_radius)
    runs = [transmission_eigenvalues_operator(mode, medium, z, build_grid(N, medium.radius, cfg.scheme),
                                              cfg.box, cfg.residual_tol) for N in cfg.grid_N]
    fine, coarse = runs[-1], (runs[-2] if len(runs) > 1 else None)
    rows = []
    for rec in fine:
        delta = math.nan
        if coarse:
            cands = [c.k for c in coarse if not c.spurious]
            if cands:
                delta = min(abs(rec.k - c) for c in cands) / abs(rec.k)
        converged = coarse is None or delta <= cfg.match_rtol
        rows.append({"method": "operator", "l": l, "polarization": pol, "k_re": rec.k.real,
                     "k_im": rec.k.imag, "multiplicity": rec.generalized_rank, "residual": rec.residual,
                     "spurious": rec.spurious or not converged,
                     "provenance": f"{rec.scheme};N={rec.N};z={rec.z.real:.6g}{rec.z.imag:+.6g}j;"
                                   f"refine_delta={delta:.3e}"})
    return {"mode": str(mode), "rows": rows, "z": [z.real, z.imag], "theta": ray.theta}


def _verify_task(task):
    cfg, (l, pol) = task
    cfg = RunConfig(**cfg)
    mode, medium = ModeIndex(l, pol), cfg.build_medium()
    ray = choose_ray(medium, cfg.ray_preference, cfg.ray_margin)
    z = ray.z(cfg.shift_radius)
    res = identity_residuals(mode, medium, z, build_grid(cfg.verify_N, medium.radius, cfg.scheme),
                             probes=cfg.probes, seed=cfg.seed)
    checks = {k: {"residual": v, "tolerance": IDENTITY_TOL[k], "passed": bool(v <= IDENTITY_TOL[k])}
              for k, v in res.items()}
    return {"mode": str(mode), "z": [z.real, z.imag], "N": cfg.verify_N, "probes": cfg.probes,
            "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def _scaling_task(task):
    cfg, (l, pol), kind = task
    cfg = RunConfig(**cfg)
    mode, medium = ModeIndex(l, pol), cfg.build_medium()
    theta = cfg.scaling_theta
    if theta is None:
        theta = choose_ray(medium, cfg.ray_preference, cfg.ray_margin).theta
    rep = scaling_experiment(mode, medium, theta, cfg.ladder, kind, seed=cfg.seed,
                             points_per_wavelength=cfg.points_per_wavelength, scheme=cfg.scheme)
    return rep.to_dict()


# ----------------------------------------------------------------------
# subcommands

def _mode_tasks(cfg):
    d = cfg.to_dict()
    return [(d, (m.l, m.polarization)) for m in cfg.modes()]


def _summary(cfg, results, extra=None):
    s = {"box": list(cfg.box), "medium": cfg.medium,
         "modes": {r["mode"]: len(r["rows"]) for r in results},
         "certified": sum(1 for r in results for row in r["rows"] if not row["spurious"])}
    s.update(extra or {})
    return s


def _eigen_command(name, task_fn, cfg, writer, jobs):
    tasks = _mode_tasks(cfg)
    outcomes = _run_tasks(_guard(task_fn), tasks, jobs)
    results = []
    for (_, (l, pol)), (status, val) in zip(tasks, outcomes):
        if status == "ok":
            results.append(val)
        else:
            writer.fail(f"{name}:{pol}{l}", val)
    rows = [row for r in results for row in r["rows"]]
    writer.write("eigenvalues.csv", eigen_csv(rows))
    extra = {"method": "analytic" if name == "atlas" else "operator"}
    if name == "atlas":
        writer.write("certificates.json", dumps([r["certificate"] for r in results]))
    else:
        extra.update({"grid_N": cfg.grid_N, "scheme": cfg.scheme,
                      "shift": {r["mode"]: r["z"] for r in results}})
    writer.write("summary.json", dumps(_summary(cfg, results, extra)))
    print(f"{name}: {len(rows)} eigenvalues over {len(results)} modes "
          f"({sum(not r['spurious'] for r in rows)} certified), written to {writer.out}")
    return EXIT_NUMERICAL if writer.failures else EXIT_OK


def cmd_atlas(cfg, writer, jobs):
    return _eigen_command("atlas", _atlas_task, cfg, writer, jobs)


def cmd_spectrum(cfg, writer, jobs):
    return _eigen_command("spectrum", _spectrum_task, cfg, writer, jobs)


def cmd_verify(cfg, writer, jobs):
    tasks = _mode_tasks(cfg)
    outcomes = _run_tasks(_guard(_verify_task), tasks, jobs)
    reports = []
    for (_, (l, pol)), (status, val) in zip(tasks, outcomes):
        if status == "ok":
            reports.append(val)
            print(f"{val['mode']:>5}  " + "  ".join(
                f"{k}={c['residual']:.2e} {'PASS' if c['passed'] else 'FAIL'}" for k, c in val["checks"].items()))
        else:
            writer.fail(f"verify:{pol}{l}", val)
    ok = bool(reports) and all(r["passed"] for r in reports) and not writer.failures
    writer.write("verify.json", dumps({"passed": ok, "reports": reports}))
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_scaling(cfg, writer, jobs):
    d = cfg.to_dict()
    tasks = [(d, (m.l, m.polarization), k) for m in cfg.modes() for k in cfg.kinds]
    outcomes = _run_tasks(_guard(_scaling_task), tasks, jobs)
    reports = []
    for (_, (l, pol), kind), (status, val) in zip(tasks, outcomes):
        if status == "ok":
            reports.append(val)
            fits = ", ".join(f"{k} {f['exponent']:.2f}" for k, f in val["fits"].items())
            print(f"{val['mode']:>5} {kind:7} {'PASS' if val['passed'] else 'FAIL'}  {fits}")
        else:
            writer.fail(f"scaling:{pol}{l}:{kind}", val)
    ok = bool(reports) and all(r["passed"] for r in reports) and not writer.failures
    writer.write("scaling.json", dumps({"passed": ok, "reports": reports}))
    return EXIT_OK if ok else EXIT_NUMERICAL


def _onset_task(task):
    cfg, (l, pol), theta = task
    cfg = RunConfig(**cfg)
    mode, medium = ModeIndex(l, pol), cfg.build_medium()
    scan = resolvent_norm_scan(mode, medium, theta, ONSET_RADII,
                               grid=build_grid(cfg.verify_N, medium.radius, cfg.scheme),
                               probes=4, seed=cfg.seed)
    return {"mode": str(mode), "onset": scan.onset(ONSET_FACTOR), "max_norm": scan.max_norm(),
            "singular": scan.singular}


def cmd_rays(cfg, writer, jobs):
    medium = cfg.build_medium()
    sel = choose_ray(medium, cfg.ray_preference, cfg.ray_margin)
    d = cfg.to_dict()
    tasks = [(d, (m.l, m.polarization), sel.theta) for m in cfg.modes()]
    outcomes = _run_tasks(_guard(_onset_task), tasks, jobs)
    scans = []
    for (_, (l, pol), _), (status, val) in zip(tasks, outcomes):
        if status == "ok":
            scans.append(val)
        else:
            writer.fail(f"rays:{pol}{l}", val)
    onsets = [s["onset"] for s in scans]
    onset = max(onsets) if onsets and None not in onsets else None
    rep = dict(sel.to_dict(), onset={"radii": [ONSET_RADII[0], ONSET_RADII[-1]], "factor": ONSET_FACTOR,
                                     "N": cfg.verify_N, "modes": scans, "onset": onset,
                                     "shift_radius": cfg.shift_radius,
                                     "shift_above_onset": onset is not None and cfg.shift_radius >= onset})
    writer.write("rays.json", dumps(rep))
    fam = ", ".join(f"{t:.4f}" for t in sel.family) if sel.family else "none"
    where = f"{onset:.3g}" if onset is not None else f"not reached by r = {ONSET_RADII[-1]:g}"
    print(f"theta = {sel.theta:.6f}  margin = {sel.margin:g}  quarter cone: {sel.fits_quarter}\n"
          f"family: {fam}\n"
          f"resolvent norm settles (within x{ONSET_FACTOR:g}) from |z| = {where}; "
          f"shift radius {cfg.shift_radius:g}")
    return EXIT_NUMERICAL if writer.failures else EXIT_OK


# -- compare ----------------------------------------------------------------

def _intersect(a, b):
    box = (max(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), min(a[3], b[3]))
    if box[0] >= box[1] or box[2] >= box[3]:
        return None
    return box


def _edge_distance(k, box):
    return min(abs(k.real - box[0]), abs(k.real - box[1]), abs(k.imag - box[2]), abs(k.imag - box[3]))


def compare_runs(rows_a, rows_b, box_a, box_b, rtol=1e-4):
    """Greedy nearest matching of two eigenvalue tables per mode.

    Rows count ``multiplicity`` times.  Entries outside the common box are
    dropped.  Unmatched entries are orphans; an orphan is justified when it is
    flagged spurious or lies within the tolerance of the box edge.

    Raises
    ------
    ConfigError
        If the boxes do not overlap.
    """
    box = _intersect(box_a, box_b)
    if box is None:
        raise ConfigError("box", f"result boxes {list(box_a)} and {list(box_b)} are disjoint")

    def expand(rows):
        out = []
        for r in rows:
            k = complex(r["k_re"], r["k_im"])
            if Box(*box).contains(k):
                out += [dict(r, k=k)] * max(int(r["multiplicity"]), 1)
        return out

    A, B = expand(rows_a), expand(rows_b)
    matches, orphans = [], []
    keys = sorted({(r["l"], r["polarization"]) for r in A + B})
    for key in keys:
        a = [r for r in A if (r["l"], r["polarization"]) == key]
        b = [r for r in B if (r["l"], r["polarization"]) == key]
        pairs = sorted((abs(x["k"] - y["k"]) / max(abs(x["k"]), 1e-300), i, j)
                       for i, x in enumerate(a) for j, y in enumerate(b))
        used_a, used_b = set(), set()
        for d, i, j in pairs:
            if d > rtol:
                break
            if i in used_a or j in used_b:
                continue
            used_a.add(i)
            used_b.add(j)
            matches.append({"l": key[0], "polarization": key[1], "a": a[i]["k"], "b": b[j]["k"],
                            "deviation": d})
        for side, rows, used in (("a", a, used_a), ("b", b, used_b)):
            for i, r in enumerate(rows):
                if i in used:
                    continue
                near_edge = _edge_distance(r["k"], box) <= rtol * max(abs(r["k"]), 1.0)
                why = "spurious" if r["spurious"] else ("box edge" if near_edge else None)
                orphans.append({"side": side, "l": key[0], "polarization": key[1], "k": r["k"],
                                "residual": r["residual"], "justified": why is not None,
                                "reason": why})
    ok = all(o["justified"] for o in orphans)
    return {"box": list(box), "rtol": rtol, "matched": len(matches),
            "max_deviation": max((m["deviation"] for m in matches), default=0.0),
            "matches": matches, "orphans": orphans, "passed": ok}


def _load_run(path):
    p = Path(path)
    try:
        summary = json.loads((p / "summary.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(str(p), f"not a result directory ({e})") from None
    return summary, read_eigen_csv(p / "eigenvalues.csv")


def cmd_compare(args, cfg_rtol):
    sa, ra = _load_run(args.runs[0])
    sb, rb = _load_run(args.runs[1])
    if sa.get("medium") != sb.get("medium"):
        raise ConfigError("medium", "the two runs use different media")
    rep = compare_runs(ra, rb, sa["box"], sb["box"], cfg_rtol)
    text = dumps(rep)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "compare.json").write_text(text)
    bad = [o for o in rep["orphans"] if not o["justified"]]
    print(f"compare: {rep['matched']} matched, max deviation {rep['max_deviation']:.2e}, "
          f"{len(rep['orphans'])} orphans ({len(bad)} unjustified)")
    return EXIT_OK if rep["passed"] else EXIT_MISMATCH


# ----------------------------------------------------------------------

COMMANDS = {"atlas": cmd_atlas, "spectrum": cmd_spectrum, "verify": cmd_verify,
            "scaling": cmd_scaling, "rays": cmd_rays}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--modes", help="angular degrees l0..l1")
    common.add_argument("--box", help="search box re0,re1,im0,im1")
    common.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    ap = argparse.ArgumentParser(prog="maxtev", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"atlas": "analytic eigenvalues with winding certificates",
             "spectrum": "operator-path eigenvalues",
             "verify": "discrete operator identity suite",
             "scaling": "semiclassical scaling experiments",
             "rays": "admissible ray selection"}
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    cp = sub.add_parser("compare", help="match two eigenvalue tables")
    cp.add_argument("runs", nargs=2, help="two result directories")
    cp.add_argument("--rtol", type=float, default=1e-4, help="relative matching tolerance")
    cp.add_argument("--out", help="directory for compare.json")
    return ap


def _setup_logging():
    level = os.environ.get("MAXTEV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            if not (args.rtol > 0):
                raise ConfigError("rtol", "must be positive")
            return cmd_compare(args, args.rtol)
        over = {"out": args.out, "seed": args.seed}
        if args.box is not None:
            over["box"] = parse_box(args.box)
        if args.modes is not None:
            over["l_min"], over["l_max"] = parse_modes(args.modes)
        cfg = load_config(args.config, over)
        if args.jobs < 1:
            raise ConfigError("jobs", "must be at least 1")
        writer = Writer(cfg.out, args.command, dumps(cfg.to_dict()))
        try:
            code = COMMANDS[args.command](cfg, writer, args.jobs)
        except (UnsupportedModeError, InvalidMediumError, ConfigError):
            raise
        except (MaxtevError, ArithmeticError, np.linalg.LinAlgError) as e:
            writer.fail(args.command, e)
            code = EXIT_NUMERICAL
        writer.finish("ok" if code == EXIT_OK else "failed")
        return code
    except ConfigError as e:
        print(f"maxtev: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (MaxtevError, ValueError) as e:
        print(f"maxtev: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
