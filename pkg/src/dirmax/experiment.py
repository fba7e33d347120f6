"""Lower bounds on the L2 norm of directional maximal operators, and sweeps over them.

:func:`estimate_norm` evaluates ``||M_Omega f|| / ||f||`` on a small library
of test grids and then refines the parameters of the best one.
The result is a lower bound for the norm of the discrete operator, never an
upper bound.  :func:`run_experiment` runs a sweep described by a JSON
config and writes a CSV table plus a JSON report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import constants
from .directions import (SlopeSet, build_from_dict, certify_log_order, equispaced_slopes,
                         geometric_slopes)
from .gridops import GridFunction, directional_max, parse_scales, shear_offsets
from .verify import check_sector_overlap

CSV_FIELDS = ("family_id", "n", "num_dirs", "lac_order", "best_ratio", "witness",
              "max_overlap", "wall_ms")


class ConfigError(ValueError):
    pass


# -- test library -------------------------------------------------------------------

def point_mass(n: int, width: float = 1.0) -> np.ndarray:
    """Gaussian bump of standard deviation ``width`` cells at the centre."""
    x = np.arange(n) - n // 2
    g = np.exp(-0.5 * (x / width) ** 2)
    return np.outer(g, g)


def disc(n: int, radius: float = None) -> np.ndarray:
    radius = n / 8 if radius is None else radius
    x = np.arange(n) - n // 2
    return ((x[:, None] ** 2 + x[None, :] ** 2) <= radius ** 2).astype(float)


def sheared_segment(n: int, alpha: float, half_length: int, centre=None) -> np.ndarray:
    """Indicator of the digital segment ``(c1 + i, c2 + round(i alpha))``, ``|i| <= half_length``."""
    c1, c2 = (n // 2, n // 2) if centre is None else centre
    a = np.zeros((n, n))
    s = shear_offsets(alpha, half_length)
    i = np.arange(-half_length, half_length + 1)
    off = np.concatenate([-s[:0:-1], s])
    a[(c1 + i) % n, (c2 + off) % n] = 1.0
    return a


def besicovitch_stack(n: int, omega: Sequence[float], half_length: int = None,
                      thickness: int = 1) -> np.ndarray:
    """Sum of one sheared strip per slope, all through the centre.

    Each strip is ``thickness`` cells tall and ``2 * half_length + 1`` long.
    """
    half_length = n // 8 if half_length is None else half_length
    a = np.zeros((n, n))
    for alpha in omega:
        seg = sheared_segment(n, alpha, half_length)
        for j in range(thickness):
            a += np.roll(seg, j - thickness // 2, axis=1)
    return a


def random_sparse(n: int, rng, density: float = 0.002) -> np.ndarray:
    a = (rng.random((n, n)) < density) * rng.random((n, n))
    if not a.any():
        a[n // 2, n // 2] = 1.0
    return a


def norm_ratio(f: np.ndarray, omega: Sequence[float], scales) -> float:
    g = GridFunction(f)
    num = np.sqrt(np.sum(directional_max(g, omega, scales).samples ** 2))
    return float(num / np.sqrt(np.sum(f ** 2)))


@dataclass
class NormEstimate:
    """Best ratio found, the id of the grid attaining it, and that grid."""

    lower_bound: float
    witness: str
    grid: np.ndarray = field(repr=False, default=None)
    trace: list = field(default_factory=list)

    def __iter__(self):
        # unpacks as (lower_bound, witness)
        return iter((self.lower_bound, self.witness))


def _families(n: int, omega):
    # name -> (builder, starting parameters, (lower, upper) bound per parameter)
    return {
        "point": (lambda width: point_mass(n, width), {"width": 1.0},
                  {"width": (0.5, n / 16)}),
        "disc": (lambda radius: disc(n, radius), {"radius": n / 8},
                 {"radius": (1.0, n / 4)}),
        "stack": (lambda half_length, thickness: besicovitch_stack(n, omega, half_length,
                                                                   thickness),
                  {"half_length": n // 8, "thickness": 1},
                  {"half_length": (2, n // 4), "thickness": (1, n // 16)}),
    }


def _label(name, params):
    return name + "(" + ",".join(f"{k}={v:g}" for k, v in params.items()) + ")"


def estimate_norm(omega, n: int, scales=None, budget: int = 6, seed: int = 0,
                  warm_start: Sequence = ()) -> NormEstimate:
    """Lower bound for ``||M_Omega||_{2->2}`` on the ``n x n`` grid.

    The constant grid gives ratio 1 and is recorded without evaluation.
    Any ``warm_start`` pairs ``(id, array)`` are evaluated next without
    counting against ``budget``.  The budget then pays for, in order, a
    mollified point mass, the disc of radius ``n/8``, a stack of one thin
    strip per slope through the centre, a random sparse field, and
    coordinate-ascent steps: the parameters of the best parametric grid are
    doubled or halved one at a time, keeping a move while it helps.
    """
    omega = sorted(float(x) for x in omega)
    if not omega:
        raise ValueError("direction set is empty")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    scales = parse_scales("dyadic", n) if scales is None else scales
    rng = np.random.default_rng(seed)
    best = NormEstimate(1.0, "constant", np.ones((n, n)))

    def consider(name, f):
        nonlocal best
        r = norm_ratio(f, omega, scales)
        best.trace.append((name, r))
        if r > best.lower_bound:
            best = NormEstimate(r, name, f, best.trace)
        return r

    for name, f in warm_start:
        consider(f"warm:{name}", np.asarray(f, dtype=float))

    fams = _families(n, omega)
    seeds = [(name, None) for name in fams] + [("random:0", None)]
    used = 0
    scored = []  # (ratio, family, params) for parametric seeds
    for name, _ in seeds:
        if used == budget:
            return best
        if name in fams:
            build, params, _ = fams[name]
            r = consider(_label(name, params), build(**params))
            scored.append((r, name, dict(params)))
        else:
            consider(name, random_sparse(n, rng))
        used += 1

    r0, name, params = max(scored, key=lambda t: t[0])
    build, _, bounds = fams[name]
    moves = [(k, fac) for k in params for fac in (2.0, 0.5)]
    mi = 0
    tried = 0
    seen = {_label(name, params)}
    while used < budget and tried < len(moves):
        key, fac = moves[mi % len(moves)]
        lo, hi = bounds[key]
        val = params[key] * fac
        if isinstance(params[key], int):
            val = int(round(val))
        val = min(max(val, lo), hi)
        cand = dict(params, **{key: val})
        if _label(name, cand) in seen:
            mi, tried = mi + 1, tried + 1
            continue
        seen.add(_label(name, cand))
        r = consider(_label(name, cand), build(**cand))
        used += 1
        if r > r0:
            r0, params, tried = r, cand, 0
        else:
            mi, tried = mi + 1, tried + 1
    return best


# -- sweeps -------------------------------------------------------------------------

def slope_family(spec: Mapping, base_dir: Path = Path(".")):
    """Resolve a family spec to a list of ``(family_id, SlopeSet)`` rows.

    Built families with ``"rows": "levels"`` expand to one nested row per
    level of their certificate.
    """
    kind = spec.get("type")
    fid = spec.get("id")
    if kind == "equispaced":
        s = equispaced_slopes(int(spec["count"]))
        fid = fid or f"equispaced:{spec['count']}"
    elif kind == "geometric":
        s = geometric_slopes(float(spec["ratio"]), int(spec["count"]),
                             float(spec.get("anchor", 1.0)))
        fid = fid or f"geometric:{spec['ratio']}x{spec['count']}"
    elif kind == "built":
        s = build_from_dict(spec)
        fid = fid or "built"
    elif kind == "file":
        path = Path(spec["path"])
        if not path.is_absolute():
            path = base_dir / path
        s = SlopeSet.from_json(path.read_text())
        fid = fid or path.stem
    else:
        raise ConfigError(f"unknown direction family type {kind!r}")
    if s.certificate is None:
        s = SlopeSet(s.slopes, certify_log_order(s))
    if spec.get("rows") == "levels":
        cert = s.certificate
        rows = []
        for k in range(1, cert.order + 1):
            sub = type(cert)(cert.chain[:k], tuple(w for w in cert.witnesses if w.level <= k))
            rows.append((f"{fid}:N{k}", SlopeSet(cert.chain[k - 1], sub)))
        return rows
    return [(fid, s)]


def least_squares(x, y):
    """Line fit ``y ~ a x + b``; returns slope, intercept and residual sum of squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return {"slope": math.nan, "intercept": math.nan, "rss": math.nan}
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return {"slope": float(coef[0]), "intercept": float(coef[1]),
            "rss": float(np.sum(res ** 2))}


@dataclass
class ExperimentReport:
    config: dict
    rows: list
    fits: dict
    pinned: dict
    timings: list

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for row in self.rows:
            w.writerow([row[k] if k != "best_ratio" else repr(row[k]) for k in CSV_FIELDS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "fits": self.fits,
                "pinned_constants": self.pinned, "timings_ms": self.timings}


def validate_config(cfg: Mapping) -> dict:
    if not isinstance(cfg, Mapping):
        raise ConfigError("config must be a JSON object")
    cfg = dict(cfg)
    cfg.setdefault("seed", 0)
    cfg.setdefault("sizes", [128])
    cfg.setdefault("scales", "dyadic")
    cfg.setdefault("budget", 6)
    cfg.setdefault("families", [])
    cfg.setdefault("record_timing", False)
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for n in cfg["sizes"]:
        if not isinstance(n, int) or n < 16 or n & (n - 1):
            raise ConfigError(f"grid size {n!r} is not a power of two >= 16")
    if not isinstance(cfg["budget"], int) or cfg["budget"] < 1:
        raise ConfigError("budget must be a positive integer")
    if not isinstance(cfg["families"], list):
        raise ConfigError("families must be a list")
    return cfg


def run_experiment(config: Mapping, base_dir=".") -> ExperimentReport:
    """Evaluate every (family, size) cell of the config in order.

    Rows of a family with ``"rows": "levels"`` are nested, and each row
    warm-starts from the previous row's witness, so their ratios cannot
    decrease.  ``wall_ms`` in the CSV stays empty unless ``record_timing``
    is set; timings always go to the JSON report.
    """
    cfg = validate_config(config)
    base_dir = Path(base_dir)
    rows, timings = [], []
    for n in cfg["sizes"]:
        scales = parse_scales(cfg["scales"], n)
        for fam in cfg["families"]:
            warm = []
            for fid, s in slope_family(fam, base_dir):
                t0 = time.perf_counter()
                est = estimate_norm(s.slopes, n, scales, fam.get("budget", cfg["budget"]),
                                    cfg["seed"], warm_start=warm)
                ms = 1000.0 * (time.perf_counter() - t0)
                if fam.get("rows") == "levels":
                    wid = est.witness
                    wid = wid[len("warm:"):] if wid.startswith("warm:") else f"{fid}/{wid}"
                    warm = [(wid, est.grid)]
                rows.append({"family_id": fid, "n": n, "num_dirs": len(s),
                             "lac_order": s.certificate.order,
                             "best_ratio": est.lower_bound, "witness": est.witness,
                             "max_overlap": max(check_sector_overlap(s.certificate)),
                             "wall_ms": f"{ms:.0f}" if cfg["record_timing"] else ""})
                timings.append({"family_id": fid, "n": n, "ms": ms})
    return ExperimentReport(cfg, rows, fit_rows(rows), constants.table(), timings)


def fit_rows(rows):
    """Per grid size: ratio against ``log2 #Omega``, against ``#Omega``, and against order."""
    fits = {}
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        k = [math.log2(r["num_dirs"]) for r in sub]
        y = [r["best_ratio"] for r in sub]
        fits[str(n)] = {"vs_log2_count": least_squares(k, y),
                        "vs_count": least_squares([r["num_dirs"] for r in sub], y),
                        "vs_order": least_squares([r["lac_order"] for r in sub], y),
                        "max_ratio_over_order": max(r["best_ratio"] / r["lac_order"]
                                                    for r in sub)}
    return fits


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ExperimentReport, out_dir, name: str = "experiment"):
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    atomic_write(csv_path, report.csv_text())
    atomic_write(json_path, json.dumps(report.to_dict(), indent=1, default=float) + "\n")
    return csv_path, json_path
