"""Direction sets parameterized by slope, and their lacunarity certificates.

A direction is identified with the slope of a line against the x-axis and
restricted to the chart (0, 1).  An N-lacunary set is grown level by level:
the first level is a single 1-lacunary run, and each later level inserts a
(possibly empty) 1-lacunary run between every pair of neighbouring points
of the previous level.  :class:`LacunaryCertificate` records that chain
together with the limit point of every inserted run, so that a set's order
can be re-checked without trusting whoever built it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-12


class LacunarityError(ValueError):
    """A run or certificate is malformed or fails the lacunary test."""


class StructureError(LacunarityError):
    """Input sequence is not monotone or has the wrong shape."""


class DomainError(LacunarityError):
    """A value lies outside the range where the test is defined."""


@dataclass(frozen=True)
class LacunaryCheck:
    ok: bool
    index: Optional[int] = None  # first failing pair (seq[index], seq[index+1])

    def __bool__(self) -> bool:
        return self.ok


def is_one_lacunary(seq: Sequence[float], v_inf: float, tol: float = DEFAULT_TOL) -> LacunaryCheck:
    """Test the strict two-sided 1-lacunary condition on a finite run.

    For every consecutive pair the run must satisfy
    ``|v_k - v_{k+1}| / 2 < |v_{k+1} - v_inf| < |v_k - v_{k+1}|``; each strict
    comparison ``a < b`` is evaluated as ``a < b * (1 - tol)``.

    A run of length one has no pairs and passes, provided ``v_inf`` differs
    from its only point.

    Raises
    ------
    StructureError
        Empty or non-monotone sequence.
    DomainError
        ``v_inf`` lies inside the range of the sequence, or the run moves
        away from it.
    """
    v = np.asarray(seq, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise StructureError("run must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(v)) or not math.isfinite(v_inf):
        raise DomainError("run and limit must be finite")
    if v.size == 1:
        if v[0] == v_inf:
            raise DomainError("limit coincides with the single run point")
        return LacunaryCheck(True)

    step = np.diff(v)
    if np.all(step > 0):
        if not v_inf > v[-1]:
            raise DomainError(f"increasing run must approach a limit above {v[-1]!r}, got {v_inf!r}")
    elif np.all(step < 0):
        if not v_inf < v[-1]:
            raise DomainError(f"decreasing run must approach a limit below {v[-1]!r}, got {v_inf!r}")
    else:
        raise StructureError("run is not strictly monotone")

    gap = np.abs(step)
    rest = np.abs(v[1:] - v_inf)
    lower = 0.5 * gap < rest * (1.0 - tol)
    upper = rest < gap * (1.0 - tol)
    good = lower & upper
    if good.all():
        return LacunaryCheck(True)
    return LacunaryCheck(False, int(np.argmin(good)))


def _validate_slopes(values) -> tuple:
    out = tuple(float(x) for x in values)
    for x in out:
        if not (0.0 < x < 1.0):
            raise DomainError(f"slope {x!r} outside (0, 1)")
    for a, b in zip(out, out[1:]):
        if not a < b:
            raise StructureError("slopes must be strictly increasing without duplicates")
    return out


@dataclass(frozen=True)
class Witness:
    """Limit point of the run inserted into ``gap`` at ``level``.

    Level 1 is the base run and has no host gap.
    """

    level: int
    gap: Optional[tuple]
    v_inf: float

    def to_dict(self) -> dict:
        return {"level": self.level,
                "gap": None if self.gap is None else [self.gap[0], self.gap[1]],
                "v_inf": self.v_inf}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Witness":
        gap = d.get("gap")
        return cls(int(d["level"]), None if gap is None else (float(gap[0]), float(gap[1])),
                   float(d["v_inf"]))


@dataclass(frozen=True)
class LacunaryCertificate:
    chain: tuple  # tuple of slope tuples, Omega_1 ⊂ ... ⊂ Omega_N
    witnesses: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "chain", tuple(tuple(float(x) for x in lev) for lev in self.chain))
        object.__setattr__(self, "witnesses", tuple(self.witnesses))

    @property
    def order(self) -> int:
        return len(self.chain)

    def to_dict(self) -> dict:
        return {"order": self.order,
                "chain": [list(lev) for lev in self.chain],
                "witnesses": [w.to_dict() for w in self.witnesses]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LacunaryCertificate":
        cert = cls(tuple(tuple(lev) for lev in d["chain"]),
                   tuple(Witness.from_dict(w) for w in d.get("witnesses", [])))
        if "order" in d and int(d["order"]) != cert.order:
            raise LacunarityError("certificate order does not match its chain length")
        return cert


@dataclass(frozen=True)
class SlopeSet:
    slopes: tuple
    certificate: Optional[LacunaryCertificate] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "slopes", _validate_slopes(self.slopes))
        if self.certificate is not None and self.certificate.chain[-1] != self.slopes:
            raise LacunarityError("certificate's last level differs from the slope set")

    def __len__(self) -> int:
        return len(self.slopes)

    def __iter__(self):
        return iter(self.slopes)

    def __contains__(self, x) -> bool:
        return float(x) in self.slopes

    @property
    def order(self) -> Optional[int]:
        return None if self.certificate is None else self.certificate.order

    def to_json(self) -> str:
        d = {"slopes": list(self.slopes)}
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SlopeSet":
        d = json.loads(text)
        if isinstance(d, list):
            return cls(tuple(d))
        cert = d.get("certificate")
        return cls(tuple(d["slopes"]),
                   None if cert is None else LacunaryCertificate.from_dict(cert))


def gaps(points: Sequence[float]) -> list:
    """Neighbouring pairs of a sorted point sequence."""
    return list(zip(points[:-1], points[1:]))


# -- runs -------------------------------------------------------------------

def _check_run(run: Sequence[float], v_inf: float, tol: float) -> Optional[str]:
    """Return a description of what is wrong with a run, or None."""
    if v_inf > max(run):
        ordered = sorted(run)
    elif v_inf < min(run):
        ordered = sorted(run, reverse=True)
    else:
        return f"limit {v_inf!r} lies inside the run's range"
    try:
        res = is_one_lacunary(ordered, v_inf, tol)
    except LacunarityError as exc:
        return str(exc)
    if not res:
        return f"1-lacunary test fails at pair {res.index}"
    return None


def verify_certificate(s: SlopeSet, cert: LacunaryCertificate, tol: float = DEFAULT_TOL):
    """Check a certificate against a slope set.

    Returns ``(ok, violations)``, where ``violations`` is a list of
    human-readable strings naming the offending level and gap.  Never raises
    on bad certificates.
    """
    problems = []
    if cert.order == 0:
        return False, ["empty chain"]
    if tuple(cert.chain[-1]) != tuple(s.slopes):
        problems.append("last level differs from the slope set")

    by_key = {}
    for w in cert.witnesses:
        key = (w.level, w.gap)
        if key in by_key:
            problems.append(f"level {w.level}: duplicate witness for gap {w.gap}")
        by_key[key] = w
    used = set()

    for k, level in enumerate(cert.chain, start=1):
        if any(b <= a for a, b in zip(level, level[1:])):
            problems.append(f"level {k}: slopes not strictly increasing")
            continue
        if k == 1:
            w = by_key.get((1, None))
            if w is None:
                problems.append("level 1: missing base-run witness")
                continue
            used.add((1, None))
            msg = _check_run(level, w.v_inf, tol)
            if msg:
                problems.append(f"level 1: base run: {msg}")
            continue

        prev = cert.chain[k - 2]
        prev_set = set(prev)
        missing = prev_set.difference(level)
        if missing:
            problems.append(f"level {k}: inclusion violation, level {k - 1} "
                            f"points {sorted(missing)} absent")
            continue
        new = sorted(set(level) - prev_set)
        if new and (new[0] < prev[0] or new[-1] > prev[-1]):
            problems.append(f"level {k}: points inserted outside the hull of level {k - 1}")
            continue
        pos = np.searchsorted(np.asarray(prev), new)
        for gi in sorted(set(pos.tolist())):
            a, b = prev[gi - 1], prev[gi]
            run = [x for x, p in zip(new, pos) if p == gi]
            w = by_key.get((k, (a, b)))
            if w is None:
                problems.append(f"level {k}: gap ({a!r}, {b!r}) has no witness")
                continue
            used.add((k, (a, b)))
            if not (a <= w.v_inf <= b):
                problems.append(f"level {k}: gap ({a!r}, {b!r}): limit outside the gap")
                continue
            msg = _check_run(run, w.v_inf, tol)
            if msg:
                problems.append(f"level {k}: gap ({a!r}, {b!r}): {msg}")

    for key in by_key:
        if key not in used:
            problems.append(f"level {key[0]}: witness for gap {key[1]} has no inserted run")
    return (not problems), problems


# -- constructions ------------------------------------------------------------

def _check_ratio(ratio: float) -> None:
    if not (1.0 / 3.0 < ratio < 0.5):
        raise LacunarityError(
            f"ratio {ratio!r} outside (1/3, 1/2): a geometric run with this ratio does not "
            "satisfy the strict 1-lacunary inequalities")


def geometric_slopes(ratio: float, count: int, anchor: float = 1.0) -> SlopeSet:
    """Slopes ``anchor * ratio**k`` for ``k = 1..count``, certified of order 1."""
    _check_ratio(ratio)
    if count < 1:
        raise LacunarityError("count must be positive")
    if not (0.0 < anchor <= 1.0):
        raise DomainError("anchor must lie in (0, 1]")
    pts = sorted(anchor * ratio ** k for k in range(1, count + 1))
    cert = LacunaryCertificate((tuple(pts),), (Witness(1, None, 0.0),))
    return SlopeSet(tuple(pts), cert)


def equispaced_slopes(count: int) -> SlopeSet:
    """``count`` equally spaced slopes ``j/(count+1)`` without certificate."""
    if count < 1:
        raise LacunarityError("count must be positive")
    return SlopeSet(tuple(j / (count + 1) for j in range(1, count + 1)))


@dataclass(frozen=True)
class RunSpec:
    """Geometric run inserted into a gap ``(a, b)``.

    The run accumulates at the endpoint named by ``toward``; for
    ``toward="left"`` its points are ``a + (b - a) * ratio**j``, j = 1..count.
    """

    ratio: float
    count: int
    toward: str = "left"

    def points(self, a: float, b: float):
        _check_ratio(self.ratio)
        if self.toward == "left":
            return [a + (b - a) * self.ratio ** j for j in range(1, self.count + 1)], a
        if self.toward == "right":
            return [b - (b - a) * self.ratio ** j for j in range(1, self.count + 1)], b
        raise LacunarityError(f"unknown run direction {self.toward!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunSpec":
        return cls(float(d["ratio"]), int(d["count"]), d.get("toward", "left"))


LevelSpec = Union[None, RunSpec, Mapping[int, RunSpec]]


def build_n_lacunary(base: SlopeSet, levels: Sequence[LevelSpec] = (),
                     tol: float = DEFAULT_TOL) -> SlopeSet:
    """Grow an order-1 base set by inserting runs into gaps, one level at a time.

    Each entry of ``levels`` describes one new level: ``None`` inserts
    nothing, a :class:`RunSpec` is inserted into every gap, and a mapping
    ``{gap_index: RunSpec}`` targets individual gaps of the previous level.
    """
    if base.certificate is None or base.certificate.order != 1:
        raise LacunarityError("base set needs an order-1 certificate")
    chain = [tuple(base.slopes)]
    witnesses = list(base.certificate.witnesses)
    for k, spec in enumerate(levels, start=2):
        prev = chain[-1]
        new = []
        for gi, (a, b) in enumerate(gaps(prev)):
            if spec is None:
                run_spec = None
            elif isinstance(spec, RunSpec):
                run_spec = spec
            else:
                run_spec = spec.get(gi)
            if run_spec is None or run_spec.count == 0:
                continue
            run, v_inf = run_spec.points(a, b)
            if any(not (a < x < b) for x in run):
                raise LacunarityError(f"level {k}: run leaves its host gap ({a!r}, {b!r})")
            msg = _check_run(run, v_inf, tol)
            if msg:
                raise LacunarityError(f"level {k}: gap ({a!r}, {b!r}): {msg}")
            new.extend(run)
            witnesses.append(Witness(k, (a, b), v_inf))
        chain.append(tuple(sorted(set(prev).union(new))))
    cert = LacunaryCertificate(tuple(chain), tuple(witnesses))
    return SlopeSet(chain[-1], cert)


def build_from_dict(d: Mapping, tol: float = DEFAULT_TOL) -> SlopeSet:
    """JSON form: ``{"base": {"ratio", "count", "anchor"}, "levels": [...]}``."""
    b = d["base"]
    base = geometric_slopes(float(b["ratio"]), int(b["count"]), float(b.get("anchor", 1.0)))
    levels = []
    for lev in d.get("levels", []):
        if lev is None:
            levels.append(None)
        elif "ratio" in lev:
            levels.append(RunSpec.from_dict(lev))
        else:
            levels.append({int(k): RunSpec.from_dict(v) for k, v in lev.items()})
    return build_n_lacunary(base, levels, tol)


def _endpoint_run(run, a, b, tol):
    """Try ``run`` as a single run accumulating at ``b`` or at ``a``."""
    for v_inf in (b, a):
        if _check_run(run, v_inf, tol) is None:
            return v_inf
    return None


def _free_run(run, tol):
    """Feasible limit for a run with no host gap, or None."""
    pts = sorted(run)
    if len(pts) == 1:
        return None
    for increasing in (True, False):
        ordered = pts if increasing else pts[::-1]
        g = np.abs(np.diff(ordered))
        last = np.asarray(ordered[1:])
        # intersect the admissible limit intervals of all pairs
        if increasing:
            lo = np.max(last + 0.5 * g)
            hi = np.min(last + g)
        else:
            lo = np.max(last - g)
            hi = np.min(last - 0.5 * g)
        if lo < hi:
            v_inf = 0.5 * (lo + hi)
            if _check_run(pts, v_inf, tol) is None:
                return float(v_inf)
    return None


def certify_log_order(s: SlopeSet, tol: float = DEFAULT_TOL) -> LacunaryCertificate:
    """Certify an arbitrary finite set as N-lacunary with N = O(log #set).

    Level 1 is the whole set when it is already a single run, otherwise
    its two extreme points.  Every later level treats each gap on its own:
    if the points still waiting inside it form one run accumulating at an
    endpoint of the gap they are inserted together, otherwise only their
    median is inserted.  Each level at least halves the number of waiting
    points per gap, so the order is at most ``log2(n) + 2``.
    """
    pts = list(s.slopes)
    if len(pts) < 2:
        if len(pts) == 1:
            return LacunaryCertificate(((pts[0],),), (Witness(1, None, 0.0),))
        raise LacunarityError("cannot certify an empty set")

    v_inf = _free_run(pts, tol)
    if v_inf is not None:
        return LacunaryCertificate((tuple(pts),), (Witness(1, None, v_inf),))

    lo, hi = pts[0], pts[-1]
    current = [lo, hi]
    witnesses = [Witness(1, None, hi + 0.75 * (hi - lo))]
    chain = [tuple(current)]
    waiting = pts[1:-1]
    k = 1
    while waiting:
        k += 1
        pos = np.searchsorted(np.asarray(current), waiting)
        inserted = []
        for gi in sorted(set(pos.tolist())):
            a, b = current[gi - 1], current[gi]
            inner = [x for x, p in zip(waiting, pos) if p == gi]
            v = _endpoint_run(inner, a, b, tol)
            if v is not None:
                run = inner
            else:
                run = [inner[(len(inner) - 1) // 2]]
                v = a
            inserted.extend(run)
            witnesses.append(Witness(k, (a, b), v))
        current = sorted(current + inserted)
        chain.append(tuple(current))
        taken = set(inserted)
        waiting = [x for x in waiting if x not in taken]
    return LacunaryCertificate(tuple(chain), tuple(witnesses))


# Order bound A*log2(n) + B met by certify_log_order; see the docstring above.
LOG_ORDER_A = 1.0
LOG_ORDER_B = 2.0


def certified(s: SlopeSet, tol: float = DEFAULT_TOL) -> SlopeSet:
    """Return ``s`` with a certificate, computing one if it has none."""
    if s.certificate is not None:
        return s
    return SlopeSet(s.slopes, certify_log_order(s, tol))
