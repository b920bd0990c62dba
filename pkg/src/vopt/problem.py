"""Problem model: objectives f_i, constraints g_j <= 0, and a scan box.

The box bounds declare the open region the problem lives in; point queries
work anywhere the expressions evaluate, global scans stay inside the box.
Also home to activity / criticality analysis of directions and the sampler
that supplies candidate critical directions to downstream certificates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import Expr, ExprError, evaluate, grad, parse_expr

__all__ = [
    "ProblemDef",
    "ActiveSet",
    "DirectionAnalysis",
    "ParseError",
    "EmptyObjectives",
    "BadBounds",
    "InfeasiblePoint",
    "parse_problem",
    "load_problem",
    "active_set",
    "analyze_direction",
    "sample_critical_directions",
]

DEFAULT_TOL = 1e-8


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class EmptyObjectives(Exception):
    pass


class BadBounds(Exception):
    pass


class InfeasiblePoint(Exception):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"constraint {index} violated: g = {value:.6g} > 0")


@dataclass(frozen=True, eq=False)
class ProblemDef:
    var_names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    objectives: tuple[Expr, ...]
    constraints: tuple[Expr, ...]
    source: str = ""

    @property
    def dim(self) -> int:
        return len(self.var_names)

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def in_box(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool((x >= self.lower - slack).all() and (x <= self.upper + slack).all())


@dataclass(frozen=True, eq=False)
class ActiveSet:
    point: np.ndarray
    tol: float
    indices: tuple[int, ...]  # sorted ascending
    values: np.ndarray  # all constraint values at the point


@dataclass(frozen=True, eq=False)
class DirectionAnalysis:
    point: np.ndarray
    active: ActiveSet
    direction: np.ndarray  # unit Euclidean norm, or exactly zero
    f_products: np.ndarray  # grad f_i · d, length n
    g_products: np.ndarray  # grad g_j · d for j in active.indices, same order
    is_critical: bool
    zero_objectives: tuple[int, ...]  # i with |grad f_i · d| below tolerance
    zero_constraints: tuple[int, ...]  # active j with |grad g_j · d| below tolerance
    tol: float


# ---------------------------------------------------------------------------
# file format:  var <name> in [<lo>, <hi>]  /  min <expr>  /  st <expr> <= 0


def parse_problem(text: str) -> ProblemDef:
    lines = text.splitlines()
    names: list[str] = []
    lowers: list[float] = []
    uppers: list[float] = []

    def strip_comment(raw: str) -> str:
        return raw.split("#", 1)[0].rstrip()

    # first pass: variable declarations (usable anywhere in the file)
    for ln, raw in enumerate(lines, start=1):
        body = strip_comment(raw)
        if not body.strip() or not body.strip().startswith("var "):
            continue
        rest = body.strip()[4:].strip()
        try:
            name, tail = rest.split(" in ", 1)
        except ValueError:
            raise ParseError(ln, 1, "expected: var <name> in [<lo>, <hi>]") from None
        name = name.strip()
        tail = tail.strip()
        if not (tail.startswith("[") and tail.endswith("]")) or "," not in tail:
            raise ParseError(ln, len(body) - len(tail) + 1, "expected bounds [<lo>, <hi>]")
        lo_s, hi_s = tail[1:-1].split(",", 1)
        try:
            lo, hi = float(lo_s), float(hi_s)
        except ValueError:
            raise ParseError(ln, 1, "bounds must be numbers") from None
        if not lo < hi:
            raise BadBounds(f"line {ln}: bound [{lo}, {hi}] is empty")
        if name in names:
            raise ParseError(ln, 1, f"duplicate variable {name!r}")
        names.append(name)
        lowers.append(lo)
        uppers.append(hi)

    objectives: list[Expr] = []
    constraints: list[Expr] = []
    for ln, raw in enumerate(lines, start=1):
        body = strip_comment(raw)
        stripped = body.strip()
        if not stripped or stripped.startswith("var "):
            continue
        if stripped.startswith("min "):
            src = stripped[4:]
            objectives.append(_parse_line_expr(src, names, ln, body))
        elif stripped.startswith("st ") or stripped.startswith("st\t"):
            src = stripped[3:].strip()
            base, sep, tail = src.rpartition("<=")
            if not sep or tail.strip() not in ("0", "0.0", "0."):
                raise ParseError(ln, 1, "constraint must end with '<= 0'")
            constraints.append(_parse_line_expr(base.strip(), names, ln, body))
        else:
            raise ParseError(ln, 1, f"unrecognized line {stripped.split()[0]!r}")
    if not objectives:
        raise EmptyObjectives("no 'min' lines found")
    return ProblemDef(
        var_names=tuple(names),
        lower=np.array(lowers),
        upper=np.array(uppers),
        objectives=tuple(objectives),
        constraints=tuple(constraints),
        source=text,
    )


def _parse_line_expr(src: str, names: list[str], ln: int, body: str) -> Expr:
    col0 = body.index(src) + 1 if src and src in body else 1
    try:
        return parse_expr(src, tuple(names))
    except ExprError as e:
        pos = getattr(e, "position", 0)
        raise ParseError(ln, col0 + max(pos, 0), str(e)) from None


def load_problem(path) -> ProblemDef:
    return parse_problem(Path(path).read_text())


# ---------------------------------------------------------------------------
# activity / criticality


def _scaled(tol: float, magnitude: float) -> float:
    return tol * (1.0 + abs(magnitude))


def active_set(P: ProblemDef, x, tol: float = DEFAULT_TOL) -> ActiveSet:
    x = np.asarray(x, dtype=float)
    vals = np.array([evaluate(g, x) for g in P.constraints])
    for j, v in enumerate(vals):
        if v > _scaled(tol, v):
            raise InfeasiblePoint(j, float(v))
    idx = tuple(j for j, v in enumerate(vals) if abs(v) <= _scaled(tol, v))
    return ActiveSet(point=x, tol=tol, indices=idx, values=vals)


def analyze_direction(P: ProblemDef, x, d, tol: float = DEFAULT_TOL) -> DirectionAnalysis:
    x = np.asarray(x, dtype=float)
    act = active_set(P, x, tol)
    d = np.asarray(d, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm > 0.0:
        d = d / norm
    fg = [grad(f, x) for f in P.objectives]
    fp = np.array([float(g @ d) for g in fg])
    gg = [grad(P.constraints[j], x) for j in act.indices]
    gp = np.array([float(g @ d) for g in gg])
    f_tols = np.array([_scaled(tol, np.linalg.norm(g)) for g in fg])
    g_tols = np.array([_scaled(tol, np.linalg.norm(g)) for g in gg])
    critical = bool((fp <= f_tols).all()) and bool((gp <= g_tols).all() if len(gp) else True)
    zo = tuple(i for i in range(len(fp)) if abs(fp[i]) <= f_tols[i])
    zc = tuple(
        act.indices[k] for k in range(len(gp)) if abs(gp[k]) <= g_tols[k]
    )
    return DirectionAnalysis(
        point=x,
        active=act,
        direction=d,
        f_products=fp,
        g_products=gp,
        is_critical=critical,
        zero_objectives=zo,
        zero_constraints=zc,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# direction sampling

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _radical_inverse(k: int, base: int) -> float:
    inv, denom = 0.0, 1.0
    while k:
        k, rem = divmod(k, base)
        denom *= base
        inv += rem / denom
    return inv


def _uniform_directions(s: int, count: int, seed: int):
    if s == 1:
        for k in range(count):
            yield np.array([1.0 if k % 2 == 0 else -1.0])
        return
    if s == 2:
        theta0 = (seed % 997) * (2.0 * np.pi / 997.0)
        for k in range(count):
            t = theta0 + k * _GOLDEN_ANGLE
            yield np.array([np.cos(t), np.sin(t)])
        return
    bases = _PRIMES[:s]
    k = 1 + (seed % 101) * 7
    produced = 0
    while produced < count:
        u = np.array([_radical_inverse(k, b) for b in bases])
        k += 1
        v = 2.0 * u - 1.0
        norm = float(np.linalg.norm(v))
        if norm < 1e-6:
            continue
        yield v / norm
        produced += 1


def _cone_edge_rays(P: ProblemDef, x, act: ActiveSet) -> list[np.ndarray]:
    """Null directions of (s-1)-subsets of the gradient rows: candidates for
    extreme rays of the polyhedral critical cone.  Without these, a cone of
    measure zero (a line, say) is invisible to any uniform sample."""
    s = P.dim
    rows = [grad(f, x) for f in P.objectives]
    rows += [grad(P.constraints[j], x) for j in act.indices]
    rows = [r for r in rows if np.linalg.norm(r) > 1e-12]
    rays: list[np.ndarray] = []
    if s < 2 or not rows:
        return rays
    take = min(s - 1, len(rows))
    combos = itertools.combinations(range(len(rows)), take)
    for picked in itertools.islice(combos, 200):
        M = np.array([rows[i] for i in picked])
        _, sv, vt = np.linalg.svd(M)
        null = vt[np.sum(sv > 1e-9 * max(1.0, sv[0])) :]
        for vec in null[:2]:
            rays.append(vec)
            rays.append(-vec)
    return rays


def sample_critical_directions(
    P: ProblemDef, x, count: int = 64, seed: int = 0, tol: float = DEFAULT_TOL
) -> list[DirectionAnalysis]:
    """Critical subset of: `count` low-discrepancy unit directions, the
    +/- coordinate axes, candidate cone-edge rays, and the zero direction.
    Deterministic for a given seed."""
    x = np.asarray(x, dtype=float)
    act = active_set(P, x, tol)
    s = P.dim
    candidates: list[np.ndarray] = list(_uniform_directions(s, count, seed))
    eye = np.eye(s)
    for i in range(s):
        candidates.append(eye[i].copy())
        candidates.append(-eye[i])
    candidates.extend(_cone_edge_rays(P, x, act))
    candidates.append(np.zeros(s))

    out: list[DirectionAnalysis] = []
    seen: list[np.ndarray] = []
    for d in candidates:
        norm = float(np.linalg.norm(d))
        unit = d / norm if norm > 0 else d
        if any(np.linalg.norm(unit - u) <= 1e-9 for u in seen):
            continue
        seen.append(unit)
        da = analyze_direction(P, x, unit, tol)
        if da.is_critical:
            out.append(da)
    return out
