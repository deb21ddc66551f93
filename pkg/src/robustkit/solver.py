"""Embedded LP/MIP engine.

A dense two-phase tableau simplex handles linear programs; a depth-first
branch-and-bound on top of it handles integer columns.  It is meant for the
desk-scale models produced by the counterpart builders, not for large LPs.
"""

import heapq
import math
import re
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InstanceError

INF = math.inf
SENSES = ("<=", ">=", "=")

PIVOT_TOL = 1e-9
DEGENERATE_SWITCH = 1000
DEFAULT_MAX_ITER = 100_000
DEFAULT_MAX_NODES = 1_000_000


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-7
    integrality: float = 1e-6
    cut: float = 1e-6


_TOLERANCES = ContextVar("robustkit_tolerances", default=Tolerances())


def tolerances():
    return _TOLERANCES.get()


@contextmanager
def using_tolerances(**overrides):
    """Temporarily override solver tolerances (feas, integrality, cut)."""
    token = _TOLERANCES.set(replace(_TOLERANCES.get(), **overrides))
    try:
        yield _TOLERANCES.get()
    finally:
        _TOLERANCES.reset(token)


@dataclass(frozen=True)
class Column:
    name: str
    lower: float = 0.0
    upper: float = INF
    integer: bool = False
    cost: float = 0.0


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: dict
    sense: str
    rhs: float


@dataclass(frozen=True)
class DeterministicModel:
    sense: str
    columns: tuple
    rows: tuple
    name: str = "model"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"bad sense {self.sense!r}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def column_names(self):
        return [c.name for c in self.columns]

    @property
    def is_mip(self):
        return any(c.integer for c in self.columns)

    def objective_value(self, assignment):
        return float(sum(c.cost * assignment.get(c.name, 0.0) for c in self.columns))

    def max_violation(self, assignment):
        """Largest row or bound violation of ``assignment`` (0 when feasible)."""
        worst = 0.0
        for c in self.columns:
            v = assignment.get(c.name, 0.0)
            worst = max(worst, c.lower - v, v - c.upper)
        for r in self.rows:
            lhs = sum(a * assignment.get(n, 0.0) for n, a in r.coeffs.items())
            worst = max(worst, row_violation(lhs, r.sense, r.rhs))
        return worst

    def relaxed(self):
        return replace(self, columns=tuple(replace(c, integer=False) for c in self.columns))

    def to_arrays(self):
        index = {c.name: j for j, c in enumerate(self.columns)}
        n, m = len(self.columns), len(self.rows)
        A = np.zeros((m, n))
        for i, r in enumerate(self.rows):
            for name, a in r.coeffs.items():
                A[i, index[name]] += a
        c = np.array([col.cost for col in self.columns], dtype=float)
        b = np.array([r.rhs for r in self.rows], dtype=float)
        lo = np.array([col.lower for col in self.columns], dtype=float)
        hi = np.array([col.upper for col in self.columns], dtype=float)
        senses = [r.sense for r in self.rows]
        return c, A, senses, b, lo, hi


def row_violation(lhs, sense, rhs):
    if sense == "<=":
        return lhs - rhs
    if sense == ">=":
        return rhs - lhs
    return abs(lhs - rhs)


@dataclass
class SolveReport:
    status: str
    objective: float = math.nan
    assignment: dict = None
    iterations: int = 0
    nodes: int = 0
    cuts: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == "optimal"

    @property
    def counters(self):
        return {"iterations": self.iterations, "nodes": self.nodes, "cuts": self.cuts}

    def to_dict(self):
        return {
            "status": self.status,
            "objective": self.objective if self.optimal else None,
            "assignment": self.assignment,
            "counters": self.counters,
        }


# ---------------------------------------------------------------------------
# simplex on arrays


class _Result:
    __slots__ = ("status", "x", "obj", "iters")

    def __init__(self, status, x=None, obj=math.nan, iters=0):
        self.status, self.x, self.obj, self.iters = status, x, obj, iters


def _standard_form(c, A, senses, b, lo, hi):
    """Rewrite bounds so every structural variable is >= 0.

    Returns (rows, rhs, row_senses, cost, const_obj, back) where ``back`` maps
    the standard solution to the original variables via x = offset + T y.
    """
    n = len(c)
    T_cols = []  # list of (orig index, sign)
    offset = np.zeros(n)
    extra_rows = []  # (std var index, upper bound)
    for j in range(n):
        l, u = lo[j], hi[j]
        if l > u:
            return None
        if l == u:
            offset[j] = l
        elif math.isfinite(l):
            offset[j] = l
            T_cols.append((j, 1.0))
            if math.isfinite(u):
                extra_rows.append((len(T_cols) - 1, u - l))
        elif math.isfinite(u):
            offset[j] = u
            T_cols.append((j, -1.0))
        else:
            T_cols.append((j, 1.0))
            T_cols.append((j, -1.0))
    k = len(T_cols)
    T = np.zeros((n, k))
    for s, (j, sign) in enumerate(T_cols):
        T[j, s] = sign
    rows = A @ T if A.size else np.zeros((len(b), k))
    rhs = b - (A @ offset if A.size else 0.0)
    row_senses = list(senses)
    if extra_rows:
        E = np.zeros((len(extra_rows), k))
        for i, (s, ub) in enumerate(extra_rows):
            E[i, s] = 1.0
        rows = np.vstack([rows, E]) if rows.size else E
        rhs = np.concatenate([rhs, [ub for _, ub in extra_rows]])
        row_senses += ["<="] * len(extra_rows)
    cost = c @ T
    const = float(c @ offset)
    return rows.reshape(len(rhs), k), np.asarray(rhs, float), row_senses, cost, const, (offset, T)


def _pivot(tab, r, k):
    tab[r] /= tab[r, k]
    col = tab[:, k].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _iterate(tab, basis, allowed, budget):
    """Primal simplex iterations on a tableau whose last row holds reduced costs."""
    m = tab.shape[0] - 1
    iters = 0
    degenerate = 0
    bland = False
    while True:
        d = tab[-1, :-1]
        cand = np.flatnonzero((d < -1e-9) & allowed)
        if cand.size == 0:
            return "optimal", iters
        if iters >= budget:
            return "iteration-limit", iters
        k = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
        col = tab[:m, k]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", iters
        rhs = np.maximum(tab[pos, -1], 0.0)
        ratios = rhs / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1.0 + best)]
        if bland:
            r = int(min(ties, key=lambda i: basis[i]))
        else:
            r = int(ties[np.argmax(col[ties])])
        if best <= 1e-12:
            degenerate += 1
            if degenerate > DEGENERATE_SWITCH:
                bland = True
        _pivot(tab, r, k)
        basis[r] = k
        iters += 1


def _simplex(c, A, senses, b, lo, hi, max_iter=DEFAULT_MAX_ITER, feas_tol=1e-7):
    sf = _standard_form(c, A, senses, b, lo, hi)
    if sf is None:
        return _Result("infeasible")
    rows, rhs, row_senses, cost, const, (offset, T) = sf
    k = rows.shape[1]

    # presolve: empty rows are checked and dropped
    keep = []
    for i in range(len(rhs)):
        if np.any(rows[i] != 0.0):
            keep.append(i)
        elif row_violation(0.0, row_senses[i], rhs[i]) > feas_tol:
            return _Result("infeasible")
    rows = rows[keep]
    rhs = rhs[keep]
    row_senses = [row_senses[i] for i in keep]
    m = len(rhs)

    flip = rhs < 0
    rows = np.where(flip[:, None], -rows, rows)
    rhs = np.abs(rhs)
    row_senses = [
        ({"<=": ">=", ">=": "<="}.get(s, s) if f else s) for s, f in zip(row_senses, flip)
    ]
    n_slack = sum(1 for s in row_senses if s != "=")
    arts = [i for i, s in enumerate(row_senses) if s != "<="]
    ncol = k + n_slack + len(arts)
    std = np.zeros((m, ncol))
    std[:, :k] = rows
    basis = [0] * m
    s_at = k
    a_at = k + n_slack
    art_cols = []
    for i, s in enumerate(row_senses):
        if s == "<=":
            std[i, s_at] = 1.0
            basis[i] = s_at
            s_at += 1
        elif s == ">=":
            std[i, s_at] = -1.0
            s_at += 1
        if s != "<=":
            std[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1

    tab = np.zeros((m + 1, ncol + 1))
    tab[:m, :ncol] = std
    tab[:m, -1] = rhs
    allowed = np.ones(ncol, dtype=bool)
    allowed[k + n_slack:] = False
    iters = 0

    if arts:
        for i in arts:
            tab[-1] -= tab[i]
        for a in art_cols:
            tab[-1, a] = 0.0
        status, it = _iterate(tab, basis, allowed, max_iter)
        iters += it
        if status == "iteration-limit":
            return _Result(status, iters=iters)
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        if -tab[-1, -1] > feas_tol * scale:
            return _Result("infeasible", iters=iters)
        # drive remaining artificials out of the basis; drop redundant rows
        drop = []
        art_set = set(art_cols)
        for r in range(m):
            if basis[r] in art_set:
                cand = np.flatnonzero(allowed & (np.abs(tab[r, :-1]) > PIVOT_TOL))
                if cand.size:
                    j = int(cand[np.argmax(np.abs(tab[r, cand]))])
                    _pivot(tab, r, j)
                    basis[r] = j
                else:
                    drop.append(r)
        if drop:
            keep_rows = [r for r in range(m) if r not in drop]
            tab = tab[keep_rows + [m]]
            std = std[keep_rows]
            rhs = rhs[keep_rows]
            basis = [basis[r] for r in keep_rows]
            m = len(keep_rows)

    full_cost = np.zeros(ncol)
    full_cost[:k] = cost
    tab[-1, :] = 0.0
    tab[-1, :ncol] = full_cost
    for r in range(m):
        if full_cost[basis[r]] != 0.0:
            tab[-1] -= full_cost[basis[r]] * tab[r]
    status, it = _iterate(tab, basis, allowed, max_iter - iters)
    iters += it
    if status != "optimal":
        return _Result(status, iters=iters)

    y = np.zeros(ncol)
    y[basis] = tab[:m, -1]
    if m:
        B = std[:, basis]
        try:
            refined = np.linalg.solve(B, rhs)
            if np.all(np.isfinite(refined)) and np.abs(refined - y[basis]).max() < 1e-6 * (1 + np.abs(refined).max()):
                y[basis] = refined
        except np.linalg.LinAlgError:
            pass
    y = np.maximum(y, 0.0)
    x = offset + T @ y[:k]
    x = np.clip(x, lo, hi)
    return _Result("optimal", x=x, obj=float(c @ x), iters=iters)


def _finish(model, res, nodes=0):
    if res.status != "optimal":
        return SolveReport(res.status, iterations=res.iters, nodes=nodes)
    assignment = {col.name: float(v) for col, v in zip(model.columns, res.x)}
    return SolveReport(
        "optimal",
        objective=model.objective_value(assignment),
        assignment=assignment,
        iterations=res.iters,
        nodes=nodes,
    )


def solve_lp(model, max_iter=DEFAULT_MAX_ITER):
    """Solve the LP relaxation of ``model`` (integer flags are ignored)."""
    c, A, senses, b, lo, hi = model.to_arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    res = _simplex(sign * c, A, senses, b, lo, hi, max_iter, tolerances().feas)
    return _finish(model, res)


def solve_mip(model, max_nodes=DEFAULT_MAX_NODES, max_iter=DEFAULT_MAX_ITER):
    """Depth-first branch-and-bound over the integer columns of ``model``.

    Branches on the most fractional column (lowest index on ties); among open
    nodes the deepest is explored first, then the one with the best bound.
    """
    if not model.is_mip:
        return solve_lp(model, max_iter)
    c, A, senses, b, lo, hi = model.to_arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    ints = np.array([col.integer for col in model.columns])
    res = branch_and_bound(sign * c, A, senses, b, lo, hi, ints, max_nodes, max_iter)
    if res.status == "optimal":
        assignment = _rounded(model, res.x, ints)
        return SolveReport(
            "optimal",
            objective=model.objective_value(assignment),
            assignment=assignment,
            iterations=res.iters,
            nodes=res.nodes,
        )
    out = SolveReport(res.status, iterations=res.iters, nodes=res.nodes)
    if res.x is not None:
        out.info["incumbent"] = _rounded(model, res.x, ints)
    return out


@dataclass
class BranchResult:
    status: str
    x: object = None
    obj: float = INF
    iters: int = 0
    nodes: int = 0


def branch_and_bound(c, A, senses, b, lo, hi, ints,
                     max_nodes=DEFAULT_MAX_NODES, max_iter=DEFAULT_MAX_ITER):
    """Minimize ``c @ x`` over array data; ``ints`` masks the integer columns.

    On a node limit the status is ``iteration-limit`` and ``x`` holds the
    incumbent, if any.
    """
    tol = tolerances()
    ints = np.asarray(ints, dtype=bool)
    lo = np.where(ints, np.ceil(lo - tol.integrality), lo)
    hi = np.where(ints, np.floor(hi + tol.integrality), hi)
    iters = 0
    nodes = 0

    def node_lp(l, h):
        nonlocal iters, nodes
        res = _simplex(c, A, senses, b, l, h, max_iter, tol.feas)
        iters += res.iters
        nodes += 1
        return res

    root = node_lp(lo, hi)
    if root.status != "optimal":
        return BranchResult(root.status, iters=iters, nodes=nodes)

    incumbent = INF
    best = None
    heap = [(0, root.obj, 0, lo, hi, root.x)]
    seq = 1
    while heap:
        depth, bound, _, l, h, x = heapq.heappop(heap)
        if not _improves(bound, incumbent):
            continue
        frac = np.abs(x - np.round(x))
        frac = np.where(ints, frac, 0.0)
        if frac.max(initial=0.0) <= tol.integrality:
            incumbent, best = bound, x
            continue
        j = int(np.argmax(frac))
        for new_lo, new_hi in (
            (l, _with(h, j, math.floor(x[j]))),
            (_with(l, j, math.ceil(x[j])), h),
        ):
            if nodes >= max_nodes:
                return BranchResult("iteration-limit", best, incumbent, iters, nodes)
            res = node_lp(new_lo, new_hi)
            if res.status == "optimal" and _improves(res.obj, incumbent):
                heapq.heappush(heap, (depth - 1, res.obj, seq, new_lo, new_hi, res.x))
                seq += 1
            elif res.status == "iteration-limit":
                return BranchResult("iteration-limit", best, incumbent, iters, nodes)
    if best is None:
        return BranchResult("infeasible", iters=iters, nodes=nodes)
    best = np.where(ints, np.round(best), best)
    return BranchResult("optimal", best, float(c @ best), iters, nodes)


def _improves(bound, incumbent):
    return incumbent == INF or bound < incumbent - 1e-9 * max(1.0, abs(incumbent))


def _with(arr, j, value):
    out = arr.copy()
    out[j] = value
    return out


def _rounded(model, x, ints):
    x = np.where(ints, np.round(x), x)
    return {col.name: float(v) for col, v in zip(model.columns, x)}


def solve(model, **kw):
    """Dispatch to :func:`solve_mip` or :func:`solve_lp`."""
    return solve_mip(model, **kw) if model.is_mip else solve_lp(model, **kw)


# ---------------------------------------------------------------------------
# LP-text debug format


def _num(v):
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return repr(float(v))


def _terms(coeffs):
    parts = []
    for name, a in coeffs.items():
        if a == 0:
            continue
        parts.append(f"{'-' if a < 0 else '+'} {_num(abs(a))} {name}")
    return " ".join(parts)


def to_lp_text(model):
    lines = [f"\\ {model.name}", "Minimize" if model.sense == "min" else "Maximize"]
    lines.append(f" obj: {_terms({c.name: c.cost for c in model.columns})}".rstrip())
    lines.append("Subject To")
    for r in model.rows:
        lines.append(f" {r.name}: {_terms(r.coeffs)} {r.sense} {_num(r.rhs)}".replace(":  ", ": "))
    lines.append("Bounds")
    for c in model.columns:
        lines.append(f" {_num(c.lower)} <= {c.name} <= {_num(c.upper)}")
    ints = [c.name for c in model.columns if c.integer]
    if ints:
        lines.append("Generals")
        lines.extend(f" {n}" for n in ints)
    lines.append("End")
    return "\n".join(lines) + "\n"


_TERM = re.compile(r"([+-])\s+(\S+)\s+(\S+)")


def _parse_num(tok):
    if tok in ("+inf", "inf"):
        return INF
    if tok == "-inf":
        return -INF
    return float(tok)


def _parse_terms(text, lineno):
    coeffs = {}
    text = text.strip()
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m:
            raise InstanceError("SYNTAX", f"bad term {text[pos:]!r}", lineno, pos + 1)
        a = _parse_num(m.group(2))
        coeffs[m.group(3)] = coeffs.get(m.group(3), 0.0) + (a if m.group(1) == "+" else -a)
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return coeffs


def from_lp_text(text):
    """Parse the output of :func:`to_lp_text` back into a model."""
    name = "model"
    sense = None
    section = None
    cost = {}
    rows = []
    bounds = []
    generals = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if lineno == 1:
                name = line[1:].strip() or name
            continue
        key = line.lower()
        if key in ("minimize", "maximize"):
            sense = "min" if key == "minimize" else "max"
            section = "obj"
            continue
        if key in ("subject to", "bounds", "generals", "end"):
            section = key
            continue
        if section == "obj":
            head, _, rest = line.partition(":")
            cost = _parse_terms(rest, lineno)
        elif section == "subject to":
            head, _, rest = line.partition(":")
            m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)$", rest.strip())
            if not m:
                raise InstanceError("SYNTAX", f"bad row {line!r}", lineno, 1)
            rows.append(Row(head.strip(), _parse_terms(m.group(1), lineno), m.group(2), _parse_num(m.group(3))))
        elif section == "bounds":
            parts = line.split()
            if len(parts) != 5 or parts[1] != "<=" or parts[3] != "<=":
                raise InstanceError("SYNTAX", f"bad bound {line!r}", lineno, 1)
            bounds.append((parts[2], _parse_num(parts[0]), _parse_num(parts[4])))
        elif section == "generals":
            generals.update(line.split())
        else:
            raise InstanceError("SYNTAX", f"unexpected line {line!r}", lineno, 1)
    if sense is None:
        raise InstanceError("SYNTAX", "missing Minimize/Maximize section")
    columns = [Column(n, l, u, n in generals, cost.get(n, 0.0)) for n, l, u in bounds]
    return DeterministicModel(sense, tuple(columns), tuple(rows), name)
