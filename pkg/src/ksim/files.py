"""On-disk formats: metric tables, tree descriptions, request/config lists.

Metric file: first non-comment token is n, followed by the n*(n-1)/2
upper-triangle distances in row-major order, whitespace-separated.  Tree
file: a `mu` line (integer or p/q) and a `branching` line with per-level
child counts.  Requests and configurations are whitespace-separated point
ids.  Lines starting with '#' are comments.  Parsers report the offending
line on failure and re-validate every structural invariant on load.
"""

from __future__ import annotations

from fractions import Fraction

from .metric import FiniteMetric, HstSpace, build_hst


class ParseError(ValueError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _content_lines(path: str) -> list[tuple[int, str]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                out.append((i, stripped))
    return out


def _tokens_with_lines(path: str) -> list[tuple[int, str]]:
    toks = []
    for lineno, text in _content_lines(path):
        for tok in text.split():
            toks.append((lineno, tok))
    return toks


def _parse_rational(path: str, lineno: int, tok: str, what: str) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(path, lineno, f"bad {what} {tok!r}, expected integer or p/q") from None


def load_metric(path: str) -> FiniteMetric:
    toks = _tokens_with_lines(path)
    if not toks:
        raise ParseError(path, 1, "empty metric file")
    lineno, tok = toks[0]
    try:
        n = int(tok)
    except ValueError:
        raise ParseError(path, lineno, f"bad point count {tok!r}") from None
    if n < 1:
        raise ParseError(path, lineno, f"point count must be >= 1, got {n}")
    expected = n * (n - 1) // 2
    rest = toks[1:]
    if len(rest) != expected:
        where = rest[-1][0] if rest else lineno
        raise ParseError(path, where,
                         f"expected {expected} distances for n={n}, got {len(rest)}")
    values = [_parse_rational(path, ln, tk, "distance") for ln, tk in rest]
    try:
        return FiniteMetric.from_upper_triangle(n, values)
    except (ValueError, TypeError) as exc:
        raise ParseError(path, lineno, str(exc)) from None


def load_hst(path: str) -> HstSpace:
    mu = None
    branching = None
    for lineno, text in _content_lines(path):
        fields = text.split()
        key = fields[0]
        if key == "mu":
            if len(fields) != 2:
                raise ParseError(path, lineno, "mu line needs exactly one value")
            mu = _parse_rational(path, lineno, fields[1], "mu")
            mu_line = lineno
        elif key == "branching":
            if len(fields) < 2:
                raise ParseError(path, lineno, "branching line needs at least one count")
            try:
                branching = [int(f) for f in fields[1:]]
            except ValueError:
                raise ParseError(path, lineno, "branching counts must be integers") from None
            branching_line = lineno
        else:
            raise ParseError(path, lineno, f"unknown field {key!r}, expected mu or branching")
    if mu is None:
        raise ParseError(path, 1, "missing mu line")
    if branching is None:
        raise ParseError(path, 1, "missing branching line")
    if mu <= 1:
        raise ParseError(path, mu_line, f"mu must be > 1, got {mu}")
    if any(b < 1 for b in branching):
        raise ParseError(path, branching_line, "branching counts must be >= 1")
    return build_hst(branching, mu)


def load_requests(path: str, n: int) -> list[int]:
    out = []
    for lineno, tok in _tokens_with_lines(path):
        try:
            r = int(tok)
        except ValueError:
            raise ParseError(path, lineno, f"bad point id {tok!r}") from None
        if not (0 <= r < n):
            raise ParseError(path, lineno, f"point id {r} out of range [0, {n})")
        out.append(r)
    return out


def load_configuration(path: str, n: int) -> frozenset:
    ids = load_requests(path, n)
    cfg = frozenset(ids)
    if len(cfg) != len(ids):
        raise ParseError(path, 1, "configuration points must be distinct")
    return cfg
