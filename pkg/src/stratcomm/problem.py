"""Finite-alphabet problem instances: source, channel and the two distortion tables.

Problem files are UTF-8 text split into ``[section]`` blocks::

    # DSBS(p0=0.5, delta=0.3), Hamming distortions
    [alphabets]
    u = 2
    z = 2
    x = 2
    y = 2
    v = 2

    [p_uz]
    0.35 0.15
    0.15 0.35

    [channel]
    1 0
    0 1

    [d_e]          # one row per (u, z), lexicographic
    0 1
    0 1
    1 0
    1 0

    [d_d]
    ...

A ``[capacity]`` section holding a single number may replace ``[channel]``
when only the capacity of the channel matters.

Channel files carry just ``[alphabets]`` (x, y) and ``[channel]``; strategy files
carry ``[alphabets]`` (u, w) and ``[q_w_given_u]`` with one row per source symbol.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROB_TOL = 1e-12

_SECTIONS = ("alphabets", "p_uz", "channel", "capacity", "d_e", "d_d")
_ALPHABET_KEYS = ("u", "z", "x", "y", "v", "w")
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class ProblemFormatError(ValueError):
    """Malformed problem file; the message carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProblemValidationError(ValueError):
    """A table violates a probability or finiteness invariant."""


def _check_distribution(vec: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(vec)):
        raise ProblemValidationError(f"{what}: non-finite entry")
    neg = np.flatnonzero(vec < 0)
    if neg.size:
        raise ProblemValidationError(f"{what}: negative entry at index {int(neg[0])} ({vec[neg[0]]!r})")
    total = float(math.fsum(vec))
    if abs(total - 1.0) > PROB_TOL:
        raise ProblemValidationError(f"{what}: sums to {total!r}, expected 1")


def _renormalize(vec: np.ndarray) -> np.ndarray:
    # exact sums already within rounding noise are left alone so that write/read round trips are exact
    total = math.fsum(vec)
    return vec if abs(total - 1.0) <= 1e-14 else vec / total


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Source law ``p_uz``, channel ``t_yx`` (rows indexed by x) and distortions ``d_e``/``d_d``.

    ``d_e`` and ``d_d`` have shape ``(u, z, v)``. ``t_yx`` may be ``None`` when the
    instance only carries a channel ``capacity`` in bits.
    Construction validates every table and renormalizes probabilities to exact sums.
    """

    p_uz: np.ndarray
    d_e: np.ndarray
    d_d: np.ndarray
    t_yx: np.ndarray | None = None
    capacity: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        p_uz = np.array(self.p_uz, dtype=float)
        d_e = np.array(self.d_e, dtype=float)
        d_d = np.array(self.d_d, dtype=float)
        if p_uz.ndim != 2 or min(p_uz.shape) < 1:
            raise ProblemValidationError("p_uz must be a non-empty 2-d table")
        u_size, z_size = p_uz.shape
        _check_distribution(p_uz.ravel(), "p_uz")
        p_uz = _renormalize(p_uz.ravel()).reshape(p_uz.shape)
        for name, table in (("d_e", d_e), ("d_d", d_d)):
            if table.ndim != 3 or table.shape[:2] != (u_size, z_size) or table.shape[2] < 1:
                raise ProblemValidationError(
                    f"{name} must have shape (u={u_size}, z={z_size}, v), got {table.shape}")
            bad = np.argwhere(~np.isfinite(table))
            if bad.size:
                raise ProblemValidationError(f"{name}: non-finite entry at (u,z,v)={tuple(bad[0])}")
        if d_e.shape != d_d.shape:
            raise ProblemValidationError("d_e and d_d must share the same v alphabet")

        t_yx = self.t_yx
        if t_yx is not None:
            t_yx = np.array(t_yx, dtype=float)
            if t_yx.ndim != 2 or min(t_yx.shape) < 1:
                raise ProblemValidationError("channel must be a non-empty 2-d table")
            for x, row in enumerate(t_yx):
                _check_distribution(row, f"channel row {x}")
            t_yx = np.array([_renormalize(row) for row in t_yx])
            t_yx.setflags(write=False)
        elif self.capacity is None:
            raise ProblemValidationError("either a channel table or a capacity is required")
        if self.capacity is not None and not (math.isfinite(self.capacity) and self.capacity >= 0):
            raise ProblemValidationError(f"capacity must be a finite non-negative number, got {self.capacity!r}")

        for arr in (p_uz, d_e, d_d):
            arr.setflags(write=False)
        object.__setattr__(self, "p_uz", p_uz)
        object.__setattr__(self, "d_e", d_e)
        object.__setattr__(self, "d_d", d_d)
        object.__setattr__(self, "t_yx", t_yx)

    @property
    def u_size(self) -> int:
        return self.p_uz.shape[0]

    @property
    def z_size(self) -> int:
        return self.p_uz.shape[1]

    @property
    def v_size(self) -> int:
        return self.d_e.shape[2]

    @property
    def x_size(self) -> int | None:
        return None if self.t_yx is None else self.t_yx.shape[0]

    @property
    def y_size(self) -> int | None:
        return None if self.t_yx is None else self.t_yx.shape[1]

    @property
    def p_u(self) -> np.ndarray:
        return self.p_uz.sum(axis=1)

    @property
    def p_z_given_u(self) -> np.ndarray:
        """Rows P(.|u); rows of unused source symbols are set uniform."""
        if "p_z_given_u" not in self._cache:
            p_u = self.p_u
            out = np.full_like(self.p_uz, 1.0 / self.z_size)
            used = p_u > 0
            out[used] = self.p_uz[used] / p_u[used, None]
            out.setflags(write=False)
            self._cache["p_z_given_u"] = out
        return self._cache["p_z_given_u"]

    @property
    def unused_u(self) -> tuple[int, ...]:
        """Source symbols with zero prior probability."""
        return tuple(int(u) for u in np.flatnonzero(self.p_u == 0))

    def with_distortions(self, d_e=None, d_d=None) -> "ProblemSpec":
        return ProblemSpec(self.p_uz, self.d_e if d_e is None else d_e,
                           self.d_d if d_d is None else d_d, self.t_yx, self.capacity)

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        same_channel = (self.t_yx is None and other.t_yx is None) or (
            self.t_yx is not None and other.t_yx is not None
            and self.t_yx.shape == other.t_yx.shape and np.array_equal(self.t_yx, other.t_yx))
        return (self.p_uz.shape == other.p_uz.shape and np.array_equal(self.p_uz, other.p_uz)
                and self.d_e.shape == other.d_e.shape and np.array_equal(self.d_e, other.d_e)
                and np.array_equal(self.d_d, other.d_d)
                and same_channel and self.capacity == other.capacity)

    __hash__ = None


@dataclass(frozen=True)
class DsbsParams:
    """Binary source with prior ``p0 = P(u1)``, side-information crossovers ``delta0``/``delta1``,
    decoder extra cost ``kappa`` and channel capacity ``capacity`` in bits per symbol."""

    p0: float = 0.5
    delta0: float = 0.3
    delta1: float = 0.3
    kappa: float = 0.0
    capacity: float = 0.0

    def __post_init__(self):
        for name in ("p0", "delta0", "delta1", "kappa"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ProblemValidationError(f"{name} must lie in [0, 1], got {value!r}")
        if not (math.isfinite(self.capacity) and self.capacity >= 0):
            raise ProblemValidationError(f"capacity must be >= 0, got {self.capacity!r}")

    @property
    def is_symmetric(self) -> bool:
        return self.delta0 == self.delta1 and self.delta0 < 0.5 and self.kappa == 0.0

    @classmethod
    def symmetric(cls, delta: float, capacity: float, p0: float = 0.5) -> "DsbsParams":
        return cls(p0=p0, delta0=delta, delta1=delta, kappa=0.0, capacity=capacity)


def hamming(size: int) -> np.ndarray:
    return 1.0 - np.eye(size)


def binary_distortions(kappa: float, z_size: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Hamming encoder distortion and the decoder distortion with extra cost ``kappa`` on v1.

    Neither depends on z; the tables are broadcast over the side-information alphabet.
    """
    d_e = hamming(2)
    d_d = np.array([[0.0, 1.0 + kappa], [1.0, kappa]])
    return (np.repeat(d_e[:, None, :], z_size, axis=1),
            np.repeat(d_d[:, None, :], z_size, axis=1))


def dsbs_to_problem(params: DsbsParams, channel=None) -> ProblemSpec:
    """Binary instance with U ~ Bern(p0) and Z|U given by the two crossover probabilities.

    Without a channel table, the capacity from ``params`` is stored on the problem.
    """
    p, d0, d1 = params.p0, params.delta0, params.delta1
    p_uz = np.array([[(1 - p) * (1 - d0), (1 - p) * d0],
                     [p * d1, p * (1 - d1)]])
    d_e, d_d = binary_distortions(params.kappa)
    if channel is None:
        return ProblemSpec(p_uz, d_e, d_d, capacity=params.capacity)
    return ProblemSpec(p_uz, d_e, d_d, t_yx=np.asarray(channel, dtype=float))


# ---------------------------------------------------------------------------
# file format


def _parse_number(token: str, line: int) -> float:
    if not _NUMBER.match(token):
        raise ProblemFormatError(f"not a decimal number: {token!r}", line)
    return float(token)


def parse_sections(text: str, allowed=_SECTIONS) -> dict[str, list[tuple[int, str]]]:
    """Split sectioned text into ``{name: [(line_no, content), ...]}`` with comments stripped."""
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if content.startswith("["):
            if not content.endswith("]"):
                raise ProblemFormatError(f"unterminated section header {content!r}", lineno)
            name = content[1:-1].strip().lower()
            if name not in allowed:
                raise ProblemFormatError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ProblemFormatError(f"duplicate section [{name}]", lineno)
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ProblemFormatError("content before the first section header", lineno)
        sections[current].append((lineno, content))
    return sections


def parse_table(rows: list[tuple[int, str]], n_rows: int, n_cols: int, name: str,
                header_line: int | None = None) -> np.ndarray:
    if len(rows) != n_rows:
        line = rows[-1][0] if rows else header_line
        raise ProblemFormatError(f"[{name}] expects {n_rows} rows, found {len(rows)}", line)
    out = np.empty((n_rows, n_cols))
    for i, (lineno, content) in enumerate(rows):
        tokens = content.split()
        if len(tokens) != n_cols:
            raise ProblemFormatError(f"[{name}] row {i} expects {n_cols} values, found {len(tokens)}", lineno)
        out[i] = [_parse_number(tok, lineno) for tok in tokens]
    return out


def _parse_alphabets(rows) -> dict[str, int]:
    sizes = {}
    for lineno, content in rows:
        if "=" not in content:
            raise ProblemFormatError(f"expected 'key = value', got {content!r}", lineno)
        key, value = (s.strip().lower() for s in content.split("=", 1))
        if key not in _ALPHABET_KEYS:
            raise ProblemFormatError(f"unknown alphabet {key!r}", lineno)
        if not value.isdigit() or int(value) < 1:
            raise ProblemFormatError(f"alphabet size must be a positive integer, got {value!r}", lineno)
        sizes[key] = int(value)
    return sizes


def parse_problem(text: str) -> ProblemSpec:
    sections = parse_sections(text)
    if "alphabets" not in sections:
        raise ProblemFormatError("missing section [alphabets]")
    sizes = _parse_alphabets(sections["alphabets"])
    for key in ("u", "z", "v"):
        if key not in sizes:
            raise ProblemFormatError(f"[alphabets] is missing {key!r}")
    u, z, v = sizes["u"], sizes["z"], sizes["v"]

    shapes = {"p_uz": (u, z), "d_e": (u * z, v), "d_d": (u * z, v)}
    tables = {name: parse_table(sections[name], *shape, name) for name, shape in shapes.items() if name in sections}
    for required in shapes:
        if required not in tables:
            raise ProblemFormatError(f"missing section [{required}]")
    p_uz = tables["p_uz"]
    d_e = tables["d_e"].reshape(u, z, v)
    d_d = tables["d_d"].reshape(u, z, v)

    t_yx = capacity = None
    if "channel" in sections:
        if "x" not in sizes or "y" not in sizes:
            raise ProblemFormatError("[alphabets] needs x and y when a [channel] is given")
        t_yx = parse_table(sections["channel"], sizes["x"], sizes["y"], "channel")
    if "capacity" in sections:
        cap_rows = sections["capacity"]
        if len(cap_rows) != 1 or len(cap_rows[0][1].split()) != 1:
            raise ProblemFormatError("[capacity] holds exactly one number", cap_rows[0][0] if cap_rows else None)
        capacity = _parse_number(cap_rows[0][1], cap_rows[0][0])
    if t_yx is None and capacity is None:
        raise ProblemFormatError("one of [channel] or [capacity] is required")
    return ProblemSpec(p_uz, d_e, d_d, t_yx=t_yx, capacity=capacity)


def load_problem(path) -> ProblemSpec:
    return parse_problem(Path(path).read_text(encoding="utf-8"))


def _fmt_row(values) -> str:
    return " ".join(repr(float(x)) for x in values)


def format_problem(problem: ProblemSpec) -> str:
    lines = ["[alphabets]", f"u = {problem.u_size}", f"z = {problem.z_size}"]
    if problem.t_yx is not None:
        lines += [f"x = {problem.x_size}", f"y = {problem.y_size}"]
    lines += [f"v = {problem.v_size}", "", "[p_uz]"]
    lines += [_fmt_row(row) for row in problem.p_uz]
    if problem.t_yx is not None:
        lines += ["", "[channel]"] + [_fmt_row(row) for row in problem.t_yx]
    if problem.capacity is not None:
        lines += ["", "[capacity]", repr(float(problem.capacity))]
    for name, table in (("d_e", problem.d_e), ("d_d", problem.d_d)):
        lines += ["", f"[{name}]"]
        lines += [_fmt_row(table[u, z]) for u in range(problem.u_size) for z in range(problem.z_size)]
    return "\n".join(lines) + "\n"


def save_problem(problem: ProblemSpec, path) -> None:
    Path(path).write_text(format_problem(problem), encoding="utf-8", newline="\n")


def _stochastic_rows(table: np.ndarray, what: str) -> np.ndarray:
    for i, row in enumerate(table):
        _check_distribution(row, f"{what} row {i}")
    return np.array([_renormalize(row) for row in table])


def _sized_table(text: str, section: str, rows_key: str, cols_key: str) -> np.ndarray:
    sections = parse_sections(text, allowed=("alphabets", section))
    for required in ("alphabets", section):
        if required not in sections:
            raise ProblemFormatError(f"missing section [{required}]")
    sizes = _parse_alphabets(sections["alphabets"])
    for key in (rows_key, cols_key):
        if key not in sizes:
            raise ProblemFormatError(f"[alphabets] is missing {key!r}")
    table = parse_table(sections[section], sizes[rows_key], sizes[cols_key], section)
    return _stochastic_rows(table, section)


def parse_channel(text: str) -> np.ndarray:
    """Transition table ``T[x, y]`` from a channel file."""
    return _sized_table(text, "channel", "x", "y")


def parse_strategy(text: str) -> np.ndarray:
    """Encoder test channel ``Q[u, w]`` from a strategy file."""
    return _sized_table(text, "q_w_given_u", "u", "w")


def format_channel(t_yx) -> str:
    t_yx = np.asarray(t_yx, dtype=float)
    lines = ["[alphabets]", f"x = {t_yx.shape[0]}", f"y = {t_yx.shape[1]}", "", "[channel]"]
    return "\n".join(lines + [_fmt_row(row) for row in t_yx]) + "\n"


def format_strategy(q_w_given_u) -> str:
    q = np.asarray(q_w_given_u, dtype=float)
    lines = ["[alphabets]", f"u = {q.shape[0]}", f"w = {q.shape[1]}", "", "[q_w_given_u]"]
    return "\n".join(lines + [_fmt_row(row) for row in q]) + "\n"
