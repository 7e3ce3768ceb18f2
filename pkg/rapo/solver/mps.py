"""
Reading and writing of linear programs in the free MPS format. Names may not
contain whitespace and are cut to 255 characters, numbers are written with
twelve significant digits. Output is byte-stable for equal programs.
"""

from collections import OrderedDict

import numpy as np
from scipy import sparse

from rapo.log import logger
from rapo.solver.program import LinearProgram
from rapo.utils import MPS_NAME_LENGTH, normalize_for_mps


OBJECTIVE_ROW = "obj"
SECTIONS = ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "OBJSENSE")
INTEGER_BOUNDS = ("BV", "LI", "UI", "SC")


class InterchangeParseError(ValueError):
    """Raised on malformed interchange text. Carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def _number(value: float) -> str:
    if value == 0:
        return "0"
    return f"{value:.12g}"


def unique_names(names: list[str]) -> list[str]:
    """
    Normalized names, made unique by appending `~1`, `~2`, ... to repeated
    names in order of appearance.
    """
    rsl = []
    taken: set[str] = set()
    for original in names:
        name = normalize_for_mps(original)
        counter = 0
        candidate = name
        while candidate in taken:
            counter += 1
            suffix = f"~{counter}"
            candidate = f"{name[:MPS_NAME_LENGTH - len(suffix)]}{suffix}"
        taken.add(candidate)
        rsl.append(candidate)
    return rsl


def _row_type(lower: float, upper: float) -> tuple[str, float, float | None]:
    """MPS row type, right-hand side and range of a row."""
    if lower == upper:
        return "E", lower, None
    if np.isinf(lower) and np.isinf(upper):
        return "N", 0.0, None
    if np.isinf(lower):
        return "L", upper, None
    if np.isinf(upper):
        return "G", lower, None
    return "G", lower, upper - lower


def _bound_lines(col: str, lower: float, upper: float) -> list[str]:
    if lower == upper:
        return [f" FX BND  {col}  {_number(lower)}"]
    if np.isinf(lower) and np.isinf(upper):
        return [f" FR BND  {col}"]
    rsl = []
    if np.isinf(lower):
        rsl.append(f" MI BND  {col}")
    elif lower != 0:
        rsl.append(f" LO BND  {col}  {_number(lower)}")
    if not np.isinf(upper):
        rsl.append(f" UP BND  {col}  {_number(upper)}")
    return rsl


def write_interchange(lp: LinearProgram) -> str:
    names = unique_names([OBJECTIVE_ROW, *lp.row_names])
    objective, rows = names[0], names[1:]
    cols = unique_names(list(lp.col_names))

    lines = [f"NAME          {normalize_for_mps(lp.name)}"]
    for kind, new, old in [
        *(("row", new, old) for new, old in zip(rows, lp.row_names)),
        *(("column", new, old) for new, old in zip(cols, lp.col_names)),
    ]:
        if new != old:
            lines.append(f"* {kind} {new} is {old}")

    types = [_row_type(low, high) for low, high in zip(lp.row_lower, lp.row_upper)]
    lines.append("ROWS")
    lines.append(f" N  {objective}")
    for name, (kind, _, _) in zip(rows, types):
        lines.append(f" {kind}  {name}")

    lines.append("COLUMNS")
    matrix = lp.matrix.tocsc()
    matrix.sort_indices()
    for j, col in enumerate(cols):
        start, end = matrix.indptr[j], matrix.indptr[j + 1]
        if lp.objective[j] != 0 or start == end:
            lines.append(f"    {col}  {objective}  {_number(lp.objective[j])}")
        for i, value in zip(matrix.indices[start:end], matrix.data[start:end]):
            lines.append(f"    {col}  {rows[i]}  {_number(value)}")

    lines.append("RHS")
    if lp.offset != 0:
        lines.append(f"    RHS  {objective}  {_number(-lp.offset)}")
    for name, (kind, rhs, _) in zip(rows, types):
        if kind != "N" and rhs != 0:
            lines.append(f"    RHS  {name}  {_number(rhs)}")

    lines.append("RANGES")
    for name, (_, _, span) in zip(rows, types):
        if span is not None:
            lines.append(f"    RNG  {name}  {_number(span)}")

    lines.append("BOUNDS")
    for col, lower, upper in zip(cols, lp.col_lower, lp.col_upper):
        if lower == 0 and np.isinf(upper):
            continue
        lines.extend(_bound_lines(col, lower, upper))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self):
        self.name = "rapo"
        self.section = None
        self.maximise = False
        self.objective_row = None
        self.rows: OrderedDict[str, str] = OrderedDict()
        self.row_index: dict[str, int] = {}
        self.col_index: OrderedDict[str, int] = OrderedDict()
        self.objective: dict[int, float] = {}
        self.entries: dict[tuple[int, int], float] = {}
        self.rhs: dict[int, float] = {}
        self.ranges: dict[int, float] = {}
        self.offset = 0.0
        self.lower: dict[int, float] = {}
        self.upper: dict[int, float] = {}

    def parse(self, text: str) -> LinearProgram:
        ended = False
        line_no = 0
        for line_no, raw in enumerate(text.splitlines(), start=1):
            if raw.strip() == "" or raw.startswith("*"):
                continue
            fields = raw.split()
            if not raw[0].isspace():
                keyword = fields[0].upper()
                if keyword == "ENDATA":
                    ended = True
                    break
                if keyword == "NAME":
                    self.name = fields[1] if len(fields) > 1 else ""
                    self.section = "NAME"
                    continue
                if keyword not in SECTIONS:
                    raise InterchangeParseError(line_no, f"unknown section {fields[0]}")
                self.section = keyword
                if keyword == "OBJSENSE" and len(fields) > 1:
                    self._sense(line_no, fields[1])
                continue
            handler = {
                "ROWS": self._row,
                "COLUMNS": self._column,
                "RHS": self._rhs,
                "RANGES": self._range,
                "BOUNDS": self._bound,
                "OBJSENSE": lambda no, f: self._sense(no, f[0]),
            }.get(self.section)
            if handler is None:
                raise InterchangeParseError(line_no, "data line outside of a section")
            handler(line_no, fields)
        if not ended:
            raise InterchangeParseError(line_no, "missing ENDATA")
        return self._program()

    def _value(self, line_no: int, text: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise InterchangeParseError(line_no, f"'{text}' is not a number")

    def _row_of(self, line_no: int, name: str) -> int | None:
        """Index of a constraint row, None for the objective."""
        if name == self.objective_row:
            return None
        if name not in self.row_index:
            raise InterchangeParseError(line_no, f"unknown row {name}")
        return self.row_index[name]

    def _sense(self, line_no: int, word: str):
        word = word.upper()
        if word in ("MAX", "MAXIMIZE"):
            self.maximise = True
        elif word not in ("MIN", "MINIMIZE"):
            raise InterchangeParseError(line_no, f"unknown objective sense {word}")

    def _row(self, line_no: int, fields: list[str]):
        if len(fields) != 2:
            raise InterchangeParseError(line_no, "a row needs a type and a name")
        kind, name = fields[0].upper(), fields[1]
        if kind not in ("N", "E", "L", "G"):
            raise InterchangeParseError(line_no, f"unknown row type {fields[0]}")
        if name in self.rows or name == self.objective_row:
            raise InterchangeParseError(line_no, f"row {name} is defined twice")
        if kind == "N" and self.objective_row is None:
            self.objective_row = name
            return
        self.row_index[name] = len(self.rows)
        self.rows[name] = kind

    def _column(self, line_no: int, fields: list[str]):
        if "'MARKER'" in fields or "MARKER" in fields:
            raise InterchangeParseError(line_no, "integer markers are not supported")
        if len(fields) not in (3, 5):
            raise InterchangeParseError(line_no, "a column entry needs one or two row/value pairs")
        col = fields[0]
        j = self.col_index.setdefault(col, len(self.col_index))
        for row, text in zip(fields[1::2], fields[2::2]):
            value = self._value(line_no, text)
            i = self._row_of(line_no, row)
            if i is None:
                if j in self.objective:
                    raise InterchangeParseError(line_no, f"objective of {col} is defined twice")
                self.objective[j] = value
            else:
                if (i, j) in self.entries:
                    raise InterchangeParseError(line_no, f"entry {row}/{col} is defined twice")
                self.entries[(i, j)] = value

    def _pairs(self, line_no: int, fields: list[str]) -> list[tuple[str, float]]:
        if len(fields) not in (2, 3, 4, 5):
            raise InterchangeParseError(line_no, "expected one or two row/value pairs")
        if len(fields) % 2 == 1:
            fields = fields[1:]
        return [
            (row, self._value(line_no, text))
            for row, text in zip(fields[0::2], fields[1::2])
        ]

    def _rhs(self, line_no: int, fields: list[str]):
        for row, value in self._pairs(line_no, fields):
            i = self._row_of(line_no, row)
            if i is None:
                self.offset = -value
            else:
                self.rhs[i] = value

    def _range(self, line_no: int, fields: list[str]):
        for row, value in self._pairs(line_no, fields):
            i = self._row_of(line_no, row)
            if i is None:
                raise InterchangeParseError(line_no, "the objective cannot carry a range")
            self.ranges[i] = value

    def _bound(self, line_no: int, fields: list[str]):
        kind = fields[0].upper()
        if kind in INTEGER_BOUNDS:
            raise InterchangeParseError(line_no, f"integer bound {kind} is not supported")
        if kind in ("FR", "MI", "PL"):
            if len(fields) not in (2, 3):
                raise InterchangeParseError(line_no, f"bound {kind} takes no value")
            col, value = fields[-1], None
        elif kind in ("UP", "LO", "FX"):
            if len(fields) not in (3, 4):
                raise InterchangeParseError(line_no, f"bound {kind} needs a value")
            col, value = fields[-2], self._value(line_no, fields[-1])
        else:
            raise InterchangeParseError(line_no, f"unknown bound type {fields[0]}")
        if col not in self.col_index:
            raise InterchangeParseError(line_no, f"unknown column {col}")
        j = self.col_index[col]
        if kind == "UP":
            if value < 0 and self.lower.get(j, 0.0) == 0:
                logger.warning(f"negative upper bound of {col} without lower bound, lower set to -inf")
                self.lower[j] = -np.inf
            self.upper[j] = value
        elif kind == "LO":
            self.lower[j] = value
        elif kind == "FX":
            self.lower[j] = value
            self.upper[j] = value
        elif kind == "FR":
            self.lower[j] = -np.inf
            self.upper[j] = np.inf
        elif kind == "MI":
            self.lower[j] = -np.inf
        else:
            self.upper[j] = np.inf

    def _program(self) -> LinearProgram:
        m, n = len(self.rows), len(self.col_index)
        row_lower = np.empty(m)
        row_upper = np.empty(m)
        for i, kind in enumerate(self.rows.values()):
            rhs = self.rhs.get(i, 0.0)
            span = self.ranges.get(i)
            if kind == "N":
                row_lower[i], row_upper[i] = -np.inf, np.inf
            elif kind == "E":
                row_lower[i] = row_upper[i] = rhs
                if span is not None:
                    row_lower[i], row_upper[i] = (rhs, rhs + span) if span > 0 else (rhs + span, rhs)
            elif kind == "L":
                row_lower[i], row_upper[i] = -np.inf, rhs
                if span is not None:
                    row_lower[i] = rhs - abs(span)
            else:
                row_lower[i], row_upper[i] = rhs, np.inf
                if span is not None:
                    row_upper[i] = rhs + abs(span)

        keys = list(self.entries)
        matrix = sparse.coo_matrix(
            (
                np.array([self.entries[key] for key in keys], dtype=float),
                (
                    np.array([key[0] for key in keys], dtype=int),
                    np.array([key[1] for key in keys], dtype=int),
                ),
            ),
            shape=(m, n),
        ).tocsr()
        objective = np.zeros(n)
        for j, value in self.objective.items():
            objective[j] = value
        offset = self.offset
        if self.maximise:
            objective, offset = -objective, -offset
        return LinearProgram(
            name=self.name,
            objective=objective,
            offset=offset,
            matrix=matrix,
            row_lower=row_lower,
            row_upper=row_upper,
            col_lower=np.array([self.lower.get(j, 0.0) for j in range(n)]),
            col_upper=np.array([self.upper.get(j, np.inf) for j in range(n)]),
            row_names=tuple(self.rows),
            col_names=tuple(self.col_index),
        )


def read_interchange(text: str) -> LinearProgram:
    """
    Parses interchange text. Maximisation problems are turned into
    minimisation problems by negating the objective.
    """
    return _Reader().parse(text)
