"""Free-format MPS writer and reader.

Layout produced by :func:`export_mps`::

    NAME <model name>
    OBJSENSE MIN
    ROWS
     N  OBJ
     L  <row>            one line per row, in model order
    COLUMNS
     <col> OBJ <c_j>     objective entry when nonzero (or the column is empty)
     <col> <row> <a_ij>  one line per nonzero, rows in model order
                         integer runs wrapped in MARKER INTORG / INTEND lines
    RHS
     RHS <row> <b_i>     nonzero right-hand sides only
    BOUNDS
     <type> BND <col> [value]
    ENDATA

Bounds other than ``[0, +inf)`` are written explicitly; integer columns
always get at least one bound line so no reader mistakes them for binaries.
Numbers use 17 significant digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..model import MilpModel, _num

OBJ_ROW = "OBJ"


class ExportError(ValueError):
    """Model names that cannot be written as MPS."""


class MPSParseError(ValueError):
    pass


def _check_names(model: MilpModel) -> None:
    for kind, names in (("row", model.row_names), ("column", model.col_names)):
        seen = set()
        for name in names:
            if not name or any(ch.isspace() for ch in name):
                raise ExportError(f"{kind} name {name!r} is empty or contains whitespace")
            if name in seen:
                raise ExportError(f"duplicate {kind} name {name!r}")
            seen.add(name)
    if OBJ_ROW in set(model.row_names):
        raise ExportError(f"row name {OBJ_ROW!r} collides with the objective row")
    if any(ch.isspace() for ch in model.name):
        raise ExportError("model name contains whitespace")


def _bound_lines(name: str, lo: float, hi: float, is_int: bool) -> list[str]:
    if lo == hi:
        return [f" FX BND {name} {_num(lo)}"]
    lines = []
    if lo == -math.inf and hi == math.inf:
        return [f" FR BND {name}"]
    if lo == -math.inf:
        lines.append(f" MI BND {name}")
    elif lo != 0.0:
        lines.append(f" LO BND {name} {_num(lo)}")
    if hi != math.inf:
        lines.append(f" UP BND {name} {_num(hi)}")
    if not lines and is_int:
        lines.append(f" PL BND {name}")
    return lines


def export_mps(model: MilpModel) -> str:
    """Render ``model`` as free-format MPS text (byte-deterministic)."""
    _check_names(model)
    out = [f"NAME {model.name}", "OBJSENSE MIN", "ROWS", f" N  {OBJ_ROW}"]
    out.extend(f" {s}  {r}" for s, r in zip(model.sense, model.row_names))
    out.append("COLUMNS")
    A = model.A.tocsc()
    in_int = False
    marker = 0
    for j, name in enumerate(model.col_names):
        if bool(model.integer[j]) != in_int:
            tag = "INTORG" if not in_int else "INTEND"
            out.append(f" M{marker} 'MARKER' '{tag}'")
            marker += 1
            in_int = not in_int
        start, stop = A.indptr[j], A.indptr[j + 1]
        rows = A.indices[start:stop]
        vals = A.data[start:stop]
        order = np.argsort(rows, kind="stable")
        if model.c[j] != 0 or not np.any(vals != 0):
            out.append(f" {name} {OBJ_ROW} {_num(model.c[j])}")
        for k in order:
            if vals[k] != 0:
                out.append(f" {name} {model.row_names[rows[k]]} {_num(vals[k])}")
    if in_int:
        out.append(f" M{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    out.extend(f" RHS {r} {_num(b)}" for r, b in zip(model.row_names, model.rhs) if b != 0)
    out.append("BOUNDS")
    for j, name in enumerate(model.col_names):
        out.extend(_bound_lines(name, model.lb[j], model.ub[j], bool(model.integer[j])))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def write_mps(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(export_mps(model))


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MPSParseError(f"line {lineno}: bad number {tok!r}") from None


def read_mps(text: str) -> MilpModel:
    """Parse free-format MPS text into a :class:`MilpModel`.

    Supports NAME, OBJSENSE (MIN/MAX, inline or on the next line), ROWS,
    COLUMNS with integer markers, RHS (including an objective constant,
    which is rejected), and BOUNDS types UP, LO, FX, FR, MI, PL, BV, LI, UI.
    RANGES is not supported. A maximization objective is negated.
    """
    name = "model"
    maximize = False
    obj_name = None
    row_names: list[str] = []
    row_index: dict[str, int] = {}
    senses: list[str] = []
    col_names: list[str] = []
    col_index: dict[str, int] = {}
    integer: list[bool] = []
    entries: list[tuple[int, int, float]] = []
    obj: dict[int, float] = {}
    rhs: dict[int, float] = {}
    bounds: list[tuple[str, int, float | None]] = []
    section = None
    in_int = False
    ended = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        toks = line.split()
        head = toks[0].upper()
        if not raw[0].isspace():
            if head == "NAME":
                name = toks[1] if len(toks) > 1 else name
                section = None
                continue
            if head == "OBJSENSE":
                section = "OBJSENSE"
                if len(toks) > 1:
                    maximize = toks[1].upper() in ("MAX", "MAXIMIZE")
                    section = None
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "ENDATA"):
                section = head
                if head == "RANGES":
                    raise MPSParseError(f"line {lineno}: RANGES section is not supported")
                if head == "ENDATA":
                    ended = True
                    break
                continue
            raise MPSParseError(f"line {lineno}: unknown section {toks[0]!r}")
        if section == "OBJSENSE":
            maximize = head in ("MAX", "MAXIMIZE")
            section = None
        elif section == "ROWS":
            if len(toks) != 2:
                raise MPSParseError(f"line {lineno}: expected '<type> <name>'")
            kind, rname = head, toks[1]
            if kind == "N":
                if obj_name is None:
                    obj_name = rname
                continue
            if kind not in ("L", "G", "E"):
                raise MPSParseError(f"line {lineno}: unknown row type {kind!r}")
            if rname in row_index:
                raise MPSParseError(f"line {lineno}: duplicate row {rname!r}")
            row_index[rname] = len(row_names)
            row_names.append(rname)
            senses.append(kind)
        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1].strip("'") == "MARKER":
                tag = toks[2].strip("'").upper()
                if tag == "INTORG":
                    in_int = True
                elif tag == "INTEND":
                    in_int = False
                else:
                    raise MPSParseError(f"line {lineno}: unknown marker {toks[2]!r}")
                continue
            if len(toks) not in (3, 5):
                raise MPSParseError(f"line {lineno}: expected column entries in pairs")
            cname = toks[0]
            j = col_index.get(cname)
            if j is None:
                j = col_index[cname] = len(col_names)
                col_names.append(cname)
                integer.append(in_int)
            for k in range(1, len(toks), 2):
                rname, val = toks[k], _float(toks[k + 1], lineno)
                if rname == obj_name:
                    obj[j] = val
                elif rname in row_index:
                    entries.append((row_index[rname], j, val))
                else:
                    raise MPSParseError(f"line {lineno}: unknown row {rname!r}")
        elif section == "RHS":
            if len(toks) not in (3, 5):
                raise MPSParseError(f"line {lineno}: expected rhs entries in pairs")
            for k in range(1, len(toks), 2):
                rname, val = toks[k], _float(toks[k + 1], lineno)
                if rname == obj_name:
                    raise MPSParseError(f"line {lineno}: objective constants are not supported")
                if rname not in row_index:
                    raise MPSParseError(f"line {lineno}: unknown row {rname!r}")
                rhs[row_index[rname]] = val
        elif section == "BOUNDS":
            kind = head
            if len(toks) < 3:
                raise MPSParseError(f"line {lineno}: malformed bound")
            cname = toks[2]
            if cname not in col_index:
                raise MPSParseError(f"line {lineno}: unknown column {cname!r}")
            val = _float(toks[3], lineno) if len(toks) > 3 else None
            if kind in ("UP", "LO", "FX", "LI", "UI") and val is None:
                raise MPSParseError(f"line {lineno}: bound {kind} needs a value")
            if kind not in ("UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"):
                raise MPSParseError(f"line {lineno}: unknown bound type {kind!r}")
            bounds.append((kind, col_index[cname], val))
        else:
            raise MPSParseError(f"line {lineno}: data outside a section")
    if not ended:
        raise MPSParseError("missing ENDATA; the file looks truncated")

    n, m = len(col_names), len(row_names)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    is_int = np.array(integer, dtype=bool)
    for kind, j, val in bounds:
        if kind == "UP":
            ub[j] = val
        elif kind == "LO":
            lb[j] = val
        elif kind == "FX":
            lb[j] = ub[j] = val
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "PL":
            ub[j] = np.inf
        elif kind == "BV":
            lb[j], ub[j] = 0.0, 1.0
            is_int[j] = True
        elif kind == "LI":
            lb[j] = val
            is_int[j] = True
        elif kind == "UI":
            ub[j] = val
            is_int[j] = True
    c = np.zeros(n)
    for j, val in obj.items():
        c[j] = val
    if maximize:
        c = -c
    b = np.zeros(m)
    for i, val in rhs.items():
        b[i] = val
    if entries:
        r, cc, v = zip(*entries)
    else:
        r, cc, v = (), (), ()
    A = sp.coo_matrix((np.array(v, dtype=float), (np.array(r, dtype=int), np.array(cc, dtype=int))), shape=(m, n))
    return MilpModel(
        A=A.tocsr(),
        sense=np.array(senses, dtype="<U1"),
        rhs=b,
        c=c,
        lb=lb,
        ub=ub,
        integer=is_int,
        row_names=row_names,
        col_names=col_names,
        name=name,
    )


def read_mps_file(path: str | Path) -> MilpModel:
    return read_mps(Path(path).read_text())
