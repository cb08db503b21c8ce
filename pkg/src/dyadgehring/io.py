"""Plain-text file formats and atomic writers.

Every format is line oriented.  Blank lines and lines starting with ``#`` are
ignored by the readers, except for the first line which names the format.
Floats are written with ``repr`` so a write/read round trip is exact.

Space file::

    # dyadgehring space v1
    points <n>
    dim <d>
    metric <euclidean | linf | snowflake:<e> | explicit-matrix>
    tags <name> ...                 (optional)
    meta <key> <value>              (optional, repeatable)
    <id> <coord>... <mass> [<tag value>...]      (n lines)
    matrix                          (explicit-matrix only)
    <rho(i,0)> ... <rho(i,i-1)>     (row i = 1..n-1, lower triangle)

Weight file::

    # dyadgehring weight v1
    <point_id> <value>

Lattice file::

    # dyadgehring lattice v1
    delta <delta>
    r0 <r0>
    R0 <R0>
    seed <seed | none>
    k_min <k_min>
    <level> <cube_id> <parent_id | -1> <center> <member_count> <member_id>...
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import DyadicCube, DyadicLattice
from .space import FiniteSpace
from .weights import Weight

__all__ = [
    "FormatError",
    "atomic_write",
    "write_space",
    "read_space",
    "write_weight",
    "read_weight",
    "write_lattice",
    "read_lattice",
    "format_tree",
    "write_csv",
    "write_report",
    "manifest",
    "to_jsonable",
]

SPACE_HEADER = "# dyadgehring space v1"
WEIGHT_HEADER = "# dyadgehring weight v1"
LATTICE_HEADER = "# dyadgehring lattice v1"


class FormatError(ValueError):
    """Malformed input file; ``line`` is the 1-based line number if known."""

    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)
        self.path = path
        self.line = line


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _lines(path, header):
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    if not raw or raw[0].strip() != header:
        raise FormatError(f"expected header {header!r}", path, 1)
    for number, line in enumerate(raw[1:], start=2):
        text = line.strip()
        if text and not text.startswith("#"):
            yield number, text.split()


def _float(tok, path, line):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"not a number: {tok!r}", path, line) from None


def _int(tok, path, line):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"not an integer: {tok!r}", path, line) from None


# spaces ----------------------------------------------------------------------


def format_space(space: FiniteSpace, meta=None) -> str:
    tag_names = sorted(space.tags)
    d = space.coords.shape[1] if space.metric != "explicit-matrix" else 0
    out = [SPACE_HEADER, f"points {space.n}", f"dim {d}", f"metric {space.metric}"]
    if tag_names:
        out.append("tags " + " ".join(tag_names))
    for key, value in sorted((meta or {}).items()):
        out.append(f"meta {key} {value}")
    tag_cols = [np.asarray(space.tags[t]) for t in tag_names]
    for i in range(space.n):
        fields = [str(i)]
        if d:
            fields += [_num(c) for c in space.coords[i]]
        fields.append(_num(space.mass[i]))
        fields += [_num(col[i]) for col in tag_cols]
        out.append(" ".join(fields))
    if space.metric == "explicit-matrix":
        out.append("matrix")
        for i in range(1, space.n):
            out.append(" ".join(_num(x) for x in space.matrix[i, :i]))
    return "\n".join(out) + "\n"


def write_space(path, space: FiniteSpace, meta=None) -> Path:
    return atomic_write(path, format_space(space, meta))


def read_space(path):
    """Return ``(space, meta)``; ``meta`` maps keys to strings."""
    header = {}
    meta = {}
    tag_names = []
    rows = []
    matrix_rows = []
    in_matrix = False
    for line, tok in _lines(path, SPACE_HEADER):
        key = tok[0]
        if in_matrix:
            matrix_rows.append((line, [_float(t, path, line) for t in tok]))
        elif key in ("points", "dim") and len(tok) == 2:
            header[key] = _int(tok[1], path, line)
        elif key == "metric" and len(tok) == 2:
            header[key] = tok[1]
        elif key == "tags":
            tag_names = tok[1:]
        elif key == "meta" and len(tok) >= 3:
            meta[tok[1]] = " ".join(tok[2:])
        elif key == "matrix":
            in_matrix = True
        else:
            rows.append((line, tok))
    for key in ("points", "dim", "metric"):
        if key not in header:
            raise FormatError(f"missing '{key}' line", path, 1)
    n, d, metric = header["points"], header["dim"], header["metric"]
    if len(rows) != n:
        raise FormatError(f"expected {n} point lines, found {len(rows)}", path, rows[-1][0] if rows else 1)
    width = 1 + d + 1 + len(tag_names)
    coords = np.empty((n, d))
    mass = np.empty(n)
    tags = {t: np.empty(n) for t in tag_names}
    for i, (line, tok) in enumerate(rows):
        if len(tok) != width:
            raise FormatError(f"expected {width} fields, found {len(tok)}", path, line)
        if _int(tok[0], path, line) != i:
            raise FormatError(f"point ids must run 0..{n - 1} in order", path, line)
        coords[i] = [_float(t, path, line) for t in tok[1:1 + d]]
        mass[i] = _float(tok[1 + d], path, line)
        for j, t in enumerate(tag_names):
            tags[t][i] = _float(tok[2 + d + j], path, line)
    for t in tag_names:
        if np.all(tags[t] == np.round(tags[t])):
            tags[t] = tags[t].astype(int)
    matrix = None
    if metric == "explicit-matrix":
        if len(matrix_rows) != max(n - 1, 0):
            raise FormatError(f"expected {n - 1} matrix rows, found {len(matrix_rows)}", path,
                              matrix_rows[-1][0] if matrix_rows else 1)
        matrix = np.zeros((n, n))
        for i, (line, vals) in enumerate(matrix_rows, start=1):
            if len(vals) != i:
                raise FormatError(f"matrix row {i} needs {i} entries", path, line)
            matrix[i, :i] = vals
            matrix[:i, i] = vals
    elif matrix_rows:
        raise FormatError("matrix block only allowed with metric explicit-matrix", path, matrix_rows[0][0])
    try:
        space = FiniteSpace(coords, mass, metric=metric, matrix=matrix, tags=tags)
    except ValueError as exc:
        raise FormatError(str(exc), path, 1) from exc
    return space, meta


# weights ---------------------------------------------------------------------


def write_weight(path, weight) -> Path:
    values = weight.values if isinstance(weight, Weight) else np.asarray(weight, dtype=float)
    out = [WEIGHT_HEADER] + [f"{i} {_num(v)}" for i, v in enumerate(values)]
    return atomic_write(path, "\n".join(out) + "\n")


def read_weight(path, n=None, name=None) -> Weight:
    """Read a weight; raises ``FormatError`` for gaps, duplicates or bad values."""
    ids, vals = [], []
    for line, tok in _lines(path, WEIGHT_HEADER):
        if len(tok) != 2:
            raise FormatError("expected 'point_id value'", path, line)
        ids.append(_int(tok[0], path, line))
        vals.append(_float(tok[1], path, line))
    size = len(ids) if n is None else int(n)
    if sorted(ids) != list(range(size)):
        raise FormatError(f"weight file must list every point id 0..{size - 1} exactly once", path, 1)
    values = np.empty(size)
    values[ids] = vals
    try:
        return Weight(values, name or Path(path).stem)
    except ValueError as exc:
        raise FormatError(str(exc), path, 1) from exc


# lattices --------------------------------------------------------------------


def format_lattice(lattice: DyadicLattice) -> str:
    seed = "none" if lattice.seed is None else str(lattice.seed)
    out = [LATTICE_HEADER, f"delta {_num(lattice.delta)}", f"r0 {_num(lattice.r0)}",
           f"R0 {_num(lattice.R0)}", f"seed {seed}", f"k_min {lattice.k_min}"]
    for cube in lattice.cubes:
        parent = -1 if cube.parent is None else cube.parent
        members = " ".join(str(int(m)) for m in cube.members)
        out.append(f"{cube.level} {cube.id} {parent} {cube.center} {cube.size} {members}")
    return "\n".join(out) + "\n"


def write_lattice(path, lattice: DyadicLattice) -> Path:
    return atomic_write(path, format_lattice(lattice))


def read_lattice(path, n_points=None) -> DyadicLattice:
    header = {}
    rows = []
    for line, tok in _lines(path, LATTICE_HEADER):
        if tok[0] in ("delta", "r0", "R0", "seed", "k_min") and len(tok) == 2:
            header[tok[0]] = tok[1]
        else:
            rows.append((line, [_int(t, path, line) for t in tok]))
    for key in ("delta", "r0", "R0", "seed", "k_min"):
        if key not in header:
            raise FormatError(f"missing '{key}' line", path, 1)
    k_min = _int(header["k_min"], path, 1)
    children = {}
    parsed = []
    for expected, (line, vals) in enumerate(rows):
        if len(vals) < 5 or len(vals) != 5 + vals[4]:
            raise FormatError("cube line must be 'level id parent center count members...'", path, line)
        level, cid, parent, center, _count = vals[:5]
        if cid != expected:
            raise FormatError(f"cube ids must be consecutive, expected {expected}", path, line)
        if level < k_min:
            raise FormatError(f"level {level} is below k_min {k_min}", path, line)
        if parent >= cid:
            raise FormatError("a parent must be listed before its children", path, line)
        parent = None if parent < 0 else parent
        if parent is not None:
            children.setdefault(parent, []).append(cid)
        parsed.append((line, level, cid, parent, center, np.array(vals[5:], dtype=int)))
    generations = []
    for line, level, cid, parent, center, members in parsed:
        index = level - k_min
        if index == len(generations):
            generations.append([])
        elif index != len(generations) - 1:
            raise FormatError("cubes must be grouped by increasing level", path, line)
        generations[-1].append(DyadicCube(cid, level, center, members, parent,
                                          tuple(children.get(cid, ()))))
    if not generations:
        raise FormatError("lattice has no cubes", path, 1)
    if n_points is None:
        n_points = int(sum(c.size for c in generations[0]))
    seed = None if header["seed"] == "none" else _int(header["seed"], path, 1)
    return DyadicLattice(_float(header["delta"], path, 1), k_min, generations, n_points,
                         _float(header["r0"], path, 1), _float(header["R0"], path, 1), seed)


# stopping trees --------------------------------------------------------------


def format_tree(tree, decay=None) -> str:
    """One line per node ``generation cube_id kind mean ratio_to_root``, then a summary."""
    root_mean = tree.nodes[0].mean if tree.nodes else math.nan
    out = ["# generation cube_id kind mean ratio_to_root"]
    for node in tree.nodes:
        ratio = node.mean / root_mean if root_mean else math.nan
        out.append(f"{node.generation} {node.cube} {node.kind} {_num(node.mean)} {_num(ratio)}")
    if decay is not None:
        masses = " ".join(_num(m) for m in decay["generation_masses"])
        out.append(f"# summary c_measured {_num(decay['c'])} generation_masses {masses}")
    return "\n".join(out) + "\n"


# reports ---------------------------------------------------------------------


def to_jsonable(obj):
    """Convert numpy scalars/arrays, dataclasses and non-finite floats for JSON."""
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def manifest(command, inputs=None, params=None, out_dir=None) -> dict:
    """Run record embedded in every report; carries no timestamps."""
    return {
        "command": command,
        "inputs": {k: str(v) for k, v in sorted((inputs or {}).items())},
        "params": to_jsonable(dict(sorted((params or {}).items()))),
        "out_dir": None if out_dir is None else str(out_dir),
        "version": __version__,
    }


def format_report(report: dict, run_manifest: dict) -> str:
    body = dict(to_jsonable(report))
    body["manifest"] = run_manifest
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path, report: dict, run_manifest: dict) -> Path:
    return atomic_write(path, format_report(report, run_manifest))


def write_csv(path, header, rows) -> Path:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write(path, buf.getvalue())
