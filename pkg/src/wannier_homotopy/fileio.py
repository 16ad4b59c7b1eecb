"""Overlap file ingestion and text serialization of fields.

MMN files follow the usual Wannier90 layout: a comment line, a line with
``n_bands n_kpts n_neighbors``, then one block per ``(k, neighbour)`` pair made
of a header ``ik ikb g1 g2 g3`` (1-based k indices) and ``n_bands**2`` lines
``Re Im`` with the bra band index running fastest. K indices enumerate the
grid in C order (last axis fastest).
"""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL
from .diagnostics import RegularityField
from .errors import CountMismatch, MissingNeighbor, ParseError
from .frames import GaugeFrame
from .grid import KGrid
from .homotopy import Homotopy, UnitaryField
from .matcore import dagger, herm_eig
from .transport import OverlapProvider


@dataclass
class MmnData:
    """Contents of an MMN file with 0-based k indices.

    ``neighbors`` has shape ``(n_kpts, n_neighbors)``, ``shifts`` shape
    ``(n_kpts, n_neighbors, 3)`` and ``blocks`` shape
    ``(n_kpts, n_neighbors, n_bands, n_bands)``.
    """

    n_bands: int
    n_kpts: int
    n_neighbors: int
    neighbors: np.ndarray
    shifts: np.ndarray
    blocks: np.ndarray
    comment: str = ""


class _Lines:
    """Line reader that remembers 1-based line numbers for error messages."""

    def __init__(self, stream):
        self._it = iter(stream)
        self.lineno = 0

    def next(self, what):
        try:
            line = next(self._it)
        except StopIteration:
            raise ParseError(self.lineno + 1, f"unexpected end of file, expected {what}") from None
        self.lineno += 1
        return line

    def maybe_next(self):
        """Next line, or ``None`` at end of file."""
        line = next(self._it, None)
        if line is not None:
            self.lineno += 1
        return line

    def numbers(self, what, count, kind):
        line = self.next(what)
        parts = line.split()
        if len(parts) != count:
            raise ParseError(self.lineno, f"expected {count} values for {what}, got {len(parts)}")
        try:
            return [kind(p) for p in parts]
        except ValueError:
            raise ParseError(self.lineno, f"malformed {what}: {line.strip()!r}") from None


def _as_lines(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_mmn(source):
    """Parse MMN text from a string or an iterable of lines."""
    lines = _Lines(_as_lines(source))
    comment = lines.next("comment line").rstrip("\n")
    n_bands, n_kpts, n_nb = lines.numbers("counts", 3, int)
    if min(n_bands, n_kpts, n_nb) < 1:
        raise ParseError(lines.lineno, "counts must be positive")
    total = n_kpts * n_nb
    neighbors = np.full((n_kpts, n_nb), -1, dtype=int)
    shifts = np.zeros((n_kpts, n_nb, 3), dtype=int)
    blocks = np.zeros((n_kpts, n_nb, n_bands, n_bands), dtype=complex)
    filled = np.zeros(n_kpts, dtype=int)
    count = 0
    while (line := lines.maybe_next()) is not None:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(lines.lineno, f"expected block header 'ik ikb g1 g2 g3', got {line.strip()!r}")
        try:
            ik, ikb, g1, g2, g3 = (int(p) for p in parts)
        except ValueError:
            raise ParseError(lines.lineno, f"malformed block header {line.strip()!r}") from None
        if not (1 <= ik <= n_kpts and 1 <= ikb <= n_kpts):
            raise ParseError(lines.lineno, f"k index out of range 1..{n_kpts}")
        slot = filled[ik - 1]
        if slot >= n_nb:
            raise CountMismatch(f"k point {ik} has more than {n_nb} neighbour blocks")
        entries = np.empty(n_bands * n_bands, dtype=complex)
        for i in range(n_bands * n_bands):
            re, im = lines.numbers("matrix entry", 2, float)
            entries[i] = complex(re, im)
        neighbors[ik - 1, slot] = ikb - 1
        shifts[ik - 1, slot] = (g1, g2, g3)
        # bra index fastest: entry m + n * n_bands is <u_m(k)|u_n(k+b)>
        blocks[ik - 1, slot] = entries.reshape(n_bands, n_bands).T
        filled[ik - 1] += 1
        count += 1
    if count != total:
        raise CountMismatch(f"found {count} blocks, expected n_kpts * n_neighbors = {total}")
    return MmnData(n_bands, n_kpts, n_nb, neighbors, shifts, blocks, comment)


def _fmt_mmn(x):
    return f"{x:.16e}"


def write_mmn(data):
    """MMN text for ``data``; :func:`parse_mmn` reads it back exactly."""
    out = [data.comment or "written by wannier_homotopy",
           f"{data.n_bands:12d}{data.n_kpts:12d}{data.n_neighbors:12d}"]
    for ik in range(data.n_kpts):
        for slot in range(data.n_neighbors):
            g = data.shifts[ik, slot]
            out.append(f"{ik + 1:5d}{data.neighbors[ik, slot] + 1:5d}"
                       f"{int(g[0]):5d}{int(g[1]):5d}{int(g[2]):5d}")
            for z in data.blocks[ik, slot].T.ravel():
                out.append(f"{_fmt_mmn(z.real)} {_fmt_mmn(z.imag)}")
    return "\n".join(out) + "\n"


def parse_eig(source, n_bands=None, n_kpts=None):
    """Band energies from EIG text (lines ``band k energy``), shape ``(n_kpts, n_bands)``."""
    rows = []
    for lineno, line in enumerate(_as_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 'band k energy', got {line.strip()!r}")
        try:
            rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise ParseError(lineno, f"malformed entry {line.strip()!r}") from None
    if not rows:
        raise ParseError(1, "empty EIG file")
    nb = n_bands or max(r[0] for r in rows)
    nk = n_kpts or max(r[1] for r in rows)
    if len(rows) != nb * nk:
        raise CountMismatch(f"found {len(rows)} energies, expected {nb} x {nk}")
    energies = np.full((nk, nb), np.nan)
    for b, k, e in rows:
        if not (1 <= b <= nb and 1 <= k <= nk):
            raise CountMismatch(f"band {b} or k point {k} out of range")
        energies[k - 1, b - 1] = e
    return energies


# ---------------------------------------------------------------------------
# Providers backed by file data


class MmnProvider(OverlapProvider):
    """Overlaps read from an MMN file, restricted to an occupied band window.

    ``table`` maps integer grid offsets to arrays of shape ``sizes + (N, N)``.
    """

    def __init__(self, grid, table, n_occ, energies=None):
        self.grid = grid
        self.table = table
        self.n_occ = n_occ
        self.energies = energies

    def offset_overlaps(self, offset):
        offset = tuple(int(o) for o in offset)
        if offset in self.table:
            return self.table[offset]
        back = tuple(-o for o in offset)
        if back in self.table:
            # M(k, k+b) = M(k+b, k)*
            m = self.table[back]
            for axis, o in enumerate(offset):
                if o:
                    m = np.roll(m, -o, axis=axis)
            return dagger(m)
        if not any(offset):
            return np.broadcast_to(np.eye(self.n_occ, dtype=complex),
                                   self.grid.shape + (self.n_occ, self.n_occ)).copy()
        raise MissingNeighbor(f"no overlaps for offset {offset} in either direction")

    def axis_overlaps(self, axis, sign=1):
        offset = [0] * self.grid.dim
        offset[axis] = sign
        return self.offset_overlaps(offset)

    def overlap(self, k, offset):
        return self.offset_overlaps(offset)[self.grid.wrap(k)]


def _minimal_image(diff, sizes):
    diff = np.mod(diff, sizes)
    return np.where(diff > np.asarray(sizes) // 2, diff - sizes, diff)


def provider_from_mmn(data, window, grid, strict=False, energies=None):
    """Overlap provider for the bands ``window = (start, stop)`` (0-based, half open).

    The grid offset of each neighbour is the minimal-image difference of the
    grid indices. With ``strict=True`` the reciprocal shifts in the file must
    equal the number of boundary crossings implied by that offset.
    """
    start, stop = (int(w) for w in window)
    if not 0 <= start < stop <= data.n_bands:
        raise ValueError(f"band window {window} outside 0..{data.n_bands}")
    if grid.n_points != data.n_kpts:
        raise CountMismatch(f"grid {grid} has {grid.n_points} points, file has {data.n_kpts}")
    sizes = np.asarray(grid.sizes)
    idx = np.array(np.unravel_index(np.arange(data.n_kpts), grid.shape)).T  # (nk, d)
    table = {}
    filled = {}
    for ik in range(data.n_kpts):
        for slot in range(data.n_neighbors):
            ikb = data.neighbors[ik, slot]
            raw = idx[ikb] - idx[ik]
            offset = _minimal_image(raw, sizes)
            if strict:
                crossing = (idx[ik] + offset - idx[ikb]) // sizes
                g = data.shifts[ik, slot][:grid.dim]
                if np.any(crossing != g) or np.any(data.shifts[ik, slot][grid.dim:]):
                    raise ParseError(
                        None, f"block (k={ik + 1}, neighbour={ikb + 1}) has shift "
                           f"{tuple(data.shifts[ik, slot])}, grid implies {tuple(crossing)}")
            key = tuple(int(o) for o in offset)
            if key not in table:
                table[key] = np.zeros(grid.shape + (stop - start, stop - start), dtype=complex)
                filled[key] = np.zeros(grid.shape, dtype=bool)
            table[key][tuple(idx[ik])] = data.blocks[ik, slot, start:stop, start:stop]
            filled[key][tuple(idx[ik])] = True
    for key, mask in filled.items():
        if not mask.all():
            raise MissingNeighbor(f"offset {key} is missing at {int((~mask).sum())} k points")
    for axis in range(grid.dim):
        plus = tuple(1 if a == axis else 0 for a in range(grid.dim))
        minus = tuple(-p for p in plus)
        if plus not in table and minus not in table:
            raise MissingNeighbor(f"no neighbours along axis {axis}")
    if energies is not None:
        energies = np.asarray(energies).reshape(grid.shape + (-1,))
    return MmnProvider(grid, table, stop - start, energies)


def mmn_from_model(model, grid, offsets=None, tol=None):
    """Synthetic MMN data holding all-band overlaps of a tight-binding model.

    ``offsets`` defaults to the ``+-e_i`` neighbours. Eigenvectors are the
    phase-fixed ones used by :class:`~wannier_homotopy.transport.ArrayProvider`.
    """
    tol = tol or DEFAULT_TOL
    if offsets is None:
        offsets = []
        for axis in range(grid.dim):
            for sign in (1, -1):
                offsets.append(tuple(sign if a == axis else 0 for a in range(grid.dim)))
    k = grid.coords()
    vecs = herm_eig(model.hamiltonian(k), tol=tol).eigenvectors
    nk = grid.n_points
    nb = model.n_bands
    sizes = np.asarray(grid.sizes)
    idx = np.array(np.unravel_index(np.arange(nk), grid.shape)).T
    flat = vecs.reshape(nk, nb, nb)
    neighbors = np.empty((nk, len(offsets)), dtype=int)
    shifts = np.zeros((nk, len(offsets), 3), dtype=int)
    blocks = np.empty((nk, len(offsets), nb, nb), dtype=complex)
    for slot, off in enumerate(offsets):
        target = idx + np.asarray(off)
        wrapped = np.mod(target, sizes)
        ikb = np.ravel_multi_index(wrapped.T, grid.shape)
        neighbors[:, slot] = ikb
        shifts[:, slot, :grid.dim] = (target - wrapped) // sizes
        blocks[:, slot] = dagger(flat) @ flat[ikb]
    return MmnData(nb, nk, len(offsets), neighbors, shifts, blocks,
                   comment=f"synthetic overlaps of {model.name} on {grid}")


# ---------------------------------------------------------------------------
# Field output


def to_jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fmt_real(x):
    """Shortest exact text for a float; integral values print without a decimal point."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _record(matrix):
    return " ".join(f"{fmt_real(z.real)} {fmt_real(z.imag)}" for z in np.ravel(matrix))


def _describe(obj):
    if isinstance(obj, GaugeFrame):
        return "GaugeFrame", obj.grid.sizes, obj.coeffs, dict(obj.metadata)
    if isinstance(obj, Homotopy):
        meta = dict(obj.metadata, t=obj.t, max_step=obj.max_step)
        return "Homotopy", obj.grid.sizes + (len(obj.t),), obj.values, meta
    if isinstance(obj, UnitaryField):
        return "UnitaryField", obj.grid.sizes, obj.values, {}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def regularity_csv(field):
    """CSV with one row per grid point: reduced coordinates then the value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"k{i + 1}" for i in range(field.grid.dim)] + ["value"])
    coords = field.grid.coords().reshape(-1, field.grid.dim)
    for k, v in zip(coords, field.values.ravel()):
        writer.writerow([fmt_real(c) for c in k] + [fmt_real(v)])
    return buf.getvalue()


def field_text(obj, metadata=None):
    """Self-describing text for a frame, homotopy or unitary field."""
    kind, sizes, values, meta = _describe(obj)
    meta.update(metadata or {})
    n = values.shape[-1]
    lines = [
        f"# kind {kind}",
        f"# dims {len(sizes)}",
        f"# sizes {' '.join(str(s) for s in sizes)}",
        f"# n {n}",
        f"# metadata {json.dumps(to_jsonable(meta), sort_keys=True)}",
    ]
    lines.extend(_record(m) for m in values.reshape(-1, n, n))
    return "\n".join(lines) + "\n"


def emit_field(obj, path, metadata=None):
    """Write ``obj`` to ``path``; regularity fields become CSV."""
    text = regularity_csv(obj) if isinstance(obj, RegularityField) else field_text(obj, metadata)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def parse_field(source):
    """Inverse of :func:`field_text`."""
    header = {}
    records = []
    for lineno, line in enumerate(_as_lines(source), start=1):
        if line.startswith("# "):
            key, _, value = line[2:].rstrip("\n").partition(" ")
            header[key] = value
            continue
        if not line.strip():
            continue
        vals = line.split()
        try:
            nums = np.array([float(v) for v in vals])
        except ValueError:
            raise ParseError(lineno, "non-numeric record") from None
        records.append(nums[0::2] + 1j * nums[1::2])
    try:
        kind = header["kind"]
        sizes = tuple(int(s) for s in header["sizes"].split())
        n = int(header["n"])
        meta = json.loads(header.get("metadata", "{}"))
    except (KeyError, ValueError) as exc:
        raise ParseError(None, f"bad field header: {exc}") from None
    if len(records) != int(np.prod(sizes)) or any(r.size != n * n for r in records):
        raise CountMismatch(f"expected {int(np.prod(sizes))} records of {n * n} entries")
    values = np.array(records).reshape(sizes + (n, n))
    if kind == "GaugeFrame":
        return GaugeFrame(KGrid(sizes), values, meta)
    if kind == "Homotopy":
        t = np.asarray(meta.pop("t"), dtype=float)
        max_step = meta.pop("max_step")
        return Homotopy(KGrid(sizes[:-1]), t, values, max_step, meta)
    if kind == "UnitaryField":
        return UnitaryField(KGrid(sizes), values)
    raise ParseError(1, f"unknown field kind {kind!r}")


def read_field(path):
    """Read a field written by :func:`emit_field` (regularity CSV included)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("k1"):
        return parse_regularity_csv(text)
    return parse_field(text)


def parse_regularity_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    dim = len(rows[0]) - 1
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    coords = data[:, :dim]
    sizes = tuple(len(np.unique(coords[:, i])) for i in range(dim))
    return RegularityField(KGrid(sizes), data[:, dim].reshape(sizes))
