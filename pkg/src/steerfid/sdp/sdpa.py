"""SDPA sparse-format export and import.

The exported program is the real form::

    minimize    c . x
    subject to  sum_i x_i F_i - F_0 >= 0

Complex Hermitian blocks are written through their real symmetric embedding.
Equality rows ``a . x = b`` become a diagonal block holding ``a . x - b`` and
``b - a . x`` side by side. The objective offset ``c0`` is not representable in
the format; :func:`export_sdpa` returns it so callers can add it back.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .problem import Block, SdpProblem, complex_to_real


@dataclass
class SdpaData:
    """Parsed contents of an SDPA sparse file.

    ``entries`` holds one array per matrix index ``0..m`` (0 is ``F_0``) with
    columns ``block, i, j, value`` using 1-based, upper-triangle indices.
    """

    m: int
    block_sizes: list
    c: np.ndarray
    entries: list

    def entry_table(self) -> np.ndarray:
        """All entries as a sorted ``(matno, blk, i, j, value)`` array."""
        rows = []
        for k, e in enumerate(self.entries):
            for blk, i, j, v in e:
                rows.append((k, blk, i, j, v))
        if not rows:
            return np.zeros((0, 5))
        t = np.array(rows, dtype=float)
        return t[np.lexsort((t[:, 3], t[:, 2], t[:, 1], t[:, 0]))]


def _real_blocks(prob: SdpProblem):
    for blk in prob.blocks:
        yield complex_to_real(blk) if not blk.is_real else blk


def to_sdpa_data(prob: SdpProblem) -> SdpaData:
    n = prob.n_vars
    entries = [[] for _ in range(n + 1)]
    sizes = []
    bno = 0
    for blk in _real_blocks(prob):
        bno += 1
        m = blk.size
        sizes.append(m)
        f0 = -np.real(blk.f0)
        iu, ju = np.triu_indices(m)
        for i, j in zip(iu, ju):
            if f0[i, j] != 0.0:
                entries[0].append((bno, i + 1, j + 1, f0[i, j]))
        co = blk.coeffs.tocoo()
        r, cidx = np.divmod(co.row, m)
        for i, j, var, v in zip(r, cidx, co.col, np.real(co.data)):
            if i <= j and v != 0.0:
                entries[var + 1].append((bno, int(i) + 1, int(j) + 1, float(v)))
    p = prob.n_eq
    if p:
        bno += 1
        sizes.append(-2 * p)
        a = prob.a_eq.tocoo()
        for r, var, v in zip(a.row, a.col, a.data):
            if v != 0.0:
                entries[var + 1].append((bno, r + 1, r + 1, float(v)))
                entries[var + 1].append((bno, p + r + 1, p + r + 1, -float(v)))
        for r, v in enumerate(prob.b_eq):
            if v != 0.0:
                entries[0].append((bno, r + 1, r + 1, float(v)))
                entries[0].append((bno, p + r + 1, p + r + 1, -float(v)))
    for e in entries:
        e.sort()
    return SdpaData(n, sizes, prob.c.copy(), entries)


def export_sdpa(prob: SdpProblem, destination) -> float:
    """Write ``prob`` in SDPA sparse format.

    Parameters
    ----------
    prob : SdpProblem
    destination : str, os.PathLike or text stream

    Returns
    -------
    float
        The objective offset ``c0`` that the file cannot carry.
    """
    data = to_sdpa_data(prob)
    lines = [str(data.m), str(len(data.block_sizes)),
             " ".join(str(s) for s in data.block_sizes) if data.block_sizes else "",
             " ".join(repr(float(v)) for v in data.c) if data.m else ""]
    for k, e in enumerate(data.entries):
        for blk, i, j, v in e:
            lines.append(f"{k} {blk} {i} {j} {float(v)!r}")
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)
    return float(prob.c0)


def _numbers(line: str):
    for ch in ",{}()":
        line = line.replace(ch, " ")
    return line.split()


def parse_sdpa(source) -> SdpaData:
    """Read an SDPA sparse file (path or text stream)."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith(('"', "*"))]
    it = iter(lines)
    m = int(_numbers(next(it))[0])
    nblock = int(_numbers(next(it))[0])
    sizes = [int(float(t)) for t in _numbers(next(it))] if nblock else []
    if len(sizes) != nblock:
        raise ValueError("block size line does not match nBLOCK")
    c = np.array([float(t) for t in _numbers(next(it))]) if m else np.zeros(0)
    if c.size != m:
        raise ValueError("objective line does not match mDIM")
    entries = [[] for _ in range(m + 1)]
    for ln in it:
        tok = _numbers(ln)
        k, blk, i, j = (int(t) for t in tok[:4])
        v = float(tok[4])
        if i > j:
            i, j = j, i
        entries[k].append((blk, i, j, v))
    for e in entries:
        e.sort()
    return SdpaData(m, sizes, c, entries)


def sdpa_to_problem(data: SdpaData) -> SdpProblem:
    """Rebuild a real :class:`SdpProblem` from parsed SDPA data.

    Diagonal blocks are split into ``1 x 1`` blocks; the constant is negated
    back to the ``F0 + sum x_i F_i >= 0`` convention.
    """
    n = data.m
    layout = []  # (kind, size, first block id)
    blocks_out = []
    for b, s in enumerate(data.block_sizes, start=1):
        if s > 0:
            layout.append((b, "dense", s))
        else:
            layout.append((b, "diag", -s))
    by_block = {b: [[] for _ in range(n + 1)] for b, _, _ in layout}
    for k, e in enumerate(data.entries):
        for blk, i, j, v in e:
            by_block[blk][k].append((i - 1, j - 1, v))
    for b, kind, s in layout:
        if kind == "dense":
            f0 = np.zeros((s, s))
            for i, j, v in by_block[b][0]:
                f0[i, j] = f0[j, i] = -v
            rows, cols, vals = [], [], []
            for k in range(1, n + 1):
                for i, j, v in by_block[b][k]:
                    rows.append(i * s + j); cols.append(k - 1); vals.append(v)
                    if i != j:
                        rows.append(j * s + i); cols.append(k - 1); vals.append(v)
            co = sp.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(s * s, n))
            blocks_out.append(Block(s, f0.astype(complex), co, f"sdpa{b}"))
        else:
            f0 = np.zeros(s)
            for i, _, v in by_block[b][0]:
                f0[i] = -v
            coef = [dict() for _ in range(s)]
            for k in range(1, n + 1):
                for i, _, v in by_block[b][k]:
                    coef[i][k - 1] = v
            for i in range(s):
                cols = list(coef[i])
                co = sp.csc_matrix((np.array([coef[i][c] for c in cols], dtype=complex),
                                    (np.zeros(len(cols), dtype=int), cols)), shape=(1, n))
                blocks_out.append(Block(1, np.array([[f0[i]]], dtype=complex), co, f"sdpa{b}.{i}"))
    return SdpProblem(n, data.c, tuple(blocks_out))


def sdpa_text(prob: SdpProblem) -> str:
    buf = io.StringIO()
    export_sdpa(prob, buf)
    return buf.getvalue()
