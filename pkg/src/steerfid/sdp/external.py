"""Independent cross-check: hand an SDPA file to cvxopt's conic solver."""
from __future__ import annotations

import numpy as np

from .sdpa import SdpaData, parse_sdpa


def solve_sdpa_with_cvxopt(source, feastol: float = 1e-9, abstol: float = 1e-9,
                           reltol: float = 1e-9) -> dict:
    """Solve an SDPA sparse file with ``cvxopt.solvers.sdp``.

    Parameters
    ----------
    source : path, text stream or :class:`SdpaData`

    Returns
    -------
    dict
        ``status``, ``x`` and ``primal_objective`` (without any offset).
    """
    from cvxopt import matrix, solvers

    data = source if isinstance(source, SdpaData) else parse_sdpa(source)
    n = data.m
    dense = [(b, s) for b, s in enumerate(data.block_sizes, start=1) if s > 0]
    diag = [(b, -s) for b, s in enumerate(data.block_sizes, start=1) if s < 0]
    # diagonal blocks: linear rows  -F_i x <= -F_0
    lin_off = {}
    off = 0
    for b, s in diag:
        lin_off[b] = off
        off += s
    nl = off
    Gl = np.zeros((nl, n))
    hl = np.zeros(nl)
    Gs = {b: np.zeros((s * s, n)) for b, s in dense}
    hs = {b: np.zeros((s, s)) for b, s in dense}
    size = dict(dense)
    for k, e in enumerate(data.entries):
        for blk, i, j, v in e:
            if blk in lin_off:
                r = lin_off[blk] + i - 1
                if k == 0:
                    hl[r] = -v
                else:
                    Gl[r, k - 1] = -v
            else:
                s = size[blk]
                if k == 0:
                    hs[blk][i - 1, j - 1] = hs[blk][j - 1, i - 1] = -v
                else:
                    # cvxopt reads the lower triangle, column-major
                    Gs[blk][(i - 1) * s + (j - 1), k - 1] = -v
                    Gs[blk][(j - 1) * s + (i - 1), k - 1] = -v
    opts = {"show_progress": False, "feastol": feastol, "abstol": abstol, "reltol": reltol,
            "maxiters": 200}
    kw = {}
    if nl:
        kw["Gl"] = matrix(Gl)
        kw["hl"] = matrix(hl)
    if dense:
        kw["Gs"] = [matrix(Gs[b]) for b, _ in dense]
        kw["hs"] = [matrix(hs[b]) for b, _ in dense]
    sol = solvers.sdp(matrix(np.asarray(data.c, dtype=float)), options=opts, **kw)
    x = np.array(sol["x"]).ravel() if sol["x"] is not None else None
    return {"status": sol["status"], "x": x, "primal_objective": sol["primal objective"]}
