"""Primal-dual interior-point solver for :class:`~steerfid.sdp.problem.SdpProblem`.

The method works on the homogeneous self-dual embedding of::

    minimize c.x   s.t.   G x + s = h,  A x = b,  s >= 0

where ``G x = -sum_i x_i F_i`` and ``h = F0``, so ``s`` is the value of every
LMI block. Search directions use Nesterov-Todd scaling on Hermitian blocks and
a Mehrotra predictor-corrector step; the Schur complement is dense.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .problem import SdpProblem, SdpSolution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    verbose: bool = False


class _Blk:
    """Working copy of one block restricted to the variables it touches."""

    def __init__(self, blk, keep):
        self.m = blk.size
        self.h = np.asarray(blk.f0, dtype=complex)
        co = blk.coeffs[:, keep].tocsc()
        nz = np.flatnonzero(np.diff(co.indptr))
        self.idx = nz
        self.F = co[:, nz].tocsc()
        self.FH = self.F.conj().T.tocsr()


def _herm(m):
    return 0.5 * (m + m.conj().T)


def _inner(u, v):
    return float(np.real(np.vdot(u, v)))


def _presolve_eq(a: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Drop zero and linearly dependent equality rows by pivoted QR.

    Returns the kept rows and a flag telling whether the dropped rows are
    consistent with the kept ones.
    """
    if a.shape[0] == 0:
        return a, b, True
    q, r, piv = sla.qr(a.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    scale = d[0] if d.size and d[0] > 0 else 1.0
    rank = int(np.sum(d > tol * max(1.0, scale)))
    keep = np.sort(piv[:rank])
    ak, bk = a[keep], b[keep]
    if rank < a.shape[0]:
        # least-squares consistency of the dropped rows
        sol, *_ = np.linalg.lstsq(ak, bk, rcond=None)
        consistent = np.max(np.abs(a @ sol - b)) <= 1e-8 * max(1.0, np.max(np.abs(b)))
    else:
        consistent = True
    return ak, bk, consistent


class _Solver:
    def __init__(self, prob: SdpProblem, opts: SolverOptions):
        self.opts = opts
        self.prob = prob
        n = prob.n_vars
        a = prob.a_eq.toarray() if prob.n_eq else np.zeros((0, n))
        used = np.zeros(n, dtype=bool)
        for blk in prob.blocks:
            used[np.flatnonzero(np.diff(blk.coeffs.tocsc().indptr))] = True
        if a.shape[0]:
            used |= np.any(a != 0, axis=0)
        self.keep = np.flatnonzero(used)
        self.free_unused = np.flatnonzero(~used)
        self.c = prob.c[self.keep]
        a = a[:, self.keep]
        self.a, self.b, self.eq_consistent = _presolve_eq(a, prob.b_eq)
        self.blocks = [_Blk(blk, self.keep) for blk in prob.blocks]
        self.n = self.keep.size
        self.p = self.a.shape[0]
        # an unconstrained variable with a cost makes the problem unbounded
        self.dependent_unbounded = bool(np.any(prob.c[self.free_unused] != 0))
        self._drop_dependent_columns()
        self.nu = sum(bk.m for bk in self.blocks)

    def _drop_dependent_columns(self, tol: float = 1e-12):
        """Remove variables whose constraint columns depend on the others.

        The constraint map only sees ``x_I + T x_D``, so the dependent part is
        pinned to zero. If the objective is not constant along the eliminated
        directions the problem is unbounded, which ``run`` reports.
        """
        n = self.n
        if n == 0:
            return
        M = np.zeros((n, n))
        for bk in self.blocks:
            M[np.ix_(bk.idx, bk.idx)] += np.real((bk.FH @ bk.F).toarray())
        if self.p:
            M += self.a.T @ self.a
        d = np.sqrt(np.diag(M))
        Mn = M / d[:, None] / d[None, :]
        _, piv, rank, _ = sla.lapack.dpstrf(Mn, tol=tol, lower=1)
        if rank >= n:
            return
        piv = piv - 1
        ind, dep = np.sort(piv[:rank]), np.sort(piv[rank:])
        T = sla.cho_solve(sla.cho_factor(M[np.ix_(ind, ind)], lower=True), M[np.ix_(ind, dep)])
        drift = self.c[dep] - T.T @ self.c[ind]
        if np.max(np.abs(drift), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(self.c))):
            self.dependent_unbounded = True
        self.keep = self.keep[ind]
        self.c = self.c[ind]
        if self.p:
            self.a = self.a[:, ind]
        self.blocks = [_Blk(blk, self.keep) for blk in self.prob.blocks]
        self.n = self.keep.size

    # linear maps -------------------------------------------------------
    def G(self, x):
        return [-(bk.F @ x[bk.idx]).reshape(bk.m, bk.m) for bk in self.blocks]

    def GT(self, z):
        out = np.zeros(self.n)
        for bk, zk in zip(self.blocks, z):
            out[bk.idx] -= np.real(bk.FH @ zk.ravel())
        return out

    # KKT factorization -------------------------------------------------
    def factor(self, Vs):
        """Factor the reduced system for scaling ``W z W`` with ``V = W^{-1}``."""
        n = self.n
        H = np.zeros((n, n))
        for bk, V in zip(self.blocks, Vs):
            m = bk.m
            kv = np.kron(V, V.T)
            T = (bk.F.T @ kv.T).T  # (m*m, k): columns vec(V F_j V)
            Hk = np.real(bk.FH @ T)
            H[np.ix_(bk.idx, bk.idx)] += Hk
        self.H = H
        M = H + self.a.T @ self.a if self.p else H.copy()
        reg = 0.0
        diag_scale = max(1.0, float(np.max(np.abs(np.diag(M))))) if n else 1.0
        for _ in range(8):
            try:
                self.L = sla.cho_factor(M + reg * np.eye(n), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg = diag_scale * (1e-14 if reg == 0.0 else reg / diag_scale * 100.0)
        else:
            raise np.linalg.LinAlgError("Schur complement not positive definite")
        self.reg = reg
        if self.p:
            self.MiAT = sla.cho_solve(self.L, self.a.T, check_finite=False)
            S = self.a @ self.MiAT
            self.LS = sla.cho_factor(_sym(S), lower=True, check_finite=False)
        self.Vs = Vs

    def _kkt_once(self, r1, r2, r3):
        Vs = self.Vs
        rhs = r1 + self.GT([V @ r @ V for V, r in zip(Vs, r3)])
        if self.p:
            rhs = rhs + self.a.T @ r2
            u = sla.cho_solve(self.L, rhs, check_finite=False)
            dy = sla.cho_solve(self.LS, self.a @ u - r2, check_finite=False)
            dx = u - self.MiAT @ dy
        else:
            dy = np.zeros(0)
            dx = sla.cho_solve(self.L, rhs, check_finite=False)
        gdx = self.G(dx)
        dz = [_herm(V @ (g - r) @ V) for V, g, r in zip(Vs, gdx, r3)]
        return dx, dy, dz

    def _kkt_residual(self, r1, r2, r3, Ws, dx, dy, dz):
        e1 = r1 - self.GT(dz)
        if self.p:
            e1 = e1 - self.a.T @ dy
        e2 = r2 - self.a @ dx if self.p else r2
        gdx = self.G(dx)
        e3 = [r - (g - W @ d @ W) for r, g, W, d in zip(r3, gdx, Ws, dz)]
        nrm = np.sqrt(e1 @ e1 + (e2 @ e2 if self.p else 0.0) + sum(_inner(e, e) for e in e3))
        return e1, e2, e3, nrm

    def kkt_solve(self, r1, r2, r3, Ws, refine: int = 6):
        """Solve G'dz + A'dy = r1, A dx = r2, G dx - W dz W = r3.

        Iterative refinement runs at most ``refine`` rounds and stops once the
        residual no longer shrinks.
        """
        dx, dy, dz = self._kkt_once(r1, r2, r3)
        e1, e2, e3, nrm = self._kkt_residual(r1, r2, r3, Ws, dx, dy, dz)
        scale = np.sqrt(r1 @ r1 + (r2 @ r2 if self.p else 0.0) + sum(_inner(r, r) for r in r3))
        for _ in range(refine):
            if nrm <= 1e-15 * max(scale, 1.0):
                break
            ex, ey, ez = self._kkt_once(e1, e2, e3)
            cx = dx + ex
            cy = dy + ey if self.p else dy
            cz = [d + e for d, e in zip(dz, ez)]
            f1, f2, f3, cn = self._kkt_residual(r1, r2, r3, Ws, cx, cy, cz)
            if cn >= nrm:
                break
            improved = cn < 0.5 * nrm
            dx, dy, dz, e1, e2, e3, nrm = cx, cy, cz, f1, f2, f3, cn
            if not improved:
                break
        return dx, dy, dz

    # main loop ---------------------------------------------------------
    def run(self) -> SdpSolution:
        t0 = time.perf_counter()
        o = self.opts
        n, p = self.n, self.p
        c, A, b = self.c, self.a, self.b
        h = [bk.h for bk in self.blocks]
        if not self.eq_consistent:
            return self._finish(np.zeros(n), np.inf, -np.inf, np.inf, np.inf, "infeasible", 0, t0,
                                "inconsistent equality constraints")
        if self.dependent_unbounded:
            return self._finish(np.zeros(n), -np.inf, -np.inf, np.inf, np.inf, "infeasible", 0, t0,
                                "dual infeasible (primal unbounded)")
        if len(h) == 0:
            return self._finish_lp_only(t0)
        eyes = [np.eye(bk.m) for bk in self.blocks]

        # initial point from two least-squares problems
        self.factor(eyes)
        x, _, ss = self.kkt_solve(np.zeros(n), b, h, eyes)
        s = [-si for si in ss]
        # s = h - Gx  (the kkt solve returns dz = Gx - h)
        _, y, z = self.kkt_solve(-c, np.zeros(p), [np.zeros_like(hi) for hi in h], eyes)
        s = _shift_interior(s)
        z = _shift_interior(z)
        tau, kappa = 1.0, 1.0

        resx0 = max(1.0, np.linalg.norm(c))
        resy0 = max(1.0, np.linalg.norm(b))
        resz0 = max(1.0, np.sqrt(sum(_inner(hi, hi) for hi in h)))
        status, detail = "maxIterations", ""
        history = []
        it = 0
        pcost = dcost = np.nan
        best = (np.inf, None, 1.0, np.nan, np.nan, 0)
        for it in range(o.max_iter + 1):
            Gx = self.G(x)
            rx = A.T @ y + self.GT(z) + c * tau if p else self.GT(z) + c * tau
            ry = A @ x - b * tau
            rz = [si + gi - hi * tau for si, gi, hi in zip(s, Gx, h)]
            cx, by = float(c @ x), float(b @ y)
            hz = sum(_inner(hi, zi) for hi, zi in zip(h, z))
            rt = kappa + cx + by + hz
            sz = sum(_inner(si, zi) for si, zi in zip(s, z))
            mu = (sz + tau * kappa) / (self.nu + 1)
            pcost, dcost = cx / tau, -(by + hz) / tau
            nrx = np.linalg.norm(rx)
            nry = np.linalg.norm(ry)
            nrz = np.sqrt(sum(_inner(r, r) for r in rz))
            pres = max(nry / resy0, nrz / resz0) / tau
            # dual residual relative to the size of the dual terms
            gtz = np.linalg.norm(self.GT(z)) / tau
            aty = np.linalg.norm(A.T @ y) / tau if p else 0.0
            dres = nrx / tau / max(resx0, gtz, aty)
            gap = sz / tau ** 2
            history.append((it, pcost, dcost, gap, pres, dres, tau, kappa))
            if o.verbose:
                log.info("%3d pcost %.9e dcost %.9e gap %.2e pres %.2e dres %.2e tau %.2e kappa %.2e",
                         *history[-1])
            # with both residuals small the optimum lies between dcost and pcost
            merit = max(pres / o.feas_tol, dres / o.feas_tol, abs(pcost - dcost) / o.gap_tol)
            if merit <= 1.0:
                status = "optimal"
                break
            # infeasibility certificates
            hresx = np.linalg.norm(A.T @ y + self.GT(z)) if p else np.linalg.norm(self.GT(z))
            if by + hz < 0 and hresx / resx0 / (-(by + hz)) <= o.feas_tol:
                status, detail = "infeasible", "primal infeasible"
                break
            hresy = np.linalg.norm(A @ x)
            hresz = np.sqrt(sum(_inner(si + gi, si + gi) for si, gi in zip(s, Gx)))
            if cx < 0 and max(hresy / resy0, hresz / resz0) / (-cx) <= o.feas_tol:
                status, detail = "infeasible", "dual infeasible (primal unbounded)"
                break
            if merit < best[0]:
                best = (merit, x.copy(), tau, pcost, dcost, it)
            elif it - best[5] >= 4 and merit > 10 * best[0] and tau > kappa:
                # tau > kappa: heading for an optimum, not an infeasibility certificate
                status, detail = "numericalTrouble", "progress stalled"
                break
            if it == o.max_iter:
                break

            # scaling
            try:
                Rs, Rinv, lam = _nt_scaling(s, z)
            except np.linalg.LinAlgError:
                status, detail = "numericalTrouble", "iterate left the cone"
                break
            Ws = [R @ R.conj().T for R in Rs]
            Vs = [Ri.conj().T @ Ri for Ri in Rinv]
            try:
                self.factor(Vs)
            except np.linalg.LinAlgError:
                status, detail = "numericalTrouble", "singular Schur complement"
                break
            dx1, dy1, dz1 = self.kkt_solve(-c, b, h, Ws)
            wz1 = sum(_inner(dzi, W @ dzi @ W) for dzi, W in zip(dz1, Ws))
            lam_sq = [np.diag(l ** 2) for l in lam]

            def direction(eta, rs, rk):
                # rs: rhs of lam o (ds~ + dz~) in scaled space; rk: rhs for tau*dk + kappa*dt
                u = [_lyap_inv(l, r) for l, r in zip(lam, rs)]
                r3 = [-eta * r - R @ ui @ R.conj().T for r, R, ui in zip(rz, Rs, u)]
                dx0, dy0, dz0 = self.kkt_solve(-eta * rx, -eta * ry, r3, Ws)
                num = -eta * rt - rk / tau - (c @ dx0 + b @ dy0
                                              + sum(_inner(hi, d) for hi, d in zip(h, dz0)))
                dt = num / (-(wz1 + kappa / tau))
                dx = dx0 + dt * dx1
                dy = dy0 + dt * dy1 if p else dy0
                dz = [a0 + dt * a1 for a0, a1 in zip(dz0, dz1)]
                # ds~ = u - dz~
                dzt = [R.conj().T @ d @ R for R, d in zip(Rs, dz)]
                gdx = self.G(dx)
                ds = [_herm(-eta * r - g + hi * dt) for r, g, hi in zip(rz, gdx, h)]
                dst = [_herm(Ri @ d @ Ri.conj().T) for Ri, d in zip(Rinv, ds)]
                dk = (rk - kappa * dt) / tau
                return dx, dy, dz, dzt, dst, dt, dk, ds

            def max_step(lam_, dst, dzt, dt, dk):
                amax = np.inf
                for l, ds_, dz_ in zip(lam_, dst, dzt):
                    isq = 1.0 / np.sqrt(l)
                    for d in (ds_, dz_):
                        e = np.linalg.eigvalsh(_herm(isq[:, None] * d * isq[None, :]))[0]
                        if e < 0:
                            amax = min(amax, -1.0 / e)
                if dt < 0:
                    amax = min(amax, -tau / dt)
                if dk < 0:
                    amax = min(amax, -kappa / dk)
                return amax

            # predictor
            rs_aff = [-l2 for l2 in lam_sq]
            aff = direction(1.0, rs_aff, -tau * kappa)
            a_aff = min(1.0, max_step(lam, aff[4], aff[3], aff[5], aff[6]))
            sigma = (1.0 - a_aff) ** 3
            # corrector
            rs = [sigma * mu * np.eye(l.size) - l2 - _jordan(dsa, dza)
                  for l, l2, dsa, dza in zip(lam, lam_sq, aff[4], aff[3])]
            rk = sigma * mu - tau * kappa - aff[5] * aff[6]
            dx, dy, dz, dzt, dst, dt, dk, ds = direction(1.0 - sigma, rs, rk)
            amax = max_step(lam, dst, dzt, dt, dk)
            alpha = min(1.0, o.step_fraction * amax)
            x = x + alpha * dx
            if p:
                y = y + alpha * dy
            s = [_herm(si + alpha * d) for si, d in zip(s, ds)]
            z = [_herm(zi + alpha * d) for zi, d in zip(z, dz)]
            tau = tau + alpha * dt
            kappa = kappa + alpha * dk
        self.history = history
        if status in ("numericalTrouble", "maxIterations") and best[1] is not None:
            # fall back to the most accurate iterate seen
            _, x, tau, pcost, dcost, _ = best
        xs = x / tau
        return self._finish(xs, pcost, dcost, abs(pcost - dcost), None, status, it, t0, detail)

    def _finish_lp_only(self, t0):
        # no cone: minimize c.x over an affine set
        n = self.n
        if n == 0:
            return self._finish(np.zeros(0), 0.0, 0.0, 0.0, 0.0, "optimal", 0, t0)
        if self.p:
            x, *_ = np.linalg.lstsq(self.a, self.b, rcond=None)
            lam, *_ = np.linalg.lstsq(self.a.T, self.c, rcond=None)
            if np.linalg.norm(self.a.T @ lam - self.c) > 1e-9:
                return self._finish(x, -np.inf, -np.inf, np.inf, 0.0, "infeasible", 0, t0,
                                    "dual infeasible (primal unbounded)")
        else:
            x = np.zeros(n)
            if np.linalg.norm(self.c) > 0:
                return self._finish(x, -np.inf, -np.inf, np.inf, 0.0, "infeasible", 0, t0,
                                    "dual infeasible (primal unbounded)")
        v = float(self.c @ x)
        return self._finish(x, v, v, 0.0, 0.0, "optimal", 0, t0)

    def _finish(self, xk, pcost, dcost, gap, _res, status, it, t0, detail=""):
        prob = self.prob
        x = np.zeros(prob.n_vars)
        x[self.keep] = xk
        res = prob.primal_residual(x) if np.all(np.isfinite(x)) else np.inf
        if status == "optimal" and res > max(self.opts.feas_tol, 1e-8) * 10:
            detail = f"residual {res:.2e} above tolerance"
        return SdpSolution(
            x=x,
            primal_objective=float(pcost + prob.c0),
            dual_objective=float(dcost + prob.c0),
            gap=float(gap),
            max_primal_residual=float(res),
            status=status,
            iterations=it,
            seconds=time.perf_counter() - t0,
            detail=detail,
            history=getattr(self, "history", []),
        )


def _sym(m):
    return 0.5 * (m + m.T)


def _shift_interior(ms):
    out = []
    for m in ms:
        m = _herm(m)
        e = np.linalg.eigvalsh(m)[0]
        nrm = np.linalg.norm(m)
        if e < 1e-8 * max(nrm, 1.0) or nrm == 0:
            m = m + (1.0 + max(0.0, -e)) * np.eye(m.shape[0])
        out.append(m)
    return out


def _nt_scaling(s, z):
    """Nesterov-Todd scaling matrices ``R`` with ``R^H z R = R^-1 s R^-H = diag(lam)``."""
    Rs, Rinv, lams = [], [], []
    for sk, zk in zip(s, z):
        Ls = np.linalg.cholesky(sk)
        Lz = np.linalg.cholesky(zk)
        U, sv, Vh = np.linalg.svd(Lz.conj().T @ Ls)
        isq = 1.0 / np.sqrt(sv)
        R = Ls @ Vh.conj().T * isq[None, :]
        Ri = (np.sqrt(sv)[:, None] * Vh) @ sla.solve_triangular(Ls, np.eye(Ls.shape[0]), lower=True)
        Rs.append(R)
        Rinv.append(Ri)
        lams.append(sv)
    return Rs, Rinv, lams


def _lyap_inv(lam, r):
    """Solve ``lam o u = r`` for diagonal ``lam`` (symmetrized product)."""
    return _herm(2.0 * r / (lam[:, None] + lam[None, :]))


def _jordan(a, b):
    return 0.5 * (a @ b + b @ a)


def solve(prob: SdpProblem, gap_tol: float = 1e-7, feas_tol: float = 1e-8, max_iter: int = 200,
          verbose: bool = False, options: SolverOptions | None = None) -> SdpSolution:
    """Minimize an :class:`SdpProblem` with the embedded interior-point method.

    Parameters
    ----------
    prob : SdpProblem
    gap_tol, feas_tol : float
        Absolute duality-gap and relative feasibility tolerances for ``optimal``.
    max_iter : int

    Returns
    -------
    SdpSolution
        ``status`` is one of ``optimal``, ``infeasible``, ``numericalTrouble``
        or ``maxIterations``; the primal point is returned in every case.
    """
    opts = options or SolverOptions(gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter, verbose=verbose)
    return _Solver(prob, opts).run()
