"""Fused numba kernels for the grid engine.

Same arithmetic as :func:`metamolecule.grid.rhs`, evaluated node by node on
a zero-padded copy of the fields so the stencil needs no bounds checks.
"""
import math

import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True)
def rhs_padded(yp, out, t, Omega, omega, c, g, omega_d, M, R, P, dR, dP):
    nR = out.shape[1]
    nP = out.shape[2]
    w21 = -Omega
    cphi = math.cos(w21 * t)
    sphi = math.sin(w21 * t)
    drive = g * math.cos(omega_d * t)
    iR = 1.0 / (12.0 * dR)
    iP = 1.0 / (12.0 * dP)
    w2 = omega * omega / M
    for i in range(nR):
        ii = i + 2
        r = R[i]
        cR = c * r
        for j in range(nP):
            jj = j + 2
            pj = P[j]
            e11 = yp[0, ii, jj]
            e22 = yp[1, ii, jj]
            re = yp[2, ii, jj]
            im = yp[3, ii, jj]
            dPk0 = (yp[0, ii, jj - 2] - 8.0 * yp[0, ii, jj - 1] + 8.0 * yp[0, ii, jj + 1] - yp[0, ii, jj + 2]) * iP
            dPk1 = (yp[1, ii, jj - 2] - 8.0 * yp[1, ii, jj - 1] + 8.0 * yp[1, ii, jj + 1] - yp[1, ii, jj + 2]) * iP
            dPk2 = (yp[2, ii, jj - 2] - 8.0 * yp[2, ii, jj - 1] + 8.0 * yp[2, ii, jj + 1] - yp[2, ii, jj + 2]) * iP
            dPk3 = (yp[3, ii, jj - 2] - 8.0 * yp[3, ii, jj - 1] + 8.0 * yp[3, ii, jj + 1] - yp[3, ii, jj + 2]) * iP
            dRk0 = (yp[0, ii - 2, jj] - 8.0 * yp[0, ii - 1, jj] + 8.0 * yp[0, ii + 1, jj] - yp[0, ii + 2, jj]) * iR
            dRk1 = (yp[1, ii - 2, jj] - 8.0 * yp[1, ii - 1, jj] + 8.0 * yp[1, ii + 1, jj] - yp[1, ii + 2, jj]) * iR
            dRk2 = (yp[2, ii - 2, jj] - 8.0 * yp[2, ii - 1, jj] + 8.0 * yp[2, ii + 1, jj] - yp[2, ii + 2, jj]) * iR
            dRk3 = (yp[3, ii - 2, jj] - 8.0 * yp[3, ii - 1, jj] + 8.0 * yp[3, ii + 1, jj] - yp[3, ii + 2, jj]) * iR
            fr = w2 * r
            X = -re * sphi + im * cphi
            D = e11 - e22
            pop_flux = -c * (dPk2 * cphi + dPk3 * sphi)
            coh_flux = -0.5 * c * (dPk0 + dPk1)
            out[0, i, j] = -2.0 * cR * X + 2.0 * drive * X - (pj * dRk0 - fr * dPk0) + pop_flux
            out[1, i, j] = 2.0 * cR * X - 2.0 * drive * X - (pj * dRk1 - fr * dPk1) + pop_flux
            out[2, i, j] = -cR * D * sphi + drive * D * sphi - (pj * dRk2 - fr * dPk2) + coh_flux * cphi
            out[3, i, j] = cR * D * cphi - drive * D * cphi - (pj * dRk3 - fr * dPk3) + coh_flux * sphi


@nb.njit(cache=True, fastmath=True)
def _stage(yp, y, k, coeffs, nk, tau):
    nf, nR, nP = y.shape
    for f in range(nf):
        for i in range(nR):
            for j in range(nP):
                acc = y[f, i, j]
                for m in range(nk):
                    a = coeffs[m]
                    if a != 0.0:
                        acc += tau * a * k[m, f, i, j]
                yp[f, i + 2, j + 2] = acc


@nb.njit(cache=True, fastmath=True)
def rk5ck_fused(y, t, tau, A, C, B5, BE, Omega, omega, c, g, omega_d, M, R, P, dR, dP, k, yp, y_out):
    """Cash-Karp step; writes the 5th-order result to y_out, returns max |err|."""
    for s in range(6):
        _stage(yp, y, k, A[s], s, tau)
        rhs_padded(yp, k[s], t + C[s] * tau, Omega, omega, c, g, omega_d, M, R, P, dR, dP)
    nf, nR, nP = y.shape
    errmax = 0.0
    for f in range(nf):
        for i in range(nR):
            for j in range(nP):
                acc = y[f, i, j]
                e = 0.0
                for m in range(6):
                    acc += tau * B5[m] * k[m, f, i, j]
                    e += tau * BE[m] * k[m, f, i, j]
                y_out[f, i, j] = acc
                ae = abs(e)
                if ae > errmax:
                    errmax = ae
    return errmax


class FusedStepper:
    """Holds the work buffers for repeated fused steps on one geometry."""

    def __init__(self, p, geom):
        from .grid import CK_A, CK_B4, CK_B5, CK_C

        self.p = p
        self.geom = geom
        shape = (4, geom.n_R, geom.n_P)
        self.k = np.zeros((6,) + shape)
        self.yp = np.zeros((4, geom.n_R + 4, geom.n_P + 4))
        A = np.zeros((6, 6))
        for i, row in enumerate(CK_A):
            A[i, : len(row)] = row
        self.A = A
        self.C = np.array(CK_C)
        self.B5 = np.array(CK_B5)
        self.BE = np.array(CK_B5) - np.array(CK_B4)
        self.R = np.ascontiguousarray(geom.R)
        self.P = np.ascontiguousarray(geom.P)

    def step(self, y, t, tau):
        p, g = self.p, self.geom
        out = np.empty_like(y)
        err = rk5ck_fused(
            y, t, tau, self.A, self.C, self.B5, self.BE,
            p.Omega, p.omega, p.c, p.g, p.omega_d, p.M,
            self.R, self.P, g.dR, g.dP, self.k, self.yp, out,
        )
        return out, err

    def rhs(self, y, t):
        p, g = self.p, self.geom
        self.yp[:, 2:-2, 2:-2] = y
        out = np.empty_like(y)
        rhs_padded(self.yp, out, t, p.Omega, p.omega, p.c, p.g, p.omega_d, p.M,
                   self.R, self.P, g.dR, g.dP)
        return out
