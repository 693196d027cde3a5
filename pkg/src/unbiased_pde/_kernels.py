"""Compiled inner loops and built-in coefficient families.

Every family takes its parameters as a float64 array so that one compiled
solver serves all parameter values.  Families write into a caller-owned
buffer so the time-stepping loop does not allocate.  Signatures:

    basis(x, m, p, out)      out[:m]        values of the first m basis functions
    sigma(x, p, out)         out (d, d')
    sigma_jac(x, p, out)     out (d, d', d)   [i, j, l] = d sigma_ij / d x_l
    payoff(x, p)             -> float
"""

import numpy as np
from numba import njit

# -- basis families -----------------------------------------------------------


@njit(cache=True)
def sine_basis(x, m, p, out):
    for i in range(m):
        out[i] = np.sin((i + 1) * x[0])


@njit(cache=True)
def cosine_basis(x, m, p, out):
    for i in range(m):
        out[i] = np.cos((i + 1) * x[0])


@njit(cache=True)
def neg_linear_basis(x, m, p, out):
    # psi_i(x) = -x_1 for every i; pair with a one-term truncation
    for i in range(m):
        out[i] = -x[0]


@njit(cache=True)
def constant_basis(x, m, p, out):
    for i in range(m):
        out[i] = 1.0


# -- diffusion families -------------------------------------------------------
# constant: p = [d, d', row-major entries]


@njit(cache=True)
def constant_sigma(x, p, out):
    d, dp = out.shape
    for i in range(d):
        for j in range(dp):
            out[i, j] = p[2 + i * dp + j]


@njit(cache=True)
def constant_sigma_jac(x, p, out):
    out[:] = 0.0


@njit(cache=True)
def cos_sigma(x, p, out):
    out[0, 0] = p[0] * np.cos(x[0])


@njit(cache=True)
def cos_sigma_jac(x, p, out):
    out[0, 0, 0] = -p[0] * np.sin(x[0])


@njit(cache=True)
def linear_sigma(x, p, out):
    out[0, 0] = p[0] * x[0]


@njit(cache=True)
def linear_sigma_jac(x, p, out):
    out[0, 0, 0] = p[0]


# -- payoff families ----------------------------------------------------------


@njit(cache=True)
def square_payoff(x, p):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


@njit(cache=True)
def affine_payoff(x, p):
    # p = [offset, w_1, ..., w_d]
    s = p[0]
    for i in range(x.shape[0]):
        s += p[1 + i] * x[i]
    return s


# -- solver -------------------------------------------------------------------


@njit(nogil=True)
def _solve(x0, inc, swap, dt, coef, m, sigma, sigma_jac, sp, basis, bp):
    d = x0.shape[0]
    dp = inc.shape[1]
    x = x0.copy()
    xn = np.empty(d)
    db = np.empty(dp)
    area = np.empty((dp, dp))
    psi = np.empty(max(m, 1))
    s = np.empty((d, dp))
    jac = np.empty((d, dp, d))
    for k in range(inc.shape[0]):
        kk = (k ^ 1) if swap else k
        for j in range(dp):
            db[j] = inc[kk, j]
        for a in range(dp):
            for c in range(dp):
                area[a, c] = 0.5 * db[a] * db[c]
            area[a, a] -= 0.5 * dt
        basis(x, m, bp, psi)
        sigma(x, sp, s)
        sigma_jac(x, sp, jac)
        for i in range(d):
            mu = 0.0
            for t in range(m):
                mu += coef[t, i] * psi[t]
            v = x[i] + mu * dt
            for j in range(dp):
                v += s[i, j] * db[j]
            for j in range(dp):
                for l in range(d):
                    g = jac[i, j, l]
                    if g != 0.0:
                        acc = 0.0
                        for a in range(dp):
                            acc += s[l, a] * area[a, j]
                        v += g * acc
            xn[i] = v
        for i in range(d):
            x[i] = xn[i]
    return x


@njit(nogil=True)
def _coarsen(inc):
    return inc[0::2] + inc[1::2]


@njit(nogil=True)
def coupled_terms(x0s, rows, coefs, incs, offs, levels, base_level, m_fine, m_coarse,
                  m_base, horizon, sigma, sigma_jac, sp, basis, bp, payoff, fp, out):
    """Payoffs of the fine, antithetic, coarse and base solutions per sample.

    Sample ``b`` uses fine increments ``incs[offs[b]:offs[b] + 2**levels[b]]``
    and coefficient row ``coefs[rows[b]]``.  ``out[b]`` receives
    ``f(X_fine), f(X_anti), f(X_coarse), f(X_base)``; the base column is left
    untouched when ``base_level < 0``.
    """
    for b in range(levels.shape[0]):
        lev = levels[b]
        fine = incs[offs[b]:offs[b] + (1 << lev)]
        coef = coefs[rows[b]]
        x0 = x0s[b]
        dt = horizon * 2.0 ** -lev
        xf = _solve(x0, fine, False, dt, coef, m_fine[b], sigma, sigma_jac, sp, basis, bp)
        xa = _solve(x0, fine, True, dt, coef, m_fine[b], sigma, sigma_jac, sp, basis, bp)
        coarse = _coarsen(fine)
        xc = _solve(x0, coarse, False, 2.0 * dt, coef, m_coarse[b],
                    sigma, sigma_jac, sp, basis, bp)
        out[b, 0] = payoff(xf, fp)
        out[b, 1] = payoff(xa, fp)
        out[b, 2] = payoff(xc, fp)
        if base_level >= 0:
            if base_level == lev - 1 and m_base == m_coarse[b]:
                out[b, 3] = out[b, 2]
            else:
                cur = coarse
                for _ in range(lev - 1 - base_level):
                    cur = _coarsen(cur)
                xb = _solve(x0, cur, False, horizon * 2.0 ** -base_level, coef, m_base,
                            sigma, sigma_jac, sp, basis, bp)
                out[b, 3] = payoff(xb, fp)


@njit(nogil=True)
def terminal_payoffs(x0s, rows, coefs, incs, offs, levels, msize, horizon, sigma, sigma_jac,
                     sp, basis, bp, payoff, fp, out):
    """``out[b] = f(X_{levels[b]}(T))`` on the given increments, no coupling."""
    for b in range(levels.shape[0]):
        lev = levels[b]
        inc = incs[offs[b]:offs[b] + (1 << lev)]
        x = _solve(x0s[b], inc, False, horizon * 2.0 ** -lev, coefs[rows[b]], msize[b],
                   sigma, sigma_jac, sp, basis, bp)
        out[b] = payoff(x, fp)
