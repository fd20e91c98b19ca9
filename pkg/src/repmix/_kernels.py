"""Compiled inner loops for the collapsed assignment sweep."""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _gammainc_pq(a, x):
    """Regularized lower and upper incomplete gamma ``(P(a, x), Q(a, x))``."""
    if x <= 0.0:
        return 0.0, 1.0
    lpre = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        ap = a
        s = 1.0 / a
        d = s
        for _ in range(10000):
            ap += 1.0
            d *= x / ap
            s += d
            if abs(d) < abs(s) * 1e-16:
                break
        p = s * math.exp(lpre)
        return p, 1.0 - p
    b = x + 1.0 - a
    c = 1.0 / 1e-300
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < 1e-300:
            d = 1e-300
        c = b + an / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    q = math.exp(lpre) * h
    return 1.0 - q, q


@njit(cache=True)
def truncated_gamma_draw(rng, a, x_lo, x_hi, by_rejection):
    """``Gamma(a, 1)`` restricted to ``[x_lo, x_hi]``.

    Plain rejection when the interval holds most of the mass, otherwise
    inversion of the CDF by bisection on whichever tail keeps precision.
    """
    if by_rejection:
        for _ in range(100000):
            x = rng.gamma(a, 1.0)
            if x_lo <= x <= x_hi:
                return x
    p_lo, q_lo = _gammainc_pq(a, x_lo)
    p_hi, q_hi = _gammainc_pq(a, x_hi)
    u = rng.random()
    upper = p_lo > 0.5
    if upper:
        target = q_lo - u * (q_lo - q_hi)
    else:
        target = p_lo + u * (p_hi - p_lo)
    lo = x_lo
    hi = x_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pm, qm = _gammainc_pq(a, mid)
        if upper:
            below = qm > target
        else:
            below = pm < target
        if below:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def draw_aux(rng, beta_out, coord_out, coords, alive, a0, b0, s2_lo, s2_hi, by_rejection,
             C, W, scale_sigma, active, g0, max_rej):
    """Draw ``(beta, sigma^2)`` from the prior tilted by repulsion against alive components.

    Writes the coefficient vector and its metric coordinates into the output
    buffers; returns ``(sigma2, tries, capped)``.
    """
    p = beta_out.shape[0]
    cap = alive.shape[0]
    zz = np.empty(p)
    s2 = 0.0
    tries = 0
    while True:
        tries += 1
        x = truncated_gamma_draw(rng, a0, b0 / s2_hi, b0 / s2_lo, by_rejection)
        s2 = min(max(b0 / x, s2_lo), s2_hi)
        for j in range(p):
            zz[j] = rng.standard_normal()
        scale = math.sqrt(s2) if scale_sigma else 1.0
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += C[j, k] * zz[k]
            beta_out[j] = scale * acc
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += W[j, k] * beta_out[k]
            coord_out[j] = acc
        if not active:
            return s2, tries, False
        dmin = np.inf
        for c in range(cap):
            if alive[c]:
                d = 0.0
                for j in range(p):
                    t = coord_out[j] - coords[c, j]
                    d += t * t
                dmin = min(dmin, d)
        h = 1.0 if dmin == np.inf else dmin / (dmin + g0)
        if rng.random() < h:
            return s2, tries, False
        if tries >= max_rej:
            return s2, tries, True


@njit(cache=True)
def assignment_sweep_kernel(rng, X, y, z, beta, sigma2, counts, alive, coords, log_new, alpha,
                            k_max, a0, b0, s2_lo, s2_hi, by_rejection, C, W, scale_sigma,
                            active, g0, max_rej, diag):
    """One pass of collapsed reassignment over all observations, in index order.

    ``log_new[l]`` is ``log(alpha V_n(l+1) / V_n(l))``. New components take
    the smallest free id. ``diag`` accumulates
    ``[rejection caps, underflow fallbacks, aux tries, aux draws, new clusters]``.
    """
    n, p = X.shape
    cap = alive.shape[0]
    ell = 0
    for c in range(cap):
        if alive[c]:
            ell += 1
    bnew = np.empty(p)
    cnew = np.empty(p)
    logw = np.empty(cap + 1)
    for i in range(n):
        c = z[i]
        counts[c] -= 1
        if counts[c] == 0:
            alive[c] = False
            ell -= 1
        open_ok = ell < k_max
        s2new = 1.0
        if open_ok:
            s2new, tries, capped = draw_aux(rng, bnew, cnew, coords, alive, a0, b0, s2_lo, s2_hi,
                                            by_rejection, C, W, scale_sigma, active, g0, max_rej)
            diag[2] += tries
            diag[3] += 1
            if capped:
                diag[0] += 1
        yi = y[i]
        top = -np.inf
        for k in range(cap):
            if alive[k]:
                mu = 0.0
                for j in range(p):
                    mu += X[i, j] * beta[k, j]
                r = yi - mu
                lw = (math.log(counts[k] + alpha) - 0.5 * (LOG_2PI + math.log(sigma2[k]))
                      - 0.5 * r * r / sigma2[k])
                if math.isnan(lw):
                    lw = -np.inf
            else:
                lw = -np.inf
            logw[k] = lw
            top = max(top, lw)
        if open_ok:
            mu = 0.0
            for j in range(p):
                mu += X[i, j] * bnew[j]
            r = yi - mu
            lw = log_new[ell] - 0.5 * (LOG_2PI + math.log(s2new)) - 0.5 * r * r / s2new
            if math.isnan(lw):
                lw = -np.inf
        else:
            lw = -np.inf
        logw[cap] = lw
        top = max(top, lw)

        choice = -1
        if top == -np.inf or top == np.inf:
            if ell > 0:
                diag[1] += 1
                pick = int(rng.random() * ell)
                for k in range(cap):
                    if alive[k]:
                        if pick == 0:
                            choice = k
                            break
                        pick -= 1
            else:
                choice = cap
        else:
            total = 0.0
            for k in range(cap + 1):
                logw[k] = math.exp(logw[k] - top)
                total += logw[k]
            u = rng.random() * total
            acc = 0.0
            for k in range(cap + 1):
                acc += logw[k]
                if logw[k] > 0.0 and u < acc:
                    choice = k
                    break
            if choice < 0:
                for k in range(cap, -1, -1):
                    if logw[k] > 0.0:
                        choice = k
                        break

        if choice == cap:
            k = 0
            while alive[k]:
                k += 1
            for j in range(p):
                beta[k, j] = bnew[j]
                coords[k, j] = cnew[j]
            sigma2[k] = s2new
            alive[k] = True
            counts[k] = 1
            ell += 1
            z[i] = k
            diag[4] += 1
        else:
            counts[choice] += 1
            z[i] = choice
