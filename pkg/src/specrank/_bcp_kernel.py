"""Compiled inner loops for the product-partition change-point sampler.

The model marginal for a partition of an m-vector into b contiguous blocks,
after integrating out the block means (conjugate normal), the grand mean
(flat), the observation variance (1/s^2), and the signal-to-noise ratio
w ~ Uniform(0, w0], is proportional to

    integral_0^w0  w^((b-1)/2) (W + w B)^(-(m-1)/2) dw,

with W the within-block and B the between-block sum of squares. The Gibbs
full conditional of the change indicator at position i is the ratio of two
such integrals times the prior odds.

The integral is evaluated in closed form through the incomplete beta
function (continued-fraction expansion); a mode-bracketed composite
Gauss-Legendre rule in log(w) covers the parameter corners where the beta
route is unavailable. W is floored at a tiny multiple of the total sum of
squares so that exactly-fitted partitions stay finite.
"""

import math

import numpy as np
from numba import njit

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_NODES.flags.writeable = False
_GL_WEIGHTS.flags.writeable = False

_NEG_INF = float("-inf")


@njit(cache=True)
def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (modified Lentz)."""
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-15:
            return h
    return h


@njit(cache=True)
def _log_beta_inc(a, b, x, omx):
    """log of int_0^x t^(a-1) (1-t)^(b-1) dt for a, b > 0.

    ``omx`` is 1 - x computed without cancellation by the caller.
    Returns nan when the continued-fraction route loses the value.
    """
    if x <= 0.0:
        return _NEG_INF
    lbeta = (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    if omx <= 0.0:
        return lbeta
    front = a * math.log(x) + b * math.log(omx)
    if x < (a + 1.0) / (a + b + 2.0):
        cf = _betacf(a, b, x)
        if cf <= 0.0 or not math.isfinite(cf):
            return math.nan
        return front + math.log(cf) - math.log(a)
    cf = _betacf(b, a, omx)
    if cf <= 0.0 or not math.isfinite(cf):
        return math.nan
    log_tail = front + math.log(cf) - math.log(b)
    if log_tail >= lbeta:
        return math.nan
    return lbeta + math.log1p(-math.exp(log_tail - lbeta))


@njit(cache=True)
def _log_w_integral_gl(q, w_ss, b_ss, c, w0):
    """Composite Gauss-Legendre evaluation of the marginal integral in log(w).

    The integrand exp(h(t)) with h(t) = (q+1) t - c log(W + B e^t) is
    log-concave in t, so bracketing the mode and covering ~46 nats of decay
    with unit panels is reliable for any admissible (q, W, B).
    """
    t_hi = math.log(w0)
    s_hi = b_ss * w0 / (w_ss + b_ss * w0)
    if (q + 1.0) - c * s_hi >= 0.0:
        t_mode = t_hi
    else:
        t_mode = math.log(w_ss * (q + 1.0) / (b_ss * (c - q - 1.0)))
        if t_mode > t_hi:
            t_mode = t_hi
    h_mode = (q + 1.0) * t_mode - c * math.log(w_ss + b_ss * math.exp(t_mode))
    step = 1.0
    t_lo = t_mode - step
    for _ in range(80):
        h_lo = (q + 1.0) * t_lo - c * math.log(w_ss + b_ss * math.exp(t_lo))
        if h_lo <= h_mode - 46.0:
            break
        step *= 2.0
        t_lo = t_mode - step
    width = t_hi - t_lo
    npan = int(width) + 1
    if npan < 4:
        npan = 4
    pan = width / npan
    nn = _GL_NODES.size
    hvals = np.empty(npan * nn)
    wvals = np.empty(npan * nn)
    idx = 0
    for k in range(npan):
        lo = t_lo + k * pan
        mid = lo + 0.5 * pan
        half = 0.5 * pan
        for j in range(nn):
            t = mid + half * _GL_NODES[j]
            hvals[idx] = (q + 1.0) * t - c * math.log(w_ss + b_ss * math.exp(t))
            wvals[idx] = half * _GL_WEIGHTS[j]
            idx += 1
    hmax = hvals[0]
    for j in range(1, idx):
        if hvals[j] > hmax:
            hmax = hvals[j]
    acc = 0.0
    for j in range(idx):
        acc += wvals[j] * math.exp(hvals[j] - hmax)
    return hmax + math.log(acc)


@njit(cache=True)
def _log_w_integral(q, w_ss, b_ss, c, w0):
    """log of int_0^w0 w^q (W + w B)^(-c) dw with W > 0, B >= 0, q >= 0."""
    if b_ss * w0 <= w_ss * 1e-14:
        return -c * math.log(w_ss) + (q + 1.0) * math.log(w0) - math.log(q + 1.0)
    a = q + 1.0
    bb = c - q - 1.0
    if bb > 1e-12:
        denom = w_ss + w0 * b_ss
        x0 = w0 * b_ss / denom
        omx0 = w_ss / denom
        log_bx = _log_beta_inc(a, bb, x0, omx0)
        if not math.isnan(log_bx):
            return (a - c) * math.log(w_ss) - a * math.log(b_ss) + log_bx
    return _log_w_integral_gl(q, w_ss, b_ss, c, w0)


@njit(cache=True, inline="always")
def _block_within(s1, s2, a, b):
    length = b - a
    t1 = s1[b] - s1[a]
    v = (s2[b] - s2[a]) - t1 * t1 / length
    return v if v > 0.0 else 0.0


@njit(cache=True, inline="always")
def _block_between(s1, a, b):
    # between-block contribution around the grand mean 0 (series pre-centered)
    length = b - a
    t1 = s1[b] - s1[a]
    return t1 * t1 / length


@njit(cache=True)
def _partition_stats(u, s1, s2):
    """(W, B, blocks) of the partition encoded by the indicator vector."""
    m = u.size
    w_ss = 0.0
    b_ss = 0.0
    nb = 0
    start = 0
    for i in range(1, m + 1):
        if i == m or u[i] == 1:
            w_ss += _block_within(s1, s2, start, i)
            b_ss += _block_between(s1, start, i)
            nb += 1
            start = i
    return w_ss, b_ss, nb


@njit(cache=True)
def gibbs_change_points(xc, x_orig, logit_prior, n_record, burnin, u01, w0, w_floor):
    """Gibbs sampler over change indicators; returns (probs, fitted means).

    ``xc`` is the centered series used for the likelihood, ``x_orig`` the
    original series used for the reported block means. ``u01`` holds one
    uniform draw per (sweep, position).
    """
    m = xc.size
    c = 0.5 * (m - 1.0)
    s1 = np.zeros(m + 1)
    s2 = np.zeros(m + 1)
    o1 = np.zeros(m + 1)
    for i in range(m):
        s1[i + 1] = s1[i] + xc[i]
        s2[i + 1] = s2[i] + xc[i] * xc[i]
        o1[i + 1] = o1[i] + x_orig[i]

    u = np.zeros(m, np.uint8)
    u[0] = 1
    counts = np.zeros(m)
    fit = np.zeros(m)
    total = n_record + burnin

    for sweep in range(total):
        w_cur, b_cur, nb = _partition_stats(u, s1, s2)
        for i in range(1, m):
            l = i - 1
            while u[l] == 0:
                l -= 1
            r = i + 1
            while r < m and u[r] == 0:
                r += 1
            ss_m = _block_within(s1, s2, l, r)
            bb_m = _block_between(s1, l, r)
            ss_a = _block_within(s1, s2, l, i)
            bb_a = _block_between(s1, l, i)
            ss_b = _block_within(s1, s2, i, r)
            bb_b = _block_between(s1, i, r)
            if u[i] == 1:
                b0 = nb - 1
                w_rest = w_cur - ss_a - ss_b
                b_rest = b_cur - bb_a - bb_b
            else:
                b0 = nb
                w_rest = w_cur - ss_m
                b_rest = b_cur - bb_m
            if w_rest < 0.0:
                w_rest = 0.0
            if b_rest < 0.0:
                b_rest = 0.0
            w0_ss = w_rest + ss_m
            b0_ss = b_rest + bb_m
            w1_ss = w_rest + ss_a + ss_b
            b1_ss = b_rest + bb_a + bb_b
            log_odds = (
                logit_prior[i]
                + _log_w_integral(0.5 * b0, w1_ss + w_floor, b1_ss, c, w0)
                - _log_w_integral(0.5 * (b0 - 1), w0_ss + w_floor, b0_ss, c, w0)
            )
            if log_odds > 40.0:
                p1 = 1.0
            elif log_odds < -40.0:
                p1 = 0.0
            else:
                p1 = 1.0 / (1.0 + math.exp(-log_odds))
            new_u = 1 if u01[sweep, i - 1] < p1 else 0
            if new_u != u[i]:
                u[i] = new_u
                if new_u == 1:
                    nb = b0 + 1
                    w_cur = w1_ss
                    b_cur = b1_ss
                else:
                    nb = b0
                    w_cur = w0_ss
                    b_cur = b0_ss
        if sweep >= burnin:
            start = 0
            for i in range(1, m + 1):
                if i < m and u[i] == 1:
                    counts[i] += 1.0
                if i == m or u[i] == 1:
                    mean = (o1[i] - o1[start]) / (i - start)
                    for t in range(start, i):
                        fit[t] += mean
                    start = i

    probs = counts / n_record
    probs[0] = 0.0
    fit /= n_record
    return probs, fit
