"""Pure-Python implementations of the numerical hot loops.

Every function here has a twin in ``_core.pyx`` with the same signature and
the same floating-point operation order, so the two backends produce
bit-identical simulations.  ``gmhp._backend`` picks one at import time.
"""
import math

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
POISSON_PART = 1 << 63
POISSON_CHUNK = 500.0
MARKOV_TAG = 0x4D41524B
INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def hash_labels(seed, labels):
    h = mix64((seed + GOLDEN) & MASK)
    for lab in labels:
        h = mix64(((h ^ (lab & MASK)) + GOLDEN) & MASK)
    return h


def uniform_labels(seed, labels):
    """Uniform on (0, 1] keyed by ``seed`` and a label sequence."""
    return ((hash_labels(seed & MASK, labels) >> 11) + 1) * INV_2_53


def _u3(seed, a, b, c):
    h = mix64((seed + GOLDEN) & MASK)
    h = mix64(((h ^ a) + GOLDEN) & MASK)
    h = mix64(((h ^ b) + GOLDEN) & MASK)
    h = mix64(((h ^ c) + GOLDEN) & MASK)
    return ((h >> 11) + 1) * INV_2_53


def uniform3(seed, a, b, c):
    return _u3(seed & MASK, a & MASK, b & MASK, c & MASK)


def poisson_inv(lam, u):
    """Inverse-CDF Poisson draw: smallest k with F(k) >= u."""
    if lam <= 0.0:
        return 0
    p = math.exp(-lam)
    c = p
    k = 0
    while u > c:
        k += 1
        p = p * lam / k
        c += p
        if p == 0.0 and k > lam:
            break
    return k


def poisson3(seed, a, b, lam):
    """Poisson(lam) from the stream (seed, a, b); draw index 0 is reserved."""
    if lam <= 0.0:
        return 0
    if lam <= POISSON_CHUNK:
        return poisson_inv(lam, uniform3(seed, a, b, 0))
    parts = int(math.ceil(lam / POISSON_CHUNK))
    sub = lam / parts
    total = 0
    for q in range(parts):
        total += poisson_inv(sub, uniform3(seed, a, b, POISSON_PART | q))
    return total


# -- tabulated kernels -------------------------------------------------------

def _row_rates_base(t, b_alpha, b_init, b_decay, out):
    total = 0.0
    for r in range(len(out)):
        rate = b_alpha[r] + (b_init[r] - b_alpha[r]) * math.exp(-b_decay[r] * t)
        out[r] = rate
        total += rate
    return total


def _row_rates_exc(u, x, imp, kind, par1, par2, out):
    total = 0.0
    for r in range(len(out)):
        g = imp[r][x]
        if g == 0.0:
            out[r] = 0.0
            continue
        if kind[r][x] == 0:
            rate = g * math.exp(-par1[r][x] * u)
        else:
            rate = g / (u + par1[r][x]) ** par2[r][x]
        out[r] = rate
        total += rate
    return total


def _pick_mark(w, total, rates, row_ptr, row_marks, row_cumw):
    target = w * total
    cum = 0.0
    chosen = -1
    prev = 0.0
    nrow = len(rates)
    for r in range(nrow):
        if rates[r] <= 0.0:
            continue
        prev = cum
        cum += rates[r]
        chosen = r
        if target <= cum:
            break
    q = (target - prev) / rates[chosen]
    lo = row_ptr[chosen]
    hi = row_ptr[chosen + 1]
    for idx in range(lo, hi):
        if q <= row_cumw[idx]:
            return row_marks[idx]
    return row_marks[hi - 1]


def cluster_tabulated(b_alpha, b_init, b_decay, row_ptr, row_marks, row_cumw,
                      imp, kind, par1, par2, fhat, eta_hat, T, K, seed):
    """One cluster-construction path for a tabulated kernel.

    Returns ``(times, marks, gens)`` in creation order; creation order is the
    tie-breaking key used by the caller's sort.
    """
    b_alpha = [float(v) for v in b_alpha]
    b_init = [float(v) for v in b_init]
    b_decay = [float(v) for v in b_decay]
    row_ptr = [int(v) for v in row_ptr]
    row_marks = [int(v) for v in row_marks]
    row_cumw = [float(v) for v in row_cumw]
    imp = np.asarray(imp, dtype=float).tolist()
    kind = np.asarray(kind).tolist()
    par1 = np.asarray(par1, dtype=float).tolist()
    par2 = np.asarray(par2, dtype=float).tolist()
    fhat = [float(v) for v in fhat]
    eta_hat = float(eta_hat)
    T = float(T)
    seed &= MASK
    nrow = len(b_alpha)
    rates = [0.0] * nrow

    times = []
    marks = []
    gens = []

    # generation 0: immigrants
    prev = []
    p = poisson3(seed, 0, 0, T * eta_hat)
    for i in range(p):
        u = _u3(seed, 0, 0, 3 * i + 1)
        v = _u3(seed, 0, 0, 3 * i + 2)
        t = T * u
        a = eta_hat * v
        total = _row_rates_base(t, b_alpha, b_init, b_decay, rates)
        if a <= total:
            w = _u3(seed, 0, 0, 3 * i + 3)
            m = _pick_mark(w, total, rates, row_ptr, row_marks, row_cumw)
            prev.append((t, len(times)))
            times.append(t)
            marks.append(m)
            gens.append(0)

    k = 0
    while prev and k < K:
        prev.sort()
        new = []
        g = k + 1
        for j in range(len(prev)):
            s, pidx = prev[j]
            if s >= T:
                continue
            x = marks[pidx]
            fh = fhat[x]
            span = T - s
            p = poisson3(seed, g, j, span * fh)
            for i in range(p):
                u = _u3(seed, g, j, 3 * i + 1)
                v = _u3(seed, g, j, 3 * i + 2)
                t = s + span * u
                if t > T:
                    t = T
                if t <= s:
                    continue
                a = fh * v
                total = _row_rates_exc(t - s, x, imp, kind, par1, par2, rates)
                if a <= total:
                    w = _u3(seed, g, j, 3 * i + 3)
                    m = _pick_mark(w, total, rates, row_ptr, row_marks, row_cumw)
                    new.append((t, len(times)))
                    times.append(t)
                    marks.append(m)
                    gens.append(g)
        prev = new
        k += 1

    return (np.array(times, dtype=np.float64),
            np.array(marks, dtype=np.int64),
            np.array(gens, dtype=np.int64))


def tabulated_compensator(b_alpha, b_init, b_decay, row_w, imp, kind, par1, par2,
                          ev_times, ev_marks, query):
    """Integrated intensity at each query time, rows weighted by ``row_w``."""
    b_alpha = np.asarray(b_alpha, dtype=float)
    b_init = np.asarray(b_init, dtype=float)
    b_decay = np.asarray(b_decay, dtype=float)
    row_w = np.asarray(row_w, dtype=float)
    imp = np.asarray(imp, dtype=float)
    kind = np.asarray(kind)
    par1 = np.asarray(par1, dtype=float)
    par2 = np.asarray(par2, dtype=float)
    ev_times = np.asarray(ev_times, dtype=float)
    ev_marks = np.asarray(ev_marks, dtype=np.int64)
    query = np.atleast_1d(np.asarray(query, dtype=float))

    t = query[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        decay_part = np.where(b_decay > 0.0,
                              -np.expm1(-b_decay * t) / np.where(b_decay > 0, b_decay, 1.0),
                              t)
    base = (row_w * (b_alpha * t + (b_init - b_alpha) * decay_part)).sum(axis=1)
    if ev_times.size == 0:
        return base

    h = query[:, None] - ev_times[None, :]
    live = h > 0.0
    h = np.where(live, h, 0.0)
    g = imp[:, ev_marks]                    # (R, E)
    k = kind[:, ev_marks]
    p1 = par1[:, ev_marks]
    p2 = par2[:, ev_marks]
    hh = h[:, None, :]                      # (Q, 1, E)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        safe_b = np.where(p1 > 0, p1, 1.0)
        exp_int = -np.expm1(-p1 * hh) / safe_b
        one_minus_p = 1.0 - p2
        is_log = np.abs(one_minus_p) < 1e-12
        safe_om = np.where(is_log, 1.0, one_minus_p)
        pow_int = np.where(is_log,
                           np.log1p(hh / p1),
                           ((hh + p1) ** safe_om - p1 ** safe_om) / safe_om)
        integ = np.where(k == 0, exp_int, pow_int)
    contrib = (row_w[:, None] * g)[None, :, :] * integ
    contrib = np.where(live[:, None, :], contrib, 0.0)
    return base + contrib.sum(axis=(1, 2))


# -- bivariate exponential Markov simulator -----------------------------------

def markov_batch(alpha, beta, lam0, theta, T, seeds):
    """Thinning simulation of the (lambda1, lambda2, lambdac) Markov state.

    Returns ``(offsets, times, channels, lam_pre)`` where ``lam_pre[k]`` is
    the intensity vector just before event ``k`` and paths are stored
    contiguously between ``offsets[j]`` and ``offsets[j + 1]``.
    """
    alpha = [float(v) for v in alpha]
    beta = [float(v) for v in beta]
    lam0 = [float(v) for v in lam0]
    th = np.asarray(theta, dtype=float).tolist()
    T = float(T)
    offsets = [0]
    times = []
    chans = []
    pre = []
    for seed in seeds:
        seed = int(seed) & MASK
        l0, l1, l2 = lam0
        t = 0.0
        it = 0
        while True:
            bound = max(l0, alpha[0]) + max(l1, alpha[1]) + max(l2, alpha[2])
            if bound <= 0.0:
                break
            u = _u3(seed, MARKOV_TAG, 0, 3 * it)
            v = _u3(seed, MARKOV_TAG, 0, 3 * it + 1)
            w = _u3(seed, MARKOV_TAG, 0, 3 * it + 2)
            it += 1
            dt = -math.log(u) / bound
            t = t + dt
            if t > T:
                break
            l0 = alpha[0] + (l0 - alpha[0]) * math.exp(-beta[0] * dt)
            l1 = alpha[1] + (l1 - alpha[1]) * math.exp(-beta[1] * dt)
            l2 = alpha[2] + (l2 - alpha[2]) * math.exp(-beta[2] * dt)
            total = l0 + l1 + l2
            if v * bound <= total:
                target = w * total
                if target <= l0:
                    ch = 0
                elif target <= l0 + l1:
                    ch = 1
                else:
                    ch = 2
                times.append(t)
                chans.append(ch)
                pre.append((l0, l1, l2))
                l0 += th[0][ch]
                l1 += th[1][ch]
                l2 += th[2][ch]
        offsets.append(len(times))
    lam_pre = np.array(pre, dtype=np.float64).reshape(-1, 3)
    return (np.array(offsets, dtype=np.int64),
            np.array(times, dtype=np.float64),
            np.array(chans, dtype=np.int64),
            lam_pre)
