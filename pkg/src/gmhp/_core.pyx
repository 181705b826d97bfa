# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot loops; see ``_pycore.py`` for the reference twin."""
from libc.math cimport exp, log, pow, ceil, expm1, log1p, fabs
from libc.stdint cimport uint64_t, int64_t
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #define GMHP_GOLDEN 0x9E3779B97F4A7C15ULL
    #define GMHP_M1 0xBF58476D1CE4E5B9ULL
    #define GMHP_M2 0x94D049BB133111EBULL
    #define GMHP_POISSON_PART 0x8000000000000000ULL
    #define GMHP_MARKOV_TAG 0x4D41524BULL
    """
    const uint64_t GMHP_GOLDEN
    const uint64_t GMHP_M1
    const uint64_t GMHP_M2
    const uint64_t GMHP_POISSON_PART
    const uint64_t GMHP_MARKOV_TAG

cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double POISSON_CHUNK = 500.0

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
POISSON_PART = 1 << 63
MARKOV_TAG = 0x4D41524B


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * GMHP_M1
    z = (z ^ (z >> 27)) * GMHP_M2
    return z ^ (z >> 31)


cdef inline double _u3(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) noexcept nogil:
    cdef uint64_t h = _mix(seed + GMHP_GOLDEN)
    h = _mix((h ^ a) + GMHP_GOLDEN)
    h = _mix((h ^ b) + GMHP_GOLDEN)
    h = _mix((h ^ c) + GMHP_GOLDEN)
    return (<double>((h >> 11) + 1)) * INV_2_53


cdef int64_t _poisson_inv(double lam, double u) noexcept nogil:
    cdef double p, c
    cdef int64_t k = 0
    if lam <= 0.0:
        return 0
    p = exp(-lam)
    c = p
    while u > c:
        k += 1
        p = p * lam / <double>k
        c += p
        if p == 0.0 and <double>k > lam:
            break
    return k


cdef int64_t _poisson3(uint64_t seed, uint64_t a, uint64_t b, double lam) noexcept nogil:
    cdef int64_t parts, q, total
    cdef double sub
    if lam <= 0.0:
        return 0
    if lam <= POISSON_CHUNK:
        return _poisson_inv(lam, _u3(seed, a, b, 0))
    parts = <int64_t>ceil(lam / POISSON_CHUNK)
    sub = lam / <double>parts
    total = 0
    for q in range(parts):
        total += _poisson_inv(sub, _u3(seed, a, b, GMHP_POISSON_PART | <uint64_t>q))
    return total


def mix64(z):
    return _mix(<uint64_t>(z & MASK))


def hash_labels(seed, labels):
    cdef uint64_t h = _mix(<uint64_t>(seed & MASK) + GMHP_GOLDEN)
    for lab in labels:
        h = _mix((h ^ <uint64_t>(lab & MASK)) + GMHP_GOLDEN)
    return h


def uniform_labels(seed, labels):
    """Uniform on (0, 1] keyed by ``seed`` and a label sequence."""
    return (<double>((<uint64_t>hash_labels(seed, labels) >> 11) + 1)) * INV_2_53


def uniform3(seed, a, b, c):
    return _u3(<uint64_t>(seed & MASK), <uint64_t>(a & MASK),
               <uint64_t>(b & MASK), <uint64_t>(c & MASK))


def poisson_inv(double lam, double u):
    return _poisson_inv(lam, u)


def poisson3(seed, a, b, double lam):
    return _poisson3(<uint64_t>(seed & MASK), <uint64_t>(a & MASK),
                     <uint64_t>(b & MASK), lam)


cdef inline double _row_rates_base(double t, const double[::1] b_alpha,
                                   const double[::1] b_init, const double[::1] b_decay,
                                   double* out) noexcept nogil:
    cdef Py_ssize_t r
    cdef double total = 0.0, rate
    for r in range(b_alpha.shape[0]):
        rate = b_alpha[r] + (b_init[r] - b_alpha[r]) * exp(-b_decay[r] * t)
        out[r] = rate
        total += rate
    return total


cdef inline double _row_rates_exc(double u, Py_ssize_t x, const double[:, ::1] imp,
                                  const int64_t[:, ::1] kind, const double[:, ::1] par1,
                                  const double[:, ::1] par2, double* out) noexcept nogil:
    cdef Py_ssize_t r
    cdef double total = 0.0, rate, g
    for r in range(imp.shape[0]):
        g = imp[r, x]
        if g == 0.0:
            out[r] = 0.0
            continue
        if kind[r, x] == 0:
            rate = g * exp(-par1[r, x] * u)
        else:
            rate = g / pow(u + par1[r, x], par2[r, x])
        out[r] = rate
        total += rate
    return total


cdef inline int64_t _pick_mark(double w, double total, double* rates, Py_ssize_t nrow,
                               const int64_t[::1] row_ptr, const int64_t[::1] row_marks,
                               const double[::1] row_cumw) noexcept nogil:
    cdef double target = w * total
    cdef double cum = 0.0, prev = 0.0, q
    cdef Py_ssize_t r, idx, chosen = -1
    cdef int64_t lo, hi
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
                      imp, kind, par1, par2, fhat, double eta_hat, double T,
                      int64_t K, seed):
    """One cluster-construction path for a tabulated kernel (creation order)."""
    cdef const double[::1] ba = np.ascontiguousarray(b_alpha, dtype=np.float64)
    cdef const double[::1] bi = np.ascontiguousarray(b_init, dtype=np.float64)
    cdef const double[::1] bd = np.ascontiguousarray(b_decay, dtype=np.float64)
    cdef const int64_t[::1] rp = np.ascontiguousarray(row_ptr, dtype=np.int64)
    cdef const int64_t[::1] rm = np.ascontiguousarray(row_marks, dtype=np.int64)
    cdef const double[::1] rc = np.ascontiguousarray(row_cumw, dtype=np.float64)
    cdef const double[:, ::1] im = np.ascontiguousarray(imp, dtype=np.float64)
    cdef const int64_t[:, ::1] kd = np.ascontiguousarray(kind, dtype=np.int64)
    cdef const double[:, ::1] p1 = np.ascontiguousarray(par1, dtype=np.float64)
    cdef const double[:, ::1] p2 = np.ascontiguousarray(par2, dtype=np.float64)
    cdef const double[::1] fh = np.ascontiguousarray(fhat, dtype=np.float64)
    cdef uint64_t sd = <uint64_t>(seed & MASK)
    cdef Py_ssize_t nrow = ba.shape[0]

    cdef vector[double] times
    cdef vector[int64_t] marks
    cdef vector[int64_t] gens
    cdef vector[double] rates
    cdef vector[pair[double, int64_t]] prev
    cdef vector[pair[double, int64_t]] new
    cdef int64_t p, i, m, x, k = 0, g
    cdef Py_ssize_t j, pidx
    cdef double u, v, w, t, a, total, s, span, fhx

    rates.resize(nrow if nrow > 0 else 1)

    with nogil:
        p = _poisson3(sd, 0, 0, T * eta_hat)
        for i in range(p):
            u = _u3(sd, 0, 0, 3 * i + 1)
            v = _u3(sd, 0, 0, 3 * i + 2)
            t = T * u
            a = eta_hat * v
            total = _row_rates_base(t, ba, bi, bd, rates.data())
            if a <= total:
                w = _u3(sd, 0, 0, 3 * i + 3)
                m = _pick_mark(w, total, rates.data(), nrow, rp, rm, rc)
                prev.push_back(pair[double, int64_t](t, <int64_t>times.size()))
                times.push_back(t)
                marks.push_back(m)
                gens.push_back(0)

        while prev.size() > 0 and k < K:
            sort(prev.begin(), prev.end())
            new.clear()
            g = k + 1
            for j in range(<Py_ssize_t>prev.size()):
                s = prev[j].first
                pidx = prev[j].second
                if s >= T:
                    continue
                x = marks[pidx]
                fhx = fh[x]
                span = T - s
                p = _poisson3(sd, <uint64_t>g, <uint64_t>j, span * fhx)
                for i in range(p):
                    u = _u3(sd, <uint64_t>g, <uint64_t>j, 3 * i + 1)
                    v = _u3(sd, <uint64_t>g, <uint64_t>j, 3 * i + 2)
                    t = s + span * u
                    if t > T:
                        t = T
                    if t <= s:
                        continue
                    a = fhx * v
                    total = _row_rates_exc(t - s, x, im, kd, p1, p2, rates.data())
                    if a <= total:
                        w = _u3(sd, <uint64_t>g, <uint64_t>j, 3 * i + 3)
                        m = _pick_mark(w, total, rates.data(), nrow, rp, rm, rc)
                        new.push_back(pair[double, int64_t](t, <int64_t>times.size()))
                        times.push_back(t)
                        marks.push_back(m)
                        gens.push_back(g)
            prev.swap(new)
            k += 1

    cdef Py_ssize_t n = times.size()
    out_t = np.empty(n, dtype=np.float64)
    out_m = np.empty(n, dtype=np.int64)
    out_g = np.empty(n, dtype=np.int64)
    cdef double[::1] ot = out_t
    cdef int64_t[::1] om = out_m
    cdef int64_t[::1] og = out_g
    for j in range(n):
        ot[j] = times[j]
        om[j] = marks[j]
        og[j] = gens[j]
    return out_t, out_m, out_g


def tabulated_compensator(b_alpha, b_init, b_decay, row_w, imp, kind, par1, par2,
                          ev_times, ev_marks, query):
    """Integrated intensity at each query time, rows weighted by ``row_w``."""
    cdef const double[::1] ba = np.ascontiguousarray(b_alpha, dtype=np.float64)
    cdef const double[::1] bi = np.ascontiguousarray(b_init, dtype=np.float64)
    cdef const double[::1] bd = np.ascontiguousarray(b_decay, dtype=np.float64)
    cdef const double[::1] rw = np.ascontiguousarray(row_w, dtype=np.float64)
    cdef const double[:, ::1] im = np.ascontiguousarray(imp, dtype=np.float64)
    cdef const int64_t[:, ::1] kd = np.ascontiguousarray(kind, dtype=np.int64)
    cdef const double[:, ::1] p1 = np.ascontiguousarray(par1, dtype=np.float64)
    cdef const double[:, ::1] p2 = np.ascontiguousarray(par2, dtype=np.float64)
    cdef const double[::1] et = np.ascontiguousarray(ev_times, dtype=np.float64)
    cdef const int64_t[::1] em = np.ascontiguousarray(ev_marks, dtype=np.int64)
    cdef const double[::1] qt = np.ascontiguousarray(np.atleast_1d(query), dtype=np.float64)
    out = np.zeros(qt.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t q, r, e, x
    cdef double t, acc, h, g, b, c, pw, om
    with nogil:
        for q in range(qt.shape[0]):
            t = qt[q]
            acc = 0.0
            for r in range(ba.shape[0]):
                if rw[r] == 0.0:
                    continue
                b = bd[r]
                if b > 0.0:
                    acc += rw[r] * (ba[r] * t + (bi[r] - ba[r]) * (-expm1(-b * t) / b))
                else:
                    acc += rw[r] * (ba[r] * t + (bi[r] - ba[r]) * t)
            for e in range(et.shape[0]):
                h = t - et[e]
                if h <= 0.0:
                    continue
                x = em[e]
                for r in range(im.shape[0]):
                    g = im[r, x]
                    if g == 0.0 or rw[r] == 0.0:
                        continue
                    if kd[r, x] == 0:
                        acc += rw[r] * g * (-expm1(-p1[r, x] * h) / p1[r, x])
                    else:
                        c = p1[r, x]
                        pw = p2[r, x]
                        om = 1.0 - pw
                        if fabs(om) < 1e-12:
                            acc += rw[r] * g * log1p(h / c)
                        else:
                            acc += rw[r] * g * ((pow(h + c, om) - pow(c, om)) / om)
            o[q] = acc
    return out


def markov_batch(alpha, beta, lam0, theta, double T, seeds):
    """Thinning simulation of the bivariate exponential Markov state."""
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[::1] be = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[::1] l00 = np.ascontiguousarray(lam0, dtype=np.float64)
    cdef double[:, ::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    seed_list = [int(s) & MASK for s in seeds]
    cdef uint64_t[::1] sd = np.array(seed_list, dtype=np.uint64)
    cdef Py_ssize_t npath = sd.shape[0], j
    cdef vector[int64_t] offsets
    cdef vector[double] times
    cdef vector[int64_t] chans
    cdef vector[double] pre
    cdef double l0, l1, l2, t, u, v, w, dt, bound, total, target
    cdef uint64_t it, s
    cdef int64_t ch
    offsets.push_back(0)
    with nogil:
        for j in range(npath):
            s = sd[j]
            l0 = l00[0]
            l1 = l00[1]
            l2 = l00[2]
            t = 0.0
            it = 0
            while True:
                bound = (l0 if l0 > al[0] else al[0]) + (l1 if l1 > al[1] else al[1]) \
                    + (l2 if l2 > al[2] else al[2])
                if bound <= 0.0:
                    break
                u = _u3(s, GMHP_MARKOV_TAG, 0, 3 * it)
                v = _u3(s, GMHP_MARKOV_TAG, 0, 3 * it + 1)
                w = _u3(s, GMHP_MARKOV_TAG, 0, 3 * it + 2)
                it += 1
                dt = -log(u) / bound
                t = t + dt
                if t > T:
                    break
                l0 = al[0] + (l0 - al[0]) * exp(-be[0] * dt)
                l1 = al[1] + (l1 - al[1]) * exp(-be[1] * dt)
                l2 = al[2] + (l2 - al[2]) * exp(-be[2] * dt)
                total = l0 + l1 + l2
                if v * bound <= total:
                    target = w * total
                    if target <= l0:
                        ch = 0
                    elif target <= l0 + l1:
                        ch = 1
                    else:
                        ch = 2
                    times.push_back(t)
                    chans.push_back(ch)
                    pre.push_back(l0)
                    pre.push_back(l1)
                    pre.push_back(l2)
                    l0 += th[0, ch]
                    l1 += th[1, ch]
                    l2 += th[2, ch]
            offsets.push_back(<int64_t>times.size())

    cdef Py_ssize_t n = times.size(), q
    out_off = np.empty(npath + 1, dtype=np.int64)
    out_t = np.empty(n, dtype=np.float64)
    out_c = np.empty(n, dtype=np.int64)
    out_p = np.empty((n, 3), dtype=np.float64)
    cdef int64_t[::1] oo = out_off
    cdef double[::1] ot = out_t
    cdef int64_t[::1] oc = out_c
    cdef double[:, ::1] op = out_p
    for q in range(npath + 1):
        oo[q] = offsets[q]
    for q in range(n):
        ot[q] = times[q]
        oc[q] = chans[q]
        op[q, 0] = pre[3 * q]
        op[q, 1] = pre[3 * q + 1]
        op[q, 2] = pre[3 * q + 2]
    return out_off, out_t, out_c, out_p
