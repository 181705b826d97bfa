"""Polynomial test functions on the state (lambda1, lambda2, lambdac, n1, n2).

The generator of the exponential model maps polynomials to polynomials, and
along an inter-event stretch each lambda is a constant plus one exponential.
So for polynomial test functions the Dynkin integral has a closed form.
"""
from __future__ import annotations

from math import comb

import numpy as np

NVARS = 5
VARS = ("lambda1", "lambda2", "lambdac", "n1", "n2")


class Poly:
    """Sparse polynomial: ``{exponent 5-tuple: coefficient}``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != NVARS or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent tuple {exps}")
            if c != 0:
                clean[exps] = clean.get(exps, 0.0) + float(c)
        self.terms = {k: v for k, v in clean.items() if v != 0}

    @classmethod
    def const(cls, c):
        return cls({(0,) * NVARS: c})

    @classmethod
    def var(cls, name):
        e = [0] * NVARS
        e[VARS.index(name)] = 1
        return cls({tuple(e): 1.0})

    def __add__(self, other):
        other = _lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0.0) + v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = []
        for k, v in sorted(self.terms.items()):
            mono = "*".join(f"{n}^{e}" if e > 1 else n for n, e in zip(VARS, k) if e)
            parts.append(f"{v:g}" + ("*" + mono if mono else ""))
        return "Poly(" + " + ".join(parts) + ")"

    @property
    def degree_lambda(self):
        return max((sum(k[:3]) for k in self.terms), default=0)

    def __call__(self, lam, n):
        """Evaluate at intensities ``lam`` (..., 3) and counts ``n`` (..., 2)."""
        lam = np.asarray(lam, dtype=float)
        n = np.asarray(n, dtype=float)
        z = np.concatenate([lam, n], axis=-1)
        out = np.zeros(z.shape[:-1])
        for k, v in self.terms.items():
            term = v
            for idx, e in enumerate(k):
                if e:
                    term = term * z[..., idx] ** e
            out = out + term
        return out if out.ndim else float(out)

    value = __call__

    def partial(self, idx):
        out = {}
        for k, v in self.terms.items():
            e = k[idx]
            if e:
                k2 = list(k)
                k2[idx] = e - 1
                out[tuple(k2)] = out.get(tuple(k2), 0.0) + v * e
        return Poly(out)

    def grad(self, lam, n):
        """Partials with respect to lambda1, lambda2, lambdac."""
        return np.stack([np.asarray(self.partial(i)(lam, n), dtype=float) for i in range(3)],
                        axis=-1)

    def shift(self, delta):
        """Substitute z -> z + delta (a 5-vector)."""
        out = Poly.const(0.0)
        for k, v in self.terms.items():
            term = Poly.const(v)
            for idx, e in enumerate(k):
                if not e:
                    continue
                c = float(delta[idx])
                factor = {}
                for j in range(e + 1):
                    exps = [0] * NVARS
                    exps[idx] = j
                    factor[tuple(exps)] = comb(e, j) * c ** (e - j)
                term = term * Poly(factor)
            out = out + term
        return out


def _lift(x):
    return x if isinstance(x, Poly) else Poly.const(x)


def lambda1():
    return Poly.var("lambda1")


def lambda2():
    return Poly.var("lambda2")


def lambdac():
    return Poly.var("lambdac")


def n1():
    return Poly.var("n1")


def n2():
    return Poly.var("n2")


def segment_integral(poly, lam_start, alpha, beta, n, h):
    """Integral over [0, h] of ``poly`` along the flow started at ``lam_start``.

    Vectorised over segments: ``lam_start`` (S, 3), ``n`` (S, 2), ``h`` (S,).
    Each lambda_i(u) = alpha_i + d_i exp(-beta_i u) with d = lam_start - alpha,
    so every monomial expands into a finite sum of exponentials.
    """
    lam_start = np.atleast_2d(np.asarray(lam_start, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    dev = lam_start - alpha
    total = np.zeros(h.shape[0])
    for k, v in poly.terms.items():
        npart = v * np.ones(h.shape[0])
        for idx in (3, 4):
            if k[idx]:
                npart = npart * n[:, idx - 3] ** k[idx]
        # expand prod_i (alpha_i + d_i e^{-beta_i u})^{a_i}
        pieces = [(np.ones(h.shape[0]), 0.0)]   # (coefficient, decay rate)
        for i in range(3):
            a = k[i]
            if not a:
                continue
            new = []
            for coef, rate in pieces:
                for j in range(a + 1):
                    c = comb(a, j) * alpha[i] ** (a - j) * dev[:, i] ** j
                    new.append((coef * c, rate + j * beta[i]))
            pieces = new
        seg = np.zeros(h.shape[0])
        for coef, rate in pieces:
            if rate == 0.0:
                seg = seg + coef * h
            else:
                seg = seg + coef * (-np.expm1(-rate * h) / rate)
        total = total + npart * seg
    return total
