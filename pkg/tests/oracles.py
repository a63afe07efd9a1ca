"""Independent reference computations for the tests.

Everything here is deliberately naive: full enumeration over the product
sample space, raw-moment algebra for the Gaussian covariances, dense
linear algebra, finite differences.  Nothing is shared with the package
internals, so the same mistake would have to be made twice, differently,
to slip through a comparison.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def all_configs(ms):
    """Every category assignment of a product of categoricals (1-based)."""
    return list(itertools.product(*(range(1, m + 1) for m in ms)))


def config_prob(rows, cfg) -> float:
    p = 1.0
    for row, j in zip(rows, cfg):
        p *= row[j - 1]
    return p


def flat_stats(ms, cfg) -> np.ndarray:
    """One-hot-without-last encoding, concatenated over variables."""
    out = []
    for m, j in zip(ms, cfg):
        one = [0.0] * (m - 1)
        if j < m:
            one[j - 1] = 1.0
        out.extend(one)
    return np.array(out)


def flat_theta(rows) -> np.ndarray:
    return np.concatenate([np.asarray(r, dtype=float)[:-1] for r in rows])


def random_rows(rng, ms, floor=0.02):
    """Random probability rows bounded away from the simplex boundary."""
    rows = []
    for m in ms:
        w = floor + rng.random(m)
        rows.append(w / w.sum())
    return rows


def random_f_table(rng, ms, lo=0.1, hi=1.1):
    return {c: float(rng.uniform(lo, hi)) for c in all_configs(ms)}


def enum_J(rows, f) -> float:
    ms = [len(r) for r in rows]
    return sum(config_prob(rows, c) * f[c] for c in all_configs(ms))


def enum_nat_grad(rows, f) -> np.ndarray:
    """E[f(c) (T(c) - theta)] by full enumeration."""
    ms = [len(r) for r in rows]
    theta = flat_theta(rows)
    g = np.zeros(theta.size)
    for c in all_configs(ms):
        g += config_prob(rows, c) * f[c] * (flat_stats(ms, c) - theta)
    return g


def enum_kl(rows_a, rows_b) -> float:
    """KL(a || b) over the full product space, no factorization shortcut."""
    ms = [len(r) for r in rows_a]
    kl = 0.0
    for c in all_configs(ms):
        pa = config_prob(rows_a, c)
        pb = config_prob(rows_b, c)
        kl += pa * np.log(pa / pb)
    return float(kl)


def enum_inv_fisher(rows) -> np.ndarray:
    """E[(T - theta)(T - theta)'] by enumeration: the categorical inverse
    Fisher matrix in expectation coordinates."""
    ms = [len(r) for r in rows]
    theta = flat_theta(rows)
    out = np.zeros((theta.size, theta.size))
    for c in all_configs(ms):
        d = flat_stats(ms, c) - theta
        out += config_prob(rows, c) * np.outer(d, d)
    return out


def gauss_inv_fisher(mu, var) -> np.ndarray:
    """Cov of (X, X^2) for X ~ N(mu, var), assembled from the raw moments
    E[X^r] rather than any precomputed covariance identity."""
    m1 = mu
    m2 = mu**2 + var
    m3 = mu**3 + 3.0 * mu * var
    m4 = mu**4 + 6.0 * mu**2 * var + 3.0 * var**2
    return np.array(
        [
            [m2 - m1 * m1, m3 - m1 * m2],
            [m3 - m1 * m2, m4 - m2 * m2],
        ]
    )


def dense_fisher(params, fisher_quadratic_norm) -> np.ndarray:
    """The metric as a dense matrix, recovered from the library's quadratic
    form by polarization: F_ij = (q(e_i+e_j)^2 - q(e_i-e_j)^2) / 4."""
    n = params.n_theta
    eye = np.eye(n)

    def q2(v):
        return fisher_quadratic_norm(params, v) ** 2

    out = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1):
            out[i, j] = out[j, i] = (q2(eye[i] + eye[j]) - q2(eye[i] - eye[j])) / 4.0
    return out


def dense_factor(params, sqrt_fisher_apply) -> np.ndarray:
    """The square-root factor as a dense matrix, one basis vector at a time."""
    n = params.n_theta
    return np.column_stack([sqrt_fisher_apply(params, e) for e in np.eye(n)])


def central_diff(f, x, h=1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of an ndarray."""
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.astype(float).copy()
        xm = x.astype(float).copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rank_utilities(f_values, direction) -> list:
    """Reference utility assignment via an explicit stable sort.

    Mirrors the ranking contract from first principles: sort sample indices
    by (key, index), hand +1 to the first ceil(n/4) and -1 to the last as
    many, all-zero when every value ties.
    """
    f = [float(v) for v in f_values]
    n = len(f)
    if len(set(f)) == 1:
        return [0] * n
    sign = -1.0 if direction == "maximize" else 1.0
    order = sorted(range(n), key=lambda i: (sign * f[i], i))
    quota = math.ceil(n / 4)
    u = [0] * n
    for i in order[:quota]:
        u[i] = 1
    for i in order[-quota:]:
        u[i] = -1
    return u
