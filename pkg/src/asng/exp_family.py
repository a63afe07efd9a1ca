"""Exponential families in expectation parameterization over mixed domains.

A parameter point is a product of independent factors: categorical variables
(one probability row per variable) and Gaussian variables (per-variable mean
and second moment, used for integer or real decision variables).  The flat
parameter vector interleaves, in declaration order, the first ``m_i - 1``
probabilities of each categorical variable and ``(mu_i, second_moment_i)`` of
each Gaussian variable.  In this parameterization the log-likelihood gradient
with the inverse Fisher metric applied (the natural gradient direction of a
single sample) is simply ``T(c) - theta``, where ``T`` is the sufficient
statistic using the same layout.

The Fisher matrix is block diagonal.  For a categorical variable with free
probabilities ``p_1..p_{m-1}`` and last probability ``p_m``::

    F = diag(p)^-1 + (1/p_m) 11^T
    v' F v = sum_j v_j^2 / p_j + (sum_j v_j)^2 / p_m

with a lower triangular-free factorization ``A A^T = F`` that applies in
O(m) time::

    A v = diag(p)^{-1/2} v + (sqrt(p_m) + p_m)^{-1} (sqrt(p) . v) 1

For a Gaussian variable with mean ``mu`` and variance ``s2``::

    F = (1/s2^2) [[2 mu^2 + s2, -mu], [-mu, 1/2]]

whose symmetric square root comes from the closed-form 2x2 eigendecomposition.

Feasible sets are boxes: categorical probabilities are kept at or above a
per-variable floor ``theta_min`` (default ``1/(n_cat (m_i - 1))`` where
``n_cat`` counts the categorical variables in the shape), which implicitly
caps every probability at ``1 - 1/n_cat``; Gaussian means are clipped to the
declared range and the second moment to ``[mu^2 + sigma_min^2,
mu^2 + sigma_max^2]`` with ``sigma_max = (hi - lo)/2``.  ``project`` restores
a point to this set after an additive update and is exactly idempotent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ShapeError",
    "SingularMetricError",
    "Categorical",
    "Integer",
    "Real",
    "MixedValue",
    "CategoricalBlock",
    "GaussianBlock",
    "ProductParams",
    "shape_from_text",
    "shape_to_text",
    "init_max_entropy",
    "sample",
    "sample_batch",
    "sufficient_statistics",
    "flatten",
    "score",
    "fisher_quadratic_norm",
    "sqrt_fisher_apply",
    "add_flat",
    "project",
    "most_likely",
    "clip_and_round",
]

# Row sums may drift by accumulated rounding; anything inside this band is
# treated as exactly on the simplex (and left untouched by project()).
_SUM_TOL = 1e-12


class ShapeError(ValueError):
    """Inconsistent variable declaration, or a value that does not fit one."""


class SingularMetricError(ValueError):
    """Fisher-metric operation on a degenerate distribution."""


# ---------------------------------------------------------------------------
# variable declarations


@dataclass(frozen=True)
class Categorical:
    """Categorical variable with categories numbered ``1..m``.

    ``theta_min`` overrides the default probability floor; ``0.0`` disables
    bounding for this variable entirely.
    """

    m: int
    theta_min: float | None = None


@dataclass(frozen=True)
class Integer:
    """Integer-valued variable relaxed to a Gaussian over ``[lo, hi]``."""

    lo: float
    hi: float
    sigma_min: float = 0.25


@dataclass(frozen=True)
class Real:
    """Real-valued variable as a Gaussian over ``[lo, hi]``.

    The standard-deviation floor has no natural scale for reals, so it must
    be supplied explicitly.
    """

    lo: float
    hi: float
    sigma_min: float


VariableSpec = Union[Categorical, Integer, Real]
Shape = Sequence[VariableSpec]


def shape_from_text(text: str) -> tuple[VariableSpec, ...]:
    """Parse a plain-text shape declaration, one variable per line.

    Lines look like ``cat 5``, ``cat 5 min=0.02``, ``int 64 256``,
    ``int 1 3 sigma_min=0.5`` or ``real -1 1 sigma_min=0.05``.  Blank lines
    and ``#`` comments are ignored.  Declaration order is significant.
    """
    out: list[VariableSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        positional = [a for a in args if "=" not in a]
        options = dict(a.split("=", 1) for a in args if "=" in a)
        try:
            if kind == "cat":
                (m,) = positional
                tmin = options.pop("min", None)
                spec: VariableSpec = Categorical(
                    int(m), None if tmin is None else float(tmin)
                )
            elif kind == "int":
                lo, hi = positional
                spec = Integer(
                    float(lo), float(hi), float(options.pop("sigma_min", 0.25))
                )
            elif kind == "real":
                lo, hi = positional
                spec = Real(float(lo), float(hi), float(options.pop("sigma_min")))
            else:
                raise ShapeError(f"line {lineno}: unknown variable kind {kind!r}")
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ShapeError):
                raise
            raise ShapeError(f"line {lineno}: cannot parse {line!r}: {exc}") from exc
        if options:
            raise ShapeError(f"line {lineno}: unknown options {sorted(options)}")
        out.append(spec)
    if not out:
        raise ShapeError("shape declaration is empty")
    return tuple(out)


def shape_to_text(shape: Shape) -> str:
    """Inverse of :func:`shape_from_text`."""
    lines = []
    for spec in shape:
        if isinstance(spec, Categorical):
            line = f"cat {spec.m}"
            if spec.theta_min is not None:
                line += f" min={spec.theta_min!r}"
        elif isinstance(spec, Integer):
            line = f"int {spec.lo!r} {spec.hi!r}"
            if spec.sigma_min != 0.25:
                line += f" sigma_min={spec.sigma_min!r}"
        elif isinstance(spec, Real):
            line = f"real {spec.lo!r} {spec.hi!r} sigma_min={spec.sigma_min!r}"
        else:
            raise ShapeError(f"not a variable declaration: {spec!r}")
        lines.append(line)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class MixedValue:
    """One configuration: 1-based category indices plus continuous values.

    ``categories[i]`` is the category of the i-th categorical variable in
    declaration order, in ``1..m_i`` (index ``m_i`` maps to the all-zero
    one-hot prefix).  ``reals[i]`` is the raw (unclipped) value of the i-th
    Gaussian variable.
    """

    categories: np.ndarray
    reals: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "categories", np.atleast_1d(np.asarray(self.categories, dtype=np.int64))
        )
        object.__setattr__(
            self, "reals", np.atleast_1d(np.asarray(self.reals, dtype=np.float64))
        )


def _new_mixed_value(categories: np.ndarray, reals: np.ndarray) -> MixedValue:
    # internal fast path for freshly sampled, correctly typed arrays
    value = object.__new__(MixedValue)
    object.__setattr__(value, "categories", categories)
    object.__setattr__(value, "reals", reals)
    return value


def _as_float_array(x, n, name) -> np.ndarray:
    arr = np.full(n, float(x), dtype=np.float64) if np.isscalar(x) else np.asarray(
        x, dtype=np.float64
    ).copy()
    if arr.shape != (n,):
        raise ShapeError(f"{name} must be a scalar or a length-{n} vector")
    return arr


class CategoricalBlock:
    """Probability table for a run of categorical variables.

    Rows are stored padded to the longest row; padding entries are exactly
    zero and never touched by any operation.  Rows may violate bounds after
    an additive update (that is what :func:`project` is for) but must stay
    finite.
    """

    __slots__ = (
        "probs",
        "m",
        "theta_min",
        "n_vars",
        "m_max",
        "width",
        "_valid",
        "_free",
        "_rows",
        "_last_col",
        "_min_valid_prob",
        "_max_sum_err",
        "_cum",
    )

    def __init__(self, probs, m, theta_min):
        m = np.asarray(m, dtype=np.int64)
        if m.ndim != 1 or m.size == 0:
            raise ShapeError("m must be a non-empty vector of category counts")
        if np.any(m < 2):
            raise ShapeError("every categorical variable needs at least 2 categories")
        n = m.size
        m_max = int(m.max())
        probs = np.asarray(probs, dtype=np.float64).copy()
        if probs.shape != (n, m_max):
            raise ShapeError(f"probability table must have shape {(n, m_max)}")
        if not np.all(np.isfinite(probs)):
            raise ShapeError("probability table must be finite")
        theta_min = _as_float_array(theta_min, n, "theta_min")
        if np.any(theta_min < 0.0):
            raise ShapeError("theta_min must be nonnegative")
        # m*theta_min > 1 leaves no room for a probability row; this happens
        # for the default floor whenever the shape has a single categorical
        # variable, in which case the caller must pass an explicit bound.
        if np.any(m * theta_min > 1.0):
            bad = int(np.argmax(m * theta_min > 1.0))
            raise ShapeError(
                f"infeasible theta_min for variable {bad}: "
                f"{m[bad]} * {theta_min[bad]} > 1; pass an explicit theta_min"
            )
        valid = np.arange(m_max)[None, :] < m[:, None]
        if np.any(probs[~valid] != 0.0):
            raise ShapeError("padding entries of the probability table must be 0")
        self.probs = probs
        self.m = m
        self.theta_min = theta_min
        self.n_vars = n
        self.m_max = m_max
        self.width = int((m - 1).sum())
        self._valid = valid
        self._free = np.arange(m_max - 1)[None, :] < (m - 1)[:, None]
        self._rows = np.arange(n)
        self._last_col = m - 1
        self._min_valid_prob = float(probs[valid].min())
        self._max_sum_err = float(np.abs(probs.sum(axis=1) - 1.0).max())
        self._cum = None  # memoized row cumsums for sampling
        probs.flags.writeable = False

    def _with_probs(self, probs: np.ndarray) -> "CategoricalBlock":
        # fast clone for per-iteration updates: the table shape, floors and
        # masks are invariant, only the probabilities and their summary
        # statistics change; `probs` must be a fresh finite array
        new = object.__new__(CategoricalBlock)
        new.probs = probs
        new.m = self.m
        new.theta_min = self.theta_min
        new.n_vars = self.n_vars
        new.m_max = self.m_max
        new.width = self.width
        new._valid = self._valid
        new._free = self._free
        new._rows = self._rows
        new._last_col = self._last_col
        new._min_valid_prob = float(probs[self._valid].min())
        new._max_sum_err = float(np.abs(probs.sum(axis=1) - 1.0).max())
        new._cum = None
        probs.flags.writeable = False
        return new

    @classmethod
    def from_rows(cls, rows, theta_min) -> "CategoricalBlock":
        """Build from a list of per-variable probability rows."""
        m = np.array([len(r) for r in rows], dtype=np.int64)
        table = np.zeros((len(rows), int(m.max())))
        for i, r in enumerate(rows):
            table[i, : m[i]] = r
        return cls(table, m, theta_min)

    def row(self, i: int) -> np.ndarray:
        """The (unpadded) probability row of variable ``i``."""
        return self.probs[i, : self.m[i]].copy()

    # -- layout -------------------------------------------------------------

    def _gather_free(self) -> np.ndarray:
        return self.probs[:, : self.m_max - 1][self._free]

    def _scatter_free(self, flat: np.ndarray) -> np.ndarray:
        buf = np.zeros((self.n_vars, self.m_max - 1))
        buf[self._free] = flat
        return buf

    def _check_valid_rows(self):
        if self._max_sum_err > 1e-9 or self._min_valid_prob < 0.0:
            raise ShapeError(
                "probability rows are not normalized; project() the parameters first"
            )

    def _check_metric(self):
        if self._min_valid_prob <= 0.0:
            raise SingularMetricError(
                "zero or negative category probability; the Fisher metric is singular"
            )

    # -- operations ----------------------------------------------------------

    def sample_cats(self, rng: np.random.Generator, n_draws: int) -> np.ndarray:
        """``(n_draws, n_vars)`` matrix of 1-based category indices."""
        self._check_valid_rows()
        if self._cum is None:
            self._cum = self.probs.cumsum(axis=1)
        u = rng.random((n_draws, self.n_vars))
        counts = (u[:, :, None] >= self._cum[None, :, :]).sum(axis=2)
        return np.minimum(counts, self.m[None, :] - 1) + 1

    def suff_stats(self, cats: np.ndarray) -> np.ndarray:
        buf = np.zeros((self.n_vars, self.m_max - 1))
        j0 = cats - 1
        sel = j0 < self.m - 1
        buf[np.flatnonzero(sel), j0[sel]] = 1.0
        return buf[self._free]

    def score(self, cats: np.ndarray) -> np.ndarray:
        buf = np.zeros((self.n_vars, self.m_max - 1))
        j0 = cats - 1
        sel = j0 < self.m - 1
        buf[np.flatnonzero(sel), j0[sel]] = 1.0
        buf = np.where(self._free, buf - self.probs[:, : self.m_max - 1], 0.0)
        return buf[self._free]

    def fisher_quadratic(self, flat_v: np.ndarray) -> float:
        self._check_metric()
        v = self._scatter_free(flat_v)
        p_free = np.where(self._free, self.probs[:, : self.m_max - 1], 1.0)
        p_last = self.probs[self._rows, self._last_col]
        row_sum = v.sum(axis=1)
        return float((v * v / p_free).sum() + (row_sum * row_sum / p_last).sum())

    def sqrt_fisher_apply(self, flat_v: np.ndarray) -> np.ndarray:
        self._check_metric()
        v = self._scatter_free(flat_v)
        p_free = np.where(self._free, self.probs[:, : self.m_max - 1], 1.0)
        sqrt_free = np.where(self._free, np.sqrt(p_free), 0.0)
        p_last = self.probs[self._rows, self._last_col]
        # rank-one term sqrt(theta) * sum(v): the factor is applied so that
        # |A v|^2 = v' F v holds exactly, which the trail update relies on
        coef = v.sum(axis=1) / (np.sqrt(p_last) + p_last)
        out = np.where(self._free, v / np.sqrt(p_free) + coef[:, None] * sqrt_free, 0.0)
        return out[self._free]

    def add_flat(self, flat_delta: np.ndarray) -> "CategoricalBlock":
        d = self._scatter_free(flat_delta)
        probs = self.probs.copy()
        probs[:, : self.m_max - 1] += d
        # the last entry absorbs the negated sum, keeping each row on the
        # affine hyperplane sum(row) = sum(old row)
        probs[self._rows, self._last_col] -= d.sum(axis=1)
        return self._with_probs(probs)

    def project(self) -> "CategoricalBlock":
        tmin = self.theta_min[:, None]
        in_bounds = ((self.probs >= tmin) | ~self._valid).all(axis=1)
        on_simplex = np.abs(self.probs.sum(axis=1) - 1.0) <= _SUM_TOL
        ok = in_bounds & on_simplex
        if ok.all():
            return self
        clipped = np.where(self._valid, np.maximum(self.probs, tmin), 0.0)
        mass = self.m * self.theta_min
        den = (clipped - np.where(self._valid, tmin, 0.0)).sum(axis=1)
        degenerate = den <= 0.0
        scale = np.where(degenerate, 0.0, (1.0 - mass) / np.where(den > 0.0, den, 1.0))
        # theta_min + nonneg*nonneg keeps the floor exact in floating point
        fixed = np.where(self._valid, tmin + scale[:, None] * (clipped - tmin), 0.0)
        if degenerate.any():
            uniform = np.where(self._valid, 1.0 / self.m[:, None], 0.0)
            fixed = np.where(degenerate[:, None], uniform, fixed)
            for i in np.flatnonzero(degenerate & ~ok):
                logger.warning(
                    "projection: every probability of variable %d is at or below "
                    "its floor; resetting the row to uniform", i
                )
        new_probs = np.where(ok[:, None], self.probs, fixed)
        return self._with_probs(new_probs)

    def most_likely_cats(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1) + 1

    def entropy_proxy(self) -> np.ndarray:
        """Per-variable maximum probability (1.0 = fully concentrated)."""
        return self.probs.max(axis=1)


class GaussianBlock:
    """Mean and second moment for a run of Gaussian (integer/real) variables."""

    __slots__ = (
        "mu",
        "second_moment",
        "lo",
        "hi",
        "sigma_min",
        "sigma_max",
        "is_integer",
        "n_vars",
        "width",
        "_min_var",
    )

    def __init__(self, mu, second_moment, lo, hi, sigma_min, is_integer):
        mu = np.asarray(mu, dtype=np.float64).copy()
        n = mu.size
        if mu.ndim != 1 or n == 0:
            raise ShapeError("mu must be a non-empty vector")
        second_moment = _as_float_array(second_moment, n, "second_moment")
        lo = _as_float_array(lo, n, "lo")
        hi = _as_float_array(hi, n, "hi")
        sigma_min = _as_float_array(sigma_min, n, "sigma_min")
        is_integer = np.asarray(is_integer, dtype=bool).copy()
        if is_integer.shape != (n,):
            raise ShapeError(f"is_integer must be a length-{n} boolean vector")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(second_moment))):
            raise ShapeError("mu and second_moment must be finite")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ShapeError("variable ranges must be finite with lo < hi")
        if np.any(sigma_min <= 0.0):
            raise ShapeError("sigma_min must be positive")
        sigma_max = (hi - lo) / 2.0
        if np.any(sigma_min > sigma_max):
            raise ShapeError("sigma_min exceeds (hi - lo)/2 for some variable")
        self.mu = mu
        self.second_moment = second_moment
        self.lo = lo
        self.hi = hi
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.is_integer = is_integer
        self.n_vars = n
        self.width = 2 * n
        self._min_var = float((second_moment - mu * mu).min())
        for arr in (mu, second_moment, lo, hi, sigma_min, sigma_max, is_integer):
            arr.flags.writeable = False

    def _with_moments(self, mu: np.ndarray, second_moment: np.ndarray) -> "GaussianBlock":
        # fast clone for per-iteration updates; ranges and flags are shared,
        # `mu` and `second_moment` must be fresh finite arrays
        new = object.__new__(GaussianBlock)
        new.mu = mu
        new.second_moment = second_moment
        new.lo = self.lo
        new.hi = self.hi
        new.sigma_min = self.sigma_min
        new.sigma_max = self.sigma_max
        new.is_integer = self.is_integer
        new.n_vars = self.n_vars
        new.width = self.width
        new._min_var = float((second_moment - mu * mu).min())
        mu.flags.writeable = False
        second_moment.flags.writeable = False
        return new

    def variances(self) -> np.ndarray:
        return self.second_moment - self.mu * self.mu

    def _check_metric(self):
        if self._min_var <= 0.0:
            raise SingularMetricError(
                "nonpositive variance; the Fisher metric is singular"
            )

    def flatten(self) -> np.ndarray:
        return np.column_stack([self.mu, self.second_moment]).ravel()

    def sample_reals(self, rng: np.random.Generator, n_draws: int) -> np.ndarray:
        self._check_metric()
        sigma = np.sqrt(self.variances())
        return rng.normal(self.mu, sigma, size=(n_draws, self.n_vars))

    def suff_stats(self, reals: np.ndarray) -> np.ndarray:
        return np.column_stack([reals, reals * reals]).ravel()

    def score(self, reals: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [reals - self.mu, reals * reals - self.second_moment]
        ).ravel()

    def _fisher_entries(self):
        var = self.variances()
        var2 = var * var
        f11 = (2.0 * self.mu * self.mu + var) / var2
        f12 = -self.mu / var2
        f22 = 0.5 / var2
        return f11, f12, f22

    def fisher_quadratic(self, flat_v: np.ndarray) -> float:
        self._check_metric()
        v1, v2 = flat_v[0::2], flat_v[1::2]
        f11, f12, f22 = self._fisher_entries()
        return float((f11 * v1 * v1 + 2.0 * f12 * v1 * v2 + f22 * v2 * v2).sum())

    def sqrt_fisher_apply(self, flat_v: np.ndarray) -> np.ndarray:
        self._check_metric()
        v1, v2 = flat_v[0::2], flat_v[1::2]
        f11, f12, f22 = self._fisher_entries()
        var = self.variances()
        # closed-form symmetric square root of a 2x2 SPD matrix: with
        # s = sqrt(det F) and u = sqrt(tr F + 2 s), sqrt(F) = (F + s I)/u
        s = np.sqrt(0.5 / (var * var * var))
        u = np.sqrt(f11 + f22 + 2.0 * s)
        out1 = ((f11 + s) * v1 + f12 * v2) / u
        out2 = (f12 * v1 + (f22 + s) * v2) / u
        return np.column_stack([out1, out2]).ravel()

    def add_flat(self, flat_delta: np.ndarray) -> "GaussianBlock":
        return self._with_moments(
            self.mu + flat_delta[0::2], self.second_moment + flat_delta[1::2]
        )

    def project(self) -> "GaussianBlock":
        mu = np.clip(self.mu, self.lo, self.hi)
        floor = mu * mu + self.sigma_min * self.sigma_min
        ceil = mu * mu + self.sigma_max * self.sigma_max
        m2 = np.clip(self.second_moment, floor, ceil)
        if np.array_equal(mu, self.mu) and np.array_equal(m2, self.second_moment):
            return self
        return self._with_moments(mu, m2)

    def most_likely_reals(self) -> np.ndarray:
        return _round_integers(np.clip(self.mu, self.lo, self.hi), self.is_integer)


def _round_integers(values: np.ndarray, is_integer: np.ndarray) -> np.ndarray:
    # round half away from zero (numpy's round() would go half to even)
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.where(is_integer, rounded, values)


Block = Union[CategoricalBlock, GaussianBlock]


class ProductParams:
    """Product distribution over the mixed domain, one factor per block.

    Immutable.  ``n_theta`` is the flat parameter dimension; the flat layout
    concatenates the blocks in order.
    """

    __slots__ = ("blocks", "n_theta", "n_categorical", "n_gaussian", "_layout")

    def __init__(self, blocks: Sequence[Block]):
        blocks = tuple(blocks)
        if not blocks:
            raise ShapeError("a parameter point needs at least one block")
        layout = []  # (block, flat slice, value slice)
        flat_at = cat_at = real_at = 0
        for b in blocks:
            if isinstance(b, CategoricalBlock):
                val = slice(cat_at, cat_at + b.n_vars)
                cat_at += b.n_vars
            elif isinstance(b, GaussianBlock):
                val = slice(real_at, real_at + b.n_vars)
                real_at += b.n_vars
            else:
                raise ShapeError(f"not a parameter block: {b!r}")
            layout.append((b, slice(flat_at, flat_at + b.width), val))
            flat_at += b.width
        self.blocks = blocks
        self.n_theta = flat_at
        self.n_categorical = cat_at
        self.n_gaussian = real_at
        self._layout = tuple(layout)

    def _map_blocks(self, fn) -> "ProductParams":
        new = tuple(fn(b) for b in self.blocks)
        if all(nb is b for nb, b in zip(new, self.blocks)):
            return self
        # blocks keep their shapes under add_flat/project, so the layout
        # slices carry over unchanged
        out = object.__new__(ProductParams)
        out.blocks = new
        out.n_theta = self.n_theta
        out.n_categorical = self.n_categorical
        out.n_gaussian = self.n_gaussian
        out._layout = tuple(
            (b, flat, val) for b, (_, flat, val) in zip(new, self._layout)
        )
        return out

    def categorical_rows(self) -> list[np.ndarray]:
        """All categorical probability rows, in declaration order."""
        rows: list[np.ndarray] = []
        for b in self.blocks:
            if isinstance(b, CategoricalBlock):
                rows.extend(b.row(i) for i in range(b.n_vars))
        return rows


def _compile_shape(shape: Shape) -> ProductParams:
    specs = tuple(shape)
    if not specs:
        raise ShapeError("shape declaration is empty")
    n_cat = sum(isinstance(s, Categorical) for s in specs)
    blocks: list[Block] = []
    i = 0
    while i < len(specs):
        j = i
        if isinstance(specs[i], Categorical):
            while j < len(specs) and isinstance(specs[j], Categorical):
                j += 1
            group = specs[i:j]
            m = np.array([s.m for s in group], dtype=np.int64)
            if np.any(m < 2):
                raise ShapeError("every categorical variable needs at least 2 categories")
            tmin = np.array(
                [
                    s.theta_min
                    if s.theta_min is not None
                    else 1.0 / (n_cat * (s.m - 1))
                    for s in group
                ]
            )
            table = np.zeros((len(group), int(m.max())))
            for r, mi in enumerate(m):
                table[r, :mi] = 1.0 / mi
            blocks.append(CategoricalBlock(table, m, tmin))
        else:
            while j < len(specs) and isinstance(specs[j], (Integer, Real)):
                j += 1
            group = specs[i:j]
            lo = np.array([s.lo for s in group], dtype=np.float64)
            hi = np.array([s.hi for s in group], dtype=np.float64)
            sigma_min = np.array([s.sigma_min for s in group], dtype=np.float64)
            is_int = np.array([isinstance(s, Integer) for s in group])
            mu = (lo + hi) / 2.0
            sigma_max = (hi - lo) / 2.0
            blocks.append(
                GaussianBlock(mu, mu * mu + sigma_max * sigma_max, lo, hi, sigma_min, is_int)
            )
        i = j
    return ProductParams(blocks)


def init_max_entropy(shape: Shape) -> ProductParams:
    """Maximum-entropy initialization: uniform rows; Gaussians at the range
    midpoint with the widest allowed standard deviation ``(hi - lo)/2``."""
    return _compile_shape(shape)


def _as_params(shape_or_params) -> ProductParams:
    if isinstance(shape_or_params, ProductParams):
        return shape_or_params
    return _compile_shape(shape_or_params)


def sample_batch(params: ProductParams, rng: np.random.Generator, n: int) -> list[MixedValue]:
    """Draw ``n`` independent configurations from ``params``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    cats = np.empty((n, params.n_categorical), dtype=np.int64)
    reals = np.empty((n, params.n_gaussian))
    for block, _, val in params._layout:
        if isinstance(block, CategoricalBlock):
            cats[:, val] = block.sample_cats(rng, n)
        else:
            reals[:, val] = block.sample_reals(rng, n)
    return [_new_mixed_value(cats[i], reals[i]) for i in range(n)]


def sample(params: ProductParams, rng: np.random.Generator) -> MixedValue:
    """Draw one configuration from ``params``."""
    return sample_batch(params, rng, 1)[0]


def _check_value(params: ProductParams, value: MixedValue):
    if value.categories.shape != (params.n_categorical,):
        raise ShapeError(
            f"value has {value.categories.size} category entries, "
            f"expected {params.n_categorical}"
        )
    if value.reals.shape != (params.n_gaussian,):
        raise ShapeError(
            f"value has {value.reals.size} continuous entries, "
            f"expected {params.n_gaussian}"
        )
    for block, _, val in params._layout:
        if isinstance(block, CategoricalBlock):
            c = value.categories[val]
            if np.any(c < 1) or np.any(c > block.m):
                raise ShapeError("category index out of range")


def _suff_stats_trusted(params: ProductParams, value: MixedValue) -> np.ndarray:
    # estimator-internal path; callers guarantee the value fits the layout
    out = np.empty(params.n_theta)
    for block, flat, val in params._layout:
        if isinstance(block, CategoricalBlock):
            out[flat] = block.suff_stats(value.categories[val])
        else:
            out[flat] = block.suff_stats(value.reals[val])
    return out


def sufficient_statistics(shape_or_params, value: MixedValue) -> np.ndarray:
    """Sufficient statistic ``T(c)`` in the flat layout.

    Per categorical variable: the one-hot encoding without its last element.
    Per Gaussian variable: ``(c, c^2)``.
    """
    params = _as_params(shape_or_params)
    _check_value(params, value)
    return _suff_stats_trusted(params, value)


def flatten(params: ProductParams) -> np.ndarray:
    """The flat parameter vector (same layout as the sufficient statistic)."""
    out = np.empty(params.n_theta)
    for block, flat, _ in params._layout:
        if isinstance(block, CategoricalBlock):
            out[flat] = block._gather_free()
        else:
            out[flat] = block.flatten()
    return out


def score(params: ProductParams, value: MixedValue) -> np.ndarray:
    """Natural-gradient direction of one sample's log-likelihood: ``T(c) - theta``."""
    _check_value(params, value)
    out = np.empty(params.n_theta)
    for block, flat, val in params._layout:
        if isinstance(block, CategoricalBlock):
            out[flat] = block.score(value.categories[val])
        else:
            out[flat] = block.score(value.reals[val])
    return out


def fisher_quadratic_norm(params: ProductParams, v: np.ndarray) -> float:
    """``sqrt(v' F(theta) v)`` evaluated blockwise in closed form."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.n_theta,):
        raise ShapeError(f"vector must have length {params.n_theta}")
    q = 0.0
    for block, flat, _ in params._layout:
        q += block.fisher_quadratic(v[flat])
    return float(np.sqrt(q))


def sqrt_fisher_apply(params: ProductParams, v: np.ndarray) -> np.ndarray:
    """Apply a square-root factor of the Fisher metric to ``v`` in O(n_theta).

    The applied operator ``A`` satisfies ``A'A = F(theta)``, hence
    ``|A v|_2 = sqrt(v' F v)`` exactly; that identity is what the adaptive
    step-size trail depends on.  Categorical blocks use the diagonal plus
    rank-one factor; Gaussian blocks the exact symmetric 2x2 square root.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.n_theta,):
        raise ShapeError(f"vector must have length {params.n_theta}")
    out = np.empty(params.n_theta)
    for block, flat, _ in params._layout:
        out[flat] = block.sqrt_fisher_apply(v[flat])
    return out


def add_flat(params: ProductParams, delta: np.ndarray) -> ProductParams:
    """Additive update in flat coordinates (no projection applied).

    Categorical rows keep their total mass: the last probability absorbs the
    negated sum of its row's free increments.  The result may violate bounds;
    follow with :func:`project` before sampling.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (params.n_theta,):
        raise ShapeError(f"update vector must have length {params.n_theta}")
    if not np.all(np.isfinite(delta)):
        raise ValueError("update vector must be finite")
    blocks = []
    for block, flat, _ in params._layout:
        blocks.append(block.add_flat(delta[flat]))
    return ProductParams(blocks)


def project(params: ProductParams) -> ProductParams:
    """Restore parameters to the feasible set; exactly idempotent.

    Categorical rows already within bounds are returned bit-identical.
    Out-of-bounds rows are clipped up to their floor and linearly rescaled
    back onto the simplex, which lands every entry in
    ``[theta_min, 1 - (m-1) theta_min]``.  Gaussian means are clipped to
    their range, then second moments to the variance box around the clipped
    mean.
    """
    return params._map_blocks(lambda b: b.project())


def most_likely(params: ProductParams) -> MixedValue:
    """Mode-style representative: per-variable argmax category (ties to the
    lowest index) and range-clipped mean, rounded for integer variables."""
    cats = np.empty(params.n_categorical, dtype=np.int64)
    reals = np.empty(params.n_gaussian)
    for block, _, val in params._layout:
        if isinstance(block, CategoricalBlock):
            cats[val] = block.most_likely_cats()
        else:
            reals[val] = block.most_likely_reals()
    return MixedValue(cats, reals)


def clip_and_round(shape_or_params, value: MixedValue) -> MixedValue:
    """Clip continuous entries into their ranges and round integer variables.

    Category indices pass through unchanged.  Use this to turn a raw sampled
    value into one an objective can evaluate; the raw value is what belongs
    in sufficient statistics.
    """
    params = _as_params(shape_or_params)
    _check_value(params, value)
    reals = value.reals.copy()
    for block, _, val in params._layout:
        if isinstance(block, GaussianBlock):
            clipped = np.clip(value.reals[val], block.lo, block.hi)
            reals[val] = _round_integers(clipped, block.is_integer)
    return MixedValue(value.categories, reals)
