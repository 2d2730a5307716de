"""Sparse multivariate polynomials with exact coefficient arithmetic.

A polynomial is stored as a mapping from exponent tuples to coefficients;
a :class:`PolynomialMap` is a vector of such polynomials sharing one
variable set. Jacobians, products and compositions are carried out on the
coefficients directly, so the symbolic lifting path introduces no sampling
or differencing error: matrices derived from polynomial dynamics are exact
up to floating-point arithmetic on the coefficients themselves.

Terms are kept in graded order (total degree, then reverse-lexicographic
exponents) so evaluation order, serialisation and reported residuals are
deterministic.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DimensionError

Exponents = Tuple[int, ...]
TermDict = Dict[Exponents, float]


def _term_order_key(exponents: Exponents):
    # graded order: by total degree, then x1-major (reverse lexicographic)
    return (sum(exponents), tuple(-e for e in exponents))


def _canonical_exponents(exponents: Iterable[int]) -> Exponents:
    exps = tuple(int(e) for e in exponents)
    if any(e < 0 for e in exps):
        raise ValueError(f"monomial exponents must be non-negative, got {exps}")
    return exps


class Monomial:
    """A single monomial ``prod_i x_i**e_i`` identified by its exponents."""

    __slots__ = ("exponents",)

    def __init__(self, exponents: Iterable[int]):
        self.exponents = _canonical_exponents(exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def n_vars(self) -> int:
        return len(self.exponents)

    def evaluate(self, x: Sequence[float]) -> float:
        if len(x) != len(self.exponents):
            raise DimensionError(
                f"monomial over {len(self.exponents)} variables evaluated at "
                f"point of length {len(x)}"
            )
        value = 1.0
        for xi, e in zip(x, self.exponents):
            if e:
                value *= float(xi) ** e
        return value

    def __call__(self, x):
        return self.evaluate(x)

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.exponents == other.exponents

    def __hash__(self):
        return hash(self.exponents)

    def __repr__(self):
        return f"Monomial({self.exponents})"

    def __str__(self):
        if not any(self.exponents):
            return "1"
        parts = []
        for i, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        return "*".join(parts)


def _add_term(terms: TermDict, exponents: Exponents, coeff: float) -> None:
    if coeff == 0.0:
        return
    new = terms.get(exponents, 0.0) + coeff
    if new == 0.0:
        terms.pop(exponents, None)
    else:
        terms[exponents] = new


def _sorted_terms(terms: TermDict) -> TermDict:
    return {k: terms[k] for k in sorted(terms, key=_term_order_key)}


def poly_add(a: TermDict, b: TermDict) -> TermDict:
    out = dict(a)
    for exps, c in b.items():
        _add_term(out, exps, c)
    return _sorted_terms(out)


def poly_scale(a: TermDict, s: float) -> TermDict:
    if s == 0.0:
        return {}
    return {exps: c * s for exps, c in a.items()}


def poly_mul(a: TermDict, b: TermDict) -> TermDict:
    out: TermDict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            exps = tuple(i + j for i, j in zip(ea, eb))
            _add_term(out, exps, ca * cb)
    return _sorted_terms(out)


def poly_pow(base: TermDict, k: int, cache: List[TermDict]) -> TermDict:
    """k-th power by repeated multiplication, memoised in ``cache``.

    ``cache[j]`` holds base**j and must be seeded with the degree-0 constant;
    the list is extended as needed so repeated compositions against the same
    base reuse earlier powers.
    """
    if k < 0:
        raise ValueError("negative polynomial powers are not defined")
    if not cache:
        raise ValueError("power cache must be seeded with the degree-0 entry")
    while len(cache) <= k:
        cache.append(poly_mul(cache[-1], base))
    return cache[k]


def constant_term(n_vars: int, value: float = 1.0) -> TermDict:
    return {tuple(0 for _ in range(n_vars)): value} if value != 0.0 else {}


class PolynomialMap:
    """Vector-valued sparse polynomial over a shared variable set.

    Rows are independent polynomials; ``evaluate`` returns the stacked row
    values. Zero coefficients are never stored and duplicate exponent keys
    are merged on construction.
    """

    def __init__(self, n_vars: int, rows: Sequence[TermDict | Iterable]):
        self.n_vars = int(n_vars)
        canon: List[TermDict] = []
        for row in rows:
            items = row.items() if isinstance(row, dict) else row
            terms: TermDict = {}
            for exps, coeff in items:
                exps = _canonical_exponents(exps)
                if len(exps) != self.n_vars:
                    raise DimensionError(
                        f"exponent tuple {exps} does not match {self.n_vars} variables"
                    )
                _add_term(terms, exps, float(coeff))
            canon.append(_sorted_terms(terms))
        self.rows: Tuple[TermDict, ...] = tuple(canon)
        # flat term list per row for the scalar evaluation path
        self._compiled = tuple(
            tuple(
                (c, tuple((i, e) for i, e in enumerate(exps) if e))
                for exps, c in row.items()
            )
            for row in self.rows
        )

    @property
    def n_out(self) -> int:
        return len(self.rows)

    def degree(self) -> int:
        return max((sum(e) for row in self.rows for e in row), default=0)

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        if len(x) != self.n_vars:
            raise DimensionError(
                f"map over {self.n_vars} variables evaluated at point of length {len(x)}"
            )
        out = np.empty(self.n_out)
        for r, terms in enumerate(self._compiled):
            acc = 0.0
            for coeff, nz in terms:
                v = coeff
                for i, e in nz:
                    v *= float(x[i]) ** e
                acc += v
            out[r] = acc
        return out

    __call__ = evaluate

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at many points at once; ``points`` is (N, n_vars)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n_vars:
            raise DimensionError(
                f"expected points of shape (N, {self.n_vars}), got {pts.shape}"
            )
        out = np.zeros((pts.shape[0], self.n_out))
        for r, row in enumerate(self.rows):
            for exps, coeff in row.items():
                vals = np.full(pts.shape[0], coeff)
                for i, e in enumerate(exps):
                    if e:
                        vals *= pts[:, i] ** e
                out[:, r] += vals
        return out

    def jacobian(self) -> "PolynomialMap":
        """Exact partial derivatives, flattened row-major.

        Row ``j * n_vars + i`` holds d(row j)/d(x_i).
        """
        rows: List[TermDict] = []
        for row in self.rows:
            for i in range(self.n_vars):
                deriv: TermDict = {}
                for exps, coeff in row.items():
                    e = exps[i]
                    if e:
                        lowered = exps[:i] + (e - 1,) + exps[i + 1 :]
                        _add_term(deriv, lowered, coeff * e)
                rows.append(deriv)
        return PolynomialMap(self.n_vars, rows)

    def jacobian_matrix(self, x: Sequence[float]) -> np.ndarray:
        return self.jacobian().evaluate(x).reshape(self.n_out, self.n_vars)

    def pad_vars(self, n_total: int) -> "PolynomialMap":
        """Embed into a larger variable set, appending zero exponents."""
        if n_total < self.n_vars:
            raise DimensionError("cannot shrink the variable set of a polynomial map")
        extra = n_total - self.n_vars
        rows = [
            {exps + (0,) * extra: c for exps, c in row.items()} for row in self.rows
        ]
        return PolynomialMap(n_total, rows)

    def to_terms(self) -> List[List[dict]]:
        return [
            [{"exponents": list(exps), "coeff": c} for exps, c in row.items()]
            for row in self.rows
        ]

    @classmethod
    def from_terms(cls, n_vars: int, rows: Sequence[Sequence[dict]]) -> "PolynomialMap":
        return cls(
            n_vars,
            [[(t["exponents"], t["coeff"]) for t in row] for row in rows],
        )

    def same_terms(self, other: "PolynomialMap") -> bool:
        return self.n_vars == other.n_vars and self.rows == other.rows

    def __repr__(self):
        return f"PolynomialMap(n_vars={self.n_vars}, n_out={self.n_out})"


def eval_poly(p: PolynomialMap, x: Sequence[float]) -> np.ndarray:
    """Evaluate a polynomial map; alias for :meth:`PolynomialMap.evaluate`."""
    return p.evaluate(x)


def poly_jacobian(p: PolynomialMap) -> PolynomialMap:
    """Symbolic Jacobian of a polynomial map; see :meth:`PolynomialMap.jacobian`."""
    return p.jacobian()


def compose_monomial(
    exponents: Exponents,
    components: Sequence[TermDict],
    n_vars: int,
    power_caches: List[List[TermDict]],
) -> TermDict:
    """Substitute polynomial components into a monomial.

    Computes ``prod_i components[i] ** exponents[i]`` over the components'
    variable set of size ``n_vars``. ``power_caches`` must hold one cache
    list per component, each seeded with the degree-0 constant, and is
    shared between calls so composing a whole dictionary reuses the
    component powers.
    """
    result: TermDict | None = None
    for i, e in enumerate(exponents):
        if not e:
            continue
        factor = poly_pow(components[i], e, power_caches[i])
        result = dict(factor) if result is None else poly_mul(result, factor)
    if result is None:
        return constant_term(n_vars)
    return _sorted_terms(result)


def fresh_power_caches(components: Sequence[TermDict], n_vars: int) -> List[List[TermDict]]:
    return [[constant_term(n_vars)] for _ in components]
