"""Observable dictionaries: ordered scalar functions lifting the state.

A dictionary is an ordered list of observables, each either an exact
:class:`~kooplift.polynomials.Monomial` or a black-box scalar callable with
an optional analytic gradient. All-monomial dictionaries get exact batched
evaluation and exact Jacobians; black-box entries fall back to central
finite differences when no gradient is supplied.
"""

from __future__ import annotations

import re
from itertools import combinations_with_replacement
from math import comb
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError, NumericEvaluationError
from .polynomials import Monomial, PolynomialMap, _term_order_key

_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


class BlackBoxObservable:
    """Scalar observable given as a callable, with optional analytic gradient."""

    def __init__(
        self,
        func: Callable[[np.ndarray], float],
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "blackbox",
    ):
        self.func = func
        self.gradient = gradient
        self.name = name

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.func(x))

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return _central_gradient(self.func, np.asarray(x, dtype=float))

    def __repr__(self):
        return f"BlackBoxObservable({self.name})"


def _central_gradient(func, x: np.ndarray) -> np.ndarray:
    # step h = cbrt(eps) * max(1, |x_i|) per coordinate: standard
    # accuracy/roundoff balance for second-order central differences
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        h = _FD_STEP * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (float(func(xp)) - float(func(xm))) / (xp[i] - xm[i])
    return grad


Observable = Union[Monomial, BlackBoxObservable]


class ObservableDictionary:
    """Ordered set of scalar observables with evaluation and state-Jacobian.

    ``state_selector`` lists, per state coordinate, the index of the
    observable that is the identity on that coordinate; it is detected
    automatically for monomial entries and makes the inverse transformation
    (state recovery from the lifted vector) a plain gather.
    """

    def __init__(
        self,
        n_x: int,
        observables: Sequence[Observable],
        state_selector: Optional[Sequence[int]] = None,
    ):
        self.n_x = int(n_x)
        obs: List[Observable] = []
        for entry in observables:
            if isinstance(entry, Monomial):
                if entry.n_vars != self.n_x:
                    raise DimensionError(
                        f"monomial {entry.exponents} does not match state dimension {self.n_x}"
                    )
            elif not isinstance(entry, BlackBoxObservable):
                raise TypeError(
                    "observables must be Monomial or BlackBoxObservable instances"
                )
            obs.append(entry)
        self.observables: Tuple[Observable, ...] = tuple(obs)
        if state_selector is None:
            state_selector = _detect_state_selector(self.observables, self.n_x)
        elif not _selector_is_identity(self.observables, self.n_x, state_selector):
            raise ValueError(
                "state_selector entries must point at identity monomials, "
                f"got {tuple(state_selector)}"
            )
        self.state_selector = (
            tuple(int(i) for i in state_selector) if state_selector is not None else None
        )
        if self.state_selector is not None and self.n_f < self.n_x:
            raise DimensionError(
                "a dictionary with a state selector needs at least n_x observables"
            )
        self._monomial_exponents = (
            np.array([o.exponents for o in self.observables], dtype=np.int64)
            if self.all_monomial and self.observables
            else None
        )
        self._jac_cache = self._build_jacobian_tables()

    @property
    def n_f(self) -> int:
        return len(self.observables)

    @property
    def all_monomial(self) -> bool:
        return all(isinstance(o, Monomial) for o in self.observables)

    @property
    def exponent_matrix(self) -> np.ndarray:
        if self._monomial_exponents is None:
            raise TypeError("dictionary contains black-box observables")
        return self._monomial_exponents

    def as_polynomial_map(self) -> PolynomialMap:
        if not self.all_monomial:
            raise TypeError("dictionary contains black-box observables")
        return PolynomialMap(
            self.n_x, [{o.exponents: 1.0} for o in self.observables]
        )

    # below this many entries the scalar Jacobian path beats numpy broadcasting
    _SMALL_JACOBIAN = 64

    def _build_jacobian_tables(self):
        self._jac_small = None
        if self._monomial_exponents is None:
            return None
        E = self._monomial_exponents
        lowered = np.repeat(E[None, :, :], self.n_x, axis=0)  # (n_x, n_f, n_x)
        for i in range(self.n_x):
            lowered[i, :, i] = np.maximum(lowered[i, :, i] - 1, 0)
        if self.n_f * self.n_x <= self._SMALL_JACOBIAN:
            template = np.zeros((self.n_f, self.n_x))
            varying = []
            for j, obs in enumerate(self.observables):
                for i, e in enumerate(obs.exponents):
                    if not e:
                        continue
                    lowered_exps = tuple(
                        ek - 1 if k == i else ek for k, ek in enumerate(obs.exponents)
                    )
                    nz = tuple((k, ek) for k, ek in enumerate(lowered_exps) if ek)
                    if nz:
                        varying.append((j, i, float(e), nz))
                    else:
                        template[j, i] = float(e)
            self._jac_small = (template, tuple(varying))
        else:
            self._jac_small = None
        return E.astype(float), lowered

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_x,):
            raise DimensionError(f"expected state of shape ({self.n_x},), got {x.shape}")
        if self._monomial_exponents is not None:
            out = np.prod(x[None, :] ** self._monomial_exponents, axis=1)
        else:
            out = np.array([o.evaluate(x) for o in self.observables])
        bad = np.flatnonzero(~np.isfinite(out))
        if bad.size:
            raise NumericEvaluationError(
                f"observable {bad[0]} evaluated to a non-finite value at x={x!r}",
                index=int(bad[0]),
            )
        return out

    __call__ = evaluate

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n_x:
            raise DimensionError(
                f"expected points of shape (N, {self.n_x}), got {pts.shape}"
            )
        if self._monomial_exponents is not None:
            return np.prod(
                pts[:, None, :] ** self._monomial_exponents[None, :, :], axis=2
            )
        return np.stack([self.evaluate(p) for p in pts])

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        """State-Jacobian at ``x``: shape (n_f, n_x).

        Exact for monomials; analytic-gradient or central finite differences
        for black-box entries.
        """
        x = np.asarray(x, dtype=float)
        if self._jac_cache is not None:
            if self._jac_small is not None:
                template, varying = self._jac_small
                jac = template.copy()
                for j, i, coeff, nz in varying:
                    v = coeff
                    for k, e in nz:
                        v *= float(x[k]) ** e
                    jac[j, i] = v
                return jac
            coeff, lowered = self._jac_cache
            # J[j, i] = E[j, i] * prod_k x_k ** lowered[i, j, k]
            return (coeff * np.prod(x[None, None, :] ** lowered, axis=2).T)
        jac = np.empty((self.n_f, self.n_x))
        for j, obs in enumerate(self.observables):
            if isinstance(obs, Monomial):
                for i in range(self.n_x):
                    e = obs.exponents[i]
                    if not e:
                        jac[j, i] = 0.0
                        continue
                    v = float(e)
                    for k, ek in enumerate(obs.exponents):
                        p = ek - 1 if k == i else ek
                        if p:
                            v *= float(x[k]) ** p
                    jac[j, i] = v
            else:
                jac[j] = obs.gradient_at(x)
        return jac

    def describe(self) -> dict:
        return {
            "n_x": self.n_x,
            "observables": [
                {"exponents": list(o.exponents)}
                if isinstance(o, Monomial)
                else {"blackbox": o.name}
                for o in self.observables
            ],
            "state_selector": list(self.state_selector)
            if self.state_selector is not None
            else None,
        }

    @classmethod
    def from_description(cls, doc: dict) -> "ObservableDictionary":
        obs = []
        for entry in doc["observables"]:
            if "exponents" in entry:
                obs.append(Monomial(entry["exponents"]))
            else:
                raise ValueError(
                    "black-box observables cannot be reconstructed from a description"
                )
        return cls(doc["n_x"], obs, state_selector=doc.get("state_selector"))

    def __repr__(self):
        return f"ObservableDictionary(n_x={self.n_x}, n_f={self.n_f})"


def _identity_exponents(n_x: int, coordinate: int) -> Tuple[int, ...]:
    return tuple(1 if i == coordinate else 0 for i in range(n_x))


def _detect_state_selector(observables, n_x: int) -> Optional[List[int]]:
    selector = []
    for coord in range(n_x):
        target = _identity_exponents(n_x, coord)
        for j, obs in enumerate(observables):
            if isinstance(obs, Monomial) and obs.exponents == target:
                selector.append(j)
                break
        else:
            return None
    return selector


def _selector_is_identity(observables, n_x: int, selector) -> bool:
    if len(selector) != n_x:
        return False
    for coord, j in enumerate(selector):
        obs = observables[int(j)]
        if not isinstance(obs, Monomial):
            return False
        if obs.exponents != _identity_exponents(n_x, coord):
            return False
    return True


def monomial_dictionary(
    n_x: int, degree: int, include_constant: bool = False
) -> ObservableDictionary:
    """Full dictionary of monomials ``x1**a1 * ... * xn**an`` up to ``degree``.

    Ordered by (total degree, reverse-lexicographic exponents) so the n_x
    identity observables come first and ``state_selector`` is ``0..n_x-1``;
    the constant observable, when requested, is appended at the end to keep
    that property. Without the constant the count is C(n_x+degree, n_x) - 1.
    """
    if degree < 1:
        raise ValueError(f"dictionary degree must be at least 1, got {degree}")
    if n_x < 1:
        raise ValueError(f"state dimension must be at least 1, got {n_x}")
    exponents = []
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(range(n_x), d):
            exps = [0] * n_x
            for idx in combo:
                exps[idx] += 1
            exponents.append(tuple(exps))
    exponents.sort(key=_term_order_key)
    observables: List[Observable] = [Monomial(e) for e in exponents]
    if include_constant:
        observables.append(Monomial((0,) * n_x))
    dictionary = ObservableDictionary(n_x, observables)
    expected = comb(n_x + degree, n_x) - 1 + (1 if include_constant else 0)
    assert dictionary.n_f == expected
    return dictionary


_MONOMIAL_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_monomial(text: str, n_x: int) -> Monomial:
    """Parse a monomial like ``x1^2*x2`` (or ``1`` for the constant)."""
    text = text.strip()
    if text in ("1", ""):
        return Monomial((0,) * n_x)
    exps = [0] * n_x
    for factor in text.split("*"):
        m = _MONOMIAL_FACTOR.match(factor.strip())
        if not m:
            raise ValueError(f"cannot parse monomial factor {factor!r}")
        idx = int(m.group(1)) - 1
        if not 0 <= idx < n_x:
            raise ValueError(
                f"variable x{idx + 1} out of range for state dimension {n_x}"
            )
        exps[idx] += int(m.group(2) or 1)
    return Monomial(exps)


def parse_dictionary(text: str, n_x: int) -> ObservableDictionary:
    """Parse a comma-separated monomial list like ``x1,x2,x1^2``."""
    monomials = [parse_monomial(tok, n_x) for tok in text.split(",") if tok.strip()]
    if not monomials:
        raise ValueError("dictionary specification is empty")
    return ObservableDictionary(n_x, monomials)
