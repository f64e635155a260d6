"""Tiny expression grammar for log-linear intensities and term lists.

A log-intensity expression is a signed sum of products of numbers and the
coordinate variables x, y, t with optional integer exponents, e.g.
``4 + 1.2*x - 0.8*t`` or ``2 + 0.5*x^2*y``. Every expression writable
here is also expressible as a model term list, which closes the loop
between simulation truths and fitted models.

A term list is a comma-separated sequence like ``1,x,y,t,x*t,ndvi`` where
``1`` is the intercept, products of coordinates are monomials, and any
other identifier refers to a declared external covariate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .covariates import CoordinateMonomial, CovariateFunction, ExternalCovariate, Intercept

__all__ = ["LogLinearExpression", "parse_log_linear", "parse_term_list"]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^]))"
)

_VARS = {"x": 0, "y": 1, "t": 2}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot parse {text!r} at position {pos}: {text[pos:]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


@dataclass(frozen=True)
class LogLinearExpression:
    """Sum of coefficient * x^i y^j t^k monomials, used inside exp()."""

    monomials: tuple[tuple[tuple[int, int, int], float], ...]

    def log_intensity(self, x, y, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(x)
        for (i, j, k), coef in self.monomials:
            term = np.full_like(x, coef)
            for arr, e in zip((x, y, t), (i, j, k)):
                if e:
                    term = term * arr**e
            out = out + term
        return out

    def intensity(self, x, y, t) -> np.ndarray:
        return np.exp(self.log_intensity(x, y, t))

    def terms(self) -> tuple[CovariateFunction, ...]:
        """Matching model terms, one per monomial (the constant becomes an intercept)."""
        built = []
        for (i, j, k), _ in self.monomials:
            built.append(Intercept() if (i, j, k) == (0, 0, 0) else CoordinateMonomial(i, j, k))
        return tuple(built)

    def coefficients(self) -> np.ndarray:
        return np.array([coef for _, coef in self.monomials], dtype=float)

    def canonical(self) -> str:
        parts = []
        for (i, j, k), coef in self.monomials:
            mono = CoordinateMonomial(i, j, k).name
            if mono == "1":
                piece = repr(coef)
            elif coef == 1.0:
                piece = mono
            else:
                piece = f"{coef!r}*{mono}"
            parts.append(piece)
        return " + ".join(parts) if parts else "0"


def parse_log_linear(text: str) -> LogLinearExpression:
    """Parse a signed sum of coefficient-times-monomial products."""
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty log-intensity expression")
    order: list[tuple[int, int, int]] = []
    coefs: dict[tuple[int, int, int], float] = {}

    pos = 0

    def parse_factor(coef, exps):
        nonlocal pos
        kind, val = tokens[pos]
        if kind == "number":
            coef *= float(val)
            pos += 1
        elif kind == "name":
            if val not in _VARS:
                raise ValueError(f"unknown variable {val!r}: only x, y, t are allowed")
            pos += 1
            power = 1
            if pos < len(tokens) and tokens[pos] == ("op", "^"):
                pos += 1
                if pos >= len(tokens) or tokens[pos][0] != "number":
                    raise ValueError(f"expected an integer exponent after {val}^")
                num = tokens[pos][1]
                power = float(num)
                if power != int(power) or power < 0:
                    raise ValueError(f"exponents must be nonnegative integers, got {num}")
                power = int(power)
                pos += 1
            exps[_VARS[val]] += power
        else:
            raise ValueError(f"unexpected token {val!r} in term")
        return coef

    while pos < len(tokens):
        sign = 1.0
        while pos < len(tokens) and tokens[pos][0] == "op" and tokens[pos][1] in "+-":
            if tokens[pos][1] == "-":
                sign = -sign
            pos += 1
        if pos >= len(tokens):
            raise ValueError("expression ends with a dangling sign")
        coef = sign
        exps = [0, 0, 0]
        coef = parse_factor(coef, exps)
        while pos < len(tokens) and tokens[pos] == ("op", "*"):
            pos += 1
            if pos >= len(tokens):
                raise ValueError("expression ends with a dangling '*'")
            coef = parse_factor(coef, exps)
        key = tuple(exps)
        if key not in coefs:
            order.append(key)
            coefs[key] = 0.0
        coefs[key] += coef

    return LogLinearExpression(tuple((key, coefs[key]) for key in order))


def parse_term_list(
    text: str, externals: Mapping[str, ExternalCovariate] | None = None
) -> tuple[CovariateFunction, ...]:
    """Parse a comma-separated term list into covariate functions."""
    externals = externals or {}
    terms: list[CovariateFunction] = []
    for raw in text.split(","):
        tok = raw.strip()
        if not tok:
            raise ValueError(f"empty term in list {text!r}")
        if tok == "1":
            terms.append(Intercept())
            continue
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok) and tok not in _VARS:
            if tok not in externals:
                raise ValueError(
                    f"unknown term {tok!r}: not a coordinate monomial and no such "
                    "external covariate was declared"
                )
            terms.append(externals[tok])
            continue
        tokens = _tokenize(tok)
        exps = [0, 0, 0]
        expect_var = True
        i = 0
        while i < len(tokens):
            kind, val = tokens[i]
            if expect_var:
                if kind != "name" or val not in _VARS:
                    raise ValueError(
                        f"unknown term {tok!r}: expected one of x, y, t, got {val!r}"
                    )
                var = _VARS[val]
                power = 1
                i += 1
                if i < len(tokens) and tokens[i] == ("op", "^"):
                    i += 1
                    if i >= len(tokens) or tokens[i][0] != "number":
                        raise ValueError(f"missing exponent in term {tok!r}")
                    num = float(tokens[i][1])
                    if num != int(num) or num < 0:
                        raise ValueError(f"bad exponent in term {tok!r}")
                    power = int(num)
                    i += 1
                exps[var] += power
                expect_var = False
            else:
                if (kind, val) != ("op", "*"):
                    raise ValueError(f"malformed term {tok!r}")
                expect_var = True
                i += 1
        if expect_var:
            raise ValueError(f"malformed term {tok!r}")
        terms.append(CoordinateMonomial(*exps))
    if not terms:
        raise ValueError("term list is empty")
    return tuple(terms)
