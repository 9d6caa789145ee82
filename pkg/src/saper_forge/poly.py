"""Exact multivariate polynomials over Q with complex evaluation.

Polynomials are immutable maps from exponent tuples to :class:`Fraction`
coefficients. Besides ring arithmetic they support composition with a
:class:`Substitution` (used for blow-up chart maps), removal of the largest
power of one variable (strict transforms), formal partial derivatives and
double-precision evaluation at complex points.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, PointOnCenter
from .hermitian import HermitianFormSample

# Only true zeros of F are rejected; samples near the center reach F ~ 1e-130.
EPS_F = 1e-300

Exp = tuple[int, ...]


def default_names(nvars: int) -> tuple[str, ...]:
    if nvars == 2:
        return ("x", "y")
    return tuple(f"x{i + 1}" for i in range(nvars))


def grlex_key(exp: Exp) -> tuple:
    """Sort key; larger key means larger in graded-lex order (x > y > ...)."""
    return (sum(exp), exp)


class MultiPoly:
    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Exp, Fraction | int] | None = None):
        clean: dict[Exp, Fraction] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise ValueError(f"exponent {exp} does not have length {nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = Fraction(c)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if not clean[exp]:
                    del clean[exp]
        self.nvars = nvars
        self.terms = clean
        self._hash = None

    # constructors

    @classmethod
    def const(cls, c, nvars: int) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: Fraction(c)})

    @classmethod
    def var(cls, i: int, nvars: int) -> "MultiPoly":
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1})

    @classmethod
    def monomial(cls, exp: Sequence[int], coeff=1) -> "MultiPoly":
        return cls(len(exp), {tuple(exp): Fraction(coeff)})

    @classmethod
    def gens(cls, nvars: int) -> tuple["MultiPoly", ...]:
        return tuple(cls.var(i, nvars) for i in range(nvars))

    # basic queries

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def sorted_terms(self, descending: bool = True) -> list[tuple[Exp, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]), reverse=descending)

    def leading_monomial(self) -> tuple[Exp, Fraction]:
        return self.sorted_terms()[0]

    # arithmetic

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, Fraction)):
            return MultiPoly.const(other, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return MultiPoly(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Exp, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return MultiPoly(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("power must be a nonnegative integer")
        result = MultiPoly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(other, self.nvars)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self):
        return f"MultiPoly({self.to_text()!r})"

    def __str__(self):
        return self.to_text()

    # symbolic operations

    def substitute(self, s: "Substitution | Sequence[MultiPoly]") -> "MultiPoly":
        images = s.images if isinstance(s, Substitution) else tuple(s)
        if len(images) != self.nvars:
            raise ValueError(f"substitution has {len(images)} images for {self.nvars} variables")
        if not images:
            return MultiPoly(0, self.terms)
        target = images[0].nvars
        powers: list[dict[int, MultiPoly]] = [{0: MultiPoly.const(1, target)} for _ in images]

        def power(i: int, k: int) -> MultiPoly:
            cache = powers[i]
            if k not in cache:
                cache[k] = images[i] ** k
            return cache[k]

        result = MultiPoly(target)
        for exp, c in self.terms.items():
            term = MultiPoly.const(c, target)
            for i, k in enumerate(exp):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def divide_out(self, v: int) -> tuple[int, "MultiPoly"]:
        """Write self = x_v^m * q with x_v not dividing q."""
        if self.is_zero():
            raise ValueError("cannot divide out of the zero polynomial")
        m = min(e[v] for e in self.terms)
        terms = {}
        for e, c in self.terms.items():
            e = list(e)
            e[v] -= m
            terms[tuple(e)] = c
        return m, MultiPoly(self.nvars, terms)

    def exact_div(self, other: "MultiPoly") -> "MultiPoly | None":
        """Quotient by ``other`` if it divides exactly, otherwise None.

        Multivariate division by the graded-lex leading term; the remainder is
        zero iff ``other`` divides ``self`` (lex-type orders make the quotient
        unique when it exists).
        """
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        lead_e, lead_c = other.leading_monomial()
        rem = self
        quot = MultiPoly(self.nvars)
        while not rem.is_zero():
            e, c = rem.leading_monomial()
            if any(a < b for a, b in zip(e, lead_e)):
                return None
            t = MultiPoly.monomial(tuple(a - b for a, b in zip(e, lead_e)), c / lead_c)
            quot = quot + t
            rem = rem - t * other
        return quot

    def partial(self, v: int) -> "MultiPoly":
        if not 0 <= v < self.nvars:
            raise IndexError(f"variable index {v} out of range")
        terms = {}
        for e, c in self.terms.items():
            if e[v]:
                e2 = list(e)
                e2[v] -= 1
                terms[tuple(e2)] = c * e[v]
        return MultiPoly(self.nvars, terms)

    def restrict(self, v: int, value) -> "MultiPoly":
        """Substitute the exact constant ``value`` for variable ``v``."""
        images = list(MultiPoly.gens(self.nvars))
        images[v] = MultiPoly.const(value, self.nvars)
        return self.substitute(images)

    def eval_exact(self, point: Sequence[Fraction]) -> Fraction:
        if len(point) != self.nvars:
            raise ValueError("dimension mismatch")
        total = Fraction(0)
        for e, c in self.terms.items():
            t = c
            for p, k in zip(point, e):
                if k:
                    t *= Fraction(p) ** k
            total += t
        return total

    def __call__(self, z: Sequence[complex]) -> complex:
        return self.eval(z)

    def eval(self, z: Sequence[complex]) -> complex:
        if len(z) != self.nvars:
            raise ValueError(f"point has {len(z)} coordinates, polynomial has {self.nvars} variables")
        z = [complex(c) for c in z]
        total = 0j
        for e, c in self.terms.items():
            t = complex(float(c))
            for zi, k in zip(z, e):
                if k:
                    t *= zi**k
            total += t
        return total

    # serialization

    def to_text(self, names: Sequence[str] | None = None) -> str:
        names = names or default_names(self.nvars)
        if not self.terms:
            return "0"
        out = []
        for i, (e, c) in enumerate(self.sorted_terms()):
            mono = "*".join(
                names[j] if k == 1 else f"{names[j]}^{k}" for j, k in enumerate(e) if k
            )
            mag = abs(c)
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{mag}*{mono}"
            else:
                body = str(mag)
            if i == 0:
                out.append(f"-{body}" if c < 0 else body)
            else:
                out.append(f"- {body}" if c < 0 else f"+ {body}")
        return " ".join(out)

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [
                {"exp": list(e), "num": str(c.numerator), "den": str(c.denominator)}
                for e, c in self.sorted_terms()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MultiPoly":
        return cls(
            int(data["nvars"]),
            {tuple(t["exp"]): Fraction(int(t["num"]), int(t["den"])) for t in data["terms"]},
        )

    @classmethod
    def parse(cls, text: str, names: Sequence[str] | None = None) -> "MultiPoly":
        names = tuple(names) if names else ("x", "y")
        return _Parser(text, names).parse()


class Substitution:
    """Images of the variables of a polynomial ring, all in one target ring."""

    __slots__ = ("images",)

    def __init__(self, images: Iterable[MultiPoly]):
        images = tuple(images)
        if not images:
            raise ValueError("empty substitution")
        n = images[0].nvars
        if any(im.nvars != n for im in images):
            raise ValueError("substitution images live in different rings")
        self.images = images

    @classmethod
    def identity(cls, nvars: int) -> "Substitution":
        return cls(MultiPoly.gens(nvars))

    @property
    def source_nvars(self) -> int:
        """Number of variables being substituted for."""
        return len(self.images)

    @property
    def target_nvars(self) -> int:
        return self.images[0].nvars

    def followed_by(self, other: "Substitution") -> "Substitution":
        """Composite s such that p.substitute(self).substitute(other) == p.substitute(s)."""
        return Substitution(im.substitute(other) for im in self.images)

    def is_monomial(self) -> bool:
        return all(im.is_monomial() for im in self.images)

    def exponent_matrix(self) -> tuple[Exp, ...]:
        """Row i is the exponent vector of the monomial image of variable i."""
        if not self.is_monomial():
            raise ValueError("substitution is not monomial")
        return tuple(next(iter(im.terms)) for im in self.images)

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.images == other.images

    def __hash__(self):
        return hash(self.images)

    def __repr__(self):
        return f"Substitution({[im.to_text() for im in self.images]})"

    def to_text(self, names: Sequence[str] | None = None) -> list[str]:
        return [im.to_text(names) for im in self.images]


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


class _Parser:
    """Recursive descent for sums of coefficient*monomial products."""

    def __init__(self, text: str, names: Sequence[str]):
        self.names = list(names)
        self.nvars = len(self.names)
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> list[tuple[str, str]]:
        tokens = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character at {pos}: {text[pos:]!r}")
            num, name, op = m.groups()
            if num is not None:
                tokens.append(("num", num))
            elif name is not None:
                tokens.append(("name", name))
            else:
                tokens.append(("op", "^" if op == "**" else op))
            pos = m.end()
        return tokens

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self) -> MultiPoly:
        if not self.tokens:
            raise ParseError("empty polynomial")
        p = self.expr()
        if self.pos != len(self.tokens):
            raise ParseError(f"trailing input at token {self.tokens[self.pos]}")
        return p

    def expr(self) -> MultiPoly:
        sign = 1
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        p = self.term() * sign
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                p = p + t if val == "+" else p - t
            else:
                return p

    def term(self) -> MultiPoly:
        p = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                p = p * self.factor()
            elif kind == "op" and val == "/":
                self.take()
                kind, num = self.take()
                if kind != "num" or int(num) == 0:
                    raise ParseError("division only by nonzero integer literals")
                p = p * Fraction(1, int(num))
            elif kind == "name" and p.is_constant():
                # coefficient followed by monomial, e.g. 3x^2
                p = p * self.factor()
            else:
                return p

    def factor(self) -> MultiPoly:
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, num = self.take()
            if kind != "num":
                raise ParseError("exponent must be a nonnegative integer literal")
            return base ** int(num)
        return base

    def atom(self) -> MultiPoly:
        kind, val = self.take()
        if kind == "num":
            return MultiPoly.const(int(val), self.nvars)
        if kind == "name":
            if val not in self.names:
                raise ParseError(f"unknown variable {val!r}; expected one of {self.names}")
            return MultiPoly.var(self.names.index(val), self.nvars)
        if kind == "op" and val == "(":
            p = self.expr()
            if self.take() != ("op", ")"):
                raise ParseError("unbalanced parenthesis")
            return p
        if kind == "op" and val == "-":
            return -self.factor()
        raise ParseError(f"unexpected token {val!r}")


# numeric evaluation helpers for the Levi form


class CompiledPoly:
    """Float snapshot of a polynomial for fast repeated evaluation."""

    __slots__ = ("nvars", "exps", "coeffs")

    def __init__(self, p: MultiPoly):
        self.nvars = p.nvars
        items = list(p.terms.items())
        self.exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), p.nvars)
        self.coeffs = np.array([float(c) for _, c in items], dtype=float)

    def __call__(self, z) -> complex:
        if not len(self.coeffs):
            return 0j
        z = np.asarray(z, dtype=complex)
        return complex(np.sum(self.coeffs * np.prod(z[None, :] ** self.exps, axis=1)))


class CompiledGenerators:
    """Generators and their first partials, ready for pointwise evaluation."""

    def __init__(self, gens: Sequence[MultiPoly]):
        if not gens:
            raise ValueError("need at least one generator")
        self.nvars = gens[0].nvars
        if any(g.nvars != self.nvars for g in gens):
            raise ValueError("generators live in different rings")
        self.gens = tuple(gens)
        self.values = [CompiledPoly(g) for g in gens]
        self.partials = [[CompiledPoly(g.partial(a)) for a in range(self.nvars)] for g in gens]

    def evaluate(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Return (f_j(z)) and the Jacobian D[j, a] = d f_j / d z_a."""
        if len(z) != self.nvars:
            raise ValueError("dimension mismatch")
        f = np.array([v(z) for v in self.values], dtype=complex)
        d = np.array([[p(z) for p in row] for row in self.partials], dtype=complex)
        return f, d

    def sum_sq(self, z) -> float:
        f = np.array([v(z) for v in self.values], dtype=complex)
        return float(np.sum(np.abs(f) ** 2))


def _compiled(gens) -> CompiledGenerators:
    return gens if isinstance(gens, CompiledGenerators) else CompiledGenerators(list(gens))


def _levi_parts(gens, z, eps: float):
    """F, d log F and Gram rows U with ddbar log F = sum_p U_p (x) conj(U_p).

    By the Lagrange identity F * ddbar F - dF (x) dbarF is the sum over j < k of
    u (x) conj(u) with u = f_j grad f_k - f_k grad f_j, so no cancellation
    occurs between large terms. Values are normalized by the largest |f_j|
    first so that F far below 1 does not underflow.
    """
    cg = _compiled(gens)
    f, d = cg.evaluate(z)
    c = float(np.max(np.abs(f)))
    F = float(np.sum(np.abs(f) ** 2))
    if not F > eps or c == 0.0:
        raise PointOnCenter(f"sum of squares {F!r} at {tuple(z)} is not above {eps}")
    f, d = f / c, d / c
    Fn = float(np.sum(np.abs(f) ** 2))
    j, k = np.triu_indices(len(f), 1)
    U = (f[j, None] * d[k] - f[k, None] * d[j]) / Fn
    return F, (d.T @ f.conj()) / Fn, U


def log_jet(gens, z, eps: float = EPS_F) -> tuple[float, np.ndarray, np.ndarray]:
    """Return F, the gradient d log F and the Levi matrix of log F at z."""
    F, dphi, U = _levi_parts(gens, z, eps)
    H = U.T @ U.conj()
    return F, dphi, 0.5 * (H + H.conj().T)


def levi_log_sum_sq(gens, z, eps: float = EPS_F) -> HermitianFormSample:
    """Complex Hessian d^2/dz_a dzbar_b of log sum_j |f_j(z)|^2."""
    _, _, U = _levi_parts(gens, z, eps)
    return HermitianFormSample.from_gram(z, U)
