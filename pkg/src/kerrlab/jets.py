"""Truncated Taylor (jet) arithmetic to third order.

A Jet carries the value and first three derivatives of a function of a
single scalar argument, propagated through arithmetic exactly.  Rational
expressions built from jets therefore have machine-exact derivatives,
which is what the positivity scans need near roots where finite
differencing would drown the margin in noise.

Components are numpy arrays (or scalars); everything broadcasts.
"""
import numpy as np

__all__ = ["Jet", "variable", "constant", "jexp", "jlog", "jsqrt", "jatan",
           "jsin", "jcos", "lift"]


class Jet:
    """Value plus derivatives d1, d2, d3 with respect to one parameter."""

    __slots__ = ("f", "d1", "d2", "d3")

    def __init__(self, f, d1=0.0, d2=0.0, d3=0.0):
        self.f = f
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    # ---- ring operations ----
    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.f + o.f, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
        return Jet(self.f + o, self.d1, self.d2, self.d3)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.f, -self.d1, -self.d2, -self.d3)

    def __sub__(self, o):
        return self + (-o if isinstance(o, Jet) else -np.asarray(o))

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            # Leibniz to third order
            return Jet(
                self.f * o.f,
                self.d1 * o.f + self.f * o.d1,
                self.d2 * o.f + 2 * self.d1 * o.d1 + self.f * o.d2,
                self.d3 * o.f + 3 * self.d2 * o.d1 + 3 * self.d1 * o.d2 + self.f * o.d3,
            )
        return Jet(self.f * o, self.d1 * o, self.d2 * o, self.d3 * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o._reciprocal()
        return self * (1.0 / o)

    def __rtruediv__(self, o):
        return self._reciprocal() * o

    def _reciprocal(self):
        g = 1.0 / self.f
        g2 = g * g
        return Jet(
            g,
            -self.d1 * g2,
            (2 * self.d1 * self.d1 * g - self.d2) * g2,
            (6 * self.d1 * self.d2 * g - self.d3 - 6 * self.d1 ** 3 * g2) * g2,
        )

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = constant(np.ones_like(np.asarray(self.f, dtype=float)))
            base = self
            k = n
            while k:                       # square-and-multiply keeps jets exact
                if k & 1:
                    out = out * base
                base = base * base
                k >>= 1
            return out
        return _compose(self, *_pow_derivs(self.f, n))

    # ---- convenience ----
    def derivative(self, k=1):
        return (self.f, self.d1, self.d2, self.d3)[k]

    def __repr__(self):
        return f"Jet({self.f!r}, {self.d1!r}, {self.d2!r}, {self.d3!r})"


def variable(x):
    """Seed jet for the independent variable."""
    x = np.asarray(x, dtype=float)
    return Jet(x, np.ones_like(x), np.zeros_like(x), np.zeros_like(x))


def constant(c):
    return Jet(np.asarray(c, dtype=float), 0.0, 0.0, 0.0)


def lift(x):
    """Return x as a Jet (constants get zero derivatives)."""
    return x if isinstance(x, Jet) else constant(x)


def _compose(u, g, g1, g2, g3):
    # Faa di Bruno through third order for g(u(x))
    return Jet(
        g,
        g1 * u.d1,
        g2 * u.d1 ** 2 + g1 * u.d2,
        g3 * u.d1 ** 3 + 3 * g2 * u.d1 * u.d2 + g1 * u.d3,
    )


def _pow_derivs(x, n):
    g = x ** n
    g1 = n * x ** (n - 1)
    g2 = n * (n - 1) * x ** (n - 2)
    g3 = n * (n - 1) * (n - 2) * x ** (n - 3)
    return g, g1, g2, g3


def jexp(u):
    u = lift(u)
    e = np.exp(u.f)
    return _compose(u, e, e, e, e)


def jlog(u):
    u = lift(u)
    x = u.f
    return _compose(u, np.log(x), 1.0 / x, -1.0 / x ** 2, 2.0 / x ** 3)


def jsqrt(u):
    u = lift(u)
    x = u.f
    s = np.sqrt(x)
    return _compose(u, s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x))


def jatan(u):
    u = lift(u)
    x = u.f
    d = 1.0 + x * x
    return _compose(u, np.arctan(x), 1.0 / d, -2.0 * x / d ** 2,
                    (6.0 * x * x - 2.0) / d ** 3)


def jsin(u):
    u = lift(u)
    s, c = np.sin(u.f), np.cos(u.f)
    return _compose(u, s, c, -s, -c)


def jcos(u):
    u = lift(u)
    s, c = np.sin(u.f), np.cos(u.f)
    return _compose(u, c, -s, -c, s)
