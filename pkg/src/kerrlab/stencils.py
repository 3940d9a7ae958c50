"""Finite-difference stencils on uniform grids.

Fourth-order first derivative with one-sided closures, and the classical
five-point fourth-difference dissipation operator.  Everything acts along a
chosen axis of a (possibly complex) array.
"""

import numpy as np

# one-sided 4th-order first-derivative rows for the two edge points
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def d1(f, h, axis=-1):
    """First derivative, 4th order: centered interior, one-sided at edges."""
    f = np.asarray(f)
    if f.shape[axis] < 5:
        raise ValueError("need at least 5 points along the derivative axis")
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = np.tensordot(_EDGE0, f[:5], axes=(0, 0)) / h
    out[1] = np.tensordot(_EDGE1, f[:5], axes=(0, 0)) / h
    out[-1] = -np.tensordot(_EDGE0, f[-5:][::-1], axes=(0, 0)) / h
    out[-2] = -np.tensordot(_EDGE1, f[-5:][::-1], axes=(0, 0)) / h
    return np.moveaxis(out, 0, axis)


def dissipation(f, h, sigma, axis=-1):
    """Kreiss-Oliger style damping term built on the 5-point 4th difference.

    Returns -sigma/(16 h) * (f_{i-2} - 4 f_{i-1} + 6 f_i - 4 f_{i+1} + f_{i+2})
    with zero applied at the two points nearest each edge.  Add the result to
    a time derivative; it is negative semidefinite on periodic data.
    """
    f = np.asarray(f)
    f = np.moveaxis(f, axis, 0)
    out = np.zeros_like(f)
    out[2:-2] = (
        -(sigma / (16 * h))
        * (f[:-4] - 4 * f[1:-3] + 6 * f[2:-2] - 4 * f[3:-1] + f[4:])
    )
    return np.moveaxis(out, 0, axis)
