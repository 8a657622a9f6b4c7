"""Search rectangles and the conformal map onto a slotted annulus.

A rectangle is described by the midpoint ``z0`` of its edge CD *in rotated
coordinates* (i.e. after multiplying by exp(-i*alpha)), the edge length
``L``, the height ``h`` measured from CD toward the opposite edge AB, and
the slot parameter ``eps0``.  The map

    zeta = exp(-i * (2*pi - eps0) * (z * exp(-i*alpha) - z0) / L)

sends CD onto the unit circle and AB onto the circle of radius
``r_in = exp(-(2*pi - eps0) * h / L)``; the rectangle interior fills the
annulus between them minus a slot of angular width ``eps0`` straddling the
negative real axis, which keeps the image clear of the principal
logarithm's branch cut.  The rectangle lies on the side where |zeta| <= 1
(rotated imaginary part at or below that of z0).

Corner labels, with u the rotated real offset from z0 and v the rotated
imaginary offset:  D = (-L/2, 0), C = (+L/2, 0), B = (+L/2, -h),
A = (-L/2, -h).  The counterclockwise boundary starts at D and runs
D -> A -> B -> C -> D; its image traverses the slotted-annulus boundary
with the outer unit-circle arc counterclockwise.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError, InvalidInputError

TWO_PI = 2.0 * math.pi

#: Corner traversal order of the counterclockwise boundary.
CORNER_ORDER = ("D", "A", "B", "C")


@dataclass(frozen=True)
class Rectangle:
    """Immutable search region; see the module docstring for conventions."""

    z0: complex
    alpha: float
    L: float
    h: float
    eps0: float = 0.1

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise InvalidInputError("L must be positive and finite")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidInputError("h must be positive and finite")
        if not (0.0 < self.eps0 <= 0.5):
            raise InvalidInputError("eps0 must lie in (0, 0.5]")
        if not (-math.pi < self.alpha <= math.pi):
            raise InvalidInputError("alpha must lie in (-pi, pi]")
        if not (math.isfinite(self.z0.real) and math.isfinite(self.z0.imag)):
            raise InvalidInputError("z0 must be finite")

    @property
    def angular_rate(self) -> float:
        """(2*pi - eps0) / L, the rotation rate of the transform."""
        return (TWO_PI - self.eps0) / self.L

    @property
    def r_in(self) -> float:
        """Radius of the image of edge AB."""
        return math.exp(-(TWO_PI - self.eps0) * self.h / self.L)

    def rotated(self, z):
        """Coordinates of z relative to z0 in the rotated frame."""
        return z * cmath.exp(-1j * self.alpha) - self.z0

    def corners(self) -> dict:
        """z-space corner locations keyed by their letter."""
        rot = cmath.exp(1j * self.alpha)
        half = self.L / 2.0
        return {
            "D": (self.z0 - half) * rot,
            "A": (self.z0 - half - 1j * self.h) * rot,
            "B": (self.z0 + half - 1j * self.h) * rot,
            "C": (self.z0 + half) * rot,
        }

    def boundary_corners(self) -> list:
        """Corners in counterclockwise traversal order, starting at D."""
        c = self.corners()
        return [c[name] for name in CORNER_ORDER]

    def scale(self) -> float:
        return abs(self.z0) + self.L + self.h


@dataclass(frozen=True)
class AnnulusInfo:
    """Geometry of the image annulus."""

    r_in: float
    slot_half_angle: float
    start_corner: str = "D"


def annulus_info(rect: Rectangle) -> AnnulusInfo:
    return AnnulusInfo(r_in=rect.r_in, slot_half_angle=rect.eps0 / 2.0)


def to_annulus(rect: Rectangle, z):
    """Image of z (scalar or array) under the rectangle's transform."""
    w = np.asarray(z, dtype=complex) * cmath.exp(-1j * rect.alpha) - rect.z0
    out = np.exp(-1j * rect.angular_rate * w)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def from_annulus(rect: Rectangle, zeta: complex) -> complex:
    """Inverse transform; defined off the slot only.

    Raises BranchCutError when zeta is zero or its argument falls inside
    the slot (within half the slot width of the negative real axis), since
    legitimate roots can never map there.
    """
    zeta = complex(zeta)
    if zeta == 0:
        raise BranchCutError("zeta = 0 has no preimage")
    limit = math.pi - rect.eps0 / 2.0
    if abs(cmath.phase(zeta)) > limit:
        raise BranchCutError(
            f"zeta argument {cmath.phase(zeta):.6f} lies on the slot "
            f"(|arg| > {limit:.6f})"
        )
    w = rect.z0 + 1j * rect.L * cmath.log(zeta) / (TWO_PI - rect.eps0)
    return w * cmath.exp(1j * rect.alpha)


def inverse_derivative_magnitude(rect: Rectangle, zeta: complex) -> float:
    """|dz/dzeta| at zeta, used to convert zeta-space error bounds."""
    return rect.L / ((TWO_PI - rect.eps0) * abs(zeta))


def subdivide(rect: Rectangle, axis: str = None):
    """Split into two children that partition the parent exactly.

    ``axis`` is "L" (bisect the length), "h" (bisect the height), or None
    for the default rule: bisect the longer side, ties toward L.  Children
    inherit alpha and eps0.  Returns (first, second) deterministically:
    for "L" the left/right halves, for "h" the top/bottom halves (top =
    the child containing CD).
    """
    if axis is None:
        axis = "L" if rect.L >= rect.h else "h"
    if axis == "L":
        quarter = rect.L / 4.0
        left = Rectangle(rect.z0 - quarter, rect.alpha, rect.L / 2.0, rect.h, rect.eps0)
        right = Rectangle(rect.z0 + quarter, rect.alpha, rect.L / 2.0, rect.h, rect.eps0)
        return left, right
    if axis == "h":
        half_h = rect.h / 2.0
        top = Rectangle(rect.z0, rect.alpha, rect.L, half_h, rect.eps0)
        bottom = Rectangle(rect.z0 - 1j * half_h, rect.alpha, rect.L, half_h, rect.eps0)
        return top, bottom
    raise InvalidInputError(f"axis must be 'L', 'h', or None, got {axis!r}")


def contains(rect: Rectangle, z, margin: float = 0.0):
    """Whether z lies in the closed rectangle expanded by margin on all sides.

    A slack of a few ulps of the rectangle scale keeps corner points (which
    round-trip through the rotation) inside the closed region.
    """
    if margin < 0:
        raise InvalidInputError("margin must be nonnegative")
    w = np.asarray(z, dtype=complex) * cmath.exp(-1j * rect.alpha) - rect.z0
    slack = 64.0 * np.finfo(float).eps * (rect.scale() + float(np.max(np.abs(np.atleast_1d(z)))))
    half = rect.L / 2.0 + margin + slack
    inside = (
        (np.abs(w.real) <= half)
        & (w.imag <= margin + slack)
        & (w.imag >= -rect.h - margin - slack)
    )
    if np.ndim(z) == 0:
        return bool(inside)
    return inside


def expand(rect: Rectangle, pad: float) -> Rectangle:
    """Grow the rectangle outward by pad on all four sides."""
    if pad < 0:
        raise InvalidInputError("pad must be nonnegative")
    return Rectangle(
        rect.z0 + 1j * pad,
        rect.alpha,
        rect.L + 2.0 * pad,
        rect.h + 2.0 * pad,
        rect.eps0,
    )


def rect_from_corners(corner_a: complex, corner_b: complex, alpha: float = 0.0,
                      eps0: float = 0.1) -> Rectangle:
    """Rectangle spanning two opposite corners, edges aligned with alpha.

    The corners are rotated by exp(-i*alpha); the axis-aligned box they
    span in that frame becomes the rectangle, with CD chosen as the top
    edge (largest rotated imaginary part).
    """
    corner_a, corner_b = complex(corner_a), complex(corner_b)
    w1 = corner_a * cmath.exp(-1j * alpha)
    w2 = corner_b * cmath.exp(-1j * alpha)
    du = abs(w1.real - w2.real)
    dv = abs(w1.imag - w2.imag)
    if du == 0.0 or dv == 0.0:
        raise InvalidInputError("corners must span a nondegenerate rectangle")
    z0 = complex((w1.real + w2.real) / 2.0, max(w1.imag, w2.imag))
    return Rectangle(z0, alpha, du, dv, eps0)
