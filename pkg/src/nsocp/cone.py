"""Lorentz (second-order) cone primitives.

A point ``y`` of R^m is split as ``(y0, yhat)`` with ``y0`` scalar and
``yhat`` of length ``m - 1``; the cone is ``{y : y0 >= ||yhat||}``.
Every point decomposes as ``y = lam1 * u1 + lam2 * u2`` where

    lam1 = y0 - ||yhat||,   lam2 = y0 + ||yhat||,
    u1 = (1, -w) / 2,       u2 = (1, w) / 2,

with ``w = yhat / ||yhat||`` whenever ``yhat != 0`` and any unit vector
otherwise.  Membership, projection and the reflection ``(y0, -yhat)``
are all cheap consequences of this decomposition; everything here is
exact up to floating point, no iteration involved.

Only ``m >= 2`` is supported: one-dimensional cone constraints are
ordinary scalar inequalities and are rejected upstream at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# yhat is treated as exactly zero below this absolute norm, which keeps
# the non-canonical branch from triggering on roundoff.
ZERO_HAT_TOL = 1e-14

# Caller-supplied axis vectors may deviate from unit norm by this much.
UNIT_TOL = 1e-8


class ConeError(ValueError):
    """Base class for malformed cone inputs."""


class DimensionMismatch(ConeError):
    """Vector lengths do not agree with the declared cone dimension."""


class NonUnitChoice(ConeError):
    """A caller-supplied axis vector is not of unit norm."""


@dataclass(frozen=True)
class SocVector:
    """A point of R^m with ``m >= 2``, stored as ``(y0, yhat)``."""

    y0: float
    yhat: np.ndarray

    def __post_init__(self):
        hat = np.atleast_1d(np.asarray(self.yhat, dtype=float))
        if hat.ndim != 1 or hat.size < 1:
            raise DimensionMismatch(
                f"yhat must be a vector of length m-1 >= 1, got shape {hat.shape}"
            )
        object.__setattr__(self, "y0", float(self.y0))
        object.__setattr__(self, "yhat", hat)
        if not np.isfinite(self.y0) or not np.all(np.isfinite(hat)):
            raise ConeError("SocVector components must be finite")

    @property
    def m(self) -> int:
        return 1 + self.yhat.size

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.y0], self.yhat))

    @staticmethod
    def from_array(arr) -> "SocVector":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DimensionMismatch(f"need a flat vector of length >= 2, got shape {arr.shape}")
        return SocVector(arr[0], arr[1:])

    def norm(self) -> float:
        return float(np.sqrt(self.y0 ** 2 + float(self.yhat @ self.yhat)))


class ConeMembership(Enum):
    INTERIOR = "Interior"
    BOUNDARY_NONZERO = "BoundaryNonzero"
    ORIGIN = "Origin"
    OUTSIDE = "Outside"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues and eigenvectors of a point relative to its cone.

    ``canonical`` is True when ``yhat != 0`` forced the axis ``w``;
    ``w_choice_ignored`` flags that a caller-supplied axis was discarded
    because the canonical one took precedence.
    """

    lambda1: float
    lambda2: float
    u1: np.ndarray
    u2: np.ndarray
    w: np.ndarray
    canonical: bool
    w_choice_ignored: bool = False

    def reconstruct(self) -> np.ndarray:
        return self.lambda1 * self.u1 + self.lambda2 * self.u2


# -- array-level core (used directly by solver hot loops) --------------------

def eigenvalues_arr(y: np.ndarray) -> tuple[float, float]:
    """(lam1, lam2) of a flat vector ``y`` of length >= 2."""
    hat_norm = float(np.linalg.norm(y[1:]))
    return float(y[0]) - hat_norm, float(y[0]) + hat_norm


def project_arr(y: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a flat vector onto its Lorentz cone."""
    y = np.asarray(y, dtype=float)
    y0 = y[0]
    hat = y[1:]
    hat_norm = float(np.linalg.norm(hat))
    lam1 = y0 - hat_norm
    lam2 = y0 + hat_norm
    if lam1 >= 0.0:
        return y.copy()
    if lam2 <= 0.0:
        return np.zeros_like(y)
    # lam1 < 0 < lam2 implies hat_norm > 0, so the axis is well defined.
    out = np.empty_like(y)
    out[0] = 0.5 * lam2
    out[1:] = (0.5 * lam2 / hat_norm) * hat
    return out


# -- SocVector-level API ------------------------------------------------------

def spectral_decompose(y: SocVector, w_choice=None) -> SpectralDecomposition:
    """Spectral decomposition of ``y``.

    When ``yhat`` vanishes the axis ``w`` is ambiguous: a caller-supplied
    unit ``w_choice`` is used if given, else the first canonical basis
    direction.  When ``yhat`` does not vanish the canonical axis wins and
    any ``w_choice`` is ignored (flagged on the result).

    Raises
    ------
    NonUnitChoice
        if ``w_choice`` deviates from unit norm by more than 1e-8.
    DimensionMismatch
        if ``w_choice`` has the wrong length.
    """
    hat_norm = float(np.linalg.norm(y.yhat))
    choice_ignored = False
    if w_choice is not None:
        w_choice = np.atleast_1d(np.asarray(w_choice, dtype=float))
        if w_choice.size != y.m - 1:
            raise DimensionMismatch(
                f"w_choice has length {w_choice.size}, expected {y.m - 1}"
            )
        if abs(float(np.linalg.norm(w_choice)) - 1.0) > UNIT_TOL:
            raise NonUnitChoice(f"w_choice norm {np.linalg.norm(w_choice)!r} is not 1")
    if hat_norm > ZERO_HAT_TOL:
        w = y.yhat / hat_norm
        canonical = True
        choice_ignored = w_choice is not None
    else:
        if w_choice is not None:
            w = w_choice.copy()
        else:
            w = np.zeros(y.m - 1)
            w[0] = 1.0
        canonical = False
    half = 0.5
    u1 = np.concatenate(([half], -half * w))
    u2 = np.concatenate(([half], half * w))
    return SpectralDecomposition(
        lambda1=y.y0 - hat_norm,
        lambda2=y.y0 + hat_norm,
        u1=u1,
        u2=u2,
        w=w,
        canonical=canonical,
        w_choice_ignored=choice_ignored,
    )


def project(y: SocVector) -> SocVector:
    """Orthogonal projection of ``y`` onto its Lorentz cone."""
    return SocVector.from_array(project_arr(y.as_array()))


def classify(y: SocVector, tol: float) -> ConeMembership:
    """Membership of ``y`` relative to the cone at tolerance ``tol``.

    Decided by a fixed if-chain so ties near the tolerance are broken
    deterministically: interior first, then origin, then nonzero
    boundary, everything else is outside.
    """
    if tol <= 0:
        raise ConeError("tol must be positive")
    lam1, lam2 = eigenvalues_arr(y.as_array())
    if lam1 > tol:
        return ConeMembership.INTERIOR
    if y.norm() <= tol:
        return ConeMembership.ORIGIN
    if abs(lam1) <= tol and lam2 > tol:
        return ConeMembership.BOUNDARY_NONZERO
    return ConeMembership.OUTSIDE


def gamma_reflect(y: SocVector) -> SocVector:
    """The reflection ``(y0, -yhat)``; an involution fixing the axis."""
    return SocVector(y.y0, -y.yhat)
