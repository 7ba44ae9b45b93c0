"""Shared 2x2 Gaussian-estimate primitives.

All positions are relative vectors expressed in the owning agent's local
frame, measured in body lengths (bl).  The local frame is translation-relative
but world-axis-aligned: it moves with the agent and never rotates, so
propagating a stored estimate under agent motion is a pure vector shift.

Covariances are 2x2 symmetric PSD matrices in bl^2; the scalar uncertainty
("entropy") of an estimate is the determinant of its covariance, in bl^4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Eigenvalue floor below which a covariance counts as singular for inversion.
EPS_INV = 1e-9


class SingularCovarianceError(ValueError):
    """A covariance could not be inverted safely.

    Usually signals a missing noise floor upstream, e.g. a sensor model that
    produced an exactly-zero covariance at its optimum.
    """


def check_cov(c, tol=1e-9):
    """Validate that ``c`` is a symmetric PSD 2x2 matrix and return it.

    Symmetry is required within ``tol``; eigenvalues may dip to ``-tol`` to
    absorb round-off.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (2, 2):
        raise ValueError(f"expected 2x2 covariance, got shape {c.shape}")
    if abs(c[0, 1] - c[1, 0]) > tol:
        raise ValueError("covariance is not symmetric")
    if float(np.linalg.eigvalsh(c)[0]) < -tol:
        raise ValueError("covariance is not positive semi-definite")
    return c


@dataclass
class GaussianEstimate:
    """Relative-position mean with its 2x2 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)

    def copy(self) -> "GaussianEstimate":
        return GaussianEstimate(self.mean.copy(), self.cov.copy())


def _min_eig_2x2(c):
    # Smallest eigenvalue of a symmetric 2x2 without calling eigvalsh.
    half_tr = 0.5 * (c[0, 0] + c[1, 1])
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    disc = half_tr * half_tr - det
    return half_tr - np.sqrt(max(disc, 0.0))


def inv2(c):
    """Closed-form 2x2 inverse with a singularity guard.

    Raises:
        SingularCovarianceError: if the smallest eigenvalue is at or below
            ``EPS_INV``.
    """
    if _min_eig_2x2(c) <= EPS_INV:
        raise SingularCovarianceError(
            f"covariance with min eigenvalue <= {EPS_INV} cannot be inverted"
        )
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    return np.array(
        [[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]], dtype=float
    ) / det


def fuse(a: GaussianEstimate, b: GaussianEstimate) -> GaussianEstimate:
    """Information-form (error-ellipse) fusion of two independent estimates.

    cov  = (A^-1 + B^-1)^-1
    mean = cov (A^-1 a + B^-1 b)

    The result's determinant never exceeds that of either input.
    """
    ia = inv2(a.cov)
    ib = inv2(b.cov)
    cov = inv2_raw(ia + ib)
    mean = cov @ (ia @ a.mean + ib @ b.mean)
    return GaussianEstimate(mean, cov)


def inv2_raw(c):
    # Unchecked 2x2 inverse for matrices known to be well-conditioned
    # (sums of inverses of checked inputs).
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    return np.array(
        [[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]], dtype=float
    ) / det


def propagate(e: GaussianEstimate, shift, growth) -> GaussianEstimate:
    """Shift the mean and grow the covariance (prediction under agent motion).

    ``shift`` is the frame shift p(t-1) - p(t) for quantities stored relative
    to the moving agent; ``growth`` is the additive process-noise bound.
    """
    shift = np.asarray(shift, dtype=float).reshape(2)
    growth = np.asarray(growth, dtype=float).reshape(2, 2)
    return GaussianEstimate(e.mean + shift, e.cov + growth)


def entropy(cov) -> float:
    """Scalar uncertainty of a covariance: its determinant (bl^4)."""
    c = np.asarray(cov, dtype=float)
    return float(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0])
