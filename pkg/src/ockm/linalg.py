"""SVD, orthogonal Procrustes and the least-squares codebook solve."""

import numpy as np

from .errors import ConfigError, NumericError

PINV_RTOL = 1e-10


def svd(a):
    """Thin SVD ``a = u @ diag(s) @ v.T`` with ``s`` non-negative and non-increasing."""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericError("svd input contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        fro = float(np.linalg.norm(a))
        raise NumericError(
            f"svd did not converge on a {a.shape[0]}x{a.shape[1]} matrix "
            f"(frobenius norm {fro:.3e}, max abs entry {np.max(np.abs(a)):.3e})"
        ) from exc
    return u, s, vt.T


def procrustes(x, y):
    """Orthogonal R minimising ||x - R y||_F for column-sample matrices x, y (P x N)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigError(f"procrustes needs equal shapes, got {x.shape} and {y.shape}")
    return rotation_from_cross(x @ y.T)


def rotation_from_cross(cross):
    """U V^T from the SVD of a P x P cross-covariance X Y^T."""
    u, _, v = svd(cross)
    return u @ v.T


def pinv(a, rtol: float = PINV_RTOL):
    """Pseudoinverse; singular values below ``rtol * max`` count as zero."""
    u, s, v = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s >= rtol * s[0]
    return (v[:, keep] / s[keep]) @ u[:, keep].T


def lsq_from_normal(zbt, bbt):
    """D = (Z B^T)(B B^T)^+ given the two accumulated products."""
    return np.asarray(zbt, dtype=np.float64) @ pinv(bbt)


def lsq_codebook(z, b):
    """Minimum-norm D minimising ||z - D b||_F; z is S x N, b is KC x N."""
    z = np.asarray(z, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if z.shape[1] != b.shape[1]:
        raise ConfigError(f"lsq_codebook shapes not conformable: {z.shape} vs {b.shape}")
    return lsq_from_normal(z @ b.T, b @ b.T)
