"""Graph Fourier bases: truncated Laplacian eigendecomposition and the GFT."""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import check_positive, check_signal
from .exceptions import InvalidParameterError, NumericalFailure

__all__ = [
    "SpectralBasis",
    "eigendecompose",
    "gft",
    "igft",
    "spectrum_report",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class SpectralBasis:
    """The ``R`` lowest-frequency Laplacian eigenpairs of a graph.

    Attributes
    ----------
    eigenvalues : ndarray of shape (R,)
        Ascending graph frequencies.
    eigenvectors : ndarray of shape (n, R)
        Orthonormal Fourier vectors, one per column.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return self.eigenvectors.shape[0]

    @property
    def R(self):
        return self.eigenvectors.shape[1]

    def truncate(self, R):
        if R > self.R:
            raise InvalidParameterError(f"cannot truncate a basis of size {self.R} to {R}")
        return SpectralBasis(self.eigenvalues[:R].copy(), self.eigenvectors[:, :R].copy())


def _fix_signs(U):
    # largest-magnitude entry of every column made positive; argmax picks the first
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigendecompose(L, R):
    """Return the ``R`` smallest eigenpairs of the Laplacian ``L``.

    A dense symmetric solver is used, which is adequate for graphs with up
    to a few thousand nodes. Each eigenvector is signed so its
    largest-magnitude entry is positive.

    Raises
    ------
    NumericalFailure
        If any eigen-residual ``||L u - lambda u||`` exceeds
        ``1e-6 * max(1, lambda)``.
    """
    n = L.n
    check_positive(R, "R", integer=True)
    if R > n:
        raise InvalidParameterError(f"R={R} exceeds the graph size n={n}")
    dense = L.toarray()
    try:
        lam, U = scipy.linalg.eigh(dense, subset_by_index=[0, R - 1], driver="evr")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    U = _fix_signs(U)
    # L is PSD; negative values are roundoff around the zero eigenvalue
    lam = np.maximum(lam, 0.0)
    resid = np.linalg.norm(dense @ U - U * lam, axis=0)
    bad = resid > _RESIDUAL_TOL * np.maximum(1.0, np.abs(lam))
    if bad.any():
        k = int(np.argmax(bad))
        raise NumericalFailure(
            f"eigenpair {k} has residual {resid[k]:.3e} (lambda={lam[k]:.6g})"
        )
    return SpectralBasis(lam, U)


def gft(basis, f):
    """Fourier coefficients ``<f, u_k>`` for the columns of the basis."""
    f = check_signal(f, basis.n)
    return basis.eigenvectors.T @ f


def igft(basis, coeffs):
    """Synthesize ``sum_k coeffs[k] * u_k``."""
    coeffs = check_signal(coeffs, basis.R, name="coefficients")
    return basis.eigenvectors @ coeffs


def spectrum_report(basis, f):
    """Magnitude spectrum of ``f`` as ``(frequency, |coefficient|)`` pairs."""
    mags = np.abs(gft(basis, f))
    return [(float(lam), float(m)) for lam, m in zip(basis.eigenvalues, mags)]


def write_spectrum_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "magnitude"])
        for lam, mag in report:
            writer.writerow([repr(float(lam)), repr(float(mag))])


def read_spectrum_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["lambda", "magnitude"]:
            raise InvalidParameterError(f"unexpected spectrum header {header}")
        return [(float(a), float(b)) for a, b in reader]
