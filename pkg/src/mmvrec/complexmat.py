"""Complex matrices stored as paired real/imaginary float64 planes.

This split form is the interchange carrier for every matrix in the package
(pilot matrices, signals, measurements, residuals, covariances).  Solvers
convert to native ``complex128`` internally; the split planes are what cross
module and file boundaries.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractViolation,
    MatrixFormatError,
    MatrixTruncatedError,
    MatrixValueError,
)

_CMAT_MAGIC = "CMAT1"


@dataclass(frozen=True)
class ComplexMatrix:
    """Dense complex matrix held as two real row-major float64 planes."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.ascontiguousarray(np.asarray(self.re, dtype=np.float64))
        im = np.ascontiguousarray(np.asarray(self.im, dtype=np.float64))
        if re.ndim != 2 or im.ndim != 2:
            raise ContractViolation("ComplexMatrix planes must be 2-D")
        if re.shape != im.shape:
            raise ContractViolation(
                f"real/imag plane shapes differ: {re.shape} vs {im.shape}"
            )
        if not (np.isfinite(re).all() and np.isfinite(im).all()):
            raise ContractViolation("ComplexMatrix entries must be finite")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def rows(self) -> int:
        return self.re.shape[0]

    @property
    def cols(self) -> int:
        return self.re.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @staticmethod
    def from_complex(z) -> "ComplexMatrix":
        z = np.atleast_2d(np.asarray(z))
        return ComplexMatrix(np.real(z).copy(), np.imag(z).copy())

    def allclose(self, other: "ComplexMatrix", atol=1e-12) -> bool:
        return np.allclose(self.re, other.re, atol=atol, rtol=0.0) and np.allclose(
            self.im, other.im, atol=atol, rtol=0.0
        )


def complex_matmul(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Split-form complex product: (re_a re_b - im_a im_b, im_a re_b + re_a im_b)."""
    if a.cols != b.rows:
        raise ContractViolation(
            f"inner dimensions do not match: {a.shape} @ {b.shape}"
        )
    re = a.re @ b.re - a.im @ b.im
    im = a.im @ b.re + a.re @ b.im
    return ComplexMatrix(re, im)


def save_cmat(mat: ComplexMatrix, path) -> None:
    """Write the ``.cmat`` interchange format.

    Text header ``CMAT1 rows cols`` followed by raw little-endian float64,
    row-major, full real plane then full imaginary plane.  Round-trips
    bit-exactly.
    """
    header = f"{_CMAT_MAGIC} {mat.rows} {mat.cols}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(mat.re.astype("<f8").tobytes(order="C"))
        fh.write(mat.im.astype("<f8").tobytes(order="C"))


def load_cmat(path) -> ComplexMatrix:
    """Read the ``.cmat`` interchange format written by :func:`save_cmat`."""
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    try:
        parts = header.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise MatrixFormatError(f"{path}: header is not ASCII") from exc
    if len(parts) != 3 or parts[0] != _CMAT_MAGIC:
        raise MatrixFormatError(f"{path}: malformed header {header!r}")
    try:
        rows, cols = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: non-integer dimensions in header") from exc
    if rows <= 0 or cols <= 0:
        raise MatrixValueError(f"{path}: empty matrix ({rows}x{cols}) not allowed")
    expected = 2 * rows * cols * struct.calcsize("<d")
    if len(payload) != expected:
        raise MatrixTruncatedError(
            f"{path}: expected {expected} payload bytes, found {len(payload)}",
            expected_bytes=expected,
            found_bytes=len(payload),
        )
    data = np.frombuffer(payload, dtype="<f8")
    re = data[: rows * cols].reshape(rows, cols)
    im = data[rows * cols :].reshape(rows, cols)
    if not (np.isfinite(re).all() and np.isfinite(im).all()):
        raise MatrixValueError(f"{path}: non-finite entries in payload")
    return ComplexMatrix(re.copy(), im.copy())
