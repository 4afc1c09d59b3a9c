"""Demixing-matrix estimation and extraction.

Row convention: row m of W[i] is the conjugate-transposed demixing vector
for stream m, so separated spectra are Y[i, j, m] = (W[i] @ x_ij)[m].

The per-source update is the iterative projection step: build the
variance-weighted frame covariance V, solve (W V) w = e_m, renormalize to
w^H V w = 1.  With the source variances held fixed, a full sweep never
increases the demixing cost.
"""

import numpy as np

from .core import DemixingStack, Spectrogram

# diagonal loading applied once when a solve hits a singular system
LOADING_REL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    """Demixing system stayed singular after diagonal loading."""


def weighted_covariance(X: Spectrogram, r_m: np.ndarray, i: int) -> np.ndarray:
    """V = (1/J) sum_j x_ij x_ij^H / r_m[i, j] for frequency bin ``i``."""
    r_bin = np.asarray(r_m, dtype=np.float64)[i]
    if np.any(r_bin <= 0.0):
        raise ValueError(f"variance weights must be strictly positive at bin {i}")
    x = X.data[i]  # (J, M)
    return (x.T / r_bin) @ x.conj() / x.shape[0]


def weighted_covariances_all(X_data: np.ndarray, r_m: np.ndarray) -> np.ndarray:
    """Batched covariances, (I, M, M), same math as :func:`weighted_covariance`."""
    if np.any(r_m <= 0.0):
        raise ValueError("variance weights must be strictly positive")
    J = X_data.shape[1]
    weighted = X_data / r_m[:, :, None]
    return np.einsum("ijm,ijn->imn", weighted, X_data.conj()) / J


def _normalize_rows(w, V):
    # w: (..., M) solutions; V: (..., M, M); returns rows with w^H V w = 1
    denom = np.einsum("...m,...mn,...n->...", w.conj(), V, w).real
    if np.any(denom <= 0.0) or not np.all(np.isfinite(denom)):
        raise SingularMatrixError("covariance quadratic form is not positive")
    return w / np.sqrt(denom)[..., None]


def ip_update(W_i: np.ndarray, V: np.ndarray, m: int) -> np.ndarray:
    """One iterative-projection update; returns the new demixing vector.

    The caller stores the conjugate of the returned vector as row ``m`` of
    W_i.  A singular system gets one retry with trace-scaled diagonal
    loading on V.
    """
    M = W_i.shape[0]
    e_m = np.zeros(M, dtype=complex)
    e_m[m] = 1.0
    try:
        w = np.linalg.solve(W_i @ V, e_m)
        return _normalize_rows(w, V)
    except np.linalg.LinAlgError:
        # absolute floor keeps all-zero bins (silent DC/Nyquist) solvable
        load = max(LOADING_REL * np.trace(V).real / M, 1e-30)
        loaded = V + load * np.eye(M)
        try:
            w = np.linalg.solve(W_i @ loaded, e_m)
            return _normalize_rows(w, loaded)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"singular demixing system for stream {m}") from exc


def ip_update_all_bins(W: np.ndarray, V: np.ndarray, m: int) -> None:
    """In-place row-m update of every bin's demixing matrix.

    W is (I, M, M), V is (I, M, M); identical math to :func:`ip_update`,
    batched over bins.
    """
    I, M, _ = W.shape
    e_m = np.zeros((I, M, 1), dtype=complex)
    e_m[:, m, 0] = 1.0
    try:
        w = np.linalg.solve(W @ V, e_m)[:, :, 0]
        W[:, m, :] = _normalize_rows(w, V).conj()
    except np.linalg.LinAlgError:
        load = LOADING_REL * np.trace(V, axis1=1, axis2=2).real / M
        loaded = V + np.maximum(load, 1e-30)[:, None, None] * np.eye(M)
        try:
            w = np.linalg.solve(W @ loaded, e_m)[:, :, 0]
            W[:, m, :] = _normalize_rows(w, loaded).conj()
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"singular demixing system for stream {m}") from exc


def demix_data(W: np.ndarray, X_data: np.ndarray) -> np.ndarray:
    """Y[i, j, m] = sum_c W[i, m, c] X[i, j, c]."""
    return np.einsum("imc,ijc->ijm", W, X_data)


def demix(W, X: Spectrogram) -> Spectrogram:
    """Apply a demixing stack to a mixture spectrogram."""
    mats = W.matrices if isinstance(W, DemixingStack) else np.asarray(W)
    return Spectrogram(
        data=demix_data(mats, X.data),
        window_len_samples=X.window_len_samples,
        hop_samples=X.hop_samples,
        sample_rate=X.sample_rate,
    )


def cost(W, Y, r) -> float:
    """Demixing cost: -2J sum_i log|det W_i| + sum_ijm (log r + |y|^2 / r).

    ``r`` is (I, J, M) or a length-M sequence of (I, J) matrices.  Returns
    +inf when any W_i is singular.
    """
    mats = W.matrices if isinstance(W, DemixingStack) else np.asarray(W)
    y = Y.data if isinstance(Y, Spectrogram) else np.asarray(Y)
    r = np.stack(r, axis=2) if isinstance(r, (list, tuple)) else np.asarray(r)
    if np.any(r <= 0.0):
        raise ValueError("source variances must be strictly positive")
    J = y.shape[1]
    _, logdet = np.linalg.slogdet(mats)
    if not np.all(np.isfinite(logdet)):
        return np.inf
    power = y.real**2 + y.imag**2
    return float(-2.0 * J * np.sum(logdet) + np.sum(np.log(r) + power / r))


def project_back(W, Y, ref: int):
    """Rescale separated spectra onto their image at the reference channel.

    y_img[i, j, m] = [W_i^{-1}]_{ref, m} * y[i, j, m]; when Y was demixed
    with W, the images of all streams sum to the mixture at ``ref``.
    """
    mats = W.matrices if isinstance(W, DemixingStack) else np.asarray(W)
    y = Y.data if isinstance(Y, Spectrogram) else np.asarray(Y)
    M = mats.shape[1]
    if not (0 <= ref < M):
        raise IndexError(f"reference channel {ref} out of range for {M} streams")
    try:
        inv = np.linalg.inv(mats)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("cannot project back through a singular stack") from exc
    img = inv[:, ref, :][:, None, :] * y
    if isinstance(Y, Spectrogram):
        return Spectrogram(
            data=img,
            window_len_samples=Y.window_len_samples,
            hop_samples=Y.hop_samples,
            sample_rate=Y.sample_rate,
        )
    return img
