"""Pure-NumPy fallback for the compiled pairwise kernels.

Same call signatures as ``mfsir.backends._core``; used automatically when the
extension is unavailable, or forced with ``MFSIR_PURE_PYTHON=1``.  Sums are
accumulated in fixed chunk order, so results are reproducible run to run
(chunked vectorised accumulation may differ from the compiled core in the
last few ulps).
"""
import numpy as np

NAME = "numpy"

_CHUNK = 512


def _kernel_vals(r2, family, beta, scale):
    if family == 0:
        return np.full_like(r2, beta)
    if family == 1:
        return beta * np.exp(-0.5 * r2 / (scale * scale))
    u2 = r2 / (scale * scale)
    out = np.zeros_like(r2)
    mask = u2 < 1.0
    out[mask] = beta * np.exp(1.0 - 1.0 / (1.0 - u2[mask]))
    return out


def infection_load_1d(x, states, family, beta, scale, out):
    x = np.asarray(x)
    states = np.asarray(states)
    xinf = x[states == 1]
    sus = states == 0
    out[:] = 0.0
    if xinf.size == 0:
        return
    idx = np.flatnonzero(sus)
    for lo in range(0, idx.size, _CHUNK):
        block = idx[lo : lo + _CHUNK]
        r = x[block, None] - xinf[None, :]
        out[block] = _kernel_vals(r * r, family, beta, scale).sum(axis=1)


def infection_load_nd(x, states, family, beta, scale, out):
    x = np.asarray(x)
    states = np.asarray(states)
    xinf = x[states == 1]
    out[:] = 0.0
    if xinf.shape[0] == 0:
        return
    idx = np.flatnonzero(states == 0)
    for lo in range(0, idx.size, _CHUNK):
        block = idx[lo : lo + _CHUNK]
        diff = x[block, None, :] - xinf[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[block] = _kernel_vals(r2, family, beta, scale).sum(axis=1)


def drift_sum_1d(x, states, family, a, ell, w, out):
    x = np.asarray(x)
    states = np.asarray(states)
    n = x.shape[0]
    out[:] = 0.0
    if family == 0:
        return
    inv_l2 = 1.0 / (ell * ell)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        r = x[None, :] - x[lo:hi, None]
        v = a * r / (1.0 + r * r * inv_l2)
        if family == 2:
            v *= np.asarray(w)[states[lo:hi, None], states[None, :]]
        out[lo:hi] = v.sum(axis=1)


def drift_sum_nd(x, states, family, a, ell, w, out):
    x = np.asarray(x)
    states = np.asarray(states)
    n = x.shape[0]
    out[:] = 0.0
    if family == 0:
        return
    inv_l2 = 1.0 / (ell * ell)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = x[None, :, :] - x[lo:hi, None, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        c = a / (1.0 + r2 * inv_l2)
        if family == 2:
            c *= np.asarray(w)[states[lo:hi, None], states[None, :]]
        out[lo:hi] = np.einsum("ij,ijk->ik", c, diff)


def kernel_field_1d(targets, sources, weights, family, beta, scale, out):
    targets = np.asarray(targets)
    sources = np.asarray(sources)
    weights = np.asarray(weights)
    for lo in range(0, targets.size, _CHUNK):
        hi = min(lo + _CHUNK, targets.size)
        r = targets[lo:hi, None] - sources[None, :]
        out[lo:hi] = (_kernel_vals(r * r, family, beta, scale) * weights).sum(axis=1)


def drift_field_1d(targets, e, sources, source_states, weights, family, a, ell, w, out):
    targets = np.asarray(targets)
    sources = np.asarray(sources)
    weights = np.asarray(weights)
    out[:] = 0.0
    if family == 0:
        return
    inv_l2 = 1.0 / (ell * ell)
    wei = weights
    if family == 2:
        wei = weights * np.asarray(w)[e, np.asarray(source_states)]
    for lo in range(0, targets.size, _CHUNK):
        hi = min(lo + _CHUNK, targets.size)
        r = sources[None, :] - targets[lo:hi, None]
        out[lo:hi] = (a * r / (1.0 + r * r * inv_l2) * wei).sum(axis=1)
