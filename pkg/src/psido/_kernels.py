"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the environment:

* ``PSIDO_BACKEND=numba`` (default when numba imports) compiles the inner
  loops with ``@njit(parallel=...)``.
* ``PSIDO_BACKEND=numpy`` forces the vectorized numpy implementations.

``PSIDO_THREADS`` caps the numba worker count.  Both paths compute
identical values (up to floating-point reassociation); ``benchmarks/``
contains a script comparing them.
"""

import os

import numpy as np

_requested = os.environ.get("PSIDO_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"PSIDO_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = _requested != "numpy"
if USE_NUMBA:
    try:
        import numba
        from numba import njit, prange
    except ImportError:
        if _requested == "numba":
            raise
        USE_NUMBA = False

if USE_NUMBA:
    _nthreads = os.environ.get("PSIDO_THREADS", "").strip()
    if _nthreads:
        numba.set_num_threads(max(1, min(int(_nthreads), numba.config.NUMBA_NUM_THREADS)))

BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# kernel: single-symbol operator apply
#
# out[i] = sum_k  E[i, k] * uhat[k]
#
# E already carries the phase, the symbol table and the dq-xi weight, so this
# is a plain complex matvec.  Kept as a kernel so both backends are exercised
# by the same call site (and benchmarkable against each other).
# ---------------------------------------------------------------------------

def _apply_quantized_np(E, uhat):
    return E @ uhat


if USE_NUMBA:

    @njit(parallel=True, fastmath=False, cache=True)
    def _apply_quantized_nb(E, uhat):  # pragma: no cover - exercised via wrapper
        n, m = E.shape
        out = np.zeros(n, dtype=np.complex128)
        for i in prange(n):
            acc = 0.0 + 0.0j
            for k in range(m):
                acc += E[i, k] * uhat[k]
            out[i] = acc
        return out


def apply_quantized(E, uhat):
    if USE_NUMBA:
        return _apply_quantized_nb(np.ascontiguousarray(E), np.ascontiguousarray(uhat))
    return _apply_quantized_np(E, uhat)


# ---------------------------------------------------------------------------
# kernel: double-symbol operator apply (1-d)
#
# out[i] = dqxi * h * sum_k sum_j  phase[i,k] * conj(phase[j,k]) * A[i,k,j] * u[j]
#
# phase[i,k] = exp(i x_i xi_k); A is the tabulated a(x_i, xi_k, x_j).
# ---------------------------------------------------------------------------

def _apply_double_np(A, phase, u, weight):
    # t[i,k] = sum_j A[i,k,j] * (u[j] * conj(phase[j,k]))
    src = u[:, None] * np.conj(phase)          # (j, k)
    t = np.einsum("ikj,jk->ik", A, src)
    return weight * np.einsum("ik,ik->i", phase, t)


if USE_NUMBA:

    @njit(parallel=True, fastmath=False, cache=True)
    def _apply_double_nb(A, phase, u, weight):  # pragma: no cover
        n, m, nj = A.shape
        out = np.zeros(n, dtype=np.complex128)
        for i in prange(n):
            acc = 0.0 + 0.0j
            for k in range(m):
                inner = 0.0 + 0.0j
                for j in range(nj):
                    inner += A[i, k, j] * u[j] * np.conj(phase[j, k])
                acc += phase[i, k] * inner
            out[i] = acc * weight
        return out


def apply_double(A, phase, u, weight):
    if USE_NUMBA:
        return _apply_double_nb(
            np.ascontiguousarray(A), np.ascontiguousarray(phase),
            np.ascontiguousarray(u), weight,
        )
    return _apply_double_np(A, phase, u, weight)


# ---------------------------------------------------------------------------
# kernel: diagonal gather-sum for the double->single symbol reduction (1-d)
#
# out[i, k] = sum_m  w[m] * B[i, clip(k + m - m0, 0, nk-1), m]
#
# B[i, q, m] is the windowed y-transform of the probed double symbol at
# x_i, tabulated frequency xi_q and transform node eta_m = (m - m0) * dxi.
# Frequencies pushed past the tabulated edge are clamped (the weight w has
# decayed to ~0 there for admissible windows).
# ---------------------------------------------------------------------------

def _reduce_gather_np(B, w, m0):
    ni, nk, nm = B.shape
    out = np.zeros((ni, nk), dtype=np.complex128)
    ks = np.arange(nk)
    for m in range(nm):
        if w[m] == 0.0:
            continue
        idx = np.clip(ks + m - m0, 0, nk - 1)
        out += w[m] * B[:, idx, m]
    return out


if USE_NUMBA:

    @njit(parallel=True, fastmath=False, cache=True)
    def _reduce_gather_nb(B, w, m0):  # pragma: no cover
        ni, nk, nm = B.shape
        out = np.zeros((ni, nk), dtype=np.complex128)
        for i in prange(ni):
            for k in range(nk):
                acc = 0.0 + 0.0j
                for m in range(nm):
                    if w[m] == 0.0:
                        continue
                    q = k + m - m0
                    if q < 0:
                        q = 0
                    elif q >= nk:
                        q = nk - 1
                    acc += w[m] * B[i, q, m]
                out[i, k] = acc
        return out


def reduce_gather(B, w, m0):
    if USE_NUMBA:
        return _reduce_gather_nb(np.ascontiguousarray(B), np.ascontiguousarray(w), m0)
    return _reduce_gather_np(B, w, m0)


# ---------------------------------------------------------------------------
# kernel: Hoelder seminorm lag sweep (1-d)
#
# max over grid pairs (i, i+d) of |f[i+d] - f[i]| / (d*h)^s, for lags
# d = 1..dmax (non-circular: pairs stay inside the box).
# ---------------------------------------------------------------------------

def _hoelder_lags_np(f, lags, h, s):
    best = 0.0
    for d in lags:
        diff = np.max(np.abs(f[d:] - f[:-d]))
        best = max(best, diff / (d * h) ** s)
    return best


if USE_NUMBA:

    @njit(parallel=False, fastmath=False, cache=True)
    def _hoelder_lags_nb(f, lags, h, s):  # pragma: no cover
        best = 0.0
        n = f.shape[0]
        for li in range(lags.shape[0]):
            d = lags[li]
            m = 0.0
            for i in range(n - d):
                v = abs(f[i + d] - f[i])
                if v > m:
                    m = v
            r = m / (d * h) ** s
            if r > best:
                best = r
        return best


def hoelder_lags(f, lags, h, s):
    lags = np.asarray(lags, dtype=np.int64)
    if USE_NUMBA:
        return _hoelder_lags_nb(np.ascontiguousarray(f), lags, float(h), float(s))
    return _hoelder_lags_np(f, lags, float(h), float(s))


# ---------------------------------------------------------------------------
# kernel: weighted oscillatory lattice sum (two tensor axes)
#
# value = sum_{a,b} wy[a] * we[b] * exp(-i y[a] eta[b]) * amp[a, b] * chi[a, b]
# ---------------------------------------------------------------------------

def _osc_sum_np(amp, y, eta, wy, we, chi):
    phase = np.exp(-1j * np.outer(y, eta))
    integ = amp * chi * phase
    return complex(wy @ integ @ we)


if USE_NUMBA:

    @njit(parallel=True, fastmath=False, cache=True)
    def _osc_sum_nb(amp, y, eta, wy, we, chi):  # pragma: no cover
        na, nb = amp.shape
        re = 0.0
        im = 0.0
        for a in prange(na):
            accr = 0.0
            acci = 0.0
            for b in range(nb):
                ph = -y[a] * eta[b]
                c = np.cos(ph)
                s = np.sin(ph)
                z = amp[a, b] * chi[a, b] * complex(c, s) * we[b]
                accr += z.real
                acci += z.imag
            re += accr * wy[a]
            im += acci * wy[a]
        return complex(re, im)


def osc_sum(amp, y, eta, wy, we, chi):
    if USE_NUMBA:
        return _osc_sum_nb(
            np.ascontiguousarray(amp.astype(np.complex128)),
            np.ascontiguousarray(y), np.ascontiguousarray(eta),
            np.ascontiguousarray(wy), np.ascontiguousarray(we),
            np.ascontiguousarray(chi.astype(np.complex128)),
        )
    return _osc_sum_np(amp, y, eta, wy, we, chi)
