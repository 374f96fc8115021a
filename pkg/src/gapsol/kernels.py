"""Pointwise hot kernels: power-law nonlinearity evaluation and decay-shell
maxima.

These inner loops run thousands of times inside the descent and fitting
paths.  Each kernel ships in two interchangeable implementations: a numba
``@njit`` version (compiled lazily, cached on disk) and a pure-numpy
fallback.  The active path is chosen at import time; set the environment
variable ``GAPSOL_DISABLE_NUMBA=1`` to force the numpy path.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np


def _env_disabled() -> bool:
    return os.environ.get("GAPSOL_DISABLE_NUMBA", "0").lower() not in ("0", "", "false")


# -- numpy implementations -----------------------------------------------------

def power_f_numpy(u, h, p):
    """f = h * |u|^(p-2) * u, elementwise."""
    if p == 4.0:
        return h * u * u * u
    return h * np.abs(u) ** (p - 2.0) * u


def power_big_f_numpy(u, h, p):
    """F = h * |u|^p / p, the primitive of f in u."""
    if p == 4.0:
        u2 = u * u
        return h * (u2 * u2) * 0.25
    return h * np.abs(u) ** p / p


def power_fprime_numpy(u, h, p):
    """f'_u = h * (p-1) * |u|^(p-2)."""
    if p == 4.0:
        return 3.0 * h * u * u
    return h * (p - 1.0) * np.abs(u) ** (p - 2.0)


def power_f_and_big_f_numpy(u, h, p):
    """Fused (f, F) evaluation."""
    if p == 4.0:
        u2 = u * u
        return h * u2 * u, h * (u2 * u2) * 0.25
    a = np.abs(u) ** (p - 2.0)
    return h * a * u, h * a * u * u / p


def shell_max_numpy(absvals, shell_idx, n_shells):
    """Per-shell maxima of |u|: out[r] = max over nodes with shell index r."""
    out = np.zeros(n_shells)
    np.maximum.at(out, shell_idx, absvals)
    return out


# -- numba implementations -----------------------------------------------------

_HAVE_NUMBA = False
if not _env_disabled():
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True)
    def _power_f_nb(u, h, p):
        out = np.empty_like(u)
        if p == 4.0:
            for i in range(u.size):
                out[i] = h[i] * u[i] * u[i] * u[i]
        else:
            e = p - 2.0
            for i in range(u.size):
                out[i] = h[i] * abs(u[i]) ** e * u[i]
        return out

    @njit(cache=True)
    def _power_big_f_nb(u, h, p):
        out = np.empty_like(u)
        if p == 4.0:
            for i in range(u.size):
                u2 = u[i] * u[i]
                out[i] = h[i] * u2 * u2 * 0.25
        else:
            for i in range(u.size):
                out[i] = h[i] * abs(u[i]) ** p / p
        return out

    @njit(cache=True)
    def _power_fprime_nb(u, h, p):
        out = np.empty_like(u)
        if p == 4.0:
            for i in range(u.size):
                out[i] = 3.0 * h[i] * u[i] * u[i]
        else:
            e = p - 2.0
            c = p - 1.0
            for i in range(u.size):
                out[i] = c * h[i] * abs(u[i]) ** e
        return out

    @njit(cache=True)
    def _power_f_and_big_f_nb(u, h, p):
        f = np.empty_like(u)
        big = np.empty_like(u)
        if p == 4.0:
            for i in range(u.size):
                u2 = u[i] * u[i]
                f[i] = h[i] * u2 * u[i]
                big[i] = h[i] * u2 * u2 * 0.25
        else:
            e = p - 2.0
            for i in range(u.size):
                a = abs(u[i]) ** e
                f[i] = h[i] * a * u[i]
                big[i] = h[i] * a * u[i] * u[i] / p
        return f, big

    @njit(cache=True)
    def _shell_max_nb(absvals, shell_idx, n_shells):
        out = np.zeros(n_shells)
        for i in range(absvals.size):
            r = shell_idx[i]
            if absvals[i] > out[r]:
                out[r] = absvals[i]
        return out

    def power_f_numba(u, h, p):
        return _power_f_nb(u.reshape(-1), h.reshape(-1), float(p)).reshape(u.shape)

    def power_big_f_numba(u, h, p):
        return _power_big_f_nb(u.reshape(-1), h.reshape(-1), float(p)).reshape(u.shape)

    def power_fprime_numba(u, h, p):
        return _power_fprime_nb(u.reshape(-1), h.reshape(-1), float(p)).reshape(u.shape)

    def power_f_and_big_f_numba(u, h, p):
        f, big = _power_f_and_big_f_nb(u.reshape(-1), h.reshape(-1), float(p))
        return f.reshape(u.shape), big.reshape(u.shape)

    def shell_max_numba(absvals, shell_idx, n_shells):
        return _shell_max_nb(absvals.reshape(-1), shell_idx.reshape(-1), int(n_shells))


NUMBA_ENABLED = _HAVE_NUMBA

if NUMBA_ENABLED:
    power_f = power_f_numba
    power_big_f = power_big_f_numba
    power_fprime = power_fprime_numba
    power_f_and_big_f = power_f_and_big_f_numba
    shell_max = shell_max_numba
else:
    power_f = power_f_numpy
    power_big_f = power_big_f_numpy
    power_fprime = power_fprime_numpy
    power_f_and_big_f = power_f_and_big_f_numpy
    shell_max = shell_max_numpy


def implementations() -> dict:
    """Both kernel families, keyed 'numpy' and (when available) 'numba'.
    Used by the benchmark and the cross-implementation tests."""
    table = {
        "numpy": {
            "power_f": power_f_numpy,
            "power_big_f": power_big_f_numpy,
            "power_fprime": power_fprime_numpy,
            "power_f_and_big_f": power_f_and_big_f_numpy,
            "shell_max": shell_max_numpy,
        }
    }
    if NUMBA_ENABLED:
        table["numba"] = {
            "power_f": power_f_numba,
            "power_big_f": power_big_f_numba,
            "power_fprime": power_fprime_numba,
            "power_f_and_big_f": power_f_and_big_f_numba,
            "shell_max": shell_max_numba,
        }
    return table


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    u = np.linspace(-1.0, 1.0, 8)
    h = np.ones(8)
    for p in (4.0, 3.0):
        power_f(u, h, p)
        power_big_f(u, h, p)
        power_fprime(u, h, p)
        power_f_and_big_f(u, h, p)
    shell_max(np.abs(u), np.zeros(8, dtype=np.int64), 1)
