"""Symbol and double-symbol representations, class-membership seminorms, and
the built-in test-symbol library."""

from dataclasses import dataclass, field

import numpy as np

from . import grid as _g
from . import spaces as _sp

__all__ = [
    "Symbol",
    "DoubleSymbol",
    "SeminormTable",
    "builtin",
    "weierstrass",
    "smooth_seminorm",
    "hoelder_class_table",
    "example_regularity_budget",
]


@dataclass
class Symbol:
    """Evaluable field ``p(x, xi)`` with declared class metadata.

    ``func(x_mesh..., xi_mesh...)`` must broadcast over numpy arrays.  The
    metadata mirrors the non-smooth class bookkeeping: order ``m``, type
    ``rho`` in {0, 1}, x-regularity ``(m_tilde, tau)`` and the xi-smoothness
    budget ``M`` (None = unlimited).
    """

    func: callable
    m: float = 0.0
    rho: int = 1
    m_tilde: int = 0
    tau: float = 0.99
    M: int | None = None
    name: str = "symbol"

    def __post_init__(self):
        if self.rho not in (0, 1):
            raise ValueError("rho must be 0 or 1")
        if self.M is not None and self.M < 0:
            raise ValueError("M must be nonnegative")
        if not (0 < self.tau < 1):
            raise ValueError("tau must lie in (0, 1)")

    def table(self, grid):
        """Values on the x-by-xi lattice: shape (N,)*dim + (N,)*dim."""
        xm = grid.node_mesh()
        fm = grid.freq_mesh()
        if grid.dim == 1:
            vals = self.func(xm[0][:, None], fm[0][None, :])
            return np.broadcast_to(np.asarray(vals, np.complex128),
                                   (grid.n, grid.n)).copy()
        x1, x2 = (a[:, :, None, None] for a in xm)
        k1, k2 = (a[None, None, :, :] for a in fm)
        vals = self.func(x1, x2, k1, k2)
        return np.broadcast_to(np.asarray(vals, np.complex128),
                               grid.shape + grid.shape).copy()


def table_symbol(table, grid, name="recovered", **meta):
    """Wrap a tabulated (x, xi) array as a Symbol (lattice-exact, nearest
    neighbor off-lattice)."""
    table = np.asarray(table, dtype=np.complex128)

    if grid.dim != 1:
        raise NotImplementedError("tabulated symbols are 1-d")

    def func(x, xi):
        xi_idx = np.clip(np.rint(xi / grid.freq_spacing).astype(int) + grid.n // 2,
                         0, grid.n - 1)
        x_idx = np.clip(np.rint((x + grid.half_length) / grid.spacing).astype(int),
                        0, grid.n - 1)
        x_idx, xi_idx = np.broadcast_arrays(x_idx, xi_idx)
        return table[x_idx, xi_idx]

    sym = Symbol(func, name=name, **meta)
    sym._table = table
    sym._grid = grid
    return sym


@dataclass
class DoubleSymbol:
    """Evaluable ``a(x, xi, x')`` (xi'-independent) with metadata; dim 1."""

    func: callable
    m: float = 0.0
    rho: int = 0
    m_tilde: int = 0
    tau: float = 0.99
    N_budget: int | None = None
    name: str = "double-symbol"

    def table(self, grid, y_nodes=None):
        """Values on x-by-xi-by-x' lattice; ``y_nodes`` defaults to the grid."""
        if grid.dim != 1:
            raise NotImplementedError("double symbols are 1-d")
        x = grid.axis_nodes()
        xi = grid.axis_freqs()
        xp = grid.axis_nodes() if y_nodes is None else np.asarray(y_nodes)
        vals = self.func(x[:, None, None], xi[None, :, None], xp[None, None, :])
        return np.broadcast_to(np.asarray(vals, np.complex128),
                               (x.size, xi.size, xp.size)).copy()


@dataclass
class SeminormTable:
    """Measured class seminorms indexed by the xi-derivative order alpha."""

    entries: dict
    exponents: dict
    residuals: dict
    target_exponents: dict
    verdict: bool
    params: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for a in sorted(self.entries):
            out.append({
                "alpha": a,
                "value": self.entries[a],
                "fitted_exponent": self.exponents[a],
                "fit_residual": self.residuals[a],
                "target_exponent": self.target_exponents[a],
            })
        return out


# -- built-in symbols ---------------------------------------------------------

def weierstrass(tau, J):
    """Truncated Weierstrass sum ``sum_{j=1..J} 2^{-j tau} cos(2^j x)``."""

    def w(x):
        acc = np.zeros_like(np.asarray(x, dtype=float))
        for j in range(1, J + 1):
            acc = acc + 2.0 ** (-j * tau) * np.cos(2.0 ** j * x)
        return acc

    return w


def max_weierstrass_depth(grid):
    """Largest J with 2^J <= N/4 (keeps every mode below Nyquist)."""
    return max(1, int(np.log2(grid.n)) - 2)


def builtin(name, **params):
    """Construct a library symbol by name.

    Names: ``bracket_power(m)``, ``mode(k)``, ``separable(a, q, m)``,
    ``weierstrass_times_bracket(tau, m, J)``, ``sin_coeff(m)``.
    """
    if name == "bracket_power":
        m = params.get("m", 0.0)
        return Symbol(lambda x, xi: _bracket(xi) ** m + 0j * x,
                      m=m, rho=1, m_tilde=8, M=None,
                      name=f"bracket_power({m})")
    if name == "mode":
        k = params.get("k", 1.0)
        return Symbol(lambda x, xi: np.exp(1j * k * x) + 0j * xi,
                      m=0.0, rho=1, m_tilde=8, M=None, name=f"mode({k})")
    if name == "separable":
        a, q, m = params["a"], params["q"], params.get("m", 0.0)
        return Symbol(lambda x, xi: a(x) * q(xi) + 0j,
                      m=m, rho=params.get("rho", 1),
                      m_tilde=params.get("m_tilde", 8),
                      tau=params.get("tau", 0.99),
                      M=params.get("M"), name="separable")
    if name == "weierstrass_times_bracket":
        tau, m, J = params["tau"], params.get("m", 1.0), params["J"]
        w = weierstrass(tau, J)
        return Symbol(lambda x, xi: w(x) * _bracket(xi) ** m + 0j,
                      m=m, rho=1, m_tilde=0, tau=tau, M=None,
                      name=f"weierstrass_times_bracket({tau},{m},{J})")
    if name == "sin_coeff":
        m = params.get("m", 1.0)
        return Symbol(lambda x, xi: np.sin(x) * _bracket(xi) ** m + 0j,
                      m=m, rho=1, m_tilde=8, M=None, name=f"sin_coeff({m})")
    raise ValueError(f"unknown builtin symbol {name!r}")


def _bracket(xi):
    return np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)


# -- seminorm machinery --------------------------------------------------------

def _xi_fd(table, order, dxi, axis=-1):
    """Centered finite differences along the frequency axis (1-d tables)."""
    out = table
    for _ in range(order):
        out = (np.roll(out, -1, axis=axis) - np.roll(out, 1, axis=axis)) / (2 * dxi)
    return out


def _axis_spectral_derivative(table, axis, node_spacing, order):
    """Circular spectral derivative along one uniformly sampled axis."""
    n = table.shape[axis]
    dual = 2.0 * np.pi * np.fft.fftfreq(n, d=node_spacing)
    shape = [1] * table.ndim
    shape[axis] = n
    spec = np.fft.fft(table, axis=axis)
    spec *= (1j * dual.reshape(shape)) ** order
    return np.fft.ifft(spec, axis=axis)


def grid_symbol_derivative(p, grid, alpha=0, beta=0):
    """Tabulated ``d_xi^alpha D_x^beta p`` with grid-consistent (circular
    spectral) derivatives along both axes; this is the exact derivative of
    the lattice representation of ``p`` (1-d).

    The commutator law ``ad(-ix)^a ad(D)^b op(p) = op(d_xi^a D_x^b p)`` is an
    exact matrix identity for these tables; sampling the analytic derivative
    instead differs by the periodization error of the truncated boxes.
    """
    if grid.dim != 1:
        raise NotImplementedError
    table = p.table(grid)
    if beta:
        table = (-1j) ** beta * _axis_spectral_derivative(
            table, 0, grid.spacing, beta)
    if alpha:
        table = _axis_spectral_derivative(table, 1, grid.freq_spacing, alpha)
    return table


def _x_derivative_table(table, grid, order):
    """Spectral x-derivative of p(.,xi) columns (plain d/dx, 1-d)."""
    if order == 0:
        return table
    s = (-1.0) ** np.arange(-grid.n // 2, grid.n // 2)
    xi = grid.axis_freqs()
    spec = np.fft.fftshift(np.fft.fft(table, axis=0), axes=0) * s[:, None]
    spec *= (1j * xi[:, None]) ** order
    return np.fft.ifft(np.fft.ifftshift(spec * s[:, None], axes=0), axis=0)


def smooth_seminorm(p, k, m, rho, delta=0.0, grid=None):
    """Hoermander-style seminorm: max over |alpha|,|beta| <= k of
    ``sup |d_xi^alpha d_x^beta p| <xi>^{-(m - rho |alpha| + delta |beta|)}``.

    xi-derivatives use centered differences with step ``dxi``; a boundary
    ring of width k is excluded from the sup.
    """
    grid = grid or _g.Grid(1, 128, 2 * np.pi)
    if grid.dim != 1:
        raise NotImplementedError("seminorms are measured on 1-d grids")
    if p.M is not None and k > p.M:
        raise ValueError(f"k={k} exceeds the xi-smoothness budget M={p.M}")
    if k > 4:
        raise ValueError("k must be <= 4")
    table = p.table(grid)
    xi = grid.axis_freqs()
    interior = slice(k, grid.n - k) if k else slice(None)
    best = 0.0
    for beta in range(k + 1):
        dx = _x_derivative_table(table, grid, beta)
        for alpha in range(k + 1):
            dxa = _xi_fd(dx, alpha, grid.freq_spacing)
            w = _bracket(xi[interior]) ** (-(m - rho * alpha + delta * beta))
            best = max(best, float(np.max(np.abs(dxa[:, interior]) * w[None, :])))
    return best


def _shell_decay_fit(xi, values):
    """Least-squares slope of log(values) vs log<xi> over dyadic shells."""
    br = _bracket(xi)
    shells = []
    edges = [0.0]
    top = float(np.max(np.abs(xi)))
    e = 1.0
    while e < top:
        edges.append(e)
        e *= 2.0
    edges.append(np.inf)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (np.abs(xi) >= lo) & (np.abs(xi) < hi)
        if np.any(sel) and np.max(values[sel]) > 0:
            shells.append((np.log(np.max(br[sel])), np.log(np.max(values[sel]))))
    # order means large-|xi| behavior: fit the outermost shells only
    shells = shells[-4:]
    if len(shells) < 2:
        return 0.0, 0.0
    arr = np.array(shells)
    coef, res = np.polyfit(arr[:, 0], arr[:, 1], 1, full=True)[:2]
    resid = float(res[0]) if len(res) else 0.0
    return float(coef[0]), resid


def hoelder_class_table(p, tau, m, rho, M, grid=None):
    """Measure ``sup_xi ||d_xi^alpha p(., xi)||_{C^tau_*} <xi>^{-(m-rho|alpha|)}``
    for |alpha| <= M, fit the xi-decay exponent per alpha, and report a
    membership verdict for the class with order m, type rho, regularity tau."""
    grid = grid or _g.Grid(1, 128, 2 * np.pi)
    if grid.dim != 1:
        raise NotImplementedError
    if M > 4:
        raise ValueError("measured orders are capped at M <= 4")
    table = p.table(grid)
    xi = grid.axis_freqs()
    part = _sp.DyadicPartition(grid)
    entries, exponents, residuals, targets = {}, {}, {}, {}
    verdict = True
    noise_floor = 0.0
    s = (-1.0) ** np.arange(-grid.n // 2, grid.n // 2)
    for alpha in range(M + 1):
        interior = slice(alpha, grid.n - alpha) if alpha else slice(None)
        d = _xi_fd(table, alpha, grid.freq_spacing)[:, interior]
        xin = xi[interior]
        # Zygmund norm of every xi-slice at once: band the x-axis spectrally
        spec = np.fft.fftshift(np.fft.fft(d, axis=0), axes=0) * s[:, None]
        slice_norms = np.zeros(xin.size)
        for j, piece in enumerate(part.pieces):
            band = np.fft.ifft(
                np.fft.ifftshift(spec * (piece * s)[:, None], axes=0), axis=0)
            sups = np.max(np.abs(band), axis=0)
            slice_norms = np.maximum(slice_norms, 2.0 ** (tau * j) * sups)
        target = m - rho * alpha
        weighted = slice_norms * _bracket(xin) ** (-target)
        entries[alpha] = float(np.max(weighted))
        if alpha == 0:
            # derivative content below this is sampling / recovery noise
            noise_floor = 1e-5 * max(float(np.max(slice_norms)), 1e-300)
        if float(np.max(slice_norms)) <= max(noise_floor, 1e-12):
            exponents[alpha] = -np.inf
            residuals[alpha] = 0.0
            targets[alpha] = target
            continue
        slope, resid = _shell_decay_fit(xin, slice_norms)
        exponents[alpha] = slope
        residuals[alpha] = resid
        targets[alpha] = target
        if not np.isfinite(entries[alpha]) or slope > target + 0.15:
            verdict = False
    return SeminormTable(entries, exponents, residuals, targets, verdict,
                         params={"tau": tau, "m": m, "rho": rho, "M": M,
                                 "grid_n": grid.n,
                                 "grid_half_length": grid.half_length})


def example_regularity_budget(tau, n):
    """Largest k in N_0 with ``tau - k > n/2``; None when no k qualifies."""
    if not tau > n / 2.0:
        return None
    k = int(np.floor(tau - n / 2.0))
    if not tau - k > n / 2.0:  # strict inequality required
        k -= 1
    return k if k >= 0 else None
