"""Truncated-box grids and discrete Fourier analysis on them.

The box is ``[-L, L)`` per axis with ``N`` (a power of two) equispaced
nodes, so ``h = 2L/N``.  Frequency nodes are ``xi_k = k*pi/L`` for
``k = -N/2 .. N/2-1``, so ``dxi = pi/L`` and ``h*dxi = 2*pi/N``.

The forward transform is the Riemann sum of ``int e^{-i x.xi} u(x) dx``
with weight ``h**dim``; the inverse carries ``dxi**dim * (2*pi)**-dim``,
matching the normalized frequency measure used throughout the package.
With these weights the pair is an exact round trip on the lattice.
"""

from dataclasses import dataclass, replace
import json

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "FourierConvention",
    "forward_transform",
    "inverse_transform",
    "modulate",
    "translate",
    "derivative",
    "lp_norm",
    "bracket",
    "wraparound_mass",
    "boundary_taper",
    "gaussian",
    "save_gridfunction",
    "load_gridfunction",
]


@dataclass(frozen=True)
class FourierConvention:
    """Quadrature weights tying the DFT to the continuum transform."""

    dim: int
    spacing: float
    freq_spacing: float

    @property
    def forward_weight(self):
        return self.spacing ** self.dim

    @property
    def inverse_weight(self):
        return (self.freq_spacing / (2.0 * np.pi)) ** self.dim


@dataclass(frozen=True)
class Grid:
    """Uniform box grid on ``[-L, L)**dim``.

    Parameters
    ----------
    dim : 1 or 2
    n : points per axis, a power of two, >= 8
    half_length : L > 0
    """

    dim: int
    n: int
    half_length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two >= 8")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_length / self.n

    @property
    def freq_spacing(self):
        return np.pi / self.half_length

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n ** self.dim

    def axis_nodes(self):
        return -self.half_length + self.spacing * np.arange(self.n)

    def axis_freqs(self):
        return self.freq_spacing * np.arange(-self.n // 2, self.n // 2)

    def node_mesh(self):
        """Tuple of coordinate arrays, one per axis, meshed for dim=2."""
        x = self.axis_nodes()
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def freq_mesh(self):
        xi = self.axis_freqs()
        if self.dim == 1:
            return (xi,)
        return tuple(np.meshgrid(xi, xi, indexing="ij"))

    @property
    def convention(self):
        return FourierConvention(self.dim, self.spacing, self.freq_spacing)

    def coarsen(self):
        """Same box with every second node (N -> N/2)."""
        return replace(self, n=self.n // 2)

    def refine(self):
        return replace(self, n=self.n * 2)

    def freq_index(self, xi_value, axis_tol=1e-9):
        """Lattice index of a frequency value; raises if off-lattice."""
        k = xi_value / self.freq_spacing
        ki = int(np.rint(k))
        if abs(k - ki) > axis_tol or not (-self.n // 2 <= ki < self.n // 2):
            raise ValueError(f"frequency {xi_value} is not a grid frequency")
        return ki + self.n // 2


@dataclass
class GridFunction:
    """Complex samples on a grid, either in x-space or (flagged) xi-space."""

    grid: Grid
    values: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite values in grid function")
        self.values = vals

    def copy(self):
        return GridFunction(self.grid, self.values.copy(), self.spectral)


def from_callable(grid, func, spectral=False):
    """Sample ``func`` on the node (or frequency) mesh."""
    mesh = grid.freq_mesh() if spectral else grid.node_mesh()
    vals = np.asarray(func(*mesh), dtype=np.complex128)
    vals = np.broadcast_to(vals, grid.shape).copy()
    return GridFunction(grid, vals, spectral)


def gaussian(grid, width=1.0, center=0.0, xi0=None):
    """Sampled ``exp(-|x-c|^2 / (2 width^2))``, optionally modulated by e^{i x.xi0}."""
    mesh = grid.node_mesh()
    c = np.broadcast_to(np.atleast_1d(center), (grid.dim,))
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    vals = np.exp(-r2 / (2.0 * width ** 2)).astype(np.complex128)
    if xi0 is not None:
        xi0 = np.broadcast_to(np.atleast_1d(xi0), (grid.dim,))
        phase = sum(m * xi for m, xi in zip(mesh, xi0))
        vals = vals * np.exp(1j * phase)
    return GridFunction(grid, vals)


# -- transforms --------------------------------------------------------------

def _edge_signs(n):
    # exp(+i L xi_k) = (-1)^k for xi_k = k pi / L
    return (-1.0) ** np.arange(-n // 2, n // 2)


def forward_transform(u):
    """Discrete approximation of ``uhat(xi) = int e^{-i x.xi} u(x) dx``."""
    if u.spectral:
        raise ValueError("input is already spectral")
    g = u.grid
    s = _edge_signs(g.n)
    vals = u.values
    for axis in range(g.dim):
        vals = np.fft.fftshift(np.fft.fft(vals, axis=axis), axes=axis)
        shape = [1] * g.dim
        shape[axis] = g.n
        vals = vals * s.reshape(shape)
    vals = vals * g.spacing ** g.dim
    return GridFunction(g, vals, spectral=True)


def inverse_transform(uhat):
    """Inverse of :func:`forward_transform` (exact on the lattice)."""
    if not uhat.spectral:
        raise ValueError("input is not spectral")
    g = uhat.grid
    s = _edge_signs(g.n)
    vals = uhat.values / g.spacing ** g.dim
    for axis in range(g.dim):
        shape = [1] * g.dim
        shape[axis] = g.n
        vals = vals * s.reshape(shape)
        vals = np.fft.ifft(np.fft.ifftshift(vals, axes=axis), axis=axis)
    return GridFunction(g, vals, spectral=False)


def modulate(u, xi0):
    """Pointwise multiplication by ``e^{i x.xi0}`` for an on-grid ``xi0``."""
    if u.spectral:
        raise ValueError("modulate expects an x-space function")
    g = u.grid
    xi0 = np.broadcast_to(np.atleast_1d(np.asarray(xi0, dtype=float)), (g.dim,))
    for c in xi0:
        g.freq_index(c)  # rejects off-lattice modulation (aliasing hazard)
    mesh = g.node_mesh()
    phase = sum(m * c for m, c in zip(mesh, xi0))
    return GridFunction(g, u.values * np.exp(1j * phase))


def translate(u, y):
    """Circular shift realizing ``(tau_y u)(x) = u(x - y)`` for on-grid ``y``."""
    if u.spectral:
        raise ValueError("translate expects an x-space function")
    g = u.grid
    y = np.broadcast_to(np.atleast_1d(np.asarray(y, dtype=float)), (g.dim,))
    shifts = []
    for c in y:
        k = c / g.spacing
        ki = int(np.rint(k))
        if abs(k - ki) > 1e-9:
            raise ValueError(f"translation {c} is not a multiple of the spacing")
        shifts.append(ki)
    return GridFunction(g, np.roll(u.values, shifts, axis=tuple(range(g.dim))))


def derivative(u, alpha):
    """Scaled derivative ``D^alpha u`` (symbol ``xi^alpha``), spectrally."""
    g = u.grid
    alpha = np.broadcast_to(np.atleast_1d(np.asarray(alpha, dtype=int)), (g.dim,))
    if np.any(alpha < 0) or int(alpha.sum()) > 8:
        raise ValueError("multi-index must be nonnegative with |alpha| <= 8")
    if u.spectral:
        raise ValueError("derivative expects an x-space function")
    uhat = forward_transform(u)
    mesh = g.freq_mesh()
    mult = np.ones(g.shape)
    for m, a in zip(mesh, alpha):
        if a:
            mult = mult * m ** a
    return inverse_transform(GridFunction(g, uhat.values * mult, spectral=True))


def spectral_multiplier(u, symbol):
    """Apply a frequency multiplier ``symbol(xi)`` to an x-space function."""
    g = u.grid
    uhat = forward_transform(u)
    mesh = g.freq_mesh()
    mult = np.asarray(symbol(*mesh), dtype=np.complex128)
    return inverse_transform(GridFunction(g, uhat.values * mult, spectral=True))


# -- norms and helpers --------------------------------------------------------

def lp_norm(u, q):
    """``(h^dim sum |u|^q)^{1/q}``; sup norm for ``q = inf``."""
    if not (q >= 1):
        raise ValueError("q must be >= 1")
    a = np.abs(u.values)
    if np.isinf(q):
        return float(a.max())
    w = u.grid.spacing ** u.grid.dim
    return float((w * np.sum(a ** q)) ** (1.0 / q))


def bracket(v):
    """Japanese bracket ``<v> = (1 + |v|^2)^(1/2)``, elementwise-safe."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(1.0 + np.sum(v ** 2)))


def bracket_mesh(mesh, power=1.0):
    """``<xi>^power`` on a tuple of coordinate arrays."""
    r2 = sum(np.asarray(m, dtype=float) ** 2 for m in mesh)
    return (1.0 + r2) ** (0.5 * power)


def wraparound_mass(u, shell_frac=0.1):
    """L2 mass fraction in the outer shell of the box (periodization risk)."""
    g = u.grid
    mesh = g.node_mesh()
    cut = g.half_length * (1.0 - shell_frac)
    outer = np.zeros(g.shape, dtype=bool)
    for m in mesh:
        outer |= np.abs(m) >= cut
    total = np.sqrt(np.sum(np.abs(u.values) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(u.values[outer]) ** 2)) / total)


def _smooth_step(t):
    # C^inf transition: 0 for t<=0, 1 for t>=1
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def smooth_cutoff(r, inner, outer):
    """Radial C^inf cutoff: 1 for ``|r| <= inner``, 0 for ``|r| >= outer``."""
    r = np.abs(np.asarray(r, dtype=float))
    return _smooth_step((outer - r) / (outer - inner))


def boundary_taper(grid, core_frac=0.7):
    """Smooth window, 1 on the core of the box, 0 at the boundary."""
    mesh = grid.node_mesh()
    L = grid.half_length
    w = np.ones(grid.shape)
    for m in mesh:
        w = w * smooth_cutoff(m, core_frac * L, 0.97 * L)
    return GridFunction(grid, w.astype(np.complex128))


# -- file format --------------------------------------------------------------
# One JSON header line, then little-endian float64 (re, im) pairs row-major.

def save_gridfunction(u, path):
    header = {
        "dim": u.grid.dim,
        "n": u.grid.n,
        "half_length": u.grid.half_length,
        "spectral": bool(u.spectral),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        flat = np.ascontiguousarray(u.values).ravel()
        pairs = np.empty(2 * flat.size, dtype="<f8")
        pairs[0::2] = flat.real
        pairs[1::2] = flat.imag
        fh.write(pairs.tobytes())


def load_gridfunction(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        grid = Grid(header["dim"], header["n"], header["half_length"])
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 * grid.size:
        raise ValueError("payload size does not match header")
    vals = (raw[0::2] + 1j * raw[1::2]).reshape(grid.shape)
    return GridFunction(grid, vals, spectral=header["spectral"])
