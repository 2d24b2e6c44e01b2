"""Quantization, black-box linear operators, iterated commutators, operator
norms, and commutator-based membership tests."""

from dataclasses import dataclass, field

import numpy as np

from . import grid as _g
from . import spaces as _sp
from ._kernels import apply_quantized, apply_double

__all__ = [
    "LinearOperator",
    "MembershipReport",
    "quantize",
    "quantize_double",
    "multiplication",
    "multiplier",
    "identity",
    "compose",
    "ad_x",
    "ad_D",
    "iterated_commutator",
    "op_norm",
    "membership",
    "operator_distance",
    "probe_family",
]

MATRIX_CAP = 1024  # largest grid size that op_norm will materialize / SVD


@dataclass
class LinearOperator:
    """Black-box linear map on grid functions over a fixed grid.

    ``apply_fn`` maps values-array -> values-array.  ``adjoint_fn`` is
    optional (enables matrix-free norm estimation); algebraic combinators
    propagate it.  ``symbol`` records provenance for operators built by
    quantization, which membership uses to re-instantiate at finer grids.
    """

    grid: _g.Grid
    apply_fn: callable
    adjoint_fn: callable = None
    symbol: object = None
    concurrency_capable: bool = True
    name: str = "operator"

    def __call__(self, u):
        if u.grid != self.grid:
            raise ValueError("grid mismatch between operator and argument")
        if u.spectral:
            raise ValueError("operators act on x-space functions")
        return _g.GridFunction(self.grid, self.apply_fn(u.values))

    @property
    def has_adjoint(self):
        return self.adjoint_fn is not None

    def adjoint(self, u):
        if not self.has_adjoint:
            raise ValueError(f"{self.name} carries no adjoint")
        return _g.GridFunction(self.grid, self.adjoint_fn(u.values))

    def matrix(self):
        """Dense matrix on the delta basis (column j = T e_j)."""
        n = self.grid.size
        out = np.empty((n, n), dtype=np.complex128)
        basis = np.zeros(self.grid.shape, dtype=np.complex128)
        it = np.ndindex(self.grid.shape)
        for j, idx in enumerate(it):
            basis[idx] = 1.0
            out[:, j] = self.apply_fn(basis).ravel()
            basis[idx] = 0.0
        return out

    def linearity_defect(self, seed=0):
        """Residual of T(u + c v) - Tu - c Tv on random probes."""
        rng = np.random.default_rng(seed)
        shape = self.grid.shape
        u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c = complex(rng.standard_normal(), rng.standard_normal())
        lhs = self.apply_fn(u + c * v)
        tu, tv = self.apply_fn(u), self.apply_fn(v)
        denom = np.linalg.norm(tu) + np.linalg.norm(tv) + 1e-300
        return float(np.linalg.norm(lhs - tu - c * tv) / denom)


# -- constructors ---------------------------------------------------------------

def identity(grid):
    return LinearOperator(grid, lambda v: v.copy(), lambda v: v.copy(),
                          name="identity")


def multiplication(grid, values, name="multiplication"):
    """Pointwise multiplication by a sampled coefficient."""
    vals = np.asarray(values, dtype=np.complex128)
    conj = np.conj(vals)
    return LinearOperator(grid, lambda v: vals * v, lambda v: conj * v, name=name)


def multiplier(grid, symbol_fn, name="multiplier"):
    """Fourier multiplier ``symbol_fn(xi_mesh...)`` (normal operator)."""
    mesh = grid.freq_mesh()
    mult = np.asarray(symbol_fn(*mesh), dtype=np.complex128)
    mult = np.broadcast_to(mult, grid.shape).copy()
    conj = np.conj(mult)

    def apply_fn(v, m=mult):
        uhat = _g.forward_transform(_g.GridFunction(grid, v))
        return _g.inverse_transform(
            _g.GridFunction(grid, uhat.values * m, spectral=True)).values

    return LinearOperator(grid, apply_fn,
                          lambda v: apply_fn(v, conj), name=name)


def order_reducer(grid, m):
    """The weight multiplier of order m (self-adjoint, exactly invertible)."""
    return multiplier(grid, lambda *mesh: _g.bracket_mesh(mesh, m),
                      name=f"order_reducer({m})")


def compose(A, B):
    """A after B."""
    if A.grid != B.grid:
        raise ValueError("operators live on different grids")
    adj = None
    if A.has_adjoint and B.has_adjoint:
        adj = lambda v: B.adjoint_fn(A.adjoint_fn(v))
    return LinearOperator(A.grid, lambda v: A.apply_fn(B.apply_fn(v)), adj,
                          name=f"({A.name} o {B.name})")


def lincomb(pairs):
    """sum of c_i * T_i over (c_i, T_i) pairs."""
    grid = pairs[0][1].grid
    if any(T.grid != grid for _, T in pairs):
        raise ValueError("operators live on different grids")
    adjs = [(np.conj(c), T.adjoint_fn) for c, T in pairs]
    have_adj = all(T.has_adjoint for _, T in pairs)

    def apply_fn(v):
        acc = None
        for c, T in pairs:
            t = c * T.apply_fn(v)
            acc = t if acc is None else acc + t
        return acc

    adj = None
    if have_adj:
        def adj(v):
            acc = None
            for c, fn in adjs:
                t = c * fn(v)
                acc = t if acc is None else acc + t
            return acc

    return LinearOperator(grid, apply_fn, adj, name="lincomb")


def quantize(p, grid):
    """Left quantization ``u -> sum_xi e^{i x.xi} p(x, xi) uhat(xi) dqxi``."""
    table = p.table(grid)
    nx = grid.size
    xm = grid.node_mesh()
    fm = grid.freq_mesh()
    x_flat = [m.ravel() for m in xm] if grid.dim == 2 else [xm[0]]
    f_flat = [m.ravel() for m in fm] if grid.dim == 2 else [fm[0]]
    phase = np.exp(1j * sum(np.outer(xc, fc) for xc, fc in zip(x_flat, f_flat)))
    dq = (grid.freq_spacing / (2.0 * np.pi)) ** grid.dim
    E = phase * table.reshape(nx, nx) * dq

    def apply_fn(v):
        uhat = _g.forward_transform(_g.GridFunction(grid, v))
        return apply_quantized(E, uhat.values.ravel()).reshape(grid.shape)

    return LinearOperator(grid, apply_fn, _quantize_adjoint(E, grid),
                          symbol=p, name=f"op({p.name})")


def _quantize_adjoint(E, grid):
    # T = E . F with F the weighted forward transform, so T* = F* . E^H;
    # on the lattice F* is the inverse transform rescaled by h^d/dq(xi)^d.
    Eh = np.ascontiguousarray(E.conj().T)
    scale = (grid.spacing / (grid.freq_spacing / (2.0 * np.pi))) ** grid.dim

    def adjoint_fn(v):
        w = Eh @ v.ravel()
        spec = _g.GridFunction(grid, w.reshape(grid.shape), spectral=True)
        return _g.inverse_transform(spec).values * scale

    return adjoint_fn


def quantize_double(a, grid):
    """Operator of a double symbol:
    ``u -> os-iint e^{i(x-y).xi} a(x, xi, y) u(y) dy dqxi`` (1-d)."""
    if grid.dim != 1:
        raise NotImplementedError("double-symbol quantization is 1-d")
    table = a.table(grid)
    x = grid.axis_nodes()
    xi = grid.axis_freqs()
    phase = np.exp(1j * np.outer(x, xi))
    weight = grid.spacing * grid.freq_spacing / (2.0 * np.pi)

    def apply_fn(v):
        return apply_double(table, phase, v, weight)

    return LinearOperator(grid, apply_fn, None, symbol=a,
                          name=f"op_double({a.name})")


# -- commutators ----------------------------------------------------------------

def _coordinate(grid, j):
    return grid.node_mesh()[j]


def ad_x(T, j=0):
    """Commutator ``ad(-i x_j) T = -i x_j T + T (i x_j .)``."""
    xj = _coordinate(T.grid, j)
    mi = multiplication(T.grid, -1j * xj, name=f"-ix_{j}")
    pi = multiplication(T.grid, 1j * xj, name=f"ix_{j}")
    return lincomb([(1.0, compose(mi, T)), (1.0, compose(T, pi))])


def ad_D(T, j=0):
    """Commutator ``ad(D_j) T = D_j T - T D_j``."""
    grid = T.grid
    Dj = multiplier(grid, lambda *mesh: mesh[j], name=f"D_{j}")
    return lincomb([(1.0, compose(Dj, T)), (-1.0, compose(T, Dj))])


def iterated_commutator(T, alphas, betas):
    """Left-to-right composition of unit ad-blocks.

    ``alphas`` and ``betas`` are equal-length lists of multi-indices with
    ``|alpha_i| + |beta_i| = 1`` for each block.
    """
    if len(alphas) != len(betas):
        raise ValueError("alpha and beta block lists must have equal length")
    dim = T.grid.dim
    out = T
    for a, b in zip(alphas, betas):
        a = tuple(np.atleast_1d(np.asarray(a, dtype=int)))
        b = tuple(np.atleast_1d(np.asarray(b, dtype=int)))
        if len(a) != dim or len(b) != dim:
            raise ValueError("block multi-indices must match the grid dimension")
        if sum(a) + sum(b) != 1:
            raise ValueError("each block must have |alpha| + |beta| = 1")
        if sum(a) == 1:
            out = ad_x(out, a.index(1))
        else:
            out = ad_D(out, b.index(1))
    return out


def total_commutator(T, alpha, beta):
    """ad(-ix)^alpha ad(D)^beta T from total multi-indices."""
    dim = T.grid.dim
    alphas, betas = [], []
    alpha = np.atleast_1d(np.asarray(alpha, dtype=int))
    beta = np.atleast_1d(np.asarray(beta, dtype=int))
    for j in range(dim):
        unit = tuple(1 if i == j else 0 for i in range(dim))
        zero = (0,) * dim
        alphas += [unit] * int(alpha[j])
        betas += [zero] * int(alpha[j])
        alphas += [zero] * int(beta[j])
        betas += [unit] * int(beta[j])
    return iterated_commutator(T, alphas, betas)


# -- norms -----------------------------------------------------------------------

def probe_family(grid, count=16, seed=7, band_frac=0.5, taper=True):
    """Schwartz-like probe dictionary: modulated Gaussians with centers in
    the core of the box and modulations in the inner frequency band."""
    rng = np.random.default_rng(seed)
    L = grid.half_length
    ximax = grid.freq_spacing * grid.n / 2.0
    probes = []
    for _ in range(count):
        width = L / 8.0 * (1.0 + rng.uniform(-0.3, 0.6))
        center = rng.uniform(-0.25 * L, 0.25 * L, grid.dim)
        k = rng.integers(-int(band_frac * grid.n / 2), int(band_frac * grid.n / 2),
                         grid.dim)
        xi0 = k * grid.freq_spacing
        u = _g.gaussian(grid, width=width, center=center, xi0=xi0)
        vals = u.values
        if taper:
            vals = vals * _g.boundary_taper(grid).values
        vals = vals / np.sqrt(np.sum(np.abs(vals) ** 2) * grid.spacing ** grid.dim)
        probes.append(_g.GridFunction(grid, vals))
    return probes


def operator_distance(A, B, probes=None, window_frac=None):
    """max over probes of ||(A - B) u||_2 / ||u||_2.

    ``window_frac`` restricts the output comparison to ``|x| <= frac * L``
    (identities on the box hold on the core region; matrix entries with
    ``|x_i - x_j| >= L`` wrap around the seam and are excluded this way,
    mirroring comparison on compact sets).
    """
    probes = probes or probe_family(A.grid)
    g = A.grid
    mask = None
    if window_frac is not None:
        mask = np.ones(g.shape, dtype=bool)
        for m in g.node_mesh():
            mask &= np.abs(m) <= window_frac * g.half_length
    worst = 0.0
    for u in probes:
        du = A.apply_fn(u.values) - B.apply_fn(u.values)
        if mask is not None:
            du = du[mask]
        num = np.sqrt(np.sum(np.abs(du) ** 2))
        den = np.sqrt(np.sum(np.abs(u.values) ** 2))
        worst = max(worst, float(num / den))
    return worst


def band_probe(grid, xi0_index=0, rel_width=0.2, band_frac=0.45, center_shift=0.0):
    """Exactly band-limited probe: Gaussian spectral profile hard-truncated
    to ``|k - k0| <= band_frac * N/2``; immune to frequency wrap under
    symbol products (1-d)."""
    n = grid.n
    k = np.arange(-n // 2, n // 2)
    kmax = int(band_frac * n / 2)
    sigma = max(rel_width * kmax, 1.0)
    prof = np.exp(-((k - xi0_index) ** 2) / (2.0 * sigma ** 2))
    prof[np.abs(k - xi0_index) > kmax] = 0.0
    spec = prof.astype(np.complex128) * np.exp(-1j * k * center_shift)
    uh = _g.GridFunction(grid, spec * 2 * grid.half_length, spectral=True)
    return _g.inverse_transform(uh)


def law_probes(grid, count=8, band_frac=0.45, seed=5):
    """Probe family for commutator-law checks: band-limited, varied centers
    and in-band modulations."""
    rng = np.random.default_rng(seed)
    probes = []
    kmax = int(band_frac * grid.n / 2)
    for i in range(count):
        k0 = int(rng.integers(-kmax // 2, kmax // 2 + 1))
        shift = float(rng.uniform(-0.4, 0.4))
        probes.append(band_probe(grid, k0, rel_width=0.25,
                                 band_frac=band_frac, center_shift=shift))
    return probes


def _matrix_norm(T):
    return float(np.linalg.norm(T.matrix(), 2))


def _power_norm(T, tol=1e-10, max_iter=500, seed=3):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(T.grid.shape) + 1j * rng.standard_normal(T.grid.shape)
    v /= np.linalg.norm(v)
    prev = 0.0
    for it in range(max_iter):
        w = T.adjoint_fn(T.apply_fn(v))
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0
        v = w / s
        if abs(np.sqrt(s) - prev) < tol * max(np.sqrt(s), 1.0):
            return float(np.sqrt(s))
        prev = np.sqrt(s)
    raise RuntimeError("power iteration did not converge in %d steps" % max_iter)


def _probe_lower_bound(T, q, count=64, boost_rounds=4, seed=11):
    grid = T.grid
    probes = probe_family(grid, count=count, seed=seed, band_frac=0.8)
    taper = _g.boundary_taper(grid).values

    def qnorm(vals):
        return _g.lp_norm(_g.GridFunction(grid, vals), q)

    best = 0.0
    best_u = None
    for u in probes:
        r = qnorm(T.apply_fn(u.values)) / qnorm(u.values)
        if r > best:
            best, best_u = r, u.values
    # greedy boosting: realign the probe with the q-dual of its image
    u = best_u
    for _ in range(boost_rounds):
        v = T.apply_fn(u)
        mag = np.abs(v)
        if not mag.any():
            break
        w = taper * np.conj(np.exp(1j * np.angle(v))) * mag ** (q - 1.0)
        nw = qnorm(w)
        if nw == 0.0:
            break
        u_new = w / nw
        r = qnorm(T.apply_fn(u_new)) / qnorm(u_new)
        if r <= best:
            break
        best, u = r, u_new
    return float(best)


def op_norm(T, s_from=0.0, q=2.0, taper=False):
    """Estimated operator norm ``H^{s_from}_q -> L^q``.

    q = 2 uses the exact spectral norm of ``T Lambda^{-s_from}`` (dense SVD
    up to MATRIX_CAP grid points, else adjoint-based power iteration);
    other q report a probe-boosted lower bound.  ``taper=True`` premultiplies
    probes by the smooth boundary window, measuring the norm over functions
    that decay inside the box (commutators with the box coordinate are only
    meaningful on such probes).  Returns (value, method).
    """
    A = compose(T, order_reducer(T.grid, -s_from)) if s_from != 0.0 else T
    if taper:
        # probes decaying inside the box and band-limited below the top
        # octave: the norm over lattice-resolved functions
        w = _g.boundary_taper(T.grid)
        ximax = T.grid.freq_spacing * T.grid.n / 2.0
        Q = multiplier(T.grid, lambda *mesh: _g.smooth_cutoff(
            np.sqrt(sum(np.asarray(m, float) ** 2 for m in mesh)),
            0.7 * ximax, 0.95 * ximax), name="band")
        A = compose(A, compose(multiplication(T.grid, w.values, name="taper"), Q))
    if q == 2.0:
        if T.grid.size <= MATRIX_CAP:
            return _matrix_norm(A), "svd"
        if A.has_adjoint:
            return _power_norm(A), "power_iteration"
        return _probe_lower_bound(A, 2.0), "probe_lower_bound"
    return _probe_lower_bound(A, q), "probe_lower_bound"


# -- membership ------------------------------------------------------------------

@dataclass
class MembershipReport:
    params: dict
    entries: dict          # (alpha, beta) -> norm at the base grid
    refined: dict          # (alpha, beta) -> norm at the doubled grid
    stable: dict           # (alpha, beta) -> bool
    methods: dict
    verdict: bool = field(init=False)

    def __post_init__(self):
        self.verdict = all(self.stable.values()) and all(
            np.isfinite(v) for v in self.entries.values())

    def rows(self):
        out = []
        for key in sorted(self.entries):
            a, b = key
            out.append({"alpha": list(a), "beta": list(b),
                        "norm": self.entries[key],
                        "norm_refined": self.refined.get(key),
                        "stable": self.stable[key],
                        "method": self.methods[key]})
        return out

    def as_dict(self):
        return {"params": self.params, "rows": self.rows(), "verdict": self.verdict}


def _alpha_beta_range(dim, M, m_tilde):
    alphas = _sp._multi_indices(dim, M)
    betas = _sp._multi_indices(dim, m_tilde)
    return [(tuple(a), tuple(b)) for a in alphas for b in betas]


def membership(T_factory, m, rho, m_tilde, M, q=2.0, grid=None, stability_factor=2.0):
    """Fill the commutator-norm matrix and test A-set membership.

    ``T_factory`` is either a LinearOperator built from a symbol (re-quantized
    on the doubled grid for the stability check) or a callable grid ->
    LinearOperator.  Entries are ``||ad(-ix)^a ad(D)^b T||`` measured from
    ``H^{m - rho |a|}_q`` into ``L^q``; the verdict demands every entry stay
    within ``stability_factor`` under N -> 2N.
    """
    if M > 3 or m_tilde > 2:
        raise ValueError("measured orders capped at M <= 3, m_tilde <= 2")

    if callable(T_factory) and not isinstance(T_factory, LinearOperator):
        factory = T_factory
        grid = grid or _g.Grid(1, 32, 2 * np.pi)
    else:
        T0 = T_factory
        grid = grid or T0.grid
        if T0.symbol is None:
            raise ValueError("stability check needs a symbol or a factory; "
                             "pass a callable grid -> LinearOperator")
        sym = T0.symbol
        factory = lambda g: quantize(sym, g)

    keys = _alpha_beta_range(grid.dim, M, m_tilde)
    entries, refined, stable, methods = {}, {}, {}, {}
    for g, store in ((grid, entries), (grid.refine(), refined)):
        T = factory(g)
        for a, b in keys:
            C = total_commutator(T, a, b)
            # taper: commutator norms are measured over box-decaying probes
            val, method = op_norm(C, s_from=m - rho * sum(a), q=q, taper=True)
            store[(a, b)] = val
            methods[(a, b)] = method
    floor = 1e-9 * max(entries.values(), default=1.0)
    for key in keys:
        lo, hi = sorted((entries[key], refined[key]))
        stable[key] = hi <= stability_factor * max(lo, floor)
    return MembershipReport(
        {"m": m, "rho": rho, "m_tilde": m_tilde, "M": M, "q": q,
         "grid_n": grid.n, "grid_half_length": grid.half_length,
         "stability_factor": stability_factor},
        entries, refined, stable, methods)
