"""Function-space norms: Hoelder-Zygmund, Hoelder, Bessel-potential, and the
dyadic Littlewood-Paley partition plus order-reducing multipliers."""

from dataclasses import dataclass, field

import numpy as np

from . import grid as _g
from ._kernels import hoelder_lags

__all__ = [
    "DyadicPartition",
    "NormReport",
    "zygmund_norm",
    "hoelder_norm",
    "bessel_norm",
    "order_reduce",
    "modulation_growth_check",
]

PROFILE_TAG = "cinf-smoothstep(1,2)"  # radial cutoff: 1 on |xi|<=1, 0 on |xi|>=2


def _profile(r):
    return _g.smooth_cutoff(r, 1.0, 2.0)


@dataclass
class DyadicPartition:
    """Pieces ``phi_0 = psi``, ``phi_j = psi(2^-j .) - psi(2^-j+1 .)`` sampled on
    the frequency mesh of a grid.  The number of pieces is chosen so the
    telescoping sum is exactly one on every node."""

    grid: _g.Grid
    pieces: list = field(init=False)

    def __post_init__(self):
        mesh = self.grid.freq_mesh()
        r = np.sqrt(sum(np.asarray(m, float) ** 2 for m in mesh))
        radius = float(r.max())
        self.j_max = max(1, int(np.ceil(np.log2(max(radius, 2.0)))))
        self.pieces = [_profile(r)]
        for j in range(1, self.j_max + 1):
            self.pieces.append(_profile(r / 2.0 ** j) - _profile(r / 2.0 ** (j - 1)))

    def band(self, f, j):
        """x-space band piece ``F^-1[phi_j fhat]``."""
        fhat = _g.forward_transform(f) if not f.spectral else f
        piece = _g.GridFunction(self.grid, fhat.values * self.pieces[j], spectral=True)
        return _g.inverse_transform(piece)

    def band_sups(self, f):
        fhat = _g.forward_transform(f)
        sups = []
        for piece in self.pieces:
            band = _g.inverse_transform(
                _g.GridFunction(self.grid, fhat.values * piece, spectral=True))
            sups.append(float(np.max(np.abs(band.values))))
        return np.array(sups)

    def partition_defect(self):
        total = sum(self.pieces)
        return float(np.max(np.abs(total - 1.0)))


@dataclass
class NormReport:
    value: float
    space: str
    params: dict
    grid_n: int
    grid_half_length: float
    profile: str = PROFILE_TAG
    refinement: dict = field(default_factory=dict)
    bands: list = field(default_factory=list)

    def as_dict(self):
        return {
            "value": self.value,
            "space": self.space,
            "params": self.params,
            "grid": {"n": self.grid_n, "half_length": self.grid_half_length},
            "profile": self.profile,
            "refinement": self.refinement,
            "bands": self.bands,
        }


def _coarsened(f):
    """Subsample to every second node (same box, N/2)."""
    g2 = f.grid.coarsen()
    sl = (slice(None, None, 2),) * f.grid.dim
    return _g.GridFunction(g2, f.values[sl], spectral=False)


def _with_refinement(compute, f, report):
    coarse = compute(_coarsened(f))
    report.refinement = {
        "value_at_half_n": coarse,
        "change": abs(report.value - coarse),
    }
    return report


def zygmund_norm(f, tau):
    """Hoelder-Zygmund norm ``sup_j 2^{j tau} ||F^-1[phi_j fhat]||_inf``."""
    if not tau > 0:
        raise ValueError("tau must be positive")

    def compute(fn, keep_bands=False):
        part = DyadicPartition(fn.grid)
        sups = part.band_sups(fn)
        weighted = sups * 2.0 ** (tau * np.arange(len(sups)))
        if keep_bands:
            return float(weighted.max()), [
                {"j": j, "sup": float(s), "weighted": float(w)}
                for j, (s, w) in enumerate(zip(sups, weighted))
            ]
        return float(weighted.max())

    value, bands = compute(f, keep_bands=True)
    report = NormReport(value, "zygmund", {"tau": tau},
                        f.grid.n, f.grid.half_length, bands=bands)
    return _with_refinement(compute, f, report)


def _sup_derivatives(f, m):
    """sup |d^alpha f| for all |alpha| <= m, and the |alpha| = m fields."""
    g = f.grid
    multis = _multi_indices(g.dim, m)
    sup = 0.0
    top = []
    for alpha in multis:
        d = _g.derivative(f, alpha)  # D^alpha; |D^alpha f| = |partial^alpha f|
        sup = max(sup, float(np.max(np.abs(d.values))))
        if sum(alpha) == m:
            top.append(d)
    return sup, top


def _multi_indices(dim, order_max):
    if dim == 1:
        return [(a,) for a in range(order_max + 1)]
    return [(a, b) for a in range(order_max + 1) for b in range(order_max + 1 - a)]


def _hoelder_seminorm(field_fn, s):
    """Lower-bound estimate of the Hoelder-s seminorm by grid-pair sweep:
    all lags with separation <= 1 plus a decimated global sample."""
    g = field_fn.grid
    h = g.spacing
    near = int(min(np.floor(1.0 / h), g.n - 1))
    lags = list(range(1, max(near, 1) + 1))
    far = np.unique(np.geomspace(max(near, 1) + 1, g.n - 1, num=16).astype(int))
    lags = np.unique(np.array(lags + [d for d in far if d < g.n], dtype=np.int64))
    if g.dim == 1:
        return float(hoelder_lags(field_fn.values, lags, h, s))
    best = 0.0
    for row in field_fn.values:
        best = max(best, float(hoelder_lags(np.ascontiguousarray(row), lags, h, s)))
    for col in field_fn.values.T:
        best = max(best, float(hoelder_lags(np.ascontiguousarray(col), lags, h, s)))
    return best


def hoelder_norm(f, m, s):
    """``C^{m,s}`` norm: sup of derivatives up to order m plus the Hoelder-s
    seminorm of the top-order derivatives (grid-pair lower bound)."""
    if not (0 < s <= 1):
        raise ValueError("s must lie in (0, 1]")
    if not (0 <= m <= 4):
        raise ValueError("m must be an integer in 0..4")

    def compute(fn):
        sup, top = _sup_derivatives(fn, m)
        semi = max((_hoelder_seminorm(d, s) for d in top), default=0.0)
        return sup + semi

    value = compute(f)
    report = NormReport(value, "hoelder", {"m": m, "s": s},
                        f.grid.n, f.grid.half_length)
    return _with_refinement(compute, f, report)


def bessel_norm(f, s, q):
    """Bessel-potential norm ``|| <D>^s f ||_{L^q}``."""

    def compute(fn):
        shifted = order_reduce(fn, s)
        return _g.lp_norm(shifted, q)

    value = compute(f)
    report = NormReport(value, "bessel", {"s": s, "q": q},
                        f.grid.n, f.grid.half_length)
    return _with_refinement(compute, f, report)


def order_reduce(f, m):
    """Order-reducing multiplier ``<D>^m`` (exact inverse pair on the grid)."""
    if m == 0:
        return f.copy()
    return _g.spectral_multiplier(f, lambda *mesh: _g.bracket_mesh(mesh, m))


_GROWTH_EXPONENT = {"zygmund": lambda mt: mt + 2,
                    "hoelder": lambda mt: mt + 1,
                    "bessel": lambda mt: mt}


def modulation_growth_check(f, space, m_tilde, tau, xi_list):
    """Measure ``||e_xi f||_X / ||f||_X`` over a frequency list and fit the
    growth exponent in ``<xi>``; passes when the fit stays at or below the
    space's modulation budget (m~+2 / m~+1 / m~ for Zygmund / Hoelder /
    Bessel)."""
    if space not in _GROWTH_EXPONENT:
        raise ValueError(f"space must be one of {sorted(_GROWTH_EXPONENT)}")
    xi_list = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xi_list]
    if not xi_list:
        raise ValueError("xi_list must be non-empty")

    def norm_of(fn):
        if space == "zygmund":
            return zygmund_norm(fn, m_tilde + tau).value
        if space == "hoelder":
            return hoelder_norm(fn, m_tilde, tau).value
        return bessel_norm(fn, m_tilde, 2).value

    base = norm_of(f)
    rows = []
    for xi in xi_list:
        ratio = norm_of(_g.modulate(f, xi)) / base
        rows.append({"xi": [float(c) for c in xi],
                     "bracket": _g.bracket(xi),
                     "ratio": float(ratio)})
    logs = np.array([[np.log(r["bracket"]), np.log(r["ratio"])] for r in rows
                     if r["bracket"] > 1.0])
    if logs.size:
        slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    else:
        slope = 0.0
    budget = _GROWTH_EXPONENT[space](m_tilde)
    return {
        "space": space,
        "m_tilde": m_tilde,
        "tau": tau,
        "rows": rows,
        "fitted_exponent": slope,
        "budget_exponent": budget,
        "passes": slope <= budget + 0.1,
    }
