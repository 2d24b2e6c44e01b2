"""Oscillatory integrals ``os-iint e^{-i y.eta} a(y, eta) dy deta``.

Two evaluators are provided, matching the two classical constructions:

* :func:`oscint_regularized` damps with ``chi(eps*y, eps*eta)`` along a
  decreasing schedule and Richardson-extrapolates in ``eps**2``;
* :func:`oscint_ibp` applies the integration-by-parts operators
  ``A^l(D_y, eta)`` / ``A^l'(D_eta, y)`` first and sums the absolutely
  integrable result directly.

Quadrature lives on the dual lattice of a :class:`psido.grid.Grid`, so the
node spacings satisfy ``dy * deta = 2*pi/n`` and the discrete inversion
identity ``os-iint e^{-i y.eta} g(y) = g(0)`` is exact for on-lattice data.
"""

from dataclasses import dataclass, field

import numpy as np

from . import grid as _g
from ._kernels import osc_sum

__all__ = [
    "Amplitude",
    "Regularizer",
    "OscResult",
    "gaussian_regularizer",
    "compact_regularizer",
    "ibp_apply",
    "oscint_regularized",
    "oscint_ibp",
    "oscint_iterated",
]

DEFAULT_SCHEDULE = (0.4, 0.2, 0.1, 0.05)


def _default_quadrature(n):
    return _g.Grid(1, 64, 4.0 * np.pi) if n == 1 else _g.Grid(1, 32, 3.0 * np.pi)


@dataclass
class Amplitude:
    """Amplitude ``a(y, eta)`` on n+n variables with growth metadata.

    ``func`` broadcasts over arrays and takes ``2n`` arguments
    ``(y_1..y_n, eta_1..eta_n)``.  ``m`` and ``tau`` bound the growth in
    ``eta`` and ``y``; ``N_budget`` is the eta-smoothness budget (None for
    unlimited).  ``quadrature`` fixes the per-axis lattice.
    """

    func: callable
    m: float = 0.0
    tau: float = 0.0
    N_budget: int | None = None
    n: int = 1
    quadrature: _g.Grid | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("amplitude blocks support n in {1, 2}")
        if self.quadrature is None:
            self.quadrature = _default_quadrature(self.n)

    def axis_nodes(self):
        return self.quadrature.axis_nodes()

    def axis_freqs(self):
        return self.quadrature.axis_freqs()

    def spot_check(self, samples=64, seed=0):
        """Finiteness / growth-bound sampling of the raw evaluator."""
        rng = np.random.default_rng(seed)
        y = rng.uniform(-self.quadrature.half_length, self.quadrature.half_length,
                        (samples, self.n))
        eta_max = float(np.max(np.abs(self.axis_freqs())))
        eta = rng.uniform(-eta_max, eta_max, (samples, self.n))
        vals = self.func(*(list(y.T) + list(eta.T)))
        if not np.all(np.isfinite(vals)):
            return False
        bound = (1.0 + np.linalg.norm(eta, axis=1)) ** self.m \
            * (1.0 + np.linalg.norm(y, axis=1)) ** self.tau
        ratio = np.abs(vals) / np.maximum(bound, 1e-300)
        return bool(np.max(ratio) < 1e6)


@dataclass
class Regularizer:
    """Damping function ``chi`` with ``chi(0,0) = 1`` and an eps schedule."""

    chi: callable
    schedule: tuple = DEFAULT_SCHEDULE
    name: str = "chi"

    def __post_init__(self):
        sched = tuple(float(e) for e in self.schedule)
        if not sched or any(e <= 0 for e in sched):
            raise ValueError("schedule must be positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly decreasing")
        self.schedule = sched
        probe = complex(np.asarray(self.chi(np.zeros(1), np.zeros(1))).ravel()[0])
        if abs(probe - 1.0) > 1e-12:
            raise ValueError("chi(0, 0) must equal 1")


def gaussian_regularizer(schedule=DEFAULT_SCHEDULE):
    return Regularizer(lambda r_y, r_eta: np.exp(-(r_y ** 2 + r_eta ** 2) / 2.0),
                       schedule, name="gaussian")


def compact_regularizer(schedule=DEFAULT_SCHEDULE):
    def chi(r_y, r_eta):
        r = np.sqrt(r_y ** 2 + r_eta ** 2)
        return _g.smooth_cutoff(r, 0.5, 1.0)

    return Regularizer(chi, schedule, name="compact-smoothstep")


@dataclass
class OscResult:
    value: complex
    method: str
    trace: list = field(default_factory=list)
    converged: bool = True

    def trace_rows(self):
        return [{"epsilon": t["epsilon"],
                 "value_re": t["value"].real,
                 "value_im": t["value"].imag,
                 "delta": t["delta"]} for t in self.trace]


# -- lattice evaluation --------------------------------------------------------

def _lattice_mesh(a):
    """Flattened y nodes, eta nodes, weights and |.|-radii for the sum."""
    y = a.axis_nodes()
    eta = a.axis_freqs()
    g = a.quadrature
    wy = g.spacing
    we = g.freq_spacing / (2.0 * np.pi)
    if a.n == 1:
        return (y,), (eta,), np.full(y.size, wy), np.full(eta.size, we)
    y1, y2 = np.meshgrid(y, y, indexing="ij")
    e1, e2 = np.meshgrid(eta, eta, indexing="ij")
    return ((y1.ravel(), y2.ravel()), (e1.ravel(), e2.ravel()),
            np.full(y1.size, wy ** 2), np.full(e1.size, we ** 2))


def _weighted_sum(a, eps=None, chi=None):
    ys, etas, wy, we = _lattice_mesh(a)
    if a.n == 1:
        amp = np.asarray(a.func(ys[0][:, None], etas[0][None, :]), dtype=np.complex128)
        amp = np.broadcast_to(amp, (ys[0].size, etas[0].size)).copy()
        if eps is None:
            chi_arr = np.ones_like(amp)
        else:
            ry = np.abs(eps * ys[0])[:, None]
            re = np.abs(eps * etas[0])[None, :]
            chi_arr = np.broadcast_to(
                np.asarray(chi(ry, re), dtype=np.complex128), amp.shape).copy()
        return osc_sum(amp, ys[0], etas[0], wy, we, chi_arr)
    # n = 2: chunk over the flattened y mesh
    total = 0.0 + 0.0j
    e1, e2 = etas
    chunk = 512
    for start in range(0, ys[0].size, chunk):
        sl = slice(start, start + chunk)
        y1c, y2c = ys[0][sl], ys[1][sl]
        amp = np.asarray(
            a.func(y1c[:, None], y2c[:, None], e1[None, :], e2[None, :]),
            dtype=np.complex128)
        phase = np.exp(-1j * (np.outer(y1c, e1) + np.outer(y2c, e2)))
        if eps is not None:
            ry = eps * np.sqrt(y1c ** 2 + y2c ** 2)[:, None]
            re = eps * np.sqrt(e1 ** 2 + e2 ** 2)[None, :]
            phase = phase * chi(ry, re)
        total += wy[sl] @ (amp * phase) @ we
    return complex(total)


def _richardson(eps, vals):
    """Fit v = v0 + c1 e^2 + c2 e^4 through the last three points."""
    e = np.asarray(eps[-3:], dtype=float)
    v = np.asarray(vals[-3:], dtype=complex)
    if e.size < 3:
        return v[-1]
    A = np.vander(e ** 2, 3, increasing=True)  # columns 1, e^2, e^4
    coef = np.linalg.solve(A, v)
    return complex(coef[0])


def oscint_regularized(a, reg=None):
    """Chi-regularized evaluation along the eps schedule with Richardson
    extrapolation; flags (but still reports) non-decreasing traces."""
    reg = reg or gaussian_regularizer()
    trace = []
    vals = []
    prev = None
    for eps in reg.schedule:
        v = _weighted_sum(a, eps=eps, chi=reg.chi)
        delta = abs(v - prev) if prev is not None else np.nan
        trace.append({"epsilon": eps, "value": v, "delta": float(delta)})
        vals.append(v)
        prev = v
    deltas = [t["delta"] for t in trace[1:]]
    converged = all(b <= a_ + 1e-14 for a_, b in zip(deltas, deltas[1:]))
    value = _richardson(list(reg.schedule), vals) if len(vals) >= 3 else vals[-1]
    return OscResult(value, "regularized", trace, converged)


def oscint_lattice(a):
    """Direct lattice sum (the eps -> 0 limit of the regularized family).

    Absolutely summable only when the amplitude itself decays; used
    internally where window decay guarantees that.
    """
    return OscResult(_weighted_sum(a), "lattice")


# -- integration by parts -----------------------------------------------------
#
# Derivatives are 4th-order centered finite differences.  Repeated operators
# like (1 - Laplace)^k are pre-composed into a single tap dictionary
# {offset tuple: coefficient}, so one A-application costs O(taps) evaluator
# calls instead of 5^k nested ones.

_FD1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}          # f' * step
_FD2 = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}  # f'' * step^2


def _axis_stencil(taps, axis, nargs, power, step):
    return {tuple(off if i == axis else 0 for i in range(nargs)): c / step ** power
            for off, c in taps.items()}


def _stencil_conv(s1, s2):
    out = {}
    for o1, c1 in s1.items():
        for o2, c2 in s2.items():
            key = tuple(a + b for a, b in zip(o1, o2))
            out[key] = out.get(key, 0.0) + c1 * c2
    return {k: v for k, v in out.items() if v != 0.0}


def _stencil_sub(s1, s2):
    out = dict(s1)
    for o, c in s2.items():
        out[o] = out.get(o, 0.0) - c
        if out[o] == 0.0:
            del out[o]
    return out


def _one_minus_laplace_stencil(axes, nargs, step, power):
    ident = {tuple(0 for _ in range(nargs)): 1.0}
    s = ident
    for _ in range(power):
        lvl = s
        for ax in axes:
            lvl = _stencil_sub(lvl, _stencil_conv(s, _axis_stencil(_FD2, ax, nargs, 2, step)))
        s = lvl
    return s


def _stencil_eval(func, stencil, args, step):
    acc = None
    for offsets, coeff in stencil.items():
        shifted = [arg + off * step if off else arg for arg, off in zip(args, offsets)]
        term = coeff * np.asarray(func(*shifted), dtype=np.complex128)
        acc = term if acc is None else acc + term
    return acc


def _bracket_of(args, idxs):
    r2 = 0.0
    for i in idxs:
        r2 = r2 + np.asarray(args[i], dtype=float) ** 2
    return np.sqrt(1.0 + r2)


def _A_operator(func, deriv_axes, weight_axes, order, nargs, step):
    """A^order(D_deriv, weight): <w>^-order <D_deriv>^order for even order,
    the two-term w_j/<w> formula for odd order."""
    if order == 0:
        return func

    if order % 2 == 0:
        stencil = _one_minus_laplace_stencil(deriv_axes, nargs, step, order // 2)

        def even(*args):
            return (_bracket_of(args, weight_axes) ** (-order)
                    * _stencil_eval(func, stencil, args, step))

        return even

    base = _one_minus_laplace_stencil(deriv_axes, nargs, step, (order - 1) // 2)
    with_d1 = [(ax, _stencil_conv(base, _axis_stencil(_FD1, ax, nargs, 1, step)))
               for ax in deriv_axes]

    def odd(*args):
        br = _bracket_of(args, weight_axes)
        val = br ** (-order - 1) * _stencil_eval(func, base, args, step)
        for (ax, st), w_ax in zip(with_d1, weight_axes):
            w = np.asarray(args[w_ax], dtype=float)
            # D_j = -i d_j
            val = val - br ** (-order) * (w / br) * (-1j) * _stencil_eval(func, st, args, step)
        return val

    return odd


def ibp_apply(a, l, lprime=0, step=0.02):
    """Return ``A^l'(D_eta, y)[A^l(D_y, eta) a]`` as a new Amplitude.

    Derivatives are 4th-order centered finite differences of the raw
    evaluator with the given step.  The growth metadata drops to
    ``(m - l, tau - l')``.
    """
    if a.N_budget is not None and lprime > a.N_budget:
        raise ValueError(f"l'={lprime} exceeds the eta-smoothness budget {a.N_budget}")
    n = a.n
    nargs = 2 * n
    y_axes = list(range(n))
    eta_axes = list(range(n, 2 * n))
    inner = _A_operator(a.func, y_axes, eta_axes, l, nargs, step)
    outer = _A_operator(inner, eta_axes, y_axes, lprime, nargs, step)
    return Amplitude(outer, m=a.m - l, tau=a.tau - lprime,
                     N_budget=None if a.N_budget is None else a.N_budget - lprime,
                     n=n, quadrature=a.quadrature)


def oscint_ibp(a, l, lprime, step=0.02):
    """Absolutely convergent evaluation after integration by parts.

    Requires the theorem exponents ``l > n + m`` and ``N >= l' > n + tau``.
    """
    n = a.n
    if not l > n + a.m:
        raise ValueError(f"need l > n + m = {n + a.m}, got l={l}")
    if not lprime > n + a.tau:
        raise ValueError(f"need l' > n + tau = {n + a.tau}, got l'={lprime}")
    if a.N_budget is not None and lprime > a.N_budget:
        raise ValueError("l' exceeds the amplitude's smoothness budget")
    b = ibp_apply(a, l, lprime, step=step)
    return OscResult(_weighted_sum(b), "ibp")


# -- iterated integrals --------------------------------------------------------

def oscint_iterated(a4, split=(1, 1), mode="iterated", quadrature=None,
                    schedule=(0.2, 0.1, 0.05)):
    """Oscillatory integral of ``a(y, y', eta, eta')`` over 2n + 2k variables.

    ``mode='iterated'`` evaluates the inner (y', eta') integral first and the
    outer integral on the result (nested damping limits).  ``mode='joint'``
    damps all four variables with one radial Gaussian ``chi`` along the
    schedule and extrapolates.  Their agreement is the numerical content of
    the Fubini property.  Only the split n = k = 1 is supported.
    """
    if tuple(split) != (1, 1):
        raise NotImplementedError("iterated integrals support split (1, 1)")
    if mode not in ("iterated", "joint"):
        raise ValueError("mode must be 'iterated' or 'joint'")
    g = quadrature or _g.Grid(1, 64, 4.0 * np.pi)
    y = g.axis_nodes()
    eta = g.axis_freqs()
    w = g.spacing * g.freq_spacing / (2.0 * np.pi)
    phase = np.exp(-1j * np.outer(y, eta))

    def contract(cy=None, ce=None):
        # sum over (y', eta') for every (y, eta), with optional damping rows
        inner_vals = np.empty((y.size, eta.size), dtype=np.complex128)
        damped_phase = phase if cy is None else phase * np.outer(cy, ce)
        for iy, yv in enumerate(y):
            amp = np.asarray(
                a4.func(yv, y[:, None, None], eta[None, :, None], eta[None, None, :]),
                dtype=np.complex128)
            amp = np.broadcast_to(amp, (y.size, eta.size, eta.size))
            inner_vals[iy] = w * np.einsum("pqr,pr->q", amp, damped_phase)
        return w * np.sum(inner_vals * damped_phase)

    if mode == "iterated":
        return OscResult(complex(contract()), "iterated")

    trace = []
    vals = []
    for eps in schedule:
        cy = np.exp(-(eps * y) ** 2 / 2.0)
        ce = np.exp(-(eps * eta) ** 2 / 2.0)
        v = complex(contract(cy, ce))
        trace.append({"epsilon": eps, "value": v,
                      "delta": abs(v - vals[-1]) if vals else np.nan})
        vals.append(v)
    value = _richardson(list(schedule), vals) if len(vals) >= 3 else vals[-1]
    return OscResult(value, "joint", trace)
