"""Mechanical systems with an Abelian symmetry split.

Coordinates are ordered shape block first, group block second, everywhere:
q = (x^1..x^ns, theta^1..theta^ng).  Only the shape coordinates enter the
kinetic metric; the potential may depend on group coordinates when the
symmetry is broken (inclined-cart case).
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import fields as fl
from .fields import SmoothField
from .jets import fd_value_grad_hess
from .report import ResidualEntry, ResidualReport

__all__ = [
    "Dims",
    "State",
    "CartpoleParams",
    "InclineParams",
    "MechanicalSystem",
    "build_mechanical_system",
    "cartpole_system",
    "incline_system",
    "validate_system",
    "synthetic_sm_system",
]


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Dims:
    n_shape: int
    n_group: int

    def __post_init__(self):
        if self.n_shape < 1 or self.n_group < 1:
            raise DimensionError("need at least one shape and one group coordinate")

    @property
    def total(self) -> int:
        return self.n_shape + self.n_group


@dataclass(frozen=True)
class State:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qdot", np.asarray(self.qdot, dtype=float))
        if self.q.shape != self.qdot.shape:
            raise DimensionError("q and qdot lengths differ")

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class CartpoleParams:
    """Pendulum bob m on a cart M, pendulum length l."""

    m: float = 0.14
    M: float = 0.44
    l: float = 0.215
    grav: float = 9.81

    def __post_init__(self):
        if min(self.m, self.M, self.l, self.grav) <= 0:
            raise ValueError("all cart-pole parameters must be positive")

    @property
    def alpha(self) -> float:
        return self.m * self.l ** 2

    @property
    def beta(self) -> float:
        return self.m * self.l

    @property
    def gamma(self) -> float:
        return self.m + self.M

    @property
    def d(self) -> float:
        return -self.m * self.grav * self.l


@dataclass(frozen=True)
class InclineParams(CartpoleParams):
    """Cart-pole on an incline of angle psi."""

    psi: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if abs(self.psi) >= np.pi / 2:
            raise ValueError("|psi| must be below pi/2")


class MechanicalSystem:
    """Block kinetic metric over shape coordinates plus a potential.

    Blocks are matrices of SmoothField over the shape coordinates; V is a
    SmoothField over all coordinates.  Instances are immutable; first-partial
    fields of every block entry are precomputed for jet evaluation.
    """

    def __init__(self, dims: Dims, g_ss, g_sg, g_gg, V: SmoothField,
                 breaks_group_symmetry: bool = False):
        self.dims = dims
        self.g_ss = tuple(tuple(row) for row in g_ss)
        self.g_sg = tuple(tuple(row) for row in g_sg)
        self.g_gg = tuple(tuple(row) for row in g_gg)
        self.V = V
        self.breaks_group_symmetry = breaks_group_symmetry
        self.V_partials = tuple(V.partial(i) for i in range(dims.total))
        ns = dims.n_shape
        self.g_ss_partials = tuple(tuple(tuple(f.partial(k) for k in range(ns)) for f in row)
                                   for row in self.g_ss)
        self.g_sg_partials = tuple(tuple(tuple(f.partial(k) for k in range(ns)) for f in row)
                                   for row in self.g_sg)
        self.g_gg_partials = tuple(tuple(tuple(f.partial(k) for k in range(ns)) for f in row)
                                   for row in self.g_gg)

    # -- float evaluation ------------------------------------------------------

    def gss(self, x: np.ndarray) -> np.ndarray:
        return np.array([[f.value(x) for f in row] for row in self.g_ss])

    def gsg(self, x: np.ndarray) -> np.ndarray:
        return np.array([[f.value(x) for f in row] for row in self.g_sg])

    def ggg(self, x: np.ndarray) -> np.ndarray:
        return np.array([[f.value(x) for f in row] for row in self.g_gg])

    def metric(self, x: np.ndarray) -> np.ndarray:
        """Full block metric at shape coordinates x."""
        gss, gsg, ggg = self.gss(x), self.gsg(x), self.ggg(x)
        top = np.hstack([gss, gsg])
        bot = np.hstack([gsg.T, ggg])
        return np.vstack([top, bot])

    def metric_d1(self, x: np.ndarray) -> np.ndarray:
        """d(metric)/dx^k, shape (n, n, n_shape)."""
        n, ns, ng = self.dims.total, self.dims.n_shape, self.dims.n_group
        out = np.zeros((n, n, ns))
        for i in range(ns):
            for j in range(ns):
                out[i, j, :] = self.g_ss[i][j].d1(x)
        for i in range(ns):
            for a in range(ng):
                d = self.g_sg[i][a].d1(x)
                out[i, ns + a, :] = d
                out[ns + a, i, :] = d
        for a in range(ng):
            for b in range(ng):
                out[ns + a, ns + b, :] = self.g_gg[a][b].d1(x)
        return out

    def V_value(self, q: np.ndarray) -> float:
        return self.V.value(np.asarray(q, dtype=float))

    def V_d1(self, q: np.ndarray) -> np.ndarray:
        return self.V.d1(np.asarray(q, dtype=float))

    def V_d2(self, q: np.ndarray) -> np.ndarray:
        return self.V.d2(np.asarray(q, dtype=float))


def _check_block(name: str, block, rows: int, cols: int, arity: int, symmetric: bool,
                 probes: np.ndarray) -> None:
    if len(block) != rows or any(len(r) != cols for r in block):
        raise DimensionError(f"{name} must be {rows}x{cols}")
    for row in block:
        for f in row:
            if f.arity != arity:
                raise DimensionError(f"{name} entries must have arity {arity}")
    if symmetric:
        for x in probes:
            m = np.array([[f.value(x) for f in row] for row in block])
            if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
                raise ValueError(f"non-symmetric block supplied: {name}")


def build_mechanical_system(dims: Dims, g_ss, g_sg, g_gg, V: SmoothField,
                            breaks_group_symmetry: bool = False) -> MechanicalSystem:
    """Validate block shapes/symmetry and assemble the system.

    Full derivative-consistency and positive-definiteness checks are deferred
    to `validate_system`.
    """
    ns, ng, n = dims.n_shape, dims.n_group, dims.total
    rng = np.random.default_rng(0)
    probes = rng.uniform(-1.0, 1.0, size=(4, ns))
    _check_block("g_ss", g_ss, ns, ns, ns, True, probes)
    _check_block("g_sg", g_sg, ns, ng, ns, False, probes)
    _check_block("g_gg", g_gg, ng, ng, ns, True, probes)
    if V.arity != n:
        raise DimensionError(f"V must have arity {n}")
    return MechanicalSystem(dims, g_ss, g_sg, g_gg, V, breaks_group_symmetry)


def cartpole_system(p: CartpoleParams) -> MechanicalSystem:
    """Inverted pendulum on a cart: g_ss=[alpha], g_sg=[beta cos x], g_gg=[gamma]."""
    dims = Dims(1, 1)
    x = fl.coordinate(0, 1)
    g_ss = [[fl.constant(p.alpha, 1)]]
    g_sg = [[p.beta * fl.cos_of(x)]]
    g_gg = [[fl.constant(p.gamma, 1)]]
    # V(x, s) = -d cos x, independent of the cart position
    xq = fl.coordinate(0, 2)
    V = -p.d * fl.cos_of(xq)
    return build_mechanical_system(dims, g_ss, g_sg, g_gg, V)


def incline_system(p: InclineParams) -> MechanicalSystem:
    """Cart-pole on an incline: coupling rotated by psi, potential gains a slope term."""
    dims = Dims(1, 1)
    x = fl.coordinate(0, 1)
    g_ss = [[fl.constant(p.alpha, 1)]]
    g_sg = [[p.beta * fl.cos_of(x - fl.constant(p.psi, 1))]]
    g_gg = [[fl.constant(p.gamma, 1)]]
    xq = fl.coordinate(0, 2)
    sq = fl.coordinate(1, 2)
    V = -p.d * fl.cos_of(xq) - (p.gamma * p.grav * np.sin(p.psi)) * sq
    return build_mechanical_system(dims, g_ss, g_sg, g_gg, V,
                                   breaks_group_symmetry=(p.psi != 0.0))


def validate_system(sys: MechanicalSystem, n_samples: int = 25,
                    x_range: tuple[float, float] = (-1.3, 1.3),
                    theta_range: tuple[float, float] = (-1.0, 1.0),
                    seed: int = 0) -> ResidualReport:
    """Sample-based sanity report: symmetry, positive-definiteness, derivative consistency.

    Positive-definiteness failure is reported, not raised.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    ns, ng = sys.dims.n_shape, sys.dims.n_group
    rng = np.random.default_rng(seed)
    xs = rng.uniform(x_range[0], x_range[1], size=(n_samples, ns))
    thetas = rng.uniform(theta_range[0], theta_range[1], size=(n_samples, ng))

    sym = 0.0
    min_eig = np.inf
    deriv_err = 0.0
    group_sym = 0.0

    def _deriv_mismatch(f: SmoothField, u: np.ndarray) -> float:
        _, g_fd, h_fd = fd_value_grad_hess(lambda v: np.array([f.value(v)]), u)
        g, h = f.d1(u), f.d2(u)
        scale_g = max(1.0, np.abs(g).max(), np.abs(g_fd).max())
        scale_h = max(1.0, np.abs(h).max(), np.abs(h_fd).max())
        return max(np.abs(g - g_fd[0]).max() / scale_g,
                   np.abs(h - h_fd[0]).max() / scale_h)

    for i in range(n_samples):
        x = xs[i]
        g = sys.metric(x)
        sym = max(sym, np.abs(g - g.T).max())
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (g + g.T)).min()))
        for block in (sys.g_ss, sys.g_sg, sys.g_gg):
            for row in block:
                for f in row:
                    deriv_err = max(deriv_err, _deriv_mismatch(f, x))
        q = np.concatenate([x, thetas[i]])
        deriv_err = max(deriv_err, _deriv_mismatch(sys.V, q))
        if not sys.breaks_group_symmetry:
            group_sym = max(group_sym, np.abs(sys.V_d1(q)[ns:]).max())

    report = ResidualReport("system validation")
    report.add(ResidualEntry.from_value("block_symmetry", sym, 1e-12))
    report.add(ResidualEntry(name="metric_min_eigenvalue", value=min_eig, tol=0.0,
                             passed=bool(min_eig > 0.0), residual=False,
                             note="pass iff min eigenvalue > 0"))
    report.add(ResidualEntry.from_value("derivative_consistency", deriv_err, 1e-5))
    if sys.breaks_group_symmetry:
        report.add(ResidualEntry.skip("group_symmetry", "potential breaks group symmetry"))
    else:
        report.add(ResidualEntry.from_value("group_symmetry", group_sym, 1e-12))
    return report


def synthetic_sm_system(seed: int, dims: Dims) -> tuple[MechanicalSystem, float]:
    """Random system satisfying the simplified matching structure.

    Constant group block, shape-coupling fields that are gradients in the
    shape index (so the cross-derivative condition holds), smooth potential.
    Returns the system together with a positive sigma scalar.
    """
    rng = np.random.default_rng(seed)
    ns, ng = dims.n_shape, dims.n_group

    # constant SPD group block
    B = rng.normal(size=(ng, ng))
    ggg_mat = np.eye(ng) + 0.25 * (B + B.T) + 0.5 * np.diag(rng.uniform(0.0, 1.0, ng))
    w = np.linalg.eigvalsh(ggg_mat).min()
    if w < 0.4:
        ggg_mat += (0.5 - w) * np.eye(ng)
    g_gg = [[fl.constant(ggg_mat[a][b], ns) for b in range(ng)] for a in range(ng)]

    # g_{alpha a} = d(chi_a)/dx^alpha with chi_a = c_a sin(p.x + phi_a)
    g_sg_cols = []
    for a in range(ng):
        c = rng.uniform(0.1, 0.3)
        p = rng.uniform(-1.0, 1.0, size=ns)
        phi = rng.uniform(0.0, 2 * np.pi)
        arg = fl.linear(p, phi, ns)
        col = [c * p[al] * fl.cos_of(arg) for al in range(ns)]
        g_sg_cols.append(col)
    g_sg = [[g_sg_cols[a][al] for a in range(ng)] for al in range(ns)]

    # shape block: dominant constant diagonal plus small smooth symmetric wiggle
    base = 2.0 + rng.uniform(0.0, 1.0, size=ns)
    g_ss = [[fl.constant(0.0, ns) for _ in range(ns)] for _ in range(ns)]
    for i in range(ns):
        for j in range(i, ns):
            amp = rng.uniform(0.05, 0.2)
            p = rng.uniform(-1.0, 1.0, size=ns)
            phi = rng.uniform(0.0, 2 * np.pi)
            f = amp * fl.cos_of(fl.linear(p, phi, ns))
            if i == j:
                f = f + fl.constant(base[i], ns)
            g_ss[i][j] = f
            g_ss[j][i] = f

    n = dims.total
    amp = rng.uniform(0.2, 0.8)
    pv = np.zeros(n)
    pv[:ns] = rng.uniform(-1.0, 1.0, size=ns)
    V = amp * fl.cos_of(fl.linear(pv, rng.uniform(0, 2 * np.pi), n))

    sigma = rng.uniform(0.5, 2.0)
    return build_mechanical_system(dims, g_ss, g_sg, g_gg, V), float(sigma)
