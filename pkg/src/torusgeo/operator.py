"""The nonlinear operator, its linearization, and cone admissibility.

The equation solved by this package is

    Q(u) := u_tt * B_u - |grad u_t|^2 = f,      B_u := lap u - b |grad u|^2 + a(x),

for a scalar field u on T^d x [0, 1] with Dirichlet data at t = 0 and t = 1.
A field is admissible when u_tt > 0, B_u > 0 and Q(u) > 0 at every node;
these three margins are exactly the quantities the damped Newton iteration
keeps positive.

The linearization of Q at u acting on a perturbation h is

    dQ(h) = u_tt * (lap h - 2 b <grad u, grad h>) + B_u * h_tt - 2 <grad h_t, grad u_t>,

assembled here as a sparse matrix over the interior space-time nodes, with
the two Dirichlet layers eliminated into separate boundary coupling blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .mesh import (
    GridSpec,
    ScalarField,
    SpaceField,
    _grad_arrays,
    _lap_array,
    _pad_edge,
    argmin_node,
    d_t_interior,
    d_tt_interior,
    grad_t_interior,
)


class InvalidProblem(ValueError):
    """Raised when problem data violates a structural requirement.

    Carries ``node``, the offending lattice node, when one exists.
    """

    def __init__(self, message: str, node: tuple | None = None):
        super().__init__(message)
        self.node = node


def _space_b_values(w: np.ndarray, a: np.ndarray, b: float, grid: GridSpec) -> np.ndarray:
    """B of a single time slice: lap w - b |grad w|^2 + a."""
    axes = tuple(range(grid.spatial_dim))
    lap = _lap_array(w, axes, grid.hx)
    grads = _grad_arrays(w, axes, grid.hx)
    gsq = np.zeros_like(w)
    for g in grads:
        gsq += g * g
    return lap - b * gsq + a


@dataclass
class ProblemSpec:
    """Problem data: coefficients, right-hand side and Dirichlet layers.

    Invariants checked on construction:

    * ``a > 0`` at every spatial node,
    * ``b >= 0`` and finite,
    * ``f >= 0`` at every node (strict positivity is recorded, not required),
    * both Dirichlet layers satisfy ``lap w - b |grad w|^2 + a > 0``, i.e.
      they belong to the discrete membrane of admissible slices.
    """

    grid: GridSpec
    a: SpaceField
    b: float
    f: ScalarField
    u0: SpaceField
    u1: SpaceField

    def __post_init__(self) -> None:
        for name, fld, kind in (
            ("a", self.a, SpaceField),
            ("f", self.f, ScalarField),
            ("u0", self.u0, SpaceField),
            ("u1", self.u1, SpaceField),
        ):
            if not isinstance(fld, kind):
                raise InvalidProblem(f"{name} must be a {kind.__name__}")
            if fld.grid != self.grid:
                raise InvalidProblem(f"{name} lives on a different grid than the problem")
        self.b = float(self.b)
        if not np.isfinite(self.b) or self.b < 0.0:
            raise InvalidProblem(f"b must be finite and nonnegative, got {self.b}")
        if np.min(self.a.values) <= 0.0:
            node = argmin_node(self.a.values)
            raise InvalidProblem(
                f"a must be positive everywhere; a={float(self.a.values[node])!r} at node {node}", node
            )
        if np.min(self.f.values) < 0.0:
            node = argmin_node(self.f.values)
            raise InvalidProblem(
                f"f must be nonnegative everywhere; f={float(self.f.values[node])!r} at node {node}", node
            )
        for name, w in (("u0", self.u0), ("u1", self.u1)):
            bvals = _space_b_values(w.values, self.a.values, self.b, self.grid)
            if np.min(bvals) <= 0.0:
                node = argmin_node(bvals)
                raise InvalidProblem(
                    f"{name} is not an admissible slice: lap {name} - b|grad {name}|^2 + a = "
                    f"{float(bvals[node])!r} at node {node}",
                    node,
                )

    @property
    def nondegenerate(self) -> bool:
        """True when f is strictly positive at every node."""
        return bool(np.min(self.f.values) > 0.0)

    def boundary_b(self, which: str) -> np.ndarray:
        """B values of one Dirichlet slice ('u0' or 'u1')."""
        w = self.u0 if which == "u0" else self.u1
        return _space_b_values(w.values, self.a.values, self.b, self.grid)


@dataclass
class ConeData:
    """Per-node quantities entering the operator, cached for reuse.

    All interior arrays have shape ``(Nt - 2,) + spatial_shape``; ``b_full``
    covers every time layer. ``grad_u`` holds the spatial gradient of u at
    the interior layers, ``grad_ut`` the mixed derivatives there.
    """

    utt: np.ndarray
    b_full: np.ndarray
    grad_u: list
    grad_ut: list
    q: np.ndarray

    @property
    def b_interior(self) -> np.ndarray:
        return self.b_full[1:-1]

    def admissible(self) -> bool:
        return (
            float(np.min(self.utt)) > 0.0
            and float(np.min(self.b_full)) > 0.0
            and float(np.min(self.q)) > 0.0
        )


def cone_quantities(u_values: np.ndarray, spec: ProblemSpec) -> ConeData:
    """Compute u_tt, B_u, grad u, grad u_t and Q for a full-shape value array."""
    grid = spec.grid
    axes = tuple(range(1, 1 + grid.spatial_dim))
    lap = _lap_array(u_values, axes, grid.hx)
    grads = _grad_arrays(u_values, axes, grid.hx)
    gsq = np.zeros_like(u_values)
    for g in grads:
        gsq += g * g
    b_full = lap - spec.b * gsq + spec.a.values
    utt = d_tt_interior(u_values, grid.ht)
    grad_ut = grad_t_interior(u_values, grid)
    q = utt * b_full[1:-1]
    for g in grad_ut:
        q -= g * g
    return ConeData(
        utt=utt,
        b_full=b_full,
        grad_u=[g[1:-1] for g in grads],
        grad_ut=grad_ut,
        q=q,
    )


def compute_B(u: ScalarField, spec: ProblemSpec) -> ScalarField:
    """B_u = lap u - b |grad u|^2 + a, defined on every time layer."""
    cone = cone_quantities(u.values, spec)
    return ScalarField(spec.grid, cone.b_full)


def apply_Q(u: ScalarField, spec: ProblemSpec) -> ScalarField:
    """Q(u) on the interior layers, returned edge-padded to full shape."""
    cone = cone_quantities(u.values, spec)
    return ScalarField(spec.grid, _pad_edge(cone.q))


def residual(u: ScalarField, spec: ProblemSpec, rhs: ScalarField) -> tuple[ScalarField, float]:
    """Q(u) - rhs on the interior layers and its sup-norm.

    The returned field is edge-padded, so its sup-norm equals the interior
    sup-norm reported alongside it.
    """
    cone = cone_quantities(u.values, spec)
    res = cone.q - rhs.values[1:-1]
    return ScalarField(spec.grid, _pad_edge(res)), float(np.max(np.abs(res)))


@dataclass
class AdmissibilityReport:
    """Pointwise minima of the three cone margins with their locations.

    ``min_utt`` and ``min_q`` are taken over interior layers (layer indices
    refer to the full time axis); ``min_b`` is taken over every layer since
    B is defined on the Dirichlet layers too.
    """

    min_utt: float
    loc_utt: tuple
    min_b: float
    loc_b: tuple
    min_q: float
    loc_q: tuple
    admissible: bool

    @classmethod
    def from_cone(cls, cone: ConeData) -> "AdmissibilityReport":
        iu = argmin_node(cone.utt)
        ib = argmin_node(cone.b_full)
        iq = argmin_node(cone.q)
        min_utt = float(cone.utt[iu])
        min_b = float(cone.b_full[ib])
        min_q = float(cone.q[iq])
        return cls(
            min_utt=min_utt,
            loc_utt=(iu[0] + 1,) + iu[1:],
            min_b=min_b,
            loc_b=ib,
            min_q=min_q,
            loc_q=(iq[0] + 1,) + iq[1:],
            admissible=bool(min_utt > 0.0 and min_b > 0.0 and min_q > 0.0),
        )


def symbol_matrix(utt: float, b_value: float, grad_ut) -> np.ndarray:
    """Symbol of the linearization at one node: [[B, -g^T], [-g, utt * I]]."""
    g = np.atleast_1d(np.asarray(grad_ut, dtype=float))
    d = g.size
    m = np.empty((d + 1, d + 1))
    m[0, 0] = b_value
    m[0, 1:] = -g
    m[1:, 0] = -g
    m[1:, 1:] = utt * np.eye(d)
    return m


def ellipticity_check(u: ScalarField, spec: ProblemSpec) -> tuple[AdmissibilityReport, np.ndarray]:
    """Admissibility report plus the per-node symbol verdict.

    The symbol matrix ``[[B, -grad u_t^T], [-grad u_t, u_tt I]]`` is positive
    definite exactly when ``u_tt > 0`` and its Schur complement
    ``B - |grad u_t|^2 / u_tt`` is positive, i.e. when ``u_tt > 0`` and
    ``Q > 0``. The verdict array marks interior nodes where both hold.
    """
    cone = cone_quantities(u.values, spec)
    report = AdmissibilityReport.from_cone(cone)
    verdict = (cone.utt > 0.0) & (cone.q > 0.0)
    return report, verdict


def first_order_data(phi: ScalarField) -> tuple[np.ndarray, list[np.ndarray]]:
    """(phi_t, grad phi) on the interior layers, for use with :func:`q_form`."""
    grid = phi.grid
    phi_t = d_t_interior(phi.values, grid.ht)
    axes = tuple(range(1, 1 + grid.spatial_dim))
    grads = [g[1:-1] for g in _grad_arrays(phi.values, axes, grid.hx)]
    return phi_t, grads


def q_form(u: ScalarField, spec: ProblemSpec, dphi, dpsi) -> ScalarField:
    """Polarized quadratic form of the linearization at u.

    ``dphi`` and ``dpsi`` are ``(phi_t, [phi_x, ...])`` pairs of interior
    arrays as produced by :func:`first_order_data`. The value at each node is

        u_tt <grad phi, grad psi> + B_u phi_t psi_t
        - <grad u_t, phi_t grad psi + psi_t grad phi>,

    which is nonnegative for ``dphi == dpsi`` at admissible u because it is
    the symbol matrix applied to the pair. Returned edge-padded.
    """
    cone = cone_quantities(u.values, spec)
    phi_t, phi_g = dphi
    psi_t, psi_g = dpsi
    dim = spec.grid.spatial_dim
    if len(phi_g) != dim or len(psi_g) != dim:
        raise ValueError(f"first-order data must carry {dim} gradient components")
    out = cone.b_interior * (phi_t * psi_t)
    for ga, gb, gut in zip(phi_g, psi_g, cone.grad_ut):
        out += cone.utt * (ga * gb)
        out -= gut * (phi_t * gb + psi_t * ga)
    return ScalarField(spec.grid, _pad_edge(out))


# ---------------------------------------------------------------------------
# Linearization assembly.
# ---------------------------------------------------------------------------


def _neighbor_tables(grid: GridSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Flat spatial index of the +1 and -1 neighbor along each axis."""
    n = grid.nodes_per_axis
    if grid.spatial_dim == 1:
        idx = np.arange(n)
        return [(idx + 1) % n], [(idx - 1) % n]
    ii, jj = np.divmod(np.arange(grid.num_spatial), n)
    plus = [((ii + 1) % n) * n + jj, ii * n + (jj + 1) % n]
    minus = [((ii - 1) % n) * n + jj, ii * n + (jj - 1) % n]
    return plus, minus


@dataclass
class LinearSystem:
    """Sparse linearization over interior nodes with Dirichlet couplings.

    ``matrix`` couples interior unknowns, ordered time-major: the unknown at
    interior layer k (full-axis index k in 1..Nt-2) and flat spatial node j
    has row ``(k - 1) * num_spatial + j``. ``boundary0`` and ``boundary1``
    hold the stencil entries reaching into the t = 0 and t = 1 layers, so the
    action of the full stencil on a field h is

        matrix @ h_interior + boundary0 @ h[0] + boundary1 @ h[-1].

    ``rhs`` is a ready-to-solve right-hand side over interior nodes (zero
    unless a target was supplied at assembly time).
    """

    grid: GridSpec
    matrix: sps.csr_matrix
    boundary0: sps.csr_matrix
    boundary1: sps.csr_matrix
    rhs: np.ndarray

    def apply(self, h) -> np.ndarray:
        """Stencil action on a full-shape field, returned as interior layers."""
        vals = h.values if hasattr(h, "values") else np.asarray(h, dtype=float)
        if vals.shape != self.grid.field_shape:
            raise ValueError(f"expected full field shape {self.grid.field_shape}, got {vals.shape}")
        m = self.grid.interior_layers
        flat = self.matrix @ vals[1:-1].reshape(m * self.grid.num_spatial)
        flat = flat + self.boundary0 @ vals[0].ravel()
        flat = flat + self.boundary1 @ vals[-1].ravel()
        return flat.reshape((m,) + self.grid.spatial_shape)

    def solve_interior(self, g=None) -> np.ndarray:
        """Solve for the interior correction with zero Dirichlet layers.

        ``g`` is an interior-layer array (defaults to ``rhs``). Returns a
        full-shape array whose boundary layers are zero. Uses a sparse direct
        factorization, falling back to preconditioned GMRES if the
        factorization fails.
        """
        target = self.rhs if g is None else np.asarray(g, dtype=float).ravel()
        try:
            x = spla.spsolve(self.matrix.tocsc(), target)
        except Exception:
            ilu = spla.spilu(self.matrix.tocsc(), drop_tol=1e-12, fill_factor=40)
            prec = spla.LinearOperator(self.matrix.shape, ilu.solve)
            x, info = spla.lgmres(self.matrix, target, M=prec, atol=1e-14, rtol=1e-13, maxiter=2000)
            if info != 0:
                raise RuntimeError(f"iterative fallback failed with status {info}")
        if not np.all(np.isfinite(x)):
            raise RuntimeError("linear solve produced non-finite values")
        out = np.zeros(self.grid.field_shape)
        out[1:-1] = x.reshape((self.grid.interior_layers,) + self.grid.spatial_shape)
        return out

    def export_triplets(self, path) -> None:
        """Write the interior matrix as 'row,col,value' text, row-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{int(r)},{int(c)},{v:.17g}\n")


def assemble_dQ(
    u: ScalarField,
    spec: ProblemSpec,
    rhs: ScalarField | None = None,
    cone: ConeData | None = None,
) -> LinearSystem:
    """Assemble the linearization of Q at u over the interior nodes.

    The stencil at interior node (k, i) couples the node itself, its two time
    neighbors, its 2d spatial neighbors, and the 4d time-space corners coming
    from the mixed term. Entries reaching the Dirichlet layers land in the
    boundary blocks. When ``rhs`` is given, the system right-hand side is set
    to ``rhs - Q(u)`` on the interior so that ``solve_interior()`` returns
    the Newton correction toward ``Q = rhs``.
    """
    grid = spec.grid
    if cone is None:
        cone = cone_quantities(u.values, spec)
    m = grid.interior_layers
    nsp = grid.num_spatial
    n = m * nsp
    hx, ht, b = grid.hx, grid.ht, spec.b
    dim = grid.spatial_dim

    utt = cone.utt.reshape(m, nsp)
    b_int = cone.b_interior.reshape(m, nsp)
    grad_u = [g.reshape(m, nsp) for g in cone.grad_u]
    grad_ut = [g.reshape(m, nsp) for g in cone.grad_ut]

    rows_all = np.arange(n).reshape(m, nsp)
    layer_base = (np.arange(m) * nsp)[:, None]
    plus, minus = _neighbor_tables(grid)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    b0_rows: list[np.ndarray] = []
    b0_cols: list[np.ndarray] = []
    b0_data: list[np.ndarray] = []
    b1_rows: list[np.ndarray] = []
    b1_cols: list[np.ndarray] = []
    b1_data: list[np.ndarray] = []

    def put(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> None:
        rows.append(r.ravel())
        cols.append(c.ravel())
        data.append(v.ravel())

    # Diagonal: spatial second-difference centers plus the time center.
    diag = (-2.0 * dim / (hx * hx)) * utt - (2.0 / (ht * ht)) * b_int
    put(rows_all, rows_all, diag)

    # Spatial neighbors, including the advective part from -2b <grad u, grad h>.
    for ax in range(dim):
        drift = (b / hx) * utt * grad_u[ax]
        base = utt / (hx * hx)
        put(rows_all, layer_base + plus[ax][None, :], base - drift)
        put(rows_all, layer_base + minus[ax][None, :], base + drift)

    # Time neighbors carry B_u / ht^2; end layers couple to the Dirichlet data.
    ct = b_int / (ht * ht)
    if m > 1:
        put(rows_all[1:], rows_all[:-1], ct[1:])
        put(rows_all[:-1], rows_all[1:], ct[:-1])
    b0_rows.append(rows_all[0])
    b0_cols.append(np.arange(nsp))
    b0_data.append(ct[0])
    b1_rows.append(rows_all[-1])
    b1_cols.append(np.arange(nsp))
    b1_data.append(ct[-1])

    # Corner entries from -2 <grad h_t, grad u_t>; coefficient
    # -eps_t * eps_x * u_{x_a t} / (2 hx ht) at offset (eps_t, eps_x e_a).
    for ax in range(dim):
        for eps_x, table in ((1, plus[ax]), (-1, minus[ax])):
            col_sp = table[None, :]
            for eps_t in (1, -1):
                coeff = (-eps_t * eps_x / (2.0 * hx * ht)) * grad_ut[ax]
                if eps_t == 1:
                    if m > 1:
                        put(rows_all[:-1], layer_base[1:] + col_sp, coeff[:-1])
                    b1_rows.append(rows_all[-1])
                    b1_cols.append(np.broadcast_to(table, (nsp,)))
                    b1_data.append(coeff[-1])
                else:
                    if m > 1:
                        put(rows_all[1:], layer_base[:-1] + col_sp, coeff[1:])
                    b0_rows.append(rows_all[0])
                    b0_cols.append(np.broadcast_to(table, (nsp,)))
                    b0_data.append(coeff[0])

    matrix = sps.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    boundary0 = sps.coo_matrix(
        (
            np.concatenate([v.ravel() for v in b0_data]),
            (np.concatenate([r.ravel() for r in b0_rows]), np.concatenate([c.ravel() for c in b0_cols])),
        ),
        shape=(n, nsp),
    ).tocsr()
    boundary1 = sps.coo_matrix(
        (
            np.concatenate([v.ravel() for v in b1_data]),
            (np.concatenate([r.ravel() for r in b1_rows]), np.concatenate([c.ravel() for c in b1_cols])),
        ),
        shape=(n, nsp),
    ).tocsr()

    if rhs is not None:
        rhs_vec = (rhs.values[1:-1].reshape(m, nsp) - cone.q.reshape(m, nsp)).ravel()
    else:
        rhs_vec = np.zeros(n)
    return LinearSystem(grid=grid, matrix=matrix, boundary0=boundary0, boundary1=boundary1, rhs=rhs_vec)
