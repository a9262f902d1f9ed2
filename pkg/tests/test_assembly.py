import numpy as np
import pytest
import scipy.sparse as sparse

from gaugefem import (
    EdgeCirculation,
    EmptyProblemError,
    GaugeFieldSpec,
    HermitianSparse,
    MeshGeometryError,
    TransportConsistencyError,
    apply_gauge_to_circulation,
    assemble_scalar_problem,
    build_box_mesh,
    circulate,
    covariant_mass,
    covariant_stiffness,
    eliminate_dirichlet,
    export_matrix,
    interior_dof_map,
    local_covariant_stiffness,
    local_mass,
    make_mesh,
    potential_matrix,
    random_gauge,
    standard_galerkin,
    transports,
    unit_transports,
)

from conftest import perturbed_box_mesh
from oracles import (
    magnetic_galerkin_dense,
    p1_local_stiffness,
    p1_mass_dense,
    p1_stiffness_dense,
    potential_dense,
    simplex_quadrature,
    barycentric_values,
)


def _reference_tet():
    vertices = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    return make_mesh(3, vertices, np.array([[0, 1, 2, 3]]))


def _random_cell(dim, seed):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-1.0, 1.0, (dim + 1, dim))
    while abs(np.linalg.det(coords[1:] - coords[0])) < 1e-2:
        coords = rng.uniform(-1.0, 1.0, (dim + 1, dim))
    return coords


def _random_local_transports(m, seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-np.pi, np.pi, (m, m))
    u = np.exp(1j * np.triu(theta, k=1))
    return np.triu(u, k=1) + np.triu(u, k=1).conj().T + np.eye(m)


# ---------------------------------------------------------------------------
# local mass


def test_local_mass_closed_form_values():
    m3 = local_mass(1 / 6, 3)
    assert np.allclose(np.diag(m3), 1 / 60, rtol=1e-15)
    off = m3[~np.eye(4, dtype=bool)]
    assert np.allclose(off, 1 / 120, rtol=1e-15)

    m2 = local_mass(0.5, 2)
    assert np.allclose(np.diag(m2), 1 / 12, rtol=1e-15)
    assert np.allclose(m2[0, 1], 1 / 24, rtol=1e-15)


def test_local_mass_row_sums():
    for dim, vol in ((2, 0.37), (3, 0.11)):
        m = local_mass(vol, dim)
        assert np.allclose(m.sum(axis=1), vol / (dim + 1), rtol=1e-14)
        assert np.allclose(m, m.T, atol=0)


def test_local_mass_rejects_nonpositive_volume():
    with pytest.raises(MeshGeometryError):
        local_mass(0.0, 3)
    with pytest.raises(MeshGeometryError):
        local_mass(-1.0, 2)


@pytest.mark.parametrize("dim", [2, 3])
def test_local_mass_matches_quadrature(dim):
    coords = _random_cell(dim, seed=dim)
    pts, w = simplex_quadrature(coords)
    lam = barycentric_values(coords, pts)
    reference = np.einsum("q,qa,qb->ab", w, lam, lam)
    assert np.allclose(local_mass(w.sum(), dim), reference, rtol=1e-13)


# ---------------------------------------------------------------------------
# covariant mass


@pytest.mark.parametrize("dim,n", [(2, 3), (3, 2)])
def test_covariant_mass_reduces_to_p1_mass(dim, n):
    mesh = build_box_mesh(dim, n)
    dense = covariant_mass(mesh, unit_transports(mesh)).to_dense()
    reference = p1_mass_dense(mesh.vertices, mesh.cells)
    assert np.allclose(dense, reference, rtol=0, atol=1e-14)
    assert np.max(np.abs(dense.imag)) == 0.0


def test_covariant_mass_single_edge_phase():
    # one reference tetrahedron, transport exp(i pi) on the edge (0, 1):
    # <e0, e1>_U = (1/120) * exp(i pi) = -1/120
    mesh = _reference_tet()
    values = np.zeros(mesh.n_edges)
    values[np.all(mesh.edges == (0, 1), axis=1)] = np.pi
    circ = EdgeCirculation(mesh.n_vertices, mesh.edges, values)
    dense = covariant_mass(mesh, transports(circ)).to_dense()
    assert dense[0, 1] == pytest.approx(-1 / 120, rel=1e-13)
    assert dense[0, 0] == pytest.approx(1 / 60, rel=1e-13)


def test_covariant_mass_hermitian_pairing():
    mesh = build_box_mesh(2, 3)
    circ = circulate(GaugeFieldSpec([0.1, -0.4], [0.0, 0.0, 2.0]), mesh)
    m = covariant_mass(mesh, transports(circ)).to_dense()
    assert np.array_equal(m, m.conj().T)

    rng = np.random.default_rng(0)
    u = rng.standard_normal(mesh.n_vertices) + 1j * rng.standard_normal(mesh.n_vertices)
    v = rng.standard_normal(mesh.n_vertices) + 1j * rng.standard_normal(mesh.n_vertices)
    assert np.vdot(u, m @ v) == pytest.approx(np.conj(np.vdot(v, m @ u)), rel=1e-14)


@pytest.mark.parametrize("dim,n", [(2, 4), (3, 2)])
def test_covariant_mass_positive_definite(dim, n):
    mesh = build_box_mesh(dim, n)
    rng = np.random.default_rng(8)
    values = rng.uniform(-1.0, 1.0, mesh.n_edges)  # |A_xy| <= 1 per edge
    circ = EdgeCirculation(mesh.n_vertices, mesh.edges, values)
    dense = covariant_mass(mesh, transports(circ)).to_dense()
    assert np.linalg.eigvalsh(dense).min() > 0.0


def test_assembly_rejects_foreign_transport_table():
    mesh = build_box_mesh(2, 2)
    other = build_box_mesh(2, 3)
    with pytest.raises(TransportConsistencyError):
        covariant_mass(mesh, unit_transports(other))
    with pytest.raises(TransportConsistencyError):
        covariant_stiffness(mesh, unit_transports(other))


# ---------------------------------------------------------------------------
# covariant stiffness


@pytest.mark.parametrize("dim", [2, 3])
def test_local_stiffness_zero_field_is_p1(dim):
    coords = _random_cell(dim, seed=10 + dim)
    k = local_covariant_stiffness(coords, np.ones((dim + 1, dim + 1)))
    assert np.allclose(k, p1_local_stiffness(coords), rtol=0, atol=1e-13)
    assert np.allclose(k @ np.ones(dim + 1), 0.0, atol=1e-13)


def test_local_stiffness_reference_tet_entry():
    mesh = _reference_tet()
    k = local_covariant_stiffness(mesh.vertices, np.ones((4, 4)))
    assert k[0, 0] == pytest.approx(0.5, rel=1e-14)  # |T| |grad lam_0|^2


@pytest.mark.parametrize("dim", [2, 3])
def test_local_stiffness_hermitian(dim):
    coords = _random_cell(dim, seed=20 + dim)
    k = local_covariant_stiffness(coords, _random_local_transports(dim + 1, 4))
    assert np.max(np.abs(k - k.conj().T)) < 1e-13


def test_local_stiffness_degenerate_cell():
    coords = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]
    )  # coplanar
    with pytest.raises(MeshGeometryError):
        local_covariant_stiffness(coords, np.ones((4, 4)))
    with pytest.raises(ValueError):
        local_covariant_stiffness(coords[:3], np.ones((3, 3)))


def test_global_stiffness_zero_field_is_p1():
    for mesh in (build_box_mesh(2, 2), perturbed_box_mesh(2, 4, seed=1)):
        dense = covariant_stiffness(mesh, unit_transports(mesh)).to_dense()
        reference = p1_stiffness_dense(mesh.vertices, mesh.cells)
        assert np.allclose(dense, reference, rtol=0, atol=1e-14)
        assert np.allclose(dense @ np.ones(mesh.n_vertices), 0.0, atol=1e-13)
        assert np.linalg.eigvalsh(dense).min() >= -1e-12


def test_gauge_transform_conjugates_assembled_matrices():
    mesh = build_box_mesh(2, 3)
    circ = circulate(GaugeFieldSpec([0.0, 0.0], [0.0, 0.0, 1.3]), mesh)
    gauge = random_gauge(mesh, np.pi, seed=3)
    gauged = apply_gauge_to_circulation(circ, gauge)
    d = np.diag(np.exp(1j * gauge.alpha))

    for assemble in (covariant_stiffness, covariant_mass):
        original = assemble(mesh, transports(circ)).to_dense()
        twin = assemble(mesh, transports(gauged)).to_dense()
        assert np.allclose(twin, d @ original @ d.conj().T, rtol=0, atol=1e-13)


# ---------------------------------------------------------------------------
# scalar potential term


def test_potential_constant_is_scaled_mass():
    mesh = build_box_mesh(2, 3)
    u = unit_transports(mesh)
    c = 2.75
    left = potential_matrix(mesh, u, np.full(mesh.n_vertices, c)).to_dense()
    right = c * covariant_mass(mesh, u).to_dense()
    assert np.allclose(left, right, rtol=0, atol=1e-14)


def test_potential_zero_is_zero_matrix():
    mesh = build_box_mesh(2, 2)
    out = potential_matrix(mesh, unit_transports(mesh), np.zeros(mesh.n_vertices))
    assert np.all(out.to_dense() == 0.0)


def test_potential_reference_tet_cubic_integral():
    # V = lam_0 makes entry (0,0) = int lam_0^3 = (1/6) 3! 3! / 6! = 1/120
    mesh = _reference_tet()
    values = np.array([1.0, 0.0, 0.0, 0.0])
    dense = potential_matrix(mesh, unit_transports(mesh), values).to_dense()
    assert dense[0, 0] == pytest.approx(1 / 120, rel=1e-14)


def test_potential_matches_quadrature_with_transports():
    mesh = build_box_mesh(2, 2)
    rng = np.random.default_rng(14)
    values = rng.standard_normal(mesh.n_vertices)
    circ = circulate(GaugeFieldSpec([0.3, -0.2], [0.0, 0.0, 0.9]), mesh)
    table = transports(circ)
    dense = potential_matrix(mesh, table, values).to_dense()
    reference = potential_dense(mesh.vertices, mesh.cells, values, table.value)
    assert np.allclose(dense, reference, rtol=0, atol=1e-13)


def test_potential_validates_samples():
    mesh = build_box_mesh(2, 1)
    u = unit_transports(mesh)
    with pytest.raises(ValueError):
        potential_matrix(mesh, u, np.zeros(3))
    with pytest.raises(ValueError):
        potential_matrix(mesh, u, np.full(mesh.n_vertices, np.nan))


# ---------------------------------------------------------------------------
# conventional baseline


def test_standard_galerkin_zero_field_equals_covariant():
    mesh = build_box_mesh(2, 3)
    circ = EdgeCirculation(mesh.n_vertices, mesh.edges, np.zeros(mesh.n_edges))
    k_std, m_std = standard_galerkin(mesh, circ)
    u = unit_transports(mesh)
    assert np.allclose(
        k_std.to_dense(), covariant_stiffness(mesh, u).to_dense(), rtol=0, atol=1e-14
    )
    assert np.allclose(
        m_std.to_dense(), covariant_mass(mesh, u).to_dense(), rtol=0, atol=1e-14
    )


@pytest.mark.parametrize("dim,n", [(2, 2), (3, 1)])
def test_standard_galerkin_matches_quadrature(dim, n):
    mesh = build_box_mesh(dim, n)
    rng = np.random.default_rng(dim)
    circ = EdgeCirculation(
        mesh.n_vertices, mesh.edges, rng.uniform(-1.0, 1.0, mesh.n_edges)
    )
    k_std, m_std = standard_galerkin(mesh, circ)
    reference = magnetic_galerkin_dense(mesh.vertices, mesh.cells, circ.value)
    assert np.allclose(k_std.to_dense(), reference, rtol=0, atol=1e-13)
    assert np.allclose(
        m_std.to_dense(), p1_mass_dense(mesh.vertices, mesh.cells), rtol=0, atol=1e-14
    )


def test_standard_galerkin_hermitian():
    mesh = build_box_mesh(2, 3)
    rng = np.random.default_rng(2)
    circ = EdgeCirculation(
        mesh.n_vertices, mesh.edges, rng.uniform(-2.0, 2.0, mesh.n_edges)
    )
    k_std, _ = standard_galerkin(mesh, circ)
    dense = k_std.to_dense()
    assert np.array_equal(dense, dense.conj().T)


def test_standard_galerkin_rejects_foreign_circulation():
    mesh = build_box_mesh(2, 2)
    other = build_box_mesh(2, 3)
    circ = EdgeCirculation(other.n_vertices, other.edges, np.zeros(other.n_edges))
    with pytest.raises(TransportConsistencyError):
        standard_galerkin(mesh, circ)


@pytest.mark.parametrize("dim", [2, 3])
def test_covariant_standard_difference_is_first_order(dim):
    # On one cell the two stiffness matrices differ by O(eps) with a nonzero
    # leading coefficient: the max-entry difference divided by eps settles to
    # a finite limit (ratios within 10% while eps drops 100x).
    mesh = (
        build_box_mesh(2, 1)
        if dim == 2
        else _reference_tet()
    )
    rng = np.random.default_rng(6)
    pattern = rng.uniform(-1.0, 1.0, mesh.n_edges)

    rates = []
    for eps in (1e-2, 1e-3, 1e-4):
        circ = EdgeCirculation(mesh.n_vertices, mesh.edges, eps * pattern)
        k_cov = covariant_stiffness(mesh, transports(circ)).to_dense()
        k_std = standard_galerkin(mesh, circ)[0].to_dense()
        rates.append(np.max(np.abs(k_cov - k_std)) / eps)
    assert rates[0] > 0.0
    assert abs(rates[1] / rates[0] - 1.0) < 0.1
    assert abs(rates[2] / rates[1] - 1.0) < 0.1


# ---------------------------------------------------------------------------
# HermitianSparse bookkeeping


def test_hermitian_sparse_symmetrizes_exactly():
    rng = np.random.default_rng(21)
    f = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    np.fill_diagonal(f, rng.standard_normal(6))  # real diagonal
    h = HermitianSparse.from_csr(sparse.csr_matrix(f))
    dense = h.to_dense()
    assert np.allclose(dense, 0.5 * (f + f.conj().T), rtol=0, atol=1e-16)
    assert np.array_equal(dense, dense.conj().T)


def test_hermitian_sparse_rejects_imaginary_diagonal():
    f = np.eye(3, dtype=np.complex128)
    f[1, 1] = 1.0 + 1e-10j
    with pytest.raises(ValueError):
        HermitianSparse.from_csr(sparse.csr_matrix(f))


def test_hermitian_sparse_accumulates_duplicates():
    h = HermitianSparse.from_entries(
        2, [0, 1, 0, 1], [1, 0, 1, 0], [1.0, 1.0, 1.0 + 0.5j, 1.0 - 0.5j]
    )
    assert np.allclose(h.to_dense(), [[0.0, 2.0 + 0.5j], [2.0 - 0.5j, 0.0]], atol=0)
    assert h.nnz == 1  # upper triangle only


def test_hermitian_sparse_algebra():
    rng = np.random.default_rng(22)
    f = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    a = HermitianSparse.from_csr(sparse.csr_matrix(f + f.conj().T))
    g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    b = HermitianSparse.from_csr(sparse.csr_matrix(g + g.conj().T))

    assert np.allclose((a + b).to_dense(), a.to_dense() + b.to_dense(), atol=0)
    assert np.allclose((a - b).to_dense(), a.to_dense() - b.to_dense(), atol=0)
    assert np.allclose((2.5 * a).to_dense(), 2.5 * a.to_dense(), atol=0)
    with pytest.raises(TypeError):
        (1.0 + 1.0j) * a


def test_hermitian_sparse_restrict():
    rng = np.random.default_rng(23)
    f = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    h = HermitianSparse.from_csr(sparse.csr_matrix(f + f.conj().T))
    keep = np.array([0, 2, 5])
    sub = h.restrict(keep)
    assert np.allclose(sub.to_dense(), h.to_dense()[np.ix_(keep, keep)], atol=0)
    with pytest.raises(ValueError):
        h.restrict(np.array([2, 0]))


def test_hermitian_sparse_upper_coo_layout():
    mesh = build_box_mesh(2, 2)
    h = covariant_mass(mesh, unit_transports(mesh))
    rows, cols, vals = h.upper_coo()
    assert np.all(rows <= cols)
    assert vals.shape == rows.shape == cols.shape
    # row-major: rows ascending, columns ascending within a row
    order = rows * h.n + cols
    assert np.all(np.diff(order) > 0)


# ---------------------------------------------------------------------------
# Dirichlet elimination and problem assembly


def test_eliminate_dirichlet_single_interior_vertex():
    mesh = build_box_mesh(3, 2)  # 27 vertices, 1 interior
    n = mesh.n_vertices
    eye = HermitianSparse.from_csr(sparse.identity(n, format="csr", dtype=complex))
    reduced = eliminate_dirichlet(eye, interior_dof_map(mesh))
    assert reduced.n == 1
    assert np.allclose(reduced.to_dense(), [[1.0]], atol=0)


def test_eliminate_dirichlet_no_interior():
    mesh = build_box_mesh(3, 1)
    eye = HermitianSparse.from_csr(
        sparse.identity(mesh.n_vertices, format="csr", dtype=complex)
    )
    with pytest.raises(EmptyProblemError):
        eliminate_dirichlet(eye, interior_dof_map(mesh))


def test_eliminate_dirichlet_preserves_interior_quadratic_form():
    mesh = build_box_mesh(2, 3)
    circ = circulate(GaugeFieldSpec([0.0, 0.0], [0.0, 0.0, 1.0]), mesh)
    k = covariant_stiffness(mesh, transports(circ))
    dof = interior_dof_map(mesh)
    reduced = eliminate_dirichlet(k, dof)
    assert reduced.n == int((dof >= 0).sum())
    dense = reduced.to_dense()
    assert np.array_equal(dense, dense.conj().T)

    rng = np.random.default_rng(4)
    interior = np.flatnonzero(dof >= 0)
    u = np.zeros(mesh.n_vertices, dtype=np.complex128)
    u[interior] = rng.standard_normal(interior.size) + 1j * rng.standard_normal(
        interior.size
    )
    full_form = np.vdot(u, k.to_dense() @ u)
    reduced_form = np.vdot(u[interior], dense @ u[interior])
    assert reduced_form == pytest.approx(full_form, rel=1e-13)


def test_eliminate_dirichlet_spinor_blocks():
    mesh = build_box_mesh(2, 2)
    m = covariant_mass(mesh, unit_transports(mesh))
    full = HermitianSparse.from_csr(
        sparse.kron(sparse.identity(2, dtype=complex), m.to_csr(), format="csr")
    )
    dof = interior_dof_map(mesh)
    reduced = eliminate_dirichlet(full, dof)
    scalar = eliminate_dirichlet(m, dof)
    expected = sparse.kron(
        sparse.identity(2, dtype=complex), scalar.to_csr()
    ).toarray()
    assert np.allclose(reduced.to_dense(), expected, atol=0)

    odd = HermitianSparse.from_csr(
        sparse.identity(3 * mesh.n_vertices, format="csr", dtype=complex)
    )
    with pytest.raises(ValueError):
        eliminate_dirichlet(odd, dof)


def test_assemble_scalar_problem_shapes_and_metadata():
    mesh = build_box_mesh(2, 4)
    circ = circulate(GaugeFieldSpec([0.0, 0.0], [0.0, 0.0, 1.0]), mesh)
    problem = assemble_scalar_problem(mesh, circ, metadata={"tag": "t"})
    n_int = int((~mesh.boundary_vertex).sum())
    assert problem.stiffness.n == n_int
    assert problem.mass.n == n_int
    assert problem.metadata["method"] == "covariant"
    assert problem.metadata["dim"] == 2
    assert problem.metadata["has_potential"] is False
    assert problem.metadata["tag"] == "t"

    with_v = assemble_scalar_problem(
        mesh, circ, potential=np.full(mesh.n_vertices, 1.0)
    )
    assert with_v.metadata["has_potential"] is True
    # V = 1 adds exactly the (interior-reduced) covariant mass matrix
    diff = with_v.stiffness.to_dense() - problem.stiffness.to_dense()
    assert np.allclose(diff, problem.mass.to_dense(), rtol=0, atol=1e-15)

    baseline = assemble_scalar_problem(mesh, circ, method="baseline")
    assert baseline.stiffness.n == n_int
    with pytest.raises(ValueError):
        assemble_scalar_problem(mesh, circ, method="lumped")


def test_export_matrix_round_trip(tmp_path):
    mesh = build_box_mesh(2, 2)
    circ = circulate(GaugeFieldSpec([0.2, 0.1], [0.0, 0.0, 1.0]), mesh)
    h = covariant_mass(mesh, transports(circ))
    path = tmp_path / "mass.txt"
    export_matrix(h, path)

    lines = path.read_text().strip().split("\n")
    n, nnz = (int(tok) for tok in lines[0].split())
    assert n == h.n
    assert nnz == h.nnz
    assert len(lines) == 1 + nnz

    back = np.zeros((n, n), dtype=np.complex128)
    for line in lines[1:]:
        r, c, re, im = line.split()
        r, c = int(r), int(c)
        assert r <= c
        back[r, c] = float(re) + 1j * float(im)
    full = back + back.conj().T - np.diag(np.diag(back))
    assert np.array_equal(full, h.to_dense())  # repr precision is exact
