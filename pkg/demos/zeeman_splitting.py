# Zeeman splitting of the Pauli spectrum
# --------------------------------------
# For a uniform field along the z axis the Pauli operator decouples into two
# spin blocks that share the scalar magnetic Hamiltonian and differ only by
# the constant Zeeman shift -/+ b3.  Each scalar eigenvalue E therefore
# reappears twice in the spinor spectrum, at E - b3 (spin up) and E + b3
# (spin down).  The table below reconstructs the spinor spectrum from the
# scalar one and shows the agreement mode by mode.

import numpy as np

from gaugefem.assembly import assemble_scalar_problem
from gaugefem.eigensolve import solve_hermitian_gevp
from gaugefem.gauge import GaugeFieldSpec, circulate
from gaugefem.mesh import build_box_mesh
from gaugefem.pauli import assemble_pauli, solve_pauli

GRID = 8
FIELD_STRENGTH = 0.8
N_MODES = 6


def scalar_spectrum(mesh, field, k):
    """Lowest-k eigenvalues of the scalar magnetic problem."""
    problem = assemble_scalar_problem(mesh, circulate(field, mesh))
    return solve_hermitian_gevp(problem.stiffness, problem.mass, k=k).eigenvalues


def pauli_spectrum(mesh, field, k):
    """Lowest-k eigenvalues of the spinor (Pauli) problem."""
    return solve_pauli(assemble_pauli(mesh, field), k=k).eigenvalues


if __name__ == "__main__":
    mesh = build_box_mesh(2, GRID)
    field = GaugeFieldSpec(a0=(0.0, 0.0), b=(0.0, 0.0, FIELD_STRENGTH))

    scalar = scalar_spectrum(mesh, field, k=N_MODES + 2)
    spinor = pauli_spectrum(mesh, field, k=N_MODES)
    predicted = np.sort(np.concatenate([scalar - FIELD_STRENGTH, scalar + FIELD_STRENGTH]))
    predicted = predicted[:N_MODES]

    print(f"unit square, {GRID}x{GRID} grid, B = (0, 0, {FIELD_STRENGTH})")
    print("  mode   Pauli value     scalar -/+ b3    |difference|")
    for i, (p, s) in enumerate(zip(spinor, predicted)):
        print(f"  {i:4d}   {p:12.6f}   {s:14.6f}   {abs(p - s):12.3e}")
    print(f"  max |difference|: {np.max(np.abs(spinor - predicted)):.3e}")
