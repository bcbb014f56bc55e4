"""Meshes, P2 spaces and why the benchmark needs stabilization.

The benchmark has mu = 1e-5 and b = (2, 3), so the global Peclet number is
1.5e5. Even the finest mesh of the study leaves the local Peclet number in
the hundreds, far above the threshold of 1 below which plain Galerkin is
oscillation free.

    python demos/01_mesh_and_peclet.py
"""

import numpy as np

from efradr import BenchmarkSpec, FESpace, build_structured_mesh, local_peclet
from efradr.benchmark import CHI_TABLE, LEVELS

spec = BenchmarkSpec()
print(f"global Peclet number: {spec.peclet:.4g}")
print()
print(f"{'level':>5} {'n':>4} {'h_min':>8} {'triangles':>9} {'P2 dofs':>8} {'Pe_h':>8} {'chi':>10}")
for level, n in enumerate(LEVELS):
    mesh = build_structured_mesh(n)
    # building the P2 space is cheap; it only numbers the dofs
    space = FESpace(mesh, 2)
    pe = local_peclet(mesh, max(abs(c) for c in spec.b), spec.mu)
    print(f"{level:>5} {n:>4} {mesh.h_min:>8.4f} {mesh.n_triangles:>9} {space.n_dofs:>8} "
          f"{pe:>8.1f} {CHI_TABLE[level]:>10.6g}")

# Every square is split along its lower-left to upper-right diagonal and all
# triangles are counter-clockwise.
mesh = build_structured_mesh(2)
print()
print("vertices of the 2 x 2 mesh:\n", mesh.vertices)
print("triangles:\n", mesh.triangles)
print("all areas positive:", bool(np.all(mesh.signed_areas() > 0)))
