"""Dirichlet-to-Neumann maps of a small conductivity family.

Each member is a Dini-continuous bump of amplitude t.  As t drops, the
DtN distance rho to the background and the sup difference of the
conductivities drop together.  The coarse mesh keeps this quick; the
stability experiment in the CLI uses the full resolution.
"""
from calderon_dini.field import GridSpec
from calderon_dini.forward import dtn_assemble, dtn_opnorm_diff
from calderon_dini.harness.generators import make_dini_conductivity

grid = GridSpec(128, 2.0)
mesh = (64, 128)
modes = 12

background = make_dini_conductivity(2.0, 0.0, grid=grid, measure=False)
lam0 = dtn_assemble(background, modes, mesh)
print(f"background: diagonal entry n = 3 is {lam0.entry(3, 3).real:.4f} (exact 3)")

print("\n   t       rho        sup|gamma - 1|")
for t in (0.4, 0.2, 0.1, 0.05):
    c = make_dini_conductivity(2.0, t, grid=grid, measure=False)
    lam = dtn_assemble(c, modes, mesh)
    rho = dtn_opnorm_diff(lam, lam0)
    diff = abs(c.gamma.samples - 1).max()
    print(f"{t:5.2f}   {rho:.4e}   {diff:.4e}")
