"""Regenerate the bundled integral files: H2O (cc-pVDZ, 4 electrons in 4
orbitals) and H2 (STO-3G, 2 electrons in 2 orbitals).

Needs pyscf, which the library itself never imports. Orbitals are frozen at
the reference geometry, so the derivatives exclude orbital response.

    python demos/make_integral_data.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from pyscf import ao2mo, gto, mcscf, scf

from krylovgrad.ingest import Fcidump, IntegralDerivatives
from krylovgrad.operators import effective_one_body, spin_expand

ANGSTROM = 1.0 / 0.52917721092
STEP = 1e-4  # bohr

SYSTEMS = {
    "h2o_4o": dict(geometry=[("O", (0.0, 0.0, 0.0)), ("H", (0.0, 0.757, 0.587)),
                             ("H", (0.0, -0.757, 0.587))],
                   basis="cc-pvdz", ncas=4, nelecas=4,
                   coords=[("H1_y", 1, 1), ("H1_z", 1, 2), ("O_z", 0, 2)]),
    "h2_2o": dict(geometry=[("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 0.74))],
                  basis="sto-3g", ncas=2, nelecas=2, coords=[("H2_z", 1, 2)]),
}


def build(system, shift=None):
    atoms = [(s, np.array(x) * ANGSTROM) for s, x in system["geometry"]]
    if shift is not None:
        atom, axis, h = shift
        atoms[atom][1][axis] += h
    return gto.M(atom=[(s, tuple(x)) for s, x in atoms], basis=system["basis"], unit="Bohr",
                 verbose=0)


def active_integrals(system, mol, mo):
    """Active-space h, g and core energy for fixed MO coefficients."""
    cas = mcscf.CASCI(scf.RHF(mol), system["ncas"], system["nelecas"])
    h1, ecore = cas.get_h1eff(mo)
    act = mo[:, cas.ncore:cas.ncore + system["ncas"]]
    g = ao2mo.restore(1, ao2mo.full(mol, act), system["ncas"])
    return h1, g, ecore


def write_system(name, system, outdir):
    mol = build(system)
    mf = scf.RHF(mol).run()
    mo = mf.mo_coeff
    h, g, ecore = active_integrals(system, mol, mo)
    ref = Fcidump(system["ncas"], system["nelecas"], 0, h, g, float(ecore))
    (outdir / f"{name}.fcidump").write_text(ref.dumps())
    dks, dgs, des = [], [], []
    for label, atom, axis in system["coords"]:
        hp, gp, ep = active_integrals(system, build(system, (atom, axis, STEP)), mo)
        hm, gm, em = active_integrals(system, build(system, (atom, axis, -STEP)), mo)
        dk = (effective_one_body(hp, gp) - effective_one_body(hm, gm)) / (2 * STEP)
        dg = (gp - gm) / (2 * STEP)
        dk, dg = spin_expand(dk, dg)
        dks.append(dk)
        dgs.append(dg)
        des.append((ep - em) / (2 * STEP))
    labels = [c[0] for c in system["coords"]]
    derivs = IntegralDerivatives(labels, np.array(dks), np.array(dgs), np.array(des))
    (outdir / f"{name}.derivs").write_text(derivs.dumps())
    print(f"{name}: RHF energy {mf.e_tot:.10f}, core energy {ecore:.10f}")


def main(outdir):
    outdir = Path(outdir)
    for name, system in SYSTEMS.items():
        write_system(name, system, outdir)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/krylovgrad/data")
