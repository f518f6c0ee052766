"""Three routes, one number.

For a quadratic chain the defect free energy has a closed form, so the
brute-force quadrature route and the coarse-grained route can both be
checked to machine precision. The quartic chain has no closed form; there
the dense route (exact up to quadrature tolerance) arbitrates the
coarse-grained value and the residual gap is the actual coarse-graining
error, shrinking as the chain grows.
"""

from defectfe import (ChainSpec, DefectSpec, HarmonicParams, cg_free_energy,
                      dense_free_energy, harmonic_free_energy,
                      limit_free_energy, make_potential)

harm = make_potential("harmonic", (1.0,))
quart = make_potential("quartic-paper")
defect = DefectSpec(make_potential("harmonic", (1.0,)))  # P(y) = y^2


def main():
    print("quadratic bonds, unit defect, A = 1")
    print(f"{'N':>3} {'closed form':>20} {'dense':>20} {'coarse-grained':>20}")
    for n in (2, 3, 4):
        spec = ChainSpec(N=n, A=1.0, psi=harm, defect=defect)
        exact = harmonic_free_energy(HarmonicParams(1.0, 1.0, 1.0, n))
        dense = dense_free_energy(spec)
        cg = cg_free_energy(spec)
        print(f"{n:>3} {exact:>20.15f} {dense:>20.15f} {cg:>20.15f}")
        assert abs(dense - exact) < 1e-9 and abs(cg - exact) < 1e-9

    print()
    print("quartic bonds, unit defect, A = 2 (no closed form)")
    print(f"{'N':>3} {'dense':>20} {'coarse-grained':>20} {'gap':>12}")
    for n in (2, 3, 4):
        spec = ChainSpec(N=n, A=2.0, psi=quart, defect=defect)
        dense = dense_free_energy(spec)
        cg = cg_free_energy(spec)
        print(f"{n:>3} {dense:>20.15f} {cg:>20.15f} {cg - dense:>12.4e}")

    lim = limit_free_energy(ChainSpec(N=64, A=2.0, psi=quart, defect=defect))
    print(f"\nlimit value: {lim:.15f}  (the gaps above decay toward it)")


if __name__ == "__main__":
    main()
