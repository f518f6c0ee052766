"""Decaying loads and the convergence rate they buy.

A bare quartic chain is pulled by node forces f_j = j^-p. The loads are
summable for p > 2, the perturbed chain still has a well-defined limit,
and the finite-chain error falls off at least first order, faster when
the tail of the load sequence decays faster.
"""

from defectfe import ChainSpec, build_force_sequence, cg_free_energy, fit_slope, limit_free_energy, make_potential

quart = make_potential("quartic-paper")


def main():
    for p in (3.0, 4.0):
        pairs = []
        lim = None
        print(f"p = {p:g}")
        for n in (4, 8, 16, 32):
            forces = build_force_sequence("power-law", n, p=p)
            spec = ChainSpec(N=n, A=2.0, psi=quart, forces=forces)
            if lim is None:
                lim = limit_free_energy(spec)
                print(f"  limit: {lim:.12f}")
            err = abs(cg_free_energy(spec) - lim)
            print(f"  N = {n:>2}:  |G_N - G_inf| = {err:.3e}")
            pairs.append((n, err))
        print(f"  slope: {fit_slope(pairs).slope:.3f}\n")


if __name__ == "__main__":
    main()
