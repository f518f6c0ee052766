"""First-order convergence of the finite chain to its limit.

With quadratic bonds both G_N and the limit are closed forms, so the rate
can be measured over three decades of N without any quadrature noise. At
A = 2 the leading 1/N coefficient is 3/4; the scaled gap N*(G_N - G_inf)
should sit near that value and the log-log slope near -1.

(At A = 1 with a unit defect the coefficient happens to vanish and the
chain converges at second order instead; flip A below to see it.)
"""

from defectfe import HarmonicParams, fit_slope, harmonic_free_energy, harmonic_limit_free_energy

A = 2.0


def main():
    lim = harmonic_limit_free_energy(HarmonicParams(1.0, 1.0, A, 2))
    print(f"limit value at A = {A:g}: {lim:.15f}\n")
    print(f"{'N':>5} {'G_N - G_inf':>14} {'N * gap':>10}")
    pairs = []
    n = 8
    while n <= 1024:
        gap = harmonic_free_energy(HarmonicParams(1.0, 1.0, A, n)) - lim
        print(f"{n:>5} {gap:>14.6e} {n * gap:>10.4f}")
        pairs.append((n, abs(gap)))
        n *= 2
    fit = fit_slope(pairs)
    print(f"\nlog-log slope: {fit.slope:.4f} (first order is -1)")


if __name__ == "__main__":
    main()
