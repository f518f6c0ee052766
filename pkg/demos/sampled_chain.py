"""Staged sampling against an exact answer.

Runs the Langevin sampler on a short quartic chain and compares the staged
estimate with the brute-force quadrature value. Scaled for a coffee break,
not a cluster: expect agreement within a couple of standard errors.
"""

import time

from defectfe import (ChainSpec, DefectSpec, MalaConfig, dense_free_energy,
                      estimate_gn, make_potential)


def main():
    spec = ChainSpec(N=3, A=2.0, psi=make_potential("quartic-paper"),
                     defect=DefectSpec(make_potential("harmonic", (1.0,))))
    exact = dense_free_energy(spec)

    cfg = MalaConfig(step_size=0.05, steps_per_stage=2000,
                     n_replicas=16, n_stages=60, seed=20260822)
    t0 = time.perf_counter()
    est = estimate_gn(spec, cfg)
    dt = time.perf_counter() - t0

    lo, hi = min(est.acceptance), max(est.acceptance)
    print(f"exact (quadrature):  {exact:.6f}")
    print(f"sampled:             {est.value:.6f} +/- {est.stderr:.6f}")
    print(f"pull:                {(est.value - exact) / est.stderr:+.2f} stderr")
    print(f"acceptance range:    [{lo:.2f}, {hi:.2f}] across stages, {est.n_replicas} replicas")
    print(f"samples, wall clock: {est.total_samples:,} in {dt:.1f}s")
    print(f"seed / digest:       {est.seed} / {est.config_digest}")
    # same seed, same bits: rerunning this script reproduces every digit


if __name__ == "__main__":
    main()
