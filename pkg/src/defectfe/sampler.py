"""Monte Carlo route: Langevin sampling plus staged free-energy perturbation.

The defect free energy is a log-ratio of partition integrals, which a
plain average of exp(-perturbation) estimates badly once the perturbed
and unperturbed ensembles stop overlapping. Staging repairs the overlap:
with V_lam = V + lam * (perturbation energy) and a uniform ladder
lam_i = i/n, the ratio telescopes into n factors, each estimated from a
chain sampling the previous stage's measure. Chains are driven by MALA
(Langevin drift proposal + Metropolis correction), which preserves the
target measure exactly at any step size.

Error bars come from independent replicas: the whole ladder is repeated
R times on RNG streams split from the master seed by replica index, so
replica r's stream (and therefore the full estimate) does not depend on
the replica count, the worker count, or how replicas were batched.

With loads present the perturbation includes the load terms, so the
reference ensemble is always the unloaded, undefected chain; without
loads this is exactly the defect formation free energy.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .coarse_grain import ChainSpec
from .errors import ConfigError

__all__ = [
    "MalaConfig",
    "FreeEnergyEstimate",
    "chain_energy_and_gradient",
    "mala_step",
    "staged_fep",
    "estimate_gn",
]

# noise is pre-drawn in blocks of this many steps per replica; the block
# size is invisible in the output (each replica consumes its own stream
# in a fixed order), it only caps the working-set memory
_NOISE_BLOCK = 2048
# acceptance window for step-size adaptation during burn-in
_ADAPT_WINDOW = 64


@dataclasses.dataclass(frozen=True)
class MalaConfig:
    """Sampling knobs: step size, ladder shape, replication, seeding.

    adapt_step tunes the step size toward acceptance in [0.5, 0.7],
    during burn-in only; the step is frozen for the sampling phase so the
    chain's invariant measure stays exact. Each replica adapts its own
    step independently.
    """

    step_size: float = 0.05
    steps_per_stage: int = 100_000
    burn_in_fraction: float = 0.2
    seed: int = 0
    n_replicas: int = 100
    n_stages: int = 100
    adapt_step: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ConfigError("step size must be positive")
        if self.n_replicas < 2:
            raise ConfigError("standard errors need at least 2 replicas")
        if self.n_stages < 1:
            raise ConfigError("need at least one stage")
        if self.steps_per_stage < 1:
            raise ConfigError("need at least one step per stage")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigError("burn-in fraction must lie in [0, 1)")
        if self.retained_steps < 1:
            raise ConfigError("burn-in leaves no samples in a stage")

    @property
    def burn_steps(self) -> int:
        return int(self.steps_per_stage * self.burn_in_fraction)

    @property
    def retained_steps(self) -> int:
        return self.steps_per_stage - self.burn_steps


@dataclasses.dataclass(frozen=True)
class FreeEnergyEstimate:
    """A sampled free energy with replica-based error bar and provenance."""

    value: float
    stderr: float
    n_replicas: int
    acceptance: tuple[float, ...]
    total_samples: int
    seed: int
    config_digest: str = ""


def _strain_matrix(u: np.ndarray, span: float) -> np.ndarray:
    """Bond strains (R, N) from interior positions (R, N-1); ends pinned."""
    y = np.empty((u.shape[0], u.shape[1] + 1))
    y[:, 0] = u[:, 0]
    y[:, 1:-1] = u[:, 1:] - u[:, :-1]
    y[:, -1] = span - u[:, -1]
    return y


def _base_energy_grad(spec: ChainSpec, u: np.ndarray):
    """Unperturbed chain energy and gradient, batched over replicas."""
    y = _strain_matrix(u, spec.N * spec.A)
    d1 = spec.psi.d1(y)
    return spec.psi.value(y).sum(axis=1), d1[:, :-1] - d1[:, 1:]


def _perturbation_energy_grad(spec: ChainSpec, u: np.ndarray):
    """Energy and gradient of the switched-on part: defect plus loads."""
    e = np.zeros(u.shape[0])
    g = np.zeros_like(u)
    if spec.defect is not None:
        pot = spec.defect.perturbation
        e += pot.value(u[:, 0])
        g[:, 0] += pot.d1(u[:, 0])
    if spec.forces is not None:
        h = np.asarray(spec.forces.entries, dtype=float)
        # sum h_i (u_i - u_{i-1}) telescopes onto the interior atoms,
        # plus the pinned-end term through u_N = N*A
        e += u @ (h[:-1] - h[1:]) + h[-1] * spec.N * spec.A
        g += h[None, :-1] - h[None, 1:]
    return e, g


def chain_energy_and_gradient(spec: ChainSpec, u, lambda_stage: float):
    """Energy and exact gradient of the partially switched-on chain.

    u lists the interior atoms u_1..u_{N-1}; the boundary atoms are
    pinned at 0 and N*A. lambda_stage interpolates linearly between the
    unperturbed chain (0) and the full defect-plus-loads chain (1).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.N - 1,):
        raise ValueError(f"expected {spec.N - 1} interior positions, got shape {u.shape}")
    ub = u[None, :]
    e0, g0 = _base_energy_grad(spec, ub)
    ep, gp = _perturbation_energy_grad(spec, ub)
    lam = float(lambda_stage)
    return float(e0[0] + lam * ep[0]), g0[0] + lam * gp[0]


def mala_step(state, energy_grad, h: float, rng: np.random.Generator):
    """One Langevin-proposal Metropolis step; returns (state, accepted).

    Proposal q* = q - h grad V(q) + sqrt(2h) G with standard normal G;
    the correction uses the log transition densities directly, never raw
    exponentials. A proposal with non-finite energy is rejected outright.
    On rejection the input state object is returned unchanged.
    """
    q = np.asarray(state, dtype=float)
    e, g = energy_grad(q)
    noise = rng.standard_normal(q.shape)
    qs = q - h * g + math.sqrt(2.0 * h) * noise
    es, gs = energy_grad(qs)
    logu = math.log(rng.random())
    if not np.isfinite(es):
        return q, False
    fwd = qs - q + h * g
    rev = q - qs + h * np.asarray(gs)
    log_r = float(e) - float(es) + (fwd @ fwd - rev @ rev) / (4.0 * h)
    if logu <= log_r:
        return qs, True
    return q, False


def _replica_generators(seed: int, lo: int, hi: int):
    """Philox streams for replicas lo..hi-1, split by replica index."""
    return [np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(r,))))
        for r in range(lo, hi)]


def _run_replica_block(spec: ChainSpec, cfg: MalaConfig, lo: int, hi: int):
    """Run replicas lo..hi-1 in lockstep; returns (values, acceptance).

    The replicas advance together as array rows but never interact: each
    has its own RNG stream, state, step size, and accumulators, so the
    result for replica r is identical however replicas are blocked.
    """
    n_rep = hi - lo
    d = spec.N - 1
    span = spec.N * spec.A
    gens = _replica_generators(cfg.seed, lo, hi)

    # start every replica at the unperturbed minimizer: uniform strain
    u = np.tile(spec.A * np.arange(1, spec.N, dtype=float), (n_rep, 1))
    e0, g0 = _base_energy_grad(spec, u)
    ep, gp = _perturbation_energy_grad(spec, u)

    h = np.full(n_rep, cfg.step_size)
    dlam = 1.0 / cfg.n_stages
    values = np.zeros(n_rep)
    acc_all = np.zeros((n_rep, cfg.n_stages))

    for stage in range(cfg.n_stages):
        lam = stage * dlam
        accepted = np.zeros(n_rep)
        win_acc = np.zeros(n_rep)
        # streaming log-sum-exp of the stage weights -dlam * perturbation
        run_max = np.full(n_rep, -np.inf)
        run_sum = np.zeros(n_rep)

        step = 0
        while step < cfg.steps_per_stage:
            blk = min(_NOISE_BLOCK, cfg.steps_per_stage - step)
            noise = np.empty((n_rep, blk, d))
            logu = np.empty((n_rep, blk))
            for j, gen in enumerate(gens):
                noise[j] = gen.standard_normal((blk, d))
                logu[j] = np.log(gen.random(blk))

            for t in range(blk):
                grad = g0 + lam * gp
                prop = u - h[:, None] * grad + np.sqrt(2.0 * h)[:, None] * noise[:, t]
                pe0, pg0 = _base_energy_grad(spec, prop)
                pep, pgp = _perturbation_energy_grad(spec, prop)
                fwd = prop - u + h[:, None] * grad
                rev = u - prop + h[:, None] * (pg0 + lam * pgp)
                log_r = ((e0 + lam * ep) - (pe0 + lam * pep)
                         + (np.sum(fwd * fwd, axis=1) - np.sum(rev * rev, axis=1))
                         / (4.0 * h))
                ok = np.isfinite(pe0 + lam * pep) & (logu[:, t] <= log_r)
                u = np.where(ok[:, None], prop, u)
                e0 = np.where(ok, pe0, e0)
                ep = np.where(ok, pep, ep)
                g0 = np.where(ok[:, None], pg0, g0)
                gp = np.where(ok[:, None], pgp, gp)
                accepted += ok
                win_acc += ok

                k = step + t
                if k >= cfg.burn_steps:
                    w = -dlam * ep
                    bigger = w > run_max
                    run_sum = np.where(
                        bigger,
                        run_sum * np.exp(np.minimum(run_max - w, 0.0)) + 1.0,
                        run_sum + np.exp(np.minimum(w - run_max, 0.0)))
                    run_max = np.maximum(run_max, w)
                elif cfg.adapt_step and (k + 1) % _ADAPT_WINDOW == 0:
                    rate = win_acc / _ADAPT_WINDOW
                    h = np.clip(np.where(rate > 0.7, h * 1.25,
                                         np.where(rate < 0.5, h * 0.8, h)),
                                1e-4, 1.0)
                    win_acc[:] = 0.0
            step += blk

        values += -(run_max + np.log(run_sum / cfg.retained_steps))
        acc_all[:, stage] = accepted / cfg.steps_per_stage

    return values, acc_all


def staged_fep(spec: ChainSpec, cfg: MalaConfig,
               workers: int | None = None) -> FreeEnergyEstimate:
    """Estimate the perturbation free energy over the full stage ladder.

    Replicas are independent, so worker processes take contiguous blocks
    of them; the reduction runs in replica order either way and the
    result is bit-identical for any worker count.
    """
    rep = cfg.n_replicas
    if workers is not None and workers > 1 and rep > 1:
        bounds = np.linspace(0, rep, min(workers, rep) + 1).astype(int)
        tasks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        values = np.empty(rep)
        acc = np.empty((rep, cfg.n_stages))
        with ProcessPoolExecutor(max_workers=len(tasks)) as pool:
            futs = [pool.submit(_run_replica_block, spec, cfg, a, b)
                    for a, b in tasks]
            for (a, b), fut in zip(tasks, futs):
                values[a:b], acc[a:b] = fut.result()
    else:
        values, acc = _run_replica_block(spec, cfg, 0, rep)

    return FreeEnergyEstimate(
        value=float(np.mean(values)),
        stderr=float(np.std(values, ddof=1) / math.sqrt(rep)),
        n_replicas=rep,
        acceptance=tuple(float(a) for a in acc.mean(axis=0)),
        total_samples=rep * cfg.n_stages * cfg.retained_steps,
        seed=cfg.seed,
    )


def _config_digest(spec: ChainSpec, cfg: MalaConfig) -> str:
    """Short stable fingerprint of everything the estimate depends on."""
    parts = [spec.N, spec.A, spec.psi.kind, spec.psi.coeffs]
    parts.append(spec.defect.perturbation.coeffs if spec.defect else None)
    parts.append(spec.forces.entries if spec.forces else None)
    parts.append(dataclasses.astuple(cfg))
    return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


def estimate_gn(spec: ChainSpec, cfg: MalaConfig | None = None,
                workers: int | None = None) -> FreeEnergyEstimate:
    """Sampled defect formation free energy of the finite chain."""
    cfg = cfg or MalaConfig()
    est = staged_fep(spec, cfg, workers=workers)
    return dataclasses.replace(est, config_digest=_config_digest(spec, cfg))
