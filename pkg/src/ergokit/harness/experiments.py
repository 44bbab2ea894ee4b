"""Registered experiments.

Each experiment receives validated parameters, a seed and a run context; it
writes its CSV artifacts through the context and records one named check per
property of the module it exercises.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .. import chain as ch
from .. import galerkin as gw
from .. import gibbs as gm
from .. import langevin as lv
from .. import spectral as sc
from .. import stationary as st
from .._parallel import map_parallel
from ..exceptions import NotCoerciveError
from ..observables import ObservableSpec
from ..stats import ensemble_estimate, series_estimate

FMT = "{:.17g}"


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


class RunContext:
    def __init__(self, out_dir, seed):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = int(seed)
        self.checks = []
        self.artifacts = []

    def check(self, name, passed, **measured):
        if any(c["name"] == name for c in self.checks):
            raise RuntimeError(f"duplicate check {name!r}")
        self.checks.append({"name": name, "passed": bool(passed),
                            "measured": {k: _num(v) for k, v in measured.items()}})

    def path(self, name):
        self.artifacts.append(name)
        return self.out / name

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([FMT.format(float(v)) if isinstance(v, (float, np.floating))
                            else v for v in row])

    def rng(self, stream):
        return np.random.Generator(np.random.Philox(key=self.seed + int(stream)))


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    defaults: dict
    run: Callable


REGISTRY: dict = {}


def experiment(name, description, **defaults):
    def wrap(fn):
        REGISTRY[name] = Experiment(name, description, defaults, fn)
        return fn
    return wrap


def _ratio_ok(r, lo=3.2, hi=4.8):
    return lo <= r <= hi


# --- spectral_core -------------------------------------------------------------

@experiment("rage-decay", "Cesaro limits of unitary orbits and contraction semigroups",
            n=10, gap=1.0, T_factor=1e4, random_dim=6, semigroup_T=40.0, brute_dt=1e-3)
def rage_decay(ctx, p):
    n, gap = p["n"], p["gap"]
    D = sc.spectral_decompose(sc.HermitianOperator.diagonal(gap * np.arange(n)))
    psi = np.ones(n) / math.sqrt(n)
    lim = sc.cesaro_limit_exact(D, psi, psi)
    ctx.check("rage_limit", abs(lim - 1.0 / n) <= 1e-12, limit=lim, expected=1.0 / n)
    T = p["T_factor"] / gap
    fin = sc.cesaro_correlation(D, psi, psi, T)
    ctx.check("finite_time_rage", abs(fin - lim) <= 0.05 * lim, correlation=fin, T=T)
    ladder = T * np.logspace(-3, 0, 13)
    ctx.write_csv("rage.csv", ["T", "correlation", "limit"],
                  [(float(t), float(sc.cesaro_correlation(D, psi, psi, t)), float(lim))
                   for t in ladder])

    rng = ctx.rng(1)
    H = sc.HermitianOperator.random(p["random_dim"], rng)
    Dr = sc.spectral_decompose(H)
    v = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
    times = rng.uniform(-50, 50, size=8)
    unit = max(abs(np.linalg.norm(sc.evolve_unitary(Dr, v, t)) - np.linalg.norm(v))
               for t in times)
    ctx.check("unitarity", unit <= 1e-12, max_error=unit)
    group = max(np.max(np.abs(sc.evolve_unitary(Dr, v, s + t)
                              - sc.evolve_unitary(Dr, sc.evolve_unitary(Dr, v, s), t)))
                for s, t in zip(times[:4], times[4:]))
    ctx.check("group_law", group <= 1e-10, max_error=group)

    w = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
    lim_r = sc.cesaro_limit_exact(Dr, w, v)
    t0 = 50.0 / np.min(np.diff(Dr.eigenvalues))
    ratio = sc.doubling_ratio(lambda s: sc.cesaro_correlation(Dr, w, v, s) - lim_r, t0)
    ctx.check("cesaro_convergence", abs(ratio - 2.0) <= 0.4, doubling_ratio=ratio, T0=t0)

    # operator with a two-dimensional kernel and a known eigenbasis
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    lam = np.array([0.0, 0.0, 0.7, -1.3, 2.1, 3.4])
    Dk = sc.spectral_decompose(q @ np.diag(lam) @ q.conj().T)
    me = sc.mean_ergodic_vector(Dk, v, 1e3)
    proj = q[:, :2] @ (q[:, :2].conj().T @ v)
    err = float(np.max(np.abs(me.limit - proj)))
    ctx.check("mean_ergodic_identity", err <= 1e-10, max_error=err)

    S = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    A = S @ np.diag([0.0, 0.5, 1.0, 2.0]) @ np.linalg.inv(S)
    f = rng.standard_normal(4)
    acc = sc.AccretiveOperator(A)
    x, h = f.copy(), p["brute_dt"]
    for _ in range(int(round(p["semigroup_T"] / h))):
        k1 = -A @ x
        k2 = -A @ (x + 0.5 * h * k1)
        k3 = -A @ (x + 0.5 * h * k2)
        k4 = -A @ (x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    sg = float(np.max(np.abs(x - acc.kernel_projection(f))))
    avg_ratio = (np.linalg.norm(sc.semigroup_ergodic_limit(acc, f, 200.0).finite
                                - acc.kernel_projection(f))
                 / np.linalg.norm(sc.semigroup_ergodic_limit(acc, f, 400.0).finite
                                  - acc.kernel_projection(f)))
    ctx.check("semigroup_limit", sg <= 1e-4 and abs(avg_ratio - 2) <= 0.4,
              brute_force_error=sg, average_doubling_ratio=avg_ratio)


# --- wave_chain --------------------------------------------------------------------

def _chain_params(p, **kw):
    return ch.ChainParams(N=p["N"], a=p["a"], g=p["g"], k=p["k"], beta=p["beta"], **kw)


@experiment("chain-ergodic", "Invariance of the Gibbs measure under the lattice wave flow",
            N=16, a=1.0, g=1.0, k=2, beta=1.0, n_init=24, T=20.0, dt=1e-3,
            mcmc_samples=400000, drift_T=10.0, drift_dt=0.02, nu=0.5)
def chain_ergodic(ctx, p):
    prm = _chain_params(p)
    q, mom = gm.chain_initial_conditions(prm, p["n_init"], ctx.seed)
    s0 = ch.ChainState(q, mom)
    mid = (prm.N + 1) // 2
    obs = [ObservableSpec.site_square(mid), ObservableSpec.l2_norm_sq(prm.dx)]
    means = ch.run_observables(s0, prm, p["T"], p["dt"], obs)
    spec = gm.GibbsSpec.for_chain(prm)
    cfg = gm.MCMCConfig(p["mcmc_samples"], burn_in=5000, seed=ctx.seed + 7)
    rows = []
    for label, F, m in zip(("site", "l2"), obs, means):
        ta = ensemble_estimate(m.mean(axis=0), method="time_average")
        ref = gm.expectation(spec, F, cfg)
        z = ta.z(ref.mean, ref.stderr)
        ctx.check(f"stationarity_{label}", z <= 3.0, time_average=ta.mean,
                  time_average_stderr=ta.stderr, gibbs=ref.mean, gibbs_stderr=ref.stderr, z=z)
        rows.append((F.name, ta.mean, ta.stderr, ref.mean, ref.stderr))
    ctx.write_csv("stationarity.csv",
                  ["observable", "time_average", "stderr", "gibbs", "gibbs_stderr"], rows)

    one = ch.ChainState(q[0], mom[0])
    d1 = ch.energy_drift(one, prm, p["drift_T"], p["drift_dt"])
    d2 = ch.energy_drift(one, prm, p["drift_T"], p["drift_dt"] / 2)
    ctx.check("energy_drift_order", _ratio_ok(d1 / d2), drift=d1, drift_half=d2, ratio=d1 / d2)
    rev = ch.reversibility_error(one, prm, p["drift_dt"], 1000)
    ctx.check("reversibility", rev <= 1e-12, max_error=rev)
    jac = ch.liouville_jacobian_check(one, prm, 1.0, p["drift_dt"])
    ctx.check("symplecticity", jac <= 1e-6, det_error=jac)
    damped = _chain_params(p, nu=p["nu"])
    u0 = ch.normal_mode(damped, 1, 0.5)
    r1 = ch.kanai_residual(damped, u0, 2.0, 0.02)
    r2 = ch.kanai_residual(damped, u0, 2.0, 0.01)
    ctx.check("kanai_correspondence", _ratio_ok(r1 / r2), residual=r1, residual_half=r2,
              ratio=r1 / r2)


@experiment("kanai", "Damped chain versus its exponentially rescaled undamped form",
            N=32, a=1.0, nu=0.5, T=2.0, dt=0.02, amplitude=0.5)
def kanai(ctx, p):
    rows = []
    for label, g, k in (("linear", 0.0, 1), ("mass", 1.0, 1)):
        prm = ch.ChainParams(N=p["N"], a=p["a"], g=g, k=k, nu=p["nu"])
        u0 = ch.normal_mode(prm, 1, p["amplitude"]) + ch.normal_mode(prm, 3, 0.3 * p["amplitude"])
        r1 = ch.kanai_residual(prm, u0, p["T"], p["dt"])
        r2 = ch.kanai_residual(prm, u0, p["T"], p["dt"] / 2)
        ctx.check(f"kanai_order_{label}", _ratio_ok(r1 / r2), residual=r1,
                  residual_half=r2, ratio=r1 / r2)
        rows += [(label, p["dt"], r1), (label, p["dt"] / 2, r2)]
    ctx.write_csv("kanai_residuals.csv", ["case", "dt", "residual"], rows)
    prm = ch.ChainParams(N=p["N"], a=p["a"], nu=p["nu"])
    times, q = ch.damped_trajectory(prm, ch.normal_mode(prm, 1, p["amplitude"]), p["T"],
                                    p["dt"], record_every=5)
    ctx.write_csv("damped_midpoint.csv", ["t", "q_mid"],
                  [(t, row[prm.N // 2]) for t, row in zip(times, q)])


# --- gibbs_measure ----------------------------------------------------------------

@experiment("gibbs-gaussian", "Metropolis sampling of lattice Gibbs measures against exact oracles",
            N=2, beta=1.0, n_samples=400000, quartic_g=1.0, step_scale=0.5)
def gibbs_gaussian(ctx, p):
    N, beta = p["N"], p["beta"]
    A = gm.StiffnessMatrix.dirichlet_1d(N)
    spec = gm.GibbsSpec(A, gm.PotentialSpec(), beta, 1.0)
    cfg = gm.MCMCConfig(p["n_samples"], burn_in=5000, step_scale=p["step_scale"], seed=ctx.seed)
    batch = gm.mcmc_sample(spec, cfg)
    exact = spec.covariance()
    worst, rows = 0.0, []
    for i in range(N):
        for j in range(i, N):
            est = series_estimate(batch.samples[:, i] * batch.samples[:, j])
            z = est.z(exact[i, j])
            worst = max(worst, z)
            rows.append((i + 1, j + 1, est.mean, est.stderr, float(exact[i, j])))
    ctx.check("gaussian_exactness", worst <= 3.0, max_z=worst, entries=len(rows))
    ctx.write_csv("covariance.csv", ["i", "j", "sample", "stderr", "exact"], rows)

    rng = ctx.rng(3)
    quartic = gm.GibbsSpec(A, gm.PotentialSpec.polynomial_even(p["quartic_g"], 2), beta, 1.0)
    gaps = []
    for _ in range(20):
        x = rng.standard_normal(N)
        y = x.copy()
        y[rng.integers(N)] += rng.normal(scale=0.7)
        fwd = math.exp(gm.log_density(quartic, x)) * gm.metropolis_transition_density(
            quartic, x, y, p["step_scale"])
        bwd = math.exp(gm.log_density(quartic, y)) * gm.metropolis_transition_density(
            quartic, y, x, p["step_scale"])
        gaps.append(abs(fwd - bwd) / max(fwd, bwd))
    ctx.check("detailed_balance", max(gaps) <= 1e-12, max_relative_gap=max(gaps))

    zs = []
    for n in (1, 2):
        qs = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(n),
                          gm.PotentialSpec.polynomial_even(p["quartic_g"], 2), beta, 1.0)
        F = ObservableSpec.site_square(1)
        mc = gm.expectation(qs, F, gm.MCMCConfig(p["n_samples"], 5000, seed=ctx.seed + n))
        zs.append(mc.z(gm.quadrature_expectation(qs, F)))
    ctx.check("quadrature_agreement", max(zs) <= 3.0, z_n1=zs[0], z_n2=zs[1])

    c0 = gm.coercivity_constant(A)
    homog = abs(gm.coercivity_constant(A * 3.0) - 3.0 * c0) <= 1e-12 * c0
    try:
        gm.coercivity_constant(gm.StiffnessMatrix(np.diag([1.0, -1.0])))
        rejects = False
    except NotCoerciveError:
        rejects = True
    ctx.check("coercivity", c0 > 0 and homog and rejects, constant=c0)

    w = gm.reweighting_factor(quartic, gm.mcmc_sample(quartic, cfg).samples)
    ctx.check("weight_boundedness", bool(np.all((w > 0) & (w <= 1))),
              min_weight=float(w.min()), max_weight=float(w.max()))
    lin = gm.GibbsSpec(A, gm.PotentialSpec.linear(0.8), beta, 1.0)
    rep = gm.lipschitz_weight_check(lin, gm.MCMCConfig(200000, seed=ctx.seed + 11))
    ok = (rep.weight_in_bounds == 1.0 and rep.gaussian_mean_weight.mean <= rep.analytic_bound
          and rep.gaussian_mean_weight.z(rep.exact_mean_weight) <= 3.0)
    ctx.check("lipschitz_weight", ok, mean_weight=rep.gaussian_mean_weight.mean,
              bound=rep.analytic_bound, exact=rep.exact_mean_weight)


# --- langevin_sde --------------------------------------------------------------

@experiment("langevin-boltzmann", "Langevin dynamics relaxes to the Boltzmann weight",
            n_paths=64, T=200.0, dt=2e-3, burn_in=10.0, kT_well=0.5, gamma_low=0.5,
            gamma_high=2.0, record_every=10)
def langevin_boltzmann(ctx, p):
    run = lv.RunConfig(n_paths=p["n_paths"], T=p["T"], dt=p["dt"], burn_in=p["burn_in"],
                       record_every=p["record_every"], seed=ctx.seed)
    ou = lv.LangevinSpec(lv.LangevinPotential.quadratic(1.0), kT=1.0)
    short = lv.euler_maruyama_trajectory(ou, np.zeros((32, 1)), 2.0, p["dt"], ctx.seed + 1)
    inc = np.diff(short.q[..., 0], axis=0) + p["dt"] * short.q[:-1, :, 0]
    var = ensemble_estimate((inc**2).ravel())
    ctx.check("noise_calibration", var.z(2.0 * p["dt"]) <= 3.0, variance=var.mean,
              expected=2.0 * p["dt"])

    rep = lv.stationary_histogram_check(ou, run)
    v = rep.moments["variance"]
    ctx.check("ou_variance", v.z(1.0) <= 3.0, variance=v.mean, stderr=v.stderr)
    ctx.check("ou_histogram", rep.sup_discrepancy <= 0.05, sup_discrepancy=rep.sup_discrepancy)
    rep.write_csv(ctx.path("ou_histogram.csv"))

    well = lv.LangevinSpec(lv.LangevinPotential.double_well(1.0, 1.0), kT=p["kT_well"])
    wrep = lv.stationary_histogram_check(well, run)
    occ = wrep.moments["occupancy_ratio"]
    ctx.check("double_well_histogram", wrep.sup_discrepancy <= 0.05,
              sup_discrepancy=wrep.sup_discrepancy)
    ctx.check("double_well_symmetry", occ.z(1.0) <= 3.0, ratio=occ.mean, stderr=occ.stderr)
    wrep.write_csv(ctx.path("double_well_histogram.csv"))

    reps = {}
    for gamma in (p["gamma_low"], p["gamma_high"]):
        spec = lv.LangevinSpec(ou.potential, kT=1.0, gamma=gamma)
        reps[gamma] = lv.underdamped_equilibrium_check(spec, run)
    lo, hi = reps[p["gamma_low"]], reps[p["gamma_high"]]
    pv = hi.p.moments["variance"]
    ctx.check("underdamped_momentum_variance", pv.z(1.0) <= 3.0, variance=pv.mean,
              stderr=pv.stderr)
    ctx.check("underdamped_independence", hi.correlation.z(0.0) <= 3.0,
              correlation=hi.correlation.mean, stderr=hi.correlation.stderr)
    a, b = lo.q.moments["variance"], hi.q.moments["variance"]
    ctx.check("friction_independence", a.z(b.mean, b.stderr) <= 3.0,
              q_variance_low=a.mean, q_variance_high=b.mean)
    hi.p.write_csv(ctx.path("underdamped_momentum_histogram.csv"))

    erg = lv.ergodic_average_check(ou, lambda x: x[..., 0] ** 2, [0.0], p["T"] * 5,
                                   p["n_paths"] * 4, 10.0, p["dt"], ctx.seed + 2)
    ctx.check("ergodic_average", erg.z <= 3.0, time_average=erg.time_average.mean,
              ensemble_average=erg.ensemble_average.mean, z=erg.z)

    K = np.array([[1.0, 0.3], [0.3, 0.8]])
    q0 = np.array([1.0, -0.5])
    spec2 = lv.LangevinSpec(lv.LangevinPotential.quadratic(K), kT=1.0, d=2)
    horizon = 4.0
    tr = lv.euler_maruyama_trajectory(spec2, np.tile(q0, (p["n_paths"] * 8, 1)), horizon,
                                      p["dt"], ctx.seed + 3)
    per_path = np.trapezoid(tr.q, tr.times, axis=0) / horizon
    target = sc.semigroup_ergodic_limit(sc.AccretiveOperator(K), q0, horizon).finite
    zs = [ensemble_estimate(per_path[:, i]).z(target[i]) for i in range(2)]
    ctx.check("semigroup_consistency", max(zs) <= 3.0, max_z=max(zs))


@experiment("spde-stationary", "Stochastic heat equation against its lattice invariant measure",
            a=math.pi / 2, M=31, n_paths=32, T=40.0, dt=2e-3, burn_in=10.0, lambda3=1.0,
            mcmc_samples=200000, modes=8)
def spde_stationary(ctx, p):
    a, M, dt = p["a"], p["M"], p["dt"]
    lin = lv.SPDESpec(a, M, {})
    xi = lv.spde_noise(ctx.rng(5), (200000,), dt, lin.dx)
    est = ensemble_estimate(xi**2)
    ctx.check("noise_calibration", est.z(dt / lin.dx) <= 3.0, variance=est.mean,
              expected=dt / lin.dx)

    mu = lin.mode_eigenvalues()
    u0 = lin.mode_basis()[:4].sum(axis=0)
    tr = lv.spde_evolve(lin, u0, 1.0, dt, ctx.seed, record_every=10**9, noise_scale=0.0)
    got = lin.project(tr.U[-1])[:4]
    want = np.exp(-0.5 * mu[:4] * 1.0)
    rel = float(np.max(np.abs(got / want - 1)))
    ctx.check("heat_decay", rel <= 0.01, max_relative_error=rel)

    cfg = lv.SPDERunConfig(n_paths=p["n_paths"], T=p["T"], dt=dt, burn_in=p["burn_in"],
                           seed=ctx.seed, mcmc_samples=p["mcmc_samples"])
    rep = lv.spde_stationary_check(lin, cfg, modes=p["modes"])
    mz = max(e.z(ref) for _, e, ref in rep.mode_variances)
    ctx.check("mode_variances", mz <= 3.0, max_z=mz)
    ctx.check("linear_lattice_measure", rep.max_z <= 3.0, max_z=rep.max_z)
    ctx.write_csv("mode_variances.csv", ["k", "variance", "stderr", "exact"],
                  [(k, e.mean, e.stderr, float(ref)) for k, e, ref in rep.mode_variances])

    cubic = lv.SPDESpec(a, M, {3: p["lambda3"]})
    crep = lv.spde_stationary_check(cubic, cfg, modes=p["modes"])
    ctx.check("nonlinear_lattice_measure", crep.max_z <= 3.0, max_z=crep.max_z)
    ctx.write_csv("lattice_moments.csv",
                  ["node", "power", "sde", "sde_stderr", "mcmc", "mcmc_stderr"],
                  [(c.node, c.power, c.sde.mean, c.sde.stderr, c.reference.mean,
                    c.reference.stderr) for c in crep.comparisons])


# --- galerkin_wave ----------------------------------------------------------------

@experiment("galerkin-converge", "Spectral Galerkin wave solver: accuracy, bounds and stability",
            n_list=[8, 16, 32], a=1.0, g=1.0, k=2, T=2.0, dt=1e-3, amplitude=1.0,
            holder_fields=1000, holder_q=3.0, delta=1e-6, gronwall_T=5.0,
            cross_N=256, cross_n=32, cross_T=1.0)
def galerkin_converge(ctx, p):
    a, g, k, amp = p["a"], p["g"], p["k"], p["amplitude"]

    def smooth(x):
        return amp * (a * a - x * x)

    lin = gw.GalerkinSpec.single(4, a, 0.0)
    errs = []
    for dt in (0.01, 0.005):
        tr = gw.integrate_wave(lin, np.eye(4)[1], p["T"], dt)
        errs.append(float(np.max(np.abs(tr.u[:, 1] - np.cos(np.sqrt(lin.mu[1]) * tr.times)))))
    ctx.check("single_mode_order", _ratio_ok(errs[0] / errs[1]), error=errs[0],
              error_half=errs[1], ratio=errs[0] / errs[1])

    spec = gw.GalerkinSpec.single(p["n_list"][0], a, g, k)
    d1 = gw.energy_drift(spec, smooth, p["T"], 4 * p["dt"])
    d2 = gw.energy_drift(spec, smooth, p["T"], 2 * p["dt"])
    ctx.check("energy_drift_order", _ratio_ok(d1 / d2), drift=d1, drift_half=d2,
              ratio=d1 / d2)
    traj = gw.integrate_wave(spec, smooth, p["T"], p["dt"])
    ok, ratio = gw.a_priori_check(traj)
    ctx.check("a_priori_bound", ok, max_energy_ratio=ratio)
    gw.write_modes_csv(ctx.path("modes.csv"), traj._replace(
        times=traj.times[::50], u=traj.u[::50], v=traj.v[::50], energy=traj.energy[::50]))

    conv = gw.convergence_study(p["n_list"], smooth, p["T"], p["dt"], a, ((g, 2 * k - 1),))
    ctx.check("convergence_monotone", conv.monotone,
              differences=[r.l2_difference for r in conv.rows])
    gw.write_convergence_csv(ctx.path("convergence.csv"), conv)

    big = gw.GalerkinSpec.single(p["n_list"][-1], a, g, k)
    fields, w = gw.random_smooth_fields(big, p["holder_fields"], ctx.rng(9))
    hol = gw.holder_interpolation_check(fields, w, p["holder_q"], k)
    ctx.check("holder_interpolation", hol.passed, min_slack=hol.min_slack, theta=hol.theta,
              fields=hol.n_fields)

    gr = gw.gronwall_stability_check(spec, smooth, p["delta"], p["gronwall_T"], p["dt"])
    ctx.check("gronwall_envelope", gr.passed, sup_ratio=gr.sup_ratio, M=gr.M, rate=gr.rate)
    zero = gw.gronwall_stability_check(spec, smooth, 0.0, 1.0, p["dt"])
    ctx.check("gronwall_uniqueness", zero.exact_uniqueness)

    def bump(x):
        return amp * (1 - (x / a) ** 2) ** 3

    cross = gw.cross_solver_check(bump, p["cross_T"], p["dt"], a, g, k, p["cross_n"],
                                  p["cross_N"])
    ctx.check("cross_solver", cross.passed, galerkin=cross.galerkin,
              galerkin_error=cross.galerkin_error, chain=cross.chain,
              chain_error=cross.chain_error)


# --- stationary_expansion ---------------------------------------------------------

@experiment("laplace-expansion", "Low-temperature expansion of Gibbs expectations",
            betas=[10.0, 20.0, 40.0], n_samples=2000000, n_chains=2, quartic_g=1.0)
def laplace_expansion(ctx, p):
    A = gm.StiffnessMatrix(np.array([[1.0]]))
    pot = gm.PotentialSpec.polynomial_even(p["quartic_g"], 2)
    F = ObservableSpec.site_square(1)
    sol = st.solve_stationary(gm.GibbsSpec(A, pot, 1.0, 1.0))
    ctx.check("residual_certificate", sol.residual_norm <= 1e-12,
              residual=sol.residual_norm, iterations=sol.newton_iters)

    def one(job):
        beta, chain = job  # chain indices are distinct across all jobs
        spec = gm.GibbsSpec(A, pot, beta, 1.0)
        cfg = gm.MCMCConfig(p["n_samples"], burn_in=10000, seed=ctx.seed)
        b = gm.mcmc_sample(spec, cfg, chain_index=chain)
        return series_estimate(F(b.samples))

    jobs = [(b, i * p["n_chains"] + c) for i, b in enumerate(p["betas"])
            for c in range(p["n_chains"])]
    ests = map_parallel(one, jobs)
    rows, errors = [], []
    for i, beta in enumerate(p["betas"]):
        chunk = ests[i * p["n_chains"]:(i + 1) * p["n_chains"]]
        mean = float(np.mean([e.mean for e in chunk]))
        se = float(np.sqrt(np.sum([e.stderr**2 for e in chunk])) / len(chunk))
        lap = st.laplace_expansion(gm.GibbsSpec(A, pot, beta, 1.0), F, solution=sol)
        err = mean - lap.value
        errors.append((err, se))
        rows.append((beta, mean, lap.zeroth, lap.first_order, err))
    ratios = [errors[i][0] / errors[i + 1][0] for i in range(len(errors) - 1)]
    ctx.check("expansion_order", all(abs(r - 4) <= 1.2 for r in ratios), ratios=ratios,
              errors=[e for e, _ in errors], stderrs=[s for _, s in errors])
    st.write_expansion_csv(ctx.path("laplace.csv"), rows)

    gauss = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(4), gm.PotentialSpec(), 3.0, 1.0)
    val = st.laplace_expansion(gauss, ObservableSpec.l2_norm_sq()).value
    exact = float(np.trace(gauss.covariance()))
    ctx.check("gaussian_exactness", abs(val - exact) <= 1e-14 * exact, expansion=val,
              exact=exact)


def list_experiments():
    return [(e.name, e.description) for e in REGISTRY.values()]
