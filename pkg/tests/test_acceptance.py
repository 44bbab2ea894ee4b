"""Acceptance suite: one test per numbered criterion, each at its stated scale.

Every test reports a PASS/FAIL line through the ``criterion`` fixture; the
lines are collected in the "acceptance criteria" section of the pytest
summary.
"""

import json

import numpy as np
import pytest
from scipy.linalg import null_space

from ergokit import chain as ch
from ergokit import galerkin as gw
from ergokit import gibbs as gm
from ergokit import langevin as lv
from ergokit import spectral as sc
from ergokit import stationary as st
from ergokit.harness.config import ExperimentConfig
from ergokit.harness.experiments import REGISTRY
from ergokit.harness.runner import run_experiment
from ergokit.observables import ObservableSpec
from ergokit.stats import ensemble_estimate, series_estimate

pytestmark = pytest.mark.acceptance


def _ratio_ok(r, lo=3.2, hi=4.8):
    return lo <= r <= hi


def test_criterion_01_rage_decay(criterion):
    details, ok = [], True
    for n in (2, 10, 100, 1000):
        D = sc.spectral_decompose(sc.HermitianOperator.diagonal(np.arange(n, dtype=float)))
        psi = np.ones(n) / np.sqrt(n)
        lim = sc.cesaro_limit_exact(D, psi, psi)
        fin = sc.cesaro_correlation(D, psi, psi, 1e4)
        good = abs(lim - 1 / n) <= 1e-12 and abs(fin - lim) <= 0.05 * lim
        ok &= good
        details.append(f"n={n} rel={abs(fin - lim) / lim:.2e}")
    ok &= criterion.elapsed < 10
    assert criterion(1, "RAGE decay law", ok, ", ".join(details))


def _kernel_oracle(A):
    # projection onto ker A along ran A, built from null spaces only
    K, L = null_space(A), null_space(A.conj().T)
    return K @ np.linalg.solve(L.conj().T @ K, L.conj().T)


def test_criterion_02_mean_ergodic_and_semigroup(criterion):
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7)))
    lam = np.array([0.0, 0.0, 0.4, -0.9, 1.3, 2.2, -3.1])
    H = q @ np.diag(lam) @ q.conj().T
    H = 0.5 * (H + H.conj().T)
    D = sc.spectral_decompose(H)
    v = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    me = sc.mean_ergodic_vector(D, v, 1.0)
    ident_u = float(np.max(np.abs(me.limit - _kernel_oracle(H) @ v)))
    t0 = 50.0 / 0.4
    ratio_u = sc.doubling_ratio(
        lambda T: np.linalg.norm(sc.mean_ergodic_vector(D, v, T).finite - me.limit), t0)

    S = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    A = S @ np.diag([0.0, 0.0, 0.3, 1.0, 2.5]) @ np.linalg.inv(S)
    acc = sc.AccretiveOperator(A)
    f = rng.standard_normal(5)
    ident_s = float(np.max(np.abs(acc.kernel_projection(f) - _kernel_oracle(A) @ f)))

    def err(T):
        return np.linalg.norm(sc.semigroup_ergodic_limit(acc, f, T).finite
                              - acc.kernel_projection(f))

    ratio_s = err(200.0) / err(400.0)
    ok = (abs(ratio_u - 2) <= 0.4 and abs(ratio_s - 2) <= 0.4
          and max(ident_u, ident_s) <= 1e-10 and criterion.elapsed < 10)
    assert criterion(2, "mean-ergodic and semigroup limits", ok,
                     f"unitary ratio={ratio_u:.3f} semigroup ratio={ratio_s:.3f} "
                     f"identity err={max(ident_u, ident_s):.1e}")


def test_criterion_03_chain_stationarity(criterion):
    prm = ch.ChainParams(N=16, a=1.0, g=1.0, k=2, beta=1.0)
    q, p = gm.chain_initial_conditions(prm, 200, seed=3)
    obs = [ObservableSpec.site_square(8), ObservableSpec.l2_norm_sq(prm.dx)]
    means = ch.run_observables(ch.ChainState(q, p), prm, 200.0, 1e-3, obs)
    spec = gm.GibbsSpec.for_chain(prm)
    cfg = gm.MCMCConfig(2_000_000, burn_in=10000, seed=33)
    parts, ok = [], True
    for F, m in zip(obs, means):
        ta = ensemble_estimate(m.mean(axis=0), method="time_average")
        ref = gm.expectation(spec, F, cfg)
        z = ta.z(ref.mean, ref.stderr)
        ok &= z <= 3.0
        parts.append(f"{F.name}: {ta.mean:.5f}±{ta.stderr:.5f} vs {ref.mean:.5f}±"
                     f"{ref.stderr:.5f} z={z:.2f}")
    assert criterion(3, "chain stationarity", ok, "; ".join(parts))


def test_criterion_04_symplectic_integrity(criterion):
    prm = ch.ChainParams(N=16, a=1.0, g=1.0, k=2)
    rng = np.random.default_rng(4)
    s0 = ch.ChainState(0.5 * rng.standard_normal(16), 0.5 * rng.standard_normal(16))
    ratio = ch.energy_drift(s0, prm, 10.0, 0.02) / ch.energy_drift(s0, prm, 10.0, 0.01)
    rev = ch.reversibility_error(s0, prm, 0.01, 1000)
    det = ch.liouville_jacobian_check(s0, prm, 1.0, 0.01)
    ok = _ratio_ok(ratio) and rev <= 1e-12 and det <= 1e-6 and criterion.elapsed < 60
    assert criterion(4, "symplectic integrity", ok,
                     f"drift ratio={ratio:.3f} reversibility={rev:.1e} |detJ-1|={det:.1e}")


def test_criterion_05_kanai(criterion):
    parts, ok = [], True
    for g, k in ((0.0, 1), (1.0, 1)):
        prm = ch.ChainParams(N=32, g=g, k=k, nu=0.5)
        u0 = ch.normal_mode(prm, 1, 0.5) + ch.normal_mode(prm, 3, 0.15)
        r = ch.kanai_residual(prm, u0, 2.0, 0.02) / ch.kanai_residual(prm, u0, 2.0, 0.01)
        ok &= _ratio_ok(r)
        parts.append(f"g={g:g},k={k} ratio={r:.3f}")
    ok &= criterion.elapsed < 60
    assert criterion(5, "Kanai correspondence", ok, ", ".join(parts))


def test_criterion_06_gaussian_exactness(criterion):
    parts, ok = [], True
    for N in (2, 16):
        spec = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(N), beta=1.0)
        batch = gm.mcmc_sample(spec, gm.MCMCConfig(2_000_000, burn_in=20000, seed=60 + N))
        cov = spec.covariance()
        worst = max(series_estimate(batch.samples[:, i] * batch.samples[:, j]).z(cov[i, j])
                    for i in range(N) for j in range(i, N))
        ok &= worst <= 3.0
        parts.append(f"N={N} max z={worst:.2f} over {N * (N + 1) // 2} entries")
    var_ok = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(2), beta=2.0).covariance()[0, 0]
    ok &= abs(var_ok - 2 / 6) <= 1e-15 and criterion.elapsed < 60
    assert criterion(6, "Gaussian measure exactness", ok, "; ".join(parts))


def test_criterion_07_quadrature_agreement(criterion):
    parts, ok = [], True
    for beta in (0.5, 1.0, 2.0):
        spec = gm.GibbsSpec(gm.StiffnessMatrix(np.array([[1.0]])),
                            gm.PotentialSpec.polynomial_even(1.0, 2), beta, 1.0)
        for F in (ObservableSpec.site_square(1), ObservableSpec.custom_polynomial((0, 0, 0, 0, 1))):
            mc = gm.expectation(spec, F, gm.MCMCConfig(400_000, 5000, seed=int(70 + 10 * beta)))
            z = mc.z(gm.quadrature_expectation(spec, F))
            ok &= z <= 3.0
            parts.append(f"b={beta:g} {F.name} z={z:.2f}")
    assert criterion(7, "quadrature oracle agreement", ok, ", ".join(parts))


def test_criterion_08_langevin_boltzmann(criterion):
    run = lv.RunConfig(n_paths=128, T=200.0, dt=2e-3, burn_in=10.0, record_every=10, seed=8)
    ou = lv.LangevinSpec(lv.LangevinPotential.quadratic(1.0), kT=1.0)
    rep = lv.stationary_histogram_check(ou, run)
    z_ou = rep.moments["variance"].z(1.0)
    well = lv.LangevinSpec(lv.LangevinPotential.double_well(1.0, 1.0), kT=0.5)
    wrep = lv.stationary_histogram_check(well, run)
    n_samples = int(wrep.counts.sum())
    ud = lv.underdamped_equilibrium_check(lv.LangevinSpec(ou.potential, kT=1.0, gamma=1.0),
                                          lv.RunConfig(n_paths=64, T=200.0, dt=2e-3,
                                                       burn_in=10.0, seed=88))
    z_p = ud.p.moments["variance"].z(1.0)
    ok = (z_ou <= 3 and rep.sup_discrepancy <= 0.05 and wrep.sup_discrepancy <= 0.05
          and n_samples >= 10**6 and z_p <= 3)
    assert criterion(8, "Langevin Boltzmann law", ok,
                     f"OU var z={z_ou:.2f} OU sup={rep.sup_discrepancy:.4f} "
                     f"well sup={wrep.sup_discrepancy:.4f} ({n_samples} samples) "
                     f"p var z={z_p:.2f}")


def test_criterion_09_spde_stationary(criterion):
    cfg = lv.SPDERunConfig(n_paths=32, T=40.0, dt=2e-3, burn_in=10.0, seed=9,
                           mcmc_samples=400_000)
    lin = lv.spde_stationary_check(lv.SPDESpec(np.pi / 2, 31, {}), cfg, modes=8)
    z_modes = max(e.z(ref) for _, e, ref in lin.mode_variances)
    cubic = lv.spde_stationary_check(lv.SPDESpec(np.pi / 2, 31, {3: 1.0}), cfg, modes=8)
    ok = z_modes <= 3.0 and lin.max_z <= 3.0 and cubic.max_z <= 3.0
    assert criterion(9, "SPDE stationary law", ok,
                     f"mode var max z={z_modes:.2f} (k<=8), linear lattice z={lin.max_z:.2f}, "
                     f"cubic lattice z={cubic.max_z:.2f}")


def test_criterion_10_laplace_expansion(criterion):
    A = gm.StiffnessMatrix(np.array([[1.0]]))
    pot = gm.PotentialSpec.polynomial_even(1.0, 2)
    F = ObservableSpec.site_square(1)
    errors = []
    for i, beta in enumerate((10.0, 20.0, 40.0)):
        spec = gm.GibbsSpec(A, pot, beta, 1.0)
        ests = [series_estimate(F(gm.mcmc_sample(spec, gm.MCMCConfig(2_000_000, 10000, seed=10),
                                                 chain_index=2 * i + c).samples))
                for c in range(2)]
        lap = st.laplace_expansion(spec, F)
        errors.append(abs(np.mean([e.mean for e in ests]) - lap.value))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    gauss = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(4), gm.PotentialSpec(), 3.0, 1.0)
    exact = float(np.trace(gauss.covariance()))
    gerr = abs(st.laplace_expansion(gauss, ObservableSpec.l2_norm_sq()).value - exact) / exact
    ok = all(abs(r - 4) <= 1.2 for r in ratios) and gerr <= 1e-14
    assert criterion(10, "Laplace expansion", ok,
                     f"ratios={ratios[0]:.2f},{ratios[1]:.2f} gaussian rel err={gerr:.1e}")


def test_criterion_11_galerkin(criterion):
    def smooth(x):
        return 1.0 - x * x

    lin = gw.GalerkinSpec.single(4, 1.0, 0.0)
    errs = []
    for dt in (0.01, 0.005):
        tr = gw.integrate_wave(lin, np.eye(4)[1], 2.0, dt)
        errs.append(np.max(np.abs(tr.u[:, 1] - np.cos(np.sqrt(lin.mu[1]) * tr.times))))
    order = errs[0] / errs[1]
    conv = gw.convergence_study([8, 16, 32], smooth, 2.0, 1e-3)
    spec = gw.GalerkinSpec.single(8)
    bound_ok, bound = gw.a_priori_check(gw.integrate_wave(spec, smooth, 2.0, 1e-3), rtol=1e-6)
    big = gw.GalerkinSpec.single(32)
    fields, w = gw.random_smooth_fields(big, 1000, np.random.default_rng(11))
    hol = gw.holder_interpolation_check(fields, w, 3.0, 2)
    gr = gw.gronwall_stability_check(spec, smooth, 1e-6, 5.0, 1e-3)
    ok = (_ratio_ok(order) and conv.monotone and bound_ok and hol.passed
          and hol.n_fields == 1000 and gr.passed)
    diffs = ",".join(f"{r.l2_difference:.2e}" for r in conv.rows)
    assert criterion(11, "Galerkin solver", ok,
                     f"order ratio={order:.3f} diffs={diffs} energy ratio={bound:.8f} "
                     f"holder slack={hol.min_slack:.1e} gronwall sup={gr.sup_ratio:.3f} "
                     f"M={gr.M:.2f}")


def test_criterion_12_cross_solver(criterion):
    rep = gw.cross_solver_check(lambda x: (1 - x * x) ** 3, 1.0, 1e-3, a=1.0, g=1.0, k=2,
                                n=32, N=256)
    gap = abs(rep.galerkin - rep.chain)
    ok = rep.passed and criterion.elapsed < 300
    assert criterion(12, "cross-solver consistency", ok,
                     f"galerkin={rep.galerkin:.6f} chain={rep.chain:.6f} gap={gap:.1e} "
                     f"bars={rep.galerkin_error + rep.chain_error:.1e}")


def _artifact_bytes(out, report):
    blobs = {}
    for name in report.artifacts:
        data = (out / name).read_bytes()
        if name == "report.json":
            d = json.loads(data)
            d.pop("wall_time")
            data = json.dumps(d, sort_keys=True).encode()
        blobs[name] = data
    return blobs


def test_criterion_13_determinism(criterion, tmp_path):
    differing = []
    for name in REGISTRY:
        cfg = ExperimentConfig(name, 13)
        a = run_experiment(cfg, tmp_path / name / "a")
        b = run_experiment(cfg, tmp_path / name / "b")
        if (a.artifacts != b.artifacts or _artifact_bytes(tmp_path / name / "a", a)
                != _artifact_bytes(tmp_path / name / "b", b)):
            differing.append(name)
    assert criterion(13, "determinism", not differing,
                     f"{len(REGISTRY)} experiments, differing: {differing or 'none'}")
