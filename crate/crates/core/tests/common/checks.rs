//! Per-instance comparisons behind the acceptance suites. Each check returns
//! `Err` with a description of the first disagreement.

use rand::Rng;
use simmoe::distributions::{niw_expectations, sample_niw, NiwParams};
use simmoe::inference::{
    e_step, elbo, expected_log_normal, gate_objective_and_gradient, greedy_simplex_min, m_step_experts, m_step_gate_closed,
    update_s, update_t,
};
use simmoe::linalg::{cholesky, LowerTriangular, Matrix};
use simmoe::model::{Dataset, Linearization, VariationalState};
use simmoe::rng::{stream, Stream};

use super::*;

pub type Check = std::result::Result<(), String>;

pub const ORACLE_TOL: f64 = 1e-10;
pub const R_FLOOR: f64 = 1e-8;
pub const EIG_FLOOR: f64 = 1e-6;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn oracle_instance(seed: u64, op: u64) -> Instance {
    random_instance(&mut stream(seed, op))
}

pub fn e_step_case(inst: &Instance) -> Check {
    let got = e_step(&inst.data, &inst.hp, &inst.state).map_err(|e| e.to_string())?;
    let want = oracle_e_step(inst);
    let n = inst.data.n();
    for c in 0..inst.state.experts.len() {
        for i in 0..n {
            for m in (0..n).filter(|&m| m != i) {
                let (a, b) = (got.get(c, i, m), want[c][i][m]);
                ensure(rel_err(a, b) < ORACLE_TOL, || format!("ω[{c},{i},{m}] = {a} vs {b}"))?;
            }
        }
    }
    ensure(got.normalization_error() < 1e-12, || "responsibilities not normalized".into())
}

/// Compares against the oracle; `Ok(false)` when both agree the scale matrix
/// is not positive definite.
pub fn m_step_case(inst: &Instance) -> std::result::Result<bool, String> {
    let got = m_step_experts(&inst.data, &inst.hp, &inst.state.resp, &inst.state.lin.s, R_FLOOR);
    let want = oracle_m_step_experts(inst, R_FLOOR);
    let want_pd = want.iter().all(|(_, _, _, s)| cholesky(&Matrix::from_rows(s).unwrap()).is_ok());
    match got {
        Ok(experts) => {
            ensure(want_pd, || "oracle scale not PD but update succeeded".into())?;
            for (e, (kappa, mu, nu, sigma)) in experts.iter().zip(&want) {
                ensure(rel_err(e.kappa, *kappa) < ORACLE_TOL, || format!("κ {} vs {kappa}", e.kappa))?;
                ensure(rel_err(e.nu, *nu) < ORACLE_TOL, || format!("ν {} vs {nu}", e.nu))?;
                ensure(vec_rel_err(&e.mu, mu) < ORACLE_TOL, || format!("μ {:?} vs {mu:?}", e.mu))?;
                ensure(mat_rel_err(&to_m(&e.sigma), sigma) < ORACLE_TOL, || format!("Σ {:?} vs {sigma:?}", e.sigma))?;
            }
            Ok(true)
        }
        Err(e) => {
            ensure(!want_pd, || format!("update failed ({e}) with a PD oracle"))?;
            Ok(false)
        }
    }
}

pub fn gate_closed_case(inst: &Instance, t: &Matrix<f64>) -> Check {
    let l = m_step_gate_closed(&inst.data, &inst.hp, &inst.state.resp, t, EIG_FLOOR).map_err(|e| e.to_string())?;
    let want = oracle_gate_closed(inst, t, EIG_FLOOR);
    let got = to_m(&l.reconstruct());
    ensure(mat_rel_err(&got, &want) < ORACLE_TOL, || format!("Λ {got:?} vs {want:?}"))
}

pub fn update_s_case(inst: &Instance) -> Check {
    let s = update_s(&inst.data, &inst.state.experts, &inst.state.resp).map_err(|e| e.to_string())?;
    let bounds = oracle_s_bounds(&inst.state.resp);
    for i in 0..inst.data.n() {
        let coeffs: Vec<f64> = inst.state.experts.iter().map(|e| oracle_eln_full(e, inst.data.y().row(i))).collect();
        let (best, vertex) = vertex_enumeration(&coeffs, &bounds[i]);
        let got: f64 = coeffs.iter().zip(s.row(i)).map(|(a, b)| a * b).sum();
        ensure(rel_err(got, best) < ORACLE_TOL, || format!("row {i}: objective {got} vs {best}"))?;
        ensure(vec_rel_err(s.row(i), &vertex) < ORACLE_TOL, || format!("row {i}: {:?} vs {vertex:?}", s.row(i)))?;
    }
    Ok(())
}

pub fn update_t_case(inst: &Instance) -> Check {
    let t = update_t(&inst.data, &inst.state).map_err(|e| e.to_string())?;
    let coef = oracle_gate_coefficients(inst);
    let n = inst.data.n();
    for i in 0..n {
        let best = (0..n).filter(|&m| m != i).min_by(|&a, &b| coef[i][a].total_cmp(&coef[i][b])).unwrap();
        for m in 0..n {
            let want = if m == best { 1.0 } else { 0.0 };
            ensure(t[(i, m)] == want, || format!("t[{i},{m}] = {} vs {want}", t[(i, m)]))?;
        }
    }
    Ok(())
}

pub fn elbo_case(inst: &Instance) -> Check {
    let got = elbo(&inst.data, &inst.hp, &inst.state, R_FLOOR).map_err(|e| e.to_string())?;
    let want = oracle_elbo(inst, R_FLOOR);
    ensure(rel_err(got, want) < ORACLE_TOL, || format!("ELBO {got} vs {want}"))
}

/// All six oracle comparisons on `instances` random tiny problems.
pub fn oracle_suite(instances: u64) -> Check {
    let mut pd = 0;
    for seed in 0..instances {
        let tag = |e: String, op: &str| format!("{op}, seed {seed}: {e}");
        e_step_case(&oracle_instance(seed, 0)).map_err(|e| tag(e, "e_step"))?;
        if m_step_case(&oracle_instance(seed, 1)).map_err(|e| tag(e, "m_step_experts"))? {
            pd += 1;
        }
        let mut inst = oracle_instance(seed, 2);
        inst.state.lin.s = update_s(&inst.data, &inst.state.experts, &inst.state.resp).unwrap();
        ensure(m_step_case(&inst).map_err(|e| tag(e, "m_step_experts"))?, || tag("feasible s not PD".into(), "m_step_experts"))?;
        let inst = oracle_instance(seed, 3);
        gate_closed_case(&inst, &inst.state.lin.t).map_err(|e| tag(e, "m_step_gate_closed"))?;
        let t = update_t(&inst.data, &inst.state).unwrap();
        gate_closed_case(&inst, &t).map_err(|e| tag(e, "m_step_gate_closed"))?;
        update_s_case(&oracle_instance(seed, 4)).map_err(|e| tag(e, "update_s"))?;
        update_t_case(&oracle_instance(seed, 5)).map_err(|e| tag(e, "update_t"))?;
        elbo_case(&oracle_instance(seed, 6)).map_err(|e| tag(e, "elbo"))?;
    }
    ensure(pd >= instances / 2, || format!("only {pd} of {instances} unconstrained-s instances were PD"))
}

// --- Monte Carlo check of the NIW expectations ---

/// Sample mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `NiwParams` with `Dy ∈ {1, 2, 3}` and a query point, from `seed`.
pub fn random_niw_setting(seed: u64) -> (NiwParams<f64>, Vec<f64>) {
    let mut rng = stream(seed, 100);
    let dy = rng.random_range(1..=3);
    let p = random_niw(dy, &mut rng);
    let y = (0..dy).map(|_| rng.random_range(-2.0..2.0)).collect();
    (p, y)
}

/// `E Σ⁻¹` (every upper-triangle entry), `E log det Σ` and the expected
/// Mahalanobis term against `draws` samples, each within `z` standard errors.
pub fn niw_mc_case(p: &NiwParams<f64>, y: &[f64], draws: usize, z: f64, rng: &mut Stream) -> Check {
    let d = p.dim();
    let want = niw_expectations(p, y).map_err(|e| e.to_string())?;
    let mut inv_entries = vec![Vec::with_capacity(draws); d * (d + 1) / 2];
    let mut logdets = Vec::with_capacity(draws);
    let mut mahas = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (mu, sigma) = sample_niw(p, rng).map_err(|e| e.to_string())?;
        let chol = cholesky(&sigma).map_err(|e| e.to_string())?;
        let prec = chol.inverse_of_product();
        let mut k = 0;
        for a in 0..d {
            for b in a..d {
                inv_entries[k].push(prec[(a, b)]);
                k += 1;
            }
        }
        logdets.push(chol.log_det());
        mahas.push(chol.inv_quad(&diff(y, &mu)));
    }
    let mut k = 0;
    for a in 0..d {
        for b in a..d {
            let (m, se) = mean_se(&inv_entries[k]);
            let w = want.e_inv_scale[(a, b)];
            ensure((m - w).abs() <= z * se, || format!("E Σ⁻¹[{a},{b}]: MC {m} ± {se} vs {w}"))?;
            k += 1;
        }
    }
    let (m, se) = mean_se(&logdets);
    ensure((m - want.e_logdet).abs() <= z * se, || format!("E log det Σ: MC {m} ± {se} vs {}", want.e_logdet))?;
    let (m, se) = mean_se(&mahas);
    ensure((m - want.e_mahalanobis).abs() <= z * se, || format!("E Mahalanobis: MC {m} ± {se} vs {}", want.e_mahalanobis))
}

pub fn niw_mc_suite(settings: u64, draws: usize) -> Check {
    for seed in 0..settings {
        let (p, y) = random_niw_setting(seed);
        niw_mc_case(&p, &y, draws, 3.0, &mut stream(seed, 101)).map_err(|e| format!("setting {seed} (Dy = {}): {e}", p.dim()))?;
    }
    Ok(())
}

// --- gate gradient ---

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// 3–5 points, `Dx ≤ 3`, random responsibilities and factor.
pub fn gate_instance(seed: u64) -> (Dataset, simmoe::model::Hyperparameters, simmoe::model::Responsibilities, LowerTriangular<f64>) {
    let mut rng = stream(seed, 200);
    let n = rng.random_range(3..=5);
    let dx = rng.random_range(1..=3);
    let c = rng.random_range(1..=3);
    let data = random_dataset(n, dx, 1, &mut rng);
    let hp = random_hp(dx, 1, c, &mut rng);
    let resp = random_resp(c, n, &mut rng);
    (data, hp, resp, random_lower(dx, &mut rng))
}

/// Largest entrywise relative error between the analytic gradient and central
/// differences, with the same Bartlett draws at every evaluation. The
/// denominator is floored at 1 so entries that vanish analytically are
/// compared absolutely.
pub fn gradient_error(seed: u64, mc_samples: usize) -> std::result::Result<f64, String> {
    let (data, hp, resp, l) = gate_instance(seed);
    let rng = stream(seed, 201);
    let eval = |m: &Matrix<f64>| {
        gate_objective_and_gradient(&data, &hp, &resp, &LowerTriangular::from_lower(m), mc_samples, &mut rng.clone())
            .map_err(|e| e.to_string())
    };
    let (_, g) = eval(l.matrix())?;
    let d = l.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..=i {
            let mut plus = l.matrix().clone();
            plus[(i, j)] += FD_STEP;
            let mut minus = l.matrix().clone();
            minus[(i, j)] -= FD_STEP;
            let fd = (eval(&plus)?.0 - eval(&minus)?.0) / (2.0 * FD_STEP);
            worst = worst.max((g[(i, j)] - fd).abs() / fd.abs().max(1.0));
        }
        for j in i + 1..d {
            ensure(g[(i, j)] == 0.0, || format!("gradient has upper entry ({i},{j})"))?;
        }
    }
    Ok(worst)
}

pub fn gradient_suite(instances: u64) -> Check {
    for seed in 0..instances {
        let err = gradient_error(seed, 8)?;
        ensure(err <= FD_TOL, || format!("instance {seed}: relative error {err:e}"))?;
    }
    Ok(())
}

// --- LP feasibility and optimality ---

/// Random responsibilities and experts with `N ∈ [2, 10]`, `C ∈ [1, 5]`,
/// `Dy ∈ [1, 3]`.
pub fn lp_instance(seed: u64, c_max: usize) -> Instance {
    let mut rng = stream(seed, 300);
    let n = rng.random_range(2..=10);
    let c = rng.random_range(1..=c_max.min(n));
    let dy = rng.random_range(1..=3);
    let data = random_dataset(n, 1, dy, &mut rng);
    let hp = random_hp(1, dy, c, &mut rng);
    let experts = (0..c).map(|_| random_niw(dy, &mut rng)).collect();
    let state = VariationalState {
        experts,
        gate_l: random_lower(1, &mut rng),
        gate_eta: hp.eta0 + 1.0,
        resp: random_resp(c, n, &mut rng),
        lin: Linearization::uniform(n, c),
    };
    Instance { data, hp, state }
}

/// A point of `{Σ s = 1, 0 ≤ s ≤ bounds}`: a random convex combination of
/// greedy solutions for random objectives.
pub fn random_feasible(bounds: &[f64], rng: &mut Stream) -> Vec<f64> {
    let k = bounds.len();
    let w = random_simplex(k + 1, rng);
    let mut s = vec![0.0; k];
    for wv in w {
        let coeffs: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (a, b) in s.iter_mut().zip(greedy_simplex_min(&coeffs, bounds)) {
            *a += wv * b;
        }
    }
    s
}

/// Greedy rows equal the vertex-enumeration optimum and beat
/// `feasible_points` random feasible points; `update_t` rows beat every basis
/// vector.
pub fn lp_case(seed: u64, feasible_points: usize) -> Check {
    let inst = lp_instance(seed, 5);
    let s = update_s(&inst.data, &inst.state.experts, &inst.state.resp).map_err(|e| e.to_string())?;
    let bounds = oracle_s_bounds(&inst.state.resp);
    let mut rng = stream(seed, 301);
    for i in 0..inst.data.n() {
        // coefficients themselves are covered by the oracle suite
        let coeffs: Vec<f64> =
            inst.state.experts.iter().map(|e| expected_log_normal(e, inst.data.y().row(i)).unwrap()).collect();
        let row = s.row(i);
        let sum: f64 = row.iter().sum();
        ensure((sum - 1.0).abs() < 1e-9, || format!("row {i} sums to {sum}"))?;
        for (c, (&v, &b)) in row.iter().zip(&bounds[i]).enumerate() {
            ensure(v >= 0.0 && v <= b + 1e-12, || format!("row {i}: s[{c}] = {v} outside [0, {b}]"))?;
        }
        let got: f64 = coeffs.iter().zip(row).map(|(a, b)| a * b).sum();
        let (best, _) = vertex_enumeration(&coeffs, &bounds[i]);
        ensure((got - best).abs() <= 1e-12 * best.abs().max(1.0), || format!("row {i}: greedy {got} vs vertices {best}"))?;
        for _ in 0..feasible_points {
            let p = random_feasible(&bounds[i], &mut rng);
            let obj: f64 = coeffs.iter().zip(&p).map(|(a, b)| a * b).sum();
            ensure(got <= obj + 1e-12 * obj.abs().max(1.0), || format!("row {i}: feasible point {p:?} beats greedy"))?;
        }
    }
    let t = update_t(&inst.data, &inst.state).map_err(|e| e.to_string())?;
    let coef = oracle_gate_coefficients(&inst);
    let n = inst.data.n();
    for i in 0..n {
        let obj: f64 = (0..n).filter(|&m| m != i).map(|m| t[(i, m)] * coef[i][m]).sum();
        for m in (0..n).filter(|&m| m != i) {
            ensure(obj <= coef[i][m] + 1e-12 * coef[i][m].abs().max(1.0), || format!("t row {i} loses to basis {m}"))?;
        }
    }
    Ok(())
}

pub fn lp_suite(instances: u64, feasible_points: usize) -> Check {
    for seed in 0..instances {
        lp_case(seed, feasible_points).map_err(|e| format!("instance {seed}: {e}"))?;
    }
    Ok(())
}

/// Every expert scale matrix from `m_step_experts` is PD when `s` is any
/// feasible point of the LP.
pub fn pd_case(seed: u64) -> Check {
    let mut inst = lp_instance(seed, 4);
    let bounds = oracle_s_bounds(&inst.state.resp);
    let mut rng = stream(seed, 400);
    for i in 0..inst.data.n() {
        let p = random_feasible(&bounds[i], &mut rng);
        inst.state.lin.s.row_mut(i).copy_from_slice(&p);
    }
    let experts = m_step_experts(&inst.data, &inst.hp, &inst.state.resp, &inst.state.lin.s, R_FLOOR)
        .map_err(|e| format!("m_step_experts: {e}"))?;
    for (c, e) in experts.iter().enumerate() {
        cholesky(&e.sigma).map_err(|err| format!("Σ_{c}: {err}"))?;
    }
    Ok(())
}

pub fn pd_suite(pairs: u64) -> Check {
    for seed in 0..pairs {
        pd_case(seed).map_err(|e| format!("pair {seed}: {e}"))?;
    }
    Ok(())
}
