//! Straight-line reference implementations for tiny instances (all
//! dimensions at most 2) and random instance builders.

#![allow(dead_code)]

pub mod checks;

use std::f64::consts::PI;

use rand::Rng;
use simmoe::distributions::NiwParams;
use simmoe::linalg::{LowerTriangular, Matrix};
use simmoe::model::{Dataset, Hyperparameters, Linearization, Responsibilities, VariationalState};
use simmoe::rng::Stream;
use simmoe::special::{digamma, ln_gamma};

pub type M = Vec<Vec<f64>>;

pub fn to_m(a: &Matrix<f64>) -> M {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

pub fn det(a: &M) -> f64 {
    match a.len() {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => panic!("oracle handles d <= 2"),
    }
}

pub fn inv(a: &M) -> M {
    match a.len() {
        1 => vec![vec![1.0 / a[0][0]]],
        2 => {
            let d = det(a);
            vec![vec![a[1][1] / d, -a[0][1] / d], vec![-a[1][0] / d, a[0][0] / d]]
        }
        _ => panic!("oracle handles d <= 2"),
    }
}

pub fn quad(a: &M, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * a[i][j] * v[j];
        }
    }
    s
}

pub fn llt(l: &M) -> M {
    let d = l.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                out[i][j] += l[i][k] * l[j][k];
            }
        }
    }
    out
}

pub fn trace_prod(a: &M, b: &M) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i][j] * b[j][i];
        }
    }
    s
}

pub fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `log Γ_d(a) = d(d−1)/4 log π + Σᵢ log Γ(a + (1−i)/2)`.
pub fn mvlgamma(d: usize, a: f64) -> f64 {
    let mut s = (d * (d - 1)) as f64 / 4.0 * PI.ln();
    for i in 1..=d {
        s += ln_gamma(a + (1.0 - i as f64) / 2.0).unwrap();
    }
    s
}

pub fn psi_sum(d: usize, nu: f64) -> f64 {
    (1..=d).map(|i| digamma((nu + 1.0 - i as f64) / 2.0).unwrap()).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Worst entrywise error relative to the largest magnitude in either matrix.
pub fn mat_rel_err(a: &M, b: &M) -> f64 {
    let scale = a.iter().chain(b).flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

// --- random instances ---

pub fn random_pd(d: usize, rng: &mut Stream) -> Matrix<f64> {
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let mut m = a.matmul(&a.transpose()).unwrap();
    for i in 0..d {
        m[(i, i)] += rng.random_range(0.2..1.5);
    }
    m.symmetrize();
    m
}

pub fn random_lower(d: usize, rng: &mut Stream) -> LowerTriangular<f64> {
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            l[(i, j)] = rng.random_range(-0.8..0.8);
        }
        l[(i, i)] = rng.random_range(0.3..1.5);
    }
    LowerTriangular::new(l).unwrap()
}

pub fn random_simplex(k: usize, rng: &mut Stream) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| -rng.random_range(1e-3f64..1.0).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_niw(dy: usize, rng: &mut Stream) -> NiwParams<f64> {
    let mu = (0..dy).map(|_| rng.random_range(-1.5..1.5)).collect();
    let kappa = rng.random_range(0.3..6.0);
    let nu = dy as f64 + rng.random_range(0.5..8.0);
    NiwParams::new(mu, kappa, random_pd(dy, rng), nu).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub data: Dataset,
    pub hp: Hyperparameters,
    pub state: VariationalState,
}

pub fn random_dataset(n: usize, dx: usize, dy: usize, rng: &mut Stream) -> Dataset {
    let x = Matrix::from_vec(n, dx, (0..n * dx).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
    let y = Matrix::from_vec(n, dy, (0..n * dy).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    Dataset::new(x, y).unwrap()
}

pub fn random_hp(dx: usize, dy: usize, c: usize, rng: &mut Stream) -> Hyperparameters {
    let eta0 = dx as f64 + rng.random_range(0.0..4.0);
    let mu0 = (0..dy).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu0 = dy as f64 + rng.random_range(0.2..4.0);
    Hyperparameters::new(random_pd(dx, rng), eta0, mu0, rng.random_range(0.01..2.0), random_pd(dy, rng), nu0, c).unwrap()
}

pub fn random_resp(c: usize, n: usize, rng: &mut Stream) -> Responsibilities {
    let mut omega = Vec::with_capacity(c * n * (n - 1));
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(c * (n - 1), rng)).collect();
    for cc in 0..c {
        for row in &rows {
            omega.extend_from_slice(&row[cc * (n - 1)..(cc + 1) * (n - 1)]);
        }
    }
    Responsibilities::from_dense(c, n, omega)
}

pub fn random_lin(n: usize, c: usize, rng: &mut Stream) -> Linearization {
    let mut s = Matrix::zeros(n, c);
    for i in 0..n {
        s.row_mut(i).copy_from_slice(&random_simplex(c, rng));
    }
    let mut t = Matrix::zeros(n, n);
    for i in 0..n {
        let row = random_simplex(n - 1, rng);
        for (j, v) in row.into_iter().enumerate() {
            t[(i, if j < i { j } else { j + 1 })] = v;
        }
    }
    Linearization { s, t }
}

/// N ∈ [2, 4], C ∈ [1, min(3, N)], Dx, Dy ∈ {1, 2}.
pub fn random_instance(rng: &mut Stream) -> Instance {
    let n = rng.random_range(2..=4);
    let c = rng.random_range(1..=3.min(n));
    let dx = rng.random_range(1..=2);
    let dy = rng.random_range(1..=2);
    let data = random_dataset(n, dx, dy, rng);
    let hp = random_hp(dx, dy, c, rng);
    let experts = (0..c).map(|_| random_niw(dy, rng)).collect();
    let gate_l = random_lower(dx, rng);
    let gate_eta = hp.eta0 + rng.random_range(0.0..3.0);
    let state = VariationalState { experts, gate_l, gate_eta, resp: random_resp(c, n, rng), lin: random_lin(n, c, rng) };
    Instance { data, hp, state }
}

// --- oracles ---

fn row(m: &Matrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).to_vec()
}

/// `E log N(y | μ, Σ)` (with the π constant) from Lemma-1 style expectations.
pub fn oracle_eln_full(e: &NiwParams<f64>, y: &[f64]) -> f64 {
    let d = y.len();
    let sigma = to_m(&e.sigma);
    let e_logdet = -psi_sum(d, e.nu) - d as f64 * 2f64.ln() + det(&sigma).ln();
    let dv = diff(y, &e.mu);
    let e_maha = d as f64 / e.kappa + e.nu * quad(&inv(&sigma), &dv);
    -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * e_logdet - 0.5 * e_maha
}

/// Responsibilities by the E-step display, term by term, normalized per n.
pub fn oracle_e_step(inst: &Instance) -> Vec<Vec<Vec<f64>>> {
    let st = &inst.state;
    let n = inst.data.n();
    let c_count = st.experts.len();
    let dy = inst.data.dy() as f64;
    let lam = llt(&to_m(st.gate_l.matrix()));
    let eta = st.gate_eta;
    let x = |i: usize| row(inst.data.x(), i);
    let y = |i: usize| row(inst.data.y(), i);
    let mut out = vec![vec![vec![0.0; n]; n]; c_count];
    for i in 0..n {
        let mut logw = vec![vec![f64::NEG_INFINITY; n]; c_count];
        for c in 0..c_count {
            let ec = &st.experts[c];
            let sig_c = to_m(&ec.sigma);
            let sig_c_inv = inv(&sig_c);
            for m in 0..n {
                if m == i {
                    continue;
                }
                let mut v = 0.0;
                for k in 1..=inst.data.dy() {
                    v += digamma((ec.nu + 1.0 - k as f64) / 2.0).unwrap();
                    for cp in 0..c_count {
                        v -= 0.5 * st.lin.s[(m, cp)] * digamma((st.experts[cp].nu + 1.0 - k as f64) / 2.0).unwrap();
                    }
                }
                v -= det(&sig_c).ln();
                let mut kap = -1.0 / ec.kappa;
                for cp in 0..c_count {
                    let e2 = &st.experts[cp];
                    v += 0.5 * st.lin.s[(m, cp)] * det(&to_m(&e2.sigma)).ln();
                    kap += 0.5 * st.lin.s[(m, cp)] / e2.kappa;
                    v += 0.5 * st.lin.s[(m, cp)] * e2.nu * quad(&inv(&to_m(&e2.sigma)), &diff(&y(m), &e2.mu));
                }
                v += dy * kap;
                v -= 0.5 * ec.nu * quad(&sig_c_inv, &diff(&y(i), &ec.mu));
                v -= 0.5 * ec.nu * quad(&sig_c_inv, &diff(&y(m), &ec.mu));
                v -= 0.5 * eta * quad(&lam, &diff(&x(i), &x(m)));
                for k in 0..n {
                    if k != i {
                        v += 0.5 * eta * st.lin.t[(i, k)] * quad(&lam, &diff(&x(i), &x(k)));
                    }
                }
                logw[c][m] = v;
            }
        }
        let max = logw.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logw.iter().flatten().map(|v| (v - max).exp()).sum();
        for c in 0..c_count {
            for m in 0..n {
                if m != i {
                    out[c][i][m] = (logw[c][m] - max).exp() / z;
                }
            }
        }
    }
    out
}

pub fn oracle_counts(resp: &Responsibilities, s: &Matrix<f64>, r_floor: f64) -> M {
    let n = resp.n();
    let c_count = resp.experts();
    let mut r = vec![vec![0.0; c_count]; n];
    for i in 0..n {
        for c in 0..c_count {
            let mut v = 0.0;
            for m in 0..n {
                if m == i {
                    continue;
                }
                let big_mi: f64 = (0..c_count).map(|cc| resp.get(cc, m, i)).sum();
                v += resp.get(c, i, m) + resp.get(c, m, i) - s[(i, c)] * big_mi;
            }
            r[i][c] = v.max(r_floor);
        }
    }
    r
}

/// (κ, μ, ν, Σ) per expert by the M-step I display in its raw (uncentred) form.
pub fn oracle_m_step_experts(inst: &Instance, r_floor: f64) -> Vec<(f64, Vec<f64>, f64, M)> {
    let hp = &inst.hp;
    let r = oracle_counts(&inst.state.resp, &inst.state.lin.s, r_floor);
    let n = inst.data.n();
    let dy = inst.data.dy();
    (0..inst.state.resp.experts())
        .map(|c| {
            let big_r: f64 = (0..n).map(|i| r[i][c]).sum();
            let kappa = hp.kappa0 + big_r;
            let nu = hp.nu0 + big_r;
            let mut mu = vec![0.0; dy];
            for a in 0..dy {
                mu[a] = hp.kappa0 * hp.mu0[a];
                for i in 0..n {
                    mu[a] += r[i][c] * inst.data.y()[(i, a)];
                }
                mu[a] /= kappa;
            }
            let mut sigma = to_m(&hp.sigma0);
            for a in 0..dy {
                for b in 0..dy {
                    sigma[a][b] += hp.kappa0 * hp.mu0[a] * hp.mu0[b] - kappa * mu[a] * mu[b];
                    for i in 0..n {
                        sigma[a][b] += r[i][c] * inst.data.y()[(i, a)] * inst.data.y()[(i, b)];
                    }
                }
            }
            (kappa, mu, nu, sigma)
        })
        .collect()
}

/// Symmetric 2×2 (or 1×1) eigen-decomposition in closed form.
fn sym_eig(a: &M) -> (Vec<f64>, M) {
    if a.len() == 1 {
        return (vec![a[0][0]], vec![vec![1.0]]);
    }
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let theta = 0.5 * (2.0 * q).atan2(p - r);
    let (c, s) = (theta.cos(), theta.sin());
    let l1 = c * c * p + 2.0 * c * s * q + s * s * r;
    let l2 = s * s * p - 2.0 * c * s * q + c * c * r;
    (vec![l1, l2], vec![vec![c, -s], vec![s, c]])
}

/// `Λ` from the M-step II display with eigenvalue clamping.
pub fn oracle_gate_closed(inst: &Instance, t: &Matrix<f64>, eig_floor: f64) -> M {
    let n = inst.data.n();
    let d = inst.data.dx();
    let mut a = inv(&to_m(&inst.hp.lambda0));
    let resp = &inst.state.resp;
    for i in 0..n {
        for m in 0..n {
            if m == i {
                continue;
            }
            let big: f64 = (0..resp.experts()).map(|c| resp.get(c, i, m)).sum();
            let w = big - t[(i, m)];
            let dv = diff(inst.data.x().row(i), inst.data.x().row(m));
            for p in 0..d {
                for q in 0..d {
                    a[p][q] += w * dv[p] * dv[q];
                }
            }
        }
    }
    let (vals, vecs) = sym_eig(&a);
    let mut out = vec![vec![0.0; d]; d];
    for k in 0..d {
        let inv_v = 1.0 / vals[k].max(eig_floor);
        for p in 0..d {
            for q in 0..d {
                out[p][q] += vecs[p][k] * inv_v * vecs[q][k];
            }
        }
    }
    out
}

/// LP bounds `Σ_{n'}(ω_{c,nn'} + ω_{c,n'n}) / Σ_{n'} Ω_{n'n}`.
pub fn oracle_s_bounds(resp: &Responsibilities) -> M {
    let n = resp.n();
    let cc = resp.experts();
    let mut b = vec![vec![0.0; cc]; n];
    for i in 0..n {
        let mut inflow = 0.0;
        for m in 0..n {
            if m != i {
                for c in 0..cc {
                    inflow += resp.get(c, m, i);
                }
            }
        }
        for c in 0..cc {
            let mut num = 0.0;
            for m in 0..n {
                if m != i {
                    num += resp.get(c, i, m) + resp.get(c, m, i);
                }
            }
            b[i][c] = num / inflow;
        }
    }
    b
}

/// Minimum of `coeffsᵀ s` over `{Σ s = 1, 0 ≤ s ≤ bounds}` by visiting every
/// basic solution: all but one coordinate sit at a bound.
pub fn vertex_enumeration(coeffs: &[f64], bounds: &[f64]) -> (f64, Vec<f64>) {
    let k = coeffs.len();
    let mut best = (f64::INFINITY, vec![]);
    for free in 0..k {
        for mask in 0..(1u32 << k) {
            if mask & (1 << free) != 0 {
                continue;
            }
            let mut s = vec![0.0; k];
            let mut used = 0.0;
            for c in 0..k {
                if c != free && mask & (1 << c) != 0 {
                    s[c] = bounds[c];
                    used += bounds[c];
                }
            }
            let rest = 1.0 - used;
            if rest < -1e-12 || rest > bounds[free] + 1e-12 {
                continue;
            }
            s[free] = rest.max(0.0);
            let obj: f64 = coeffs.iter().zip(&s).map(|(a, b)| a * b).sum();
            if obj < best.0 {
                best = (obj, s);
            }
        }
    }
    best
}

/// `E log N(xⁿ | xⁿ', Λ⁻¹)` under `W(LLᵀ, η)`.
pub fn oracle_gate_coefficients(inst: &Instance) -> M {
    let st = &inst.state;
    let d = inst.data.dx();
    let lam = llt(&to_m(st.gate_l.matrix()));
    let e_logdet = psi_sum(d, st.gate_eta) + d as f64 * 2f64.ln() + det(&lam).ln();
    let n = inst.data.n();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for m in 0..n {
            if i != m {
                let dv = diff(inst.data.x().row(i), inst.data.x().row(m));
                out[i][m] = -0.5 * d as f64 * (2.0 * PI).ln() + 0.5 * e_logdet - 0.5 * st.gate_eta * quad(&lam, &dv);
            }
        }
    }
    out
}

/// ELBO: linearized full conditional + E log p(θ) − E log q(θ), every
/// expectation written out from the Wishart / NIW identities.
pub fn oracle_elbo(inst: &Instance, r_floor: f64) -> f64 {
    let hp = &inst.hp;
    let st = &inst.state;
    let n = inst.data.n();
    let dx = inst.data.dx();
    let dy = inst.data.dy();
    let (dxf, dyf) = (dx as f64, dy as f64);
    let ln2 = 2f64.ln();
    let r = oracle_counts(&st.resp, &st.lin.s, r_floor);

    let mut full = 0.0;
    for i in 0..n {
        for (c, e) in st.experts.iter().enumerate() {
            full += r[i][c] * oracle_eln_full(e, inst.data.y().row(i));
        }
    }
    let lam_l = llt(&to_m(st.gate_l.matrix()));
    for i in 0..n {
        for m in 0..n {
            if i != m {
                let big: f64 = (0..st.experts.len()).map(|c| st.resp.get(c, i, m)).sum();
                let dv = diff(inst.data.x().row(i), inst.data.x().row(m));
                full -= 0.5 * (big - st.lin.t[(i, m)]) * st.gate_eta * quad(&lam_l, &dv);
            }
        }
    }

    // Wishart gate: E log det Λ and E Λ = η Λˡ
    let eta = st.gate_eta;
    let e_logdet_lam = psi_sum(dx, eta) + dxf * ln2 + det(&lam_l).ln();
    let lambda0 = to_m(&hp.lambda0);
    let e_lam: M = lam_l.iter().map(|r| r.iter().map(|v| eta * v).collect()).collect();
    let log_p_gate = -0.5 * hp.eta0 * dxf * ln2 - 0.5 * hp.eta0 * det(&lambda0).ln() - mvlgamma(dx, hp.eta0 / 2.0)
        + 0.5 * (hp.eta0 - dxf - 1.0) * e_logdet_lam
        - 0.5 * trace_prod(&inv(&lambda0), &e_lam);
    let log_q_gate = -0.5 * eta * dxf * ln2 - 0.5 * eta * det(&lam_l).ln() - mvlgamma(dx, eta / 2.0)
        + 0.5 * (eta - dxf - 1.0) * e_logdet_lam
        - 0.5 * trace_prod(&inv(&lam_l), &e_lam);

    let sigma0 = to_m(&hp.sigma0);
    let mut log_p_exp = 0.0;
    let mut log_q_exp = 0.0;
    for e in &st.experts {
        let sig = to_m(&e.sigma);
        let e_logdet = -psi_sum(dy, e.nu) - dyf * ln2 + det(&sig).ln();
        let e_prec: M = inv(&sig).iter().map(|r| r.iter().map(|v| e.nu * v).collect()).collect();
        // E (μ−m)ᵀ Σ⁻¹ (μ−m) = Dy/κ + ν (μ_c−m)ᵀ Σ_c⁻¹ (μ_c−m)
        let e_maha_prior = dyf / e.kappa + quad(&e_prec, &diff(&e.mu, &hp.mu0));
        let e_maha_q = dyf / e.kappa;
        // N(μ | m, Σ/k): −(D/2) log 2π + (D/2) log k − ½ log det Σ − (k/2) maha
        log_p_exp += -0.5 * dyf * (2.0 * PI).ln() + 0.5 * dyf * hp.kappa0.ln() - 0.5 * e_logdet
            - 0.5 * hp.kappa0 * e_maha_prior;
        log_q_exp += -0.5 * dyf * (2.0 * PI).ln() + 0.5 * dyf * e.kappa.ln() - 0.5 * e_logdet - 0.5 * e.kappa * e_maha_q;
        // IW(Σ | Ψ, ν): (ν/2) log det Ψ − (νD/2) log 2 − log Γ_D(ν/2) − ((ν+D+1)/2) log det Σ − ½ tr(Ψ Σ⁻¹)
        log_p_exp += 0.5 * hp.nu0 * det(&sigma0).ln() - 0.5 * hp.nu0 * dyf * ln2 - mvlgamma(dy, hp.nu0 / 2.0)
            - 0.5 * (hp.nu0 + dyf + 1.0) * e_logdet
            - 0.5 * trace_prod(&sigma0, &e_prec);
        log_q_exp += 0.5 * e.nu * det(&sig).ln() - 0.5 * e.nu * dyf * ln2 - mvlgamma(dy, e.nu / 2.0)
            - 0.5 * (e.nu + dyf + 1.0) * e_logdet
            - 0.5 * trace_prod(&sig, &e_prec);
    }
    full + log_p_gate + log_p_exp - log_q_gate - log_q_exp
}
