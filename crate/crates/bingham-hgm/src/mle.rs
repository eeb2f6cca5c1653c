//! Maximum-likelihood fitting by holonomic gradient descent.
//!
//! The log-likelihood of axial data with empirical second moments `s` is
//! `l(theta) = N (sum_i theta_i s_i - log C(theta))`, so the score is
//! `N (s - eta(theta))` with `eta = grad log C` the expectation parameter,
//! and the Hessian is `-N` times the Jacobian of `eta`, available in closed
//! form from the Pfaffian matrices: `d eta_i / d phi_j = (P_j eta)_i -
//! eta_i eta_j`.
//!
//! Two fitters share the machinery:
//!
//! * discrete: damped Newton steps, re-propagating the logarithmic vector
//!   along each step segment;
//! * continuous: the Newton flow `dtheta/dtau = -(1-tau)^{-1} H^{-1} g`
//!   integrated jointly with the logarithmic Pfaffian system up to
//!   `tau = 1 - epsilon`, finished with a few discrete polish steps. Along
//!   this flow the expectation parameter moves on the straight line from
//!   `eta(theta_0)` to `s`, so the score shrinks exactly by `(1 - tau)`.
//!
//! The MLE shares the order and tie pattern of `s`: ties are fitted inside
//! the degenerate system of the matching multiplicity pattern (with block
//! sums of `s` as sufficient statistics), and the strict order is asserted
//! at every accepted step. Identifiability is fixed by pinning the largest
//! block at 0 and optimizing the remaining q - 1 coordinates.

use crate::error::{Error, Result};
use crate::hg::{norm_const_canonical, PathSegment};
use crate::linalg::Mat;
use crate::model::{canonicalize, expand_eta, uniform_mass, GVector, Layout, MultiplicityTheta};
use crate::ode::{integrate_observed, OdeControl};
use crate::pfaffian::{add_full, pfaffian_matrix};

pub const DEFAULT_GRAD_TOL: f64 = 1e-8;
pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_POLISH_STEPS: usize = 3;

const MAX_NEWTON_ITERS: usize = 200;
const MAX_HALVINGS: usize = 20;
/// Series/propagation accuracy for seeding and for the final residual.
const SEED_EPS: f64 = 1e-10;
/// Tolerance the polish phase aims for (not an error if unreached).
const POLISH_GRAD_TOL: f64 = 1e-11;
/// Distinct values closer than this draw a warning: the fit will treat them
/// as distinct, which is usually not what near-tied data means.
const NEAR_TIE_WARN: f64 = 1e-8;
/// Minimum gap a candidate Newton step must keep between blocks.
const ORDER_GAP: f64 = 1e-9;

/// Empirical second moments on the open simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    s: Vec<f64>,
    n_obs: usize,
}

impl SuffStats {
    /// Wrap moments directly; they must be positive and sum to 1 within
    /// 1e-6 (then they are renormalized exactly).
    pub fn from_moments(s: Vec<f64>, n_obs: usize) -> Result<Self> {
        if s.len() < 2 {
            return Err(Error::DimensionTooSmall { p: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "s" });
        }
        if let Some(i) = s.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateStats { index: i });
        }
        let sum: f64 = s.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::StatsNotNormalized { sum });
        }
        let s = s.iter().map(|v| v / sum).collect();
        Ok(SuffStats { s, n_obs })
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }
}

/// Second moments of unit-norm observations, one per row.
pub fn sufficient_stats(rows: &[Vec<f64>], norm_tol: f64) -> Result<SuffStats> {
    if rows.is_empty() {
        return Err(Error::DimensionTooSmall { p: 0 });
    }
    let p = rows[0].len();
    if p < 2 {
        return Err(Error::DimensionTooSmall { p });
    }
    let mut s = vec![0.0; p];
    for (r, row) in rows.iter().enumerate() {
        if row.len() != p || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "data row" });
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > norm_tol {
            return Err(Error::RowNormViolation {
                row: r,
                norm,
                tol: norm_tol,
            });
        }
        for (acc, v) in s.iter_mut().zip(row) {
            *acc += v * v;
        }
    }
    let n = rows.len() as f64;
    for v in s.iter_mut() {
        *v /= n;
    }
    if let Some(i) = s.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateStats { index: i });
    }
    let total: f64 = s.iter().sum();
    for v in s.iter_mut() {
        *v /= total;
    }
    Ok(SuffStats {
        s,
        n_obs: rows.len(),
    })
}

/// One record of the optimization trace.
#[derive(Debug, Clone)]
pub struct FitIteration {
    /// Parameter in user coordinate order.
    pub theta: Vec<f64>,
    /// Max-norm of the per-observation score, `max_j |S_j - eta_j|`.
    pub grad_norm: f64,
}

/// Fit output. `residual` is `max_i |eta_i(theta_hat) - s_i|` with `eta`
/// re-evaluated by an independent propagation from a fresh series seed.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: MultiplicityTheta,
    pub eta_hat: Vec<f64>,
    pub loglik: f64,
    pub residual: f64,
    pub iterations: Vec<FitIteration>,
}

/// Initial point with the order and tie pattern of `s`: block ranks get
/// values `-rank/(2q)`, rescaled so the expanded l1 norm is 1/2, with the
/// largest-s block pinned at 0.
pub fn default_initial_point(stats: &SuffStats) -> Result<MultiplicityTheta> {
    let sp = canonicalize(&stats.s, 0.0)?;
    warn_near_ties(&sp);
    let q = sp.q();
    if q == 1 {
        return sp.with_phi(vec![0.0]);
    }
    let raw: Vec<f64> = (0..q).map(|r| -(r as f64) / (2.0 * q as f64)).collect();
    let l1: f64 = raw
        .iter()
        .zip(sp.d())
        .map(|(v, &m)| v.abs() * m as f64)
        .sum();
    let scale = 0.5 / l1;
    let mut phi: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    phi[0] = 0.0;
    sp.with_phi(phi)
}

fn warn_near_ties(pattern: &MultiplicityTheta) {
    let gap = pattern.min_gap();
    if gap < NEAR_TIE_WARN {
        log::warn!(
            "statistics contain distinct values separated by {gap:.2e}; they are fitted as \
             distinct -- canonicalize with a tie tolerance to fit them as tied"
        );
    }
}

/// Block sums of `s` in the block order of `theta`, after checking that the
/// tie pattern and descending order of `theta` match those of `s`.
fn block_sums(stats: &SuffStats, theta: &MultiplicityTheta) -> Result<Vec<f64>> {
    let sp = canonicalize(&stats.s, 0.0)?;
    if sp.d() != theta.d() {
        return Err(Error::PatternMismatch);
    }
    let members = |mt: &MultiplicityTheta, b: usize| -> Vec<usize> {
        let start: usize = mt.d()[..b].iter().sum();
        let mut m = mt.perm()[start..start + mt.d()[b]].to_vec();
        m.sort_unstable();
        m
    };
    for b in 0..sp.q() {
        if members(&sp, b) != members(theta, b) {
            return Err(Error::PatternMismatch);
        }
    }
    let mut sums = Vec::with_capacity(theta.q());
    let mut slot = 0;
    for &count in theta.d() {
        let mut acc = 0.0;
        for _ in 0..count {
            acc += stats.s[theta.perm()[slot]];
            slot += 1;
        }
        sums.push(acc);
    }
    Ok(sums)
}

/// Per-observation score `S - eta` over blocks and the per-observation
/// Hessian `-(d eta_i / d phi_j)`, symmetrized.
fn grad_hess_blocks(
    theta: &MultiplicityTheta,
    eta: &[f64],
    s_blocks: &[f64],
) -> Result<(Vec<f64>, Mat)> {
    let q = theta.q();
    let grad: Vec<f64> = s_blocks.iter().zip(eta).map(|(s, e)| s - e).collect();
    let mut hess = Mat::zeros(q, q);
    for j in 0..q {
        let pj = pfaffian_matrix(j, theta)?;
        let w = pj.matvec(eta);
        for i in 0..q {
            hess[(i, j)] = -(w[i] - eta[i] * eta[j]);
        }
    }
    for i in 0..q {
        for j in 0..i {
            let m = 0.5 * (hess[(i, j)] + hess[(j, i)]);
            hess[(i, j)] = m;
            hess[(j, i)] = m;
        }
    }
    Ok((grad, hess))
}

/// Log-likelihood, score and Hessian at `theta` given its logarithmic
/// vector. The score and Hessian cover all q block coordinates; the gauge
/// direction is in their (left) null space.
pub fn loglik_grad_hess(
    stats: &SuffStats,
    theta: &MultiplicityTheta,
    gl: &GVector,
) -> Result<(f64, Vec<f64>, Mat)> {
    if gl.layout() != Layout::Log || gl.len() != theta.q() {
        return Err(Error::LayoutMismatch {
            expected: "log",
            got: gl.layout().name(),
        });
    }
    let s_blocks = block_sums(stats, theta)?;
    let n = stats.n_obs as f64;
    let (mut grad, mut hess) = grad_hess_blocks(theta, gl.values(), &s_blocks)?;
    for g in grad.iter_mut() {
        *g *= n;
    }
    for i in 0..theta.q() {
        for j in 0..theta.q() {
            hess[(i, j)] *= n;
        }
    }
    let ll = n * (per_sample_loglik(theta, &s_blocks, gl.log_c()) - uniform_mass(theta.p())?.ln_value);
    Ok((ll, grad, hess))
}

/// `sum_j phi_j S_j - ln(C/C(0))`; the `ln C(0)` constant is left out where
/// only differences matter.
fn per_sample_loglik(theta: &MultiplicityTheta, s_blocks: &[f64], log_c: f64) -> f64 {
    let dot: f64 = theta.phi().iter().zip(s_blocks).map(|(p, s)| p * s).sum();
    dot - log_c
}

fn order_ok(phi: &[f64]) -> bool {
    phi[0] == 0.0 && phi.windows(2).all(|w| w[0] - w[1] > ORDER_GAP)
}

struct FitState {
    theta: MultiplicityTheta,
    gl: GVector,
}

/// Damped Newton iteration in the q-1 free coordinates, co-propagating the
/// logarithmic vector along each accepted step.
fn newton_loop(
    s_blocks: &[f64],
    mut st: FitState,
    grad_tol: f64,
    max_iters: usize,
    ctl: &OdeControl,
    trace: &mut Vec<FitIteration>,
) -> Result<(FitState, bool)> {
    let q = st.theta.q();
    for _ in 0..max_iters {
        let (grad, hess) = grad_hess_blocks(&st.theta, st.gl.values(), s_blocks)?;
        let gn = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        trace.push(FitIteration {
            theta: st.theta.expand(),
            grad_norm: gn,
        });
        if gn <= grad_tol || q == 1 {
            return Ok((st, true));
        }

        let m = q - 1;
        let mut hs = Mat::zeros(m, m);
        let mut gs = vec![0.0; m];
        for i in 1..q {
            gs[i - 1] = grad[i];
            for j in 1..q {
                hs[(i - 1, j - 1)] = hess[(i, j)];
            }
        }
        let delta = hs.solve(&gs)?;

        let ll = per_sample_loglik(&st.theta, s_blocks, st.gl.log_c());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = st.theta.phi().to_vec();
            for j in 1..q {
                cand[j] -= step * delta[j - 1];
            }
            if order_ok(&cand) {
                let cand_theta = st.theta.with_phi(cand)?;
                let seg = PathSegment::new(st.theta.clone(), cand_theta.clone())?;
                let gl_new = crate::hg::propagate_log(&st.gl, &seg, ctl)?;
                let ll_new = per_sample_loglik(&cand_theta, s_blocks, gl_new.log_c());
                if ll_new >= ll - 1e-9 * (1.0 + ll.abs()) {
                    st = FitState {
                        theta: cand_theta,
                        gl: gl_new,
                    };
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::LineSearchFailed {
                halvings: MAX_HALVINGS,
            });
        }
    }
    Ok((st, false))
}

fn prepare(
    stats: &SuffStats,
    theta0: &MultiplicityTheta,
    ctl: &OdeControl,
) -> Result<(Vec<f64>, FitState)> {
    let s_blocks = block_sums(stats, theta0)?;
    let sp = canonicalize(&stats.s, 0.0)?;
    warn_near_ties(&sp);
    // work in the gauge with the largest block at 0 and no shift
    let theta = theta0.with_phi(theta0.phi().to_vec())?;
    if theta.phi()[0] != 0.0 {
        return Err(Error::PatternMismatch);
    }
    let gl = norm_const_canonical(&theta, SEED_EPS, ctl)?.gl;
    Ok((s_blocks, FitState { theta, gl }))
}

fn finalize(
    stats: &SuffStats,
    st: FitState,
    ctl: &OdeControl,
    iterations: Vec<FitIteration>,
) -> Result<FitResult> {
    let tight = OdeControl {
        rel_tol: ctl.rel_tol.min(1e-12),
        abs_tol: ctl.abs_tol.min(1e-12),
        ..*ctl
    };
    let gl = norm_const_canonical(&st.theta, SEED_EPS, &tight)?.gl;
    let eta_hat = expand_eta(&st.theta, gl.values());
    let residual = eta_hat
        .iter()
        .zip(stats.s())
        .map(|(e, s)| (e - s).abs())
        .fold(0.0f64, f64::max);
    let n = stats.n_obs as f64;
    let theta_user = st.theta.expand();
    let dot: f64 = theta_user.iter().zip(stats.s()).map(|(t, s)| t * s).sum();
    let loglik = n * (dot - gl.log_c() - uniform_mass(st.theta.p())?.ln_value);
    Ok(FitResult {
        theta_hat: st.theta,
        eta_hat,
        loglik,
        residual,
        iterations,
    })
}

/// Discrete-time HGD: damped Newton-Raphson with the logarithmic vector
/// re-propagated along every step, stopping at `max_j |grad l|_j / N <=
/// grad_tol`.
pub fn fit_discrete(
    stats: &SuffStats,
    theta0: &MultiplicityTheta,
    grad_tol: f64,
    ctl: &OdeControl,
) -> Result<FitResult> {
    if !(grad_tol > 0.0) {
        return Err(Error::InvalidTolerance {
            what: "grad_tol",
            value: grad_tol,
        });
    }
    let (s_blocks, st) = prepare(stats, theta0, ctl)?;
    let mut trace = Vec::new();
    let (st, converged) = newton_loop(&s_blocks, st, grad_tol, MAX_NEWTON_ITERS, ctl, &mut trace)?;
    if !converged {
        return Err(Error::IterationCap {
            max_iters: MAX_NEWTON_ITERS,
        });
    }
    finalize(stats, st, ctl, trace)
}

/// Continuous-time HGD: integrate the Newton flow and the logarithmic
/// Pfaffian system jointly over `tau in [0, 1 - epsilon]`, then apply up to
/// `polish_steps` discrete Newton corrections.
pub fn fit_continuous(
    stats: &SuffStats,
    theta0: &MultiplicityTheta,
    epsilon: f64,
    polish_steps: usize,
    ctl: &OdeControl,
) -> Result<FitResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidTolerance {
            what: "epsilon",
            value: epsilon,
        });
    }
    let (s_blocks, mut st) = prepare(stats, theta0, ctl)?;
    let q = st.theta.q();
    let mut trace = Vec::new();

    if q > 1 {
        let mut y0 = Vec::with_capacity(2 * q);
        y0.extend_from_slice(&st.theta.phi()[1..]);
        y0.extend_from_slice(st.gl.values());
        y0.push(st.gl.log_c());

        let pattern = st.theta.clone();
        let d: Vec<f64> = pattern.d().iter().map(|&m| m as f64).collect();
        let m = q - 1;

        let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let mut phi = Vec::with_capacity(q);
            phi.push(0.0);
            phi.extend_from_slice(&y[..m]);
            if !order_ok(&phi) {
                return Err(Error::OrderViolation { tau });
            }
            let eta = &y[m..m + q];
            let th = pattern.with_phi(phi.clone())?;
            let (grad, hess) = grad_hess_blocks(&th, eta, &s_blocks)?;
            let mut hs = Mat::zeros(m, m);
            let mut gs = vec![0.0; m];
            for i in 1..q {
                gs[i - 1] = grad[i];
                for j in 1..q {
                    hs[(i - 1, j - 1)] = hess[(i, j)];
                }
            }
            let delta = hs.solve(&gs)?;
            let scale = -1.0 / (1.0 - tau);
            let v: Vec<f64> = delta.iter().map(|x| x * scale).collect();

            let mut a = Mat::zeros(q, q);
            for (k, &w) in v.iter().enumerate() {
                if w != 0.0 {
                    add_full(&mut a, &phi, &d, k + 1, w);
                }
            }
            let field = a.matvec(eta);
            let dot: f64 = v.iter().enumerate().map(|(k, w)| w * eta[k + 1]).sum();
            dy[..m].copy_from_slice(&v);
            for j in 0..q {
                dy[m + j] = field[j] - dot * eta[j];
            }
            dy[m + q] = dot;
            Ok(())
        };

        let observer = |tau: f64, y: &[f64]| -> Result<()> {
            let mut phi = Vec::with_capacity(q);
            phi.push(0.0);
            phi.extend_from_slice(&y[..m]);
            if !order_ok(&phi) {
                return Err(Error::OrderViolation { tau });
            }
            let eta = &y[m..m + q];
            let gn = s_blocks
                .iter()
                .zip(eta)
                .map(|(s, e)| (s - e).abs())
                .fold(0.0f64, f64::max);
            trace.push(FitIteration {
                theta: pattern.with_phi(phi)?.expand(),
                grad_norm: gn,
            });
            Ok(())
        };

        let (y_end, _) = integrate_observed(rhs, 0.0, 1.0 - epsilon, &y0, ctl, observer)?;
        let mut phi = Vec::with_capacity(q);
        phi.push(0.0);
        phi.extend_from_slice(&y_end[..m]);
        st = FitState {
            theta: pattern.with_phi(phi)?,
            gl: GVector::log(y_end[m..m + q].to_vec(), y_end[m + q]),
        };
    }

    let (st, _) = newton_loop(&s_blocks, st, POLISH_GRAD_TOL, polish_steps, ctl, &mut trace)?;
    finalize(stats, st, ctl, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_rows(p: usize, n: usize) -> Vec<Vec<f64>> {
        let v = 1.0 / (p as f64).sqrt();
        (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![sign * v; p]
            })
            .collect()
    }

    #[test]
    fn stats_from_rows() {
        let s = sufficient_stats(&uniform_rows(4, 6), 1e-8).unwrap();
        for v in s.s() {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-15);
        }
        assert_eq!(s.n_obs(), 6);

        let mut rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = sufficient_stats(&rows, 1e-8).unwrap();
        assert_eq!(s.s(), &[0.5, 0.5]);

        rows.push(vec![0.5, 0.5]); // norm sqrt(0.5)
        assert!(matches!(
            sufficient_stats(&rows, 1e-8),
            Err(Error::RowNormViolation { row: 2, .. })
        ));
    }

    #[test]
    fn stats_hyperplane_degeneracy() {
        let rows = vec![vec![1.0, 0.0, 0.0]];
        assert!(matches!(
            sufficient_stats(&rows, 1e-8),
            Err(Error::DegenerateStats { index: 1 })
        ));
    }

    #[test]
    fn initial_point_matches_published_recipe() {
        let s: Vec<f64> = (1..=5).map(|i| i as f64 / 15.0).collect();
        let stats = SuffStats::from_moments(s, 1).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        assert_eq!(t0.q(), 5);
        let expanded = t0.expand();
        let expect = [-4.0 / 20.0, -3.0 / 20.0, -2.0 / 20.0, -1.0 / 20.0, 0.0];
        for (a, b) in expanded.iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn initial_point_ties() {
        let stats = SuffStats::from_moments(vec![0.25; 4], 10).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        assert_eq!(t0.q(), 1);
        assert_eq!(t0.phi(), &[0.0]);

        let stats = SuffStats::from_moments(vec![0.1, 0.1, 0.8], 10).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        assert_eq!(t0.d(), &[1, 2]);
        assert_eq!(t0.expand()[2], 0.0);
    }

    #[test]
    fn grad_at_origin_like_point() {
        // nearly-zero distinct theta: grad_i ~ N (s_i - 1/p)
        let stats =
            SuffStats::from_moments(vec![0.1, 0.2, 0.3, 0.4], 50).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let tiny = t0
            .with_phi(vec![0.0, -1e-9, -2e-9, -3e-9])
            .unwrap();
        let gl = norm_const_canonical(&tiny, 1e-12, &OdeControl::default())
            .unwrap()
            .gl;
        let (_, grad, _) = loglik_grad_hess(&stats, &tiny, &gl).unwrap();
        // canonical block order is s-descending: s = (0.4, 0.3, 0.2, 0.1)
        let n = 50.0;
        for (g, s) in grad.iter().zip([0.4, 0.3, 0.2, 0.1]) {
            assert_relative_eq!(*g, n * (s - 0.25), epsilon = 1e-5);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let stats = SuffStats::from_moments(vec![0.2, 0.3, 0.5], 7).unwrap();
        let t = canonicalize(&[-1.0, -0.5, 0.0], 0.0).unwrap();
        let ctl = OdeControl::default();
        let gl = norm_const_canonical(&t, 1e-12, &ctl).unwrap().gl;
        let (_, _, hess) = loglik_grad_hess(&stats, &t, &gl).unwrap();
        let n = stats.n_obs() as f64;
        let h = 1e-4;
        let q = t.q();
        // FD of the score via fresh eta evaluations
        let eta_at = |phi: Vec<f64>| -> Vec<f64> {
            let th = t.with_phi(phi).unwrap();
            let shifted = th
                .with_phi(th.phi().iter().map(|v| v - th.phi()[0]).collect())
                .unwrap();
            let gl = norm_const_canonical(&shifted, 1e-12, &ctl).unwrap().gl;
            gl.values().to_vec()
        };
        for k in 0..q {
            let mut up = t.phi().to_vec();
            let mut dn = t.phi().to_vec();
            up[k] += h;
            dn[k] -= h;
            let eu = eta_at(up);
            let ed = eta_at(dn);
            for i in 0..q {
                let fd = -n * (eu[i] - ed[i]) / (2.0 * h);
                assert!(
                    (hess[(i, k)] - fd).abs() <= 1e-5 * n,
                    "hess[{i},{k}] = {} vs fd {}",
                    hess[(i, k)],
                    fd
                );
            }
        }
    }

    #[test]
    fn pattern_mismatch_detected() {
        let stats = SuffStats::from_moments(vec![0.2, 0.3, 0.5], 7).unwrap();
        let tied = canonicalize(&[0.0, 0.0, -1.0], 0.0).unwrap();
        assert!(matches!(
            block_sums(&stats, &tied),
            Err(Error::PatternMismatch)
        ));
    }

    #[test]
    fn uniform_stats_give_zero_mle() {
        let stats = SuffStats::from_moments(vec![0.25; 4], 100).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let fit = fit_discrete(&stats, &t0, 1e-8, &OdeControl::default()).unwrap();
        assert_eq!(fit.theta_hat.expand(), vec![0.0; 4]);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn discrete_fit_p3_table5_row() {
        let p = 3;
        let s: Vec<f64> = (1..=p)
            .map(|i| 2.0 * i as f64 / (p as f64 * (p as f64 + 1.0)))
            .collect();
        let stats = SuffStats::from_moments(s, 1).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let fit = fit_discrete(&stats, &t0, 1e-8, &OdeControl::default()).unwrap();
        assert!(fit.residual <= 1e-6, "residual {}", fit.residual);
    }

    #[test]
    fn continuous_fit_reproduces_section44() {
        let s: Vec<f64> = (1..=5).map(|i| i as f64 / 15.0).collect();
        let stats = SuffStats::from_moments(s, 1).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let fit = fit_continuous(
            &stats,
            &t0,
            DEFAULT_EPSILON,
            DEFAULT_POLISH_STEPS,
            &OdeControl::default(),
        )
        .unwrap();
        let expect = [-7.188333, -3.120184, -1.543555, -0.628081, 0.0];
        for (a, b) in fit.theta_hat.expand().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-4, "component {a} vs {b}");
        }
        assert!(fit.residual < 1e-6);
    }

    #[test]
    fn discrete_and_continuous_agree() {
        let stats = SuffStats::from_moments(vec![0.1, 0.15, 0.3, 0.45], 25).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let ctl = OdeControl::default();
        let a = fit_discrete(&stats, &t0, 1e-10, &ctl).unwrap();
        let b = fit_continuous(&stats, &t0, 1e-2, 3, &ctl).unwrap();
        for (x, y) in a.theta_hat.expand().iter().zip(b.theta_hat.expand()) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn continuous_grad_decay_law() {
        // residual after stopping at 1 - eps (no polish) is eps times the
        // initial score, because eta moves on a straight line to s
        let stats = SuffStats::from_moments(vec![0.15, 0.35, 0.5], 1).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let ctl = OdeControl {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let gl0 = norm_const_canonical(&t0, 1e-12, &ctl).unwrap().gl;
        let g0 = expand_eta(&t0, gl0.values())
            .iter()
            .zip(stats.s())
            .map(|(e, s)| (s - e).abs())
            .fold(0.0f64, f64::max);
        for eps in [0.5, 0.1, 0.01] {
            let fit = fit_continuous(&stats, &t0, eps, 0, &ctl).unwrap();
            assert_relative_eq!(fit.residual, eps * g0, max_relative = 1e-5);
        }
    }

    #[test]
    fn tied_stats_fit_in_degenerate_system() {
        let stats = SuffStats::from_moments(vec![0.15, 0.15, 0.7], 40).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let fit = fit_continuous(&stats, &t0, 1e-2, 3, &OdeControl::default()).unwrap();
        assert_eq!(fit.theta_hat.d(), &[1, 2]);
        let th = fit.theta_hat.expand();
        assert_eq!(th[0], th[1]);
        assert!(th[0] < th[2]);
        assert!(fit.residual < 1e-8);
        // MLE order law: eta ordering matches s ordering
        assert!(fit.eta_hat[0] < fit.eta_hat[2]);
    }

    #[test]
    fn likelihood_ascends_along_discrete_steps() {
        let stats = SuffStats::from_moments(vec![0.05, 0.2, 0.75], 30).unwrap();
        let t0 = default_initial_point(&stats).unwrap();
        let ctl = OdeControl::default();
        let fit = fit_discrete(&stats, &t0, 1e-9, &ctl).unwrap();
        // replay the trace, evaluating the likelihood freshly at each iterate
        let mut last = f64::NEG_INFINITY;
        for it in &fit.iterations {
            let (log_c, _) = crate::hg::hg_norm_const(&it.theta, 1e-10, &ctl).unwrap();
            let dot: f64 = it.theta.iter().zip(stats.s()).map(|(t, s)| t * s).sum();
            let ll = dot - log_c;
            assert!(
                ll >= last - 1e-8 * (1.0 + last.abs()),
                "likelihood decreased: {last} -> {ll}"
            );
            last = ll;
        }
    }
}
