//! Power-series evaluation of the normalizing constant and its derivatives.
//!
//! With distinct values `phi` of multiplicities `d` (`sum d_i = p`), the
//! normalized constant expands as
//!
//! ```text
//! C(theta(phi,d))/C(0) = Gamma(p/2)/prod Gamma(d_i/2)
//!     * sum_k  phi^k/k! * prod Gamma(k_i + d_i/2) / Gamma(|k| + p/2)
//! ```
//!
//! summed over multi-indices `k` of length `q`. Truncating to `|k| < N` makes
//! an absolute error of at most `(||phi||_1^N / N!) * (N+1)/(N+1-||phi||_1)`
//! relative to C(0), which selects N for a requested tolerance.
//!
//! Terms are generated by exact ratio recurrences from the leading term 1, so
//! no gamma evaluations enter the sum. The sum always runs in the gauge with
//! the smallest distinct value at 0: all terms are then nonnegative and the
//! alternating-sign cancellation that ruins the max-at-0 gauge for large
//! parameters cannot occur. The gauge factor is restored on the way out.
//!
//! Derivatives come from the multiplicity-shift relation
//! `d/dphi_i C(theta(phi,d)) = d_i/(2 pi) * C(theta(phi, d + 2 e_i))`,
//! which term-by-term differentiation of the series yields; it is validated
//! against finite differences in the tests.

use crate::error::{Error, Result};
use crate::model::{GVector, MultiplicityTheta};
use crate::special::{ln_factorial, ln_gamma};

/// Tolerance and budget for a series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRequest {
    /// Absolute tolerance on C/C(0).
    pub eps: f64,
    /// Cap on the total number of multi-index terms.
    pub max_terms: usize,
}

pub const DEFAULT_MAX_TERMS: usize = 100_000_000;

impl Default for SeriesRequest {
    fn default() -> Self {
        SeriesRequest {
            eps: 1e-6,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

impl SeriesRequest {
    pub fn with_eps(eps: f64) -> Self {
        SeriesRequest {
            eps,
            ..Default::default()
        }
    }
}

/// Truncation error bound `(l1^N / N!) * (N+1)/(N+1-l1)` on `|C - C_N|/C(0)`.
pub fn truncation_bound(phi_l1: f64, n: usize) -> Result<f64> {
    if !(phi_l1 >= 0.0) {
        return Err(Error::InvalidTolerance {
            what: "phi_l1",
            value: phi_l1,
        });
    }
    let nf = n as f64;
    if nf + 1.0 <= phi_l1 {
        return Err(Error::BoundDomain { phi_l1, n });
    }
    if phi_l1 == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let ln_bound =
        nf * phi_l1.ln() - ln_factorial(n) + ((nf + 1.0) / (nf + 1.0 - phi_l1)).ln();
    Ok(ln_bound.exp())
}

/// Smallest N whose truncation bound is at most eps, checked against the
/// term-count budget `C(N+q-1, q-1) <= max_terms`.
fn select_n(phi_l1: f64, eps: f64, q: usize, max_terms: usize) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidTolerance {
            what: "eps",
            value: eps,
        });
    }
    let mut n = if phi_l1 == 0.0 {
        1
    } else {
        let mut n = phi_l1.floor() as usize + 1;
        let ln_eps = eps.ln();
        loop {
            let nf = n as f64;
            let ln_bound =
                nf * phi_l1.ln() - ln_factorial(n) + ((nf + 1.0) / (nf + 1.0 - phi_l1)).ln();
            if ln_bound <= ln_eps {
                break;
            }
            n += 1;
            if n > 1_000_000 {
                return Err(Error::SeriesBudget {
                    phi_l1,
                    needed_n: n,
                    terms: f64::INFINITY,
                    budget: max_terms,
                });
            }
        }
        n
    };
    n = n.max(1);
    let ln_terms = ln_gamma((n + q) as f64) - ln_factorial(n) - ln_gamma(q as f64);
    let terms = ln_terms.exp();
    if terms > max_terms as f64 {
        return Err(Error::SeriesBudget {
            phi_l1,
            needed_n: n,
            terms,
            budget: max_terms,
        });
    }
    Ok(n)
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Sum of the normalized series over `|k| < n_max` at `psi >= 0`.
///
/// `d_half` holds the half-multiplicities of the pattern being summed (which
/// for derivatives differs from the base pattern). The leading term is
/// exactly 1; successive terms follow from
/// `t(k + e_i)/t(k) = psi_i (k_i + d_i/2) / ((k_i + 1)(|k| + p/2))`.
fn series_sum(psi: &[f64], d_half: &[f64], n_max: usize) -> f64 {
    let p_half: f64 = d_half.iter().sum();
    let mut acc = Kahan::default();
    walk(0, 0, 1.0, psi, d_half, p_half, n_max, &mut acc);
    acc.sum
}

#[allow(clippy::too_many_arguments)]
fn walk(
    axis: usize,
    n_used: usize,
    term: f64,
    psi: &[f64],
    d_half: &[f64],
    p_half: f64,
    n_max: usize,
    acc: &mut Kahan,
) {
    let q = psi.len();
    let budget = n_max - 1 - n_used;
    let x = psi[axis];
    if axis == q - 1 {
        let mut t = term;
        acc.add(t);
        if x == 0.0 {
            return;
        }
        for k in 0..budget {
            let kf = k as f64;
            t *= x * (kf + d_half[axis]) / ((kf + 1.0) * ((n_used + k) as f64 + p_half));
            if t == 0.0 {
                return;
            }
            acc.add(t);
        }
    } else {
        let mut t = term;
        for k in 0..=budget {
            walk(axis + 1, n_used + k, t, psi, d_half, p_half, n_max, acc);
            if k == budget || x == 0.0 || t == 0.0 {
                break;
            }
            let kf = k as f64;
            t *= x * (kf + d_half[axis]) / ((kf + 1.0) * ((n_used + k) as f64 + p_half));
        }
    }
}

struct GaugePlan {
    /// Shifted distinct values the sum runs at.
    psi: Vec<f64>,
    /// `C(phi) = exp(shift) * C(psi)`.
    shift: f64,
    /// Truncation order.
    n: usize,
}

/// Pick the summation gauge and truncation order.
///
/// The gauge with the smallest value at 0 makes every term nonnegative and is
/// always preferred. It can inflate the l1 norm (the shift is added to all q
/// values), and with it the term count, so when its budget is exhausted and
/// the max-at-0 gauge has a small l1 norm, the signed sum is used instead:
/// term magnitudes then total at most `e^{l1}` against a result of at least
/// `e^{-l1}`, keeping the roundoff amplification below `e^{2 l1} * 2e-16`.
fn plan_gauge(theta: &MultiplicityTheta, eps: f64, max_terms: usize) -> Result<GaugePlan> {
    let phi = theta.phi();
    let q = theta.q();
    let phi_min = phi[q - 1];
    let mut psi_pos: Vec<f64> = phi.iter().map(|v| v - phi_min).collect();
    psi_pos[q - 1] = 0.0;
    let l1_pos: f64 = psi_pos.iter().sum();

    let pos_err = match select_n(l1_pos, eps, q, max_terms) {
        Ok(n) => {
            return Ok(GaugePlan {
                psi: psi_pos,
                shift: phi_min,
                n,
            })
        }
        Err(e) => e,
    };

    let phi_max = phi[0];
    let mut psi_neg: Vec<f64> = phi.iter().map(|v| v - phi_max).collect();
    psi_neg[0] = 0.0;
    let l1_neg: f64 = -psi_neg.iter().sum::<f64>();
    let roundoff_safe = 0.5 * (0.1 * eps / 2.2e-16).ln();
    if l1_neg < l1_pos && l1_neg <= roundoff_safe {
        if let Ok(n) = select_n(l1_neg, eps, q, max_terms) {
            return Ok(GaugePlan {
                psi: psi_neg,
                shift: phi_max,
                n,
            });
        }
    }
    Err(pos_err)
}

/// Truncation order the series would use at `theta` for tolerance `eps`.
pub fn series_order(theta: &MultiplicityTheta, eps: f64) -> Result<usize> {
    plan_gauge(theta, eps, DEFAULT_MAX_TERMS).map(|plan| plan.n)
}

/// Normalized constant `C(theta)/C(0)` at the gauge carried by `theta`,
/// together with the truncation order used.
pub fn series_norm_const(theta: &MultiplicityTheta, eps: f64) -> Result<(f64, usize)> {
    series_norm_const_req(theta, &SeriesRequest::with_eps(eps))
}

pub fn series_norm_const_req(
    theta: &MultiplicityTheta,
    req: &SeriesRequest,
) -> Result<(f64, usize)> {
    let plan = plan_gauge(theta, req.eps, req.max_terms)?;
    let d_half: Vec<f64> = theta.d().iter().map(|&m| m as f64 / 2.0).collect();
    let sum = series_sum(&plan.psi, &d_half, plan.n);
    Ok((plan.shift.exp() * sum, plan.n))
}

/// Full-layout derivative vector `(d/dphi_i C)/C(0)` at the gauge of `theta`.
pub fn series_grad(theta: &MultiplicityTheta, eps: f64) -> Result<GVector> {
    series_grad_req(theta, &SeriesRequest::with_eps(eps))
}

pub fn series_grad_req(theta: &MultiplicityTheta, req: &SeriesRequest) -> Result<GVector> {
    let plan = plan_gauge(theta, req.eps, req.max_terms)?;
    let q = theta.q();
    let p = theta.p() as f64;
    let d_half: Vec<f64> = theta.d().iter().map(|&m| m as f64 / 2.0).collect();
    let gauge = plan.shift.exp();

    let mut values = Vec::with_capacity(q);
    for i in 0..q {
        let mut dh = d_half.clone();
        dh[i] += 1.0;
        let sum = series_sum(&plan.psi, &dh, plan.n);
        values.push(theta.d()[i] as f64 / p * gauge * sum);
    }
    let c = gauge * series_sum(&plan.psi, &d_half, plan.n);
    Ok(GVector::full_with_log_c(values, c.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonicalize;
    use approx::assert_relative_eq;

    #[test]
    fn bound_examples() {
        assert_eq!(truncation_bound(0.0, 1).unwrap(), 0.0);
        assert_relative_eq!(
            truncation_bound(1.0, 10).unwrap(),
            11.0 / 3628800.0 / 10.0,
            max_relative = 1e-12
        );
        assert!(truncation_bound(5.0, 3).is_err());
    }

    #[test]
    fn bound_monotone_in_n() {
        for &l1 in &[0.3f64, 1.0, 2.5] {
            let start = l1.floor() as usize + 1;
            for n in start..start + 40 {
                let b0 = truncation_bound(l1, n).unwrap();
                let b1 = truncation_bound(l1, n + 1).unwrap();
                assert!(b1 < b0, "bound not decreasing at l1={l1}, n={n}");
            }
        }
    }

    #[test]
    fn zero_parameter_is_one() {
        let mt = canonicalize(&[0.0, 0.0, 0.0], 0.0).unwrap();
        let (v, n) = series_norm_const(&mt, 1e-6).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(n, 1);
    }

    #[test]
    fn fully_degenerate_shift() {
        // C(c*1_p) = exp(c) C(0): the canonical part is exactly 1.
        let mt = canonicalize(&[0.7, 0.7, 0.7, 0.7], 0.0).unwrap();
        let (v, _) = series_norm_const(&mt, 1e-10).unwrap();
        assert_eq!(v, 1.0);
        assert_relative_eq!(
            crate::model::gauge_shift(v.ln(), mt.shift()),
            0.7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn table1_p5_value() {
        let mt = canonicalize(&[0.4, 0.3, 0.2, 0.1, 0.0], 0.0).unwrap();
        let (v, _) = series_norm_const(&mt, 1e-9).unwrap();
        let ungauged = v * mt.shift().exp();
        assert_relative_eq!(ungauged, 1.224897, epsilon = 1e-5);
    }

    #[test]
    fn table1_p3_tilde_vector() {
        let theta = [2.0 / 6.0, 1.0 / 6.0, 0.0];
        let mt = canonicalize(&theta, 0.0).unwrap();
        let (c, _) = series_norm_const(&mt, 1e-9).unwrap();
        let g = series_grad(&mt, 1e-9).unwrap();
        let f = mt.shift().exp();
        assert_relative_eq!(f * c, 1.185742, epsilon = 2e-6);
        assert_relative_eq!(f * g.values()[0], 0.421987, epsilon = 2e-6);
        assert_relative_eq!(f * g.values()[1], 0.394412, epsilon = 2e-6);
    }

    #[test]
    fn grad_at_zero_is_uniform() {
        let mt = canonicalize(&[0.0; 4], 0.0).unwrap();
        // q = 1, d = (4): single block with eta = 1
        let g = series_grad(&mt, 1e-10).unwrap();
        assert_eq!(g.values().len(), 1);
        assert_relative_eq!(g.values()[0], 1.0, epsilon = 1e-12);

        let mt = MultiplicityTheta::from_parts(
            vec![0.0, -1e-9, -2e-9, -3e-9],
            vec![1; 4],
            vec![0, 1, 2, 3],
            0.0,
        )
        .unwrap();
        let g = series_grad(&mt, 1e-12).unwrap();
        for v in g.values() {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-8);
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let d = vec![1, 1];
        let perm = vec![0, 1];
        let base = MultiplicityTheta::from_parts(vec![0.0, -0.3], d.clone(), perm.clone(), 0.0)
            .unwrap();
        let g = series_grad(&base, 1e-12).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut up = vec![0.0, -0.3];
            let mut dn = vec![0.0, -0.3];
            up[i] += h;
            dn[i] -= h;
            let cu = series_norm_const(
                &MultiplicityTheta::from_parts(up, d.clone(), perm.clone(), 0.0).unwrap(),
                1e-12,
            )
            .unwrap()
            .0;
            let cd = series_norm_const(
                &MultiplicityTheta::from_parts(dn, d.clone(), perm.clone(), 0.0).unwrap(),
                1e-12,
            )
            .unwrap()
            .0;
            let fd = (cu - cd) / (2.0 * h);
            assert_relative_eq!(g.values()[i], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn derivative_relation_with_multiplicities() {
        // d_i/(2 pi) * C(phi, d + 2 e_i) against finite differences of
        // C(phi, d), for a tied pattern; settles the printed-factor question.
        let phi = vec![0.0, -0.8];
        let d = vec![2, 3];
        let perm = vec![0, 1, 2, 3, 4];
        let base = MultiplicityTheta::from_parts(phi.clone(), d.clone(), perm.clone(), 0.0)
            .unwrap();
        let g = series_grad(&base, 1e-12).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut up = phi.clone();
            let mut dn = phi.clone();
            up[i] += h;
            dn[i] -= h;
            let cu = series_norm_const(
                &MultiplicityTheta::from_parts(up, d.clone(), perm.clone(), 0.0).unwrap(),
                1e-12,
            )
            .unwrap()
            .0;
            let cd = series_norm_const(
                &MultiplicityTheta::from_parts(dn, d.clone(), perm.clone(), 0.0).unwrap(),
                1e-12,
            )
            .unwrap()
            .0;
            let fd = (cu - cd) / (2.0 * h);
            assert_relative_eq!(g.values()[i], fd, epsilon = 1e-7, max_relative = 1e-6);
        }
    }

    #[test]
    fn sum_rule() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let p = rng.random_range(2..6);
            let theta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
            let mt = canonicalize(&theta, 0.0).unwrap();
            let eps = 1e-9;
            let (c, _) = series_norm_const(&mt, eps).unwrap();
            let g = series_grad(&mt, eps).unwrap();
            let total: f64 = g.values().iter().sum();
            assert!((total - c).abs() <= 2.0 * eps + 1e-12 * c.abs());
        }
    }

    #[test]
    fn bound_soundness_partial_sums() {
        // |C_N - C_{N+30}| <= bound(l1, N), partial sums standing in for the
        // limit; psi >= 0 so partial sums increase towards C.
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let q = rng.random_range(2..4usize);
            let mut psi: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..1.0)).collect();
            psi.sort_by(|a, b| b.partial_cmp(a).unwrap());
            psi[q - 1] = 0.0;
            let l1: f64 = psi.iter().sum();
            if l1 >= 2.0 || psi.windows(2).any(|w| w[0] <= w[1]) {
                continue;
            }
            let dh = vec![0.5; q];
            for n in (l1.floor() as usize + 1)..(l1.floor() as usize + 12) {
                let a = series_sum(&psi, &dh, n);
                let b = series_sum(&psi, &dh, n + 30);
                let bound = truncation_bound(l1, n).unwrap();
                assert!(
                    (b - a).abs() <= bound * 1.0000001 + 1e-300,
                    "bound violated: diff={} bound={}",
                    b - a,
                    bound
                );
            }
        }
    }

    #[test]
    fn large_q_falls_back_to_signed_gauge() {
        // 26 distinct values on a quadratic ramp: shifting the minimum to 0
        // inflates the l1 norm from 0.5 to ~0.97, whose truncation order
        // exceeds the term budget at this q; the signed max-at-0 gauge stays
        // inside it with a smaller order
        let q = 26usize;
        let total: f64 = (0..q).map(|i| (i * i) as f64).sum();
        let phi: Vec<f64> = (0..q).map(|i| -0.5 * (i * i) as f64 / total).collect();
        let mt =
            MultiplicityTheta::from_parts(phi, vec![1; q], (0..q).collect(), 0.0).unwrap();
        let (v, n) = series_norm_const(&mt, 1e-6).unwrap();
        assert!(n <= 9, "expected the signed gauge's truncation order, got {n}");
        let oracle = crate::oracles::contour_norm_const(&mt.expand()).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 3e-6);
    }

    #[test]
    fn budget_exhaustion_errors() {
        let phi: Vec<f64> = (0..10).map(|i| -10.0 * i as f64).collect();
        let mt = MultiplicityTheta::from_parts(phi, vec![1; 10], (0..10).collect(), 0.0).unwrap();
        match series_norm_const(&mt, 1e-6) {
            Err(Error::SeriesBudget { .. }) => {}
            other => panic!("expected SeriesBudget, got {other:?}"),
        }
    }
}
