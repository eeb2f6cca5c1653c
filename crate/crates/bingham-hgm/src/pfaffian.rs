//! Pfaffian matrices of the Bingham normalizing constant.
//!
//! For distinct values `phi_1 > ... > phi_q` with multiplicities `d`, the
//! derivative vector `G = (d/dphi_1 C, ..., d/dphi_q C)` satisfies
//! `d/dphi_i G = P_i(phi) G` with
//!
//! ```text
//! d/dphi_i G_j = (d_j G_i - d_i G_j) / (2 (phi_i - phi_j))      (j != i)
//! d/dphi_i G_i = G_i - sum_{k != i} (d_k G_i - d_i G_k) / (2 (phi_i - phi_k))
//! ```
//!
//! which specializes to the generic all-distinct system at d = 1. The reduced
//! (tilde) system acts on `(C, d/dphi_1 C, ..., d/dphi_{q-1} C)` in the gauge
//! `phi_q = 0` and is obtained from the relations above by eliminating
//! `G_q = C - sum_{j<q} G_j`. The logarithmic field for `G^L = G/C` is
//! `d/dphi_i G^L_j = (P_i G^L)_j - G^L_i G^L_j`.
//!
//! Every column of the full-layout `P_i` sums to the i-th unit vector, a
//! consequence of `sum_j d/dphi_j C = C`; the tests lean on this.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{GVector, Layout, MultiplicityTheta};

/// Gap below which the rational coefficients are treated as singular.
pub const MIN_GAP: f64 = 1e-10;

pub(crate) fn check_gaps(phi: &[f64]) -> Result<()> {
    if let Some(gap) = phi.windows(2).map(|w| w[0] - w[1]).reduce(f64::min) {
        if !(gap > MIN_GAP) {
            return Err(Error::PfaffianGap { gap });
        }
    }
    Ok(())
}

/// Accumulate `w * P_i(phi)` (full layout) into `a`.
pub(crate) fn add_full(a: &mut Mat, phi: &[f64], d: &[f64], i: usize, w: f64) {
    let q = phi.len();
    let mut diag = 1.0;
    for j in 0..q {
        if j == i {
            continue;
        }
        let inv = 1.0 / (2.0 * (phi[i] - phi[j]));
        a[(j, i)] += w * d[j] * inv;
        a[(j, j)] -= w * d[i] * inv;
        a[(i, j)] += w * d[i] * inv;
        diag -= d[j] * inv;
    }
    a[(i, i)] += w * diag;
}

/// Accumulate `w * P~_i(phi)` (reduced layout, phi_q = 0) into `a`.
///
/// The tilde vector is `(C, G_1, ..., G_{q-1})`; `i` ranges over the free
/// axes `0..q-1`.
pub(crate) fn add_reduced(a: &mut Mat, phi: &[f64], d: &[f64], i: usize, w: f64) {
    let q = phi.len();
    a[(0, i + 1)] += w;
    let mut diag = 1.0;
    for j in 0..q - 1 {
        if j == i {
            continue;
        }
        let inv = 1.0 / (2.0 * (phi[i] - phi[j]));
        a[(j + 1, i + 1)] += w * d[j] * inv;
        a[(j + 1, j + 1)] -= w * d[i] * inv;
        a[(i + 1, j + 1)] += w * d[i] * inv;
        diag -= d[j] * inv;
    }
    // eliminated block at phi_q = 0 via G_q = G~_1 - sum_l G~_{l+1}
    let inv0 = 1.0 / (2.0 * phi[i]);
    diag -= d[q - 1] * inv0;
    a[(i + 1, 0)] += w * d[i] * inv0;
    for l in 0..q - 1 {
        a[(i + 1, l + 1)] -= w * d[i] * inv0;
    }
    a[(i + 1, i + 1)] += w * diag;
}

fn d_as_f64(theta: &MultiplicityTheta) -> Vec<f64> {
    theta.d().iter().map(|&m| m as f64).collect()
}

/// Evaluator of the Pfaffian matrices for a fixed multiplicity pattern,
/// usable at any admissible point without rebuilding a full parameter value.
#[derive(Debug, Clone)]
pub struct PfaffianSystem {
    d: Vec<f64>,
    layout: Layout,
}

impl PfaffianSystem {
    pub fn new(d: &[usize], layout: Layout) -> Result<Self> {
        if d.is_empty() || d.contains(&0) {
            return Err(Error::SegmentMismatch);
        }
        if layout == Layout::Log {
            return Err(Error::LayoutMismatch {
                expected: "full or reduced",
                got: "log",
            });
        }
        Ok(PfaffianSystem {
            d: d.iter().map(|&m| m as f64).collect(),
            layout,
        })
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// The coefficient matrix along axis `i` at distinct values `phi`
    /// (strictly decreasing; reduced layout additionally wants the last
    /// value pinned at exactly 0 and `i < q - 1`).
    pub fn matrix(&self, i: usize, phi: &[f64]) -> Result<Mat> {
        let q = self.q();
        if phi.len() != q {
            return Err(Error::SegmentMismatch);
        }
        if phi.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::SegmentMismatch);
        }
        check_gaps(phi)?;
        let mut a = Mat::zeros(q, q);
        match self.layout {
            Layout::Full => {
                if i >= q {
                    return Err(Error::IndexOutOfRange { index: i, q });
                }
                add_full(&mut a, phi, &self.d, i, 1.0);
            }
            Layout::Reduced => {
                if q == 1 {
                    return Err(Error::ReducedSingleBlock);
                }
                if phi[q - 1] != 0.0 {
                    return Err(Error::ReducedGauge);
                }
                if i >= q - 1 {
                    return Err(Error::IndexOutOfRange { index: i, q });
                }
                add_reduced(&mut a, phi, &self.d, i, 1.0);
            }
            Layout::Log => unreachable!(),
        }
        Ok(a)
    }
}

/// The q x q matrix `P_i(phi)` acting on the full-layout vector.
pub fn pfaffian_matrix(i: usize, theta: &MultiplicityTheta) -> Result<Mat> {
    let q = theta.q();
    if i >= q {
        return Err(Error::IndexOutOfRange { index: i, q });
    }
    check_gaps(theta.phi())?;
    let mut a = Mat::zeros(q, q);
    add_full(&mut a, theta.phi(), &d_as_f64(theta), i, 1.0);
    Ok(a)
}

/// The q x q matrix of the reduced (tilde) system for axis `i < q - 1`.
/// Requires the smallest distinct value gauged to exactly 0.
pub fn reduced_pfaffian_matrix(i: usize, theta: &MultiplicityTheta) -> Result<Mat> {
    let q = theta.q();
    if q == 1 {
        return Err(Error::ReducedSingleBlock);
    }
    if theta.phi()[q - 1] != 0.0 {
        return Err(Error::ReducedGauge);
    }
    if i >= q - 1 {
        return Err(Error::IndexOutOfRange { index: i, q });
    }
    check_gaps(theta.phi())?;
    let mut a = Mat::zeros(q, q);
    add_reduced(&mut a, theta.phi(), &d_as_f64(theta), i, 1.0);
    Ok(a)
}

/// Right-hand side of the logarithmic system along axis `i`:
/// `(P_i G^L)_j - G^L_i G^L_j`.
pub fn log_vector_field(i: usize, theta: &MultiplicityTheta, gl: &GVector) -> Result<Vec<f64>> {
    if gl.layout() != Layout::Log {
        return Err(Error::LayoutMismatch {
            expected: "log",
            got: gl.layout().name(),
        });
    }
    if gl.len() != theta.q() {
        return Err(Error::SegmentMismatch);
    }
    let p = pfaffian_matrix(i, theta)?;
    let pg = p.matvec(gl.values());
    let gi = gl.values()[i];
    Ok(pg
        .iter()
        .zip(gl.values())
        .map(|(w, g)| w - gi * g)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonicalize;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn theta(phi: &[f64], d: &[usize]) -> MultiplicityTheta {
        let p: usize = d.iter().sum();
        MultiplicityTheta::from_parts(phi.to_vec(), d.to_vec(), (0..p).collect(), 0.0).unwrap()
    }

    #[test]
    fn generic_two_by_two() {
        let t = theta(&[1.0, 0.0], &[1, 1]);
        let p1 = pfaffian_matrix(0, &t).unwrap();
        assert_relative_eq!(p1[(0, 0)], 0.5);
        assert_relative_eq!(p1[(0, 1)], 0.5);
        assert_relative_eq!(p1[(1, 0)], 0.5);
        assert_relative_eq!(p1[(1, 1)], -0.5);
        let sums = p1.column_sums();
        assert_relative_eq!(sums[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(sums[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_row() {
        let t = theta(&[0.0, -1.0], &[2, 2]);
        let p1 = pfaffian_matrix(0, &t).unwrap();
        assert_relative_eq!(p1[(1, 0)], 1.0);
        assert_relative_eq!(p1[(1, 1)], -1.0);
    }

    /// Direct transcription of the all-distinct equations, kept independent
    /// of the production assembly.
    fn generic_matrix(phi: &[f64], i: usize) -> Mat {
        let p = phi.len();
        let mut m = Mat::zeros(p, p);
        for j in 0..p {
            if j == i {
                continue;
            }
            let c = 1.0 / (2.0 * (phi[i] - phi[j]));
            m[(j, i)] += c;
            m[(j, j)] -= c;
        }
        let mut diag = 1.0;
        for k in 0..p {
            if k == i {
                continue;
            }
            let c = 1.0 / (2.0 * (phi[i] - phi[k]));
            diag -= c;
            m[(i, k)] += c;
        }
        m[(i, i)] = diag;
        m
    }

    #[test]
    fn multiplicity_one_specializes_to_generic() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let p = rng.random_range(2..6);
            let mut phi: Vec<f64> = (0..p).map(|_| rng.random_range(-4.0..4.0)).collect();
            phi.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if phi.windows(2).any(|w| w[0] - w[1] < 0.05) {
                continue;
            }
            let t = theta(&phi, &vec![1; p]);
            for i in 0..p {
                let a = pfaffian_matrix(i, &t).unwrap();
                let b = generic_matrix(&phi, i);
                for r in 0..p {
                    for c in 0..p {
                        assert_relative_eq!(a[(r, c)], b[(r, c)], epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn column_sum_law_random() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..1000 {
            let q = rng.random_range(1..=6usize);
            let mut phi: Vec<f64> = (0..q).map(|_| rng.random_range(-5.0..5.0)).collect();
            phi.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if phi.windows(2).any(|w| w[0] - w[1] < 0.02) {
                continue;
            }
            let mut d: Vec<usize> = (0..q).map(|_| rng.random_range(1..4)).collect();
            if d.iter().sum::<usize>() < 2 {
                d[0] = 2;
            }
            let t = theta(&phi, &d);
            for i in 0..q {
                let m = pfaffian_matrix(i, &t).unwrap();
                let sums = m.column_sums();
                for (j, s) in sums.iter().enumerate() {
                    let expect = if j == i { 1.0 } else { 0.0 };
                    assert!(
                        (s - expect).abs() < 1e-12,
                        "column sum law broken: q={q} i={i} j={j} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn reduced_first_row_is_shift() {
        let t = theta(&[0.7, 0.0], &[1, 1]);
        let m = reduced_pfaffian_matrix(0, &t).unwrap();
        assert_relative_eq!(m[(0, 0)], 0.0);
        assert_relative_eq!(m[(0, 1)], 1.0);
    }

    #[test]
    fn reduced_embeds_in_full() {
        // P~_i G~ must list (d/dphi_i C, d/dphi_i G_1, ...) for the embedding
        // G~ = (sum G, G_1, ..., G_{q-1}); linearity makes random G a full check.
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..100 {
            let q = rng.random_range(2..6usize);
            let mut phi: Vec<f64> = (0..q - 1).map(|_| rng.random_range(0.1..5.0)).collect();
            phi.push(0.0);
            phi.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if phi.windows(2).any(|w| w[0] - w[1] < 0.05) {
                continue;
            }
            let d: Vec<usize> = (0..q).map(|_| rng.random_range(1..4)).collect();
            let t = theta(&phi, &d);
            let g: Vec<f64> = (0..q).map(|_| rng.random_range(0.1..2.0)).collect();
            let mut tilde = vec![g.iter().sum::<f64>()];
            tilde.extend_from_slice(&g[..q - 1]);

            for i in 0..q - 1 {
                let full = pfaffian_matrix(i, &t).unwrap();
                let red = reduced_pfaffian_matrix(i, &t).unwrap();
                let dg = full.matvec(&g);
                let dtilde = red.matvec(&tilde);
                assert_relative_eq!(dtilde[0], g[i], max_relative = 1e-11, epsilon = 1e-11);
                for j in 0..q - 1 {
                    assert_relative_eq!(
                        dtilde[j + 1],
                        dg[j],
                        max_relative = 1e-10,
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn reduced_requires_zero_gauge() {
        let t = theta(&[1.0, 0.5], &[1, 1]);
        assert!(matches!(
            reduced_pfaffian_matrix(0, &t),
            Err(Error::ReducedGauge)
        ));
        let t1 = canonicalize(&[2.0, 2.0], 0.0).unwrap();
        assert!(matches!(
            reduced_pfaffian_matrix(0, &t1),
            Err(Error::ReducedSingleBlock)
        ));
    }

    #[test]
    fn reduced_finite_on_figure_path_start() {
        let t = canonicalize(&[0.4, 0.1, 0.0], 0.0).unwrap().with_min_zero();
        assert_eq!(t.phi()[2], 0.0);
        let g = crate::series::series_grad(&t, 1e-10).unwrap();
        let tilde = g.to_reduced(0.0).unwrap();
        for i in 0..2 {
            let m = reduced_pfaffian_matrix(i, &t).unwrap();
            let dv = m.matvec(tilde.values());
            assert!(dv.iter().all(|v| v.is_finite()));
            // d/dphi_i G~_1 = G~_{i+1}
            assert_relative_eq!(dv[0], tilde.values()[i + 1], max_relative = 1e-12);
        }
    }

    #[test]
    fn log_field_example() {
        let t = theta(&[1.0, 0.0], &[1, 1]);
        let gl = GVector::log(vec![0.5, 0.5], 0.0);
        let out = log_vector_field(0, &t, &gl).unwrap();
        assert_relative_eq!(out[0], 0.25);
        assert_relative_eq!(out[1], -0.25);
    }

    #[test]
    fn log_field_sums_to_zero() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let q = rng.random_range(2..6usize);
            let mut phi: Vec<f64> = (0..q).map(|_| rng.random_range(-5.0..5.0)).collect();
            phi.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if phi.windows(2).any(|w| w[0] - w[1] < 0.05) {
                continue;
            }
            let d: Vec<usize> = (0..q).map(|_| rng.random_range(1..3)).collect();
            let t = theta(&phi, &d);
            let mut v: Vec<f64> = (0..q).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= total);
            let gl = GVector::log(v, 0.0);
            for i in 0..q {
                let out = log_vector_field(i, &t, &gl).unwrap();
                assert!(out.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn system_evaluator_matches_free_functions() {
        let phi = [0.8, 0.0];
        let t = theta(&phi, &[2, 3]);
        let full = PfaffianSystem::new(&[2, 3], Layout::Full).unwrap();
        let red = PfaffianSystem::new(&[2, 3], Layout::Reduced).unwrap();
        for i in 0..2 {
            assert_eq!(full.matrix(i, &phi).unwrap(), pfaffian_matrix(i, &t).unwrap());
        }
        assert_eq!(
            red.matrix(0, &phi).unwrap(),
            reduced_pfaffian_matrix(0, &t).unwrap()
        );
        assert!(PfaffianSystem::new(&[1, 0], Layout::Full).is_err());
        assert!(PfaffianSystem::new(&[1, 1], Layout::Log).is_err());
        assert!(red.matrix(0, &[0.8, 0.1]).is_err());
    }

    #[test]
    fn gap_guard_triggers() {
        let t = MultiplicityTheta::from_parts(
            vec![0.0, -1e-12],
            vec![1, 1],
            vec![0, 1],
            0.0,
        )
        .unwrap();
        assert!(matches!(
            pfaffian_matrix(0, &t),
            Err(Error::PfaffianGap { .. })
        ));
    }
}
