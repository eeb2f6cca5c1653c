//! Independent reference evaluators: Monte Carlo on the sphere, and numerical
//! inversion of the one-dimensional integral representation
//!
//! ```text
//! C(theta)/C(0) = Gamma(p/2) (2 pi)^{-1}
//!     \int prod_k (-theta_k - t0 - i s)^{-1/2} e^{-t0 - i s} ds
//! ```
//!
//! valid for any `t0 < min_k(-theta_k)` by analytic continuation. The
//! `Gamma(p/2)` prefactor falls out of writing `C` through the density of a
//! weighted chi-square sum at 1 (it is invisible at p = 4, the one case easy
//! to check by hand). Neither evaluator touches the Pfaffian machinery,
//! which is the point.
//!
//! The inversion integrand decays only like `|s|^{-p/2}`, far too slowly to
//! truncate on the absolute bound alone at p = 3. The oscillation rescues it:
//! integrating `g(s) e^{-is}` by parts three times yields boundary terms at
//! the truncation point in `g, g', g''` (closed forms below) and leaves a
//! remainder of order `S^{-p/2-3}`, whose absolute integral sets the
//! truncation point.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::approx::spa1_log;
use crate::error::{Error, Result};
use crate::model::uniform_mass;

/// Monte Carlo estimate of `C(theta)/C(0)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

const MC_CHUNK: usize = 1 << 16;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean of `exp(sum theta_i x_i^2)` over uniform draws on the sphere.
///
/// Samples are normalized standard normals, generated in fixed-size chunks
/// with one substream per chunk, so the result is reproducible for a given
/// seed regardless of thread count.
pub fn mc_norm_const(theta: &[f64], n: usize, seed: u64) -> McEstimate {
    assert!(n >= 1 && !theta.is_empty());
    let chunks = n.div_ceil(MC_CHUNK);
    let base = splitmix64(seed);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(base ^ (c as u64)));
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                let (mut r2, mut td) = (0.0, 0.0);
                while r2 == 0.0 {
                    r2 = 0.0;
                    td = 0.0;
                    for &th in theta {
                        let g: f64 = rng.sample(StandardNormal);
                        let g2 = g * g;
                        r2 += g2;
                        td += th * g2;
                    }
                }
                let w = (td / r2).exp();
                sum += w;
                sumsq += w * w;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        n,
        seed,
    }
}

// 15-point Kronrod rule with embedded 7-point Gauss (QUADPACK dqk15).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Kronrod value, error estimate and the integral of |f| (the noise scale).
fn gk15<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut ik = fc * WGK[7];
    let mut ig = fc * WG[3];
    let mut mag = fc.norm() * WGK[7];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        ik += (f1 + f2) * WGK[j];
        mag += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            ig += (f1 + f2) * WG[j / 2];
        }
    }
    ik *= h;
    ig *= h;
    (ik, (ik - ig).norm(), mag * h)
}

const MAX_PANELS: usize = 400_000;

fn adaptive_gk<F: Fn(f64) -> Complex64>(
    f: &F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    // pre-split to about a third of the e^{-is} period per panel
    let n0 = (((hi - lo) / 2.0).ceil() as usize).max(1);
    let width = (hi - lo) / n0 as f64;
    let mut stack: Vec<(f64, f64, f64)> = (0..n0)
        .map(|k| {
            let a = lo + k as f64 * width;
            (a, a + width, abs_tol / n0 as f64)
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut panels = 0usize;
    while let Some((a, b, tol)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::QuadratureBudget {
                max_panels: MAX_PANELS,
            });
        }
        let (val, err, mag) = gk15(f, a, b);
        // the 1e-14 * mag floor is where rounding noise stops refinement
        if err <= tol.max(1e-14 * mag) || b - a < 1e-12 {
            total += val;
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m, tol * 0.5));
            stack.push((m, b, tol * 0.5));
        }
    }
    Ok(total)
}

/// `C(theta)/C(0)` by quadrature of the inversion integral along a vertical
/// line through the saddle point of the integrand. Requires p >= 3.
///
/// The result is the same on any admissible line (analytic continuation;
/// see [`contour_norm_const_with_offset`]), but only near the saddle does
/// the main lobe integrate without oscillatory cancellation -- on the line
/// one unit below the branch point the true value is smaller than the
/// integrand magnitude by about `Gamma(p/2)`, which f64 cannot cancel
/// through once p grows past a dozen.
pub fn contour_norm_const(theta: &[f64]) -> Result<f64> {
    let p = theta.len();
    if p < 3 {
        return Err(Error::ContourDimension { p });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "theta" });
    }
    let cmax = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let phi: Vec<f64> = theta.iter().map(|t| t - cmax).collect();
    let offset = -crate::approx::solve_saddle(&phi, 2.0);
    contour_norm_const_with_offset(theta, offset)
}

/// As [`contour_norm_const`] with `t0 = min_k(-theta_k) - offset`; the result
/// is offset-independent (analytic continuation), which the tests exercise.
pub fn contour_norm_const_with_offset(theta: &[f64], offset: f64) -> Result<f64> {
    let p = theta.len();
    if p < 3 {
        return Err(Error::ContourDimension { p });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "theta" });
    }
    if !(offset > 0.0) || !offset.is_finite() {
        return Err(Error::InvalidTolerance {
            what: "offset",
            value: offset,
        });
    }
    // work at phi = theta - max(theta), restore exp(max) at the end
    let cmax = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let phi: Vec<f64> = theta.iter().map(|t| t - cmax).collect();
    // a_k = -phi_k - t0 >= offset with t0 = -offset
    let a: Vec<f64> = phi.iter().map(|f| offset - f).collect();

    // absolute tolerance scaled by a cheap estimate of the answer
    let est = (spa1_log(&phi)? - uniform_mass(p)?.ln_value).exp();
    let tol = (est * 1e-9).max(1e-14);
    let gamma_half = crate::special::gamma(p as f64 / 2.0);

    let pf = p as f64;
    let c3 = pf * pf * pf / 8.0 + 0.75 * pf * pf + pf;
    let e_t0 = offset.exp();
    let s_max = (gamma_half * e_t0 * c3 / (std::f64::consts::PI * (0.5 * pf + 2.0) * tol))
        .powf(2.0 / (pf + 4.0));
    if !(s_max <= 1e7) {
        return Err(Error::ContourBudget { s: s_max, cap: 1e7 });
    }

    let g = |s: f64| -> Complex64 {
        let mut ln_sum = Complex64::new(0.0, 0.0);
        for &ak in &a {
            ln_sum += Complex64::new(ak, -s).ln();
        }
        (ln_sum * -0.5 + offset).exp()
    };
    let integrand = |s: f64| g(s) * Complex64::new(0.0, -s).exp();

    let two_pi = 2.0 * std::f64::consts::PI;
    let j_mid = adaptive_gk(&integrand, -s_max, s_max, tol * two_pi / gamma_half)?;

    // boundary terms of three rounds of integration by parts at +S; the -S
    // side is the conjugate. With sigma_m = sum z_k^{-m}, z_k = a_k - i s:
    //   g'  = g * (i/2) sigma_1
    //   g'' = g * (-sigma_1^2/4 - sigma_2/2)
    let z: Vec<Complex64> = a.iter().map(|&ak| Complex64::new(ak, -s_max)).collect();
    let sigma1: Complex64 = z.iter().map(|zk| zk.inv()).sum();
    let sigma2: Complex64 = z.iter().map(|zk| (zk * zk).inv()).sum();
    let gs = g(s_max);
    let gp = gs * Complex64::new(0.0, 0.5) * sigma1;
    let gpp = gs * (sigma1 * sigma1 * (-0.25) - sigma2 * 0.5);
    let i = Complex64::new(0.0, 1.0);
    let b_up = Complex64::new(0.0, -s_max).exp() * (-i * gs - gp + i * gpp);

    let j = j_mid + b_up + b_up.conj();
    let val = gamma_half * j.re / two_pi;
    let im = gamma_half * j.im / two_pi;
    if im.abs() > 1e-9 * val.abs().max(1.0) {
        return Err(Error::ContourImaginary { im });
    }
    Ok(cmax.exp() * val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mc_constant_integrand() {
        let est = mc_norm_const(&[0.0, 0.0, 0.0], 10_000, 1);
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mc_diagonal_shift() {
        let c = 1.3;
        let est = mc_norm_const(&[c, c, c, c], 10_000, 7);
        assert_relative_eq!(est.mean, c.exp(), max_relative = 1e-12);
        assert!(est.stderr < 1e-12 * est.mean);
    }

    #[test]
    fn mc_deterministic_per_seed() {
        let a = mc_norm_const(&[0.5, -0.5, 0.0], 200_000, 42);
        let b = mc_norm_const(&[0.5, -0.5, 0.0], 200_000, 42);
        assert_eq!(a, b);
        let c = mc_norm_const(&[0.5, -0.5, 0.0], 200_000, 43);
        assert!(a.mean != c.mean);
    }

    #[test]
    fn mc_matches_table_value() {
        let est = mc_norm_const(&[0.4, 0.3, 0.2, 0.1, 0.0], 2_000_000, 5);
        assert!(
            (est.mean - 1.224897).abs() < 3.0 * est.stderr,
            "mean {} +- {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn contour_rejects_low_dimension() {
        assert!(matches!(
            contour_norm_const(&[1.0, 0.0]),
            Err(Error::ContourDimension { p: 2 })
        ));
    }

    #[test]
    fn contour_diagonal_closed_form() {
        for &c in &[0.0, 0.8, -1.2] {
            let v = contour_norm_const(&[c; 4]).unwrap();
            assert_relative_eq!(v, c.exp(), max_relative = 1e-8);
        }
    }

    #[test]
    fn contour_table2_value() {
        let v = contour_norm_const(&[4.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(v, 9.769432, max_relative = 1e-5);
    }

    #[test]
    fn contour_offset_invariance() {
        let theta = [0.0, -1.0, -2.0, -5.0];
        let v1 = contour_norm_const_with_offset(&theta, 1.0).unwrap();
        let v2 = contour_norm_const_with_offset(&theta, 2.0).unwrap();
        assert_relative_eq!(v1, v2, epsilon = 1e-8, max_relative = 1e-8);
    }

    #[test]
    fn contour_agrees_with_hg() {
        let theta = [0.0, -1.0, -2.0, -5.0];
        let v = contour_norm_const(&theta).unwrap();
        let (log_c, _) = crate::hg::hg_norm_const(&theta, 1e-10, &Default::default()).unwrap();
        assert_relative_eq!(v, log_c.exp(), max_relative = 1e-6);
    }
}
