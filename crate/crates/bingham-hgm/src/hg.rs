//! The HG algorithm: propagate the derivative vector along parameter-space
//! segments by integrating the pulled-back Pfaffian ODE
//!
//! ```text
//! dG/dtau = sum_i (dphi_i/dtau) P_i(phi(tau)) G,   phi(tau) = (1-tau) phi0 + tau phi1
//! ```
//!
//! in linear (full or reduced) or logarithmic form, plus the end-to-end
//! normalizing-constant evaluation: series initialization near the origin,
//! propagation out to the target, gauge restored at the end.
//!
//! The logarithmic form co-evolves `log C` by `d log C / dtau = v . G^L` and
//! keeps the state bounded on the simplex, which is what survives parameters
//! with constants up to e^700 and beyond.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{canonicalize, GVector, Layout, MultiplicityTheta};
use crate::ode::{integrate_observed, OdeControl, OdeStats};
use crate::pfaffian::{add_full, add_reduced, check_gaps};
use crate::series::{series_grad, series_order};

/// Below this l1 norm of the distinct values the series is evaluated directly.
pub const SERIES_ONLY_L1: f64 = 1.0;
/// Above this l1 norm propagation switches to the logarithmic system.
pub const LOG_FORM_L1: f64 = 20.0;

/// Affine segment between two parameters sharing multiplicity pattern and
/// coordinate order; strict ordering at both endpoints rules out crossings
/// along the segment.
#[derive(Debug, Clone)]
pub struct PathSegment {
    start: MultiplicityTheta,
    end: MultiplicityTheta,
}

impl PathSegment {
    pub fn new(start: MultiplicityTheta, end: MultiplicityTheta) -> Result<Self> {
        if start.d() != end.d() || start.perm() != end.perm() {
            return Err(Error::SegmentMismatch);
        }
        check_gaps(start.phi())?;
        check_gaps(end.phi())?;
        Ok(PathSegment { start, end })
    }

    pub fn start(&self) -> &MultiplicityTheta {
        &self.start
    }

    pub fn end(&self) -> &MultiplicityTheta {
        &self.end
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.end
            .phi()
            .iter()
            .zip(self.start.phi())
            .map(|(e, s)| e - s)
            .collect()
    }

    pub fn phi_at(&self, tau: f64) -> Vec<f64> {
        self.start
            .phi()
            .iter()
            .zip(self.end.phi())
            .map(|(s, e)| (1.0 - tau) * s + tau * e)
            .collect()
    }
}

fn propagate_stats(
    g0: &GVector,
    seg: &PathSegment,
    ctl: &OdeControl,
) -> Result<(GVector, OdeStats)> {
    let q = seg.start.q();
    if g0.len() != q {
        return Err(Error::SegmentMismatch);
    }
    let v = seg.velocity();
    if v.iter().all(|&x| x == 0.0) {
        return Ok((g0.clone(), OdeStats::default()));
    }
    let d: Vec<f64> = seg.start.d().iter().map(|&m| m as f64).collect();
    let reduced = match g0.layout() {
        Layout::Full => false,
        Layout::Reduced => {
            if seg.start.phi()[q - 1] != 0.0 || seg.end.phi()[q - 1] != 0.0 {
                return Err(Error::ReducedGauge);
            }
            true
        }
        Layout::Log => {
            return Err(Error::LayoutMismatch {
                expected: "full or reduced",
                got: "log",
            })
        }
    };

    let mut a = Mat::zeros(q, q);
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let phi = seg.phi_at(tau);
        check_gaps(&phi)?;
        a = Mat::zeros(q, q);
        for (i, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if reduced {
                add_reduced(&mut a, &phi, &d, i, w);
            } else {
                add_full(&mut a, &phi, &d, i, w);
            }
        }
        dy.fill(0.0);
        a.matvec_acc(y, 1.0, dy);
        Ok(())
    };
    let (y, stats) = integrate_observed(rhs, 0.0, 1.0, g0.values(), ctl, |_, _| Ok(()))?;
    let g = match g0.layout() {
        Layout::Full => GVector::full(y),
        Layout::Reduced => GVector::reduced(y),
        Layout::Log => unreachable!(),
    };
    Ok((g, stats))
}

/// Propagate a full- or reduced-layout vector along `seg`.
pub fn propagate(g0: &GVector, seg: &PathSegment, ctl: &OdeControl) -> Result<GVector> {
    propagate_stats(g0, seg, ctl).map(|(g, _)| g)
}

fn propagate_log_stats<O>(
    gl0: &GVector,
    seg: &PathSegment,
    ctl: &OdeControl,
    mut observe: O,
) -> Result<(GVector, OdeStats)>
where
    O: FnMut(f64, &[f64], f64) -> Result<()>,
{
    if gl0.layout() != Layout::Log {
        return Err(Error::LayoutMismatch {
            expected: "log",
            got: gl0.layout().name(),
        });
    }
    let q = seg.start.q();
    if gl0.len() != q {
        return Err(Error::SegmentMismatch);
    }
    let sum: f64 = gl0.values().iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::SimplexViolation { sum });
    }
    let v = seg.velocity();
    if v.iter().all(|&x| x == 0.0) {
        return Ok((gl0.clone(), OdeStats::default()));
    }
    let d: Vec<f64> = seg.start.d().iter().map(|&m| m as f64).collect();

    let mut state = gl0.values().to_vec();
    state.push(gl0.log_c());
    let mut a = Mat::zeros(q, q);
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let phi = seg.phi_at(tau);
        check_gaps(&phi)?;
        a = Mat::zeros(q, q);
        for (i, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            add_full(&mut a, &phi, &d, i, w);
        }
        let gl = &y[..q];
        dy.fill(0.0);
        a.matvec_acc(gl, 1.0, &mut dy[..q]);
        let dot: f64 = v.iter().zip(gl).map(|(w, g)| w * g).sum();
        for (dj, gj) in dy[..q].iter_mut().zip(gl) {
            *dj -= dot * gj;
        }
        dy[q] = dot;
        Ok(())
    };
    let (y, stats) = integrate_observed(rhs, 0.0, 1.0, &state, ctl, |tau, y| {
        observe(tau, &y[..q], y[q])
    })?;
    let log_c = y[q];
    let values = y[..q].to_vec();
    Ok((GVector::log(values, log_c), stats))
}

/// Propagate the logarithmic vector (and its log-constant) along `seg`.
pub fn propagate_log(gl0: &GVector, seg: &PathSegment, ctl: &OdeControl) -> Result<GVector> {
    propagate_log_stats(gl0, seg, ctl, |_, _, _| Ok(())).map(|(g, _)| g)
}

/// As [`propagate_log`], calling `observe(tau, gl, log_c)` after each
/// accepted step; used for trajectory dumps and conservation checks.
pub fn propagate_log_observed<O>(
    gl0: &GVector,
    seg: &PathSegment,
    ctl: &OdeControl,
    observe: O,
) -> Result<GVector>
where
    O: FnMut(f64, &[f64], f64) -> Result<()>,
{
    propagate_log_stats(gl0, seg, ctl, observe).map(|(g, _)| g)
}

/// Diagnostics from an end-to-end evaluation.
#[derive(Debug, Clone)]
pub struct HgReport {
    /// ln(C(theta)/C(0)) at the user's parameter.
    pub log_c_over_c0: f64,
    /// Logarithmic vector at theta; `log_c` equals `log_c_over_c0`.
    pub gl: GVector,
    pub theta: MultiplicityTheta,
    /// Truncation order of the series stage.
    pub series_n: usize,
    /// Accepted ODE steps (0 when the series sufficed).
    pub ode_steps: usize,
    /// Seed parameter of the propagation stage, if one ran.
    pub seed_phi: Option<Vec<f64>>,
    pub used_log_form: bool,
}

pub(crate) struct CanonicalEval {
    pub gl: GVector,
    pub series_n: usize,
    pub ode_steps: usize,
    pub seed_phi: Option<Vec<f64>>,
    pub used_log_form: bool,
}

pub(crate) fn norm_const_canonical(
    mt: &MultiplicityTheta,
    eps: f64,
    ctl: &OdeControl,
) -> Result<CanonicalEval> {
    let l1 = mt.phi_l1();
    if l1 <= SERIES_ONLY_L1 {
        let n = series_order(mt, eps)?;
        let g = series_grad(mt, eps)?;
        return Ok(CanonicalEval {
            gl: g.to_log()?,
            series_n: n,
            ode_steps: 0,
            seed_phi: None,
            used_log_form: false,
        });
    }
    let seed = mt.scaled(1.0 / (2.0 * l1))?;
    let n = series_order(&seed, eps)?;
    let g0 = series_grad(&seed, eps)?;
    let seg = PathSegment::new(seed.clone(), mt.clone())?;
    let log_form = l1 > LOG_FORM_L1;
    let (gl, stats) = if log_form {
        propagate_log_stats(&g0.to_log()?, &seg, ctl, |_, _, _| Ok(()))?
    } else {
        let (g1, stats) = propagate_stats(&g0, &seg, ctl)?;
        (g1.to_log()?, stats)
    };
    Ok(CanonicalEval {
        gl,
        series_n: n,
        ode_steps: stats.steps,
        seed_phi: Some(seed.phi().to_vec()),
        used_log_form: log_form,
    })
}

/// Normalizing constant of the Bingham distribution at a raw parameter
/// vector: returns `ln(C(theta)/C(0))` and the logarithmic derivative vector
/// (the expectation parameter) at theta.
pub fn hg_norm_const(theta: &[f64], eps: f64, ctl: &OdeControl) -> Result<(f64, GVector)> {
    let r = hg_norm_const_report(theta, eps, ctl)?;
    Ok((r.log_c_over_c0, r.gl))
}

/// As [`hg_norm_const`] with diagnostics.
pub fn hg_norm_const_report(theta: &[f64], eps: f64, ctl: &OdeControl) -> Result<HgReport> {
    let mt = canonicalize(theta, 0.0)?;
    let eval = norm_const_canonical(&mt, eps, ctl)?;
    let log_c = eval.gl.log_c() + mt.shift();
    Ok(HgReport {
        log_c_over_c0: log_c,
        gl: eval.gl.with_log_c(log_c),
        theta: mt,
        series_n: eval.series_n,
        ode_steps: eval.ode_steps,
        seed_phi: eval.seed_phi,
        used_log_form: eval.used_log_form,
    })
}
