//! Canonical parameter representation and gauge identities.
//!
//! The Bingham density on the sphere depends on its parameter vector only
//! through the multiset of entries, and only up to a common additive constant:
//! `C(theta + c*1) = exp(c) * C(theta)`. [`canonicalize`] reduces a raw vector
//! to distinct values with multiplicities, sorted strictly decreasing, with
//! the largest value gauged to 0. The permutation and gauge shift are recorded
//! so the user's vector can be reconstructed exactly.

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Canonical Bingham parameter: distinct values with multiplicities.
///
/// Invariants: `phi` is strictly decreasing, all multiplicities are >= 1 and
/// sum to `p`. For values produced by [`canonicalize`], `phi[0] == 0` and the
/// original vector is `expand()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityTheta {
    phi: Vec<f64>,
    d: Vec<usize>,
    /// Distinct values before the gauge shift: `values_raw[i] = phi[i] + shift`,
    /// kept separately so `expand` reproduces the input bit for bit.
    values_raw: Vec<f64>,
    /// `perm[slot]` is the user coordinate occupying canonical slot `slot`,
    /// where slots run through blocks in order.
    perm: Vec<usize>,
    shift: f64,
}

impl MultiplicityTheta {
    /// Build directly from parts. `phi` must be strictly decreasing and
    /// `perm` a permutation of `0..sum(d)`.
    pub fn from_parts(phi: Vec<f64>, d: Vec<usize>, perm: Vec<usize>, shift: f64) -> Result<Self> {
        if phi.len() != d.len() || phi.is_empty() {
            return Err(Error::NonFinite { what: "phi/d shape" });
        }
        if phi.iter().any(|v| !v.is_finite()) || !shift.is_finite() {
            return Err(Error::NonFinite { what: "phi" });
        }
        if phi.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::SegmentMismatch);
        }
        if d.contains(&0) {
            return Err(Error::SegmentMismatch);
        }
        let p: usize = d.iter().sum();
        if p < 2 {
            return Err(Error::DimensionTooSmall { p });
        }
        let mut seen = vec![false; p];
        if perm.len() != p || perm.iter().any(|&j| j >= p || std::mem::replace(&mut seen[j], true))
        {
            return Err(Error::SegmentMismatch);
        }
        let values_raw = phi.iter().map(|v| v + shift).collect();
        Ok(MultiplicityTheta {
            phi,
            d,
            values_raw,
            perm,
            shift,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn d(&self) -> &[usize] {
        &self.d
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of distinct values.
    pub fn q(&self) -> usize {
        self.phi.len()
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.d.iter().sum()
    }

    /// l1 norm of the distinct values (the norm the truncation bound uses).
    pub fn phi_l1(&self) -> f64 {
        self.phi.iter().map(|v| v.abs()).sum()
    }

    /// l1 norm of the expanded vector, counting multiplicities.
    pub fn expanded_l1(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.d)
            .map(|(v, &m)| v.abs() * m as f64)
            .sum()
    }

    /// Smallest gap between adjacent distinct values.
    pub fn min_gap(&self) -> f64 {
        self.phi
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// Reconstruct the user's vector in its original coordinate order.
    pub fn expand(&self) -> Vec<f64> {
        let p = self.p();
        let mut out = vec![0.0; p];
        let mut slot = 0;
        for (b, &count) in self.d.iter().enumerate() {
            for _ in 0..count {
                out[self.perm[slot]] = self.values_raw[b];
                slot += 1;
            }
        }
        out
    }

    /// Same block structure with new distinct values, gauge shift 0.
    ///
    /// `expand()` on the result returns the new values themselves; used by
    /// the fitters, which keep the largest block pinned at 0.
    pub fn with_phi(&self, phi: Vec<f64>) -> Result<Self> {
        MultiplicityTheta::from_parts(phi, self.d.clone(), self.perm.clone(), 0.0)
    }

    /// Regauge so the smallest distinct value is exactly 0 (all phi >= 0).
    /// The expanded vector is unchanged; this is the gauge of the reduced
    /// (tilde) Pfaffian system.
    pub fn with_min_zero(&self) -> Self {
        let c = self.phi[self.q() - 1];
        let mut phi: Vec<f64> = self.phi.iter().map(|v| v - c).collect();
        *phi.last_mut().unwrap() = 0.0;
        MultiplicityTheta {
            phi,
            d: self.d.clone(),
            values_raw: self.values_raw.clone(),
            perm: self.perm.clone(),
            shift: self.shift + c,
        }
    }

    /// Scale the distinct values by `factor > 0` (same pattern, shift 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut phi: Vec<f64> = self.phi.iter().map(|v| v * factor).collect();
        // factor * 0.0 keeps the gauge pinned; guard against -0.0
        for v in phi.iter_mut() {
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        self.with_phi(phi)
    }
}

/// Reduce a raw parameter vector to canonical form.
///
/// Entries within `tie_tol` of each other (chained over adjacent gaps in
/// sorted order) are merged into one distinct value; exact ties keep the
/// shared value, merged near-ties take the group mean. The result is sorted
/// strictly decreasing and gauged so the largest distinct value is 0.
pub fn canonicalize(theta: &[f64], tie_tol: f64) -> Result<MultiplicityTheta> {
    let p = theta.len();
    if p < 2 {
        return Err(Error::DimensionTooSmall { p });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "theta" });
    }
    if !tie_tol.is_finite() || tie_tol < 0.0 {
        return Err(Error::InvalidTolerance {
            what: "tie_tol",
            value: tie_tol,
        });
    }

    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap().then(a.cmp(&b)));

    let mut values_raw = Vec::new();
    let mut d = Vec::new();
    let mut perm = Vec::with_capacity(p);
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && theta[idx[end - 1]] - theta[idx[end]] <= tie_tol {
            end += 1;
        }
        let members = &idx[start..end];
        let first = theta[members[0]];
        let value = if members.iter().all(|&j| theta[j] == first) {
            first
        } else {
            members.iter().map(|&j| theta[j]).sum::<f64>() / members.len() as f64
        };
        values_raw.push(value);
        d.push(end - start);
        perm.extend_from_slice(members);
        start = end;
    }
    debug_assert!(values_raw.windows(2).all(|w| w[0] > w[1]));

    let shift = values_raw[0];
    let mut phi: Vec<f64> = values_raw.iter().map(|v| v - shift).collect();
    phi[0] = 0.0;
    Ok(MultiplicityTheta {
        phi,
        d,
        values_raw,
        perm,
        shift,
    })
}

/// Log-constant under the shift identity: `log C(theta + c*1) = log C(theta) + c`.
pub fn gauge_shift(log_c: f64, c: f64) -> f64 {
    log_c + c
}

/// Surface mass of the unit sphere: `C(0) = 2 pi^{p/2} / Gamma(p/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMass {
    pub p: usize,
    pub value: f64,
    pub ln_value: f64,
}

pub fn uniform_mass(p: usize) -> Result<UniformMass> {
    if p == 0 {
        return Err(Error::DimensionTooSmall { p });
    }
    let ph = p as f64 / 2.0;
    let ln_value = std::f64::consts::LN_2 + ph * crate::special::LN_PI - ln_gamma(ph);
    Ok(UniformMass {
        p,
        value: ln_value.exp(),
        ln_value,
    })
}

/// Layout of a derivative vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// q entries `d/dphi_i C / C(0)`.
    Full,
    /// q entries `(C, d/dphi_1 C, ..., d/dphi_{q-1} C) / C(0)` in the gauge
    /// with the smallest distinct value pinned at 0.
    Reduced,
    /// q entries `eta_i = d/dphi_i log C`, summing to 1.
    Log,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Full => "full",
            Layout::Reduced => "reduced",
            Layout::Log => "log",
        }
    }
}

/// Derivative vector of the normalizing constant, normalized by C(0), with a
/// log-scale carrier `log_c = ln(C/C(0))` at the parameter it was computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct GVector {
    layout: Layout,
    values: Vec<f64>,
    log_c: f64,
}

impl GVector {
    pub fn full(values: Vec<f64>) -> Self {
        let total: f64 = values.iter().sum();
        GVector {
            layout: Layout::Full,
            values,
            log_c: total.ln(),
        }
    }

    /// Full layout with an independently computed log-constant.
    pub fn full_with_log_c(values: Vec<f64>, log_c: f64) -> Self {
        GVector {
            layout: Layout::Full,
            values,
            log_c,
        }
    }

    pub fn reduced(values: Vec<f64>) -> Self {
        let log_c = values[0].ln();
        GVector {
            layout: Layout::Reduced,
            values,
            log_c,
        }
    }

    pub fn log(values: Vec<f64>, log_c: f64) -> Self {
        GVector {
            layout: Layout::Log,
            values,
            log_c,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replace the log-constant (gauge adjustments).
    pub fn with_log_c(&self, log_c: f64) -> Self {
        GVector {
            layout: self.layout,
            values: self.values.clone(),
            log_c,
        }
    }

    /// Convert to the logarithmic layout `eta = G / C`.
    pub fn to_log(&self) -> Result<GVector> {
        match self.layout {
            Layout::Log => Ok(self.clone()),
            Layout::Full => {
                let total: f64 = self.values.iter().sum();
                Ok(GVector {
                    layout: Layout::Log,
                    values: self.values.iter().map(|v| v / total).collect(),
                    log_c: self.log_c,
                })
            }
            Layout::Reduced => Err(Error::LayoutMismatch {
                expected: "full or log",
                got: "reduced",
            }),
        }
    }

    /// Convert to the full layout `G / C(0)`.
    pub fn to_full(&self) -> Result<GVector> {
        match self.layout {
            Layout::Full => Ok(self.clone()),
            Layout::Log => {
                let c = self.log_c.exp();
                Ok(GVector {
                    layout: Layout::Full,
                    values: self.values.iter().map(|v| v * c).collect(),
                    log_c: self.log_c,
                })
            }
            Layout::Reduced => Err(Error::LayoutMismatch {
                expected: "full or log",
                got: "reduced",
            }),
        }
    }

    /// Convert a full-layout vector at gauge `phi` to the reduced (tilde)
    /// vector at `phi - phi_min`, where `phi_min` is the smallest distinct
    /// value of the parameter the vector was computed at.
    pub fn to_reduced(&self, phi_min: f64) -> Result<GVector> {
        if self.layout != Layout::Full {
            return Err(Error::LayoutMismatch {
                expected: "full",
                got: self.layout.name(),
            });
        }
        let q = self.values.len();
        let factor = (-phi_min).exp();
        let total: f64 = self.values.iter().sum();
        let mut values = Vec::with_capacity(q);
        values.push(factor * total);
        for v in &self.values[..q - 1] {
            values.push(factor * v);
        }
        Ok(GVector {
            layout: Layout::Reduced,
            values,
            log_c: self.log_c - phi_min,
        })
    }

    /// Inverse of [`GVector::to_reduced`].
    pub fn reduced_to_full(&self, phi_min: f64) -> Result<GVector> {
        if self.layout != Layout::Reduced {
            return Err(Error::LayoutMismatch {
                expected: "reduced",
                got: self.layout.name(),
            });
        }
        let q = self.values.len();
        let factor = phi_min.exp();
        let tail: f64 = self.values[0] - self.values[1..].iter().sum::<f64>();
        let mut values: Vec<f64> = self.values[1..].iter().map(|v| factor * v).collect();
        values.push(factor * tail);
        debug_assert_eq!(values.len(), q);
        Ok(GVector {
            layout: Layout::Full,
            values,
            log_c: self.log_c + phi_min,
        })
    }
}

/// Per-coordinate expectation parameter `eta_i = E[x_i^2]` in the user's
/// coordinate order, from block values `d/dphi_b log C`.
///
/// Coordinates inside a tied block share the block value divided by the
/// multiplicity.
pub fn expand_eta(theta: &MultiplicityTheta, eta_blocks: &[f64]) -> Vec<f64> {
    assert_eq!(eta_blocks.len(), theta.q());
    let mut out = vec![0.0; theta.p()];
    let mut slot = 0;
    for (b, &count) in theta.d().iter().enumerate() {
        let per_coord = eta_blocks[b] / count as f64;
        for _ in 0..count {
            out[theta.perm()[slot]] = per_coord;
            slot += 1;
        }
    }
    out
}
