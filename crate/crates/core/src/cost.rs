//! Cost profiles `h`, turning a geodesic distance into a transport cost
//! `c(x, y) = h(d(x, y))`.
//!
//! Accepted profiles satisfy `h(0) = 0`, `h(t)/t -> 0` as `t -> 0`, and
//! `h' > 0`, `h'' > 0` on `(0, inf)`. The one exception is
//! [`counterexample_profile`], which has `h'(0) = 1` and exists only so the
//! failure of barycenter injectivity can be exhibited.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{AssumptionClause, Error, Result};

/// Behaviour of `h` at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "value", rename_all = "snake_case")]
pub enum OriginClass {
    /// `h` is C^2 on `[0, inf)` with the given `h''(0)`.
    C2AtZero(f64),
    /// `h''(t)` has no finite limit at `0` (e.g. `t^p/p` with `1 < p < 2`).
    SingularAtZero,
    /// `h'(0) != 0`.
    ViolatesH2,
}

impl OriginClass {
    pub fn is_c2(&self) -> bool {
        matches!(self, OriginClass::C2AtZero(_))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Power { p: f64 },
    Counterexample,
    Custom { h: ScalarFn, dh: ScalarFn, d2h: ScalarFn },
}

/// The scalar profile `h` with its first two derivatives and `(h')^{-1}`.
#[derive(Clone)]
pub struct CostProfile {
    kind: Kind,
    origin: OriginClass,
    domain_max: f64,
}

impl fmt::Debug for CostProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            Kind::Power { p } => format!("power(p={p})"),
            Kind::Counterexample => "counterexample(t^2+t)".to_string(),
            Kind::Custom { .. } => "custom".to_string(),
        };
        f.debug_struct("CostProfile")
            .field("kind", &name)
            .field("origin", &self.origin)
            .field("domain_max", &self.domain_max)
            .finish()
    }
}

/// `h(t) = t^p / p`.
pub fn power_profile(p: f64) -> Result<CostProfile> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("power profile needs p > 1, got {p}")));
    }
    let origin = if p > 2.0 {
        OriginClass::C2AtZero(0.0)
    } else if p == 2.0 {
        OriginClass::C2AtZero(1.0)
    } else {
        OriginClass::SingularAtZero
    };
    Ok(CostProfile {
        kind: Kind::Power { p },
        origin,
        domain_max: f64::INFINITY,
    })
}

/// `h(t) = t^2 + t`, which breaks `h'(0) = 0`.
pub fn counterexample_profile() -> CostProfile {
    CostProfile {
        kind: Kind::Counterexample,
        origin: OriginClass::ViolatesH2,
        domain_max: f64::INFINITY,
    }
}

/// Builds a profile from user callables, validating the standing assumptions
/// on 10^3 log-spaced samples of `(0, domain_max]`.
pub fn custom_profile<H, D, D2>(h: H, dh: D, d2h: D2, domain_max: f64) -> Result<CostProfile>
where
    H: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
    D2: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(domain_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "domain_max must be positive, got {domain_max}"
        )));
    }
    let h0 = h(0.0);
    if !(h0.abs() <= 1e-12) {
        return Err(Error::AssumptionViolation {
            clause: AssumptionClause::H1,
            witness: 0.0,
            detail: format!("h(0) = {h0}"),
        });
    }
    let lo: f64 = 1e-6_f64.min(domain_max);
    let hi = domain_max.min(1e3);
    let n = 1000;
    for k in 0..n {
        let t = if hi > lo {
            lo * (hi / lo).powf(k as f64 / (n - 1) as f64)
        } else {
            hi
        };
        let (d1, d2) = (dh(t), d2h(t));
        if !(d1 > 0.0) || !(d2 > 0.0) {
            return Err(Error::AssumptionViolation {
                clause: AssumptionClause::H3,
                witness: t,
                detail: format!("h'(t) = {d1}, h''(t) = {d2}"),
            });
        }
    }
    if let Some((t, ratio)) = h2_witness(&h) {
        return Err(Error::AssumptionViolation {
            clause: AssumptionClause::H2,
            witness: t,
            detail: format!("h(t)/t = {ratio} does not vanish"),
        });
    }
    let mut profile = CostProfile {
        kind: Kind::Custom {
            h: Arc::new(h),
            dh: Arc::new(dh),
            d2h: Arc::new(d2h),
        },
        origin: OriginClass::SingularAtZero,
        domain_max,
    };
    profile.origin = classify_origin(&profile);
    Ok(profile)
}

/// Sample ladder `t = 2^-k` used at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginLadder {
    pub k_min: i32,
    pub k_max: i32,
    /// Agreement required between `h'(t)/t` and `h''(t)` for a finite limit.
    pub rel_tol: f64,
    /// `|slope|` below which `h''` is considered to converge to a nonzero value.
    pub slope_tol: f64,
}

impl Default for OriginLadder {
    fn default() -> Self {
        Self {
            k_min: 4,
            k_max: 24,
            rel_tol: 1e-3,
            slope_tol: 0.02,
        }
    }
}

fn h2_witness(h: &dyn Fn(f64) -> f64) -> Option<(f64, f64)> {
    let ladder = OriginLadder::default();
    let t_fine = 2f64.powi(-ladder.k_max);
    let t_prev = 2f64.powi(-(ladder.k_max - 4));
    let r_fine = h(t_fine) / t_fine;
    let r_prev = h(t_prev) / t_prev;
    if r_fine.abs() <= 1e-6 {
        return None;
    }
    let slope = (r_fine / r_prev).ln() / (t_fine / t_prev).ln();
    if slope < 0.01 {
        Some((t_fine, r_fine))
    } else {
        None
    }
}

/// Classifies the origin behaviour with the default ladder.
pub fn classify_origin(profile: &CostProfile) -> OriginClass {
    classify_origin_with(profile, &OriginLadder::default())
}

/// Compares `h'(t)/t` and `h''(t)` along `t = 2^-k`, `k = k_min..=k_max`.
///
/// `h''` diverging on the fine end of the ladder means `SingularAtZero`; a
/// power-law decay means the limit is `0`; a flat tail means the limit is the
/// finest sample, provided `h'(t)/t` agrees with it.
pub fn classify_origin_with(profile: &CostProfile, ladder: &OriginLadder) -> OriginClass {
    if h2_witness(&|t| profile.eval(t)).is_some() {
        return OriginClass::ViolatesH2;
    }
    let t = |k: i32| 2f64.powi(-k);
    let kf = ladder.k_max;
    let kc = (ladder.k_max - 4).max(ladder.k_min);
    let (tf, tc) = (t(kf), t(kc));
    let (bf, bc) = (profile.second_deriv(tf), profile.second_deriv(tc));
    let af = profile.deriv(tf) / tf;
    if !bf.is_finite() {
        return OriginClass::SingularAtZero;
    }
    let slope = (bf / bc).ln() / (tf / tc).ln();
    if slope < -ladder.slope_tol {
        OriginClass::SingularAtZero
    } else if slope > ladder.slope_tol {
        // both h'' and h'/t decay to zero
        OriginClass::C2AtZero(0.0)
    } else if (af - bf).abs() <= ladder.rel_tol * af.abs().max(bf.abs()) {
        OriginClass::C2AtZero(bf)
    } else {
        OriginClass::SingularAtZero
    }
}

impl CostProfile {
    pub fn origin_class(&self) -> OriginClass {
        self.origin
    }

    /// Largest admissible argument.
    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    /// True if the profile satisfies all three standing assumptions.
    pub fn is_admissible(&self) -> bool {
        self.origin != OriginClass::ViolatesH2
    }

    /// `Some(p)` for power profiles.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { p } => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            Kind::Power { p } => t.powf(*p) / p,
            Kind::Counterexample => t * t + t,
            Kind::Custom { h, .. } => h(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            Kind::Power { p } => t.powf(p - 1.0),
            Kind::Counterexample => 2.0 * t + 1.0,
            Kind::Custom { dh, .. } => dh(t),
        }
    }

    /// `h''(t)`; at `t = 0` this is the origin limit (`+inf` when singular).
    pub fn second_deriv(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            Kind::Power { p } => {
                if t == 0.0 {
                    match self.origin {
                        OriginClass::C2AtZero(v) => v,
                        _ => f64::INFINITY,
                    }
                } else {
                    (p - 1.0) * t.powf(p - 2.0)
                }
            }
            Kind::Counterexample => 2.0,
            Kind::Custom { d2h, .. } => {
                if t == 0.0 {
                    if let OriginClass::C2AtZero(v) = self.origin {
                        return v;
                    }
                }
                d2h(t)
            }
        }
    }

    /// `(h')^{-1}(s)` for `s >= h'(0)`.
    pub fn inv_deriv(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidInput(format!("inverse derivative of negative {s}")));
        }
        match &self.kind {
            Kind::Power { p } => Ok(s.powf(1.0 / (p - 1.0))),
            Kind::Counterexample => Ok(((s - 1.0) / 2.0).max(0.0)),
            Kind::Custom { dh, d2h, .. } => {
                let limit = dh(self.domain_max);
                if s > limit {
                    return Err(Error::InvDerivOverflow { norm: s, limit });
                }
                Ok(invert_monotone(dh.as_ref(), d2h.as_ref(), s, self.domain_max))
            }
        }
    }

    /// `h'(1)(t - 1) + h(1)`, a lower bound for `h(t)` when `t >= 1`.
    pub fn coercivity_bound(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::InvalidInput(format!("coercivity bound needs t >= 1, got {t}")));
        }
        Ok(self.deriv(1.0) * (t - 1.0) + self.eval(1.0))
    }
}

/// Solves `f(t) = s` for increasing `f`: bracket by doubling, 80 bisection
/// steps, then up to 5 Newton steps kept only while they improve.
fn invert_monotone(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, s: f64, t_max: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(t_max);
    while f(hi) < s && hi < t_max {
        lo = hi;
        hi = (hi * 2.0).min(t_max);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut res = (f(t) - s).abs();
    for _ in 0..5 {
        let d = df(t);
        if !(d > 0.0) {
            break;
        }
        let cand = t - (f(t) - s) / d;
        if !(cand >= 0.0 && cand <= t_max) {
            break;
        }
        let r = (f(cand) - s).abs();
        if r >= res {
            break;
        }
        t = cand;
        res = r;
    }
    t
}

/// Serializable profile description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Power { p: f64 },
    Counterexample,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<CostProfile> {
        match self {
            ProfileSpec::Power { p } => power_profile(*p),
            ProfileSpec::Counterexample => Ok(counterexample_profile()),
        }
    }
}
