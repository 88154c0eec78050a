//! Inverter-interfaced DER operating modes and the constraint/objective pieces
//! each mode contributes to the OPF.
//!
//! | Mode | Decision variables | Constraints |
//! |------|--------------------|-------------|
//! | [`DerMode::GridFollowingQ`] | `q` | `|q| <= sqrt(S^2 - p^2)`, `p` measured |
//! | [`DerMode::GridFollowingP`] | `p` | `0 <= p <= S`, `q = 0` |
//! | [`DerMode::GridSupporting`] | none (follows curve) | `q = droop_q(v)` |
//! | [`DerMode::GridForming`] | `p`, `q` | `v = v_set`, `p^2 + q^2 <= S^2` |
//! | [`DerMode::PvTypeBus`] | `q` | `p = p_set`, `p^2 + q^2 <= S^2`, penalty on `v - v_set` |
//!
//! Voltages handled here are squared magnitudes (`v2`, pu²) unless a name says
//! `v_mag`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default PV-type bus penalty weight.
pub const DEFAULT_PENALTY_M: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum DerError {
    /// Apparent power rating must be strictly positive.
    #[error("DER at bus {bus}: rating {s_rating} must be positive")]
    NonPositiveRating { bus: String, s_rating: f64 },

    /// Measured real output outside `[0, S]`.
    #[error("real output {p} outside [0, {s_rating}]")]
    RealPowerOutOfRange { p: f64, s_rating: f64 },

    /// Droop reference voltage outside the normal operating band.
    #[error("droop reference voltage {v_ref} outside [0.95, 1.05]")]
    ReferenceVoltageOutOfRange { v_ref: f64 },

    /// Droop gain must be non-negative.
    #[error("droop gain {k_q} is negative")]
    NegativeGain { k_q: f64 },

    /// Set-point voltage must be positive.
    #[error("voltage set-point {v_set2} must be positive")]
    NonPositiveSetpoint { v_set2: f64 },

    /// Non-finite parameter.
    #[error("DER parameter {name} is not finite")]
    NonFinite { name: &'static str },
}

/// Closed interval `[lo, hi]` in per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lo - tol && value <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Linear Q-V droop curve `q = q_ref + k_q (v_ref - V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroopCurve {
    /// Reactive output at the reference voltage (pu).
    pub q_ref: f64,
    /// Reference voltage magnitude (pu).
    pub v_ref: f64,
    /// Negative of the curve slope (pu reactive per pu voltage).
    pub k_q: f64,
}

impl Default for DroopCurve {
    fn default() -> Self {
        Self {
            q_ref: 0.0,
            v_ref: 1.0,
            k_q: 0.0,
        }
    }
}

impl DroopCurve {
    pub fn validate(&self) -> Result<(), DerError> {
        for (name, value) in [("q_ref", self.q_ref), ("v_ref", self.v_ref), ("k_q", self.k_q)] {
            if !value.is_finite() {
                return Err(DerError::NonFinite { name });
            }
        }
        if !(0.95..=1.05).contains(&self.v_ref) {
            return Err(DerError::ReferenceVoltageOutOfRange { v_ref: self.v_ref });
        }
        if self.k_q < 0.0 {
            return Err(DerError::NegativeGain { k_q: self.k_q });
        }
        Ok(())
    }

    /// Reactive output on the exact curve at voltage magnitude `v_mag`.
    pub fn q_exact(&self, v_mag: f64) -> f64 {
        self.q_ref + self.k_q * (self.v_ref - v_mag)
    }

    /// Reactive output on the curve rewritten in squared voltage, using the
    /// first-order expansion of `V^2` about `v_ref`. Affine in `v2`.
    pub fn q_linearized(&self, v2: f64) -> f64 {
        self.q_ref + self.k_q * (self.v_ref * self.v_ref - v2) / (2.0 * self.v_ref)
    }

    /// `d q / d v2` of [`Self::q_linearized`].
    pub fn slope_v2(&self) -> f64 {
        -self.k_q / (2.0 * self.v_ref)
    }
}

/// Operating mode of an inverter-interfaced DER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DerMode {
    /// Grid-following, reactive power dispatched; real output is measured.
    GridFollowingQ { p_measured: f64 },
    /// Grid-following, real power dispatched; reactive output pinned to zero.
    GridFollowingP,
    /// Grid-supporting: reactive output follows a Q-V droop curve.
    /// `p_measured` is the (exogenous) real output.
    GridSupporting { p_measured: f64, curve: DroopCurve },
    /// Grid-forming: holds the bus at `v_set2`, both `p` and `q` dispatched.
    GridForming { v_set2: f64 },
    /// Generator-style bus: fixed `p_set`, voltage target through a penalty.
    PvTypeBus {
        v_set2: f64,
        p_set: f64,
        penalty_m: f64,
    },
}

/// Short label for a mode, used in reports and schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerModeKind {
    GflQ,
    GflP,
    Gsi,
    Gfi,
    Pv,
}

impl DerModeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DerModeKind::GflQ => "gfl-q",
            DerModeKind::GflP => "gfl-p",
            DerModeKind::Gsi => "gsi",
            DerModeKind::Gfi => "gfi",
            DerModeKind::Pv => "pv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gfl-q" => DerModeKind::GflQ,
            "gfl-p" => DerModeKind::GflP,
            "gsi" => DerModeKind::Gsi,
            "gfi" => DerModeKind::Gfi,
            "pv" => DerModeKind::Pv,
            _ => return None,
        })
    }
}

impl std::fmt::Display for DerModeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl DerMode {
    pub fn kind(&self) -> DerModeKind {
        match self {
            DerMode::GridFollowingQ { .. } => DerModeKind::GflQ,
            DerMode::GridFollowingP => DerModeKind::GflP,
            DerMode::GridSupporting { .. } => DerModeKind::Gsi,
            DerMode::GridForming { .. } => DerModeKind::Gfi,
            DerMode::PvTypeBus { .. } => DerModeKind::Pv,
        }
    }

    /// Real output that is data rather than a decision, if any.
    pub fn fixed_p(&self) -> Option<f64> {
        match *self {
            DerMode::GridFollowingQ { p_measured } => Some(p_measured),
            DerMode::GridSupporting { p_measured, .. } => Some(p_measured),
            DerMode::PvTypeBus { p_set, .. } => Some(p_set),
            DerMode::GridFollowingP | DerMode::GridForming { .. } => None,
        }
    }
}

/// A DER: rating, location and operating mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerSpec {
    pub bus: String,
    /// Apparent power rating (pu).
    pub s_rating: f64,
    #[serde(flatten)]
    pub mode: DerMode,
}

impl DerSpec {
    pub fn new(bus: impl Into<String>, s_rating: f64, mode: DerMode) -> Self {
        Self {
            bus: bus.into(),
            s_rating,
            mode,
        }
    }

    pub fn validate(&self) -> Result<(), DerError> {
        if !self.s_rating.is_finite() {
            return Err(DerError::NonFinite { name: "s_rating" });
        }
        if self.s_rating <= 0.0 {
            return Err(DerError::NonPositiveRating {
                bus: self.bus.clone(),
                s_rating: self.s_rating,
            });
        }
        match self.mode {
            DerMode::GridFollowingQ { p_measured } => {
                gfli_q_bounds(self.s_rating, p_measured)?;
            }
            DerMode::GridFollowingP => {}
            DerMode::GridSupporting { p_measured, curve } => {
                check_real_output(self.s_rating, p_measured)?;
                curve.validate()?;
            }
            DerMode::GridForming { v_set2 } => check_setpoint(v_set2)?,
            DerMode::PvTypeBus {
                v_set2,
                p_set,
                penalty_m,
            } => {
                check_setpoint(v_set2)?;
                check_real_output(self.s_rating, p_set)?;
                if !penalty_m.is_finite() {
                    return Err(DerError::NonFinite { name: "penalty_m" });
                }
            }
        }
        Ok(())
    }

    /// Same DER with its rating multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            s_rating: self.s_rating * factor,
            ..self.clone()
        }
    }
}

fn check_real_output(s_rating: f64, p: f64) -> Result<(), DerError> {
    if !p.is_finite() {
        return Err(DerError::NonFinite { name: "p" });
    }
    if p < 0.0 || p > s_rating {
        return Err(DerError::RealPowerOutOfRange { p, s_rating });
    }
    Ok(())
}

fn check_setpoint(v_set2: f64) -> Result<(), DerError> {
    if !v_set2.is_finite() {
        return Err(DerError::NonFinite { name: "v_set2" });
    }
    if v_set2 <= 0.0 {
        return Err(DerError::NonPositiveSetpoint { v_set2 });
    }
    Ok(())
}

/// Reactive capability of a grid-following inverter whose real output is
/// fixed at `p_measured`.
pub fn gfli_q_bounds(s_rating: f64, p_measured: f64) -> Result<Interval, DerError> {
    check_real_output(s_rating, p_measured)?;
    let q_max = (s_rating * s_rating - p_measured * p_measured).max(0.0).sqrt();
    Ok(Interval {
        lo: -q_max,
        hi: q_max,
    })
}

/// Real power range of a grid-following inverter dispatched in `p`.
pub fn gfli_p_bounds(s_rating: f64) -> Interval {
    Interval {
        lo: 0.0,
        hi: s_rating,
    }
}

pub fn droop_q_exact(v_mag: f64, curve: &DroopCurve) -> f64 {
    curve.q_exact(v_mag)
}

pub fn droop_q(v2: f64, curve: &DroopCurve) -> f64 {
    curve.q_linearized(v2)
}

/// Constraint set contributed by a grid-forming inverter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfiConstraints {
    /// Bus squared voltage is pinned to this value.
    pub voltage_eq: f64,
    /// `p^2 + q^2 <= disk_radius^2`.
    pub disk_radius: f64,
}

impl GfiConstraints {
    /// Voltage equality residual `v2 - v_set2`.
    pub fn voltage_residual(&self, v2: f64) -> f64 {
        v2 - self.voltage_eq
    }

    /// Disk inequality in `<= 0` form.
    pub fn disk_value(&self, p: f64, q: f64) -> f64 {
        p * p + q * q - self.disk_radius * self.disk_radius
    }
}

pub fn gfi_constraints(s_rating: f64, v_set2: f64) -> GfiConstraints {
    GfiConstraints {
        voltage_eq: v_set2,
        disk_radius: s_rating,
    }
}

/// How the PV-type bus voltage target enters the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyForm {
    /// `M (v - v_set)^2`.
    #[default]
    Squared,
    /// `M (v - v_set)`, kept for comparison runs only: it rewards pushing
    /// the voltage down to its lower limit.
    Linear,
}

pub fn pvbus_objective_term(v2: f64, v_set2: f64, penalty_m: f64, form: PenaltyForm) -> f64 {
    let dev = v2 - v_set2;
    match form {
        PenaltyForm::Squared => penalty_m * dev * dev,
        PenaltyForm::Linear => penalty_m * dev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(q_ref: f64, v_ref: f64, k_q: f64) -> DroopCurve {
        DroopCurve { q_ref, v_ref, k_q }
    }

    #[test]
    fn q_bounds_examples() {
        assert_eq!(
            gfli_q_bounds(1.0, 0.0).unwrap(),
            Interval { lo: -1.0, hi: 1.0 }
        );
        let full = gfli_q_bounds(1.0, 1.0).unwrap();
        assert_eq!(full.hi, 0.0);
        assert_eq!(full.lo, 0.0);
        let b = gfli_q_bounds(0.05, 0.03).unwrap();
        assert!((b.hi - 0.04).abs() < 1e-15);
        assert!((b.lo + 0.04).abs() < 1e-15);
    }

    #[test]
    fn q_bounds_reject_overrated_output() {
        assert!(matches!(
            gfli_q_bounds(1.0, 1.2),
            Err(DerError::RealPowerOutOfRange { .. })
        ));
    }

    #[test]
    fn p_bounds_examples() {
        assert_eq!(gfli_p_bounds(1.0), Interval { lo: 0.0, hi: 1.0 });
        assert_eq!(gfli_p_bounds(0.42), Interval { lo: 0.0, hi: 0.42 });
        // 42 % of a 0.1 pu load.
        let r = gfli_p_bounds(0.42 * 0.1);
        assert!((r.hi - 0.042).abs() < 1e-15);
    }

    #[test]
    fn exact_droop_examples() {
        let c = curve(0.0, 1.0, 2.0);
        assert_eq!(droop_q_exact(1.0, &c), 0.0);
        assert!((droop_q_exact(1.05, &c) + 0.1).abs() < 1e-12);
        let c = curve(0.01, 1.0, 2.0);
        assert!((droop_q_exact(0.95, &c) - 0.11).abs() < 1e-12);
    }

    #[test]
    fn linearized_droop_examples() {
        let c = curve(0.0, 1.0, 2.0);
        assert_eq!(droop_q(1.0, &c), 0.0);
        assert!((droop_q(1.05 * 1.05, &c) + 0.1025).abs() < 1e-12);
        assert!((droop_q(0.95 * 0.95, &c) - 0.0975).abs() < 1e-12);
        let c = curve(0.03, 1.02, 5.0);
        assert!((droop_q(1.02 * 1.02, &c) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn gfi_constraint_construction() {
        let g = gfi_constraints(0.5, 1.0);
        assert_eq!(g.voltage_eq, 1.0);
        assert_eq!(g.disk_radius, 0.5);
        assert_eq!(g.voltage_residual(1.0), 0.0);
        assert!(g.disk_value(0.3, 0.4) <= 1e-15);
        assert!(g.disk_value(0.4, 0.4) > 0.0);
        // Rating scaled tenfold for voltage holding.
        let nominal = 0.05;
        assert!((gfi_constraints(10.0 * nominal, 1.0).disk_radius - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pv_penalty_examples() {
        assert_eq!(pvbus_objective_term(1.0, 1.0, 100.0, PenaltyForm::Squared), 0.0);
        let p = pvbus_objective_term(1.02 * 1.02, 1.0, DEFAULT_PENALTY_M, PenaltyForm::Squared);
        assert!((p - 100.0 * 0.0404f64.powi(2)).abs() < 1e-12);
        assert!((p - 0.1632).abs() < 1e-4);
        assert_eq!(DEFAULT_PENALTY_M, 1e2);
        let lin = pvbus_objective_term(0.98, 1.0, 100.0, PenaltyForm::Linear);
        assert!((lin + 2.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let ok = DerSpec::new(
            "3",
            0.1,
            DerMode::GridSupporting {
                p_measured: 0.05,
                curve: curve(0.0, 1.0, 1.0),
            },
        );
        assert!(ok.validate().is_ok());
        let bad = DerSpec::new(
            "3",
            0.1,
            DerMode::GridSupporting {
                p_measured: 0.05,
                curve: curve(0.0, 1.1, 1.0),
            },
        );
        assert!(matches!(
            bad.validate(),
            Err(DerError::ReferenceVoltageOutOfRange { .. })
        ));
        let neg = DerSpec::new("3", 0.0, DerMode::GridFollowingP);
        assert!(matches!(
            neg.validate(),
            Err(DerError::NonPositiveRating { .. })
        ));
        let gain = DerSpec::new(
            "3",
            0.1,
            DerMode::GridSupporting {
                p_measured: 0.0,
                curve: curve(0.0, 1.0, -1.0),
            },
        );
        assert!(matches!(gain.validate(), Err(DerError::NegativeGain { .. })));
    }

    #[test]
    fn taylor_gap_closed_form_on_grid() {
        for (q_ref, v_ref, k_q) in [(0.0, 1.0, 2.0), (0.02, 0.97, 7.5), (-0.01, 1.05, 0.3)] {
            let c = curve(q_ref, v_ref, k_q);
            for i in 0..1000 {
                let v_mag = 0.9 + 0.2 * i as f64 / 999.0;
                let gap = (droop_q(v_mag * v_mag, &c) - droop_q_exact(v_mag, &c)).abs();
                let closed = k_q * (v_mag - v_ref).powi(2) / (2.0 * v_ref);
                assert!((gap - closed).abs() <= 1e-12, "V={v_mag} gap={gap} closed={closed}");
            }
        }
    }

    proptest! {
        #[test]
        fn taylor_gap_matches_closed_form(
            v_mag in 0.9f64..1.1,
            v_ref in 0.95f64..1.05,
            k_q in 0.0f64..20.0,
            q_ref in -0.5f64..0.5,
        ) {
            let c = curve(q_ref, v_ref, k_q);
            let gap = (droop_q(v_mag * v_mag, &c) - droop_q_exact(v_mag, &c)).abs();
            let closed = k_q * (v_mag - v_ref).powi(2) / (2.0 * v_ref);
            prop_assert!((gap - closed).abs() <= 1e-12);
        }

        #[test]
        fn linearized_droop_is_affine_and_decreasing(
            a in 0.8f64..1.2,
            b in 0.8f64..1.2,
            v_ref in 0.95f64..1.05,
            k_q in 0.01f64..20.0,
        ) {
            let c = curve(0.0, v_ref, k_q);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(droop_q(hi, &c) < droop_q(lo, &c));
            let mid = 0.5 * (lo + hi);
            let affine = 0.5 * (droop_q(lo, &c) + droop_q(hi, &c));
            prop_assert!((droop_q(mid, &c) - affine).abs() < 1e-12);
        }

        #[test]
        fn q_bounds_symmetric_and_shrinking(s in 0.01f64..2.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let (a, b) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let wide = gfli_q_bounds(s, a * s).unwrap();
            let narrow = gfli_q_bounds(s, b * s).unwrap();
            prop_assert_eq!(wide.lo, -wide.hi);
            prop_assert_eq!(narrow.lo, -narrow.hi);
            prop_assert!(narrow.hi <= wide.hi);
        }
    }
}
