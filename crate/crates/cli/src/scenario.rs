//! Scenario files: which feeder, how its DERs operate, how it is split into
//! areas and which solver settings to use.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use gridopf_core::der::{DerMode, DerModeKind, DerSpec, DroopCurve, PenaltyForm};
use gridopf_core::feeder::{parse_feeder, Feeder};
use gridopf_core::partition::{partition_by_roots, single_area, AreaPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Copf,
    Dopf,
    Admm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Copf, Method::Dopf, Method::Admm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Copf => "copf",
            Method::Dopf => "dopf",
            Method::Admm => "admm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Share of the feeder's DERs switched to each mode, in percent. The rest
/// keep the mode given in the feeder document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeShares {
    pub gsi: f64,
    pub gfl_p: f64,
    pub gfl_q: f64,
    pub gfi: f64,
    pub pv: f64,
}

impl ModeShares {
    /// Fixed assignment order. The GSI share comes first so that a larger
    /// GSI share always contains the DERs picked for a smaller one.
    fn ordered(&self) -> [(DerModeKind, f64); 5] {
        [
            (DerModeKind::Gsi, self.gsi),
            (DerModeKind::GflP, self.gfl_p),
            (DerModeKind::GflQ, self.gfl_q),
            (DerModeKind::Gfi, self.gfi),
            (DerModeKind::Pv, self.pv),
        ]
    }

    pub fn total(&self) -> f64 {
        self.ordered().iter().map(|(_, s)| s).sum()
    }
}

/// Parameters used when a DER is switched into a mode that needs more data
/// than the feeder document gives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeParams {
    /// Droop gain as a multiple of the DER rating.
    pub k_q_per_rating: f64,
    pub q_ref: f64,
    pub v_ref: f64,
    pub gfi_v_set: f64,
    /// Rating multiplier for DERs switched to grid-forming.
    pub gfi_rating_scale: f64,
    pub pv_v_set: f64,
    pub penalty_m: f64,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            k_q_per_rating: 10.0,
            q_ref: 0.0,
            v_ref: 1.0,
            gfi_v_set: 1.0,
            gfi_rating_scale: 10.0,
            pv_v_set: 1.0,
            penalty_m: 100.0,
        }
    }
}

/// Mode of one named DER, applied after the shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub bus: String,
    pub mode: DerModeKind,
    /// Rating (kVA) for a bus that has no DER in the feeder document.
    pub s_kva: Option<f64>,
    pub p_kw: Option<f64>,
    pub rating_scale: Option<f64>,
    pub v_set: Option<f64>,
    pub k_q: Option<f64>,
    pub penalty_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    /// Root bus of every area. Empty means one area.
    pub roots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub eps: f64,
    pub max_macro: usize,
    pub damping: f64,
    pub rho: f64,
    pub admm_eps: f64,
    pub admm_max_iter: usize,
    pub parallel_areas: bool,
    pub penalty_form: PenaltyForm,
    /// Bound on the voltage mismatch against the power-flow re-solve (pu).
    pub validation_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_macro: 100,
            damping: 0.0,
            rho: 1.0,
            admm_eps: 5e-5,
            admm_max_iter: 500,
            parallel_areas: false,
            penalty_form: PenaltyForm::Squared,
            validation_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub gsi_percent: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            gsi_percent: vec![0.0, 10.0, 50.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Feeder document, relative to the scenario file.
    pub feeder: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub shares: ModeShares,
    #[serde(default)]
    pub params: ModeParams,
    #[serde(default)]
    pub overrides: Vec<Override>,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).context("reading scenario")?;
        s.base_dir = base_dir.into();
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn check(&self) -> Result<()> {
        for (kind, share) in self.shares.ordered() {
            ensure!(
                (0.0..=100.0).contains(&share),
                "share of {kind} DERs must lie in [0, 100], got {share}"
            );
        }
        ensure!(
            self.shares.total() <= 100.0 + 1e-9,
            "mode shares add up to {} %",
            self.shares.total()
        );
        for pct in &self.sweep.gsi_percent {
            ensure!(
                (0.0..=100.0).contains(pct),
                "sweep share {pct} outside [0, 100]"
            );
        }
        ensure!(self.solver.eps > 0.0, "eps must be positive");
        ensure!(
            (0.0..1.0).contains(&self.solver.damping),
            "damping must lie in [0, 1)"
        );
        ensure!(self.solver.rho > 0.0, "rho must be positive");
        ensure!(!self.methods.is_empty(), "no methods requested");
        Ok(())
    }

    pub fn feeder_path(&self) -> PathBuf {
        self.base_dir.join(&self.feeder)
    }

    pub fn base_feeder(&self) -> Result<Feeder> {
        let path = self.feeder_path();
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading feeder {}", path.display()))?;
        parse_feeder(&text).with_context(|| format!("parsing feeder {}", path.display()))
    }

    /// Feeder with the scenario's DER modes applied.
    pub fn build_feeder(&self) -> Result<Feeder> {
        let base = self.base_feeder()?;
        let ders = assign_modes(&base, &self.shares, &self.params, &self.overrides, self.seed)?;
        Ok(base.with_ders(ders)?)
    }

    pub fn build_partition(&self, f: &Feeder) -> Result<AreaPartition> {
        Ok(if self.partition.roots.is_empty() {
            single_area(f)?
        } else {
            partition_by_roots(f, &self.partition.roots)?
        })
    }
}

/// DER order used for share assignment: a seeded shuffle of the feeder's
/// DER list.
pub fn selection_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn count_for(share: f64, n: usize) -> usize {
    ((share / 100.0) * n as f64).round() as usize
}

/// Real output the DER produces as data, or zero for modes where it is a
/// decision.
fn data_p(d: &DerSpec) -> f64 {
    d.mode.fixed_p().unwrap_or(0.0)
}

fn convert(d: &DerSpec, kind: DerModeKind, prm: &ModeParams) -> DerSpec {
    let p = data_p(d).min(d.s_rating);
    let (s_rating, mode) = match kind {
        DerModeKind::GflQ => (d.s_rating, DerMode::GridFollowingQ { p_measured: p }),
        DerModeKind::GflP => (d.s_rating, DerMode::GridFollowingP),
        DerModeKind::Gsi => (
            d.s_rating,
            DerMode::GridSupporting {
                p_measured: p,
                curve: DroopCurve {
                    q_ref: prm.q_ref,
                    v_ref: prm.v_ref,
                    k_q: prm.k_q_per_rating * d.s_rating,
                },
            },
        ),
        DerModeKind::Gfi => (
            d.s_rating * prm.gfi_rating_scale,
            DerMode::GridForming {
                v_set2: prm.gfi_v_set * prm.gfi_v_set,
            },
        ),
        DerModeKind::Pv => (
            d.s_rating,
            DerMode::PvTypeBus {
                v_set2: prm.pv_v_set * prm.pv_v_set,
                p_set: p,
                penalty_m: prm.penalty_m,
            },
        ),
    };
    DerSpec {
        bus: d.bus.clone(),
        s_rating,
        mode,
    }
}

fn apply_override(f: &Feeder, ders: &mut Vec<DerSpec>, o: &Override, prm: &ModeParams) -> Result<()> {
    let kw = |v: f64| f.kw_to_pu(v);
    let pos = ders.iter().position(|d| d.bus == o.bus);
    let base = match (pos, o.s_kva) {
        (_, Some(s)) => DerSpec::new(
            o.bus.clone(),
            kw(s),
            DerMode::GridFollowingQ {
                p_measured: o.p_kw.map(kw).unwrap_or(0.0).min(kw(s)),
            },
        ),
        (Some(i), None) => ders[i].clone(),
        (None, None) => bail!("override for bus {} without a DER there needs s_kva", o.bus),
    };
    let mut base = base;
    if let Some(p) = o.p_kw {
        if let DerMode::GridFollowingQ { p_measured } = &mut base.mode {
            *p_measured = kw(p);
        }
    }
    let mut prm = prm.clone();
    if let Some(v) = o.v_set {
        prm.gfi_v_set = v;
        prm.pv_v_set = v;
    }
    if let Some(m) = o.penalty_m {
        prm.penalty_m = m;
    }
    if o.mode == DerModeKind::Gfi {
        prm.gfi_rating_scale = 1.0;
    }
    let mut d = convert(&base, o.mode, &prm);
    if let Some(scale) = o.rating_scale {
        d.s_rating *= scale;
    }
    if let (Some(k), DerMode::GridSupporting { curve, .. }) = (o.k_q, &mut d.mode) {
        curve.k_q = k;
    }
    match pos {
        Some(i) => ders[i] = d,
        None => ders.push(d),
    }
    Ok(())
}

/// Applies shares (in seeded random order) and then per-bus overrides to the
/// feeder's DERs.
pub fn assign_modes(
    f: &Feeder,
    shares: &ModeShares,
    prm: &ModeParams,
    overrides: &[Override],
    seed: u64,
) -> Result<Vec<DerSpec>> {
    let n = f.ders.len();
    let mut ders = f.ders.clone();
    let order = selection_order(n, seed);
    let mut next = 0;
    for (kind, share) in shares.ordered() {
        let take = count_for(share, n).min(n - next);
        for &i in &order[next..next + take] {
            ders[i] = convert(&f.ders[i], kind, prm);
        }
        next += take;
    }
    for o in overrides {
        apply_override(f, &mut ders, o, prm)?;
    }
    Ok(ders)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FEEDER: &str = r#"
[meta]
s_base = 1e6
v_base = 4160.0
substation = "0"
v_sub = 1.0

[[buses]]
id = "0"
[[buses]]
id = "1"
p_kw = 100.0
[[buses]]
id = "2"
p_kw = 100.0

[[lines]]
from = "0"
to = "1"
r_pu = 0.01
x_pu = 0.02
[[lines]]
from = "1"
to = "2"
r_pu = 0.01
x_pu = 0.02

[[ders]]
bus = "1"
mode = "gfl-q"
s_kva = 50.0
p_kw = 30.0
[[ders]]
bus = "2"
mode = "gfl-q"
s_kva = 50.0
p_kw = 30.0
"#;

    fn feeder() -> Feeder {
        parse_feeder(FEEDER).unwrap()
    }

    #[test]
    fn shares_are_nested_across_percentages() {
        let f = feeder();
        let prm = ModeParams::default();
        let picked = |pct: f64| {
            let shares = ModeShares {
                gsi: pct,
                ..ModeShares::default()
            };
            assign_modes(&f, &shares, &prm, &[], 3)
                .unwrap()
                .iter()
                .filter(|d| d.mode.kind() == DerModeKind::Gsi)
                .map(|d| d.bus.clone())
                .collect::<Vec<_>>()
        };
        let half = picked(50.0);
        assert_eq!(half.len(), 1);
        let all = picked(100.0);
        assert_eq!(all.len(), 2);
        assert!(all.contains(&half[0]));
        assert!(picked(0.0).is_empty());
    }

    #[test]
    fn gsi_keeps_measured_output_and_scales_gain() {
        let f = feeder();
        let shares = ModeShares {
            gsi: 100.0,
            ..ModeShares::default()
        };
        let ders = assign_modes(&f, &shares, &ModeParams::default(), &[], 0).unwrap();
        let DerMode::GridSupporting { p_measured, curve } = ders[0].mode else {
            panic!("expected a droop DER");
        };
        assert!((p_measured - 0.03).abs() < 1e-15);
        assert!((curve.k_q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn override_adds_grid_forming_der() {
        let f = feeder();
        let o = Override {
            bus: "2".into(),
            mode: DerModeKind::Gfi,
            s_kva: None,
            p_kw: None,
            rating_scale: Some(10.0),
            v_set: Some(1.0),
            k_q: None,
            penalty_m: None,
        };
        let ders = assign_modes(&f, &ModeShares::default(), &ModeParams::default(), &[o], 0)
            .unwrap();
        assert_eq!(ders[1].mode, DerMode::GridForming { v_set2: 1.0 });
        assert!((ders[1].s_rating - 0.5).abs() < 1e-15);
    }

    #[test]
    fn override_without_der_needs_rating() {
        let f = feeder();
        let o = Override {
            bus: "0".into(),
            mode: DerModeKind::Pv,
            s_kva: None,
            p_kw: None,
            rating_scale: None,
            v_set: None,
            k_q: None,
            penalty_m: None,
        };
        assert!(assign_modes(&f, &ModeShares::default(), &ModeParams::default(), &[o], 0).is_err());
    }

    #[test]
    fn shares_out_of_range_are_rejected() {
        let text = r#"
name = "x"
feeder = "f.toml"
[shares]
gsi = 80.0
gfi = 30.0
"#;
        assert!(Scenario::from_toml(text, ".").is_err());
        let text = "name = \"x\"\nfeeder = \"f.toml\"\n[shares]\ngsi = 120.0\n";
        assert!(Scenario::from_toml(text, ".").is_err());
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let s = Scenario::from_toml("name = \"x\"\nfeeder = \"f.toml\"\n", "dir").unwrap();
        assert_eq!(s.methods, Method::ALL.to_vec());
        assert_eq!(s.solver.eps, 1e-4);
        assert_eq!(s.feeder_path(), PathBuf::from("dir/f.toml"));
    }
}
