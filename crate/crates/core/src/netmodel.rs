//! Deterministic radio-network model.
//!
//! O-RUs sit at fixed sites, each hosting `rcs_per_ru` radio cards (RCs) on
//! distinct carriers. UEs are static points in a rectangular area. Links use
//! free-space path loss only, association is strongest-RSS among ON cards, and
//! the two QoS constraints (minimum RSS, per-RC connection capacity) are
//! reported rather than enforced.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Links shorter than this are evaluated at this distance.
pub const DEFAULT_MIN_DISTANCE_M: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Static description of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub ru_positions: Vec<Point>,
    pub rcs_per_ru: usize,
    /// One carrier per RC slot of an RU.
    pub band_frequencies_hz: Vec<f64>,
    pub tx_power_dbm: f64,
    pub rss_min_dbm: f64,
    pub capacity_max: usize,
    pub num_ues: usize,
    pub speed_of_light_mps: f64,
    pub min_distance_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            area_width_m: 500.0,
            area_height_m: 500.0,
            ru_positions: grid_layout(3, 2, 100.0, Point::new(250.0, 250.0)),
            rcs_per_ru: 2,
            // N77 and N78 band centres.
            band_frequencies_hz: vec![3.7e9, 3.5e9],
            tx_power_dbm: 30.0,
            rss_min_dbm: -95.0,
            capacity_max: 10,
            num_ues: 50,
            speed_of_light_mps: SPEED_OF_LIGHT_MPS,
            min_distance_m: DEFAULT_MIN_DISTANCE_M,
        }
    }
}

/// `cols × rows` sites with uniform `spacing`, centred on `center`, row-major
/// from the lowest y.
pub fn grid_layout(cols: usize, rows: usize, spacing: f64, center: Point) -> Vec<Point> {
    let x0 = center.x - spacing * (cols as f64 - 1.0) / 2.0;
    let y0 = center.y - spacing * (rows as f64 - 1.0) / 2.0;
    (0..rows)
        .flat_map(|r| {
            (0..cols).map(move |c| Point::new(x0 + spacing * c as f64, y0 + spacing * r as f64))
        })
        .collect()
}

impl NetworkConfig {
    pub fn with_num_ues(mut self, k: usize) -> Self {
        self.num_ues = k;
        self
    }

    pub fn num_rus(&self) -> usize {
        self.ru_positions.len()
    }

    /// M, the total number of radio cards.
    pub fn num_rcs(&self) -> usize {
        self.ru_positions.len() * self.rcs_per_ru
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.area_width_m).contains(&p.x) && (0.0..=self.area_height_m).contains(&p.y)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if !(self.area_width_m > 0.0 && self.area_height_m > 0.0) {
            return bad("area dimensions must be positive".into());
        }
        if self.ru_positions.is_empty() {
            return bad("at least one RU position is required".into());
        }
        if let Some(p) = self.ru_positions.iter().find(|p| !self.contains(p)) {
            return bad(format!("RU position ({}, {}) lies outside the area", p.x, p.y));
        }
        if self.rcs_per_ru == 0 || self.band_frequencies_hz.len() != self.rcs_per_ru {
            return bad(format!(
                "band_frequencies_hz has {} entries but rcs_per_ru is {}",
                self.band_frequencies_hz.len(),
                self.rcs_per_ru
            ));
        }
        if self.band_frequencies_hz.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return bad("all carrier frequencies must be positive and finite".into());
        }
        let mut sorted = self.band_frequencies_hz.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("RCs of one RU must use distinct frequencies".into());
        }
        if self.capacity_max == 0 {
            return bad("capacity_max must be at least 1".into());
        }
        if self.num_ues == 0 {
            return bad("num_ues must be at least 1".into());
        }
        if !self.tx_power_dbm.is_finite() || !self.rss_min_dbm.is_finite() {
            return bad("tx_power_dbm and rss_min_dbm must be finite".into());
        }
        if !(self.speed_of_light_mps > 0.0) || !(self.min_distance_m > 0.0) {
            return bad("speed_of_light_mps and min_distance_m must be positive".into());
        }
        Ok(())
    }

    /// RCs in index order: RU 1 slot 1, RU 1 slot 2, RU 2 slot 1, ...
    pub fn radio_cards(&self) -> Vec<RadioCard> {
        self.ru_positions
            .iter()
            .enumerate()
            .flat_map(|(ru, pos)| {
                self.band_frequencies_hz
                    .iter()
                    .enumerate()
                    .map(move |(slot, &f)| RadioCard {
                        rc_id: ru * self.rcs_per_ru + slot + 1,
                        ru_id: ru + 1,
                        frequency_hz: f,
                        position: *pos,
                        is_on: true,
                    })
            })
            .collect()
    }
}

/// One carrier of an RU. Ids are 1-based; vector indices elsewhere are `rc_id - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioCard {
    pub rc_id: usize,
    pub ru_id: usize,
    pub frequency_hz: f64,
    pub position: Point,
    pub is_on: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeLayout {
    pub positions: Vec<Point>,
}

impl UeLayout {
    /// Uniform placement over the whole area.
    pub fn sample<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Self {
        let positions = (0..cfg.num_ues)
            .map(|_| {
                Point::new(
                    rng.gen::<f64>() * cfg.area_width_m,
                    rng.gen::<f64>() * cfg.area_height_m,
                )
            })
            .collect();
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Free-space path loss in dB.
pub fn fspl_db(distance_m: f64, frequency_hz: f64, c: f64) -> Result<f64, ModelError> {
    if !(distance_m > 0.0) {
        return Err(ModelError::NonPositiveDistance(distance_m));
    }
    if !(frequency_hz > 0.0) {
        return Err(ModelError::NonPositiveFrequency(frequency_hz));
    }
    Ok(20.0 * distance_m.log10()
        + 20.0 * frequency_hz.log10()
        + 20.0 * (4.0 * std::f64::consts::PI / c).log10())
}

/// Received power in dBm: transmit power minus free-space loss.
pub fn rss_dbm(tx_power_dbm: f64, distance_m: f64, frequency_hz: f64, c: f64) -> Result<f64, ModelError> {
    Ok(tx_power_dbm - fspl_db(distance_m, frequency_hz, c)?)
}

/// Dense M×K matrix of link RSS values, rows indexed by RC.
#[derive(Clone, Debug, PartialEq)]
pub struct RssMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RssMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let m = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(ModelError::Dimension("ragged RSS rows".into()));
        }
        Ok(Self {
            rows: m,
            cols: k,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn num_rcs(&self) -> usize {
        self.rows
    }

    pub fn num_ues(&self) -> usize {
        self.cols
    }

    pub fn get(&self, rc: usize, ue: usize) -> f64 {
        self.data[rc * self.cols + ue]
    }

    pub fn column(&self, ue: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |m| self.get(m, ue))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// RSS of every RC towards every UE, irrespective of ON/OFF state.
pub fn compute_rss_matrix(
    cfg: &NetworkConfig,
    rcs: &[RadioCard],
    layout: &UeLayout,
) -> Result<RssMatrix, ModelError> {
    let cols = layout.len();
    let mut data = Vec::with_capacity(rcs.len() * cols);
    for rc in rcs {
        for ue in &layout.positions {
            let d = rc.position.distance(ue).max(cfg.min_distance_m);
            data.push(rss_dbm(cfg.tx_power_dbm, d, rc.frequency_hz, cfg.speed_of_light_mps)?);
        }
    }
    Ok(RssMatrix {
        rows: rcs.len(),
        cols,
        data,
    })
}

/// Strongest-RSS association among ON cards. A UE whose best ON link falls
/// below `rss_min_dbm` (or with no ON card at all) is left unserved (`None`).
/// Ties go to the lowest RC index.
pub fn associate(rss: &RssMatrix, rc_flags: &[bool], rss_min_dbm: f64) -> Vec<Option<usize>> {
    (0..rss.num_ues())
        .map(|k| {
            let mut best: Option<(usize, f64)> = None;
            for (m, on) in rc_flags.iter().enumerate().take(rss.num_rcs()) {
                if !on {
                    continue;
                }
                let v = rss.get(m, k);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((m, v));
                }
            }
            best.filter(|&(_, v)| v >= rss_min_dbm).map(|(m, _)| m)
        })
        .collect()
}

/// Dynamic snapshot: ON/OFF flags plus the association they induce.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub rc_flags: Vec<bool>,
    pub rss_dbm: Arc<RssMatrix>,
    pub association: Vec<Option<usize>>,
    pub connection_counts: Vec<usize>,
}

impl NetworkState {
    pub fn new(rss: Arc<RssMatrix>, rc_flags: Vec<bool>, rss_min_dbm: f64) -> Result<Self, ModelError> {
        if rc_flags.len() != rss.num_rcs() {
            return Err(ModelError::Dimension(format!(
                "{} flags for {} radio cards",
                rc_flags.len(),
                rss.num_rcs()
            )));
        }
        let association = associate(&rss, &rc_flags, rss_min_dbm);
        let connection_counts = connection_counts(&association, rc_flags.len());
        Ok(Self {
            rc_flags,
            rss_dbm: rss,
            association,
            connection_counts,
        })
    }

    /// Same RSS matrix, new flags, fresh association.
    pub fn with_flags(&self, rc_flags: Vec<bool>, rss_min_dbm: f64) -> Result<Self, ModelError> {
        Self::new(Arc::clone(&self.rss_dbm), rc_flags, rss_min_dbm)
    }

    pub fn num_rcs(&self) -> usize {
        self.rc_flags.len()
    }

    pub fn num_ues(&self) -> usize {
        self.association.len()
    }

    pub fn served_ues(&self) -> usize {
        self.association.iter().filter(|a| a.is_some()).count()
    }
}

pub fn connection_counts(association: &[Option<usize>], num_rcs: usize) -> Vec<usize> {
    let mut counts = vec![0; num_rcs];
    for m in association.iter().flatten() {
        counts[*m] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub rss_ok: bool,
    /// RC indices (0-based) with more than C_max connections.
    pub oversubscribed_rcs: Vec<usize>,
    /// UE indices without a link meeting R_min.
    pub unserved_ues: Vec<usize>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.rss_ok && self.oversubscribed_rcs.is_empty()
    }
}

pub fn check_constraints(state: &NetworkState, cfg: &NetworkConfig) -> ConstraintReport {
    let unserved_ues: Vec<usize> = state
        .association
        .iter()
        .enumerate()
        .filter(|(k, a)| match a {
            None => true,
            Some(m) => state.rss_dbm.get(*m, *k) < cfg.rss_min_dbm,
        })
        .map(|(k, _)| k)
        .collect();
    let oversubscribed_rcs = state
        .connection_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > cfg.capacity_max)
        .map(|(m, _)| m)
        .collect();
    ConstraintReport {
        rss_ok: unserved_ues.is_empty(),
        oversubscribed_rcs,
        unserved_ues,
    }
}

/// Z, the number of switched-off cards.
pub fn count_off(rc_flags: &[bool]) -> usize {
    rc_flags.iter().filter(|on| !**on).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const C: f64 = SPEED_OF_LIGHT_MPS;

    fn single_rc_cfg() -> NetworkConfig {
        NetworkConfig {
            ru_positions: vec![Point::new(0.0, 0.0)],
            rcs_per_ru: 1,
            band_frequencies_hz: vec![3.7e9],
            num_ues: 1,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn fspl_reference_values() {
        assert_abs_diff_eq!(fspl_db(100.0, 3.7e9, C).unwrap(), 83.811_817_703_223_26, epsilon = 1e-9);
        assert_abs_diff_eq!(fspl_db(1.0, 1.0, C).unwrap(), -147.552_216_778_116_64, epsilon = 1e-9);
        let d = fspl_db(240.0, 3.5e9, C).unwrap() - fspl_db(120.0, 3.5e9, C).unwrap();
        assert_abs_diff_eq!(d, 20.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn fspl_rejects_non_positive_inputs() {
        assert!(matches!(fspl_db(0.0, 3.7e9, C), Err(ModelError::NonPositiveDistance(_))));
        assert!(matches!(fspl_db(-1.0, 3.7e9, C), Err(ModelError::NonPositiveDistance(_))));
        assert!(matches!(fspl_db(10.0, 0.0, C), Err(ModelError::NonPositiveFrequency(_))));
        assert!(rss_dbm(30.0, 0.0, 1.0, C).is_err());
    }

    #[test]
    fn rss_reference_values() {
        assert_abs_diff_eq!(rss_dbm(30.0, 100.0, 3.7e9, C).unwrap(), -53.811_817_703_223_26, epsilon = 1e-9);
        let diag = 500f64.hypot(500.0);
        assert_abs_diff_eq!(rss_dbm(30.0, diag, 3.7e9, C).unwrap(), -70.801_517_746_583_44, epsilon = 1e-9);
        assert_eq!(rss_dbm(0.0, 42.0, 3.5e9, C).unwrap(), -fspl_db(42.0, 3.5e9, C).unwrap());
    }

    #[test]
    fn rss_matrix_single_link_and_clamp() {
        let cfg = single_rc_cfg();
        let rcs = cfg.radio_cards();
        let layout = UeLayout { positions: vec![Point::new(100.0, 0.0)] };
        let h = compute_rss_matrix(&cfg, &rcs, &layout).unwrap();
        assert_abs_diff_eq!(h.get(0, 0), -53.811_817_703_223_26, epsilon = 1e-9);

        let colocated = UeLayout { positions: vec![Point::new(0.2, 0.1)] };
        let h = compute_rss_matrix(&cfg, &rcs, &colocated).unwrap();
        assert_eq!(h.get(0, 0), rss_dbm(30.0, 1.0, 3.7e9, C).unwrap());
    }

    #[test]
    fn default_matrix_shape() {
        let cfg = NetworkConfig::default();
        let mut rng = crate::rng::rng_from(1, &[]);
        let layout = UeLayout::sample(&cfg, &mut rng);
        let h = compute_rss_matrix(&cfg, &cfg.radio_cards(), &layout).unwrap();
        assert_eq!((h.num_rcs(), h.num_ues()), (12, 50));
    }

    #[test]
    fn default_config_is_valid_and_grid_spaced() {
        let cfg = NetworkConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.num_rcs(), 12);
        assert_eq!(cfg.ru_positions[0], Point::new(150.0, 200.0));
        assert_eq!(cfg.ru_positions[5], Point::new(350.0, 300.0));
        assert_eq!(cfg.ru_positions[0].distance(&cfg.ru_positions[1]), 100.0);
        let rcs = cfg.radio_cards();
        assert_eq!(rcs[3].rc_id, 4);
        assert_eq!(rcs[3].ru_id, 2);
        assert_ne!(rcs[2].frequency_hz, rcs[3].frequency_hz);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = NetworkConfig::default();
        cfg.band_frequencies_hz = vec![3.5e9, 3.5e9];
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.ru_positions.push(Point::new(600.0, 10.0));
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.capacity_max = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.band_frequencies_hz = vec![3.5e9];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn association_examples() {
        let h = RssMatrix::from_rows(vec![vec![-60.0], vec![-70.0]]).unwrap();
        assert_eq!(associate(&h, &[true, true], -95.0), vec![Some(0)]);
        assert_eq!(associate(&h, &[false, true], -95.0), vec![Some(1)]);
        assert_eq!(associate(&h, &[false, false], -95.0), vec![None]);
        // Best ON link below threshold leaves the UE unserved.
        assert_eq!(associate(&h, &[false, true], -65.0), vec![None]);
        let tied = RssMatrix::from_rows(vec![vec![-60.0], vec![-60.0]]).unwrap();
        assert_eq!(associate(&tied, &[true, true], -95.0), vec![Some(0)]);
    }

    fn state_with_counts(counts: &[usize]) -> (NetworkState, NetworkConfig) {
        // Each UE hears only its own RC strongly.
        let m = counts.len();
        let k: usize = counts.iter().sum();
        let mut rows = vec![vec![-90.0; k]; m];
        let mut ue = 0;
        for (rc, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                rows[rc][ue] = -50.0;
                ue += 1;
            }
        }
        let rss = Arc::new(RssMatrix::from_rows(rows).unwrap());
        let cfg = NetworkConfig { num_ues: k.max(1), ..NetworkConfig::default() };
        (NetworkState::new(rss, vec![true; m], cfg.rss_min_dbm).unwrap(), cfg)
    }

    #[test]
    fn constraint_examples() {
        let (state, cfg) = state_with_counts(&[11, 3]);
        let report = check_constraints(&state, &cfg);
        assert_eq!(report.oversubscribed_rcs, vec![0]);
        assert!(report.rss_ok);

        let (state, cfg) = state_with_counts(&[10, 10]);
        let report = check_constraints(&state, &cfg);
        assert!(report.is_feasible());

        let (state, cfg) = state_with_counts(&[2, 1]);
        let unserved = state.with_flags(vec![false, false], cfg.rss_min_dbm).unwrap();
        let report = check_constraints(&unserved, &cfg);
        assert!(!report.rss_ok);
        assert_eq!(report.unserved_ues, vec![0, 1, 2]);
    }

    #[test]
    fn count_off_examples() {
        assert_eq!(count_off(&[true; 12]), 0);
        let half: Vec<bool> = (0..12).map(|i| i % 2 == 0).collect();
        assert_eq!(count_off(&half), 6);
        assert_eq!(count_off(&half) as f64 / 12.0, 0.5);
        assert_eq!(count_off(&[false; 12]), 12);
    }

    proptest! {
        #[test]
        fn fspl_is_monotone(d in 1.0f64..5000.0, dd in 0.01f64..1000.0, f in 1e8f64..1e10, df in 1e3f64..1e9) {
            let base = fspl_db(d, f, C).unwrap();
            prop_assert!(fspl_db(d + dd, f, C).unwrap() > base);
            prop_assert!(fspl_db(d, f + df, C).unwrap() > base);
        }

        #[test]
        fn association_idempotent_and_shift_invariant(
            seed in any::<u64>(),
            flags in proptest::collection::vec(any::<bool>(), 12),
            shift in -20.0f64..20.0,
        ) {
            let cfg = NetworkConfig::default().with_num_ues(20);
            let mut rng = crate::rng::rng_from(seed, &[]);
            let layout = UeLayout::sample(&cfg, &mut rng);
            let h = compute_rss_matrix(&cfg, &cfg.radio_cards(), &layout).unwrap();
            let a = associate(&h, &flags, f64::NEG_INFINITY);
            prop_assert_eq!(&a, &associate(&h, &flags, f64::NEG_INFINITY));
            let shifted = h.map(|v| v + shift);
            prop_assert_eq!(a, associate(&shifted, &flags, f64::NEG_INFINITY));
        }

        #[test]
        fn default_geometry_never_breaches_rss(seed in any::<u64>(), flags in proptest::collection::vec(any::<bool>(), 12)) {
            prop_assume!(flags.iter().any(|f| *f));
            let cfg = NetworkConfig::default();
            let mut rng = crate::rng::rng_from(seed, &[]);
            let layout = UeLayout::sample(&cfg, &mut rng);
            let h = Arc::new(compute_rss_matrix(&cfg, &cfg.radio_cards(), &layout).unwrap());
            let state = NetworkState::new(h, flags, cfg.rss_min_dbm).unwrap();
            let report = check_constraints(&state, &cfg);
            prop_assert!(report.rss_ok);
            prop_assert_eq!(state.connection_counts.iter().sum::<usize>(), state.served_ues());
        }
    }
}
