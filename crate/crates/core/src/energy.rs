//! Hyperspherical energy of convolutional filter banks.
//!
//! Every neuron's incoming weights are projected onto the unit sphere and the
//! bank is scored by a pairwise repulsion kernel `f_s` applied to the distance
//! between every ordered pair of projected neurons. The gradient returned with
//! each energy is taken with respect to the raw (unnormalized) weights, so it
//! can be added straight into a network's parameter gradient.
//!
//! Energies follow the ordered-pair convention: each unordered pair
//! contributes twice.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default lower bound applied to pair distances.
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-12;

/// Margin keeping the arccos argument away from ±1.
const ARCCOS_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("filter {row} has zero norm")]
    ZeroNormFilter { row: usize },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("layer {layer_id}: energy needs at least two neurons, have {effective}")]
    DegenerateBank { layer_id: usize, effective: usize },
    #[error("filter bank must have at least one row and one column, got {rows}x{cols}")]
    EmptyBank { rows: usize, cols: usize },
    #[error("layer {layer_id} contains a non-finite weight")]
    NonFinite { layer_id: usize },
    #[error("invalid MHE configuration: {0}")]
    InvalidConfig(String),
    #[error("no filter banks supplied")]
    NoBanks,
}

/// The incoming weights of one layer, one row per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Array2<f64>,
    layer_id: usize,
}

impl FilterBank {
    pub fn new(weights: Array2<f64>, layer_id: usize) -> Result<Self, EnergyError> {
        let (rows, cols) = weights.dim();
        if rows == 0 || cols == 0 {
            return Err(EnergyError::EmptyBank { rows, cols });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(EnergyError::NonFinite { layer_id });
        }
        Ok(Self { weights, layer_id })
    }

    /// Builds a bank from row vectors. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>], layer_id: usize) -> Result<Self, EnergyError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(EnergyError::InvalidConfig(
                "rows of a filter bank must have equal length".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let weights = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| EnergyError::InvalidConfig(e.to_string()))?;
        Self::new(weights, layer_id)
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }

    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    /// Number of neurons (rows).
    pub fn neurons(&self) -> usize {
        self.weights.nrows()
    }

    /// Dimension of the hypersphere the neurons live on.
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// The neurons themselves.
    Full,
    /// Neurons plus a sign-inverted virtual copy of each.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Chord length between unit vectors.
    Euclidean,
    /// Great-circle angle between unit vectors.
    Angular,
}

fn default_clamp_epsilon() -> f64 {
    DEFAULT_CLAMP_EPSILON
}

/// Selects one of the twelve MHE variants (space × distance × s).
///
/// The canonical names are `mhe_0`, `mhe_a1`, `half_mhe_2` and so on, where an
/// `a` before the power selects angular distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MheConfig {
    pub space: Space,
    pub distance: Distance,
    pub s_power: u8,
    #[serde(default = "default_clamp_epsilon")]
    pub clamp_epsilon: f64,
}

impl Default for MheConfig {
    fn default() -> Self {
        Self {
            space: Space::Full,
            distance: Distance::Euclidean,
            s_power: 0,
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
        }
    }
}

impl MheConfig {
    pub fn new(space: Space, distance: Distance, s_power: u8) -> Result<Self, EnergyError> {
        let cfg = Self {
            space,
            distance,
            s_power,
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_clamp_epsilon(mut self, eps: f64) -> Self {
        self.clamp_epsilon = eps;
        self
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.s_power > 2 {
            return Err(EnergyError::InvalidConfig(format!(
                "s_power must be 0, 1 or 2, got {}",
                self.s_power
            )));
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon.is_finite()) {
            return Err(EnergyError::InvalidConfig(format!(
                "clamp_epsilon must be positive, got {}",
                self.clamp_epsilon
            )));
        }
        Ok(())
    }

    /// All twelve valid configurations, full space first.
    pub fn all() -> Vec<MheConfig> {
        let mut out = Vec::with_capacity(12);
        for space in [Space::Full, Space::Half] {
            for distance in [Distance::Euclidean, Distance::Angular] {
                for s in 0..=2 {
                    out.push(MheConfig {
                        space,
                        distance,
                        s_power: s,
                        clamp_epsilon: DEFAULT_CLAMP_EPSILON,
                    });
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MheConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.space {
            Space::Full => "mhe_",
            Space::Half => "half_mhe_",
        };
        let angular = match self.distance {
            Distance::Euclidean => "",
            Distance::Angular => "a",
        };
        write!(f, "{prefix}{angular}{}", self.s_power)
    }
}

impl FromStr for MheConfig {
    type Err = EnergyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (space, rest) = if let Some(rest) = lower.strip_prefix("half_mhe_") {
            (Space::Half, rest)
        } else if let Some(rest) = lower.strip_prefix("mhe_") {
            (Space::Full, rest)
        } else {
            return Err(EnergyError::InvalidConfig(format!(
                "unknown MHE variant '{s}'"
            )));
        };
        let (distance, power) = match rest.strip_prefix('a') {
            Some(p) => (Distance::Angular, p),
            None => (Distance::Euclidean, rest),
        };
        let s_power: u8 = power
            .parse()
            .map_err(|_| EnergyError::InvalidConfig(format!("unknown MHE variant '{s}'")))?;
        MheConfig::new(space, distance, s_power)
    }
}

/// Energy of one bank together with its gradient with respect to the raw weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyResult {
    pub energy: f64,
    pub gradient: Array2<f64>,
    /// Ordered pairs whose distance was raised to the clamp epsilon.
    pub clamped_pairs: usize,
}

/// Normalizes every row to unit length, returning the unit rows and the
/// original norms.
pub fn project_to_sphere(
    weights: ArrayView2<'_, f64>,
    clamp_epsilon: f64,
) -> Result<(Array2<f64>, Vec<f64>), EnergyError> {
    let mut units = weights.to_owned();
    let mut norms = Vec::with_capacity(weights.nrows());
    for (row_idx, mut row) in units.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm.is_nan() || norm < clamp_epsilon {
            return Err(EnergyError::ZeroNormFilter { row: row_idx });
        }
        row.mapv_inplace(|w| w / norm);
        norms.push(norm);
    }
    Ok((units, norms))
}

/// Distance between two unit vectors, clamped below at `clamp_epsilon`.
pub fn pair_distance(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    distance: Distance,
    clamp_epsilon: f64,
) -> f64 {
    raw_distance(a, b, distance).value.max(clamp_epsilon)
}

/// The repulsion kernel: `z^-s` for `s > 0`, `-ln z` for `s = 0`.
pub fn f_s(z: f64, s_power: u8) -> Result<f64, EnergyError> {
    if z.is_nan() || z <= 0.0 {
        return Err(EnergyError::NonPositiveDistance(z));
    }
    Ok(kernel(z, s_power))
}

#[inline]
fn kernel(z: f64, s_power: u8) -> f64 {
    match s_power {
        0 => -z.ln(),
        1 => 1.0 / z,
        s => z.powi(-i32::from(s)),
    }
}

#[inline]
fn kernel_derivative(z: f64, s_power: u8) -> f64 {
    match s_power {
        0 => -1.0 / z,
        s => -f64::from(s) * z.powi(-i32::from(s) - 1),
    }
}

struct RawDistance {
    value: f64,
    /// For angular distance: the clamped dot product and whether it was clamped.
    cosine: f64,
    cosine_clamped: bool,
}

#[inline]
fn raw_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, distance: Distance) -> RawDistance {
    match distance {
        Distance::Euclidean => {
            let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            RawDistance {
                value: sq.sqrt(),
                cosine: f64::NAN,
                cosine_clamped: false,
            }
        }
        Distance::Angular => {
            let dot = a.dot(&b);
            let lo = -1.0 + ARCCOS_MARGIN;
            let hi = 1.0 - ARCCOS_MARGIN;
            let cosine = dot.clamp(lo, hi);
            RawDistance {
                value: cosine.acos(),
                cosine,
                cosine_clamped: !(lo < dot && dot < hi),
            }
        }
    }
}

/// Energy over the unordered pairs of `points` (assumed unit rows) and the
/// gradient of the ordered-pair energy with respect to the unit rows.
fn sphere_energy(points: ArrayView2<'_, f64>, cfg: &MheConfig) -> (f64, Array2<f64>, usize) {
    let n = points.nrows();
    let mut grad = Array2::<f64>::zeros(points.dim());
    let mut pair_terms = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut clamped = 0;
    for i in 0..n {
        let a = points.row(i);
        for k in (i + 1)..n {
            let b = points.row(k);
            let raw = raw_distance(a, b, cfg.distance);
            let z = if raw.value < cfg.clamp_epsilon {
                clamped += 2;
                None
            } else {
                Some(raw.value)
            };
            let z_val = z.unwrap_or(cfg.clamp_epsilon);
            pair_terms.push(kernel(z_val, cfg.s_power));

            // A clamped distance is locally constant and contributes no gradient.
            let Some(z) = z else { continue };
            // Both ordered pairs share the same derivative, hence the factor 2.
            let df = 2.0 * kernel_derivative(z, cfg.s_power);
            let (alpha, beta) = match cfg.distance {
                Distance::Euclidean => (df / z, -df / z),
                Distance::Angular => {
                    if raw.cosine_clamped {
                        continue;
                    }
                    let c = raw.cosine;
                    (0.0, -df / (1.0 - c * c).sqrt())
                }
            };
            for j in 0..points.ncols() {
                let (aj, bj) = (a[j], b[j]);
                grad[[i, j]] += alpha * aj + beta * bj;
                grad[[k, j]] += alpha * bj + beta * aj;
            }
        }
    }
    // Summing in sorted order makes the energy independent of row order.
    pair_terms.sort_by(f64::total_cmp);
    (pair_terms.iter().sum(), grad, clamped)
}

/// Raw hyperspherical energy of one bank over ordered pairs.
///
/// In half space every neuron gets a virtual twin `-w_i`; the twins take part
/// in the sum and their gradient is folded back (with inverted sign) onto the
/// real neuron.
pub fn layer_energy(bank: &FilterBank, cfg: &MheConfig) -> Result<EnergyResult, EnergyError> {
    cfg.validate()?;
    let n = bank.neurons();
    let effective = match cfg.space {
        Space::Full => n,
        Space::Half => 2 * n,
    };
    if effective < 2 {
        return Err(EnergyError::DegenerateBank {
            layer_id: bank.layer_id,
            effective,
        });
    }
    let (units, norms) = project_to_sphere(bank.weights(), cfg.clamp_epsilon)?;

    let (unordered, unit_grad, clamped_pairs) = match cfg.space {
        Space::Full => sphere_energy(units.view(), cfg),
        Space::Half => {
            let negated = units.mapv(|u| -u);
            let augmented = concatenate![Axis(0), units.view(), negated.view()];
            let (e, g, c) = sphere_energy(augmented.view(), cfg);
            let folded = &g.slice(ndarray::s![..n, ..]) - &g.slice(ndarray::s![n.., ..]);
            (e, folded, c)
        }
    };

    // d u / d w = (I - u u^T) / |w|
    let mut gradient = unit_grad;
    for ((mut g, u), &norm) in gradient
        .axis_iter_mut(Axis(0))
        .zip(units.axis_iter(Axis(0)))
        .zip(norms.iter())
    {
        let radial = g.dot(&u);
        g.zip_mut_with(&u, |gj, &uj| *gj = (*gj - radial * uj) / norm);
    }

    Ok(EnergyResult {
        energy: 2.0 * unordered,
        gradient,
        clamped_pairs,
    })
}

/// Number of neurons the energy is taken over: `N` or `2N` in half space.
pub fn effective_neurons(bank: &FilterBank, cfg: &MheConfig) -> usize {
    match cfg.space {
        Space::Full => bank.neurons(),
        Space::Half => 2 * bank.neurons(),
    }
}

/// [`layer_energy`] divided by `N'(N' - 1)`, with `N'` the effective neuron count.
pub fn normalized_layer_energy(
    bank: &FilterBank,
    cfg: &MheConfig,
) -> Result<EnergyResult, EnergyError> {
    let mut result = layer_energy(bank, cfg)?;
    let n = effective_neurons(bank, cfg) as f64;
    let scale = 1.0 / (n * (n - 1.0));
    result.energy *= scale;
    result.gradient.mapv_inplace(|g| g * scale);
    Ok(result)
}

/// The weighted regularization term summed across layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MhePenalty {
    pub penalty: f64,
    /// One gradient per input bank, already scaled by lambda.
    pub gradients: Vec<Array2<f64>>,
}

/// `lambda * sum_j normalized_layer_energy(bank_j)`.
pub fn mhe_penalty(
    banks: &[FilterBank],
    cfg: &MheConfig,
    lambda: f64,
) -> Result<MhePenalty, EnergyError> {
    if banks.is_empty() {
        return Err(EnergyError::NoBanks);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(EnergyError::InvalidConfig(format!(
            "lambda must be a finite non-negative number, got {lambda}"
        )));
    }
    cfg.validate()?;
    if lambda == 0.0 {
        return Ok(MhePenalty {
            penalty: 0.0,
            gradients: banks
                .iter()
                .map(|b| Array2::zeros(b.weights.dim()))
                .collect(),
        });
    }
    let mut total = 0.0;
    let mut gradients = Vec::with_capacity(banks.len());
    for bank in banks {
        let r = normalized_layer_energy(bank, cfg)?;
        total += r.energy;
        gradients.push(r.gradient.mapv(|g| g * lambda));
    }
    Ok(MhePenalty {
        penalty: lambda * total,
        gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn cfg(space: Space, distance: Distance, s: u8) -> MheConfig {
        MheConfig::new(space, distance, s).unwrap()
    }

    #[test]
    fn projection_examples() {
        let (u, n) = project_to_sphere(array![[3.0, 4.0]].view(), 1e-12).unwrap();
        assert_eq!(u, array![[0.6, 0.8]]);
        assert_eq!(n, vec![5.0]);

        let (u, n) = project_to_sphere(array![[1.0, 0.0], [0.0, 2.0]].view(), 1e-12).unwrap();
        assert_eq!(u, array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(n, vec![1.0, 2.0]);

        let err = project_to_sphere(array![[0.0, 0.0]].view(), 1e-12).unwrap_err();
        assert_eq!(err, EnergyError::ZeroNormFilter { row: 0 });
    }

    #[test]
    fn distance_examples() {
        let a = array![1.0, 0.0];
        let b = array![-1.0, 0.0];
        let c = array![0.0, 1.0];
        assert_eq!(
            pair_distance(a.view(), b.view(), Distance::Euclidean, 1e-12),
            2.0
        );
        let ang = pair_distance(a.view(), c.view(), Distance::Angular, 1e-12);
        assert!((ang - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(
            pair_distance(a.view(), a.view(), Distance::Euclidean, 1e-12),
            1e-12
        );
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(f_s(2.0, 1).unwrap(), 0.5);
        assert!((f_s(SQRT_2, 0).unwrap() + 0.346_573_590_279_972_7).abs() < 1e-15);
        assert_eq!(f_s(2.0, 2).unwrap(), 0.25);
        assert_eq!(f_s(0.0, 1), Err(EnergyError::NonPositiveDistance(0.0)));
        assert!(f_s(-1.0, 0).is_err());
    }

    #[test]
    fn layer_energy_examples() {
        let pair = FilterBank::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 0).unwrap();
        let r = layer_energy(&pair, &cfg(Space::Full, Distance::Euclidean, 1)).unwrap();
        assert_eq!(r.energy, 1.0);
        assert_eq!(r.clamped_pairs, 0);

        let single = FilterBank::from_rows(&[vec![1.0, 0.0]], 0).unwrap();
        let r = layer_energy(&single, &cfg(Space::Half, Distance::Euclidean, 1)).unwrap();
        assert_eq!(r.energy, 1.0);

        let ortho = FilterBank::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0).unwrap();
        let r = layer_energy(&ortho, &cfg(Space::Full, Distance::Angular, 2)).unwrap();
        assert!((r.energy - 0.810_569_469_138_702_2).abs() < 1e-12);
    }

    #[test]
    fn normalized_examples() {
        let pair = FilterBank::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 0).unwrap();
        let r = normalized_layer_energy(&pair, &cfg(Space::Full, Distance::Euclidean, 1)).unwrap();
        assert_eq!(r.energy, 0.5);
        let single = FilterBank::from_rows(&[vec![1.0, 0.0]], 0).unwrap();
        let r =
            normalized_layer_energy(&single, &cfg(Space::Half, Distance::Euclidean, 1)).unwrap();
        // 2N = 2 neurons: 1.0 / (2 * 1)
        assert_eq!(r.energy, 0.5);
    }

    #[test]
    fn degenerate_bank_is_rejected() {
        let single = FilterBank::from_rows(&[vec![1.0, 2.0]], 7).unwrap();
        let err = layer_energy(&single, &MheConfig::default()).unwrap_err();
        assert_eq!(
            err,
            EnergyError::DegenerateBank {
                layer_id: 7,
                effective: 1
            }
        );
        let err = mhe_penalty(&[single], &MheConfig::default(), 0.5).unwrap_err();
        assert_eq!(
            err,
            EnergyError::DegenerateBank {
                layer_id: 7,
                effective: 1
            }
        );
    }

    #[test]
    fn penalty_examples() {
        let c = cfg(Space::Full, Distance::Euclidean, 1);
        let a = FilterBank::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 0).unwrap();
        let b = FilterBank::from_rows(&[vec![0.0, 3.0], vec![0.0, -1.0]], 1).unwrap();
        let p = mhe_penalty(&[a.clone(), b.clone()], &c, 0.5).unwrap();
        assert_eq!(p.penalty, 0.5);

        let p = mhe_penalty(&[a, b], &c, 0.0).unwrap();
        assert_eq!(p.penalty, 0.0);
        assert!(p.gradients.iter().all(|g| g.iter().all(|&x| x == 0.0)));
        assert_eq!(mhe_penalty(&[], &c, 1.0), Err(EnergyError::NoBanks));
    }

    #[test]
    fn coincident_filters_are_clamped() {
        let bank = FilterBank::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], 0).unwrap();
        let r = layer_energy(&bank, &cfg(Space::Full, Distance::Euclidean, 1)).unwrap();
        assert_eq!(r.clamped_pairs, 2);
        assert_eq!(r.energy, 2.0e12);
        assert!(r.gradient.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn config_names_round_trip() {
        let all = MheConfig::all();
        assert_eq!(all.len(), 12);
        for c in &all {
            assert_eq!(&c.name().parse::<MheConfig>().unwrap(), c);
        }
        assert_eq!(
            "half_mhe_a2".parse::<MheConfig>().unwrap().distance,
            Distance::Angular
        );
        assert!("mhe_3".parse::<MheConfig>().is_err());
        assert!("foo".parse::<MheConfig>().is_err());
        let bad = MheConfig {
            s_power: 3,
            ..MheConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MheConfig::default().with_clamp_epsilon(0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_uses_field_names() {
        let c: MheConfig =
            serde_json::from_str(r#"{"space":"half","distance":"angular","s_power":1}"#).unwrap();
        assert_eq!(c.name(), "half_mhe_a1");
        assert_eq!(c.clamp_epsilon, DEFAULT_CLAMP_EPSILON);
    }

    #[test]
    fn bank_rejects_non_finite_and_empty() {
        assert!(FilterBank::from_rows(&[vec![f64::NAN, 1.0]], 0).is_err());
        assert!(FilterBank::new(Array2::zeros((0, 3)), 0).is_err());
    }
}
