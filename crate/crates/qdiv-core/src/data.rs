//! Synthetic spurious-correlation datasets and tabular CSV ingestion.
//!
//! The generator mirrors the classic distractor-token construction: a core
//! feature block that genuinely predicts the label, plus a spurious block
//! whose presence is tied to one label with probability `bias_rate`. Groups
//! are the (attribute x label) cross product, id `g = attr * C + label`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis, concatenate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assigner::GroupAssignment;
use crate::error::{Error, Result};

/// A feature matrix with class labels and optional group bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub true_group: Option<Vec<usize>>,
    pub spurious_attr: Option<Vec<u8>>,
    pub num_classes: usize,
    /// Number of true groups; 0 when `true_group` is absent.
    pub group_count: usize,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        true_group: Option<Vec<usize>>,
        spurious_attr: Option<Vec<u8>>,
        num_classes: usize,
        group_count: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::dim("dataset labels", n, labels.len()));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be >= 1"));
        }
        if let Some(y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(
                "label",
                format!("label {y} out of range for {num_classes} classes"),
            ));
        }
        if let Some(groups) = &true_group {
            if groups.len() != n {
                return Err(Error::dim("dataset groups", n, groups.len()));
            }
            if group_count == 0 {
                return Err(Error::invalid("group_count", "must be >= 1 when groups are present"));
            }
            if let Some(g) = groups.iter().find(|&&g| g >= group_count) {
                return Err(Error::invalid(
                    "group",
                    format!("group {g} out of range for {group_count} groups"),
                ));
            }
        } else if group_count != 0 {
            return Err(Error::invalid("group_count", "must be 0 when groups are absent"));
        }
        if let Some(attr) = &spurious_attr {
            if attr.len() != n {
                return Err(Error::dim("dataset attributes", n, attr.len()));
            }
            if attr.iter().any(|&a| a > 1) {
                return Err(Error::invalid("attr", "spurious attribute must be 0 or 1"));
            }
            // With both columns present the bookkeeping convention is fixed.
            if let Some(groups) = &true_group {
                for i in 0..n {
                    let expect = attr[i] as usize * num_classes + labels[i];
                    if groups[i] != expect {
                        return Err(Error::invalid(
                            "group",
                            format!("row {i}: group {} != attr*C+label = {expect}", groups[i]),
                        ));
                    }
                }
            }
        }
        Ok(Dataset {
            features,
            labels,
            true_group,
            spurious_attr,
            num_classes,
            group_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows selected by index, preserving all columns.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            true_group: self
                .true_group
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i]).collect()),
            spurious_attr: self
                .spurious_attr
                .as_ref()
                .map(|a| indices.iter().map(|&i| a[i]).collect()),
            num_classes: self.num_classes,
            group_count: self.group_count,
        }
    }
}

/// Parameters of the biased two-class generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_per_class: usize,
    pub core_dim: usize,
    pub spurious_dim: usize,
    /// Probability that a label-0 example carries the spurious block
    /// (label-1 examples carry it with probability `1 - bias_rate`).
    pub bias_rate: f64,
    pub core_strength: f64,
    pub spurious_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        // Strong, clean spurious block against a moderately informative core:
        // the regime where plain ERM collapses on the minority groups.
        GeneratorSpec {
            n_per_class: 2500,
            core_dim: 5,
            spurious_dim: 5,
            bias_rate: 0.95,
            core_strength: 0.5,
            spurious_strength: 2.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::invalid("n_per_class", "must be >= 1"));
        }
        if self.core_dim == 0 || self.spurious_dim == 0 {
            return Err(Error::invalid("feature dims", "core_dim and spurious_dim must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.bias_rate) {
            return Err(Error::invalid("bias_rate", "must lie in [0, 1]"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be >= 0"));
        }
        if !self.core_strength.is_finite() || !self.spurious_strength.is_finite() {
            return Err(Error::invalid("signal strength", "must be finite"));
        }
        Ok(())
    }
}

/// Two-class dataset with a controllable spurious correlation.
///
/// Core block: `N(+-core_strength, sigma^2)` per coordinate, sign set by the
/// label. Spurious block: additive offset `spurious_strength` per coordinate
/// when the attribute is present, pure noise otherwise. Groups and attribute
/// columns are always populated (m = 4).
pub fn generate_biased(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .expect("sigma validated");
    let n = 2 * spec.n_per_class;
    let d = spec.core_dim + spec.spurious_dim;
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut attrs = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for label in 0..2usize {
        let p_attr = if label == 0 { spec.bias_rate } else { 1.0 - spec.bias_rate };
        for _ in 0..spec.n_per_class {
            let i = labels.len();
            let attr = u8::from(rng.random_range(0.0..1.0) < p_attr);
            let core_mean = if label == 1 { spec.core_strength } else { -spec.core_strength };
            for j in 0..spec.core_dim {
                features[(i, j)] = core_mean + noise(&normal, spec.noise_sigma, &mut rng);
            }
            let sp_mean = f64::from(attr) * spec.spurious_strength;
            for j in 0..spec.spurious_dim {
                features[(i, spec.core_dim + j)] = sp_mean + noise(&normal, spec.noise_sigma, &mut rng);
            }
            labels.push(label);
            attrs.push(attr);
            groups.push(attr as usize * 2 + label);
        }
    }
    Dataset::new(features, labels, Some(groups), Some(attrs), 2, 4)
}

fn noise<R: Rng + ?Sized>(normal: &Normal<f64>, sigma: f64, rng: &mut R) -> f64 {
    // sigma = 0 still consumes a draw so the stream layout is stable.
    let v = normal.sample(rng);
    if sigma == 0.0 {
        0.0
    } else {
        v
    }
}

/// Replace each label with a uniformly random different class with
/// probability `flip_rate`; group ids follow the new labels.
pub fn inject_label_noise(data: &Dataset, flip_rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=0.5).contains(&flip_rate) {
        return Err(Error::invalid("flip_rate", "must lie in [0, 0.5]"));
    }
    let mut out = data.clone();
    if flip_rate == 0.0 {
        return Ok(out);
    }
    let c = data.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..out.len() {
        if rng.random_range(0.0..1.0) < flip_rate {
            let offset = rng.random_range(1..c);
            out.labels[i] = (out.labels[i] + offset) % c;
            if let Some(groups) = out.true_group.as_mut() {
                // Recover the attribute from the old group id, then re-derive.
                let attr = groups[i] / c;
                groups[i] = attr * c + out.labels[i];
            }
        }
    }
    Ok(out)
}

/// Distribution-shift variants of the generator's test distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftKind {
    /// Bias rate becomes `1 - rho`: minority and majority roles swap.
    AttrFlip,
    /// Bias rate 0.5: the spurious attribute carries no label information.
    AttrBalance,
    /// The spurious feature block is zeroed out entirely.
    CoreOnly,
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attr_flip" => Ok(ShiftKind::AttrFlip),
            "attr_balance" => Ok(ShiftKind::AttrBalance),
            "core_only" => Ok(ShiftKind::CoreOnly),
            other => Err(Error::invalid(
                "shift",
                format!("unknown shift tag {other:?}; expected attr_flip, attr_balance or core_only"),
            )),
        }
    }
}

impl std::fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            ShiftKind::AttrFlip => "attr_flip",
            ShiftKind::AttrBalance => "attr_balance",
            ShiftKind::CoreOnly => "core_only",
        };
        write!(f, "{tag}")
    }
}

/// Out-of-distribution test set where the training-time spurious correlation
/// no longer holds.
pub fn shift_testset(spec: &GeneratorSpec, shift: ShiftKind) -> Result<Dataset> {
    match shift {
        ShiftKind::AttrFlip => {
            // Complement every attribute draw: the bias rate becomes exactly
            // 1 - rho and minority/majority roles swap count for count.
            let mut data = generate_biased(spec)?;
            let attrs = data.spurious_attr.as_mut().expect("generator populates attrs");
            let groups = data.true_group.as_mut().expect("generator populates groups");
            for i in 0..attrs.len() {
                let old = f64::from(attrs[i]);
                attrs[i] = 1 - attrs[i];
                groups[i] = attrs[i] as usize * 2 + data.labels[i];
                for j in spec.core_dim..spec.core_dim + spec.spurious_dim {
                    data.features[(i, j)] += spec.spurious_strength * (1.0 - 2.0 * old);
                }
            }
            Ok(data)
        }
        ShiftKind::AttrBalance => {
            let mut balanced = spec.clone();
            balanced.bias_rate = 0.5;
            generate_biased(&balanced)
        }
        ShiftKind::CoreOnly => {
            let mut data = generate_biased(spec)?;
            for i in 0..data.len() {
                for j in spec.core_dim..spec.core_dim + spec.spurious_dim {
                    data.features[(i, j)] = 0.0;
                }
            }
            Ok(data)
        }
    }
}

/// Contingency table of example counts per (group, label) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    /// `counts[g][y]`
    pub counts: Vec<Vec<usize>>,
}

impl CountTable {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }
}

/// Counts per (group, label), from the dataset's own groups or from a
/// supplied assignment (minority = group 0, majority = group 1).
pub fn group_counts(data: &Dataset, assignment: Option<&GroupAssignment>) -> Result<CountTable> {
    let (ids, m): (Vec<usize>, usize) = match (assignment, &data.true_group) {
        (Some(a), _) => {
            if a.len() != data.len() {
                return Err(Error::dim("assignment", data.len(), a.len()));
            }
            (a.hard.iter().map(|&h| h as usize).collect(), 2)
        }
        (None, Some(groups)) => (groups.clone(), data.group_count),
        (None, None) => return Err(Error::MissingGroups),
    };
    let mut counts = vec![vec![0usize; data.num_classes]; m];
    for (&g, &y) in ids.iter().zip(&data.labels) {
        counts[g][y] += 1;
    }
    Ok(CountTable { counts })
}

/// Column names for CSV ingestion; feature columns are always `feat_<i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRoles {
    pub label: String,
    pub group: String,
    pub attr: String,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles {
            label: "label".into(),
            group: "group".into(),
            attr: "attr".into(),
        }
    }
}

/// Floating-point formatting used in every CSV this crate writes: 17
/// significant digits, enough to reproduce any f64 bit pattern on parse.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize a dataset in the tabular interchange format:
/// `feat_0..feat_{d-1}, label[, group, attr]`, UTF-8, `.` decimal point.
pub fn to_csv_string(data: &Dataset) -> String {
    let d = data.dim();
    let mut out = String::new();
    for j in 0..d {
        let _ = write!(out, "feat_{j},");
    }
    out.push_str("label");
    if data.true_group.is_some() {
        out.push_str(",group");
    }
    if data.spurious_attr.is_some() {
        out.push_str(",attr");
    }
    out.push('\n');
    for i in 0..data.len() {
        for j in 0..d {
            let _ = write!(out, "{},", format_f64(data.features[(i, j)]));
        }
        let _ = write!(out, "{}", data.labels[i]);
        if let Some(groups) = &data.true_group {
            let _ = write!(out, ",{}", groups[i]);
        }
        if let Some(attrs) = &data.spurious_attr {
            let _ = write!(out, ",{}", attrs[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv_string(data))?;
    Ok(())
}

/// Parse a dataset from CSV text. `path` is used only in error messages.
pub fn parse_csv(text: &str, roles: &ColumnRoles, path: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::CsvFile {
        path: path.into(),
        message: "empty file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut feat_cols: Vec<(usize, usize)> = Vec::new(); // (feature index, column position)
    let mut label_col = None;
    let mut group_col = None;
    let mut attr_col = None;
    for (pos, name) in columns.iter().enumerate() {
        if let Some(idx) = name.strip_prefix("feat_") {
            let idx: usize = idx.parse().map_err(|_| Error::CsvFile {
                path: path.into(),
                message: format!("bad feature column name {name:?}"),
            })?;
            feat_cols.push((idx, pos));
        } else if *name == roles.label {
            label_col = Some(pos);
        } else if *name == roles.group {
            group_col = Some(pos);
        } else if *name == roles.attr {
            attr_col = Some(pos);
        } else {
            return Err(Error::CsvFile {
                path: path.into(),
                message: format!("unexpected column {name:?}"),
            });
        }
    }
    let label_col = label_col.ok_or_else(|| Error::CsvFile {
        path: path.into(),
        message: format!("missing label column {:?}", roles.label),
    })?;
    feat_cols.sort_unstable();
    for (expect, &(idx, _)) in feat_cols.iter().enumerate() {
        if idx != expect {
            return Err(Error::CsvFile {
                path: path.into(),
                message: format!("feature columns must be feat_0..feat_{}, missing feat_{expect}", feat_cols.len() - 1),
            });
        }
    }
    if feat_cols.is_empty() {
        return Err(Error::CsvFile {
            path: path.into(),
            message: "no feature columns".into(),
        });
    }

    let d = feat_cols.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut groups: Vec<usize> = Vec::new();
    let mut attrs: Vec<u8> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::CsvFile {
                path: path.into(),
                message: format!("line {}: expected {} fields, got {}", lineno + 1, columns.len(), fields.len()),
            });
        }
        let cell_err = |column: &str, message: String| Error::CsvCell {
            path: path.into(),
            row: lineno + 1,
            column: column.into(),
            message,
        };
        for &(idx, pos) in &feat_cols {
            let v: f64 = fields[pos]
                .parse()
                .map_err(|_| cell_err(&format!("feat_{idx}"), format!("unparseable number {:?}", fields[pos])))?;
            rows.push(v);
        }
        let y: usize = fields[label_col]
            .parse()
            .map_err(|_| cell_err(&roles.label, format!("unparseable label {:?}", fields[label_col])))?;
        labels.push(y);
        if let Some(pos) = group_col {
            let g: usize = fields[pos]
                .parse()
                .map_err(|_| cell_err(&roles.group, format!("unparseable group {:?}", fields[pos])))?;
            groups.push(g);
        }
        if let Some(pos) = attr_col {
            let a: u8 = fields[pos]
                .parse()
                .map_err(|_| cell_err(&roles.attr, format!("unparseable attribute {:?}", fields[pos])))?;
            attrs.push(a);
        }
    }
    if labels.is_empty() {
        return Err(Error::CsvFile {
            path: path.into(),
            message: "no data rows".into(),
        });
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), rows).expect("row width checked");
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let group_count = if group_col.is_some() {
        groups.iter().max().copied().unwrap_or(0) + 1
    } else {
        0
    };
    Dataset::new(
        features,
        labels,
        group_col.map(|_| groups),
        attr_col.map(|_| attrs),
        num_classes,
        group_count,
    )
}

/// Load a dataset from a CSV file using the declared column roles.
pub fn load_csv(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<Dataset> {
    let display = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&path)?;
    parse_csv(&text, roles, &display)
}

/// Concatenate two feature matrices row-wise.
pub(crate) fn vstack_features(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(0), &[a.view(), b.view()]).expect("equal widths")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va.sqrt() * vb.sqrt())
    }

    fn attr_label_correlation(data: &Dataset) -> f64 {
        let attrs: Vec<f64> = data.spurious_attr.as_ref().unwrap().iter().map(|&a| f64::from(a)).collect();
        let labels: Vec<f64> = data.labels.iter().map(|&y| y as f64).collect();
        pearson(&attrs, &labels)
    }

    #[test]
    fn unbiased_rate_gives_near_zero_correlation() {
        let spec = GeneratorSpec {
            bias_rate: 0.5,
            n_per_class: 2000,
            ..GeneratorSpec::default()
        };
        let data = generate_biased(&spec).unwrap();
        assert!(attr_label_correlation(&data).abs() < 0.05);
    }

    #[test]
    fn biased_rate_puts_five_percent_in_each_minority_group() {
        let spec = GeneratorSpec {
            n_per_class: 2000,
            ..GeneratorSpec::default()
        };
        let data = generate_biased(&spec).unwrap();
        let table = group_counts(&data, None).unwrap();
        // Minority cells: (attr=0, label=0) -> g0 and (attr=1, label=1) -> g3.
        let frac_g0 = table.counts[0][0] as f64 / 2000.0;
        let frac_g3 = table.counts[3][1] as f64 / 2000.0;
        assert!((frac_g0 - 0.05).abs() <= 0.02, "g0 fraction {frac_g0}");
        assert!((frac_g3 - 0.05).abs() <= 0.02, "g3 fraction {frac_g3}");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = GeneratorSpec::default();
        let a = to_csv_string(&generate_biased(&spec).unwrap());
        let b = to_csv_string(&generate_biased(&spec).unwrap());
        assert_eq!(a, b);
        let other = GeneratorSpec { seed: 1, ..spec };
        assert_ne!(a, to_csv_string(&generate_biased(&other).unwrap()));
    }

    #[test]
    fn marginal_label_balance_is_exact() {
        let spec = GeneratorSpec { n_per_class: 137, ..GeneratorSpec::default() };
        let data = generate_biased(&spec).unwrap();
        for y in 0..2 {
            assert_eq!(data.labels.iter().filter(|&&l| l == y).count(), 137);
        }
    }

    #[test]
    fn zero_flip_rate_is_identity() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 50, ..GeneratorSpec::default() }).unwrap();
        let noisy = inject_label_noise(&data, 0.0, 9).unwrap();
        assert_eq!(noisy, data);
    }

    #[test]
    fn flip_rate_matches_flipped_fraction() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 5000, ..GeneratorSpec::default() }).unwrap();
        let noisy = inject_label_noise(&data, 0.2, 42).unwrap();
        let flipped = data
            .labels
            .iter()
            .zip(&noisy.labels)
            .filter(|(a, b)| a != b)
            .count() as f64
            / data.len() as f64;
        assert!((flipped - 0.2).abs() <= 0.02, "flipped {flipped}");
        // Groups stay consistent with the new labels.
        let groups = noisy.true_group.as_ref().unwrap();
        let attrs = noisy.spurious_attr.as_ref().unwrap();
        for i in 0..noisy.len() {
            assert_eq!(groups[i], attrs[i] as usize * 2 + noisy.labels[i]);
        }
    }

    #[test]
    fn half_flip_rate_destroys_label_information() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 5000, ..GeneratorSpec::default() }).unwrap();
        let noisy = inject_label_noise(&data, 0.5, 7).unwrap();
        let flipped = data
            .labels
            .iter()
            .zip(&noisy.labels)
            .filter(|(a, b)| a != b)
            .count() as f64
            / data.len() as f64;
        assert!((flipped - 0.5).abs() <= 0.02, "flipped {flipped}");
        // Old and new labels are nearly independent: correlation ~ 0.
        let old: Vec<f64> = data.labels.iter().map(|&y| y as f64).collect();
        let new: Vec<f64> = noisy.labels.iter().map(|&y| y as f64).collect();
        assert!(pearson(&old, &new).abs() < 0.05);
    }

    #[test]
    fn flip_rate_out_of_range_errors() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 10, ..GeneratorSpec::default() }).unwrap();
        assert!(inject_label_noise(&data, 0.6, 0).is_err());
        assert!(inject_label_noise(&data, -0.1, 0).is_err());
    }

    #[test]
    fn noise_preserves_shape_for_any_rate() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 100, ..GeneratorSpec::default() }).unwrap();
        for rate in [0.0, 0.1, 0.3, 0.5] {
            let noisy = inject_label_noise(&data, rate, 3).unwrap();
            assert_eq!(noisy.len(), data.len());
            assert_eq!(noisy.dim(), data.dim());
            assert_eq!(noisy.num_classes, data.num_classes);
        }
    }

    #[test]
    fn attr_balance_shift_removes_the_correlation() {
        let spec = GeneratorSpec { n_per_class: 2000, ..GeneratorSpec::default() };
        let data = shift_testset(&spec, ShiftKind::AttrBalance).unwrap();
        assert!(attr_label_correlation(&data).abs() < 0.05);
    }

    #[test]
    fn core_only_shift_zeroes_the_spurious_block() {
        let spec = GeneratorSpec { n_per_class: 100, ..GeneratorSpec::default() };
        let data = shift_testset(&spec, ShiftKind::CoreOnly).unwrap();
        for i in 0..data.len() {
            for j in spec.core_dim..spec.core_dim + spec.spurious_dim {
                assert_eq!(data.features[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn attr_flip_swaps_minority_and_majority_counts() {
        let spec = GeneratorSpec { n_per_class: 2000, ..GeneratorSpec::default() };
        let base = group_counts(&generate_biased(&spec).unwrap(), None).unwrap();
        let flipped = group_counts(&shift_testset(&spec, ShiftKind::AttrFlip).unwrap(), None).unwrap();
        // Same seed, mirrored attribute draws: cell (a, y) swaps with (1-a, y).
        for y in 0..2 {
            assert_eq!(base.counts[y][y], flipped.counts[2 + y][y]);
            assert_eq!(base.counts[2 + y][y], flipped.counts[y][y]);
        }
    }

    #[test]
    fn unknown_shift_tag_is_rejected() {
        assert!("sideways".parse::<ShiftKind>().is_err());
        assert_eq!("attr_flip".parse::<ShiftKind>().unwrap(), ShiftKind::AttrFlip);
    }

    #[test]
    fn spurious_only_probe_is_at_chance_on_core_only() {
        use crate::model::{forward, Architecture, ModelParams};
        let spec = GeneratorSpec { n_per_class: 1000, ..GeneratorSpec::default() };
        // Hand-built classifier that looks only at the spurious block:
        // attr present pushes class 0 (the biased pairing).
        let d = spec.core_dim + spec.spurious_dim;
        let mut probe = ModelParams::zeros(Architecture::Linear, d, 2);
        for j in spec.core_dim..d {
            probe.layers[0].weight[(0, j)] = 1.0;
            probe.layers[0].weight[(1, j)] = -1.0;
        }
        probe.layers[0].bias[1] = spec.spurious_strength * spec.spurious_dim as f64 / 2.0;
        probe.layers[0].bias[0] = -probe.layers[0].bias[1];
        // Sanity: on the biased training distribution the probe is far above chance.
        let train = generate_biased(&spec).unwrap();
        let acc = |data: &Dataset| {
            let pred = forward(&probe, data.features.view()).unwrap();
            pred.argmax()
                .iter()
                .zip(&data.labels)
                .filter(|(a, b)| a == b)
                .count() as f64
                / data.len() as f64
        };
        assert!(acc(&train) > 0.85);
        let shifted = shift_testset(&spec, ShiftKind::CoreOnly).unwrap();
        let chance = acc(&shifted);
        assert!((chance - 0.5).abs() <= 0.03, "core-only accuracy {chance}");
    }

    #[test]
    fn handwritten_csv_round_trips_exactly() {
        let text = "feat_0,feat_1,label,group,attr\n\
                    1.5e0,-2.0e0,0,2,1\n\
                    2.5e-1,3.0e0,1,1,0\n\
                    -1.0e0,0.0e0,0,0,0\n";
        let data = parse_csv(text, &ColumnRoles::default(), "test.csv").unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.features[(0, 0)], 1.5);
        assert_eq!(data.features[(1, 1)], 3.0);
        assert_eq!(data.labels, vec![0, 1, 0]);
        assert_eq!(data.true_group.as_ref().unwrap(), &vec![2, 1, 0]);
        assert_eq!(data.spurious_attr.as_ref().unwrap(), &vec![1, 0, 0]);
    }

    #[test]
    fn csv_without_group_column_loads_without_groups() {
        let text = "feat_0,label\n0.5e0,1\n1.5e0,0\n";
        let data = parse_csv(text, &ColumnRoles::default(), "t.csv").unwrap();
        assert!(data.true_group.is_none());
        assert_eq!(data.group_count, 0);
    }

    #[test]
    fn generated_dataset_survives_write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = generate_biased(&GeneratorSpec { n_per_class: 200, ..GeneratorSpec::default() }).unwrap();
        write_csv(&data, &path).unwrap();
        let loaded = load_csv(&path, &ColumnRoles::default()).unwrap();
        assert_eq!(loaded, data);
    }

    #[test]
    fn csv_error_messages_name_row_and_column() {
        let text = "feat_0,label\nnot_a_number,1\n";
        let err = parse_csv(text, &ColumnRoles::default(), "bad.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("feat_0"), "{msg}");

        let text = "feat_0,something\n1.0,2\n";
        let err = parse_csv(text, &ColumnRoles::default(), "bad.csv").unwrap_err();
        assert!(err.to_string().contains("unexpected column"));

        let text = "feat_0,group\n1.0,2\n";
        let err = parse_csv(text, &ColumnRoles::default(), "bad.csv").unwrap_err();
        assert!(err.to_string().contains("missing label column"));

        let err = parse_csv("", &ColumnRoles::default(), "empty.csv").unwrap_err();
        assert!(err.to_string().contains("empty file"));
    }

    #[test]
    fn single_group_dataset_has_one_nonzero_cell() {
        let features = Array2::zeros((4, 2));
        let data = Dataset::new(features, vec![1; 4], Some(vec![0; 4]), None, 2, 1).unwrap();
        let table = group_counts(&data, None).unwrap();
        assert_eq!(table.counts, vec![vec![0, 4]]);
        assert_eq!(table.total(), 4);
    }

    #[test]
    fn biased_group_counts_match_construction_probabilities() {
        let spec = GeneratorSpec { n_per_class: 2000, ..GeneratorSpec::default() };
        let data = generate_biased(&spec).unwrap();
        let table = group_counts(&data, None).unwrap();
        assert_eq!(table.total(), data.len());
        // Construction-probability oracle: per (attr, label) cell,
        // expected count = n_per_class * P(attr | label).
        let n = spec.n_per_class as f64;
        let expect = [
            (0usize, 0usize, n * (1.0 - spec.bias_rate)), // minority: label 0 without the attr
            (1, 1, n * spec.bias_rate),
            (2, 0, n * spec.bias_rate),
            (3, 1, n * (1.0 - spec.bias_rate)), // minority: label 1 with the attr
        ];
        for (g, y, e) in expect {
            let got = table.counts[g][y] as f64;
            assert!((got - e).abs() <= 0.02 * n, "cell ({g},{y}): got {got}, expected {e}");
        }
    }

    #[test]
    fn counts_sum_to_n_for_assignment_groups() {
        let data = generate_biased(&GeneratorSpec { n_per_class: 50, ..GeneratorSpec::default() }).unwrap();
        let p: Vec<f64> = (0..data.len()).map(|i| if i % 3 == 0 { 0.9 } else { 0.1 }).collect();
        let assignment = GroupAssignment::new(p).unwrap();
        let table = group_counts(&data, Some(&assignment)).unwrap();
        assert_eq!(table.total(), data.len());
        assert_eq!(table.counts.len(), 2);
    }

    #[test]
    fn group_counts_without_any_source_errors() {
        let data = Dataset::new(Array2::zeros((2, 1)), vec![0, 1], None, None, 2, 0).unwrap();
        assert!(matches!(group_counts(&data, None).unwrap_err(), Error::MissingGroups));
    }
}
