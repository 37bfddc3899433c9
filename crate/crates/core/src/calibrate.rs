//! Affine maps from the latent space onto expert-survey dimensions.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ca::{party_centroids, party_sizes, LatentEmbedding};
use crate::error::{Error, Result};
use crate::stats::{mean_std, pearson, weighted_pearson};

/// Default ridge penalty.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// One survey dimension in one survey wave.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub wave: String,
}

impl DimensionSpec {
    pub fn new(name: impl Into<String>, wave: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            wave: wave.into(),
        }
    }

    /// Output column name, e.g. `lrgen_19` for `lrgen` in wave `2019`.
    pub fn column(&self) -> String {
        let suffix = if self.wave.len() > 2 {
            &self.wave[self.wave.len() - 2..]
        } else {
            &self.wave
        };
        format!("{}_{}", self.name, suffix)
    }

    /// Inverse of [`DimensionSpec::column`] for four-digit waves of the 2000s.
    pub fn from_column(column: &str) -> Result<Self> {
        let (name, yy) = column
            .rsplit_once('_')
            .filter(|(n, yy)| !n.is_empty() && yy.len() == 2 && yy.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| Error::InvalidArgument(format!("not a dimension column: {column}")))?;
        Ok(Self::new(name, format!("20{yy}")))
    }
}

/// The sixteen dimension/wave pairs shipped by default, in output order.
pub fn default_manifest() -> Vec<DimensionSpec> {
    [
        ("lrgen", "2019"),
        ("corrupt_salience", "2019"),
        ("people_vs_elite", "2019"),
        ("immigrate_policy", "2019"),
        ("sociallifestyle", "2019"),
        ("nationalism", "2019"),
        ("antielite_salience", "2023"),
        ("eu_position", "2023"),
        ("lrecon", "2023"),
        ("refugees", "2023"),
        ("galtan", "2023"),
        ("environment", "2019"),
        ("lrecon", "2019"),
        ("antielite_salience", "2019"),
        ("eu_position", "2019"),
        ("galtan", "2019"),
    ]
    .into_iter()
    .map(|(n, w)| DimensionSpec::new(n, w))
    .collect()
}

/// Maps a 1..7 score onto 0..10.
pub fn rescale_seven_point(x: f64) -> Result<f64> {
    if !(1.0..=7.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("seven-point score {x} outside [1, 7]")));
    }
    Ok((x - 1.0) * 10.0 / 6.0)
}

/// One row of the survey input table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub party: String,
    pub dimension: String,
    pub wave: String,
    pub score: f64,
    pub native_scale_max: u32,
}

/// Party scores of one survey wave, on the 0..10 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyReference {
    pub wave: String,
    /// Native scale maximum (7 or 10) per dimension.
    pub native_scale: BTreeMap<String, u32>,
    /// party → dimension → score.
    pub party_scores: BTreeMap<String, BTreeMap<String, f64>>,
}

impl SurveyReference {
    /// Groups rows by wave, rescaling seven-point dimensions.
    pub fn from_rows(rows: &[SurveyRow]) -> Result<BTreeMap<String, SurveyReference>> {
        let mut out: BTreeMap<String, SurveyReference> = BTreeMap::new();
        for row in rows {
            let score = match row.native_scale_max {
                7 => rescale_seven_point(row.score)?,
                10 if (0.0..=10.0).contains(&row.score) => row.score,
                10 => {
                    return Err(Error::InvalidArgument(format!(
                        "{} {} {}: score {} outside [0, 10]",
                        row.party, row.dimension, row.wave, row.score
                    )))
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "{} {}: unsupported native scale maximum {other}",
                        row.dimension, row.wave
                    )))
                }
            };
            let wave = out.entry(row.wave.clone()).or_insert_with(|| SurveyReference {
                wave: row.wave.clone(),
                native_scale: BTreeMap::new(),
                party_scores: BTreeMap::new(),
            });
            match wave.native_scale.insert(row.dimension.clone(), row.native_scale_max) {
                Some(prev) if prev != row.native_scale_max => {
                    return Err(Error::InvalidArgument(format!(
                        "{} {}: inconsistent native scale",
                        row.dimension, row.wave
                    )))
                }
                _ => {}
            }
            let slot = wave.party_scores.entry(row.party.clone()).or_default();
            if slot.insert(row.dimension.clone(), score).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate score for {} {} {}",
                    row.party, row.dimension, row.wave
                )));
            }
        }
        Ok(out)
    }

    /// Scores of every listed party on `dimension`; fails if any party lacks one.
    pub fn scores_for(&self, dimension: &str) -> Result<BTreeMap<String, f64>> {
        if !self.native_scale.contains_key(dimension) {
            return Err(Error::MissingColumn(format!("{dimension} in wave {}", self.wave)));
        }
        self.party_scores
            .iter()
            .map(|(party, dims)| {
                dims.get(dimension).map(|&s| (party.clone(), s)).ok_or_else(|| {
                    Error::EntityMismatch(format!(
                        "party {party} has no {dimension} score in wave {}",
                        self.wave
                    ))
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    /// Pearson correlation of fitted and survey scores over the fitting parties.
    pub pearson: f64,
    pub mean_abs_diff: f64,
    /// Same correlation with parties weighted by elite count, when known.
    pub weighted_pearson: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCalibration {
    pub wave: String,
    pub dimension: String,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub latent_dims_used: usize,
    pub parties: Vec<String>,
    pub fidelity: Fidelity,
}

impl AffineCalibration {
    pub fn column(&self) -> String {
        DimensionSpec::new(&self.dimension, &self.wave).column()
    }

    /// Survey-space position of one latent vector.
    pub fn apply(&self, latent: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(latent)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.intercept
    }
}

/// Ridge fit of survey scores on party centroids with an unpenalized
/// intercept, using the first `P − 1` latent dimensions for `P` matched
/// parties. Parties present in only one of the maps are ignored.
pub fn fit_affine_map(
    dimension: &DimensionSpec,
    party_latent: &BTreeMap<String, Vec<f64>>,
    party_scores: &BTreeMap<String, f64>,
    alpha: f64,
) -> Result<AffineCalibration> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge penalty {alpha} must be >= 0")));
    }
    let parties: Vec<&String> = party_latent
        .keys()
        .filter(|p| party_scores.contains_key(*p))
        .collect();
    let p = parties.len();
    if p < 3 {
        return Err(Error::InvalidArgument(format!(
            "{}: {p} matched parties, need at least 3",
            dimension.column()
        )));
    }
    let dims = p - 1;
    let k = party_latent[parties[0]].len();
    if k < dims {
        return Err(Error::InvalidArgument(format!(
            "{}: {p} parties need {dims} latent dimensions, embedding has {k}",
            dimension.column()
        )));
    }

    let x = DMatrix::from_fn(p, dims, |i, d| party_latent[parties[i]][d]);
    let y = DVector::from_iterator(p, parties.iter().map(|q| party_scores[*q]));
    let x_mean = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.add_scalar(-y_mean);

    let mut gram = xc.transpose() * &xc;
    for d in 0..dims {
        gram[(d, d)] += alpha;
    }
    let rhs = xc.transpose() * &yc;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: singular ridge system", dimension.column()))
        })?,
    };
    let intercept = y_mean - (x_mean * &w)[(0, 0)];

    let fitted: Vec<f64> = (0..p)
        .map(|i| (x.row(i) * &w)[(0, 0)] + intercept)
        .collect();
    let survey: Vec<f64> = y.iter().copied().collect();
    let fidelity = Fidelity {
        pearson: pearson(&fitted, &survey).unwrap_or(f64::NAN),
        mean_abs_diff: fitted
            .iter()
            .zip(&survey)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / p as f64,
        weighted_pearson: None,
    };

    Ok(AffineCalibration {
        wave: dimension.wave.clone(),
        dimension: dimension.name.clone(),
        weights: w.iter().copied().collect(),
        intercept,
        latent_dims_used: dims,
        parties: parties.into_iter().cloned().collect(),
        fidelity,
    })
}

/// Fits every manifest dimension against the party centroids of
/// `embedding`. Parties without survey scores are left out of the fit.
pub fn calibrate_all(
    embedding: &LatentEmbedding,
    elite_party: &HashMap<String, String>,
    surveys: &BTreeMap<String, SurveyReference>,
    manifest: &[DimensionSpec],
    alpha: f64,
) -> Result<Vec<AffineCalibration>> {
    let centroids = party_centroids(embedding, elite_party)?;
    let sizes = party_sizes(embedding, elite_party);
    manifest
        .iter()
        .map(|spec| {
            let survey = surveys
                .get(&spec.wave)
                .ok_or_else(|| Error::MissingColumn(format!("survey wave {}", spec.wave)))?;
            let scores = survey.scores_for(&spec.name)?;
            let mut cal = fit_affine_map(spec, &centroids, &scores, alpha)?;
            let fitted: Vec<f64> = cal.parties.iter().map(|p| cal.apply(&centroids[p])).collect();
            let target: Vec<f64> = cal.parties.iter().map(|p| scores[p]).collect();
            let weights: Vec<f64> = cal.parties.iter().map(|p| sizes[p] as f64).collect();
            cal.fidelity.weighted_pearson = weighted_pearson(&fitted, &target, &weights).ok();
            Ok(cal)
        })
        .collect()
}

/// Mean fidelity across calibrations: (Pearson, mean absolute difference).
pub fn mean_fidelity(calibs: &[AffineCalibration]) -> Option<(f64, f64)> {
    if calibs.is_empty() {
        return None;
    }
    let n = calibs.len() as f64;
    Some((
        calibs.iter().map(|c| c.fidelity.pearson).sum::<f64>() / n,
        calibs.iter().map(|c| c.fidelity.mean_abs_diff).sum::<f64>() / n,
    ))
}

/// Survey-space positions of a set of entities, one column per dimension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PositionTable {
    ids: Vec<String>,
    columns: Vec<String>,
    values: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PositionTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, id: String, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row for {id} has {} values, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if self.index.insert(id.clone(), self.ids.len()).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate entity {id}")));
        }
        self.ids.push(id);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, col)).collect()
    }

    /// Column by name, or a missing-column error.
    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        self.column_index(name)
            .map(|c| self.column(c))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Projects entity rows of `coords` through every calibration.
pub fn project(
    ids: &[String],
    coords: &DMatrix<f64>,
    calibs: &[AffineCalibration],
) -> Result<PositionTable> {
    let need = calibs.iter().map(|c| c.latent_dims_used).max().unwrap_or(0);
    if coords.ncols() < need {
        return Err(Error::InvalidArgument(format!(
            "calibration needs {need} latent dimensions, embedding has {}",
            coords.ncols()
        )));
    }
    let mut table = PositionTable::new(calibs.iter().map(AffineCalibration::column).collect());
    let mut latent = vec![0.0; coords.ncols()];
    let mut row = vec![0.0; calibs.len()];
    for (i, id) in ids.iter().enumerate() {
        for (d, v) in latent.iter_mut().enumerate() {
            *v = coords[(i, d)];
        }
        for (out, c) in row.iter_mut().zip(calibs) {
            *out = c.apply(&latent);
        }
        table.push(id.clone(), &row)?;
    }
    Ok(table)
}

/// Calibrated positions of both sides of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityPositions {
    pub followers: PositionTable,
    pub elites: PositionTable,
}

pub fn apply_calibration(
    embedding: &LatentEmbedding,
    calibs: &[AffineCalibration],
) -> Result<EntityPositions> {
    Ok(EntityPositions {
        followers: project(&embedding.follower_ids, &embedding.follower_coords, calibs)?,
        elites: project(&embedding.elite_ids, &embedding.elite_coords, calibs)?,
    })
}

/// Percentage of entities positioned outside `[0, 10]` on `column`.
pub fn outlier_fraction(positions: &PositionTable, column: &str) -> Result<f64> {
    let values = positions.column_by_name(column)?;
    if values.is_empty() {
        return Ok(0.0);
    }
    let out = values.iter().filter(|v| !(0.0..=10.0).contains(*v)).count();
    Ok(100.0 * out as f64 / values.len() as f64)
}

/// Mean, population standard deviation and outlier percentage of one column
/// pooled over several tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub mean: f64,
    pub std: f64,
    pub outlier_pct: f64,
    pub n: usize,
}

pub fn column_summary(tables: &[&PositionTable], column: &str) -> Result<ColumnSummary> {
    let mut values = Vec::new();
    for t in tables {
        values.extend(t.column_by_name(column)?.into_iter().filter(|v| v.is_finite()));
    }
    let (mean, std) = mean_std(&values).ok_or(Error::Empty("position column"))?;
    let out = values.iter().filter(|v| !(0.0..=10.0).contains(*v)).count();
    Ok(ColumnSummary {
        mean,
        std,
        outlier_pct: 100.0 * out as f64 / values.len() as f64,
        n: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> DimensionSpec {
        DimensionSpec::new("lrgen", "2019")
    }

    fn latent(rows: &[&[f64]]) -> BTreeMap<String, Vec<f64>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (format!("p{i}"), r.to_vec()))
            .collect()
    }

    fn scores(vals: &[f64]) -> BTreeMap<String, f64> {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| (format!("p{i}"), v))
            .collect()
    }

    #[test]
    fn seven_point_endpoints() {
        assert_eq!(rescale_seven_point(1.0).unwrap(), 0.0);
        assert_eq!(rescale_seven_point(7.0).unwrap(), 10.0);
        assert_eq!(rescale_seven_point(4.0).unwrap(), 5.0);
        assert!(rescale_seven_point(0.5).is_err());
        assert!(rescale_seven_point(7.5).is_err());
    }

    #[test]
    fn column_names_round_trip() {
        for s in default_manifest() {
            assert_eq!(DimensionSpec::from_column(&s.column()).unwrap(), s);
        }
        assert_eq!(spec().column(), "lrgen_19");
        assert!(DimensionSpec::from_column("lrgen").is_err());
        assert_eq!(default_manifest().len(), 16);
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let l = latent(&[&[0.1, 2.0, 0.0], &[-1.0, 0.3, 1.0], &[0.5, -0.7, 2.0], &[2.0, 1.0, -1.0]]);
        let s = scores(&[4.2; 4]);
        let c = fit_affine_map(&spec(), &l, &s, 1.0).unwrap();
        assert!(c.weights.iter().all(|w| w.abs() < 1e-15));
        assert!((c.intercept - 4.2).abs() < 1e-14);
        assert_eq!(c.latent_dims_used, 3);
    }

    #[test]
    fn uses_first_p_minus_one_dimensions() {
        let l = latent(&[&[0.0, 1.0, 5.0], &[1.0, 0.0, 5.0], &[2.0, 2.0, -9.0]]);
        let s = scores(&[1.0, 2.0, 3.0]);
        let c = fit_affine_map(&spec(), &l, &s, 1.0).unwrap();
        assert_eq!(c.latent_dims_used, 2);
        assert_eq!(c.weights.len(), 2);
        // the third coordinate must not matter
        assert_eq!(c.apply(&[0.5, 0.5, 1e9]), c.apply(&[0.5, 0.5]));
    }

    #[test]
    fn hand_checked_one_feature_fit() {
        // x = {-1, 0, 1} (P=3 uses 2 dims; second dim zero), y = {0, 1, 5}
        let l = latent(&[&[-1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]]);
        let s = scores(&[0.0, 1.0, 5.0]);
        let c = fit_affine_map(&spec(), &l, &s, 1.0).unwrap();
        // Sxx = 2, Sxy = 5 → w = 5 / (2 + 1); second dim has zero column
        assert!((c.weights[0] - 5.0 / 3.0).abs() < 1e-14);
        assert!(c.weights[1].abs() < 1e-15);
        assert!((c.intercept - 2.0).abs() < 1e-14);
        // latent origin maps to intercept − x̄ᵀw, here x̄ = 0
        assert!((c.apply(&[0.0, 0.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn too_few_parties_or_dimensions() {
        let l = latent(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(fit_affine_map(&spec(), &l, &scores(&[1.0, 2.0]), 1.0).is_err());
        let l = latent(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        assert!(fit_affine_map(&spec(), &l, &scores(&[1.0, 2.0, 3.0, 4.0]), 1.0).is_err());
    }

    #[test]
    fn unmatched_parties_are_ignored() {
        let mut l = latent(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0]]);
        l.insert("extra".into(), vec![100.0, 100.0]);
        let s = scores(&[1.0, 2.0, 3.0]);
        let c = fit_affine_map(&spec(), &l, &s, 1.0).unwrap();
        assert_eq!(c.parties, vec!["p0", "p1", "p2"]);
    }

    #[test]
    fn survey_rows_rescale_and_validate() {
        let row = |party: &str, dim: &str, score: f64, max: u32| SurveyRow {
            party: party.into(),
            dimension: dim.into(),
            wave: "2019".into(),
            score,
            native_scale_max: max,
        };
        let refs = SurveyReference::from_rows(&[
            row("A", "lrgen", 3.0, 10),
            row("A", "environment", 4.0, 7),
            row("B", "lrgen", 7.0, 10),
        ])
        .unwrap();
        let w = &refs["2019"];
        assert_eq!(w.party_scores["A"]["environment"], 5.0);
        assert_eq!(w.scores_for("lrgen").unwrap().len(), 2);
        assert!(matches!(w.scores_for("environment"), Err(Error::EntityMismatch(_))));
        assert!(matches!(w.scores_for("galtan"), Err(Error::MissingColumn(_))));
        assert!(SurveyReference::from_rows(&[row("A", "x", 11.0, 10)]).is_err());
        assert!(SurveyReference::from_rows(&[row("A", "x", 3.0, 5)]).is_err());
        assert!(SurveyReference::from_rows(&[row("A", "x", 3.0, 10), row("A", "x", 4.0, 10)]).is_err());
    }

    #[test]
    fn outliers_and_summary() {
        let mut t = PositionTable::new(vec!["lrgen_19".into()]);
        for (i, v) in [-1.0, 2.0, 11.0, 5.0].iter().enumerate() {
            t.push(format!("u{i}"), &[*v]).unwrap();
        }
        assert_eq!(outlier_fraction(&t, "lrgen_19").unwrap(), 50.0);
        assert!(outlier_fraction(&t, "galtan_19").is_err());
        let s = column_summary(&[&t, &t], "lrgen_19").unwrap();
        assert_eq!(s.n, 8);
        assert!((s.mean - 4.25).abs() < 1e-15);
        assert!(t.push("u0".into(), &[1.0]).is_err());
        assert!(t.push("u9".into(), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_map_positions_everyone_at_intercept() {
        let c = AffineCalibration {
            wave: "2019".into(),
            dimension: "lrgen".into(),
            weights: vec![0.0, 0.0],
            intercept: 5.0,
            latent_dims_used: 2,
            parties: vec![],
            fidelity: Fidelity {
                pearson: f64::NAN,
                mean_abs_diff: 0.0,
                weighted_pearson: None,
            },
        };
        let coords = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 0.0, 0.0]);
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let t = project(&ids, &coords, std::slice::from_ref(&c)).unwrap();
        assert!(t.column(0).iter().all(|&v| v == 5.0));
        let narrow = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(project(&ids[..1], &narrow, &[c]).is_err());
    }
}
