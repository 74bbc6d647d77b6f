//! JSON descriptions of winds and fields, and the experiment configuration
//! shared by the command-line runner.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::killing::{Generator, KillingField};
use crate::space::SpaceDescriptor;
use crate::{Error, Result};

/// One Killing generator on one factor.
///
/// ```json
/// {"type": "hopf", "factor": 0, "c": 0.3}
/// {"type": "euclidean-const", "factor": 1, "v": [0.5, 0.0]}
/// {"type": "group-left", "l": [0.3, 0.0, 0.0]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Hopf {
        #[serde(default)]
        factor: usize,
        c: f64,
    },
    SphereSkew {
        #[serde(default)]
        factor: usize,
        matrix: Vec<Vec<f64>>,
    },
    EuclideanConst {
        #[serde(default)]
        factor: usize,
        v: Vec<f64>,
    },
    EuclideanAffine {
        #[serde(default)]
        factor: usize,
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        v: Option<Vec<f64>>,
    },
    GroupLeft {
        #[serde(default)]
        factor: usize,
        l: [f64; 3],
    },
    GroupRight {
        #[serde(default)]
        factor: usize,
        r: [f64; 3],
    },
    Group {
        #[serde(default)]
        factor: usize,
        l: [f64; 3],
        r: [f64; 3],
    },
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("generator matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl FieldSpec {
    pub fn to_field(&self, space: &SpaceDescriptor) -> Result<KillingField> {
        let zero = KillingField::zero(space);
        let group = |factor: usize, l: [f64; 3], r: [f64; 3]| {
            zero.clone().with_generator(factor, Generator::Group { left: Vector3::from(l), right: Vector3::from(r) })
        };
        match self {
            FieldSpec::Zero => Ok(zero),
            FieldSpec::Hopf { factor, c } => KillingField::hopf(space, *factor, *c),
            FieldSpec::SphereSkew { factor, matrix: m } => zero.with_generator(*factor, Generator::Sphere(matrix(m)?)),
            FieldSpec::EuclideanConst { factor, v } => KillingField::translation(space, *factor, DVector::from_column_slice(v)),
            FieldSpec::EuclideanAffine { factor, matrix: m, v } => {
                let rotation = matrix(m)?;
                let translation = v.as_ref().map_or_else(|| DVector::zeros(rotation.nrows()), |v| DVector::from_column_slice(v));
                zero.with_generator(*factor, Generator::Euclidean { rotation, translation })
            }
            FieldSpec::GroupLeft { factor, l } => group(*factor, *l, [0.0; 3]),
            FieldSpec::GroupRight { factor, r } => group(*factor, [0.0; 3], *r),
            FieldSpec::Group { factor, l, r } => group(*factor, *l, *r),
        }
    }
}

/// A field as a single generator or a list whose generators are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindSpec {
    One(FieldSpec),
    Many(Vec<FieldSpec>),
}

impl Default for WindSpec {
    fn default() -> Self {
        WindSpec::One(FieldSpec::Zero)
    }
}

impl WindSpec {
    pub fn to_field(&self, space: &SpaceDescriptor) -> Result<KillingField> {
        match self {
            WindSpec::One(spec) => spec.to_field(space),
            WindSpec::Many(specs) => specs
                .iter()
                .try_fold(KillingField::zero(space), |acc, spec| Ok(acc.add(&spec.to_field(space)?))),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&KillingField> for WindSpec {
    /// One spec per non-zero factor generator, so the result rebuilds the field.
    fn from(field: &KillingField) -> Self {
        let specs = field
            .generators()
            .iter()
            .enumerate()
            .filter_map(|(factor, g)| match g {
                Generator::Euclidean { rotation, translation } if rotation.norm() == 0.0 => {
                    (translation.norm() > 0.0).then(|| FieldSpec::EuclideanConst { factor, v: translation.as_slice().to_vec() })
                }
                Generator::Euclidean { rotation, translation } => Some(FieldSpec::EuclideanAffine {
                    factor,
                    matrix: rows(rotation),
                    v: Some(translation.as_slice().to_vec()),
                }),
                Generator::Sphere(a) => (a.norm() > 0.0).then(|| FieldSpec::SphereSkew { factor, matrix: rows(a) }),
                Generator::Group { left, right } => (left.norm() + right.norm() > 0.0).then(|| FieldSpec::Group {
                    factor,
                    l: [left.x, left.y, left.z],
                    r: [right.x, right.y, right.z],
                }),
            })
            .collect::<Vec<_>>();
        if specs.is_empty() {
            WindSpec::One(FieldSpec::Zero)
        } else {
            WindSpec::Many(specs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    pub points: usize,
    pub directions: usize,
    pub triples: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self { points: 100, directions: 50, triples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative displacement spread for the CW verdict.
    pub cw: f64,
    pub exhaustion: f64,
    pub connect: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cw: crate::cw::CW_TOL, exhaustion: crate::cw::EXHAUSTION_TOL, connect: crate::cw::CONNECT_TOL }
    }
}

/// Subcommand parameters; each command reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<WindSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Oracle comparisons appended to a CW report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_checks: Option<usize>,
    /// Acceptance criteria run by `selftest`; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceDescriptor,
    #[serde(default)]
    pub wind: WindSpec,
    pub seed: u64,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn new(space: SpaceDescriptor, wind: WindSpec, seed: u64) -> Self {
        Self {
            space,
            wind,
            seed,
            samples: Samples::default(),
            tolerances: Tolerances::default(),
            out: None,
            workers: None,
            params: Params::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [("cw", t.cw), ("exhaustion", t.exhaustion), ("connect", t.connect)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.wind.to_field(&self.space)?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wind_specs_build_fields() {
        let s3e2 = SpaceDescriptor::product([SpaceDescriptor::sphere(3, 1.0).unwrap(), SpaceDescriptor::euclidean(2).unwrap()]).unwrap();
        let spec: WindSpec = serde_json::from_str(
            r#"[{"type":"hopf","c":0.3},{"type":"euclidean-const","factor":1,"v":[0.5,0.0]}]"#,
        )
        .unwrap();
        let field = spec.to_field(&s3e2).unwrap();
        let expected = KillingField::hopf(&s3e2, 0, 0.3)
            .unwrap()
            .add(&KillingField::translation(&s3e2, 1, DVector::from_column_slice(&[0.5, 0.0])).unwrap());
        assert_eq!(field, expected);

        let g = SpaceDescriptor::su2(1.0).unwrap();
        let spec: WindSpec = serde_json::from_str(r#"{"type":"group-left","l":[0.3,0,0]}"#).unwrap();
        assert_eq!(
            spec.to_field(&g).unwrap().generator(0),
            &Generator::Group { left: Vector3::new(0.3, 0.0, 0.0), right: Vector3::zeros() }
        );
    }

    #[test]
    fn fields_convert_back_to_specs() {
        let space = SpaceDescriptor::product([
            SpaceDescriptor::sphere(3, 1.0).unwrap(),
            SpaceDescriptor::su2(2.0).unwrap(),
            SpaceDescriptor::euclidean(2).unwrap(),
        ])
        .unwrap();
        let field = KillingField::hopf(&space, 0, 0.3)
            .unwrap()
            .with_generator(1, Generator::Group { left: Vector3::new(0.1, 0.0, 0.2), right: Vector3::new(0.0, 0.3, 0.0) })
            .unwrap()
            .add(&KillingField::translation(&space, 2, DVector::from_column_slice(&[0.5, -0.1])).unwrap());
        let spec = WindSpec::from(&field);
        let text = serde_json::to_string(&spec).unwrap();
        let back: WindSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_field(&space).unwrap(), field);
        assert_eq!(WindSpec::from(&KillingField::zero(&space)), WindSpec::One(FieldSpec::Zero));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let not_skew: WindSpec = serde_json::from_str(r#"{"type":"sphere-skew","matrix":[[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#).unwrap();
        assert!(not_skew.to_field(&s3).is_err());
        let wrong_factor: WindSpec = serde_json::from_str(r#"{"type":"euclidean-const","v":[1,0]}"#).unwrap();
        assert!(wrong_factor.to_field(&s3).is_err());
        assert!(serde_json::from_str::<WindSpec>(r#"{"type":"hopf","c":0.3,"extra":1}"#).is_err());
    }

    #[test]
    fn config_round_trips_exactly() {
        let mut config = ExperimentConfig::new(
            SpaceDescriptor::sphere(3, 1.0).unwrap(),
            WindSpec::One(FieldSpec::Hopf { factor: 0, c: 0.1 + 0.2 }),
            42,
        );
        config.params.point = Some(vec![1.0 / 3.0, 2f64.sqrt(), -0.0, 1e-300]);
        config.tolerances.cw = 1.0 / 7.0;
        let text = config.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.hash(), config.hash());
        let p = back.params.point.unwrap();
        assert_eq!(p[0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(p[2].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn seed_is_mandatory_and_tolerances_positive() {
        assert!(ExperimentConfig::from_json(r#"{"space":{"kind":"euclidean","n":2}}"#).is_err());
        let ok = r#"{"space":{"kind":"euclidean","n":2},"seed":1}"#;
        assert!(ExperimentConfig::from_json(ok).is_ok());
        let bad = r#"{"space":{"kind":"euclidean","n":2},"seed":1,"tolerances":{"cw":0,"exhaustion":1e-6,"connect":1e-6}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }
}
