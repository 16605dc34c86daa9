use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// One candidate value of a discrete dimension.
///
/// The string `"None"` is an ordinary categorical token, not a null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    /// Parses a bare token the way table files and prompt answers spell values.
    pub fn parse_token(raw: &str) -> Scalar {
        let token = raw.trim();
        if let Ok(i) = token.parse::<i64>() {
            return Scalar::Int(i);
        }
        if let Ok(f) = token.parse::<f64>() {
            if f.is_finite() {
                return Scalar::Float(f);
            }
        }
        Scalar::Str(token.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Float(f) => Some(*f),
            Scalar::Str(_) => None,
        }
    }

    /// Loose equality used when matching model-written values: identical
    /// text, or equal numbers when both sides are numeric.
    pub fn matches_token(&self, token: &str) -> bool {
        let token = token.trim();
        if self.to_string() == token {
            return true;
        }
        match (self.as_f64(), Scalar::parse_token(token).as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(i) => write!(f, "{i}"),
            // Debug keeps the trailing ".0" so 1.0 and 1 never print alike.
            Scalar::Float(x) => write!(f, "{x:?}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Str(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub values: Vec<Scalar>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, values: Vec<Scalar>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn position(&self, value: &Scalar) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// An assignment of one value per dimension, in dimension order.
pub type TrialConfig = IndexMap<String, Scalar>;

/// Renders a config as `{a=1, b=x}`.
pub fn format_config(config: &TrialConfig) -> String {
    let body = config
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{{{body}}}")
}

/// Cartesian product of named discrete dimensions.
///
/// Configurations are numbered in lexicographic order with the last dimension
/// varying fastest; that number is the stable identity used everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, ModelError> {
        if dimensions.is_empty() {
            return Err(ModelError::EmptySpace);
        }
        for (i, dim) in dimensions.iter().enumerate() {
            if dim.values.is_empty() {
                return Err(ModelError::EmptyDimension(dim.name.clone()));
            }
            if dimensions[..i].iter().any(|d| d.name == dim.name) {
                return Err(ModelError::DuplicateDimension(dim.name.clone()));
            }
            for (j, v) in dim.values.iter().enumerate() {
                if let Scalar::Float(x) = v {
                    if !x.is_finite() {
                        return Err(ModelError::NonFiniteValue(dim.name.clone()));
                    }
                }
                if dim.values[..j].contains(v) {
                    return Err(ModelError::DuplicateValue {
                        dimension: dim.name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(Self { dimensions })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dimensions.iter().map(|d| d.name.as_str())
    }

    pub fn cardinality(&self) -> usize {
        self.dimensions.iter().map(|d| d.values.len()).product()
    }

    /// Config at enumeration `number`, or `None` past the end.
    pub fn config_at(&self, number: usize) -> Option<TrialConfig> {
        let positions = self.positions_at(number)?;
        Some(
            self.dimensions
                .iter()
                .zip(positions)
                .map(|(d, p)| (d.name.clone(), d.values[p].clone()))
                .collect(),
        )
    }

    /// Per-dimension value indices of config `number`.
    pub fn positions_at(&self, number: usize) -> Option<Vec<usize>> {
        if number >= self.cardinality() {
            return None;
        }
        let mut rem = number;
        let mut out = vec![0; self.dimensions.len()];
        for (slot, dim) in out.iter_mut().zip(&self.dimensions).rev() {
            let k = dim.values.len();
            *slot = rem % k;
            rem /= k;
        }
        Some(out)
    }

    pub fn number_of_positions(&self, positions: &[usize]) -> usize {
        positions
            .iter()
            .zip(&self.dimensions)
            .fold(0, |acc, (&p, d)| acc * d.values.len() + p)
    }

    /// Enumeration number of a config whose keys and values belong to this space.
    pub fn number_of(&self, config: &TrialConfig) -> Result<usize, ModelError> {
        self.validate(config)?;
        let positions: Vec<usize> = self
            .dimensions
            .iter()
            .map(|d| d.position(&config[d.name.as_str()]).expect("validated"))
            .collect();
        Ok(self.number_of_positions(&positions))
    }

    pub fn validate(&self, config: &TrialConfig) -> Result<(), ModelError> {
        for key in config.keys() {
            if self.dimension(key).is_none() {
                return Err(ModelError::UnknownDimension(key.clone()));
            }
        }
        for dim in &self.dimensions {
            let value = config
                .get(&dim.name)
                .ok_or_else(|| ModelError::MissingDimension(dim.name.clone()))?;
            if dim.position(value).is_none() {
                return Err(ModelError::ValueNotInSpace {
                    dimension: dim.name.clone(),
                    value: value.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn enumerate(&self) -> Vec<TrialConfig> {
        (0..self.cardinality())
            .map(|n| self.config_at(n).expect("in range"))
            .collect()
    }
}

impl<'de> Deserialize<'de> for SearchSpace {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dimensions: Vec<Dimension>,
        }
        let raw = Raw::deserialize(de)?;
        SearchSpace::new(raw.dimensions).map_err(serde::de::Error::custom)
    }
}

/// Convenience for tests and generators: `space(&[("a", vec![1.into(), 2.into()])])`.
pub fn space_from(dims: &[(&str, Vec<Scalar>)]) -> Result<SearchSpace, ModelError> {
    SearchSpace::new(
        dims.iter()
            .map(|(n, v)| Dimension::new(*n, v.clone()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&i| Scalar::Int(i)).collect()
    }

    fn boston() -> SearchSpace {
        space_from(&[
            ("n-estimators", ints(&[100, 200, 300])),
            (
                "max-depth",
                vec!["None".into(), Scalar::Int(10), Scalar::Int(20)],
            ),
            ("min-samples-split", ints(&[2, 5, 10])),
            ("min-samples-leaf", ints(&[1, 2, 5])),
            ("max-features", vec!["sqrt".into(), "log2".into()]),
        ])
        .unwrap()
    }

    #[test]
    fn boston_cardinality() {
        assert_eq!(boston().cardinality(), 162);
    }

    #[test]
    fn singleton_and_grid_cardinality() {
        let one = space_from(&[("a", ints(&[7]))]).unwrap();
        assert_eq!(one.cardinality(), 1);
        assert_eq!(one.enumerate().len(), 1);
        let grid = space_from(&[("x", ints(&[0, 1, 2, 3, 4])), ("y", ints(&[0, 1, 2, 3, 4]))])
            .unwrap();
        assert_eq!(grid.cardinality(), 25);
    }

    #[test]
    fn last_dimension_varies_fastest() {
        let s = space_from(&[("a", ints(&[1, 2])), ("b", vec!["x".into(), "y".into()])]).unwrap();
        let got: Vec<String> = s.enumerate().iter().map(format_config).collect();
        assert_eq!(got, ["{a=1, b=x}", "{a=1, b=y}", "{a=2, b=x}", "{a=2, b=y}"]);
    }

    #[test]
    fn rejects_invalid_spaces() {
        assert!(matches!(
            space_from(&[("a", vec![])]),
            Err(ModelError::EmptyDimension(_))
        ));
        assert!(matches!(
            space_from(&[("a", ints(&[1, 1]))]),
            Err(ModelError::DuplicateValue { .. })
        ));
        assert!(matches!(
            space_from(&[("a", ints(&[1])), ("a", ints(&[2]))]),
            Err(ModelError::DuplicateDimension(_))
        ));
    }

    #[test]
    fn none_is_a_plain_token() {
        let s = boston();
        let cfg = s.config_at(0).unwrap();
        assert_eq!(cfg["max-depth"], Scalar::Str("None".into()));
        assert!(Scalar::Str("None".into()).matches_token("None"));
    }

    #[test]
    fn validate_reports_the_offending_key() {
        let s = boston();
        let mut cfg = s.config_at(5).unwrap();
        cfg.insert("max-depth".into(), Scalar::Int(15));
        assert!(matches!(
            s.validate(&cfg),
            Err(ModelError::ValueNotInSpace { ref dimension, .. }) if dimension == "max-depth"
        ));
        cfg.shift_remove("max-depth");
        assert!(matches!(s.validate(&cfg), Err(ModelError::MissingDimension(_))));
    }

    #[test]
    fn float_display_is_unambiguous() {
        assert_eq!(Scalar::Float(1.0).to_string(), "1.0");
        assert_eq!(Scalar::Int(1).to_string(), "1");
        assert!(Scalar::Float(0.1).matches_token("0.10"));
        assert!(!Scalar::Str("sqrt".into()).matches_token("log2"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_space() -> impl Strategy<Value = SearchSpace> {
            prop::collection::vec(1usize..5, 1..5).prop_map(|sizes| {
                let dims = sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| {
                        Dimension::new(format!("d{i}"), (0..k as i64).map(Scalar::Int).collect())
                    })
                    .collect();
                SearchSpace::new(dims).unwrap()
            })
        }

        proptest! {
            #[test]
            fn enumeration_is_a_bijection(space in arb_space()) {
                let all = space.enumerate();
                prop_assert_eq!(all.len(), space.cardinality());
                for (n, cfg) in all.iter().enumerate() {
                    prop_assert_eq!(space.number_of(cfg).unwrap(), n);
                }
                let again = space.enumerate();
                prop_assert_eq!(
                    serde_json::to_string(&all).unwrap(),
                    serde_json::to_string(&again).unwrap()
                );
            }
        }
    }
}
