//! Component kinds and their batch evaluation.
//!
//! A [`Component`] is a function node reading one input slot of a
//! [`Dataset`]. Pre-trained components are frozen; non-instantiated ones keep
//! trainable parameters that only the trainer mutates. External pre-trained
//! models are represented by the outputs they produced (`Table`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::{Dataset, OutputVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    Values(Vec<f64>),
    /// A dataset column of precomputed outputs, by full CSV name (`c<j>_<name>`).
    Column(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ComponentKind {
    /// `f0 ≡ 1`.
    ConstantOne,
    Affine {
        weights: Vec<f64>,
        bias: f64,
    },
    /// `w11 * σ(w0 · x + w00) + w10`.
    OneHiddenLayer {
        inner_weights: Vec<f64>,
        inner_bias: f64,
        outer_weight: f64,
        outer_bias: f64,
        activation: Activation,
    },
    Table(TableSource),
}

impl ComponentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ComponentKind::ConstantOne => "constant_one",
            ComponentKind::Affine { .. } => "affine",
            ComponentKind::OneHiddenLayer { .. } => "one_hidden_layer",
            ComponentKind::Table(_) => "table",
        }
    }

    /// Kinds without parameters are frozen for life.
    pub fn is_parametric(&self) -> bool {
        matches!(
            self,
            ComponentKind::Affine { .. } | ComponentKind::OneHiddenLayer { .. }
        )
    }

    fn input_dim(&self) -> Option<usize> {
        match self {
            ComponentKind::Affine { weights, .. } => Some(weights.len()),
            ComponentKind::OneHiddenLayer { inner_weights, .. } => Some(inner_weights.len()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    id: String,
    #[serde(default)]
    slot: usize,
    #[serde(default)]
    frozen: Option<bool>,
    #[serde(flatten)]
    kind: ComponentKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComponentDoc", into = "ComponentDoc")]
pub struct Component {
    id: String,
    slot: usize,
    frozen: bool,
    kind: ComponentKind,
}

impl TryFrom<ComponentDoc> for Component {
    type Error = Error;

    fn try_from(doc: ComponentDoc) -> Result<Self> {
        let parametric = doc.kind.is_parametric();
        if doc.frozen == Some(false) && !parametric {
            return Err(Error::Config(format!(
                "component {:?}: {} components are always frozen",
                doc.id,
                doc.kind.name()
            )));
        }
        let c = Component {
            id: doc.id,
            slot: doc.slot,
            frozen: doc.frozen.unwrap_or(true),
            kind: doc.kind,
        };
        c.check_params()?;
        Ok(c)
    }
}

impl From<Component> for ComponentDoc {
    fn from(c: Component) -> Self {
        ComponentDoc {
            id: c.id,
            slot: c.slot,
            frozen: Some(c.frozen),
            kind: c.kind,
        }
    }
}

impl Component {
    pub fn new(id: impl Into<String>, slot: usize, kind: ComponentKind, frozen: bool) -> Result<Self> {
        let c = Component {
            id: id.into(),
            slot,
            frozen: frozen || !kind.is_parametric(),
            kind,
        };
        c.check_params()?;
        Ok(c)
    }

    pub fn constant_one() -> Self {
        Component {
            id: "f0".into(),
            slot: 0,
            frozen: true,
            kind: ComponentKind::ConstantOne,
        }
    }

    pub fn table(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, 0, ComponentKind::Table(TableSource::Values(values)), true)
    }

    pub fn table_column(id: impl Into<String>, column: impl Into<String>) -> Self {
        Component {
            id: id.into(),
            slot: 0,
            frozen: true,
            kind: ComponentKind::Table(TableSource::Column(column.into())),
        }
    }

    pub fn affine(id: impl Into<String>, slot: usize, weights: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(id, slot, ComponentKind::Affine { weights, bias }, false)
    }

    pub fn one_hidden_layer(
        id: impl Into<String>,
        slot: usize,
        inner_weights: Vec<f64>,
        inner_bias: f64,
        outer_weight: f64,
        outer_bias: f64,
        activation: Activation,
    ) -> Result<Self> {
        Self::new(
            id,
            slot,
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                outer_bias,
                activation,
            },
            false,
        )
    }

    /// A trainable affine or one-hidden-layer component with zero parameters.
    pub fn zeroed(id: impl Into<String>, slot: usize, input_dim: usize, hidden: Option<Activation>) -> Self {
        let kind = match hidden {
            None => ComponentKind::Affine {
                weights: vec![0.0; input_dim],
                bias: 0.0,
            },
            Some(activation) => ComponentKind::OneHiddenLayer {
                inner_weights: vec![0.0; input_dim],
                inner_bias: 0.0,
                outer_weight: 0.0,
                outer_bias: 0.0,
                activation,
            },
        };
        Component {
            id: id.into(),
            slot,
            frozen: false,
            kind,
        }
    }

    fn check_params(&self) -> Result<()> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("component parameters"));
        }
        if let ComponentKind::Table(TableSource::Values(v)) = &self.kind {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("table outputs"));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Marks the component pre-trained. Parameters are left untouched.
    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Parameters in the fixed layout used for gradients:
    /// affine `[w.., b]`, one-hidden-layer `[w0.., w00, w11, w10]`.
    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            ComponentKind::Affine { weights, bias } => {
                let mut p = weights.clone();
                p.push(*bias);
                p
            }
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                outer_bias,
                ..
            } => {
                let mut p = inner_weights.clone();
                p.extend([*inner_bias, *outer_weight, *outer_bias]);
                p
            }
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.kind {
            ComponentKind::Affine { weights, .. } => weights.len() + 1,
            ComponentKind::OneHiddenLayer { inner_weights, .. } => inner_weights.len() + 3,
            _ => 0,
        }
    }

    pub(crate) fn param_mut(&mut self, index: usize) -> &mut f64 {
        match &mut self.kind {
            ComponentKind::Affine { weights, bias } => {
                let d = weights.len();
                if index < d {
                    &mut weights[index]
                } else {
                    assert_eq!(index, d, "affine parameter index out of range");
                    bias
                }
            }
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                outer_bias,
                ..
            } => {
                let d = inner_weights.len();
                match index.checked_sub(d) {
                    None => &mut inner_weights[index],
                    Some(0) => inner_bias,
                    Some(1) => outer_weight,
                    Some(2) => outer_bias,
                    Some(_) => panic!("one-hidden-layer parameter index out of range"),
                }
            }
            _ => panic!("component {} has no parameters", self.id),
        }
    }

    /// Draws every parameter uniformly from `[-r, r]`, `r = 1/sqrt(fan_in)`.
    /// The outer weight of a one-hidden-layer net has fan-in one.
    pub fn reinitialize(&mut self, rng: &mut impl Rng) {
        match &mut self.kind {
            ComponentKind::Affine { weights, bias } => {
                let r = 1.0 / (weights.len().max(1) as f64).sqrt();
                for w in weights.iter_mut() {
                    *w = rng.random_range(-r..=r);
                }
                *bias = rng.random_range(-r..=r);
            }
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                outer_bias,
                ..
            } => {
                let r = 1.0 / (inner_weights.len().max(1) as f64).sqrt();
                for w in inner_weights.iter_mut() {
                    *w = rng.random_range(-r..=r);
                }
                *inner_bias = rng.random_range(-r..=r);
                *outer_weight = rng.random_range(-1.0..=1.0);
                *outer_bias = rng.random_range(-1.0..=1.0);
            }
            _ => {}
        }
    }

    fn inputs<'a>(&self, data: &'a Dataset) -> Result<&'a crate::data::FeatureMatrix> {
        let m = data.slot(self.slot).ok_or_else(|| {
            Error::Dataset(format!(
                "component {} reads slot {} but the dataset has {} slots",
                self.id,
                self.slot,
                data.slots()
            ))
        })?;
        if let Some(d) = self.kind.input_dim() {
            if m.cols() != d {
                return Err(Error::Dimension {
                    what: "component input width",
                    expected: d,
                    got: m.cols(),
                });
            }
        }
        Ok(m)
    }

    fn table_values(&self, data: &Dataset) -> Result<Vec<f64>> {
        let values = match &self.kind {
            ComponentKind::Table(TableSource::Values(v)) => v.clone(),
            ComponentKind::Table(TableSource::Column(name)) => data
                .column(name)
                .ok_or_else(|| Error::Dataset(format!("component {}: no column {name:?}", self.id)))?,
            _ => unreachable!("table_values on a non-table component"),
        };
        if values.len() != data.n() {
            return Err(Error::Dimension {
                what: "table outputs",
                expected: data.n(),
                got: values.len(),
            });
        }
        Ok(values)
    }

    /// Evaluates the component on the given records of `data`.
    pub fn evaluate_batch(&self, data: &Dataset, records: &[usize]) -> Result<Vec<f64>> {
        match &self.kind {
            ComponentKind::ConstantOne => Ok(vec![1.0; records.len()]),
            ComponentKind::Table(_) => {
                let all = self.table_values(data)?;
                Ok(records.iter().map(|&i| all[i]).collect())
            }
            ComponentKind::Affine { weights, bias } => {
                let m = self.inputs(data)?;
                Ok(records
                    .iter()
                    .map(|&i| crate::data::dot(weights, m.row(i)) + bias)
                    .collect())
            }
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                outer_bias,
                activation,
            } => {
                let m = self.inputs(data)?;
                Ok(records
                    .iter()
                    .map(|&i| {
                        let z = crate::data::dot(inner_weights, m.row(i)) + inner_bias;
                        outer_weight * activation.eval(z) + outer_bias
                    })
                    .collect())
            }
        }
    }

    /// Evaluates the component on its own slot for every record.
    pub fn evaluate(&self, data: &Dataset) -> Result<OutputVector> {
        let all: Vec<usize> = (0..data.n()).collect();
        OutputVector::new(self.evaluate_batch(data, &all)?)
    }

    /// Evaluates the component on an explicit slot.
    pub fn evaluate_on(&self, data: &Dataset, slot: usize) -> Result<OutputVector> {
        let mut c = self.clone();
        c.slot = slot;
        c.evaluate(data)
    }

    /// Adds `sum_b adjoint[b] * d f(x_b) / d param` into `grad` (one entry per parameter).
    pub(crate) fn accumulate_gradient(
        &self,
        data: &Dataset,
        records: &[usize],
        adjoint: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        match &self.kind {
            ComponentKind::Affine { weights, .. } => {
                let m = self.inputs(data)?;
                let d = weights.len();
                for (&i, &a) in records.iter().zip(adjoint) {
                    for (g, x) in grad[..d].iter_mut().zip(m.row(i)) {
                        *g += a * x;
                    }
                    grad[d] += a;
                }
            }
            ComponentKind::OneHiddenLayer {
                inner_weights,
                inner_bias,
                outer_weight,
                activation,
                ..
            } => {
                let m = self.inputs(data)?;
                let d = inner_weights.len();
                for (&i, &a) in records.iter().zip(adjoint) {
                    let x = m.row(i);
                    let z = crate::data::dot(inner_weights, x) + inner_bias;
                    let dz = a * outer_weight * activation.derivative(z);
                    for (g, xv) in grad[..d].iter_mut().zip(x) {
                        *g += dz * xv;
                    }
                    grad[d] += dz;
                    grad[d + 1] += a * activation.eval(z);
                    grad[d + 2] += a;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Returns a frozen copy of `c` with byte-identical parameters.
pub fn freeze_component(c: &Component) -> Component {
    c.clone().freeze()
}

/// Evaluates `c` on input slot `slot` for every record of `data`.
pub fn evaluate_component(c: &Component, data: &Dataset, slot: usize) -> Result<OutputVector> {
    c.evaluate_on(data, slot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Dataset::new(vec![FeatureMatrix::from_rows(&rows).unwrap()], targets).unwrap()
    }

    #[test]
    fn constant_one_is_all_ones() {
        let data = Dataset::targets_only(vec![3.0, 1.0, 2.0]).unwrap();
        let out = Component::constant_one().evaluate(&data).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_inner_weights_give_half_logistic() {
        let data = random_dataset(5, 3, 1);
        let c = Component::one_hidden_layer("h", 0, vec![0.0; 3], 0.0, 2.0, 1.0, Activation::Logistic).unwrap();
        for v in c.evaluate(&data).unwrap().iter() {
            assert_eq!(*v, 2.0);
        }
    }

    #[test]
    fn one_hidden_layer_matches_per_record_formula() {
        let data = random_dataset(20, 4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for act in [Activation::Logistic, Activation::Tanh] {
            let mut c = Component::zeroed("h", 0, 4, Some(act));
            c.reinitialize(&mut rng);
            let p = c.params();
            let out = c.evaluate(&data).unwrap();
            for i in 0..data.n() {
                let x = data.slot(0).unwrap().row(i);
                let mut z = p[4];
                for k in 0..4 {
                    z += p[k] * x[k];
                }
                let sigma = match act {
                    Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
                    _ => z.tanh(),
                };
                let expected = p[5] * sigma + p[6];
                assert!((out[i] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_hidden_layer_equals_composed_affine() {
        let data = random_dataset(30, 3, 3);
        let w0 = vec![0.4, -1.3, 2.2];
        let (w00, w11, w10) = (0.7, -1.9, 0.25);
        let h = Component::one_hidden_layer("h", 0, w0.clone(), w00, w11, w10, Activation::Identity).unwrap();
        let a = Component::affine("a", 0, w0.iter().map(|w| w11 * w).collect(), w11 * w00 + w10).unwrap();
        let (oh, oa) = (h.evaluate(&data).unwrap(), a.evaluate(&data).unwrap());
        for i in 0..data.n() {
            assert!((oh[i] - oa[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn freezing_is_idempotent_and_keeps_parameters() {
        let c = Component::affine("a", 0, vec![1.5, -0.5], 0.1).unwrap();
        let once = freeze_component(&c);
        assert!(once.is_frozen());
        assert_eq!(once.params(), c.params());
        assert_eq!(freeze_component(&once), once);
        let data = random_dataset(4, 2, 0);
        assert_eq!(once.evaluate(&data).unwrap(), once.evaluate(&data).unwrap());
    }

    #[test]
    fn table_round_trips_and_checks_length() {
        let values = vec![0.5, -2.0, 3.25];
        let c = Component::table("t", values.clone()).unwrap();
        let data = Dataset::targets_only(vec![0.0; 3]).unwrap();
        assert_eq!(c.evaluate(&data).unwrap().into_inner(), values);
        let short = Dataset::targets_only(vec![0.0; 2]).unwrap();
        assert!(matches!(c.evaluate(&short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = random_dataset(4, 2, 0);
        let c = Component::affine("a", 0, vec![1.0; 3], 0.0).unwrap();
        assert!(matches!(c.evaluate(&data), Err(Error::Dimension { .. })));
        let c = Component::affine("a", 4, vec![1.0; 2], 0.0).unwrap();
        assert!(matches!(c.evaluate(&data), Err(Error::Dataset(_))));
    }

    #[test]
    fn json_document_shape() {
        let c = Component::affine("a", 1, vec![1.0, 2.0], 0.5).unwrap().freeze();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["id"], "a");
        assert_eq!(v["kind"], "affine");
        assert_eq!(v["frozen"], true);
        assert_eq!(v["params"]["bias"], 0.5);
        let back: Component = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);

        let t: Component = serde_json::from_str(r#"{"id":"t","kind":"table","params":{"column":"c2_out"}}"#).unwrap();
        assert!(t.is_frozen());
        let bad = serde_json::from_str::<Component>(r#"{"id":"one","kind":"constant_one","frozen":false}"#);
        assert!(bad.is_err());
    }
}
