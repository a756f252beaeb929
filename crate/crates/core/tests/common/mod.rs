//! Instance generators and oracles shared by the integration tests.
//! The oracles avoid the library's solvers: least squares goes through an
//! SVD pseudo-inverse, gradients through central differences.

#![allow(dead_code)]

use compnet::graph::ParamRef;
use compnet::{Activation, Component, CompositeGraph, Dataset, FeatureMatrix, GlueNode, OuterAffine, OutputVector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Targets and `K` component outputs with i.i.d. standard normal entries;
/// the returned outputs start with the constant one.
pub fn gaussian_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<OutputVector>, Vec<f64>) {
    let y = normal_vec(rng, n);
    let mut outputs = vec![OutputVector::ones(n)];
    for _ in 0..k {
        outputs.push(OutputVector::new(normal_vec(rng, n)).unwrap());
    }
    (outputs, y)
}

pub fn design_matrix(outputs: &[OutputVector]) -> DMatrix<f64> {
    let n = outputs[0].len();
    DMatrix::from_fn(n, outputs.len(), |i, j| outputs[j].as_slice()[i])
}

/// Minimum-norm least squares through the SVD pseudo-inverse.
pub fn pinv_least_squares(outputs: &[OutputVector], y: &[f64]) -> (Vec<f64>, f64) {
    let f = design_matrix(outputs);
    let pinv = f.clone().pseudo_inverse(1e-12).unwrap();
    let theta = &pinv * DVector::from_column_slice(y);
    let residual = &f * &theta - DVector::from_column_slice(y);
    (theta.iter().copied().collect(), residual.norm_squared())
}

/// Plain elementwise sum of squared differences.
pub fn sse_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Two-slot dataset with normal features.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dims: &[usize]) -> Dataset {
    let inputs = dims
        .iter()
        .map(|&d| {
            let names = (1..=d).map(|i| format!("x{i}")).collect();
            FeatureMatrix::new(names, n, normal_vec(rng, n * d)).unwrap()
        })
        .collect();
    Dataset::new(inputs, normal_vec(rng, n)).unwrap()
}

fn random_component(rng: &mut ChaCha8Rng, data: &Dataset, id: String) -> Component {
    let slot = rng.random_range(0..data.slots());
    let d = data.slot(slot).unwrap().cols();
    let w = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let c = match rng.random_range(0..4) {
        0 => Component::affine(id, slot, w(rng, d), rng.random_range(-1.0..1.0)).unwrap(),
        1 => Component::table(id, normal_vec(rng, data.n())).unwrap(),
        k => {
            let act = if k == 2 { Activation::Logistic } else { Activation::Tanh };
            Component::one_hidden_layer(
                id,
                slot,
                w(rng, d),
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
                act,
            )
            .unwrap()
        }
    };
    if rng.random_bool(0.3) {
        c.freeze()
    } else {
        c
    }
}

fn random_glue(rng: &mut ChaCha8Rng, children: usize) -> GlueNode {
    let theta = (0..=children).map(|_| rng.random_range(-1.0..1.0)).collect();
    let activation = [Activation::Identity, Activation::Logistic, Activation::Tanh][rng.random_range(0..3)];
    let outer = (!activation.is_identity() && rng.random_bool(0.5)).then(|| OuterAffine {
        scale: rng.random_range(0.5..2.0),
        offset: rng.random_range(-1.0..1.0),
        anchor: rng.random_range(-0.5..0.5),
    });
    GlueNode {
        children: Vec::new(),
        theta,
        activation,
        outer,
        frozen: rng.random_bool(0.2),
    }
}

/// A random graph of depth `depth`: each layer glues the previous one with
/// one to three fresh components.
pub fn random_graph(rng: &mut ChaCha8Rng, data: &Dataset, depth: usize) -> CompositeGraph {
    let mut next_id = 0;
    let mut fresh = |rng: &mut ChaCha8Rng| {
        next_id += 1;
        CompositeGraph::leaf(random_component(rng, data, format!("c{next_id}")))
    };
    let first: Vec<CompositeGraph> = (0..rng.random_range(1..=3)).map(|_| fresh(rng)).collect();
    let n = first.len();
    let mut g = CompositeGraph::glue(first, random_glue(rng, n)).unwrap();
    for _ in 1..depth {
        let mut children = vec![g];
        for _ in 0..rng.random_range(1..=2) {
            children.push(fresh(rng));
        }
        let n = children.len();
        g = CompositeGraph::glue(children, random_glue(rng, n)).unwrap();
    }
    g
}

/// Central difference of the full-data SSE in parameter `p`.
pub fn finite_difference(g: &CompositeGraph, data: &Dataset, p: ParamRef, step: f64) -> f64 {
    let mut plus = g.clone();
    let mut minus = g.clone();
    let v = g.param(p);
    plus.set_param(p, v + step).unwrap();
    minus.set_param(p, v - step).unwrap();
    (plus.sse(data).unwrap() - minus.sse(data).unwrap()) / (2.0 * step)
}

/// `|a − b| / max(|a|, |b|, 1)`: relative, with an absolute floor for
/// gradients near zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest eigenvalue of `FᵀF`.
pub fn gram_lambda_max(outputs: &[OutputVector]) -> f64 {
    let f = design_matrix(outputs);
    (f.transpose() * f).symmetric_eigen().eigenvalues.max()
}
