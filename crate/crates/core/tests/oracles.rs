mod common;

use common::*;
use compnet::scaled::{build_scaled_plan, evaluate_scaled, wrap_stack, ActivationProfile};
use compnet::stacker::{build_gram_system, combine, loss_gradient};
use compnet::trainer::{initialize_trainable, GlueInit};
use compnet::{
    add_depth, add_width, backprop_gradients, sgd_train, stack, total_loss, Activation, Component, CompositeGraph,
    Dataset, GlueNode, OuterAffine, OutputVector, TrainConfig,
};

#[test]
fn total_loss_matches_direct_summation() {
    let mut r = rng(1);
    let a = normal_vec(&mut r, 16);
    let b = normal_vec(&mut r, 16);
    assert!(close(total_loss(&a, &b).unwrap(), sse_oracle(&a, &b), 1e-12));
}

#[test]
fn gram_matches_double_loop() {
    let (outputs, y) = gaussian_instance(&mut rng(2), 8, 3);
    let sys = build_gram_system(&outputs, &y).unwrap();
    for s in 0..4 {
        for t in 0..4 {
            let mut g = 0.0;
            for i in 0..8 {
                g += outputs[s].as_slice()[i] * outputs[t].as_slice()[i];
            }
            assert!(close(sys.get(s, t), g, 1e-12));
        }
    }
}

#[test]
fn optimum_matches_pseudo_inverse() {
    let (outputs, y) = gaussian_instance(&mut rng(3), 32, 4);
    let sol = stack(&outputs, &y).unwrap();
    let (theta, sse) = pinv_least_squares(&outputs, &y);
    for (a, b) in sol.theta.iter().zip(&theta) {
        assert!(close(*a, *b, 1e-8));
    }
    assert!(close(sol.sse, sse, 1e-8));
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut r = rng(4);
    let (outputs, y) = gaussian_instance(&mut r, 20, 3);
    let theta = normal_vec(&mut r, 4);
    let grad = loss_gradient(&theta, &outputs, &y).unwrap();
    let h = 1e-5;
    for j in 0..4 {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += h;
        minus[j] -= h;
        let fd = (sse_oracle(&combine(&plus, &outputs), &y) - sse_oracle(&combine(&minus, &outputs), &y)) / (2.0 * h);
        assert!(
            (grad[j] - fd).abs() <= 1e-6 * grad[j].abs().max(fd.abs()),
            "{j}: {} vs {fd}",
            grad[j]
        );
    }
}

#[test]
fn hidden_layer_matches_per_record_formula() {
    let mut r = rng(5);
    let data = random_dataset(&mut r, 25, &[3]);
    let w = normal_vec(&mut r, 3);
    let (b, w11, w10) = (0.3, -1.7, 0.4);
    for act in [Activation::Logistic, Activation::Tanh] {
        let c = Component::one_hidden_layer("h", 0, w.clone(), b, w11, w10, act).unwrap();
        let out = c.evaluate(&data).unwrap();
        let x = data.slot(0).unwrap();
        for i in 0..data.n() {
            let z: f64 = x.row(i).iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + b;
            let s = match act {
                Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
                _ => z.tanh(),
            };
            assert!(close(out.as_slice()[i], w11 * s + w10, 1e-12));
        }
    }
}

#[test]
fn depth_two_graph_matches_hand_expansion() {
    let mut r = rng(6);
    let data = random_dataset(&mut r, 30, &[2, 2]);
    let f1 = Component::affine("f1", 0, vec![0.5, -1.0], 0.2).unwrap();
    let f2 = Component::one_hidden_layer("f2", 1, vec![1.5, 0.3], -0.1, 2.0, 0.5, Activation::Tanh).unwrap();
    let f3 = Component::affine("f3", 1, vec![-0.7, 0.9], 1.0).unwrap();
    let inner = CompositeGraph::glue(
        vec![CompositeGraph::leaf(f1.clone()), CompositeGraph::leaf(f2.clone())],
        GlueNode {
            children: vec![],
            theta: vec![0.1, 0.8, -0.6],
            activation: Activation::Logistic,
            outer: None,
            frozen: false,
        },
    )
    .unwrap();
    let outer = CompositeGraph::glue(
        vec![inner, CompositeGraph::leaf(f3.clone())],
        GlueNode {
            children: vec![],
            theta: vec![-0.4, 1.3, 0.7],
            activation: Activation::Tanh,
            outer: Some(OuterAffine {
                scale: 2.5,
                offset: -0.3,
                anchor: 0.2,
            }),
            frozen: false,
        },
    )
    .unwrap();
    let got = outer.evaluate(&data).unwrap();
    let (x0, x1) = (data.slot(0).unwrap(), data.slot(1).unwrap());
    for i in 0..data.n() {
        let a = x0.row(i);
        let b = x1.row(i);
        let v1 = 0.5 * a[0] - 1.0 * a[1] + 0.2;
        let v2 = 2.0 * (1.5 * b[0] + 0.3 * b[1] - 0.1).tanh() + 0.5;
        let v3 = -0.7 * b[0] + 0.9 * b[1] + 1.0;
        let h = 1.0 / (1.0 + (-(0.1 + 0.8 * v1 - 0.6 * v2)).exp());
        let z = -0.4 + 1.3 * h + 0.7 * v3;
        let expected = 2.5 * (z.tanh() - 0.2f64.tanh()) - 0.3;
        assert!(close(got.as_slice()[i], expected, 1e-12), "{i}");
    }
}

#[test]
fn width_step_matches_three_output_least_squares() {
    let mut r = rng(7);
    let (outputs, y) = gaussian_instance(&mut r, 40, 3);
    let data = Dataset::targets_only(y.clone()).unwrap();
    let comps: Vec<Component> = outputs[1..]
        .iter()
        .enumerate()
        .map(|(j, o)| Component::table(format!("f{j}"), o.as_slice().to_vec()).unwrap())
        .collect();
    let g_prev = CompositeGraph::linear_stack(comps[..2].to_vec(), vec![0.2, 0.5, -0.3]).unwrap();
    let g_vec = g_prev.evaluate(&data).unwrap();
    let step = add_width(&g_prev, &comps[2], &data, Activation::Identity).unwrap();
    let (theta, sse) = pinv_least_squares(&[OutputVector::ones(40), g_vec.clone(), outputs[3].clone()], &y);
    let ext = step.extension().unwrap();
    assert!(close(ext.bias, theta[0], 1e-8));
    assert!(close(ext.alpha0, theta[1], 1e-8));
    assert!(close(ext.alpha1, theta[2], 1e-8));
    assert!(close(step.sse, sse, 1e-8));
    assert!(step.sse <= sse_oracle(g_vec.as_slice(), &y) + 1e-10);
}

#[test]
fn logistic_depth_step_is_strict_when_budget_is_positive() {
    let mut r = rng(8);
    let (outputs, y) = gaussian_instance(&mut r, 50, 2);
    let data = Dataset::targets_only(y.clone()).unwrap();
    let comps: Vec<Component> = outputs[1..]
        .iter()
        .enumerate()
        .map(|(j, o)| Component::table(format!("f{j}"), o.as_slice().to_vec()).unwrap())
        .collect();
    let g_prev = CompositeGraph::leaf(comps[0].clone());
    let old = g_prev.sse(&data).unwrap();
    let step = add_depth(&g_prev, &comps[1], &data, Activation::Logistic).unwrap();
    assert!(step.wrapped.is_some());
    assert!(step.sse < old);
    assert_eq!(step.graph.depth(), g_prev.depth() + 1);
}

#[test]
fn scaled_plan_stays_within_epsilon_and_its_bound() {
    let (outputs, y) = gaussian_instance(&mut rng(9), 50, 3);
    let g0 = stack(&outputs, &y).unwrap();
    let plan = build_scaled_plan(
        &g0,
        &outputs,
        &ActivationProfile::new(Activation::Logistic).unwrap(),
        0.1,
    )
    .unwrap();
    let scaled = evaluate_scaled(&plan, &outputs).unwrap();
    let dev = scaled
        .iter()
        .zip(combine(&g0.theta, &outputs))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(dev < 0.1);
    let bound = plan.m0 * plan.m1 * plan.gamma * plan.gamma;
    assert!(close(plan.deviation_bound(), bound, 1e-12));
    assert!(dev <= bound && bound < 0.1);
}

#[test]
fn budgeted_plan_beats_the_best_output() {
    let (outputs, y) = gaussian_instance(&mut rng(10), 30, 2);
    let g0 = stack(&outputs, &y).unwrap();
    let w = wrap_stack(&g0, &outputs, &y, Activation::Tanh).unwrap();
    assert!(w.sse < g0.best_unit_sse);
}

#[test]
fn backprop_matches_finite_differences_at_depth_two() {
    let mut r = rng(11);
    for _ in 0..10 {
        let data = random_dataset(&mut r, 15, &[2, 3]);
        let g = random_graph(&mut r, &data, 2);
        let records: Vec<usize> = (0..data.n()).collect();
        let grads = backprop_gradients(&g, &data, &records).unwrap();
        for (p, a) in grads.params.iter().zip(&grads.values) {
            let fd = finite_difference(&g, &data, *p, 1e-5);
            assert!(relative_error(*a, fd) < 1e-5, "{p:?}: {a} vs {fd}");
        }
    }
}

#[test]
fn gradient_vanishes_at_the_closed_form_optimum() {
    let (outputs, y) = gaussian_instance(&mut rng(12), 30, 3);
    let sol = stack(&outputs, &y).unwrap();
    let comps = outputs[1..]
        .iter()
        .enumerate()
        .map(|(j, o)| Component::table(format!("f{j}"), o.as_slice().to_vec()).unwrap())
        .collect();
    let g = CompositeGraph::linear_stack(comps, sol.theta.clone()).unwrap();
    let data = Dataset::targets_only(y).unwrap();
    let grads = backprop_gradients(&g, &data, &(0..30).collect::<Vec<_>>()).unwrap();
    assert!(grads.max_abs() < 1e-9);
}

#[test]
fn training_from_the_best_output_improves_in_one_epoch() {
    let mut r = rng(13);
    let (outputs, y) = gaussian_instance(&mut r, 30, 3);
    let comps = outputs[1..]
        .iter()
        .enumerate()
        .map(|(j, o)| Component::table(format!("f{j}"), o.as_slice().to_vec()).unwrap())
        .collect();
    let mut g = CompositeGraph::linear_stack(comps, vec![0.0; 4]).unwrap();
    let data = Dataset::targets_only(y.clone()).unwrap();
    initialize_trainable(&mut g, &data, GlueInit::BestChild, &mut r).unwrap();
    let start = g.sse(&data).unwrap();
    assert!(close(start, sol_best(&outputs, &y), 1e-12));
    let cfg = TrainConfig {
        learning_rate: 0.5 / gram_lambda_max(&outputs),
        epochs: 1,
        batch_size: 30,
        seed: 0,
        shuffle: false,
    };
    let trace = sgd_train(&mut g, &data, None, &cfg).unwrap();
    assert!(trace.epochs[0].train_sse < start);
    assert_eq!(trace.initial_sse, start);
}

fn sol_best(outputs: &[OutputVector], y: &[f64]) -> f64 {
    outputs
        .iter()
        .map(|o| sse_oracle(o.as_slice(), y))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn random_hidden_layers_reinitialise_within_fan_in_range() {
    let mut r = rng(14);
    let mut c = Component::zeroed("z", 0, 9, Some(Activation::Tanh));
    c.reinitialize(&mut r);
    let p = c.params();
    // Inner weights and bias are uniform in ±1/√fan_in.
    assert!(p[..10].iter().all(|v| v.abs() <= 1.0 / 3.0));
    assert!(p.iter().any(|v| *v != 0.0));
}
