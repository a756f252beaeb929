//! Width and depth growth of composite networks, and the greedy layer builder.
//!
//! Every growth step glues a set of children with the optimal linear stack.
//! For a non-identity activation the stack is wrapped in the scaled
//! construction, whose budgeted `ε` keeps the result strictly better than
//! each child. The wrapping is anchored where the activation is most
//! curved, so the layer is genuinely non-linear and later layers have a new
//! direction to fit. When the gap over the best child is within
//! [`STRICT_TOLERANCE`], or `ε` is below what double precision can realise,
//! the glue stays linear.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::components::Component;
use crate::data::{check_assumptions, AssumptionReport, Dataset, OutputVector};
use crate::error::{Error, Result};
use crate::graph::{CompositeGraph, GlueNode, Node};
use crate::scaled::{wrap_stack_with, ActivationProfile, WrappedStack};
use crate::stacker::{stack, StackSolution};

/// Absolute SSE margin for counting an improvement as strict.
pub const STRICT_TOLERANCE: f64 = 1e-10;

/// Coefficients of `bias + α0 g_prev + α1 f_new`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthExtension {
    pub bias: f64,
    pub alpha0: f64,
    pub alpha1: f64,
}

/// One glued layer: the new graph, the linear stack it is built from, and
/// the scaled wrapping when one was applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub graph: CompositeGraph,
    pub solution: StackSolution,
    pub wrapped: Option<WrappedStack>,
    /// SSE of `graph` on the data it was fitted to.
    pub sse: f64,
    pub assumptions: AssumptionReport,
}

impl GrowthStep {
    /// The pair coefficients of a two-child step.
    pub fn extension(&self) -> Option<WidthExtension> {
        match self.solution.theta[..] {
            [bias, alpha0, alpha1] => Some(WidthExtension { bias, alpha0, alpha1 }),
            _ => None,
        }
    }
}

struct Fit {
    solution: StackSolution,
    wrapped: Option<WrappedStack>,
    assumptions: AssumptionReport,
    /// Coefficients over `[1, children..]`, bias first.
    coefficients: Vec<f64>,
    template: GlueNode,
}

/// Scaled wrapping anchored at the curvature peak, then at the inflection
/// point, whose neighbourhood is finer in double precision. `None` when
/// neither realises the budget.
fn wrap(
    solution: &StackSolution,
    outputs: &[OutputVector],
    targets: &[f64],
    activation: Activation,
) -> Result<Option<WrappedStack>> {
    for profile in [
        ActivationProfile::curved(activation)?,
        ActivationProfile::new(activation)?,
    ] {
        match wrap_stack_with(solution, outputs, targets, &profile) {
            Ok(w) => return Ok(Some(w)),
            Err(Error::ApproximationFailed { .. } | Error::EscapedInterval { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Stacks the given child outputs and decides the glue that realises the stack.
fn fit(children: &[OutputVector], data: &Dataset, activation: Activation) -> Result<Fit> {
    let mut outputs = Vec::with_capacity(children.len() + 1);
    outputs.push(OutputVector::ones(data.n()));
    outputs.extend(children.iter().cloned());
    let targets = data.targets();
    let assumptions = check_assumptions(&outputs, targets)?;
    if !assumptions.a1_linear_independence {
        let component = AssumptionReport::first_dependent(&outputs).unwrap_or(outputs.len() - 1);
        return Err(Error::LinearDependence { component });
    }
    let solution = stack(&outputs, targets)?;
    let wrapped = if activation.is_identity() || !solution.improves_on_best(STRICT_TOLERANCE) {
        None
    } else {
        wrap(&solution, &outputs, targets, activation)?
    };
    let (coefficients, template) = match &wrapped {
        Some(w) => (w.plan.l0.clone(), GlueNode::from_plan(Vec::new(), &w.plan)),
        None => (
            solution.theta.clone(),
            GlueNode::linear(Vec::new(), solution.theta.clone()),
        ),
    };
    Ok(Fit {
        solution,
        wrapped,
        assumptions,
        coefficients,
        template,
    })
}

fn finish(graph: CompositeGraph, fit: Fit, data: &Dataset) -> Result<GrowthStep> {
    let sse = graph.sse(data)?;
    Ok(GrowthStep {
        graph,
        solution: fit.solution,
        wrapped: fit.wrapped,
        sse,
        assumptions: fit.assumptions,
    })
}

/// Glues `children` under one new layer fitted to `data`.
pub fn fuse(children: Vec<CompositeGraph>, data: &Dataset, activation: Activation) -> Result<GrowthStep> {
    let outputs = children.iter().map(|c| c.evaluate(data)).collect::<Result<Vec<_>>>()?;
    let fit = fit(&outputs, data, activation)?;
    let graph = CompositeGraph::glue(children, fit.template.clone())?;
    finish(graph, fit, data)
}

/// Adds `f_new` next to `g_prev`.
///
/// The pair is stacked in closed form. When the root of `g_prev` is an
/// unfrozen linear glue, the pair coefficients are folded into that layer
/// and the depth is unchanged; otherwise a new layer is placed on top.
pub fn add_width(
    g_prev: &CompositeGraph,
    f_new: &Component,
    data: &Dataset,
    activation: Activation,
) -> Result<GrowthStep> {
    let outputs = [g_prev.evaluate(data)?, f_new.evaluate(data)?];
    let fit = fit(&outputs, data, activation)?;
    let root = g_prev.root();
    let prev_glue = match g_prev.root_node() {
        Node::Glue(g) if g.is_linear() && !g.frozen => g.clone(),
        _ => {
            let leaves = vec![g_prev.clone(), CompositeGraph::leaf(f_new.clone())];
            let graph = CompositeGraph::glue(leaves, fit.template.clone())?;
            return finish(graph, fit, data);
        }
    };

    let c = &fit.coefficients;
    let mut glue = fit.template.clone();
    glue.theta = Vec::with_capacity(prev_glue.theta.len() + 1);
    glue.theta.push(c[0] + c[1] * prev_glue.theta[0]);
    glue.theta.extend(prev_glue.theta[1..].iter().map(|t| c[1] * t));
    glue.theta.push(c[2]);
    let mut nodes = g_prev.nodes().to_vec();
    nodes.push(Node::Component(f_new.clone()));
    glue.children = prev_glue.children.clone();
    glue.children.push(nodes.len() - 1);
    nodes[root] = Node::Glue(glue);
    let graph = CompositeGraph::from_nodes(nodes, root)?;
    finish(graph, fit, data)
}

/// Places a new layer over `g_prev` and `f_new`, increasing depth by one.
pub fn add_depth(
    g_prev: &CompositeGraph,
    f_new: &Component,
    data: &Dataset,
    activation: Activation,
) -> Result<GrowthStep> {
    fuse(
        vec![g_prev.clone(), CompositeGraph::leaf(f_new.clone())],
        data,
        activation,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// 1-based layer number.
    pub stage: usize,
    pub sse: f64,
    /// SSE this stage had to beat.
    pub baseline: f64,
    pub strict: bool,
    /// Roster index of the component added at this stage (all of them at stage 1).
    pub component: Option<usize>,
    /// The stage only re-emits the previous network.
    pub passthrough: bool,
    pub wrapped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub graph: CompositeGraph,
    pub stages: Vec<StageRecord>,
    pub component_sse: Vec<f64>,
    pub best_component_sse: f64,
}

impl GrowthTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.sse).collect()
    }

    pub fn final_sse(&self) -> f64 {
        self.stages.last().map_or(f64::INFINITY, |s| s.sse)
    }

    pub fn all_strict(&self) -> bool {
        self.stages.iter().all(|s| s.strict)
    }
}

/// Builds an `h`-layer network. The first layer stacks every component.
/// Each further layer glues the previous network either with one component
/// (re-use allowed) or with all of them, whichever gives the lowest loss;
/// ties go to the lowest candidate index, single components first.
pub fn grow_greedy(components: &[Component], h: usize, data: &Dataset, activation: Activation) -> Result<GrowthTrace> {
    if h == 0 {
        return Err(Error::Config("growth needs at least one layer".into()));
    }
    if components.is_empty() {
        return Err(Error::Config("growth needs at least one component".into()));
    }
    let component_sse = components
        .iter()
        .map(|c| {
            c.evaluate(data)
                .and_then(|o| crate::data::total_loss(o, data.targets()))
        })
        .collect::<Result<Vec<_>>>()?;
    let best_component_sse = component_sse.iter().copied().fold(f64::INFINITY, f64::min);

    let leaves = components.iter().cloned().map(CompositeGraph::leaf).collect();
    let first = fuse(leaves, data, activation)?;
    let baseline = first.solution.best_unit_sse;
    let mut stages = vec![StageRecord {
        stage: 1,
        sse: first.sse,
        baseline,
        strict: first.sse < baseline - STRICT_TOLERANCE,
        component: None,
        passthrough: false,
        wrapped: first.wrapped.is_some(),
    }];
    let mut graph = first.graph;
    let mut prev_sse = first.sse;

    for stage in 2..=h {
        // Candidates 0..K glue one component; candidate K glues all of them.
        let candidates: Vec<Result<GrowthStep>> = (0..=components.len())
            .into_par_iter()
            .map(|j| match components.get(j) {
                Some(c) => add_depth(&graph, c, data, activation),
                None => {
                    let mut children = vec![graph.clone()];
                    children.extend(components.iter().cloned().map(CompositeGraph::leaf));
                    fuse(children, data, activation)
                }
            })
            .collect();
        let mut best: Option<(usize, GrowthStep)> = None;
        for (j, candidate) in candidates.into_iter().enumerate() {
            let step = match candidate {
                Ok(step) => step,
                Err(Error::LinearDependence { .. }) => continue,
                Err(e) => return Err(e),
            };
            if best.as_ref().is_none_or(|(_, b)| step.sse < b.sse) {
                best = Some((j, step));
            }
        }
        let record = match best {
            Some((j, step)) if step.sse <= prev_sse => {
                let record = StageRecord {
                    stage,
                    sse: step.sse,
                    baseline: prev_sse,
                    strict: step.sse < prev_sse - STRICT_TOLERANCE,
                    component: Some(j),
                    passthrough: false,
                    wrapped: step.wrapped.is_some(),
                };
                graph = step.graph;
                record
            }
            _ => {
                graph = CompositeGraph::glue(vec![graph], GlueNode::linear(Vec::new(), vec![0.0, 1.0]))?;
                StageRecord {
                    stage,
                    sse: prev_sse,
                    baseline: prev_sse,
                    strict: false,
                    component: None,
                    passthrough: true,
                    wrapped: false,
                }
            }
        };
        prev_sse = record.sse;
        stages.push(record);
    }

    Ok(GrowthTrace {
        graph,
        stages,
        component_sse,
        best_component_sse,
    })
}
