//! The frozen/trainable composition grid.
//!
//! Part 1 reports every roster component alone. Each later part glues its
//! members under every combination of member states and every gluing:
//! `×` keeps a member at its pre-trained state and frozen, `○` re-draws its
//! weights from the seed and trains it jointly with the glue. Members may
//! name the best model of an earlier part (`best:<part>`), which enters as
//! a frozen subgraph. The best row of a part is the one with the lowest
//! test RMSE, ties broken by row order.
//!
//! A row with a `○` member is first trained by SGD. Its children, as they
//! stand at the end of training, are then glued again in closed form, and
//! the row keeps the SGD network only when it is better by more than a
//! relative `1e-9`. The closed-form glue never loses to its best child, so
//! every composite row is at least as good on the training split as its
//! parents at that snapshot.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::components::Component;
use crate::data::{rmse, Dataset, OutputVector};
use crate::error::{Error, Result};
use crate::graph::{CompositeGraph, GlueNode, OuterAffine};
use crate::growth::fuse;
use crate::report::{Format, Report, ReportRow};
use crate::stacker::stack;
use crate::synthetic::{generate_synthetic, SyntheticSpec};
use crate::trainer::{initialize_trainable, sgd_train, GlueInit, TrainConfig};

pub const FROZEN_MARK: char = '×';
pub const TRAINABLE_MARK: char = '○';
const BEST_PREFIX: &str = "best:";
/// Relative margin by which SGD must beat the closed-form re-glue to be kept.
const SGD_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// One CSV, split in file order by [`Split`].
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Self { train: 0.8, test: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterKind {
    Affine,
    OneHiddenLayer,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub id: String,
    #[serde(default)]
    pub slot: usize,
    pub kind: RosterKind,
    /// Hidden activation of a one-hidden-layer component.
    #[serde(default)]
    pub activation: Option<Activation>,
    /// Column of precomputed outputs for a table component.
    #[serde(default)]
    pub column: Option<String>,
    /// Pre-trained parameters in the component's layout; fitted on the
    /// training split when absent.
    #[serde(default)]
    pub params: Option<Vec<f64>>,
    /// Part 1 state: `true` reports the pre-trained component, `false`
    /// re-draws and trains it alone.
    #[serde(default = "default_true")]
    pub frozen: bool,
}

fn default_true() -> bool {
    true
}

/// `linear` or an activation name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Gluing(pub Activation);

impl TryFrom<String> for Gluing {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Ok(Gluing(s.parse()?))
    }
}

impl From<Gluing> for String {
    fn from(g: Gluing) -> Self {
        g.to_string()
    }
}

impl fmt::Display for Gluing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_identity() {
            f.write_str("linear")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub name: String,
    /// Roster ids or `best:<earlier part>`.
    pub members: Vec<String>,
    pub gluings: Vec<Gluing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub report: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
}

fn default_format() -> Format {
    Format::Csv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Applies to CSV datasets; synthetic ones carry their own sizes.
    #[serde(default)]
    pub split: Split,
    pub roster: Vec<RosterEntry>,
    pub parts: Vec<PartSpec>,
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let Split { train, test } = self.split;
        if !(train > 0.0 && test > 0.0) || (train + test - 1.0).abs() > 1e-12 {
            return bad(format!(
                "split fractions must be positive and sum to 1, got {train} + {test}"
            ));
        }
        if self.roster.is_empty() {
            return bad("roster is empty".into());
        }
        let mut known: Vec<&str> = Vec::new();
        for e in &self.roster {
            if e.id.is_empty() || e.id.starts_with(BEST_PREFIX) || known.contains(&e.id.as_str()) {
                return bad(format!("roster id {:?} is empty, reserved or repeated", e.id));
            }
            known.push(&e.id);
            match e.kind {
                RosterKind::Table if e.column.is_none() => {
                    return bad(format!("table component {} needs a column", e.id));
                }
                RosterKind::Table if !e.frozen => {
                    return bad(format!("table component {} cannot be trainable", e.id));
                }
                RosterKind::OneHiddenLayer if e.activation.is_none() => {
                    return bad(format!("one-hidden-layer component {} needs an activation", e.id));
                }
                _ => {}
            }
        }
        let mut parts: Vec<&str> = Vec::new();
        for p in &self.parts {
            if p.name.is_empty() || p.name == "1" || parts.contains(&p.name.as_str()) {
                return bad(format!("part name {:?} is empty, reserved or repeated", p.name));
            }
            if p.members.len() < 2 || p.gluings.is_empty() {
                return bad(format!("part {} needs at least two members and one gluing", p.name));
            }
            for m in &p.members {
                let ok = match m.strip_prefix(BEST_PREFIX) {
                    Some(part) => parts.contains(&part),
                    None => known.contains(&m.as_str()),
                };
                if !ok {
                    return bad(format!("part {} references undefined member {m:?}", p.name));
                }
            }
            parts.push(&p.name);
        }
        Ok(())
    }
}

/// Per-row evidence behind the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowAudit {
    pub train_sse: f64,
    pub test_sse: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Training SSE of each child at the moment the row's glue was fitted.
    pub parent_train_sse: Vec<f64>,
    pub frozen_checksum_before: String,
    pub frozen_checksum_after: String,
    pub notes: Vec<String>,
}

impl RowAudit {
    pub fn min_parent_train_rmse(&self) -> Option<f64> {
        self.parent_train_sse
            .iter()
            .map(|s| rmse(*s, self.n_train))
            .reduce(f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub part: String,
    pub row: usize,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub report: Report,
    /// Aligned with `report.rows`.
    pub audits: Vec<RowAudit>,
    pub best: Vec<BestModel>,
}

/// Training and test splits named by the config.
pub fn load_splits(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset {
        DatasetSource::Synthetic(spec) => generate_synthetic(spec),
        DatasetSource::Csv { path } => {
            let all = Dataset::load_csv(path)?;
            let n_train = (cfg.split.train * all.n() as f64).round() as usize;
            if n_train == 0 || n_train >= all.n() {
                return Err(Error::Config(format!(
                    "split leaves an empty side for {} records",
                    all.n()
                )));
            }
            all.split_at(n_train)
        }
    }
}

struct Member {
    name: String,
    graph: CompositeGraph,
    /// The leaf component, when `○` is allowed.
    trainable: Option<Component>,
}

struct RowResult {
    row: ReportRow,
    audit: RowAudit,
    graph: CompositeGraph,
}

fn row_rng(seed: u64, part: usize, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((part as u64) << 32) | row as u64);
    rng
}

fn row_train_config(cfg: &TrainConfig, rng: &mut ChaCha8Rng, n: usize) -> TrainConfig {
    TrainConfig {
        seed: rng.random(),
        batch_size: cfg.batch_size.min(n),
        ..cfg.clone()
    }
}

fn base_component(e: &RosterEntry, train: &Dataset) -> Result<Component> {
    let width = || {
        train
            .slot(e.slot)
            .map(|m| m.cols())
            .ok_or_else(|| Error::Config(format!("component {} reads missing slot {}", e.id, e.slot)))
    };
    let mut c = match e.kind {
        RosterKind::Affine => Component::zeroed(&e.id, e.slot, width()?, None),
        RosterKind::OneHiddenLayer => Component::zeroed(&e.id, e.slot, width()?, e.activation),
        RosterKind::Table => {
            let column = e.column.clone().expect("validated");
            return Ok(Component::table_column(&e.id, column));
        }
    };
    if let Some(p) = &e.params {
        if p.len() != c.param_count() {
            return Err(Error::Config(format!(
                "component {} expects {} parameters, got {}",
                e.id,
                c.param_count(),
                p.len()
            )));
        }
        for (i, v) in p.iter().enumerate() {
            *c.param_mut(i) = *v;
        }
    }
    Ok(c)
}

/// Least-squares fit of an affine component on its slot.
fn fit_affine(c: &Component, train: &Dataset) -> Result<Component> {
    let m = train.slot(c.slot()).expect("slot checked");
    let mut outputs = vec![OutputVector::ones(train.n())];
    for j in 0..m.cols() {
        outputs.push(OutputVector::new((0..train.n()).map(|i| m.row(i)[j]).collect())?);
    }
    let theta = stack(&outputs, train.targets())?.theta;
    let mut fitted = c.clone();
    for (j, t) in theta[1..].iter().enumerate() {
        *fitted.param_mut(j) = *t;
    }
    *fitted.param_mut(m.cols()) = theta[0];
    Ok(fitted)
}

fn train_alone(
    c: &Component,
    train: &Dataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Component, String, String)> {
    let mut leaf = c.clone();
    leaf.reinitialize(rng);
    let mut g = CompositeGraph::leaf(leaf);
    let trace = sgd_train(&mut g, train, None, &row_train_config(cfg, rng, train.n()))?;
    match g.node(0) {
        crate::graph::Node::Component(c) => Ok((c.clone(), trace.frozen_checksum_before, trace.frozen_checksum_after)),
        crate::graph::Node::Glue(_) => unreachable!("leaf graph"),
    }
}

fn part_one(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<(Vec<RowResult>, Vec<Member>)> {
    let results = cfg
        .roster
        .par_iter()
        .enumerate()
        .map(|(j, e)| {
            let mut rng = row_rng(cfg.seed, 0, j);
            let base = base_component(e, train)?;
            let mut notes = Vec::new();
            let (state, trainable, checksums) = if !e.frozen {
                let (c, before, after) = train_alone(&base, train, &cfg.train, &mut rng)?;
                notes.push("re-initialised and trained alone".to_string());
                (c, true, (before, after))
            } else {
                let c = match (e.kind, &e.params) {
                    (RosterKind::Table, _) | (_, Some(_)) => base.clone(),
                    (RosterKind::Affine, None) => {
                        notes.push("pre-trained by least squares".to_string());
                        fit_affine(&base, train)?
                    }
                    (RosterKind::OneHiddenLayer, None) => {
                        notes.push("pre-trained by SGD".to_string());
                        train_alone(&base, train, &cfg.train, &mut rng)?.0
                    }
                };
                let c = c.freeze();
                let sum = CompositeGraph::leaf(c.clone()).frozen_checksum();
                (c, false, (sum.clone(), sum))
            };
            let graph = CompositeGraph::leaf(if trainable {
                state.clone()
            } else {
                state.clone().freeze()
            });
            let train_sse = graph.sse(train)?;
            let test_sse = graph.sse(test)?;
            let row = ReportRow {
                part: "1".into(),
                model: e.id.clone(),
                gluing: "none".into(),
                flags: if trainable { TRAINABLE_MARK } else { FROZEN_MARK }.to_string(),
                train_rmse: rmse(train_sse, train.n()),
                test_rmse: rmse(test_sse, test.n()),
                trainable_params: graph.trainable_count(),
            };
            let audit = RowAudit {
                train_sse,
                test_sse,
                n_train: train.n(),
                n_test: test.n(),
                parent_train_sse: Vec::new(),
                frozen_checksum_before: checksums.0,
                frozen_checksum_after: checksums.1,
                notes,
            };
            let member = Member {
                name: e.id.clone(),
                graph: CompositeGraph::leaf(state.clone().freeze()),
                trainable: base.kind().is_parametric().then_some(base),
            };
            Ok((RowResult { row, audit, graph }, member))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().unzip())
}

/// Every assignment of `×`/`○` to the members, `×` first, first member slowest.
fn flag_combinations(members: &[&Member]) -> Vec<Vec<bool>> {
    let mut combos: Vec<Vec<bool>> = vec![Vec::new()];
    for m in members {
        let options: &[bool] = if m.trainable.is_some() {
            &[false, true]
        } else {
            &[false]
        };
        combos = combos
            .into_iter()
            .flat_map(|c| {
                options.iter().map(move |&t| {
                    let mut c = c.clone();
                    c.push(t);
                    c
                })
            })
            .collect();
    }
    combos
}

/// A linear glue selecting the child with the lowest training SSE.
fn best_child_glue(children: Vec<CompositeGraph>, sses: &[f64]) -> Result<CompositeGraph> {
    let best = (0..sses.len()).fold(0, |b, j| if sses[j] < sses[b] { j } else { b });
    let mut theta = vec![0.0; children.len() + 1];
    theta[best + 1] = 1.0;
    CompositeGraph::glue(children, GlueNode::linear(Vec::new(), theta))
}

/// Closed-form glue over `children`, or the best child when the outputs are dependent.
fn reglue(
    children: Vec<CompositeGraph>,
    train: &Dataset,
    gluing: Gluing,
    notes: &mut Vec<String>,
) -> Result<(CompositeGraph, Vec<f64>)> {
    let sses = children.iter().map(|c| c.sse(train)).collect::<Result<Vec<_>>>()?;
    match fuse(children.clone(), train, gluing.0) {
        Ok(step) => {
            if !step.assumptions.a2_no_perfect_component {
                notes.push("a child fits the training targets exactly".into());
            }
            if step.wrapped.is_none() && !gluing.0.is_identity() {
                notes.push("no strict gap to protect; glue kept linear".into());
            }
            Ok((step.graph, sses))
        }
        Err(Error::LinearDependence { component }) => {
            notes.push(format!(
                "children linearly dependent at output {component}; best child kept"
            ));
            Ok((best_child_glue(children, &sses)?, sses))
        }
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn composite_row(
    cfg: &ExperimentConfig,
    part_index: usize,
    row_index: usize,
    part: &PartSpec,
    members: &[&Member],
    flags: &[bool],
    gluing: Gluing,
    train: &Dataset,
    test: &Dataset,
) -> Result<RowResult> {
    let mut rng = row_rng(cfg.seed, part_index, row_index);
    let mut notes = Vec::new();
    let children: Vec<CompositeGraph> = members
        .iter()
        .zip(flags)
        .map(|(m, &trainable)| match (&m.trainable, trainable) {
            (Some(c), true) => {
                let mut c = c.clone();
                c.reinitialize(&mut rng);
                CompositeGraph::leaf(c)
            }
            _ => m.graph.clone().freeze_all(),
        })
        .collect();

    let (graph, parents, before, after) = if flags.iter().any(|&t| t) {
        let template = if gluing.0.is_identity() {
            GlueNode::linear(Vec::new(), vec![0.0; children.len() + 1])
        } else {
            GlueNode {
                children: Vec::new(),
                theta: vec![0.0; children.len() + 1],
                activation: gluing.0,
                outer: Some(OuterAffine {
                    scale: 1.0,
                    offset: 0.0,
                    anchor: 0.0,
                }),
                frozen: false,
            }
        };
        let mut joint = CompositeGraph::glue(children, template)?;
        initialize_trainable(&mut joint, train, GlueInit::BestChild, &mut rng)?;
        let before = joint.frozen_checksum();
        let start = joint.clone();
        let tc = row_train_config(&cfg.train, &mut rng, train.n());
        let trained = match sgd_train(&mut joint, train, None, &tc) {
            Ok(trace) => {
                debug_assert!(trace.frozen_unchanged());
                joint
            }
            Err(Error::Diverged { epoch }) => {
                notes.push(format!("SGD diverged at epoch {epoch}; glued the initial children"));
                start
            }
            Err(e) => return Err(e),
        };
        let (reglued, parents) = reglue(trained.root_children()?, train, gluing, &mut notes)?;
        let sgd_sse = trained.sse(train)?;
        let closed_sse = reglued.sse(train)?;
        let graph = if sgd_sse < closed_sse - SGD_MARGIN * closed_sse.abs() {
            notes.push("SGD network kept".into());
            trained
        } else {
            notes.push("closed-form re-glue of the trained children kept".into());
            reglued
        };
        let after = graph.frozen_checksum();
        (graph, parents, before, after)
    } else {
        let (graph, parents) = reglue(children, train, gluing, &mut notes)?;
        let sum = graph.frozen_checksum();
        (graph, parents, sum.clone(), sum)
    };

    let train_sse = graph.sse(train)?;
    let test_sse = graph.sse(test)?;
    let row = ReportRow {
        part: part.name.clone(),
        model: members.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join("+"),
        gluing: gluing.to_string(),
        flags: flags
            .iter()
            .map(|&t| if t { TRAINABLE_MARK } else { FROZEN_MARK })
            .collect(),
        train_rmse: rmse(train_sse, train.n()),
        test_rmse: rmse(test_sse, test.n()),
        trainable_params: graph.trainable_count(),
    };
    let audit = RowAudit {
        train_sse,
        test_sse,
        n_train: train.n(),
        n_test: test.n(),
        parent_train_sse: parents,
        frozen_checksum_before: before,
        frozen_checksum_after: after,
        notes,
    };
    Ok(RowResult { row, audit, graph })
}

fn best_row(rows: &[RowResult]) -> usize {
    (0..rows.len()).fold(0, |b, j| {
        if rows[j].row.test_rmse < rows[b].row.test_rmse {
            j
        } else {
            b
        }
    })
}

/// Runs Part 1 and every configured part, in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (train, test) = load_splits(cfg)?;
    cfg.train.validate(train.n())?;

    let (first, roster) = part_one(cfg, &train, &test)?;
    let mut members: BTreeMap<String, Member> = roster.into_iter().map(|m| (m.name.clone(), m)).collect();
    let mut best = vec![BestModel {
        part: "1".into(),
        row: best_row(&first),
        model: first[best_row(&first)].row.model.clone(),
    }];
    let mut rows: Vec<RowResult> = first;

    for (p, part) in cfg.parts.iter().enumerate() {
        let part_members: Vec<&Member> = part.members.iter().map(|m| &members[m]).collect();
        let grid: Vec<(Vec<bool>, Gluing)> = flag_combinations(&part_members)
            .into_iter()
            .flat_map(|f| part.gluings.iter().map(move |g| (f.clone(), *g)))
            .collect();
        let results = grid
            .par_iter()
            .enumerate()
            .map(|(r, (flags, gluing))| {
                composite_row(cfg, p + 1, r, part, &part_members, flags, *gluing, &train, &test)
            })
            .collect::<Result<Vec<_>>>()?;
        let b = best_row(&results);
        let chosen = &results[b];
        best.push(BestModel {
            part: part.name.clone(),
            row: rows.len() + b,
            model: chosen.row.model.clone(),
        });
        members.insert(
            format!("{BEST_PREFIX}{}", part.name),
            Member {
                name: format!("({})", chosen.row.model),
                graph: chosen.graph.clone().freeze_all(),
                trainable: None,
            },
        );
        rows.extend(results);
    }

    let (report_rows, audits) = rows.into_iter().map(|r| (r.row, r.audit)).unzip();
    Ok(ExperimentOutcome {
        report: Report { rows: report_rows },
        audits,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Rule;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                n_train: 120,
                n_test: 40,
                features: vec![2, 2, 2],
                rule: Rule::AutoregressiveExogenous,
                noise: 0.3,
                seed: 5,
            }),
            split: Split::default(),
            roster: vec![
                RosterEntry {
                    id: "A".into(),
                    slot: 0,
                    kind: RosterKind::Affine,
                    activation: None,
                    column: None,
                    params: None,
                    frozen: true,
                },
                RosterEntry {
                    id: "B".into(),
                    slot: 1,
                    kind: RosterKind::OneHiddenLayer,
                    activation: Some(Activation::Tanh),
                    column: None,
                    params: None,
                    frozen: true,
                },
            ],
            parts: vec![PartSpec {
                name: "2".into(),
                members: vec!["A".into(), "B".into()],
                gluings: vec![Gluing(Activation::Identity), Gluing(Activation::Logistic)],
            }],
            train: TrainConfig {
                learning_rate: 1e-3,
                epochs: 5,
                batch_size: 16,
                seed: 1,
                shuffle: true,
            },
            seed: 3,
            output: None,
        }
    }

    #[test]
    fn grid_has_every_flag_and_gluing() {
        let out = run_experiment(&config()).unwrap();
        assert_eq!(out.report.rows.len(), 2 + 4 * 2);
        let flags: Vec<&str> = out.report.rows[2..]
            .iter()
            .step_by(2)
            .map(|r| r.flags.as_str())
            .collect();
        assert_eq!(flags, vec!["××", "×○", "○×", "○○"]);
        assert_eq!(out.best.len(), 2);
    }

    #[test]
    fn composite_rows_never_lose_to_their_parents() {
        let out = run_experiment(&config()).unwrap();
        for (row, audit) in out.report.rows.iter().zip(&out.audits).skip(2) {
            let parent = audit.min_parent_train_rmse().unwrap();
            assert!(row.train_rmse <= parent + 1e-6, "{row:?} vs {parent}");
            assert_eq!(audit.frozen_checksum_before, audit.frozen_checksum_after);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = config();
        c.split = Split { train: 0.7, test: 0.2 };
        assert!(c.validate().is_err());
        let mut c = config();
        c.parts[0].members[1] = "best:9".into();
        assert!(c.validate().is_err());
        let mut c = config();
        c.roster.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn gluing_names_round_trip() {
        let g: Vec<Gluing> = serde_json::from_str(r#"["linear","logistic","scaled_logistic"]"#).unwrap();
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"["linear","logistic","scaled_logistic"]"#
        );
    }
}
