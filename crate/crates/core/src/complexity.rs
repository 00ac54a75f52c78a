//! Exact parameter and multiply-accumulate (MAC) accounting.
//!
//! Parameters are trainable weights, biases and batch-norm affine terms;
//! running statistics are buffers and are not counted. MACs count one unit per
//! multiply-accumulate in convolution and linear layers at the propagated
//! shapes of a single input sequence; normalization, activations, products,
//! residual additions and pooling are not counted. Fixture "FLOPs" columns are
//! compared against these MAC counts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Component, ModelError, ModelGraph, Module, Result};
use crate::scalar::Scalar;

/// One input sequence, `channels × frames × height × width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for InputShape {
    fn default() -> Self {
        InputShape {
            channels: 1,
            frames: 29,
            height: 88,
            width: 88,
        }
    }
}

impl fmt::Display for InputShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.channels, self.frames, self.height, self.width)
    }
}

impl FromStr for InputShape {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        let dims: Vec<usize> = s
            .split(['x', 'X', ','])
            .map(|p| p.trim().parse::<usize>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| format!("invalid input shape `{s}`"))?;
        match dims.as_slice() {
            &[c, t, h, w] if c > 0 && t > 0 && h > 0 && w > 0 => Ok(InputShape {
                channels: c,
                frames: t,
                height: h,
                width: w,
            }),
            _ => Err(format!("input shape `{s}` must be CxTxHxW with positive sizes")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleCost {
    pub name: String,
    pub component: Component,
    pub params: u64,
    pub macs: u64,
    /// Per-sample output shape (no batch axis).
    pub output_shape: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    pub params: u64,
    pub macs: u64,
}

impl core::ops::AddAssign<&ModuleCost> for Cost {
    fn add_assign(&mut self, m: &ModuleCost) {
        self.params += m.params;
        self.macs += m.macs;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub input_shape: InputShape,
    pub modules: Vec<ModuleCost>,
    pub by_component: BTreeMap<Component, Cost>,
    /// TCN stages only (the parenthesized table columns).
    pub tcn: Cost,
    pub total: Cost,
}

/// Trainable parameter count, summed from each layer's spec.
pub fn count_params<F: Scalar>(graph: &ModelGraph<F>) -> u64 {
    graph.modules.iter().map(|m| m.param_count()).sum()
}

/// Total MACs for one sequence of the given shape.
pub fn count_macs<F: Scalar>(graph: &ModelGraph<F>, input: InputShape) -> Result<u64> {
    Ok(trace(graph, input)?.iter().map(|m| m.macs).sum())
}

/// Per-module parameters, MACs and output shapes, propagating shapes from
/// `input`. TCN-only graphs read only `input.frames`.
pub fn trace<F: Scalar>(graph: &ModelGraph<F>, input: InputShape) -> Result<Vec<ModuleCost>> {
    let cfg = &graph.config;
    let t = input.frames;
    let mut shape: Vec<usize> = if cfg.is_tcn_only() {
        vec![cfg.tcn.input_channels(), t]
    } else {
        if input.channels != cfg.stem.in_channels {
            return Err(ModelError::Input(format!(
                "input has {} channels, stem expects {}",
                input.channels, cfg.stem.in_channels
            )));
        }
        vec![input.channels, t, input.height, input.width]
    };
    let mut out = Vec::with_capacity(graph.modules.len());
    for m in &graph.modules {
        let (macs, next) = match &m.module {
            Module::Stem(s) => {
                let [to, ho, wo] = s.spec.output_extent(shape[1], shape[2], shape[3])?;
                let (macs, _) = s.unit.macs(&[shape[1], shape[2], shape[3]])?;
                (macs, vec![s.spec.out_channels, to, ho, wo])
            }
            Module::Extractor(e) => {
                let (macs, _) = e.macs(shape[1], shape[2], shape[3])?;
                (macs, vec![e.spec.out_dim, shape[1]])
            }
            Module::Projection(u) => {
                let (macs, _) = u.macs(&[shape[1]])?;
                (macs, vec![u.conv.spec.out_channels, shape[1]])
            }
            Module::TcnStage(st) => {
                let mut macs = 0;
                if let Some(tr) = &st.transition {
                    macs += tr.macs(&[shape[1]])?.0;
                }
                macs += st.block.macs(shape[1])?;
                (macs, vec![st.block.channels, shape[1]])
            }
            Module::Classifier(c) => (c.linear.macs(), vec![c.num_classes()]),
        };
        out.push(ModuleCost {
            name: m.name.clone(),
            component: m.component(),
            params: m.param_count(),
            macs,
            output_shape: next.clone(),
        });
        shape = next;
    }
    Ok(out)
}

pub fn analyze<F: Scalar>(graph: &ModelGraph<F>, input: InputShape) -> Result<ComplexityReport> {
    let modules = trace(graph, input)?;
    let mut by_component = BTreeMap::new();
    let mut total = Cost::default();
    for m in &modules {
        *by_component.entry(m.component).or_insert_with(Cost::default) += m;
        total += m;
    }
    let tcn = by_component.get(&Component::Tcn).copied().unwrap_or_default();
    Ok(ComplexityReport {
        input_shape: input,
        modules,
        by_component,
        tcn,
        total,
    })
}

/// Which sub-total a fixture row refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Tcn,
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub id: String,
    /// Config file path, relative to the fixture file.
    pub config: String,
    pub scope: Scope,
    /// Expected parameters in millions.
    pub expected_params_m: f64,
    /// Relative tolerance on parameters.
    pub params_tolerance: f64,
    /// Expected MACs in billions, when the row is checked for MACs.
    #[serde(default)]
    pub expected_gmacs: Option<f64>,
    #[serde(default)]
    pub macs_tolerance: Option<f64>,
    #[serde(default)]
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFixture {
    #[serde(default)]
    pub description: String,
    pub rows: Vec<FixtureRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Params,
    Macs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub metric: Metric,
    pub expected: f64,
    pub computed: u64,
    pub relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("no report for fixture id `{0}`")]
    MissingId(String),
    #[error("fixture row `{0}` has an expected MAC count but no tolerance")]
    MissingTolerance(String),
}

/// Relative deviation `|computed - expected| / expected`.
pub fn relative_deviation(computed: u64, expected: f64) -> f64 {
    num_traits::Float::abs(computed as f64 - expected) / expected
}

/// Checks every fixture row against the report with the same id. A row
/// passes when its relative deviation is at most its tolerance.
pub fn verify(
    reports: &BTreeMap<String, ComplexityReport>,
    fixture: &ExpectedFixture,
) -> core::result::Result<Vec<Verdict>, VerifyError> {
    let mut out = Vec::new();
    for row in &fixture.rows {
        let rep = reports
            .get(&row.id)
            .ok_or_else(|| VerifyError::MissingId(row.id.clone()))?;
        let cost = match row.scope {
            Scope::Tcn => rep.tcn,
            Scope::Total => rep.total,
        };
        let mut push = |metric, expected: f64, computed: u64, tolerance: f64| {
            let dev = relative_deviation(computed, expected);
            out.push(Verdict {
                id: row.id.clone(),
                metric,
                expected,
                computed,
                relative_deviation: dev,
                tolerance,
                pass: dev <= tolerance,
            });
        };
        push(
            Metric::Params,
            row.expected_params_m * 1e6,
            cost.params,
            row.params_tolerance,
        );
        if let Some(g) = row.expected_gmacs {
            let tol = row
                .macs_tolerance
                .ok_or_else(|| VerifyError::MissingTolerance(row.id.clone()))?;
            push(Metric::Macs, g * 1e9, cost.macs, tol);
        }
    }
    Ok(out)
}
