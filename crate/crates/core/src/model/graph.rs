use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::{ModelError, Result};
use crate::autograd::Var;
use crate::blocks::{Classifier, Extractor, LayerFactory, LayerRef, Stem, TemporalBlock, Unit};
use crate::ops::ConvSpec;
use crate::params::{Mode, ParamId, ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Largest model [`build_model`] will allocate, in trainable scalars.
pub const PARAM_BUDGET: u64 = 250_000_000;

pub const BUILD_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Stem,
    Extractor,
    Projection,
    Tcn,
    Classifier,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Stem => "stem",
            Component::Extractor => "extractor",
            Component::Projection => "projection",
            Component::Tcn => "tcn",
            Component::Classifier => "classifier",
        }
    }
}

/// One TCN stage: an optional point-wise width transition and its block.
#[derive(Clone, Debug, PartialEq)]
pub struct TcnStage {
    pub index: usize,
    pub transition: Option<Unit>,
    pub block: TemporalBlock,
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum Module {
    Stem(Stem),
    Extractor(Extractor),
    Projection(Unit),
    TcnStage(TcnStage),
    Classifier(Classifier),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubModule {
    pub name: String,
    pub module: Module,
}

impl SubModule {
    pub fn component(&self) -> Component {
        match self.module {
            Module::Stem(_) => Component::Stem,
            Module::Extractor(_) => Component::Extractor,
            Module::Projection(_) => Component::Projection,
            Module::TcnStage(_) => Component::Tcn,
            Module::Classifier(_) => Component::Classifier,
        }
    }

    pub fn layers(&self) -> Vec<LayerRef<'_>> {
        match &self.module {
            Module::Stem(s) => s.layers(),
            Module::Extractor(e) => e.layers(),
            Module::Projection(u) => u.layers().collect(),
            Module::TcnStage(st) => {
                let mut v: Vec<LayerRef<'_>> = st.transition.iter().flat_map(Unit::layers).collect();
                v.extend(st.block.layers());
                v
            }
            Module::Classifier(c) => c.layers(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers().iter().flat_map(LayerRef::params).collect()
    }

    /// Sum over the module's layers of their spec-derived counts.
    pub fn param_count(&self) -> u64 {
        self.layers().iter().map(LayerRef::param_count).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub config_hash: u64,
    pub build_version: String,
    pub seed: u64,
}

/// Built model: sub-modules in execution order plus their parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph<F> {
    pub config: ModelConfig,
    pub modules: Vec<SubModule>,
    pub store: ParamStore<F>,
    pub meta: GraphMeta,
}

/// Assembles stem → extractor → projection → TCN stages → classifier with
/// parameters drawn deterministically from `seed`.
pub fn build_model<F: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelGraph<F>> {
    let planned: u64 = config.closed_form_params()?.iter().sum();
    if planned > PARAM_BUDGET {
        return Err(ModelError::Budget {
            params: planned,
            cap: PARAM_BUDGET,
        });
    }
    let mut store = ParamStore::new();
    let mut f = LayerFactory::new(&mut store, seed);
    let mut modules = Vec::new();
    let tcn = &config.tcn;
    if let Some(espec) = &config.extractor {
        let stem = Stem::new(&mut f, "stem", config.stem.clone())?;
        modules.push(SubModule {
            name: "stem".into(),
            module: Module::Stem(stem),
        });
        let ex = Extractor::new(&mut f, "extractor", espec.clone(), config.stem.out_channels)?;
        modules.push(SubModule {
            name: "extractor".into(),
            module: Module::Extractor(ex),
        });
        if config.needs_projection() {
            let spec = ConvSpec::pointwise1d(espec.out_dim, tcn.input_channels());
            let u = f.unit("projection", spec, true, false, None)?;
            modules.push(SubModule {
                name: "projection".into(),
                module: Module::Projection(u),
            });
        }
    }
    let spec = tcn.block_spec();
    let widths = tcn.stage_widths();
    for (i, (&c, d)) in widths.iter().zip(tcn.dilations()).enumerate() {
        let name = format!("tcn.stage{i}");
        let transition = match i {
            0 => None,
            _ if widths[i - 1] == c => None,
            _ => Some(f.unit(
                &format!("{name}.transition"),
                ConvSpec::pointwise1d(widths[i - 1], c),
                true,
                false,
                None,
            )?),
        };
        let block = TemporalBlock::new(&mut f, &format!("{name}.block"), spec, c, tcn.kernel, d, tcn.dropout)?;
        modules.push(SubModule {
            name,
            module: Module::TcnStage(TcnStage {
                index: i,
                transition,
                block,
            }),
        });
    }
    let head = Classifier::new(
        &mut f,
        "classifier",
        tcn.output_channels(),
        config.classifier.num_classes,
    )?;
    modules.push(SubModule {
        name: "classifier".into(),
        module: Module::Classifier(head),
    });
    Ok(ModelGraph {
        config: config.clone(),
        modules,
        store,
        meta: GraphMeta {
            config_hash: config.hash(),
            build_version: BUILD_VERSION.into(),
            seed,
        },
    })
}

impl<F: Scalar> ModelGraph<F> {
    pub fn is_tcn_only(&self) -> bool {
        self.config.is_tcn_only()
    }

    pub fn num_classes(&self) -> usize {
        self.config.classifier.num_classes
    }

    pub fn module(&self, name: &str) -> Option<&SubModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn tcn_stages(&self) -> impl Iterator<Item = &TcnStage> {
        self.modules.iter().filter_map(|m| match &m.module {
            Module::TcnStage(s) => Some(s),
            _ => None,
        })
    }

    pub fn classifier(&self) -> &Classifier {
        self.modules
            .iter()
            .find_map(|m| match &m.module {
                Module::Classifier(c) => Some(c),
                _ => None,
            })
            .expect("every graph ends with a classifier")
    }

    /// Same structure with parameters converted to another precision.
    pub fn cast<G: Scalar>(&self) -> ModelGraph<G> {
        ModelGraph {
            config: self.config.clone(),
            modules: self.modules.clone(),
            store: self.store.cast(),
            meta: self.meta.clone(),
        }
    }

    /// Expected input rank: 5 (`[N, C, T, H, W]`) or 3 for TCN-only models
    /// (`[N, C, T]`).
    pub fn input_rank(&self) -> usize {
        if self.is_tcn_only() {
            3
        } else {
            5
        }
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let ok = match self.config.extractor {
            Some(_) => shape.len() == 5 && shape[1] == self.config.stem.in_channels,
            None => shape.len() == 3 && shape[1] == self.config.tcn.input_channels(),
        };
        if !ok {
            let want = if self.is_tcn_only() {
                format!("[N, {}, T]", self.config.tcn.input_channels())
            } else {
                format!("[N, {}, T, H, W]", self.config.stem.in_channels)
            };
            return Err(ModelError::Input(format!("expected {want}, got {shape:?}")));
        }
        Ok(())
    }

    /// Output of the last TCN stage, `[N, C, T]`.
    pub fn features(&self, s: &mut Session<'_, F>, input: Var) -> Result<Var> {
        self.check_input(s.tape.shape(input)?)?;
        let mut x = input;
        for m in &self.modules {
            x = match &m.module {
                Module::Stem(stem) => stem.forward(s, x)?,
                Module::Extractor(e) => e.forward(s, x)?,
                Module::Projection(u) => u.forward(s, x)?,
                Module::TcnStage(st) => {
                    if let Some(t) = &st.transition {
                        x = t.forward(s, x)?;
                    }
                    st.block.forward(s, x)?
                }
                Module::Classifier(_) => break,
            };
        }
        Ok(x)
    }

    /// Unnormalized class scores `[N, classes]`.
    pub fn logits(&self, s: &mut Session<'_, F>, input: Var, valid_len: &[usize]) -> Result<Var> {
        let feats = self.features(s, input)?;
        Ok(self.classifier().logits(s, feats, valid_len)?)
    }

    /// Class probabilities in evaluation mode, `[N, classes]`.
    pub fn predict(&self, input: &Tensor<F>, valid_len: &[usize]) -> Result<Tensor<F>> {
        let mut s = Session::new(&self.store, Mode::Eval, 0).with_grads(false);
        let x = s.input(input.clone())?;
        let feats = self.features(&mut s, x)?;
        let p = self.classifier().forward(&mut s, feats, valid_len)?;
        Ok(s.tape.value(p)?.clone())
    }

    /// Evaluation-mode TCN output for an input, `[N, C, T]`.
    pub fn eval_features(&self, input: &Tensor<F>) -> Result<Tensor<F>> {
        let mut s = Session::new(&self.store, Mode::Eval, 0).with_grads(false);
        let x = s.input(input.clone())?;
        let y = self.features(&mut s, x)?;
        Ok(s.tape.value(y)?.clone())
    }

    /// Owning sub-module of every parameter, by index; `None` marks an orphan.
    pub fn param_owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.store.params().len()];
        for (mi, m) in self.modules.iter().enumerate() {
            for p in m.params() {
                owners[p.index()] = Some(mi);
            }
        }
        owners
    }
}
