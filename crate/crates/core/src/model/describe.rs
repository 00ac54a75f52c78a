use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::graph::{ModelGraph, Module};
use super::receptive::receptive_field;
use crate::complexity::{trace, InputShape};
use crate::scalar::Scalar;

fn shape_str(s: &[usize]) -> String {
    let parts: Vec<String> = s.iter().map(|d| format!("{d}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Stable multi-line summary: metadata, every config field, receptive field
/// and one row per sub-module with its output shape (at the reference
/// 1×29×88×88 input) and parameter count.
pub fn describe<F: Scalar>(graph: &ModelGraph<F>) -> String {
    let mut out = String::new();
    let m = &graph.meta;
    let _ = writeln!(
        out,
        "model {:016x} (build {}, seed {})",
        m.config_hash, m.build_version, m.seed
    );
    out.push_str("config:\n");
    for line in graph.config.canonical().lines() {
        let _ = writeln!(out, "  {line}");
    }
    let rf = receptive_field(&graph.config);
    let _ = writeln!(
        out,
        "receptive field: {} frames (tcn {}, stem {})",
        rf.total, rf.tcn, rf.stem
    );
    let input = InputShape::default();
    let costs = trace(graph, input).ok();
    let _ = writeln!(out, "modules (input {input}):");
    for (i, sm) in graph.modules.iter().enumerate() {
        let detail = match &sm.module {
            Module::TcnStage(st) => format!(
                "{} width {} dilation {}{}",
                st.block.spec.kind,
                st.block.channels,
                st.block.dilation,
                if st.transition.is_some() { " +transition" } else { "" }
            ),
            Module::Stem(s) => format!("conv3d k{:?} s{:?}", s.spec.kernel, s.spec.stride),
            Module::Extractor(e) => format!("{} ir2d blocks -> {}", e.blocks.len(), e.spec.out_dim),
            Module::Projection(u) => format!("pw {} -> {}", u.conv.spec.in_channels, u.conv.spec.out_channels),
            Module::Classifier(c) => format!("linear {} -> {}", c.linear.in_features, c.linear.out_features),
        };
        let shape = costs
            .as_ref()
            .map_or_else(|| String::from("?"), |c| shape_str(&c[i].output_shape));
        let _ = writeln!(
            out,
            "  {:<14} {:<10} {:<36} out {:<18} params {}",
            sm.name,
            sm.component().name(),
            detail,
            shape,
            sm.param_count()
        );
    }
    let _ = writeln!(out, "total params: {}", graph.store.num_params());
    out
}
