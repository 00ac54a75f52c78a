//! Human-readable renderings of complexity reports and fixture verdicts, and
//! the JSON-lines training history.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use tempconv_core::complexity::{ComplexityReport, Metric, Verdict};
use tempconv_core::train::EpochRecord;

fn shape(s: &[usize]) -> String {
    let parts: Vec<String> = s.iter().map(usize::to_string).collect();
    parts.join("×")
}

fn millions(v: u64) -> String {
    format!("{:.3}", v as f64 / 1e6)
}

fn billions(v: u64) -> String {
    format!("{:.4}", v as f64 / 1e9)
}

/// One row per sub-module, then the TCN-only and overall totals, in units of
/// 10⁶ parameters and 10⁹ MACs.
pub fn complexity_markdown(r: &ComplexityReport) -> String {
    let mut out = format!("Input {}\n\n", r.input_shape);
    out.push_str("| Module | Component | Output | Params (×10⁶) | MACs (×10⁹) |\n");
    out.push_str("|---|---|---|---:|---:|\n");
    for m in &r.modules {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            m.name,
            m.component.name(),
            shape(&m.output_shape),
            millions(m.params),
            billions(m.macs)
        );
    }
    let _ = writeln!(
        out,
        "| **Total (TCN)** | | | {} | {} |",
        millions(r.tcn.params),
        billions(r.tcn.macs)
    );
    let _ = writeln!(
        out,
        "| **Total** | | | {} | {} |",
        millions(r.total.params),
        billions(r.total.macs)
    );
    out
}

pub fn complexity_text(r: &ComplexityReport) -> String {
    let mut out = format!("input {}\n", r.input_shape);
    let _ = writeln!(
        out,
        "{:<14} {:<10} {:<18} {:>12} {:>14}",
        "module", "component", "output", "params", "macs"
    );
    for m in &r.modules {
        let _ = writeln!(
            out,
            "{:<14} {:<10} {:<18} {:>12} {:>14}",
            m.name,
            m.component.name(),
            shape(&m.output_shape),
            m.params,
            m.macs
        );
    }
    let _ = writeln!(
        out,
        "Total (TCN): {} params ({}M), {} MACs ({}G)",
        r.tcn.params,
        millions(r.tcn.params),
        r.tcn.macs,
        billions(r.tcn.macs)
    );
    let _ = writeln!(
        out,
        "Total: {} params ({}M), {} MACs ({}G)",
        r.total.params,
        millions(r.total.params),
        r.total.macs,
        billions(r.total.macs)
    );
    out
}

fn metric(m: Metric) -> &'static str {
    match m {
        Metric::Params => "params",
        Metric::Macs => "macs",
    }
}

fn verdict(v: &Verdict) -> &'static str {
    if v.pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn verdicts_markdown(vs: &[Verdict]) -> String {
    let mut out = String::from("| Row | Metric | Expected | Computed | Deviation | Tolerance | Result |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---|\n");
    for v in vs {
        let _ = writeln!(
            out,
            "| {} | {} | {:.0} | {} | {:.2}% | {:.0}% | {} |",
            v.id,
            metric(v.metric),
            v.expected,
            v.computed,
            100.0 * v.relative_deviation,
            100.0 * v.tolerance,
            verdict(v)
        );
    }
    out
}

pub fn verdicts_text(vs: &[Verdict]) -> String {
    let mut out = String::new();
    for v in vs {
        let _ = writeln!(
            out,
            "{} {:<10} {:<6} expected {:.0} computed {} deviation {:.2}% (tolerance {:.0}%)",
            verdict(v),
            v.id,
            metric(v.metric),
            v.expected,
            v.computed,
            100.0 * v.relative_deviation,
            100.0 * v.tolerance
        );
    }
    out
}

/// One JSON object per line: `{"epoch", "lr", "train_loss", "val_acc"}`.
pub fn write_history<W: Write>(w: &mut W, history: &[EpochRecord]) -> io::Result<()> {
    for rec in history {
        serde_json::to_writer(&mut *w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(r: R) -> io::Result<Vec<EpochRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
