use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::RunError;
use crate::decomposition::Decomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarKind {
    Start,
    Delta,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub label: String,
    pub kind: BarKind,
    pub value: f64,
}

/// `R(a)`, one bar `D_i(b) - D_i(a)` per component, then `R(b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waterfall {
    pub from: f64,
    pub to: f64,
    pub bars: Vec<Bar>,
    /// `R(a) + Σ ΔD_i - R(b)`.
    pub reconciliation_residual: f64,
}

impl Waterfall {
    pub fn new(from: f64, to: f64, start: f64, end: f64, deltas: Vec<(String, f64)>) -> Self {
        let sum: f64 = deltas.iter().map(|d| d.1).sum();
        let mut bars = vec![Bar {
            label: "start".into(),
            kind: BarKind::Start,
            value: start,
        }];
        bars.extend(deltas.into_iter().map(|(label, value)| Bar {
            label,
            kind: BarKind::Delta,
            value,
        }));
        bars.push(Bar {
            label: "end".into(),
            kind: BarKind::End,
            value: end,
        });
        Self {
            from,
            to,
            bars,
            reconciliation_residual: start + sum - end,
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.bars
            .iter()
            .filter(|b| b.kind == BarKind::Delta)
            .map(|b| b.value)
            .collect()
    }

    pub fn reconciles(&self, tol: f64) -> bool {
        let scale = self.bars.iter().map(|b| b.value.abs()).fold(1.0, f64::max);
        self.reconciliation_residual.abs() <= tol * scale
    }
}

fn unavailable(t: f64, available: &BTreeSet<String>) -> RunError {
    RunError::Input(format!(
        "evaluation time {t} is not available; available times: {}",
        available.iter().cloned().collect::<Vec<_>>().join(", ")
    ))
}

/// Waterfall over `(a, b]` from an in-memory decomposition; `a` and `b` must be evaluation times.
pub fn waterfall_from_decomposition(dec: &Decomposition, a: f64, b: f64) -> Result<Waterfall, RunError> {
    let available: BTreeSet<String> = dec.times().iter().map(|t| super::runner::fmt_time(*t)).collect();
    for t in [a, b] {
        if dec.grid().position(t).is_none() {
            return Err(unavailable(t, &available));
        }
    }
    let deltas = (0..dec.m())
        .map(|i| Ok((dec.labels()[i].clone(), dec.value(i, b)? - dec.value(i, a)?)))
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(Waterfall::new(a, b, dec.revaluation(a)?, dec.revaluation(b)?, deltas))
}

#[derive(Debug, Clone, Default)]
pub struct WaterfallSelection {
    pub seed: Option<u64>,
    pub level: Option<u32>,
    pub order: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Row {
    seed: u64,
    t: f64,
    component_label: String,
    #[serde(rename = "D_value")]
    d_value: f64,
    #[serde(rename = "R_value")]
    r_value: f64,
    partition_level: u32,
    order: String,
}

fn same_time(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-10 * x.abs().max(1.0)
}

/// Waterfall over `(a, b]` from a decomposition table written by the decompose command.
///
/// Defaults select the first seed, the finest level and the first order in the file.
pub fn waterfall_from_csv(path: &Path, a: f64, b: f64, selection: &WaterfallSelection) -> Result<Waterfall, RunError> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows: Vec<Row> = reader.deserialize().collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(RunError::Input(format!("{} has no rows", path.display())));
    }
    let seed = selection.seed.unwrap_or(rows[0].seed);
    let level = selection
        .level
        .unwrap_or_else(|| rows.iter().map(|r| r.partition_level).max().expect("rows"));
    let order = selection.order.clone().unwrap_or_else(|| rows[0].order.clone());
    let chosen: Vec<&Row> = rows
        .iter()
        .filter(|r| r.seed == seed && r.partition_level == level && r.order == order)
        .collect();
    if chosen.is_empty() {
        return Err(RunError::Input(format!(
            "no rows for seed {seed}, level {level}, order {order}"
        )));
    }
    let available: BTreeSet<String> = chosen.iter().map(|r| super::runner::fmt_time(r.t)).collect();
    let at = |t: f64| -> Result<Vec<&Row>, RunError> {
        let found: Vec<&Row> = chosen.iter().copied().filter(|r| same_time(r.t, t)).collect();
        if found.is_empty() {
            Err(unavailable(t, &available))
        } else {
            Ok(found)
        }
    };
    let (ra, rb) = (at(a)?, at(b)?);
    let deltas = ra
        .iter()
        .map(|x| {
            let y = rb
                .iter()
                .find(|y| y.component_label == x.component_label)
                .ok_or_else(|| RunError::Input(format!("component {} missing at {b}", x.component_label)))?;
            Ok((x.component_label.clone(), y.d_value - x.d_value))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(Waterfall::new(a, b, ra[0].r_value, rb[0].r_value, deltas))
}
