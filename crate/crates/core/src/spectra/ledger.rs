//! Per-frequency audit of the stability hypotheses along a profile family.

use std::fmt::Write as _;

use serde::Serialize;

use super::index::{check_h12, distinct, h12_bound, negative_index, IndexIdentity};
use super::trapping::trapping_test;
use super::{full_spectrum, SpectrumConfig, SpectrumReport};
use crate::profiles::{ProfileFamily, RadialProfile};

pub const LEDGER_HEADER: &str = "omega,q,q_prime,h5,h6,h7_geo,h7_alg,h8,h14,n_neg,identity_residual,trap_form,trap_expected,min_lambda,max_lambda";

#[derive(Debug, Clone, Serialize)]
pub struct KernelDims {
    pub geo: usize,
    pub alg: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogRow {
    pub lambda: f64,
    pub s: i8,
    pub n_j: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct H12Summary {
    pub bound: u64,
    pub violations: usize,
    pub complete: bool,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrappingSummary {
    pub j: usize,
    pub form_value: f64,
    pub expected: f64,
    pub alpha_exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityLedger {
    pub omega: f64,
    pub q: f64,
    pub q_prime: f64,
    pub h5_ok: bool,
    pub h6_ok: Option<bool>,
    pub h7_kernel: Option<KernelDims>,
    pub h7_ok: Option<bool>,
    pub h7_reason: Option<String>,
    pub h8_ok: Option<bool>,
    pub h11_catalog: Vec<CatalogRow>,
    pub h12: Option<H12Summary>,
    pub h14_ok: Option<bool>,
    pub trapping: Option<TrappingSummary>,
    pub index: Option<IndexIdentity>,
    /// "field: ErrorName" for every audit that failed to evaluate
    pub errors: Vec<String>,
}

/// One ledger row; never fails, unevaluated fields carry error markers instead.
pub fn ledger_row(
    profile: &RadialProfile,
    q_prime: f64,
    h5_ok: bool,
    cfg: &SpectrumConfig,
) -> (StabilityLedger, Option<SpectrumReport>) {
    let mut row = StabilityLedger {
        omega: profile.omega,
        q: profile.q,
        q_prime,
        h5_ok,
        h6_ok: None,
        h7_kernel: None,
        h7_ok: None,
        h7_reason: None,
        h8_ok: None,
        h11_catalog: Vec::new(),
        h12: None,
        h14_ok: None,
        trapping: None,
        index: None,
        errors: Vec::new(),
    };
    let report = match full_spectrum(profile, cfg) {
        Ok(r) => r,
        Err(e) => {
            row.errors.push(format!("spectrum: {}", e.name()));
            return (row, None);
        }
    };
    row.h6_ok = Some(report.spectrally_stable);
    let (geo, alg) = report.kernel_totals();
    row.h7_kernel = Some(KernelDims { geo, alg });
    row.h7_ok = Some(geo == 1 && alg == 2);
    let k1 = report.kernel.iter().find(|k| k.k == 1).map_or(0, |k| k.alg);
    if k1 > 0 && profile.epsilon() == 0.0 {
        row.h7_reason = Some("translation-invariant".into());
    }
    row.h8_ok = Some(report.h8_ok);
    row.h11_catalog = report
        .catalog
        .iter()
        .map(|c| CatalogRow {
            lambda: c.lambda,
            s: c.s,
            n_j: c.n_j,
        })
        .collect();
    let lambdas: Vec<f64> = report.catalog.iter().map(|c| c.lambda).collect();
    let n = report.catalog.iter().map(|c| c.n_j).max().unwrap_or(0);
    let h12 = check_h12(&distinct(&lambdas, 1e-9), h12_bound(n), cfg.resonance_tol, cfg.h12_node_cap);
    row.h12 = Some(H12Summary {
        bound: h12.bound,
        violations: h12.violations.len(),
        complete: h12.complete,
        holds: h12.holds(),
    });
    row.h14_ok = Some(report.catalog.iter().any(|c| c.s == 1));
    if let Some(j) = report.catalog.iter().position(|c| c.s == 1) {
        match trapping_test(profile, &report, j) {
            Ok(t) => {
                row.trapping = Some(TrappingSummary {
                    j,
                    form_value: t.form_value,
                    expected: t.expected,
                    alpha_exponent: t.alpha_exponent,
                })
            }
            Err(e) => row.errors.push(format!("trapping: {}", e.name())),
        }
    }
    match negative_index(profile, &report, q_prime, cfg) {
        Ok(ix) => row.index = Some(ix),
        Err(e) => row.errors.push(format!("index: {}", e.name())),
    }
    (row, Some(report))
}

/// Ledger rows for every member of a family.
pub fn hypothesis_ledger(family: &ProfileFamily, cfg: &SpectrumConfig) -> Vec<(StabilityLedger, Option<SpectrumReport>)> {
    let h5 = !family.q_prime_sign_change && family.q_prime.iter().all(|q| *q != 0.0);
    family
        .profiles
        .iter()
        .zip(&family.q_prime)
        .map(|(p, &qp)| ledger_row(p, qp, h5, cfg))
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt<T: ToString>(x: Option<T>, marker: &str) -> String {
    x.map_or_else(|| marker.to_string(), |v| v.to_string())
}

impl StabilityLedger {
    pub fn csv_row(&self) -> String {
        let na = if self.errors.is_empty() { "NA" } else { "ERR" };
        let mut s = String::new();
        let trap = self.trapping.as_ref();
        let lam = |f: fn(f64, f64) -> f64, init: f64| {
            if self.h11_catalog.is_empty() {
                "NA".to_string()
            } else {
                num(self.h11_catalog.iter().map(|c| c.lambda).fold(init, f))
            }
        };
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(self.omega),
            num(self.q),
            num(self.q_prime),
            self.h5_ok,
            opt(self.h6_ok, na),
            opt(self.h7_kernel.as_ref().map(|k| k.geo), na),
            opt(self.h7_kernel.as_ref().map(|k| k.alg), na),
            opt(self.h8_ok, na),
            opt(self.h14_ok, na),
            opt(self.index.as_ref().map(|i| i.n_neg), na),
            opt(self.index.as_ref().and_then(|i| i.identity_residual), "NA"),
            trap.map_or("NA".into(), |t| num(t.form_value)),
            trap.map_or("NA".into(), |t| num(t.expected)),
            lam(f64::min, f64::INFINITY),
            lam(f64::max, 0.0),
        )
        .unwrap();
        s
    }
}

pub fn ledger_csv(rows: &[StabilityLedger]) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
