//! Result documents and their human-readable renderings. The machine forms
//! are plain JSON (diffed by tests); the tables here are for people.

use serde::{Deserialize, Serialize};

use killchain_core::campaign::CampaignReport;
use killchain_core::error::{Error, Result};
use killchain_core::extraction::HyperplaneEstimate;
use killchain_core::inversion::InversionResult;
use killchain_core::models::TargetModel;

/// What `extract` writes: the clone plus its scorecard. The raw transcript
/// can be large, so the document carries its length and digest instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionDoc {
    pub attack: String,
    pub queries_used: u64,
    pub r_test: f64,
    pub r_unif: f64,
    pub transcript_len: usize,
    pub transcript_sha256: String,
    /// Recovered decision boundary, for the hyperplane attack only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperplane: Option<HyperplaneEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub clone: TargetModel,
}

/// Any file `report` knows how to render.
#[derive(Debug, Clone)]
pub enum ResultDoc {
    Extraction(ExtractionDoc),
    Campaign(CampaignReport),
    Inversion(InversionResult),
}

/// Identify a result file by its shape. The three documents have disjoint
/// required fields, so the first successful parse wins.
pub fn sniff_result(text: &str) -> Result<ResultDoc> {
    if let Ok(doc) = serde_json::from_str::<ExtractionDoc>(text) {
        return Ok(ResultDoc::Extraction(doc));
    }
    if let Ok(doc) = serde_json::from_str::<CampaignReport>(text) {
        return Ok(ResultDoc::Campaign(doc));
    }
    if let Ok(doc) = serde_json::from_str::<InversionResult>(text) {
        return Ok(ResultDoc::Inversion(doc));
    }
    Err(Error::Parse(
        "not an extraction, campaign, or inversion result".into(),
    ))
}

pub fn render(doc: &ResultDoc) -> String {
    match doc {
        ResultDoc::Extraction(d) => render_extraction(d),
        ResultDoc::Campaign(r) => render_campaign(r),
        ResultDoc::Inversion(r) => render_inversion(r),
    }
}

const KEY_WIDTH: usize = 18;

fn row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("  {key:<KEY_WIDTH$} {value}\n"));
}

/// serde's snake/kebab name for a unit enum variant.
fn tag_of<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => "?".into(),
    }
}

fn render_extraction(d: &ExtractionDoc) -> String {
    let mut out = String::from("extraction result\n");
    row(&mut out, "attack", &d.attack);
    row(
        &mut out,
        "clone",
        format!(
            "{}, d={}, {} classes",
            d.clone.kind_name(),
            d.clone.dim(),
            d.clone.class_count()
        ),
    );
    row(&mut out, "queries_used", d.queries_used);
    row(&mut out, "1 - r_test", format!("{:.6}", 1.0 - d.r_test));
    row(&mut out, "1 - r_unif", format!("{:.6}", 1.0 - d.r_unif));
    row(
        &mut out,
        "transcript",
        format!("{} probes, sha256 {}", d.transcript_len, d.transcript_sha256),
    );
    if let Some(h) = &d.hyperplane {
        row(
            &mut out,
            "hyperplane",
            format!(
                "w_hat {:?}, beta_hat {:.6}, precision {:.1e}",
                h.w_hat, h.beta_hat, h.precision
            ),
        );
    }
    for note in &d.notes {
        row(&mut out, "note", note);
    }
    out
}

fn render_campaign(r: &CampaignReport) -> String {
    let mut out = String::from("campaign report\n");
    row(&mut out, "outcome", tag_of(&r.outcome));
    row(&mut out, "final_phase", tag_of(&r.final_phase));
    row(&mut out, "total_queries", r.total_queries);
    row(&mut out, "ticks_elapsed", r.ticks_elapsed);
    row(&mut out, "alerts", r.alerts.len());
    for p in &r.phases {
        row(
            &mut out,
            &format!("  {}", tag_of(&p.phase)),
            format!("{} queries", p.queries),
        );
    }
    if let Some(f) = &r.clone_fidelity {
        row(
            &mut out,
            "clone",
            format!(
                "{}: {} queries, 1 - r_test {:.6}, 1 - r_unif {:.6}",
                f.attack,
                f.queries_used,
                1.0 - f.r_test,
                1.0 - f.r_unif
            ),
        );
    }
    let last_drift = r.drift_trace.last().copied().unwrap_or(0.0);
    row(
        &mut out,
        "drift",
        format!("{} epochs, final {:.6}", r.drift_trace.len(), last_drift),
    );
    row(
        &mut out,
        "x_star",
        format!(
            "class {} -> class {}",
            r.x_star_label_initial, r.x_star_label_final
        ),
    );
    row(&mut out, "seed", r.seeds.master);
    out
}

fn render_inversion(r: &InversionResult) -> String {
    let mut out = String::from("inversion result\n");
    let coords: Vec<String> = r.x_opt.iter().map(|v| format!("{v:.6}")).collect();
    row(&mut out, "x_opt", format!("[{}]", coords.join(", ")));
    row(
        &mut out,
        "achieved",
        format!("{:.6}", r.achieved_confidence),
    );
    row(&mut out, "passes", r.passes);
    row(&mut out, "queries_used", r.queries_used);
    row(&mut out, "trace", format!("{} entries", r.trace.len()));
    if let Some(dist) = r.nearest_exemplar {
        row(&mut out, "nearest_exemplar", format!("{dist:.6}"));
    }
    out
}
