//! Plain-text defense deeds.
//!
//! Amounts follow Italian conventions (`5.600,00 euros`); the document ends
//! with the two alternatives a judge chooses between.

use super::case::{CaseRecord, FeatureValue};
use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};
use crate::error::RenderError;

pub const DOES_NOT_ORDER: &str = "DOES NOT ORDER the reduction of the monthly rental fee";
pub const ORDERS: &str = "ORDERS the reduction of the [...] (with the possibility of indicating a percentage between 5% and 100%) of the monthly rental fee";

/// Placeholder names in template order, duplicates included.
pub fn placeholders(template: &str) -> Result<Vec<String>, RenderError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or(RenderError::UnterminatedPlaceholder)?;
        out.push(after[..end].trim().to_string());
        rest = &after[end + 1..];
    }
    Ok(out)
}

/// `5600.0, 2` → `5.600,00`.
pub fn format_italian(value: f64, decimals: usize) -> String {
    let fixed = format!("{:.*}", decimals, value.abs());
    let (int_part, frac_part) = match fixed.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (fixed.as_str(), None),
    };
    let mut grouped = String::new();
    for (i, ch) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push('.');
        }
        grouped.push(ch);
    }
    let mut out = String::new();
    if value < 0.0 && fixed.chars().any(|c| c != '0' && c != '.') {
        out.push('-');
    }
    out.push_str(&grouped);
    if let Some(f) = frac_part {
        out.push(',');
        out.push_str(f);
    }
    out
}

fn format_percent(fraction: f64) -> String {
    let pct = (fraction * 100.0 * 100.0).round() / 100.0;
    let mut s = format_italian(pct, 2);
    if s.contains(',') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with(',') {
            s.pop();
        }
    }
    s.push('%');
    s
}

fn with_unit(amount: String, unit: &str, singular: bool) -> String {
    match unit {
        "" => amount,
        "EUR" => format!("{amount} euros"),
        u if singular && u.ends_with('s') => format!("{amount} {}", &u[..u.len() - 1]),
        u => format!("{amount} {u}"),
    }
}

/// Renders one value the way it appears in a deed.
pub fn render_value(spec: &FeatureSpec, value: &FeatureValue) -> String {
    match (spec.kind, value) {
        (FeatureKind::Boolean, FeatureValue::Bool(b)) => {
            let text = if *b { &spec.true_text } else { &spec.false_text };
            text.clone().unwrap_or_else(|| if *b { "yes".into() } else { "no".into() })
        }
        (FeatureKind::Categorical, FeatureValue::Category(c)) => {
            spec.labels.get(c).cloned().unwrap_or_else(|| c.clone())
        }
        (FeatureKind::Percent, FeatureValue::Number(v)) => format_percent(*v),
        (FeatureKind::Integer, FeatureValue::Number(v)) => {
            with_unit(format!("{}", *v as i64), &spec.unit, *v == 1.0)
        }
        (FeatureKind::Numeric, FeatureValue::Number(v)) => {
            let decimals = spec.decimals.unwrap_or(2) as usize;
            with_unit(format_italian(*v, decimals), &spec.unit, false)
        }
        (_, other) => other.to_string(),
    }
}

/// Fills the schema template with the case's rendered values.
pub fn render_document(schema: &FeatureSchema, case: &CaseRecord) -> Result<String, RenderError> {
    let template = &schema.document_template;
    let mut body = String::with_capacity(template.len() * 2);
    let mut rest = template.as_str();
    while let Some(start) = rest.find('{') {
        body.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or(RenderError::UnterminatedPlaceholder)?;
        let name = after[..end].trim();
        let spec = schema
            .feature(name)
            .ok_or_else(|| RenderError::UnresolvedPlaceholder(name.to_string()))?;
        let value = case
            .get(name)
            .ok_or_else(|| RenderError::UnresolvedPlaceholder(name.to_string()))?;
        body.push_str(&render_value(spec, value));
        rest = &after[end + 1..];
    }
    body.push_str(rest);

    let mut doc = format!("Case {}\n\n", case.case_id);
    doc.push_str(body.trim_end());
    doc.push_str("\n\nThe Judge chooses one of the following alternatives:\n\n");
    doc.push_str(&format!("- {DOES_NOT_ORDER};\n- {ORDERS}.\n"));
    Ok(doc)
}
