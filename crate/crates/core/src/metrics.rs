//! Temporal IoU and ROUGE-L.

use thiserror::Error;

use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("invalid interval [{start}, {end}]")]
pub struct InvalidInterval {
    pub start: f64,
    pub end: f64,
}

fn check(iv: (f64, f64)) -> Result<(), InvalidInterval> {
    if iv.0.is_nan() || iv.1.is_nan() || iv.0 > iv.1 {
        return Err(InvalidInterval {
            start: iv.0,
            end: iv.1,
        });
    }
    Ok(())
}

/// Intersection over union of two time intervals given as `(start, end)`.
///
/// Two zero-length intervals score 1 when they are the same point and 0
/// otherwise.
pub fn temporal_iou(a: (f64, f64), b: (f64, f64)) -> Result<f64, InvalidInterval> {
    check(a)?;
    check(b)?;
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let hull = a.1.max(b.1) - a.0.min(b.0);
    if hull <= 0.0 {
        // Both intervals are the same point.
        return Ok(1.0);
    }
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over lowercased, punctuation-stripped whitespace tokens.
pub fn rouge_l(a: &str, b: &str) -> f64 {
    let ta = tokenize(a);
    let tb = tokenize(b);
    rouge_l_tokens(&ta, &tb)
}

pub fn rouge_l_tokens<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(a, b) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / a.len() as f64;
    let r = lcs / b.len() as f64;
    2.0 * p * r / (p + r)
}
