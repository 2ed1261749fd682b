use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::svm::{predict_scores, SvmModel};
use crate::error::{Error, Result};

/// Average precision of a ranking.
///
/// Items are sorted by descending score, ties by ascending original index;
/// AP is the mean over positives of the precision at each positive's rank.
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::invalid("average precision needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positives[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// AP of every class with at least one test positive.
    pub per_class_ap: BTreeMap<String, f64>,
    pub map: f64,
    pub warnings: Vec<String>,
    pub classes: Vec<String>,
    /// Test labels, row-aligned with `scores`.
    pub labels: Vec<String>,
    /// Raw per-class scores for every test item.
    pub scores: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let width = self.per_class_ap.keys().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$} | AP", "class");
        let _ = writeln!(out, "{}-+-------", "-".repeat(width));
        for (c, ap) in &self.per_class_ap {
            let _ = writeln!(out, "{c:<width$} | {:6.2}%", ap * 100.0);
        }
        let _ = writeln!(out, "{}-+-------", "-".repeat(width));
        let _ = writeln!(out, "{:<width$} | {:6.2}%", "mAP", self.map * 100.0);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Per-class AP from one-vs-rest scores. Classes without test positives are
/// left out of the mean and noted in `warnings`.
pub fn evaluate(model: &SvmModel, features: &[Vec<f64>], labels: &[String]) -> Result<EvalReport> {
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let scores = features
        .iter()
        .map(|f| predict_scores(model, f))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    for l in labels {
        if !model.classes.contains(l) && !warnings.iter().any(|w: &String| w.contains(&format!("'{l}'"))) {
            warnings.push(format!("test label '{l}' unknown to the model; counted as negative"));
        }
    }
    let mut per_class_ap = BTreeMap::new();
    for (ci, class) in model.classes.iter().enumerate() {
        let pos: Vec<bool> = labels.iter().map(|l| l == class).collect();
        if !pos.contains(&true) {
            warnings.push(format!("class '{class}' has no test positives; excluded from mAP"));
            log::warn!("class '{class}' has no test positives; excluded from mAP");
            continue;
        }
        let s: Vec<f64> = scores.iter().map(|row| row[ci]).collect();
        per_class_ap.insert(class.clone(), average_precision(&s, &pos)?);
    }
    if per_class_ap.is_empty() {
        return Err(Error::invalid("no class has a test positive; mAP undefined"));
    }
    let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(EvalReport {
        per_class_ap,
        map,
        warnings,
        classes: model.classes.clone(),
        labels: labels.to_vec(),
        scores,
    })
}

/// Rows of `(pipeline, [(column, mAP)])` as an aligned percentage table.
pub fn format_map_table(columns: &[&str], rows: &[(String, Vec<f64>)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<width$} |", "");
    for c in columns {
        let _ = write!(out, " {c:>10}");
    }
    out.push('\n');
    let _ = writeln!(out, "{}-+{}", "-".repeat(width), "-".repeat(11 * columns.len()));
    for (name, vals) in rows {
        let _ = write!(out, "{name:<width$} |");
        for v in vals {
            let _ = write!(out, " {:>9.2}%", v * 100.0);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        let ap = average_precision(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn positive_second_of_two() {
        assert_eq!(average_precision(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn ties_by_index() {
        // equal scores: positive at index 1 ranks second
        assert_eq!(average_precision(&[1.0, 1.0], &[false, true]).unwrap(), 0.5);
        assert_eq!(average_precision(&[1.0, 1.0], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn no_positives() {
        assert!(average_precision(&[1.0], &[false]).is_err());
    }

    fn model() -> SvmModel {
        SvmModel {
            classes: vec!["a".into(), "b".into()],
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            biases: vec![0.0, 0.0],
            c: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn perfect_eval() {
        let f = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.5]];
        let l: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let r = evaluate(&model(), &f, &l).unwrap();
        assert_eq!(r.map, 1.0);
        assert!(r.warnings.is_empty());
        assert!(r.to_table().contains("100.00%"));
    }

    #[test]
    fn absent_class_excluded() {
        let f = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let l: Vec<String> = ["a", "a"].iter().map(|s| s.to_string()).collect();
        let r = evaluate(&model(), &f, &l).unwrap();
        assert_eq!(r.per_class_ap.len(), 1);
        assert_eq!(r.map, r.per_class_ap["a"]);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("'b'"));
    }

    #[test]
    fn table_layout() {
        let t = format_map_table(&["synthetic"], &[("MF(RGB)".into(), vec![0.9056])]);
        assert!(t.contains("MF(RGB)"));
        assert!(t.contains("90.56%"));
    }
}
