use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{EvalReport, NormalizedConfusion};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct ReportFile<'a> {
    miou_defined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    miou: Option<f64>,
    pixel_accuracy: f64,
    total_labeled: u64,
    unmapped_pixel_count: u64,
    class: Vec<ClassRow<'a>>,
}

#[derive(Serialize)]
struct ClassRow<'a> {
    gt_class: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    /// Label as written in prediction maps.
    pseudo_class: usize,
    present: bool,
    iou: f64,
}

/// Writes the report as TOML. `class_names`, when given, names the
/// ground-truth classes in order.
pub fn write_report(path: &Path, report: &EvalReport, class_names: Option<&[String]>) -> Result<()> {
    let file = ReportFile {
        miou_defined: report.miou.is_some(),
        miou: report.miou,
        pixel_accuracy: report.pixel_accuracy,
        total_labeled: report.total_labeled,
        unmapped_pixel_count: report.unmapped_pixel_count,
        class: report
            .per_class_iou
            .iter()
            .zip(&report.mapping.assignment)
            .enumerate()
            .map(|(c, (iou, &j))| ClassRow {
                gt_class: c,
                name: class_names.and_then(|n| n.get(c)).map(String::as_str),
                pseudo_class: j + 1,
                present: iou.is_some(),
                iou: iou.unwrap_or(0.0),
            })
            .collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::format("report", e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the normalised confusion as CSV: a header of pseudo-class labels,
/// then one row per ground-truth class.
pub fn write_normalized_csv(path: &Path, conf: &NormalizedConfusion) -> Result<()> {
    let mut s = String::from("gt_class");
    for j in &conf.column_order {
        let _ = write!(s, ",pseudo_{}", j + 1);
    }
    s.push('\n');
    for (c, row) in conf.values.iter().enumerate() {
        let _ = write!(s, "{c}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate, hungarian_match, normalized_confusion_report, ConfusionMatrix};

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let conf = ConfusionMatrix::from_counts(2, 3, vec![3, 1, 0, 0, 0, 4]).unwrap();
        let mapping = hungarian_match(&conf).unwrap();
        let report = evaluate(&conf, &mapping).unwrap();
        let path = dir.path().join("r.toml");
        write_report(&path, &report, Some(&["car".into(), "pole".into()])).unwrap();
        let parsed: toml::Table = fs::read_to_string(&path).unwrap().parse().unwrap();
        assert_eq!(parsed["miou"].as_float(), report.miou);
        assert_eq!(parsed["class"][1]["pseudo_class"].as_integer(), Some(3));
        assert_eq!(parsed["class"][0]["name"].as_str(), Some("car"));

        let csv = dir.path().join("c.csv");
        write_normalized_csv(&csv, &normalized_confusion_report(&conf, &mapping).unwrap()).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text, "gt_class,pseudo_1,pseudo_3,pseudo_2\n0,0.75,0,0.25\n1,0,1,0\n");
    }

    #[test]
    fn undefined_miou_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let conf = ConfusionMatrix::zeros(1, 1);
        let report = evaluate(&conf, &hungarian_match(&conf).unwrap()).unwrap();
        let path = dir.path().join("r.toml");
        write_report(&path, &report, None).unwrap();
        let parsed: toml::Table = fs::read_to_string(&path).unwrap().parse().unwrap();
        assert_eq!(parsed["miou_defined"].as_bool(), Some(false));
        assert!(!parsed.contains_key("miou"));
    }
}
