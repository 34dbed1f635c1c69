use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ClusterModel, SegmentFeature, SegmentSource};
use crate::error::{Error, Result};

/// Writes `frame_id,segment_id,f_0,...,f_{D-1}` rows.
pub fn save_features(path: &Path, features: &[SegmentFeature]) -> Result<()> {
    let dim = features.first().map_or(0, |f| f.vector.len());
    if let Some(bad) = features.iter().find(|f| f.vector.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.vector.len(),
        });
    }
    let csv_err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["frame_id".to_string(), "segment_id".to_string()];
    header.extend((0..dim).map(|i| format!("f_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for f in features {
        let mut rec = vec![f.source.frame_id.clone(), f.source.segment_id.to_string()];
        rec.extend(f.vector.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature file written by [`save_features`] or produced externally.
///
/// With `known` set, every row must reference one of those segments.
pub fn load_external_features(
    path: &Path,
    known: Option<&BTreeSet<SegmentSource>>,
) -> Result<Vec<SegmentFeature>> {
    let ctx = || path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let csv_err = |e: csv::Error| Error::format(ctx(), e.to_string());
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "frame_id" || &header[1] != "segment_id" {
        return Err(Error::format(ctx(), "header must start with frame_id,segment_id"));
    }
    let dim = header.len() - 2;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != dim + 2 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rec.len().saturating_sub(2),
            });
        }
        let segment_id = rec[1]
            .parse()
            .map_err(|_| Error::format(ctx(), format!("bad segment id `{}`", &rec[1])))?;
        let source = SegmentSource {
            frame_id: rec[0].to_owned(),
            segment_id,
        };
        if known.is_some_and(|k| !k.contains(&source)) {
            return Err(Error::format(
                ctx(),
                format!("unknown segment {}:{}", source.frame_id, source.segment_id),
            ));
        }
        let vector = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(ctx(), e.to_string()))?;
        out.push(SegmentFeature { source, vector });
    }
    Ok(out)
}

/// `k,D,seed,inertia` header and value line, then one line per centroid.
pub fn write_cluster_model(path: &Path, model: &ClusterModel) -> Result<()> {
    let mut s = String::from("k,D,seed,inertia\n");
    let _ = writeln!(s, "{},{},{},{}", model.k(), model.dim(), model.seed, model.inertia);
    for c in &model.centroids {
        let row: Vec<String> = c.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_cluster_model(path: &Path) -> Result<ClusterModel> {
    let ctx = || path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("k,D,seed,inertia") {
        return Err(Error::format(ctx(), "missing `k,D,seed,inertia` header"));
    }
    let meta: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let bad = |what: &str| Error::format(ctx(), format!("bad {what}"));
    if meta.len() != 4 {
        return Err(bad("model line"));
    }
    let k: usize = meta[0].parse().map_err(|_| bad("k"))?;
    let dim: usize = meta[1].parse().map_err(|_| bad("D"))?;
    let seed: u64 = meta[2].parse().map_err(|_| bad("seed"))?;
    let inertia: f64 = meta[3].parse().map_err(|_| bad("inertia"))?;
    let centroids = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|_| bad("centroid value")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if centroids.len() != k {
        return Err(Error::format(ctx(), format!("expected {k} centroids, found {}", centroids.len())));
    }
    if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.len(),
        });
    }
    Ok(ClusterModel {
        centroids,
        inertia,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(frame: &str, seg: u16, v: Vec<f64>) -> SegmentFeature {
        SegmentFeature {
            source: SegmentSource {
                frame_id: frame.into(),
                segment_id: seg,
            },
            vector: v,
        }
    }

    #[test]
    fn two_rows_of_dim_four() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "frame_id,segment_id,f_0,f_1,f_2,f_3\na,1,1,2,3,4\nb,65534,0.5,0,0,-1\n").unwrap();
        let fs_ = load_external_features(&path, None).unwrap();
        assert_eq!(fs_.len(), 2);
        assert_eq!(fs_[1], feat("b", 65534, vec![0.5, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn empty_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "").unwrap();
        assert!(load_external_features(&path, None).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let features = vec![
            feat("frame_000", 3, vec![0.1 + 0.2, -1.0 / 3.0, 5e-324, 1e300]),
            feat("frame_001", 1, vec![std::f64::consts::PI, 0.0, -0.0, 2.5]),
        ];
        save_features(&path, &features).unwrap();
        let back = load_external_features(&path, None).unwrap();
        for (a, b) in features.iter().zip(&back) {
            assert_eq!(a.source, b.source);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.vector), bits(&b.vector));
        }
    }

    #[test]
    fn ragged_rows_and_unknown_segments_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "frame_id,segment_id,f_0,f_1\na,1,1,2\na,2,1\n").unwrap();
        assert!(load_external_features(&path, None).is_err());

        fs::write(&path, "frame_id,segment_id,f_0\na,1,1\na,9,1\n").unwrap();
        let known = BTreeSet::from([SegmentSource {
            frame_id: "a".into(),
            segment_id: 1,
        }]);
        assert!(load_external_features(&path, Some(&known)).is_err());
    }

    #[test]
    fn cluster_model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let model = ClusterModel {
            centroids: vec![vec![0.1, 0.2], vec![-3.0, 1.0 / 7.0]],
            inertia: 12.5,
            seed: 42,
        };
        write_cluster_model(&path, &model).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("k,D,seed,inertia\n2,2,42,12.5\n"));
        assert_eq!(read_cluster_model(&path).unwrap(), model);
    }
}
