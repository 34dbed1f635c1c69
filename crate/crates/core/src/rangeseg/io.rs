use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LidarPoint, PointCloud};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    z: f64,
    beam_row: usize,
    azimuth_col: usize,
    valid: u8,
}

/// Writes `x,y,z,beam_row,azimuth_col,valid` rows.
pub fn write_cloud_csv(path: &Path, pc: &PointCloud) -> Result<()> {
    let csv_err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for p in &pc.points {
        w.serialize(Row {
            x: p.x,
            y: p.y,
            z: p.z,
            beam_row: p.beam_row,
            azimuth_col: p.azimuth_col,
            valid: u8::from(p.valid),
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cloud_csv(path: &Path, sensor_id: &str) -> Result<PointCloud> {
    let csv_err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?;
    if headers != vec!["x", "y", "z", "beam_row", "azimuth_col", "valid"] {
        return Err(Error::format(
            path.display().to_string(),
            format!("unexpected header {headers:?}"),
        ));
    }
    let mut points = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(csv_err)?;
        let valid = match row.valid {
            0 => false,
            1 => true,
            v => {
                return Err(Error::format(
                    path.display().to_string(),
                    format!("valid flag must be 0 or 1, got {v}"),
                ))
            }
        };
        points.push(LidarPoint {
            x: row.x,
            y: row.y,
            z: row.z,
            beam_row: row.beam_row,
            azimuth_col: row.azimuth_col,
            valid,
        });
    }
    Ok(PointCloud {
        sensor_id: sensor_id.to_owned(),
        points,
    })
}
