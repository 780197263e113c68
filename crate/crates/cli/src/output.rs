//! Run logs as CSV.
//!
//! One row per step; floats are written with 17 significant digits so that
//! parsing a row back yields the logged values bit for bit.

use std::fs::File;
use std::path::Path;

use varpose::RunRecord;

use crate::error::{io_error, CliError};

/// Column names, with units, in file order.
pub const COLUMNS: [&str; 40] = [
    "time_s",
    "true_r11",
    "true_r12",
    "true_r13",
    "true_r21",
    "true_r22",
    "true_r23",
    "true_r31",
    "true_r32",
    "true_r33",
    "true_b_x_m",
    "true_b_y_m",
    "true_b_z_m",
    "est_r11",
    "est_r12",
    "est_r13",
    "est_r21",
    "est_r22",
    "est_r23",
    "est_r31",
    "est_r32",
    "est_r33",
    "est_b_x_m",
    "est_b_y_m",
    "est_b_z_m",
    "principal_angle_rad",
    "pos_err_x_m",
    "pos_err_y_m",
    "pos_err_z_m",
    "omega_err_x_rad_s",
    "omega_err_y_rad_s",
    "omega_err_z_rad_s",
    "nu_err_x_m_s",
    "nu_err_y_m_s",
    "nu_err_z_m_s",
    "newton_iters",
    "energy",
    "pos_err_raw_x_m",
    "pos_err_raw_y_m",
    "pos_err_raw_z_m",
];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// The values of one record in [`COLUMNS`] order.
pub fn record_values(r: &RunRecord) -> Vec<f64> {
    let mut v = Vec::with_capacity(COLUMNS.len());
    v.push(r.time);
    for pose in [&r.true_pose, &r.est_pose] {
        let m = pose.rotation.matrix();
        for i in 0..3 {
            for j in 0..3 {
                v.push(m[(i, j)]);
            }
        }
        v.extend(pose.translation.iter());
    }
    let e = &r.errors;
    v.push(e.attitude);
    v.extend(e.position.iter());
    v.extend(e.omega.iter());
    v.extend(e.nu.iter());
    v.push(r.newton_iterations as f64);
    v.push(r.energy);
    v.extend(e.position_raw.iter());
    v
}

pub fn write_run_csv(records: &[RunRecord], path: &Path) -> Result<(), CliError> {
    if records.is_empty() {
        return Err(CliError::Core(varpose::Error::InvalidConfig(
            "no records to write".into(),
        )));
    }
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        let row: Vec<String> = record_values(r)
            .into_iter()
            .enumerate()
            .map(|(k, x)| {
                if COLUMNS[k] == "newton_iters" {
                    format!("{}", x as usize)
                } else {
                    float(x)
                }
            })
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_error(path))?;
    Ok(())
}

/// Header and rows of a run log.
pub fn read_run_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| CliError::Parse {
                    path: path.display().to_string(),
                    message: format!("bad number `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        for x in [0.1, 1.0 / 3.0, -2.220446049250313e-16, 6.02214076e23, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn header_has_units_and_no_duplicates() {
        let mut names = COLUMNS.to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), COLUMNS.len());
        assert!(COLUMNS.iter().filter(|c| c.starts_with("pos_err_") || c.starts_with("nu_err_")).all(|c| c.ends_with("_m") || c.ends_with("_m_s")));
    }
}
