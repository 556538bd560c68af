use std::sync::Arc;

use arhgof::sde::{self, PathRecord, SdeKind, SdeModel};
use arhgof::ticks::{ingest_ticks, TickSeries};
use arhgof::{FunctionalSample, Grid};
use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;

#[test]
fn curve_csv_round_trip_keeps_grid_and_atom() {
    let grid = Arc::new(Grid::uniform(11, 1.0, 1.0).unwrap());
    let values = DMatrix::from_fn(4, 11, |i, k| (i as f64 + 0.1 * k as f64).sin() / 3.0);
    let sample = FunctionalSample::new(values, grid).unwrap();
    let mut buf = Vec::new();
    sample.write_csv(&mut buf).unwrap();
    let back = FunctionalSample::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.values(), sample.values());
    assert_eq!(back.grid().endpoint_atom(), 1.0);
    assert_eq!(back.grid().points(), sample.grid().points());
}

#[test]
fn path_csv_round_trip_keeps_model() {
    let model = SdeModel::new(SdeKind::Ckls { kappa: 0.2, mu: 0.09, sigma: 1.5, gamma: 1.5 }, 0.09);
    let path = sde::euler_maruyama(&model, 3.0, 0.01, 2).unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let back = PathRecord::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, path);
}

#[test]
fn ingested_ticks_match_split_path() {
    let day_length = 288;
    let days = 6;
    let delta = 1.0 / (day_length - 1) as f64;
    let model = SdeModel::new(SdeKind::Ou { kappa: 0.5, sigma: 0.05 }, 0.0);
    let path = sde::euler_maruyama(&model, days as f64, delta, 17).unwrap();
    let split = sde::split_path(&path, 1.0, day_length).unwrap();
    assert_eq!(split.n(), days);

    let start = NaiveDate::from_ymd_opt(2019, 5, 6).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut stamps = Vec::new();
    let mut values = Vec::new();
    for d in 0..days {
        for k in 0..day_length {
            stamps.push(start + Duration::days(d as i64) + Duration::minutes(5 * k as i64));
            values.push(split.values()[(d, k)]);
        }
    }
    // a trailing partial day is dropped
    stamps.push(start + Duration::days(days as i64));
    values.push(0.0);
    let series = TickSeries::new(stamps, values).unwrap();
    let mut csv = Vec::new();
    series.write_csv(&mut csv).unwrap();
    let report = ingest_ticks(&TickSeries::read_csv(csv.as_slice()).unwrap(), day_length).unwrap();

    assert_eq!(report.dropped.len(), 1);
    assert_eq!(report.curves.n(), days);
    let restored = report.curves.values().add_scalar(report.mean);
    assert!((restored - split.values()).amax() < 1e-12);
    let (a, b) = (report.curves.grid(), split.grid());
    assert_eq!(a.endpoint_atom(), b.endpoint_atom());
    assert!(a.points().iter().zip(b.points()).all(|(x, y)| (x - y).abs() < 1e-12));
    assert!(report.curves.values().mean().abs() < 1e-12);
}

#[test]
fn path_from_curves_inverts_split() {
    let model = SdeModel::new(SdeKind::Null { sigma: 0.3 }, 0.0);
    let path = sde::euler_maruyama(&model, 5.0, 0.1, 4).unwrap();
    let curves = sde::split_path(&path, 1.0, 11).unwrap();
    let back = PathRecord::from_curves(&curves).unwrap();
    assert_eq!(back.values.len(), path.values.len());
    assert!(back.values.iter().zip(&path.values).all(|(a, b)| a == b));
    assert!((back.delta - path.delta).abs() < 1e-12);
}
