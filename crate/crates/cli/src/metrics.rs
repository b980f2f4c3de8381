//! Grading a reconstruction against its phantom.

use std::io::Write;

use quasirev::phantoms::Region;
use quasirev::{Error, Result, SpatialField};

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremeRow {
    pub inclusion: String,
    pub extreme_true: f64,
    pub extreme_comp: f64,
    pub err_rel: f64,
}

/// Extreme of `p_comp` over each region (maximum for positive inclusions,
/// minimum for negative ones) and its relative error.
pub fn metric_extreme_errors(p_comp: &SpatialField, regions: &[Region]) -> Result<Vec<ExtremeRow>> {
    let n = p_comp.spec().spatial_len();
    regions
        .iter()
        .map(|region| {
            if region.mask.len() != n {
                return Err(Error::Domain(format!("region `{}` has the wrong size", region.label)));
            }
            let picked = region
                .mask
                .iter()
                .zip(p_comp.values())
                .filter(|(&inside, _)| inside)
                .map(|(_, &v)| region.sign * v)
                .fold(f64::NEG_INFINITY, f64::max);
            if picked == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("region `{}` contains no grid nodes", region.label)));
            }
            let extreme_comp = region.sign * picked;
            Ok(ExtremeRow {
                inclusion: region.label.clone(),
                extreme_true: region.extreme_true,
                extreme_comp,
                err_rel: (extreme_comp - region.extreme_true).abs() / region.extreme_true.abs(),
            })
        })
        .collect()
}

/// `‖comp - truth‖ / ‖truth‖` in the discrete L² norm; plain `‖comp‖` when
/// the truth vanishes.
pub fn relative_l2_error(comp: &SpatialField, truth: &SpatialField) -> Result<f64> {
    let diff = comp.zip_map(truth, |a, b| a - b)?.l2_norm();
    let scale = truth.l2_norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

pub fn write_metrics_csv<W: Write>(rows: &[ExtremeRow], mut w: W) -> Result<()> {
    writeln!(w, "inclusion,extreme_true,extreme_comp,err_rel")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.inclusion, r.extreme_true, r.extreme_comp, r.err_rel)?;
    }
    Ok(())
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<ExtremeRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("inclusion,extreme_true,extreme_comp,err_rel") {
        return Err(Error::Data("metrics.csv: unexpected header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Data(format!("metrics.csv: malformed row {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("metrics.csv: bad number {s:?}")))
            };
            Ok(ExtremeRow {
                inclusion: f[0].to_string(),
                extreme_true: num(f[1])?,
                extreme_comp: num(f[2])?,
                err_rel: num(f[3])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use quasirev::phantoms::Phantom;
    use quasirev::GridSpec;

    #[test]
    fn exact_reconstruction_has_zero_error() {
        let spec = GridSpec::new(1.0, 40, 2, 0.2).unwrap();
        for phantom in [Phantom::test1(), Phantom::test2(true), Phantom::test3(), Phantom::test6()] {
            let p = phantom.sample(spec).unwrap();
            let rows = metric_extreme_errors(&p, &phantom.regions(spec)).unwrap();
            assert_eq!(rows.len(), phantom.inclusions.len());
            for row in rows {
                assert!(row.err_rel < 1e-12, "{} {:?}", phantom.name, row);
            }
        }
    }

    #[test]
    fn negative_inclusions_use_the_minimum() {
        let spec = GridSpec::new(1.0, 20, 2, 0.2).unwrap();
        let phantom = Phantom::test2(true);
        let p = phantom.sample(spec).unwrap().map(|v| 0.5 * v);
        let rows = metric_extreme_errors(&p, &phantom.regions(spec)).unwrap();
        assert!((rows[1].extreme_comp + 1.0).abs() < 1e-12);
        assert!((rows[1].err_rel - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_region_is_an_error() {
        let spec = GridSpec::new(1.0, 4, 2, 0.2).unwrap();
        let region = Region {
            label: "void".into(),
            mask: vec![false; spec.spatial_len()],
            sign: 1.0,
            extreme_true: 1.0,
        };
        assert!(metric_extreme_errors(&SpatialField::zeros(spec), &[region]).is_err());
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![ExtremeRow {
            inclusion: "bump".into(),
            extreme_true: 1.0,
            extreme_comp: 0.9912345678901234,
            err_rel: 0.008765432109876543,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_metrics_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), rows);
    }
}
