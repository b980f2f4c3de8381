//! Dense grid functions: spatial fields, space-time fields and boundary time
//! series, plus their CSV encodings.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{BoundaryNode, GridSpec, Side};

/// Values on the `(Nx+1) x (Nx+1)` spatial grid, row-major in `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.spatial_len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.spatial_len() {
            return Err(Error::Domain(format!(
                "spatial field needs {} values, got {}",
                spec.spatial_len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let m = spec.nodes_per_axis();
            return Err(Error::Data(format!(
                "non-finite value at node ({}, {})",
                k / m + 1,
                k % m + 1
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.spatial_offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.spec.spatial_offset(i, j);
        self.values[k] = value;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L^2(Omega)` norm with nodal quadrature weight `dx^2`.
    pub fn l2_norm(&self) -> f64 {
        let dx = self.spec.dx();
        (self.values.iter().map(|v| v * v).sum::<f64>() * dx * dx).sqrt()
    }

    pub fn zip_map(&self, other: &SpatialField, f: impl Fn(f64, f64) -> f64) -> Result<SpatialField> {
        if self.spec != other.spec {
            return Err(Error::Domain("spatial fields live on different grids".into()));
        }
        Ok(SpatialField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpatialField {
        SpatialField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Writes `x,y,value` rows in `(i, j)` row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,value")?;
        let m = self.spec.nodes_per_axis();
        for i in 1..=m {
            for j in 1..=m {
                writeln!(w, "{},{},{}", self.spec.x(i), self.spec.y(j), self.get(i, j))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(spec: GridSpec, r: R) -> Result<Self> {
        let rows = read_rows(r, &["x", "y", "value"])?;
        if rows.len() != spec.spatial_len() {
            return Err(Error::Data(format!(
                "expected {} rows, found {}",
                spec.spatial_len(),
                rows.len()
            )));
        }
        let values = rows
            .iter()
            .map(|row| parse_f64(&row[2]))
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(spec, values)
    }
}

/// Values on every space-time node, stored in lineup order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.lineup_len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[self.spec.offset(i, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, value: f64) {
        let k = self.spec.offset(i, j, l);
        self.values[k] = value;
    }

    /// Lineup vector: entry `n-1` holds the value at `delineup(n)`.
    pub fn to_lineup(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn from_lineup(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.lineup_len() {
            return Err(Error::Domain(format!(
                "lineup vector needs {} entries, got {}",
                spec.lineup_len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let idx = spec.delineup(k + 1)?;
            return Err(Error::Data(format!("non-finite value at node {idx:?}")));
        }
        Ok(Self { spec, values })
    }

    /// Spatial slice at time level `l`.
    pub fn level(&self, l: usize) -> SpatialField {
        let m = self.spec.nodes_per_axis();
        let mut out = SpatialField::zeros(self.spec);
        for i in 1..=m {
            for j in 1..=m {
                out.set(i, j, self.get(i, j, l));
            }
        }
        out
    }

    pub fn set_level(&mut self, l: usize, field: &SpatialField) {
        let m = self.spec.nodes_per_axis();
        for i in 1..=m {
            for j in 1..=m {
                self.set(i, j, l, field.get(i, j));
            }
        }
    }

    /// Time series at a single spatial node.
    pub fn series(&self, i: usize, j: usize) -> &[f64] {
        let start = self.spec.offset(i, j, 1);
        &self.values[start..start + self.spec.time_levels()]
    }

    /// Second-order time derivative at every node (see [`rate_second_order`]).
    pub fn time_derivative(&self) -> Result<SpaceTimeField> {
        let dt = self.spec.dt();
        let lt = self.spec.time_levels();
        let mut values = Vec::with_capacity(self.values.len());
        for chunk in self.values.chunks(lt) {
            values.extend(rate_second_order(chunk, dt)?);
        }
        Ok(SpaceTimeField {
            spec: self.spec,
            values,
        })
    }

    /// Injection onto a coarser grid whose subdivisions divide this one's by
    /// `factor` in space and time.
    pub fn restrict(&self, coarse: GridSpec, factor: usize) -> Result<SpaceTimeField> {
        if coarse.nx() * factor != self.spec.nx() || coarse.nt() * factor != self.spec.nt() {
            return Err(Error::Domain(format!(
                "grid {}x{} is not a x{factor} refinement of {}x{}",
                self.spec.nx(),
                self.spec.nt(),
                coarse.nx(),
                coarse.nt()
            )));
        }
        let mut out = SpaceTimeField::zeros(coarse);
        let m = coarse.nodes_per_axis();
        for i in 1..=m {
            for j in 1..=m {
                for l in 1..=coarse.time_levels() {
                    let v = self.get((i - 1) * factor + 1, (j - 1) * factor + 1, (l - 1) * factor + 1);
                    out.set(i, j, l, v);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the slice at time level `l` in the spatial CSV format.
    pub fn write_level_csv<W: Write>(&self, l: usize, w: W) -> Result<()> {
        if l == 0 || l > self.spec.time_levels() {
            return Err(Error::Domain(format!("time level {l} out of range")));
        }
        self.level(l).write_csv(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Dirichlet trace `u` on the boundary.
    Value,
    /// Outward normal derivative `G`.
    Flux,
    /// Time derivative of the flux, `G_t`.
    FluxRate,
}

/// One value per (boundary node, time level). Boundary nodes follow
/// [`GridSpec::boundary_nodes`]; storage is node-major, time-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySeries {
    spec: GridSpec,
    kind: BoundaryKind,
    nodes: Vec<BoundaryNode>,
    values: Vec<f64>,
}

/// Flux and flux-rate data share the boundary-series container.
pub type BoundaryFluxSeries = BoundarySeries;

impl BoundarySeries {
    pub fn zeros(spec: GridSpec, kind: BoundaryKind) -> Self {
        let nodes = spec.boundary_nodes();
        let values = vec![0.0; nodes.len() * spec.time_levels()];
        Self {
            spec,
            kind,
            nodes,
            values,
        }
    }

    /// Samples `value(x, y, t)` on every boundary node and time level.
    pub fn from_fn(spec: GridSpec, kind: BoundaryKind, value: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let mut out = Self::zeros(spec, kind);
        for k in 0..out.nodes.len() {
            let BoundaryNode { i, j, .. } = out.nodes[k];
            for l in 1..=spec.time_levels() {
                let v = value(spec.x(i), spec.y(j), spec.t(l));
                if !v.is_finite() {
                    return Err(Error::Data(format!("non-finite boundary value at ({i}, {j}, {l})")));
                }
                out.set(k, l, v);
            }
        }
        Ok(out)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }
    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, slot: usize, l: usize) -> f64 {
        self.values[slot * self.spec.time_levels() + l - 1]
    }

    #[inline]
    pub fn set(&mut self, slot: usize, l: usize, value: f64) {
        let k = slot * self.spec.time_levels() + l - 1;
        self.values[k] = value;
    }

    pub fn series(&self, slot: usize) -> &[f64] {
        let lt = self.spec.time_levels();
        &self.values[slot * lt..(slot + 1) * lt]
    }

    /// `G_t` from `G`: central differences inside, one-sided second-order
    /// differences at both ends. Requires `Nt >= 2`.
    pub fn time_derivative(&self) -> Result<BoundarySeries> {
        if self.kind != BoundaryKind::Flux {
            return Err(Error::Config("time derivative expects a flux series".into()));
        }
        if self.spec.nt() < 2 {
            return Err(Error::Config(format!(
                "time derivative needs N_t >= 2, got {}",
                self.spec.nt()
            )));
        }
        let dt = self.spec.dt();
        let mut values = Vec::with_capacity(self.values.len());
        for chunk in self.values.chunks(self.spec.time_levels()) {
            values.extend(rate_second_order(chunk, dt)?);
        }
        Ok(BoundarySeries {
            spec: self.spec,
            kind: BoundaryKind::FluxRate,
            nodes: self.nodes.clone(),
            values,
        })
    }

    /// Entrywise `self - other`; both must share grid and kind.
    pub fn difference(&self, other: &BoundarySeries) -> Result<BoundarySeries> {
        if self.spec != other.spec || self.kind != other.kind {
            return Err(Error::Domain("boundary series are not compatible".into()));
        }
        Ok(BoundarySeries {
            spec: self.spec,
            kind: self.kind,
            nodes: self.nodes.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Lineup data vector: boundary entries at their lineup positions, zero
    /// elsewhere.
    pub fn to_lineup(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.lineup_len()];
        for (k, node) in self.nodes.iter().enumerate() {
            for l in 1..=self.spec.time_levels() {
                out[self.spec.offset(node.i, node.j, l)] = self.get(k, l);
            }
        }
        out
    }

    /// `t -> ||G(., t)||_{L^2(boundary)}` with quadrature weight `dx` per node.
    pub fn boundary_l2_per_level(&self) -> Vec<f64> {
        let dx = self.spec.dx();
        (1..=self.spec.time_levels())
            .map(|l| {
                let s: f64 = (0..self.nodes.len()).map(|k| self.get(k, l).powi(2)).sum();
                (s * dx).sqrt()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `side,i,j,t,value` rows, node-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "side,i,j,t,value")?;
        for (k, node) in self.nodes.iter().enumerate() {
            for l in 1..=self.spec.time_levels() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    node.side.label(),
                    node.i,
                    node.j,
                    self.spec.t(l),
                    self.get(k, l)
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(spec: GridSpec, kind: BoundaryKind, r: R) -> Result<Self> {
        let rows = read_rows(r, &["side", "i", "j", "t", "value"])?;
        let mut out = Self::zeros(spec, kind);
        if rows.len() != out.values.len() {
            return Err(Error::Data(format!(
                "expected {} rows, found {}",
                out.values.len(),
                rows.len()
            )));
        }
        let lt = spec.time_levels();
        for (n, row) in rows.iter().enumerate() {
            let node = out.nodes[n / lt];
            let side = Side::from_label(&row[0])
                .ok_or_else(|| Error::Data(format!("unknown side label {:?}", row[0])))?;
            let i: usize = row[1].parse().map_err(|_| Error::Data(format!("bad index {:?}", row[1])))?;
            let j: usize = row[2].parse().map_err(|_| Error::Data(format!("bad index {:?}", row[2])))?;
            if side != node.side || i != node.i || j != node.j {
                return Err(Error::Data(format!("row {} does not match boundary ordering", n + 2)));
            }
            out.values[n] = parse_f64(&row[4])?;
        }
        Ok(out)
    }
}

/// Second-order derivative of uniformly spaced samples: central differences
/// at interior points, one-sided three-point formulas at both ends.
pub fn rate_second_order(samples: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::Config(format!(
            "second-order time differences need at least 3 levels, got {n}"
        )));
    }
    let h2 = 2.0 * dt;
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / h2);
    for k in 1..n - 1 {
        out.push((samples[k + 1] - samples[k - 1]) / h2);
    }
    out.push((3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / h2);
    Ok(out)
}

pub fn sample_spatial(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<SpatialField> {
    let m = spec.nodes_per_axis();
    let mut out = SpatialField::zeros(spec);
    for i in 1..=m {
        for j in 1..=m {
            let v = f(spec.x(i), spec.y(j));
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite sample at node ({i}, {j}) = ({}, {})",
                    spec.x(i),
                    spec.y(j)
                )));
            }
            out.set(i, j, v);
        }
    }
    Ok(out)
}

pub fn sample_space_time(spec: GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Result<SpaceTimeField> {
    let m = spec.nodes_per_axis();
    let mut out = SpaceTimeField::zeros(spec);
    for i in 1..=m {
        for j in 1..=m {
            for l in 1..=spec.time_levels() {
                let v = f(spec.x(i), spec.y(j), spec.t(l));
                if !v.is_finite() {
                    return Err(Error::Data(format!("non-finite sample at node ({i}, {j}, {l})")));
                }
                out.set(i, j, l, v);
            }
        }
    }
    Ok(out)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("cannot parse {s:?} as a number")))
}

fn read_rows<R: BufRead>(r: R, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Data("empty CSV".into()))??;
    let got: Vec<&str> = first.trim().split(',').collect();
    if got != header {
        return Err(Error::Data(format!("unexpected CSV header {first:?}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<String> = line.trim().split(',').map(str::to_owned).collect();
        if cols.len() != header.len() {
            return Err(Error::Data(format!("malformed CSV row {line:?}")));
        }
        rows.push(cols);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nx: usize, nt: usize) -> GridSpec {
        GridSpec::new(1.0, nx, nt, 0.2).unwrap()
    }

    #[test]
    fn constant_field_lineup() {
        let g = grid(3, 2);
        let f = sample_space_time(g, |_, _, _| 3.0).unwrap();
        assert!(f.to_lineup().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn single_spike_lands_on_its_ordinal() {
        let g = grid(2, 1);
        let mut f = SpaceTimeField::zeros(g);
        f.set(2, 2, 1, 5.0);
        let v = f.to_lineup();
        let nz: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(k, _)| k + 1).collect();
        assert_eq!(nz, vec![9]);
    }

    proptest! {
        #[test]
        fn lineup_round_trip(values in prop::collection::vec(-1e3f64..1e3, 4 * 4 * 3)) {
            let g = grid(3, 2);
            let f = SpaceTimeField::from_lineup(g, values.clone()).unwrap();
            prop_assert_eq!(f.to_lineup(), values);
            let g2 = SpaceTimeField::from_lineup(g, f.to_lineup()).unwrap();
            prop_assert_eq!(g2, f);
        }
    }

    #[test]
    fn from_lineup_rejects_bad_input() {
        let g = grid(2, 1);
        assert!(SpaceTimeField::from_lineup(g, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.lineup_len()];
        v[4] = f64::NAN;
        assert!(matches!(SpaceTimeField::from_lineup(g, v), Err(Error::Data(_))));
    }

    fn flux_from(g: GridSpec, f: impl Fn(f64) -> f64) -> BoundarySeries {
        BoundarySeries::from_fn(g, BoundaryKind::Flux, |_, _, t| f(t)).unwrap()
    }

    #[test]
    fn derivative_of_linear_is_slope() {
        let g = grid(2, 10);
        let gt = flux_from(g, |t| 2.5 * t - 1.0).time_derivative().unwrap();
        assert_eq!(gt.kind(), BoundaryKind::FluxRate);
        for v in gt.values() {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = grid(2, 5);
        let gt = flux_from(g, |_| 4.0).time_derivative().unwrap();
        assert!(gt.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_of_square_is_exact() {
        let g = GridSpec::new(1.0, 2, 20, 0.2).unwrap();
        assert!((g.dt() - 0.01).abs() < 1e-15);
        let gt = flux_from(g, |t| t * t).time_derivative().unwrap();
        for slot in 0..gt.nodes().len() {
            for l in 1..=g.time_levels() {
                assert!((gt.get(slot, l) - 2.0 * g.t(l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_needs_two_steps() {
        let g = grid(2, 1);
        assert!(matches!(flux_from(g, |t| t).time_derivative(), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_examples() {
        let g = grid(4, 3);
        let ones = sample_spatial(g, |_, _| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
        let c = sample_spatial(g, |x, y| 0.2 * (x * x + y * y)).unwrap();
        assert!((c.get(5, 5) - 0.4).abs() < 1e-15);
        let f = sample_space_time(g, |x, y, t| 1.0 + 0.2 * (t * (x * x + y * y)).exp()).unwrap();
        for l in 1..=4 {
            assert!((f.get(3, 3, l) - 1.2).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_reports_offending_node() {
        let g = grid(2, 1);
        let err = sample_spatial(g, |x, _| if x > 0.5 { f64::INFINITY } else { 0.0 }).unwrap_err();
        assert!(err.to_string().contains("(3, 1)"), "{err}");
    }

    #[test]
    fn spatial_csv_round_trip() {
        let g = grid(3, 1);
        let f = sample_spatial(g, |x, y| x.sin() * y + 0.1).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,value\n"));
        assert_eq!(text.lines().count(), 1 + 16);
        let back = SpatialField::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn boundary_csv_round_trip() {
        let g = grid(3, 2);
        let s = BoundarySeries::from_fn(g, BoundaryKind::Flux, |x, y, t| x - 2.0 * y + t / 3.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("side,i,j,t,value\n"));
        let back = BoundarySeries::read_csv(g, BoundaryKind::Flux, buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn boundary_lineup_populates_boundary_only() {
        let g = grid(3, 2);
        let s = BoundarySeries::from_fn(g, BoundaryKind::FluxRate, |_, _, _| 1.0).unwrap();
        let v = s.to_lineup();
        let count = v.iter().filter(|&&x| x == 1.0).count();
        assert_eq!(count, 4 * 3 * 3);
        assert_eq!(v[g.offset(2, 2, 1)], 0.0);
    }

    #[test]
    fn restriction_is_injection() {
        let fine = grid(4, 4);
        let coarse = grid(2, 2);
        let f = sample_space_time(fine, |x, y, t| x + 10.0 * y + 100.0 * t).unwrap();
        let r = f.restrict(coarse, 2).unwrap();
        for i in 1..=3 {
            for j in 1..=3 {
                for l in 1..=3 {
                    let want = coarse.x(i) + 10.0 * coarse.y(j) + 100.0 * coarse.t(l);
                    assert!((r.get(i, j, l) - want).abs() < 1e-12);
                }
            }
        }
        assert!(f.restrict(grid(3, 2), 2).is_err());
    }
}
