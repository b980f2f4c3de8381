//! Square space grid on `(-R, R)^2`, uniform time partition of `[0, T]` and
//! the lineup ordering that flattens space-time grid functions into vectors.
//!
//! The public API is 1-based throughout: node `(i, j, l)` lives at
//! `(x_i, y_j, t_l) = (-R + (i-1) dx, -R + (j-1) dx, (l-1) dt)` and its lineup
//! ordinal is
//!
//! ```text
//! n = (i-1)(Nx+1)(Nt+1) + (j-1)(Nt+1) + l
//! ```
//!
//! Storage is 0-based; [`GridSpec::offset`] is the single conversion point.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    r: f64,
    nx: usize,
    nt: usize,
    t_final: f64,
}

/// 1-based space-time node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeIndex {
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

impl NodeIndex {
    pub fn new(i: usize, j: usize, l: usize) -> Self {
        Self { i, j, l }
    }
}

/// Side of the square a boundary node is attributed to. Corners belong to the
/// x-sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::West => "x-",
            Side::East => "x+",
            Side::South => "y-",
            Side::North => "y+",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "x-" => Some(Side::West),
            "x+" => Some(Side::East),
            "y-" => Some(Side::South),
            "y+" => Some(Side::North),
            _ => None,
        }
    }
}

/// Spatial boundary node together with the inward neighbour used by the
/// one-sided normal derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryNode {
    pub i: usize,
    pub j: usize,
    pub side: Side,
    pub inward: (usize, usize),
}

impl GridSpec {
    pub fn new(r: f64, nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("half-width R must be positive, got {r}")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!("final time T must be positive, got {t_final}")));
        }
        if nx < 2 {
            return Err(Error::Config(format!("N_x must be at least 2, got {nx}")));
        }
        if nt < 1 {
            return Err(Error::Config(format!("N_t must be at least 1, got {nt}")));
        }
        Ok(Self { r, nx, nt, t_final })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.r / self.nx as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Nodes per spatial axis, `Nx + 1`.
    pub fn nodes_per_axis(&self) -> usize {
        self.nx + 1
    }
    /// Number of time levels, `Nt + 1`.
    pub fn time_levels(&self) -> usize {
        self.nt + 1
    }
    pub fn spatial_len(&self) -> usize {
        self.nodes_per_axis() * self.nodes_per_axis()
    }
    /// Length of a lineup vector, `(Nx+1)^2 (Nt+1)`.
    pub fn lineup_len(&self) -> usize {
        self.spatial_len() * self.time_levels()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.r + (i as f64 - 1.0) * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        self.x(j)
    }
    pub fn t(&self, l: usize) -> f64 {
        (l as f64 - 1.0) * self.dt()
    }

    pub fn contains(&self, idx: NodeIndex) -> bool {
        let m = self.nodes_per_axis();
        (1..=m).contains(&idx.i) && (1..=m).contains(&idx.j) && (1..=self.time_levels()).contains(&idx.l)
    }

    fn check(&self, idx: NodeIndex) -> Result<()> {
        if self.contains(idx) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "node {idx:?} outside grid with N_x = {}, N_t = {}",
                self.nx, self.nt
            )))
        }
    }

    /// 1-based lineup ordinal of a node.
    pub fn lineup(&self, idx: NodeIndex) -> Result<usize> {
        self.check(idx)?;
        Ok(self.offset(idx.i, idx.j, idx.l) + 1)
    }

    /// Inverse of [`GridSpec::lineup`].
    pub fn delineup(&self, n: usize) -> Result<NodeIndex> {
        if n == 0 || n > self.lineup_len() {
            return Err(Error::Domain(format!(
                "ordinal {n} outside 1..={}",
                self.lineup_len()
            )));
        }
        let k = n - 1;
        let lt = self.time_levels();
        let m = self.nodes_per_axis();
        Ok(NodeIndex {
            i: k / (m * lt) + 1,
            j: (k / lt) % m + 1,
            l: k % lt + 1,
        })
    }

    /// 0-based storage offset of a 1-based node, without range checks.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        ((i - 1) * self.nodes_per_axis() + (j - 1)) * self.time_levels() + (l - 1)
    }

    /// 0-based offset into a spatial field.
    #[inline]
    pub fn spatial_offset(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.nodes_per_axis() + (j - 1)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let m = self.nodes_per_axis();
        i == 1 || i == m || j == 1 || j == m
    }

    /// Boundary nodes in lineup order, each listed once (`4 Nx` entries).
    pub fn boundary_nodes(&self) -> Vec<BoundaryNode> {
        let m = self.nodes_per_axis();
        let mut out = Vec::with_capacity(4 * self.nx);
        for i in 1..=m {
            for j in 1..=m {
                let (side, inward) = if i == 1 {
                    (Side::West, (2, j))
                } else if i == m {
                    (Side::East, (m - 1, j))
                } else if j == 1 {
                    (Side::South, (i, 2))
                } else if j == m {
                    (Side::North, (i, m - 1))
                } else {
                    continue;
                };
                out.push(BoundaryNode { i, j, side, inward });
            }
        }
        out
    }

    /// Same domain with space and time subdivisions multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be at least 1".into()));
        }
        Self::new(self.r, self.nx * factor, self.nt * factor, self.t_final)
    }

    /// Same spatial grid with a different final time and step count.
    pub fn with_time(&self, nt: usize, t_final: f64) -> Result<Self> {
        Self::new(self.r, self.nx, nt, t_final)
    }
}
