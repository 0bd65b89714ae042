use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` uniformly spaced points on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one point".into(),
            ));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        if self.n >= 2 {
            1.0 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.n == 1 {
            0.0
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// `n × n` tensor grid on `[0, 1]²`, flattened row-major: index `i * n + j`
/// is the point `(xᵢ, xⱼ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    axis: Grid1D,
}

impl Grid2D {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            axis: Grid1D::new(n)?,
        })
    }

    pub fn side(&self) -> usize {
        self.axis.len()
    }

    pub fn axis(&self) -> Grid1D {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let p = self.axis.points();
        let mut out = Vec::with_capacity(self.len());
        for &x in &p {
            for &y in &p {
                out.push([x, y]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    D1(Grid1D),
    D2(Grid2D),
}

impl Grid {
    pub fn line(n: usize) -> Result<Self> {
        Ok(Grid::D1(Grid1D::new(n)?))
    }

    pub fn square(n: usize) -> Result<Self> {
        Ok(Grid::D2(Grid2D::new(n)?))
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::D1(g) => g.len(),
            Grid::D2(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_dim(&self) -> usize {
        match self {
            Grid::D1(_) => 1,
            Grid::D2(_) => 2,
        }
    }

    /// Coordinates, one row per point.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        match self {
            Grid::D1(g) => g.points().into_iter().map(|x| vec![x]).collect(),
            Grid::D2(g) => g.points().into_iter().map(|p| p.to_vec()).collect(),
        }
    }
}
