use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Default cap on the number of unknowns per grid.
pub const DEFAULT_CAP: usize = 1 << 24;

pub type Point = [f64; 3];

/// Uniform cell-centred grid. Cell `i` has its centre at `(offset + i) * h`
/// along every axis; for `d = 2` the third axis has extent 1 and is ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    d: usize,
    n: [usize; 3],
    h: f64,
    offset: [i64; 3],
}

impl Grid {
    pub fn new(d: usize, n: &[usize], h: f64) -> Result<Self> {
        Self::with_cap(d, n, h, DEFAULT_CAP)
    }

    pub fn with_cap(d: usize, n: &[usize], h: f64, cap: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        if n.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "{} extents given for a {d}-dimensional grid",
                n.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return invalid(format!("grid spacing must be positive, got {h}"));
        }
        let mut ext = [1usize; 3];
        let mut total: usize = 1;
        for k in 0..d {
            if n[k] == 0 {
                return invalid("grid extents must be nonzero");
            }
            ext[k] = n[k];
            total = total
                .checked_mul(n[k])
                .ok_or_else(|| Error::InvalidParameter("grid size overflows".into()))?;
        }
        if total > cap {
            return invalid(format!("{total} unknowns exceed the cap of {cap}"));
        }
        Ok(Self {
            d,
            n: ext,
            h,
            offset: [0; 3],
        })
    }

    /// Square/cubic grid with `n` cells per axis.
    pub fn cube(d: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(d, &vec![n; d.min(3)], h)
    }

    pub fn with_offset(mut self, offset: &[i64]) -> Self {
        let m = self.d.min(offset.len());
        self.offset[..m].copy_from_slice(&offset[..m]);
        self
    }

    pub fn with_spacing(mut self, h: f64) -> Self {
        assert!(h > 0.0);
        self.h = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn extents(&self) -> [usize; 3] {
        self.n
    }
    pub fn extent(&self, k: usize) -> usize {
        self.n[k]
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn offset(&self) -> [i64; 3] {
        self.offset
    }
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n[1] + i[1]) * self.n[2] + i[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i2 = idx % self.n[2];
        let r = idx / self.n[2];
        [r / self.n[1], r % self.n[1], i2]
    }

    /// Global integer coordinates of a cell (grid index plus offset).
    #[inline]
    pub fn global(&self, idx: usize) -> [i64; 3] {
        let c = self.coords(idx);
        [
            c[0] as i64 + self.offset[0],
            c[1] as i64 + self.offset[1],
            c[2] as i64 + self.offset[2],
        ]
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Point {
        let g = self.global(idx);
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = g[k] as f64 * self.h;
        }
        x
    }

    /// Index of the cell whose global coordinates are `g`, if it lies in the grid.
    pub fn locate_global(&self, g: [i64; 3]) -> Option<usize> {
        let mut i = [0usize; 3];
        for k in 0..self.d {
            let local = g[k] - self.offset[k];
            if local < 0 || local >= self.n[k] as i64 {
                return None;
            }
            i[k] = local as usize;
        }
        Some(self.index(i))
    }

    /// Cell whose centre is nearest to `x`, clamped into the grid.
    pub fn nearest_cell(&self, x: &Point) -> usize {
        let mut i = [0usize; 3];
        for k in 0..self.d {
            let g = (x[k] / self.h).round() as i64 - self.offset[k];
            i[k] = g.clamp(0, self.n[k] as i64 - 1) as usize;
        }
        self.index(i)
    }

    pub(crate) fn same_shape(&self, other: &Grid) -> bool {
        self.d == other.d && self.n == other.n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FarBoundary {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Torus,
    /// Dirichlet layer at the first cell layer of axis 0, periodic in the other axes.
    Slab {
        far: FarBoundary,
    },
    /// Dirichlet layers on every face.
    Box,
    /// A box whose minimum corner is the distinguished vertex; the edge set
    /// consists of the coordinate axes through that vertex (the vertex itself for d = 2).
    CornerBox,
}

impl DomainKind {
    pub fn code(&self) -> u8 {
        match self {
            DomainKind::Torus => 0,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            } => 1,
            DomainKind::Box => 2,
            DomainKind::CornerBox => 3,
            DomainKind::Slab {
                far: FarBoundary::Dirichlet,
            } => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => DomainKind::Torus,
            1 => DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
            2 => DomainKind::Box,
            3 => DomainKind::CornerBox,
            4 => DomainKind::Slab {
                far: FarBoundary::Dirichlet,
            },
            _ => return None,
        })
    }
}

/// A grid together with its boundary treatment.
///
/// Dirichlet conditions live on whole cell layers: the boundary passes
/// through those cell centres, which makes prescribed traces exact.
/// An extra mask can mark further cells as Dirichlet (used for half-balls).
#[derive(Clone, Debug)]
pub struct Domain {
    grid: Grid,
    kind: DomainKind,
    mask: Option<Arc<Vec<bool>>>,
}

impl Domain {
    pub fn new(grid: Grid, kind: DomainKind) -> Result<Self> {
        for k in 0..grid.dim() {
            let periodic = Self::axis_periodic(kind, k);
            if !periodic && grid.extent(k) < 3 {
                return invalid(format!(
                    "axis {k} needs at least 3 cells for its boundary layers"
                ));
            }
            if periodic && grid.extent(k) < 2 {
                return invalid(format!("periodic axis {k} needs at least 2 cells"));
            }
        }
        Ok(Self {
            grid,
            kind,
            mask: None,
        })
    }

    pub fn torus(grid: Grid) -> Result<Self> {
        Self::new(grid, DomainKind::Torus)
    }

    /// Marks additional cells as Dirichlet.
    pub fn with_extra_dirichlet(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "mask of length {} for {} cells",
                mask.len(),
                self.grid.len()
            )));
        }
        self.mask = Some(Arc::new(mask));
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kind(&self) -> DomainKind {
        self.kind
    }
    pub fn has_mask(&self) -> bool {
        self.mask.is_some()
    }

    fn axis_periodic(kind: DomainKind, k: usize) -> bool {
        match kind {
            DomainKind::Torus => true,
            DomainKind::Slab { .. } => k != 0,
            DomainKind::Box | DomainKind::CornerBox => false,
        }
    }

    pub fn periodic(&self, k: usize) -> bool {
        Self::axis_periodic(self.kind, k)
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, DomainKind::Box | DomainKind::CornerBox)
    }

    /// Whether the cell is a prescribed (Dirichlet) cell.
    pub fn is_dirichlet(&self, idx: usize) -> bool {
        if let Some(m) = &self.mask {
            if m[idx] {
                return true;
            }
        }
        self.is_layer_dirichlet(self.grid.coords(idx))
    }

    fn is_layer_dirichlet(&self, c: [usize; 3]) -> bool {
        let n = self.grid.extents();
        match self.kind {
            DomainKind::Torus => false,
            DomainKind::Slab { far } => {
                c[0] == 0 || (far == FarBoundary::Dirichlet && c[0] == n[0] - 1)
            }
            DomainKind::Box | DomainKind::CornerBox => {
                (0..self.grid.dim()).any(|k| c[k] == 0 || c[k] == n[k] - 1)
            }
        }
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|i| self.is_dirichlet(i)).collect()
    }

    pub fn free_count(&self) -> usize {
        (0..self.grid.len())
            .filter(|&i| !self.is_dirichlet(i))
            .count()
    }

    /// Neighbour across the face in direction `k` (`up` selects +e_k).
    #[inline]
    pub fn neighbor(&self, idx: usize, k: usize, up: bool) -> Option<usize> {
        let mut c = self.grid.coords(idx);
        let n = self.grid.extent(k);
        if up {
            if c[k] + 1 < n {
                c[k] += 1;
            } else if self.periodic(k) {
                c[k] = 0;
            } else {
                return None;
            }
        } else if c[k] > 0 {
            c[k] -= 1;
        } else if self.periodic(k) {
            c[k] = n - 1;
        } else {
            return None;
        }
        Some(self.grid.index(c))
    }

    /// Period length along axis `k`.
    pub fn period(&self, k: usize) -> f64 {
        self.grid.extent(k) as f64 * self.grid.spacing()
    }

    /// Displacement `x - y`, using the minimum image along periodic axes.
    pub fn displacement(&self, x: &Point, y: &Point) -> Point {
        let mut v = [0.0; 3];
        for k in 0..self.grid.dim() {
            let mut dk = x[k] - y[k];
            if self.periodic(k) {
                let l = self.period(k);
                dk -= l * (dk / l).round();
            }
            v[k] = dk;
        }
        v
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        norm(&self.displacement(x, y))
    }

    /// Physical position of the lower and upper boundary layer along a bounded axis.
    pub fn axis_bounds(&self, k: usize) -> (f64, f64) {
        let h = self.grid.spacing();
        let lo = self.grid.offset()[k] as f64 * h;
        (lo, lo + (self.grid.extent(k) - 1) as f64 * h)
    }

    /// Distance from `x` to the Dirichlet part of the boundary (mask cells excluded).
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match self.kind {
            DomainKind::Torus => f64::INFINITY,
            DomainKind::Slab { far } => {
                let (lo, hi) = self.axis_bounds(0);
                let mut dist = x[0] - lo;
                if far == FarBoundary::Dirichlet {
                    dist = dist.min(hi - x[0]);
                }
                dist
            }
            DomainKind::Box | DomainKind::CornerBox => {
                let mut dist = f64::INFINITY;
                for k in 0..self.grid.dim() {
                    let (lo, hi) = self.axis_bounds(k);
                    dist = dist.min(x[k] - lo).min(hi - x[k]);
                }
                dist
            }
        }
    }

    /// Diameter of a bounded domain, or infinity.
    pub fn diameter(&self) -> f64 {
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for k in 0..self.grid.dim() {
            let (lo, hi) = self.axis_bounds(k);
            s += (hi - lo) * (hi - lo);
        }
        s.sqrt()
    }

    /// Vertex of a corner box (its minimum corner).
    pub fn corner_vertex(&self) -> Point {
        let mut v = [0.0; 3];
        for k in 0..self.grid.dim() {
            v[k] = self.axis_bounds(k).0;
        }
        v
    }

    /// Distance to the edge set of a corner box: the vertex for d = 2,
    /// the coordinate axes through the vertex for d = 3.
    pub fn edge_distance(&self, x: &Point) -> f64 {
        let v = self.corner_vertex();
        let y = [x[0] - v[0], x[1] - v[1], x[2] - v[2]];
        if self.grid.dim() == 2 {
            (y[0] * y[0] + y[1] * y[1]).sqrt()
        } else {
            let a = (y[1] * y[1] + y[2] * y[2]).sqrt();
            let b = (y[0] * y[0] + y[2] * y[2]).sqrt();
            let c = (y[0] * y[0] + y[1] * y[1]).sqrt();
            a.min(b).min(c)
        }
    }
}

#[inline]
pub fn norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Cells of `domain` whose centres lie in the closed ball `|x - center| <= r`.
/// Dirichlet cells are excluded unless `include_dirichlet` is set.
pub fn cells_in_ball(
    domain: &Domain,
    center: &Point,
    r: f64,
    include_dirichlet: bool,
) -> Vec<usize> {
    let g = domain.grid();
    let h = g.spacing();
    let d = g.dim();
    let off = g.offset();
    let tol = 1e-12 * r.max(h);
    // Index window per axis, as (start, count) in possibly wrapped local indices.
    let mut ranges: [Vec<usize>; 3] = [vec![0], vec![0], vec![0]];
    for k in 0..d {
        let n = g.extent(k) as i64;
        let lo = ((center[k] - r) / h).floor() as i64 - 1 - off[k];
        let hi = ((center[k] + r) / h).ceil() as i64 + 1 - off[k];
        let mut v = Vec::new();
        if domain.periodic(k) {
            if hi - lo + 1 >= n {
                v.extend(0..n as usize);
            } else {
                for i in lo..=hi {
                    v.push(i.rem_euclid(n) as usize);
                }
                v.sort_unstable();
                v.dedup();
            }
        } else {
            for i in lo.max(0)..=hi.min(n - 1) {
                v.push(i as usize);
            }
        }
        ranges[k] = v;
    }
    let mut out = Vec::new();
    for &i0 in &ranges[0] {
        for &i1 in &ranges[1] {
            for &i2 in &ranges[2] {
                let idx = g.index([i0, i1, i2]);
                if !include_dirichlet && domain.is_dirichlet(idx) {
                    continue;
                }
                let x = g.center(idx);
                if domain.distance(&x, center) <= r + tol {
                    out.push(idx);
                }
            }
        }
    }
    out
}

/// Mean of a cell field over the free cells in the closed ball.
pub fn ball_average(f: &[f64], domain: &Domain, center: &Point, r: f64) -> Result<f64> {
    let g = domain.grid();
    if f.len() != g.len() {
        return Err(Error::ShapeMismatch(format!(
            "field of length {} on a grid of {} cells",
            f.len(),
            g.len()
        )));
    }
    if r < g.spacing() * (1.0 - 1e-12) {
        return invalid(format!("ball radius {r} below the grid spacing"));
    }
    let cells = cells_in_ball(domain, center, r, false);
    if cells.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no free cell within {r} of {center:?}"
        )));
    }
    let s: f64 = cells.iter().map(|&i| f[i]).sum();
    Ok(s / cells.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(3, &[4, 5, 6], 0.5)
            .unwrap()
            .with_offset(&[-2, 1, 0]);
        for idx in 0..g.len() {
            assert_eq!(g.index(g.coords(idx)), idx);
            assert_eq!(g.locate_global(g.global(idx)), Some(idx));
        }
        assert_eq!(g.center(0), [-1.0, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            Grid::new(4, &[2, 2, 2, 2], 1.0),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(Grid::new(2, &[4, 4], 0.0).is_err());
        assert!(Grid::with_cap(2, &[64, 64], 1.0, 100).is_err());
    }

    #[test]
    fn slab_dirichlet_layer() {
        let g = Grid::new(2, &[5, 4], 1.0).unwrap();
        let dom = Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap();
        assert!(dom.is_dirichlet(g.index([0, 2, 0])));
        assert!(!dom.is_dirichlet(g.index([4, 2, 0])));
        assert_eq!(
            dom.neighbor(g.index([1, 0, 0]), 1, false),
            Some(g.index([1, 3, 0]))
        );
        assert_eq!(dom.neighbor(g.index([4, 0, 0]), 0, true), None);
    }

    #[test]
    fn ball_average_conventions() {
        let g = Grid::new(2, &[16, 16], 0.25).unwrap();
        let dom = Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let x0 = g.center(g.index([0, 7, 0]));
        // Just above one spacing only the cell straight above x0 is free and inside.
        let v = ball_average(&f, &dom, &x0, 0.25 * 1.01).unwrap();
        assert_eq!(v, g.index([1, 7, 0]) as f64);
        let c = vec![3.5; g.len()];
        assert_eq!(ball_average(&c, &dom, &x0, 1.3).unwrap(), 3.5);
        assert!(ball_average(&c, &dom, &x0, 0.1).is_err());
    }

    #[test]
    fn half_indicator_average_is_count_ratio() {
        let g = Grid::new(2, &[20, 20], 0.1).unwrap();
        let dom = Domain::torus(g).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                if g.coords(i)[1].is_multiple_of(2) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let center = g.center(g.index([10, 10, 0]));
        let cells = cells_in_ball(&dom, &center, 0.55, false);
        let ones = cells.iter().filter(|&&i| f[i] == 1.0).count();
        let v = ball_average(&f, &dom, &center, 0.55).unwrap();
        assert_eq!(v, ones as f64 / cells.len() as f64);
    }

    #[test]
    fn minimum_image_on_torus() {
        let g = Grid::new(2, &[10, 10], 0.1).unwrap();
        let dom = Domain::torus(g).unwrap();
        let d = dom.distance(&[0.05, 0.0, 0.0], &[0.95, 0.0, 0.0]);
        assert!((d - 0.1).abs() < 1e-12);
    }
}
