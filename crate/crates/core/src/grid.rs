//! Rectangular domains and the cell-centred lattice laid over them.

use nalgebra::Point2;

use crate::error::{invalid, Result};
use crate::scalar::{lit, Scalar};

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub xmin: T,
    pub xmax: T,
    pub ymin: T,
    pub ymax: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(xmin: T, xmax: T, ymin: T, ymax: T) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(invalid("bounds", "need xmin < xmax and ymin < ymax"));
        }
        Ok(Rect { xmin, xmax, ymin, ymax })
    }

    pub fn unit() -> Self {
        Rect { xmin: T::zero(), xmax: T::one(), ymin: T::zero(), ymax: T::one() }
    }

    pub fn width(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> T {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> T {
        (self.width() * self.width() + self.height() * self.height()).sqrt()
    }

    pub fn center(&self) -> Point2<T> {
        let two = lit::<T>(2.0);
        Point2::new((self.xmin + self.xmax) / two, (self.ymin + self.ymax) / two)
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point2<T>) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, p: &Point2<T>) -> T {
        let dx = (self.xmin - p.x).max(p.x - self.xmax);
        let dy = (self.ymin - p.y).max(p.y - self.ymax);
        if dx <= T::zero() && dy <= T::zero() {
            -(dx.max(dy))
        } else {
            let ox = dx.max(T::zero());
            let oy = dy.max(T::zero());
            -(ox * ox + oy * oy).sqrt()
        }
    }

    pub fn clamp(&self, p: &Point2<T>) -> Point2<T> {
        Point2::new(
            p.x.clamp(self.xmin, self.xmax),
            p.y.clamp(self.ymin, self.ymax),
        )
    }

    /// Rectangle shrunk about its centre to `fraction` of each side.
    pub fn inner(&self, fraction: T) -> Self {
        let c = self.center();
        let hw = self.width() * fraction / lit(2.0);
        let hh = self.height() * fraction / lit(2.0);
        Rect { xmin: c.x - hw, xmax: c.x + hw, ymin: c.y - hh, ymax: c.y + hh }
    }
}

/// `nx x ny` cells tiling a rectangle. Cells are indexed row-major from
/// `ymin`: index = `iy * nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainGrid<T> {
    bounds: Rect<T>,
    nx: usize,
    ny: usize,
}

impl<T: Scalar> DomainGrid<T> {
    pub fn new(bounds: Rect<T>, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(invalid("resolution", format!("need nx, ny >= 2, got {nx}x{ny}")));
        }
        Ok(DomainGrid { bounds, nx, ny })
    }

    pub fn bounds(&self) -> &Rect<T> {
        &self.bounds
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        self.bounds.width() / lit(self.nx as f64)
    }

    pub fn dy(&self) -> T {
        self.bounds.height() / lit(self.ny as f64)
    }

    pub fn cell_area(&self) -> T {
        self.dx() * self.dy()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn center(&self, index: usize) -> Point2<T> {
        let (ix, iy) = self.coords(index);
        let half = lit::<T>(0.5);
        Point2::new(
            self.bounds.xmin + (lit::<T>(ix as f64) + half) * self.dx(),
            self.bounds.ymin + (lit::<T>(iy as f64) + half) * self.dy(),
        )
    }

    pub fn centers(&self) -> Vec<Point2<T>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Cell containing `p`, with points outside clamped to the border cells.
    pub fn cell_of(&self, p: &Point2<T>) -> usize {
        let fx = to_index((p.x - self.bounds.xmin) / self.dx(), self.nx);
        let fy = to_index((p.y - self.bounds.ymin) / self.dy(), self.ny);
        self.index(fx, fy)
    }

    /// Indices of cells whose centres fall inside `region` (half-open on the
    /// upper edges except where they coincide with the domain edge).
    pub fn cells_in(&self, region: &Rect<T>) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let c = self.center(i);
                let in_x = c.x >= region.xmin
                    && (c.x < region.xmax || (region.xmax >= self.bounds.xmax && c.x <= region.xmax));
                let in_y = c.y >= region.ymin
                    && (c.y < region.ymax || (region.ymax >= self.bounds.ymax && c.y <= region.ymax));
                in_x && in_y
            })
            .collect()
    }

    /// Bilinear interpolation of cell-centred `values` at `p`. Outside the
    /// lattice of centres the nearest border value is held constant.
    pub fn interpolate(&self, values: &[T], p: &Point2<T>) -> T {
        let half = lit::<T>(0.5);
        let gx = (p.x - self.bounds.xmin) / self.dx() - half;
        let gy = (p.y - self.bounds.ymin) / self.dy() - half;
        let (ix0, ix1, tx) = bracket(gx, self.nx);
        let (iy0, iy1, ty) = bracket(gy, self.ny);
        let v00 = values[self.index(ix0, iy0)];
        let v10 = values[self.index(ix1, iy0)];
        let v01 = values[self.index(ix0, iy1)];
        let v11 = values[self.index(ix1, iy1)];
        let one = T::one();
        (one - ty) * ((one - tx) * v00 + tx * v10) + ty * ((one - tx) * v01 + tx * v11)
    }
}

fn to_index<T: Scalar>(f: T, n: usize) -> usize {
    let f = crate::scalar::to_f64(f).floor();
    if f.is_nan() || f < 0.0 {
        0
    } else {
        (f as usize).min(n - 1)
    }
}

fn bracket<T: Scalar>(g: T, n: usize) -> (usize, usize, T) {
    let last = lit::<T>((n - 1) as f64);
    if g <= T::zero() {
        return (0, 0, T::zero());
    }
    if g >= last {
        return (n - 1, n - 1, T::zero());
    }
    let i0 = to_index(g, n).min(n - 2);
    let t = g - lit::<T>(i0 as f64);
    (i0, i0 + 1, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_indexing() {
        let g = DomainGrid::new(Rect::<f64>::unit(), 4, 2).unwrap();
        assert_eq!(g.len(), 8);
        let c = g.center(5);
        assert!((c.x - 0.375).abs() < 1e-15 && (c.y - 0.75).abs() < 1e-15);
        assert_eq!(g.cell_of(&c), 5);
        assert_eq!(g.cell_of(&Point2::new(-3.0, 9.0)), 4);
    }

    #[test]
    fn too_coarse_grid_rejected() {
        assert!(DomainGrid::new(Rect::<f64>::unit(), 1, 5).is_err());
    }

    #[test]
    fn interpolation_exact_at_centers_and_linear_between() {
        let g = DomainGrid::new(Rect::<f64>::unit(), 5, 4).unwrap();
        let vals: Vec<f64> = g.centers().iter().map(|p| 2.0 * p.x - 3.0 * p.y + 1.0).collect();
        for i in 0..g.len() {
            assert!((g.interpolate(&vals, &g.center(i)) - vals[i]).abs() < 1e-12);
        }
        let p = Point2::new(0.33, 0.41);
        assert!((g.interpolate(&vals, &p) - (2.0 * 0.33 - 3.0 * 0.41 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cells_in_partition_every_cell_once() {
        let g = DomainGrid::new(Rect::<f64>::unit(), 6, 6).unwrap();
        let mut count = vec![0; g.len()];
        for i in 0..3 {
            for j in 0..3 {
                let r = Rect::new(i as f64 / 3.0, (i + 1) as f64 / 3.0, j as f64 / 3.0, (j + 1) as f64 / 3.0)
                    .unwrap();
                let cells = g.cells_in(&r);
                assert_eq!(cells.len(), 4);
                for c in cells {
                    count[c] += 1;
                }
            }
        }
        assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn signed_distance_of_rect() {
        let r = Rect::<f64>::unit();
        assert!((r.signed_distance(&Point2::new(0.5, 0.2)) - 0.2).abs() < 1e-15);
        assert!((r.signed_distance(&Point2::new(1.3, 0.5)) + 0.3).abs() < 1e-12);
        assert!((r.signed_distance(&Point2::new(1.3, 1.4)) + 0.5).abs() < 1e-12);
    }
}
