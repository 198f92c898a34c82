//! Uniform bucket grid over the torus for radius queries.

use crate::point::Point;

#[derive(Clone, Debug)]
pub struct GridIndex {
    dim: usize,
    cells: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    /// Index `points` with roughly `per_cell` points per bucket.
    pub fn build(points: &[Point], per_cell: usize) -> Self {
        let dim = points.first().map_or(2, Point::dim);
        let target = (points.len() / per_cell.max(1)).max(1) as f64;
        let cells = (target.powf(1.0 / dim as f64).floor() as usize).clamp(1, 2048);
        let mut buckets = vec![Vec::new(); cells.pow(dim as u32)];
        for (i, p) in points.iter().enumerate() {
            buckets[Self::bucket_of(p, cells, dim)].push(i as u32);
        }
        GridIndex { dim, cells, buckets }
    }

    fn cell_coord(x: f64, cells: usize) -> usize {
        ((x * cells as f64) as usize).min(cells - 1)
    }

    fn bucket_of(p: &Point, cells: usize, dim: usize) -> usize {
        (0..dim).fold(0, |acc, i| acc * cells + Self::cell_coord(p.coord(i), cells))
    }

    /// Visit the indices of all points that may lie within `radius` of `center`.
    /// Callers filter by exact distance.
    pub fn for_each_candidate(&self, center: &Point, radius: f64, mut f: impl FnMut(usize)) {
        let reach = (radius * self.cells as f64).ceil() as isize;
        let span = (2 * reach + 1) as usize;
        if span >= self.cells {
            // the query covers a full period along every axis
            for bucket in &self.buckets {
                bucket.iter().for_each(|&i| f(i as usize));
            }
            return;
        }
        let base: Vec<isize> = (0..self.dim).map(|i| Self::cell_coord(center.coord(i), self.cells) as isize).collect();
        let mut offset = vec![-reach; self.dim];
        loop {
            let mut idx = 0usize;
            for i in 0..self.dim {
                let c = (base[i] + offset[i]).rem_euclid(self.cells as isize) as usize;
                idx = idx * self.cells + c;
            }
            self.buckets[idx].iter().for_each(|&i| f(i as usize));
            // odometer increment
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    return;
                }
                offset[axis] += 1;
                if offset[axis] > reach {
                    offset[axis] = -reach;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Indices of points within `radius` of `center`.
    pub fn within(&self, points: &[Point], center: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(center, radius, |i| {
            if points[i].distance(center) < radius {
                out.push(i);
            }
        });
        out
    }
}
