//! Static 3-d tree for fixed-radius neighbour queries.

use nalgebra::Vector3;

pub struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    /// Point indices laid out as an implicit balanced tree over subranges.
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_range(points, &mut order, 0);
        KdTree { points, order }
    }

    /// Calls `f` for every point strictly closer than `radius` to `q`.
    pub fn for_each_within(&self, q: &Vector3<f64>, radius: f64, mut f: impl FnMut(usize)) {
        let r2 = radius * radius;
        self.visit(&self.order, 0, q, radius, r2, &mut f);
    }

    pub fn within(&self, q: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i| out.push(i));
        out
    }

    fn visit(&self, range: &[usize], axis: usize, q: &Vector3<f64>, r: f64, r2: f64, f: &mut impl FnMut(usize)) {
        if range.len() <= 8 {
            for &i in range {
                if (self.points[i] - q).norm_squared() < r2 {
                    f(i);
                }
            }
            return;
        }
        let mid = range.len() / 2;
        let pivot = range[mid];
        let p = &self.points[pivot];
        if (p - q).norm_squared() < r2 {
            f(pivot);
        }
        let d = q[axis] - p[axis];
        let next = (axis + 1) % 3;
        if d - r < 0.0 {
            self.visit(&range[..mid], next, q, r, r2, f);
        }
        if d + r > 0.0 {
            self.visit(&range[mid + 1..], next, q, r, r2, f);
        }
    }
}

fn build_range(points: &[Vector3<f64>], range: &mut [usize], axis: usize) {
    if range.len() <= 8 {
        return;
    }
    let mid = range.len() / 2;
    range.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (lo, hi) = range.split_at_mut(mid);
    build_range(points, lo, (axis + 1) % 3);
    build_range(points, &mut hi[1..], (axis + 1) % 3);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> = (0..700)
            .map(|_| Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() * 0.2))
            .collect();
        let tree = KdTree::build(&pts);
        for q in pts.iter().take(60) {
            let mut got = tree.within(q, 0.11);
            got.sort_unstable();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() < 0.11).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn duplicates_and_tiny_sets() {
        let pts = vec![Vector3::new(1.0, 1.0, 1.0); 20];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.within(&Vector3::new(1.0, 1.0, 1.0), 1e-9).len(), 20);
        let empty: Vec<Vector3<f64>> = Vec::new();
        assert!(KdTree::build(&empty).within(&Vector3::zeros(), 1.0).is_empty());
    }
}
