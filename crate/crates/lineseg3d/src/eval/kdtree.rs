//! Static 3D k-d tree for nearest-neighbor queries on point clouds.

use nalgebra::Vector3;

/// Balanced k-d tree over a fixed point set. Nodes are stored implicitly:
/// `order` is the point indices arranged so that each subtree's median sits
/// at its slice midpoint, splitting on the axis of the tree depth.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    order: Vec<u32>,
}

impl KdTree {
    pub fn build(points: Vec<Vector3<f64>>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        if !points.is_empty() {
            build_recursive(&points, &mut order, 0);
        }
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    /// Index and distance of the nearest point to `query`.
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<(usize, f64)> {
        self.nearest_within(query, f64::INFINITY)
    }

    /// Nearest point within `max_dist`, if any.
    pub fn nearest_within(&self, query: &Vector3<f64>, max_dist: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, max_dist * max_dist);
        self.search(query, 0..self.order.len(), 0, usize::MAX, &mut best);
        (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt()))
    }

    /// Nearest point whose index differs from `exclude` (for self-queries).
    pub fn nearest_excluding(&self, query: &Vector3<f64>, exclude: usize) -> Option<(usize, f64)> {
        if self.points.len() < 2 {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(query, 0..self.order.len(), 0, exclude, &mut best);
        (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt()))
    }

    fn search(
        &self,
        query: &Vector3<f64>,
        range: std::ops::Range<usize>,
        axis: usize,
        exclude: usize,
        best: &mut (usize, f64),
    ) {
        if range.is_empty() {
            return;
        }
        let mid = range.start + range.len() / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let d2 = (p - query).norm_squared();
        if idx != exclude && (d2 < best.1 || (d2 == best.1 && idx < best.0)) {
            *best = (idx, d2);
        }
        let split = p[axis];
        let diff = query[axis] - split;
        let next_axis = (axis + 1) % 3;
        let (near, far) = if diff < 0.0 {
            (range.start..mid, mid + 1..range.end)
        } else {
            (mid + 1..range.end, range.start..mid)
        };
        self.search(query, near, next_axis, exclude, best);
        if diff * diff <= best.1 {
            self.search(query, far, next_axis, exclude, best);
        }
    }
}

fn build_recursive(points: &[Vector3<f64>], order: &mut [u32], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .expect("finite coordinates")
    });
    let next_axis = (axis + 1) % 3;
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, next_axis);
    build_recursive(points, &mut rest[1..], next_axis);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random::<f64>() * 10.0 - 5.0,
                    rng.random::<f64>() * 10.0 - 5.0,
                    rng.random::<f64>() * 10.0 - 5.0,
                )
            })
            .collect()
    }

    fn linear_nearest(points: &[Vector3<f64>], q: &Vector3<f64>) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan_on_random_queries() {
        let cloud = random_cloud(500, 3);
        let tree = KdTree::build(cloud.clone());
        let queries = random_cloud(1000, 4);
        for q in &queries {
            let (ti, td) = tree.nearest(q).unwrap();
            let (li, ld) = linear_nearest(&cloud, q);
            assert!((td - ld).abs() < 1e-12, "distance mismatch {td} vs {ld}");
            // equal-distance ties may differ in index; distances must agree
            if ti != li {
                assert!(((cloud[ti] - q).norm() - ld).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radius_bound_filters() {
        let cloud = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(10.0, 0.0, 0.0)];
        let tree = KdTree::build(cloud);
        let q = Vector3::new(4.0, 0.0, 0.0);
        assert_eq!(tree.nearest_within(&q, 5.0).unwrap().0, 0);
        assert!(tree.nearest_within(&q, 1.0).is_none());
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::build(Vec::new());
        assert!(tree.nearest(&Vector3::zeros()).is_none());
    }

    #[test]
    fn nearest_excluding_skips_self() {
        let cloud = random_cloud(300, 7);
        let tree = KdTree::build(cloud.clone());
        for (i, p) in cloud.iter().enumerate().step_by(13) {
            let (j, d) = tree.nearest_excluding(p, i).unwrap();
            assert_ne!(j, i);
            // oracle: linear scan over all other points
            let ld = cloud
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, q)| (q - p).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((d - ld).abs() < 1e-12);
        }
    }
}
