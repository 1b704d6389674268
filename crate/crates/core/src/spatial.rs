//! Exact nearest-neighbour queries over a static 3-D point set.

use nalgebra::Vector3;

use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Static kd-tree. Queries are exact; ties resolve to the smallest point index.
pub struct KdTree<'a, T: Real> {
    points: &'a [Vector3<T>],
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<'a, T: Real> KdTree<'a, T> {
    pub fn new(points: &'a [Vector3<T>]) -> Self {
        let mut tree = Self { points, order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split along the axis of largest extent
        let mut lo = Vector3::repeat(T::max_value().unwrap());
        let mut hi = -lo;
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].partial_cmp(&pts[b][axis]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let value = pts[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: &Vector3<T>) -> Option<(usize, T)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, T::max_value().unwrap());
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vector3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points (including an exact duplicate of the query), closest first.
    pub fn k_nearest(&self, query: &Vector3<T>, k: usize) -> Vec<(usize, T)> {
        let mut heap: Vec<(usize, T)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.points.is_empty() {
            self.search_k(0, query, k, &mut heap);
        }
        heap
    }

    fn search_k(&self, node: usize, q: &Vector3<T>, k: usize, out: &mut Vec<(usize, T)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if out.len() == k {
                        let worst = out[k - 1];
                        if d > worst.1 || (d == worst.1 && i > worst.0) {
                            continue;
                        }
                        out.pop();
                    }
                    let pos = out.iter().position(|&(j, dj)| d < dj || (d == dj && i < j)).unwrap_or(out.len());
                    out.insert(pos, (i, d));
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search_k(near, q, k, out);
                if out.len() < k || diff * diff <= out[out.len() - 1].1 {
                    self.search_k(far, q, k, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Vector3<f64>], q: &Vector3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn empty_tree() {
        let pts: Vec<Vector3<f64>> = vec![];
        assert!(KdTree::new(&pts).nearest(&Vector3::zeros()).is_none());
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let pts = vec![Vector3::new(1.0, 1.0, 1.0); 20];
        assert_eq!(KdTree::new(&pts).nearest(&Vector3::zeros()).unwrap().0, 0);
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..200),
            q in (-6.0f64..6.0, -6.0f64..6.0, -6.0f64..6.0),
        ) {
            let pts: Vec<_> = raw.iter().map(|&(x, y, z)| Vector3::new(x, y, z)).collect();
            let q = Vector3::new(q.0, q.1, q.2);
            let tree = KdTree::new(&pts);
            let (i, d) = tree.nearest(&q).unwrap();
            let (_, bd) = brute(&pts, &q);
            prop_assert_eq!(d, bd);
            prop_assert_eq!((pts[i] - q).norm_squared(), bd);
        }

        #[test]
        fn knn_matches_sorted_brute_force(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..120),
            k in 1usize..15,
        ) {
            let pts: Vec<_> = raw.iter().map(|&(x, y, z)| Vector3::new(x, y, z)).collect();
            let q = pts[0];
            let mut all: Vec<(usize, f64)> =
                pts.iter().enumerate().map(|(i, p)| (i, (p - q).norm_squared())).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(KdTree::new(&pts).k_nearest(&q, k), all);
        }
    }
}
