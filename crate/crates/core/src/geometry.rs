//! Bucketed segment index for winding-number and distance queries against
//! sampled boundaries.

use crate::auxlin::PhasePoint;

/// q-buckets answer winding queries; a bounding-box tree over runs of
/// consecutive segments answers distance queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segs: Vec<[PhasePoint; 2]>,
    q0: f64,
    dq: f64,
    buckets: Vec<Vec<u32>>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    // pmin, pmax, qmin, qmax
    bbox: [f64; 4],
    lo: u32,
    hi: u32,
    children: Option<(u32, u32)>,
}

const LEAF: usize = 8;

fn bbox_distance2(b: &[f64; 4], x: PhasePoint) -> f64 {
    let dp = (b[0] - x.p).max(x.p - b[1]).max(0.0);
    let dq = (b[2] - x.q).max(x.q - b[3]).max(0.0);
    dp * dp + dq * dq
}

fn build_tree(segs: &[[PhasePoint; 2]], lo: usize, hi: usize, nodes: &mut Vec<Node>) -> u32 {
    let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for s in &segs[lo..hi] {
        for v in s {
            bbox[0] = bbox[0].min(v.p);
            bbox[1] = bbox[1].max(v.p);
            bbox[2] = bbox[2].min(v.q);
            bbox[3] = bbox[3].max(v.q);
        }
    }
    let id = nodes.len();
    nodes.push(Node { bbox, lo: lo as u32, hi: hi as u32, children: None });
    if hi - lo > LEAF {
        let mid = lo + (hi - lo) / 2;
        let a = build_tree(segs, lo, mid, nodes);
        let b = build_tree(segs, mid, hi, nodes);
        nodes[id].children = Some((a, b));
    }
    id as u32
}

pub fn segment_distance(a: PhasePoint, b: PhasePoint, x: PhasePoint) -> f64 {
    segment_distance2(a, b, x).sqrt()
}

fn segment_distance2(a: PhasePoint, b: PhasePoint, x: PhasePoint) -> f64 {
    let (dx, dy) = (b.p - a.p, b.q - a.q);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((x.p - a.p) * dx + (x.q - a.q) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (a.p + t * dx - x.p, a.q + t * dy - x.q);
    ex * ex + ey * ey
}

/// Distance from `x` to the ray starting at `a` with direction `dir`.
pub fn ray_distance(a: PhasePoint, dir: (f64, f64), x: PhasePoint) -> f64 {
    let len2 = dir.0 * dir.0 + dir.1 * dir.1;
    let t = if len2 > 0.0 { (((x.p - a.p) * dir.0 + (x.q - a.q) * dir.1) / len2).max(0.0) } else { 0.0 };
    (a.p + t * dir.0 - x.p).hypot(a.q + t * dir.1 - x.q)
}

fn is_left(a: PhasePoint, b: PhasePoint, x: PhasePoint) -> f64 {
    (b.p - a.p) * (x.q - a.q) - (x.p - a.p) * (b.q - a.q)
}

impl SegmentIndex {
    /// Edges between consecutive points; `closed` adds the edge back to the first point.
    pub fn from_polyline(points: &[PhasePoint], closed: bool) -> Self {
        let mut segs: Vec<[PhasePoint; 2]> = points.windows(2).map(|w| [w[0], w[1]]).collect();
        if closed && points.len() > 1 {
            segs.push([points[points.len() - 1], points[0]]);
        }
        Self::new(segs)
    }

    pub fn new(segs: Vec<[PhasePoint; 2]>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &segs {
            for v in s {
                lo = lo.min(v.q);
                hi = hi.max(v.q);
            }
        }
        if segs.is_empty() {
            return Self { segs, q0: 0.0, dq: 1.0, buckets: vec![Vec::new()], nodes: Vec::new() };
        }
        let nb = (segs.len() / 4).clamp(1, 4096);
        let span = hi - lo;
        let dq = if span > 0.0 { span / nb as f64 } else { 1.0 };
        let mut nodes = Vec::new();
        build_tree(&segs, 0, segs.len(), &mut nodes);
        let mut idx = Self { segs, q0: lo, dq, buckets: vec![Vec::new(); nb], nodes };
        for (i, s) in idx.segs.iter().enumerate() {
            let b0 = idx.bucket_of(s[0].q.min(s[1].q));
            let b1 = idx.bucket_of(s[0].q.max(s[1].q));
            for b in b0..=b1 {
                idx.buckets[b].push(i as u32);
            }
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.segs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    fn bucket_of(&self, q: f64) -> usize {
        let b = ((q - self.q0) / self.dq).floor();
        if b.is_nan() || b < 0.0 {
            0
        } else {
            (b as usize).min(self.buckets.len() - 1)
        }
    }

    /// Winding number of the (closed) edge set around `x`.
    pub fn winding(&self, x: PhasePoint) -> i32 {
        if self.segs.is_empty() || x.q < self.q0 || x.q > self.q0 + self.dq * self.buckets.len() as f64 {
            return 0;
        }
        let mut w = 0;
        for &i in &self.buckets[self.bucket_of(x.q)] {
            let [a, b] = self.segs[i as usize];
            if a.q <= x.q {
                if b.q > x.q && is_left(a, b, x) > 0.0 {
                    w += 1;
                }
            } else if b.q <= x.q && is_left(a, b, x) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    /// Euclidean distance from `x` to the nearest edge.
    pub fn distance(&self, x: PhasePoint) -> f64 {
        self.distance_capped(x, f64::INFINITY)
    }

    /// `min(distance(x), cap)`; edges farther than `cap` are pruned early.
    pub fn distance_capped(&self, x: PhasePoint, cap: f64) -> f64 {
        if self.segs.is_empty() {
            return cap;
        }
        let mut best = cap * cap;
        if cap.is_infinite() && x.q >= self.q0 && x.q <= self.q0 + self.dq * self.buckets.len() as f64 {
            let bucket = &self.buckets[self.bucket_of(x.q)];
            // a cheap first upper bound from edges spanning the same q level
            for &i in bucket.iter().take(64) {
                let [a, b] = self.segs[i as usize];
                best = best.min(segment_distance2(a, b, x));
            }
        }
        let mut stack = [0u32; 128];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let id = stack[top];
            let node = &self.nodes[id as usize];
            if bbox_distance2(&node.bbox, x) >= best {
                continue;
            }
            match node.children {
                None => {
                    for s in &self.segs[node.lo as usize..node.hi as usize] {
                        best = best.min(segment_distance2(s[0], s[1], x));
                    }
                }
                Some((a, b)) => {
                    let da = bbox_distance2(&self.nodes[a as usize].bbox, x);
                    let db = bbox_distance2(&self.nodes[b as usize].bbox, x);
                    // nearer child on top
                    let (near, far) = if da <= db { (a, b) } else { (b, a) };
                    stack[top] = far;
                    stack[top + 1] = near;
                    top += 2;
                }
            }
        }
        best.sqrt()
    }
}
