//! Force-based label collision removal.
//!
//! Overlapping boxes repel each other along the axis of least overlap, half
//! the penetration to each side, until no pair overlaps or the iteration
//! budget runs out. Separating along the smaller overlap axis is the greedy
//! minimum displacement for the pair.

/// An axis-aligned label box centered on `position`, tethered to `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelBox {
    pub anchor: [f64; 2],
    pub position: [f64; 2],
    pub width: f64,
    pub height: f64,
}

impl LabelBox {
    pub fn at(x: f64, y: f64, width: f64, height: f64) -> Self {
        LabelBox { anchor: [x, y], position: [x, y], width, height }
    }

    fn overlap(&self, other: &LabelBox) -> Option<(f64, f64)> {
        let ox = (self.width + other.width) / 2.0 - (self.position[0] - other.position[0]).abs();
        let oy =
            (self.height + other.height) / 2.0 - (self.position[1] - other.position[1]).abs();
        (ox > 0.0 && oy > 0.0).then_some((ox, oy))
    }

    /// Intersection area with another box.
    pub fn overlap_area(&self, other: &LabelBox) -> f64 {
        self.overlap(other).map_or(0.0, |(ox, oy)| ox * oy)
    }
}

#[derive(Debug, Clone)]
pub struct OverlapResolution {
    pub boxes: Vec<LabelBox>,
    /// Overlapping pairs remaining after the iteration budget.
    pub residual_overlaps: usize,
    pub iterations_used: usize,
}

/// Iteratively separate overlapping boxes (best effort).
pub fn resolve_overlaps(boxes: &[LabelBox], max_iter: usize) -> OverlapResolution {
    let mut boxes = boxes.to_vec();
    let n = boxes.len();
    let mut iterations_used = 0;
    for iter in 0..max_iter {
        let mut moved = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let Some((ox, oy)) = boxes[i].overlap(&boxes[j]) else { continue };
                moved = true;
                // push along the axis with the smaller penetration; a tiny
                // margin keeps the pair from re-touching exactly
                let margin = 1e-9;
                if ox <= oy {
                    let dir = direction(boxes[i].position[0], boxes[j].position[0], i, j);
                    let shift = (ox / 2.0) + margin;
                    boxes[i].position[0] -= dir * shift;
                    boxes[j].position[0] += dir * shift;
                } else {
                    let dir = direction(boxes[i].position[1], boxes[j].position[1], i, j);
                    let shift = (oy / 2.0) + margin;
                    boxes[i].position[1] -= dir * shift;
                    boxes[j].position[1] += dir * shift;
                }
            }
        }
        iterations_used = iter + 1;
        if !moved {
            break;
        }
    }
    let residual_overlaps = count_overlaps(&boxes);
    OverlapResolution { boxes, residual_overlaps, iterations_used }
}

/// +1 pushes j to the positive side; coincident centers split by index so the
/// outcome is deterministic.
fn direction(a: f64, b: f64, i: usize, j: usize) -> f64 {
    if b > a {
        1.0
    } else if b < a {
        -1.0
    } else if j > i {
        1.0
    } else {
        -1.0
    }
}

pub fn count_overlaps(boxes: &[LabelBox]) -> usize {
    let mut count = 0;
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            if boxes[i].overlap(&boxes[j]).is_some() {
                count += 1;
            }
        }
    }
    count
}

pub fn total_overlap_area(boxes: &[LabelBox]) -> f64 {
    let mut area = 0.0;
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            area += boxes[i].overlap_area(&boxes[j]);
        }
    }
    area
}
