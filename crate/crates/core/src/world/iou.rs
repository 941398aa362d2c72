/// Axis-aligned box `[left, lower, right, upper]`.
pub type BoxCoords = [f64; 4];

fn area(b: &BoxCoords) -> f64 {
    (b[2] - b[0]).max(0.0) * (b[3] - b[1]).max(0.0)
}

/// Intersection area of two boxes (0 when disjoint).
pub fn intersection_area(a: &BoxCoords, b: &BoxCoords) -> f64 {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

/// Intersection over union. Degenerate (zero-area) boxes score 0.
pub fn iou(a: &BoxCoords, b: &BoxCoords) -> f64 {
    let (area_a, area_b) = (area(a), area(b));
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let inter = intersection_area(a, b);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
