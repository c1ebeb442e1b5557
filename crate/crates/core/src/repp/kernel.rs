use super::types::{KernelShape, KernelSpec};

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Influence of a closing at `i` on house `n`, in `[0, 1]`.
///
/// `dx`, `dy` are the axis offsets between the two houses; `d` is the
/// distance used by the radial kernel (Euclidean, or looked up from a table).
#[inline]
pub(crate) fn weight_from_offsets(spec: &KernelSpec, dx: f64, dy: f64, d: f64) -> f64 {
    match spec.shape {
        KernelShape::Radial => relu((spec.r - d) / spec.r),
        // each axis factor is clamped on its own, so two far axes never
        // multiply into a positive weight
        KernelShape::GridSeparable => {
            relu((spec.r_x - dx.abs()) / spec.r_x) * relu((spec.r_y - dy.abs()) / spec.r_y)
        }
    }
}

/// Kernel weight between two positions using Euclidean distance.
pub fn kernel_weight(spec: &KernelSpec, n: (f64, f64), i: (f64, f64)) -> f64 {
    let dx = n.0 - i.0;
    let dy = n.1 - i.1;
    weight_from_offsets(spec, dx, dy, dx.hypot(dy))
}
