//! Uniform access to the trainable tensors of a model.

use alloc::vec::Vec;

/// A bundle of trainable tensors exposed as flat slices in a fixed order.
///
/// Gradients use the same type as the parameters they differentiate, so the
/// slice order of a parameter set and of its gradient always agree.
pub trait Parameters {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// All entries concatenated in slice order.
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in self.slices() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Overwrites every entry from `flat`, which must hold `num_params()` values.
    fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
    }

    fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    /// `self += other`, entrywise. Both must share a layout.
    fn accumulate(&mut self, other: &Self) {
        let theirs = other.slices();
        for (mine, theirs) in self.slices_mut().into_iter().zip(theirs) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for x in s.iter_mut() {
                *x *= factor;
            }
        }
    }

    fn norm_sq(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |acc, x| acc + x * x)
    }

    fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// Scales `grads` so that its global L2 norm does not exceed `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.norm_sq());
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
