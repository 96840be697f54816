//! Minimal 3-D FFT on flat row-major `n³` complex buffers.
//!
//! Wraps `rustfft` 1-D plans applied along each axis. Transforms are raw
//! (unnormalized); callers divide by `n³` after an inverse pass. Index order
//! matches [`crate::phase::VelocityGrid::index`]: x slowest, z fastest, so the
//! z-axis lines are contiguous.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) type C64 = Complex<f64>;

pub(crate) struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Scratch sized for [`Self::forward`] / [`Self::inverse`]; reuse across calls.
    pub fn make_scratch(&self) -> Vec<C64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
            .max(self.n);
        vec![C64::new(0.0, 0.0); len]
    }

    pub fn forward(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.transform(buf, scratch, true);
    }

    /// Raw inverse (no 1/n³ normalization).
    pub fn inverse(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.transform(buf, scratch, false);
    }

    fn transform(&self, buf: &mut [C64], scratch: &mut [C64], fwd: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n * n * n);
        let plan = if fwd { &self.forward } else { &self.inverse };

        // z axis: contiguous lines; one call handles all n² of them.
        plan.process_with_scratch(buf, scratch);

        // y axis: stride n within each x-plane.
        let mut line = vec![C64::new(0.0, 0.0); n];
        for ix in 0..n {
            let plane = ix * n * n;
            for iz in 0..n {
                for iy in 0..n {
                    line[iy] = buf[plane + iy * n + iz];
                }
                plan.process_with_scratch(&mut line, scratch);
                for iy in 0..n {
                    buf[plane + iy * n + iz] = line[iy];
                }
            }
        }

        // x axis: stride n².
        for iy in 0..n {
            for iz in 0..n {
                let base = iy * n + iz;
                for ix in 0..n {
                    line[ix] = buf[base + ix * n * n];
                }
                plan.process_with_scratch(&mut line, scratch);
                for ix in 0..n {
                    buf[base + ix * n * n] = line[ix];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(n: usize, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * n + iy) * n + iz
    }

    #[test]
    fn round_trip_recovers_the_field() {
        let n = 8;
        let fft = Fft3::new(n);
        let mut scratch = fft.make_scratch();
        let mut buf: Vec<C64> = (0..n * n * n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), 0.0))
            .collect();
        let orig = buf.clone();
        fft.forward(&mut buf, &mut scratch);
        fft.inverse(&mut buf, &mut scratch);
        let norm = (n * n * n) as f64;
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a.re / norm - b.re).abs() < 1e-12);
            assert!((a.im / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_transforms_to_a_delta() {
        // f(v) = exp(i·2π(k·i)/n) has F̂ = n³ at mode k, 0 elsewhere.
        let n = 8;
        let (kx, ky, kz) = (2usize, 5, 7);
        let fft = Fft3::new(n);
        let mut scratch = fft.make_scratch();
        let mut buf = vec![C64::new(0.0, 0.0); n * n * n];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let phase = 2.0 * std::f64::consts::PI
                        * ((kx * ix + ky * iy + kz * iz) as f64)
                        / n as f64;
                    buf[idx(n, ix, iy, iz)] = C64::new(phase.cos(), phase.sin());
                }
            }
        }
        fft.forward(&mut buf, &mut scratch);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = buf[idx(n, ix, iy, iz)];
                    if (ix, iy, iz) == (kx, ky, kz) {
                        assert!((v.re - (n * n * n) as f64).abs() < 1e-9);
                        assert!(v.im.abs() < 1e-9);
                    } else {
                        assert!(v.norm() < 1e-9, "leak at {ix},{iy},{iz}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn forward_of_real_field_is_hermitian() {
        let n = 4;
        let fft = Fft3::new(n);
        let mut scratch = fft.make_scratch();
        let mut buf: Vec<C64> = (0..n * n * n)
            .map(|i| C64::new((i as f64).cos(), 0.0))
            .collect();
        fft.forward(&mut buf, &mut scratch);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let a = buf[idx(n, ix, iy, iz)];
                    let b = buf[idx(
                        n,
                        (n - ix) % n,
                        (n - iy) % n,
                        (n - iz) % n,
                    )];
                    assert!((a.re - b.re).abs() < 1e-10);
                    assert!((a.im + b.im).abs() < 1e-10);
                }
            }
        }
    }
}
