//! Thin planned wrappers over rustfft for square 2-D and cubic 3-D
//! transforms.
//!
//! Convention: `forward` is the unnormalized DFT with kernel
//! `exp(-2 pi i j k / n)` along each axis; `inverse` includes the `1/n^d`
//! factor so `inverse(forward(x)) == x`.

use crate::C64;
use ndarray::{Array2, Array3};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, a: &mut Array2<C64>) {
        self.transform(a, &self.fwd);
    }

    pub fn inverse(&self, a: &mut Array2<C64>) {
        self.transform(a, &self.inv);
        let scale = 1.0 / (self.n * self.n) as f64;
        a.mapv_inplace(|v| v * scale);
    }

    fn transform(&self, a: &mut Array2<C64>, fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(a.dim(), (self.n, self.n), "array does not match plan size");
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("rows of a standard array are contiguous");
            fft.process(slice);
        }
        let mut col = vec![C64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            for i in 0..self.n {
                col[i] = a[(i, j)];
            }
            fft.process(&mut col);
            for i in 0..self.n {
                a[(i, j)] = col[i];
            }
        }
    }
}

/// Forward DFT of a real array.
pub fn forward_real(fft: &Fft2, a: &Array2<f64>) -> Array2<C64> {
    let mut out = a.mapv(|v| C64::new(v, 0.0));
    fft.forward(&mut out);
    out
}

pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, a: &mut Array3<C64>) {
        self.transform(a, &self.fwd);
    }

    pub fn inverse(&self, a: &mut Array3<C64>) {
        self.transform(a, &self.inv);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        a.mapv_inplace(|v| v * scale);
    }

    fn transform(&self, a: &mut Array3<C64>, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(a.dim(), (n, n, n), "array does not match plan size");
        {
            let slice = a.as_slice_mut().expect("standard layout");
            for line in slice.chunks_mut(n) {
                fft.process(line);
            }
        }
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    buf[j] = a[(i, j, k)];
                }
                fft.process(&mut buf);
                for j in 0..n {
                    a[(i, j, k)] = buf[j];
                }
            }
        }
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    buf[i] = a[(i, j, k)];
                }
                fft.process(&mut buf);
                for i in 0..n {
                    a[(i, j, k)] = buf[i];
                }
            }
        }
    }
}

/// Forward DFT of a real volume.
pub fn forward_real_3(fft: &Fft3, a: &Array3<f64>) -> Array3<C64> {
    let mut out = a.mapv(|v| C64::new(v, 0.0));
    fft.forward(&mut out);
    out
}
