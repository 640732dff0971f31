//! 1-D cross-correlation kernels built on strided GEMM, one call per tap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// `dilation * (k - 1) / 2` zeros each side; needs an odd kernel.
    Same,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub stride: usize,
    pub dilation: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn new(
        x_shape: &[usize],
        w_shape: &[usize],
        stride: usize,
        dilation: usize,
        padding: Padding,
    ) -> Result<Self> {
        if x_shape.len() != 3 || w_shape.len() != 3 || x_shape[1] != w_shape[1] {
            return Err(Error::ShapeMismatch {
                expected: vec![x_shape.first().copied().unwrap_or(0), w_shape[1], 0],
                got: x_shape.to_vec(),
            });
        }
        if stride == 0 || dilation == 0 {
            return Err(Error::invalid("stride and dilation must be >= 1"));
        }
        let kernel = w_shape[2];
        let pad = match padding {
            Padding::None => 0,
            Padding::Same => {
                if kernel % 2 == 0 {
                    return Err(Error::invalid("same padding needs an odd kernel"));
                }
                dilation * (kernel - 1) / 2
            }
        };
        let t_in = x_shape[2];
        let span = dilation * (kernel - 1) + 1;
        if t_in + 2 * pad < span {
            return Err(Error::invalid(format!(
                "input length {t_in} shorter than dilated kernel span {span}"
            )));
        }
        let t_out = (t_in + 2 * pad - span) / stride + 1;
        Ok(Self {
            batch: x_shape[0],
            c_in: x_shape[1],
            c_out: w_shape[0],
            kernel,
            t_in,
            t_out,
            stride,
            dilation,
            pad,
        })
    }

    /// Output positions `[lo, hi)` whose tap `j` reads inside the input.
    fn tap_range(&self, j: usize) -> (usize, usize) {
        let off = j * self.dilation;
        let lo = if self.pad > off {
            (self.pad - off).div_ceil(self.stride)
        } else {
            0
        };
        let hi = if self.t_in - 1 + self.pad >= off {
            ((self.t_in - 1 + self.pad - off) / self.stride + 1).min(self.t_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    fn input_start(&self, j: usize, lo: usize) -> usize {
        lo * self.stride + j * self.dilation - self.pad
    }
}

#[allow(clippy::too_many_arguments)]
unsafe fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: *const f64,
    rsa: usize,
    csa: usize,
    b: *const f64,
    rsb: usize,
    csb: usize,
    c: *mut f64,
    rsc: usize,
    csc: usize,
) {
    matrixmultiply::dgemm(
        m, k, n, 1.0, a, rsa as isize, csa as isize, b, rsb as isize, csb as isize, 1.0, c,
        rsc as isize, csc as isize,
    );
}

pub fn forward(g: &ConvGeometry, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let mut y = vec![0.0; g.batch * g.c_out * g.t_out];
    if let Some(b) = bias {
        for (row, v) in y.chunks_mut(g.t_out).enumerate() {
            v.fill(b[row % g.c_out]);
        }
    }
    for bi in 0..g.batch {
        let xb = &x[bi * g.c_in * g.t_in..];
        let yb = &mut y[bi * g.c_out * g.t_out..];
        for j in 0..g.kernel {
            let (lo, hi) = g.tap_range(j);
            if hi == lo {
                continue;
            }
            let start = g.input_start(j, lo);
            // SAFETY: the strided views stay inside `x`, `w` and `y` by
            // construction of `tap_range`.
            unsafe {
                gemm(
                    g.c_out,
                    g.c_in,
                    hi - lo,
                    w.as_ptr().add(j),
                    g.c_in * g.kernel,
                    g.kernel,
                    xb.as_ptr().add(start),
                    g.t_in,
                    g.stride,
                    yb.as_mut_ptr().add(lo),
                    g.t_out,
                    1,
                );
            }
        }
    }
    y
}

/// Accumulates input, weight and bias gradients for output gradient `dy`.
pub fn backward(
    g: &ConvGeometry,
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(db) = db {
        for (row, v) in dy.chunks(g.t_out).enumerate() {
            db[row % g.c_out] += v.iter().sum::<f64>();
        }
    }
    if let Some(dw) = dw {
        for bi in 0..g.batch {
            let xb = &x[bi * g.c_in * g.t_in..];
            let dyb = &dy[bi * g.c_out * g.t_out..];
            for j in 0..g.kernel {
                let (lo, hi) = g.tap_range(j);
                if hi == lo {
                    continue;
                }
                let start = g.input_start(j, lo);
                // SAFETY: as in `forward`.
                unsafe {
                    gemm(
                        g.c_out,
                        hi - lo,
                        g.c_in,
                        dyb.as_ptr().add(lo),
                        g.t_out,
                        1,
                        xb.as_ptr().add(start),
                        g.stride,
                        g.t_in,
                        dw.as_mut_ptr().add(j),
                        g.c_in * g.kernel,
                        g.kernel,
                    );
                }
            }
        }
    }
    if let Some(dx) = dx {
        for bi in 0..g.batch {
            let dxb = &mut dx[bi * g.c_in * g.t_in..];
            let dyb = &dy[bi * g.c_out * g.t_out..];
            for j in 0..g.kernel {
                let (lo, hi) = g.tap_range(j);
                if hi == lo {
                    continue;
                }
                let start = g.input_start(j, lo);
                // SAFETY: as in `forward`.
                unsafe {
                    gemm(
                        g.c_in,
                        g.c_out,
                        hi - lo,
                        w.as_ptr().add(j),
                        g.kernel,
                        g.c_in * g.kernel,
                        dyb.as_ptr().add(lo),
                        g.t_out,
                        1,
                        dxb.as_mut_ptr().add(start),
                        g.t_in,
                        g.stride,
                    );
                }
            }
        }
    }
}
