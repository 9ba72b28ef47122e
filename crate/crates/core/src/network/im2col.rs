//! Patch extraction for convolutions.
//!
//! Row `p` of the patch matrix is the receptive field of output position `p`
//! (positions in row-major order), vectorized in `(row, col, channel)`
//! row-major order. Flattening a `kh × kw × c_in` kernel slice the same way
//! turns convolution into a matrix product.

use ndarray::{s, Array2, ArrayView2, ArrayView3};

use super::model::Padding;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

pub fn conv_geometry(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Result<ConvGeometry> {
    if kh == 0 || kw == 0 || stride == 0 {
        return Err(Error::Shape("kernel size and stride must be positive".into()));
    }
    let axis = |size: usize, k: usize| -> Result<(usize, usize)> {
        match padding {
            Padding::Valid => {
                if k > size {
                    return Err(Error::Shape(format!(
                        "kernel extent {k} larger than input extent {size}"
                    )));
                }
                Ok(((size - k) / stride + 1, 0))
            }
            Padding::Same => {
                let out = size.div_ceil(stride);
                let total = ((out - 1) * stride + k).saturating_sub(size);
                Ok((out, total / 2))
            }
        }
    };
    let (out_h, pad_top) = axis(h, kh)?;
    let (out_w, pad_left) = axis(w, kw)?;
    Ok(ConvGeometry {
        out_h,
        out_w,
        pad_top,
        pad_left,
    })
}

/// Patch matrix (`positions × kh·kw·c`) of one `h × w × c` feature map.
pub fn im2col(
    feature_map: ArrayView3<f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Result<Array2<f64>> {
    let (h, w, c) = feature_map.dim();
    let g = conv_geometry(h, w, kh, kw, stride, padding)?;
    let mut out = Array2::<f64>::zeros((g.positions(), kh * kw * c));
    fill_patches(feature_map, kh, kw, stride, &g, out.view_mut());
    Ok(out)
}

fn fill_patches(
    fm: ArrayView3<f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    g: &ConvGeometry,
    mut out: ndarray::ArrayViewMut2<f64>,
) {
    let (h, w, c) = fm.dim();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let mut row = out.row_mut(oy * g.out_w + ox);
            let mut k = 0;
            for r in 0..kh {
                let iy = (oy * stride + r) as isize - g.pad_top as isize;
                for s_ in 0..kw {
                    let ix = (ox * stride + s_) as isize - g.pad_left as isize;
                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                        for ch in 0..c {
                            row[k + ch] = fm[[iy as usize, ix as usize, ch]];
                        }
                    }
                    k += c;
                }
            }
        }
    }
}

/// Stacks the patch matrices of every sample in `batch` (`m × h·w·c`,
/// rows flattened from `(h, w, c)`): rows `i·P .. (i+1)·P` belong to sample `i`.
pub fn batch_im2col(
    batch: ArrayView2<f64>,
    shape: [usize; 3],
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Result<(Array2<f64>, ConvGeometry)> {
    let [h, w, c] = shape;
    if batch.ncols() != h * w * c {
        return Err(Error::DimensionMismatch {
            context: "feature map size",
            expected: h * w * c,
            found: batch.ncols(),
        });
    }
    let g = conv_geometry(h, w, kh, kw, stride, padding)?;
    let p = g.positions();
    let mut out = Array2::<f64>::zeros((batch.nrows() * p, kh * kw * c));
    for (i, sample) in batch.rows().into_iter().enumerate() {
        let sample = sample.as_standard_layout();
        let fm = sample
            .view()
            .into_shape_with_order((h, w, c))
            .expect("size checked");
        fill_patches(fm, kh, kw, stride, &g, out.slice_mut(s![i * p..(i + 1) * p, ..]));
    }
    Ok((out, g))
}
