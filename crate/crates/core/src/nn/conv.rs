use super::{gemm, init_uniform, Layer, Param, Tensor};
use crate::error::{ensure, Result};
use crate::rng::Rng;

/// Kernel, stride and zero padding of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

impl ConvGeom {
    pub fn new(k: usize, s: usize, p: usize) -> Self {
        Self { kernel: (k, k), stride: (s, s), pad: (p, p) }
    }

    /// Output size of a forward convolution over `h × w`.
    pub fn conv_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (hp, wp) = (h + 2 * self.pad.0, w + 2 * self.pad.1);
        ensure!(hp >= kh && wp >= kw, "kernel {kh}x{kw} larger than padded input {hp}x{wp}");
        Ok(((hp - kh) / self.stride.0 + 1, (wp - kw) / self.stride.1 + 1))
    }

    /// Output size of a transposed convolution over `h × w`.
    pub fn transpose_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ho = (h - 1) * self.stride.0 + self.kernel.0;
        let wo = (w - 1) * self.stride.1 + self.kernel.1;
        ensure!(ho > 2 * self.pad.0 && wo > 2 * self.pad.1, "padding consumes the whole output");
        Ok((ho - 2 * self.pad.0, wo - 2 * self.pad.1))
    }

    fn check(&self) -> Result<()> {
        ensure!(self.kernel.0 > 0 && self.kernel.1 > 0, "empty kernel");
        ensure!(self.stride.0 > 0 && self.stride.1 > 0, "zero stride");
        Ok(())
    }
}

/// Unfolds `x` (`c × h × w`) into `cols` with rows `(ci, ki, kj)` and columns
/// `(oy, ox)` over an `ho × wo` output grid.
#[allow(clippy::too_many_arguments)]
pub fn im2col(x: &[f32], c: usize, h: usize, w: usize, g: &ConvGeom, ho: usize, wo: usize, cols: &mut [f32]) {
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let (ph, pw) = (g.pad.0 as isize, g.pad.1 as isize);
    let plane = ho * wo;
    for ci in 0..c {
        let src = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = (oy * sh + ki) as isize - ph;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * sw + kj) as isize - pw;
                        *v = if ix < 0 || ix >= w as isize { 0.0 } else { srow[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `cols` back and accumulates into `x`.
#[allow(clippy::too_many_arguments)]
pub fn col2im(cols: &[f32], c: usize, h: usize, w: usize, g: &ConvGeom, ho: usize, wo: usize, x: &mut [f32]) {
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let (ph, pw) = (g.pad.0 as isize, g.pad.1 as isize);
    let plane = ho * wo;
    for ci in 0..c {
        let dst = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = (oy * sh + ki) as isize - ph;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * sw + kj) as isize - pw;
                        if ix >= 0 && ix < w as isize {
                            drow[ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn chw(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    ensure!(shape.len() == 3, "{what} expects C×H×W items, got {shape:?}");
    Ok((shape[0], shape[1], shape[2]))
}

fn nchw(x: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    let s = x.shape();
    ensure!(s.len() == 4, "{what} expects N×C×H×W input, got {s:?}");
    Ok((s[0], s[1], s[2], s[3]))
}

fn add_bias(out: &mut [f32], bias: &[f32], plane: usize) {
    for (chunk, b) in out.chunks_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn accumulate_bias_grad(grad: &[f32], db: &mut [f32], plane: usize) {
    for (chunk, d) in grad.chunks(plane).zip(db.iter_mut()) {
        *d += chunk.iter().sum::<f32>();
    }
}

/// 2-D convolution. Weight layout `[out, in, kh, kw]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub geom: ConvGeom,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, geom: ConvGeom, rng: &mut Rng) -> Result<Self> {
        geom.check()?;
        let (kh, kw) = geom.kernel;
        let weight = init_uniform(&[out_ch, in_ch, kh, kw], in_ch * kh * kw, rng);
        Ok(Self::from_parts(in_ch, out_ch, geom, weight, Tensor::zeros(&[out_ch])))
    }

    pub fn from_parts(in_ch: usize, out_ch: usize, geom: ConvGeom, weight: Tensor, bias: Tensor) -> Self {
        Self { in_ch, out_ch, geom, weight: Param::new(weight), bias: Param::new(bias), cache: None }
    }

    fn patch(&self) -> usize {
        self.in_ch * self.geom.kernel.0 * self.geom.kernel.1
    }
}

impl Layer for Conv2d {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = nchw(x, "conv2d")?;
        ensure!(c == self.in_ch, "conv2d expects {} channels, got {c}", self.in_ch);
        let (ho, wo) = self.geom.conv_out(h, w)?;
        let (plane, patch) = (ho * wo, self.patch());
        let mut out = Tensor::zeros(&[n, self.out_ch, ho, wo]);
        let mut cols = vec![0.0; patch * plane];
        let per_out = self.out_ch * plane;
        for i in 0..n {
            im2col(x.item(i), c, h, w, &self.geom, ho, wo, &mut cols);
            let o = &mut out.data_mut()[i * per_out..(i + 1) * per_out];
            gemm(self.out_ch, patch, plane, self.weight.value.data(), false, &cols, false, o, 0.0);
            add_bias(o, self.bias.value.data(), plane);
        }
        Ok(out)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.take().ok_or_else(|| crate::Error::Contract("conv2d backward before forward".into()))?;
        let (n, c, h, w) = nchw(&x, "conv2d")?;
        let (ho, wo) = self.geom.conv_out(h, w)?;
        ensure!(grad_out.shape() == [n, self.out_ch, ho, wo], "conv2d gradient shape {:?}", grad_out.shape());
        let (plane, patch) = (ho * wo, self.patch());
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = vec![0.0; patch * plane];
        let mut dcols = vec![0.0; patch * plane];
        let per_in = c * h * w;
        for i in 0..n {
            let g = grad_out.item(i);
            im2col(x.item(i), c, h, w, &self.geom, ho, wo, &mut cols);
            gemm(self.out_ch, plane, patch, g, false, &cols, true, self.weight.grad.data_mut(), 1.0);
            accumulate_bias_grad(g, self.bias.grad.data_mut(), plane);
            gemm(patch, self.out_ch, plane, self.weight.value.data(), true, g, false, &mut dcols, 0.0);
            col2im(&dcols, c, h, w, &self.geom, ho, wo, &mut dx.data_mut()[i * per_in..(i + 1) * per_in]);
        }
        Ok(dx)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c, h, w) = chw(input, "conv2d")?;
        ensure!(c == self.in_ch, "conv2d expects {} channels, got {c}", self.in_ch);
        let (ho, wo) = self.geom.conv_out(h, w)?;
        Ok(vec![self.out_ch, ho, wo])
    }

    fn macs(&self, input: &[usize]) -> u64 {
        match self.out_shape(input) {
            Ok(o) => (o[0] * o[1] * o[2] * self.patch()) as u64,
            Err(_) => 0,
        }
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Transposed 2-D convolution, the adjoint of [`Conv2d`] in its input.
/// Weight layout `[in, out, kh, kw]`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub geom: ConvGeom,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl ConvTranspose2d {
    pub fn new(in_ch: usize, out_ch: usize, geom: ConvGeom, rng: &mut Rng) -> Result<Self> {
        geom.check()?;
        let (kh, kw) = geom.kernel;
        // Each output sees about in·kh·kw/(sh·sw) inputs.
        let fan_in = (in_ch * kh * kw / (geom.stride.0 * geom.stride.1)).max(1);
        let weight = init_uniform(&[in_ch, out_ch, kh, kw], fan_in, rng);
        Ok(Self::from_parts(in_ch, out_ch, geom, weight, Tensor::zeros(&[out_ch])))
    }

    pub fn from_parts(in_ch: usize, out_ch: usize, geom: ConvGeom, weight: Tensor, bias: Tensor) -> Self {
        Self { in_ch, out_ch, geom, weight: Param::new(weight), bias: Param::new(bias), cache: None }
    }

    fn patch(&self) -> usize {
        self.out_ch * self.geom.kernel.0 * self.geom.kernel.1
    }
}

impl Layer for ConvTranspose2d {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = nchw(x, "conv_transpose2d")?;
        ensure!(c == self.in_ch, "conv_transpose2d expects {} channels, got {c}", self.in_ch);
        let (ho, wo) = self.geom.transpose_out(h, w)?;
        let (plane_in, patch) = (h * w, self.patch());
        let per_out = self.out_ch * ho * wo;
        let mut out = Tensor::zeros(&[n, self.out_ch, ho, wo]);
        let mut cols = vec![0.0; patch * plane_in];
        for i in 0..n {
            gemm(patch, c, plane_in, self.weight.value.data(), true, x.item(i), false, &mut cols, 0.0);
            let o = &mut out.data_mut()[i * per_out..(i + 1) * per_out];
            col2im(&cols, self.out_ch, ho, wo, &self.geom, h, w, o);
            add_bias(o, self.bias.value.data(), ho * wo);
        }
        Ok(out)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| crate::Error::Contract("conv_transpose2d backward before forward".into()))?;
        let (n, c, h, w) = nchw(&x, "conv_transpose2d")?;
        let (ho, wo) = self.geom.transpose_out(h, w)?;
        ensure!(grad_out.shape() == [n, self.out_ch, ho, wo], "conv_transpose2d gradient shape {:?}", grad_out.shape());
        let (plane_in, patch) = (h * w, self.patch());
        let mut dx = Tensor::zeros(x.shape());
        let mut gcols = vec![0.0; patch * plane_in];
        let per_in = c * plane_in;
        for i in 0..n {
            let g = grad_out.item(i);
            im2col(g, self.out_ch, ho, wo, &self.geom, h, w, &mut gcols);
            accumulate_bias_grad(g, self.bias.grad.data_mut(), ho * wo);
            gemm(c, plane_in, patch, x.item(i), false, &gcols, true, self.weight.grad.data_mut(), 1.0);
            gemm(
                c,
                patch,
                plane_in,
                self.weight.value.data(),
                false,
                &gcols,
                false,
                &mut dx.data_mut()[i * per_in..(i + 1) * per_in],
                0.0,
            );
        }
        Ok(dx)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c, h, w) = chw(input, "conv_transpose2d")?;
        ensure!(c == self.in_ch, "conv_transpose2d expects {} channels, got {c}", self.in_ch);
        let (ho, wo) = self.geom.transpose_out(h, w)?;
        Ok(vec![self.out_ch, ho, wo])
    }

    fn macs(&self, input: &[usize]) -> u64 {
        match chw(input, "conv_transpose2d") {
            Ok((c, h, w)) => (c * h * w * self.patch()) as u64,
            Err(_) => 0,
        }
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
