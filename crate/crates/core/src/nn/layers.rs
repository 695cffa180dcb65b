use super::{gemm, init_uniform, Conv2d, ConvGeom, Layer, Param, Tensor};
use crate::error::{ensure, Error, Result};
use crate::rng::Rng;

fn no_cache(what: &str) -> Error {
    Error::Contract(format!("{what} backward before forward"))
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(y)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        self.mask = Some(x.data().iter().map(|&v| v > 0.0).collect());
        self.forward(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mask = self.mask.take().ok_or_else(|| no_cache("relu"))?;
        ensure!(mask.len() == grad_out.len(), "relu gradient length {}", grad_out.len());
        let mut g = grad_out.clone();
        g.data_mut().iter_mut().zip(&mask).for_each(|(v, &m)| {
            if !m {
                *v = 0.0
            }
        });
        Ok(g)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}

/// Non-overlapping max pooling; trailing rows and columns that do not fill a
/// window are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub window: (usize, usize),
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(wh: usize, ww: usize) -> Result<Self> {
        ensure!(wh > 0 && ww > 0, "empty pooling window");
        Ok(Self { window: (wh, ww), cache: None })
    }

    /// Output values and the flat input index each one came from.
    fn pool(&self, x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let s = x.shape();
        ensure!(s.len() == 4, "maxpool expects N×C×H×W input, got {s:?}");
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (ph, pw) = self.window;
        let (ho, wo) = (h / ph, w / pw);
        ensure!(ho > 0 && wo > 0, "pooling window {ph}x{pw} larger than {h}x{w}");
        let mut out = Tensor::zeros(&[n, c, ho, wo]);
        let mut arg = vec![0; n * c * ho * wo];
        let xd = x.data();
        for p in 0..n * c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = usize::MAX;
                    for dy in 0..ph {
                        for dx in 0..pw {
                            let idx = (p * h + oy * ph + dy) * w + ox * pw + dx;
                            if best == usize::MAX || xd[idx] > xd[best] {
                                best = idx;
                            }
                        }
                    }
                    let o = (p * ho + oy) * wo + ox;
                    out.data_mut()[o] = xd[best];
                    arg[o] = best;
                }
            }
        }
        Ok((out, arg))
    }
}

impl Layer for MaxPool2d {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.pool(x)?.0)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, arg) = self.pool(x)?;
        self.cache = Some((x.shape().to_vec(), arg));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (shape, arg) = self.cache.take().ok_or_else(|| no_cache("maxpool"))?;
        ensure!(arg.len() == grad_out.len(), "maxpool gradient length {}", grad_out.len());
        let mut dx = Tensor::zeros(&shape);
        for (&i, &g) in arg.iter().zip(grad_out.data()) {
            dx.data_mut()[i] += g;
        }
        Ok(dx)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        ensure!(input.len() == 3, "maxpool expects C×H×W items, got {input:?}");
        let (ho, wo) = (input[1] / self.window.0, input[2] / self.window.1);
        ensure!(ho > 0 && wo > 0, "pooling window larger than input {input:?}");
        Ok(vec![input[0], ho, wo])
    }
}

/// Collapses every non-batch dimension.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Flatten {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = x.batch();
        x.clone().reshape(&[n, x.len() / n.max(1)])
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        self.shape = Some(x.shape().to_vec());
        self.forward(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.shape.take().ok_or_else(|| no_cache("flatten"))?;
        grad_out.clone().reshape(&shape)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }
}

/// Fully connected layer, weight layout `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let weight = init_uniform(&[outputs, inputs], inputs, rng);
        Self::from_parts(weight, Tensor::zeros(&[outputs]))
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        let (outputs, inputs) = (weight.shape()[0], weight.shape()[1]);
        Self { inputs, outputs, weight: Param::new(weight), bias: Param::new(bias), cache: None }
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        ensure!(
            x.shape().len() == 2 && x.shape()[1] == self.inputs,
            "dense expects N×{} input, got {:?}",
            self.inputs,
            x.shape()
        );
        Ok(x.shape()[0])
    }
}

impl Layer for Dense {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check(x)?;
        let mut y = Tensor::zeros(&[n, self.outputs]);
        gemm(n, self.inputs, self.outputs, x.data(), false, self.weight.value.data(), true, y.data_mut(), 0.0);
        for row in y.data_mut().chunks_mut(self.outputs) {
            row.iter_mut().zip(self.bias.value.data()).for_each(|(v, b)| *v += b);
        }
        Ok(y)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.take().ok_or_else(|| no_cache("dense"))?;
        let n = x.shape()[0];
        ensure!(grad_out.shape() == [n, self.outputs], "dense gradient shape {:?}", grad_out.shape());
        let g = grad_out.data();
        gemm(self.outputs, n, self.inputs, g, true, x.data(), false, self.weight.grad.data_mut(), 1.0);
        for row in g.chunks(self.outputs) {
            self.bias.grad.data_mut().iter_mut().zip(row).for_each(|(d, v)| *d += v);
        }
        let mut dx = Tensor::zeros(&[n, self.inputs]);
        gemm(n, self.outputs, self.inputs, g, false, self.weight.value.data(), false, dx.data_mut(), 0.0);
        Ok(dx)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        ensure!(input == [self.inputs], "dense expects {} features, got {input:?}", self.inputs);
        Ok(vec![self.outputs])
    }

    fn macs(&self, _input: &[usize]) -> u64 {
        (self.inputs * self.outputs) as u64
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// `x + conv(relu(conv(x)))` with shape-preserving 3×3 convolutions.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    relu: Relu,
    pub conv2: Conv2d,
}

impl ResidualBlock {
    pub fn new(channels: usize, rng: &mut Rng) -> Result<Self> {
        let g = ConvGeom::new(3, 1, 1);
        Ok(Self {
            conv1: Conv2d::new(channels, channels, g, rng)?,
            relu: Relu::new(),
            conv2: Conv2d::new(channels, channels, g, rng)?,
        })
    }
}

impl Layer for ResidualBlock {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.relu.forward(&self.conv1.forward(x)?)?;
        let mut y = self.conv2.forward(&h)?;
        y.add_assign(x)?;
        Ok(y)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let h = self.conv1.forward_train(x)?;
        let h = self.relu.forward_train(&h)?;
        let mut y = self.conv2.forward_train(&h)?;
        y.add_assign(x)?;
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let g = self.conv2.backward(grad_out)?;
        let g = self.relu.backward(&g)?;
        let mut dx = self.conv1.backward(&g)?;
        dx.add_assign(grad_out)?;
        Ok(dx)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.conv2.out_shape(&self.conv1.out_shape(input)?)
    }

    fn macs(&self, input: &[usize]) -> u64 {
        self.conv1.macs(input) + self.conv2.macs(input)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        p
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl Layer + 'static) {
        self.layers.push(Box::new(layer));
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl Layer for Sequential {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward_train(&h)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut s = input.to_vec();
        for l in &self.layers {
            s = l.out_shape(&s)?;
        }
        Ok(s)
    }

    fn macs(&self, input: &[usize]) -> u64 {
        let mut s = input.to_vec();
        let mut total = 0;
        for l in &self.layers {
            total += l.macs(&s);
            match l.out_shape(&s) {
                Ok(next) => s = next,
                Err(_) => return total,
            }
        }
        total
    }

    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}
