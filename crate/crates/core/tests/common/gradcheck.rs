//! Finite-difference gradient checks driven only through inference passes.
//!
//! Between ReLU and max-pool boundaries the checked losses are linear, or
//! quadratic under a squared loss, in any single entry. Each entry is probed
//! at ±h and ±h/2. A linear loss must show one slope at all four points; a
//! quadratic one must give the same Richardson extrapolation from both
//! sides. Anything else means a boundary inside the window, and the step is
//! cut tenfold, up to `REFINE` sizes. Entries still unresolved are skipped,
//! within a budget. Long steps keep f32 rounding small against the
//! difference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqaug::nn::{Conv2d, ConvGeom, ConvTranspose2d, Layer, Param, Relu, ResidualBlock, Sequential, Tensor};
use vqaug::rng::rng;
use vqaug::vqvae::VqVae;

pub const STEP: f32 = 1e-2;
/// Step sizes tried per entry, each a tenth of the last.
const REFINE: usize = 3;
/// Slope disagreement, relative and as a fraction of the gradient's RMS,
/// taken as a kink. Accuracy itself is judged by the caller's tolerance.
const KINK_REL: f64 = 1e-2;
const KINK_ABS: f64 = 1e-3;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn projected(layer: &dyn Layer, x: &Tensor, proj: &Tensor) -> f64 {
    let y = layer.forward(x).unwrap();
    y.data().iter().zip(proj.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
}

fn picks(n: usize, max: usize, seed: u64) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..max).map(|_| r.random_range(0..n)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Collects (analytic, numeric) pairs; `eval(delta)` returns the loss with
/// the entry shifted by `delta`.
pub struct Pairs {
    ana: Vec<f64>,
    num: Vec<f64>,
    skipped: usize,
    step: f32,
    /// Absolute slack for slope comparisons, from the gradient's own scale.
    slack: f64,
    /// Whether the loss may be quadratic between kinks rather than linear.
    curved: bool,
}

impl Pairs {
    /// For losses linear between kinks.
    pub fn linear(step: f32, grad_scale: f64) -> Self {
        Self { ana: Vec::new(), num: Vec::new(), skipped: 0, step, slack: KINK_ABS * grad_scale, curved: false }
    }

    /// For losses quadratic between kinks.
    pub fn quadratic(step: f32, grad_scale: f64) -> Self {
        Self { curved: true, ..Self::linear(step, grad_scale) }
    }

    pub fn push(&mut self, analytic: f64, mut eval: impl FnMut(f32) -> f64) {
        let est = self.estimate(&mut eval);
        match est {
            Some(num) => {
                self.ana.push(analytic);
                self.num.push(num);
            }
            None => self.skipped += 1,
        }
    }

    fn estimate(&self, eval: &mut impl FnMut(f32) -> f64) -> Option<f64> {
        let agree = |a: f64, b: f64| (a - b).abs() <= KINK_REL * a.abs().max(b.abs()) + self.slack;
        let l0 = eval(0.0);
        let mut h = self.step as f64;
        for _ in 0..REFINE {
            let mut slope = |k: f64| (eval((k * h) as f32) - l0) / (k * h);
            let (r1, r2) = (slope(1.0), slope(0.5));
            let (l1, l2) = (slope(-1.0), slope(-0.5));
            let smooth = if self.curved {
                // Richardson from each side; both are exact on one quadratic piece.
                agree(2.0 * r2 - r1, 2.0 * l2 - l1)
            } else {
                agree(r1, r2) && agree(l1, l2) && agree(r2, l2)
            };
            if smooth {
                return Some(0.5 * (r1 + l1));
            }
            h *= 0.1;
        }
        None
    }

    pub fn finish(&self, what: &str) -> f64 {
        let total = self.ana.len() + self.skipped;
        let budget = if total <= 4 { total - 1 } else { (total / 4).max(1) };
        assert!(
            !self.ana.is_empty() && self.skipped <= budget,
            "{what}: {} of {total} entries straddle a kink",
            self.skipped
        );
        rel_err(&self.ana, &self.num)
    }
}

/// Re-centres a bias so that each channel of `pre` (computed with the current
/// bias, NCHW) sits at least `MARGIN` channel deviations from zero, on
/// alternating sides. A following ReLU then has a frozen mask near the point.
pub fn set_margin(bias: &mut Param, pre: &Tensor) {
    const MARGIN: f64 = 6.0;
    let (n, c) = (pre.shape()[0], pre.shape()[1]);
    let plane = pre.len() / (n * c);
    for ch in 0..c {
        let vals: Vec<f64> = (0..n)
            .flat_map(|b| pre.data()[(b * c + ch) * plane..(b * c + ch + 1) * plane].iter().map(|v| *v as f64))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min) - mean;
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max) - mean;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt().max(1e-3);
        let shift = if ch % 2 == 0 { MARGIN * sd - lo } else { -MARGIN * sd - hi };
        bias.value.data_mut()[ch] += (shift - mean) as f32;
    }
}

/// Root-mean-square magnitude.
pub fn rms(g: &[f32]) -> f64 {
    (g.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / g.len().max(1) as f64).sqrt()
}

/// Worst relative error (norm over sampled entries) between analytic and
/// numeric gradients of `sum(proj * layer(x))`, over the input and every
/// parameter tensor.
pub fn check(layer: &mut dyn Layer, x: &Tensor, seed: u64, per_tensor: usize) -> f64 {
    check_with_step(layer, x, seed, per_tensor, STEP)
}

pub fn check_with_step(layer: &mut dyn Layer, x: &Tensor, seed: u64, per_tensor: usize, step: f32) -> f64 {
    let y = layer.forward(x).unwrap();
    let proj = random_tensor(y.shape(), seed ^ 0xA5A5);
    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward_train(x).unwrap();
    let dx = layer.backward(&proj).unwrap();

    let mut pairs = Pairs::linear(step, rms(dx.data()));
    for i in picks(x.len(), per_tensor, seed) {
        pairs.push(dx.data()[i] as f64, |d| {
            let mut xp = x.clone();
            xp.data_mut()[i] += d;
            projected(layer, &xp, &proj)
        });
    }
    let mut worst = pairs.finish("input");

    let grads: Vec<Tensor> = layer.params().iter().map(|p| p.grad.clone()).collect();
    for (t, g) in grads.iter().enumerate() {
        let mut pairs = Pairs::linear(step, rms(g.data()));
        for i in picks(g.len(), per_tensor, seed + 1 + t as u64) {
            pairs.push(g.data()[i] as f64, |d| {
                let orig = layer.params_mut()[t].value.data()[i];
                layer.params_mut()[t].value.data_mut()[i] = orig + d;
                let l = projected(layer, x, &proj);
                layer.params_mut()[t].value.data_mut()[i] = orig;
                l
            });
        }
        worst = worst.max(pairs.finish(&format!("param {t}")));
    }
    worst
}

/// Rebuilds the tiny model's encoder and decoder with biases chosen so that
/// every ReLU mask is frozen around `x` and the resulting latents.
pub fn clear_vqvae_kinks(m: &mut VqVae, x: &Tensor) {
    let [c1, c2, c3] = m.config.channels;
    let (cin, d) = (m.config.input_shape[0], m.config.embedding_dim);
    let (down, one) = (ConvGeom::new(4, 2, 1), ConvGeom::new(1, 1, 0));
    let mut r = rng(77);

    let mut enc = Sequential::new();
    let mut h = x.clone();
    for (i, o) in [(cin, c1), (c1, c2)] {
        let mut c = Conv2d::new(i, o, down, &mut r).unwrap();
        let pre = c.forward(&h).unwrap();
        set_margin(&mut c.bias, &pre);
        h = Relu::new().forward(&c.forward(&h).unwrap()).unwrap();
        enc.push(c);
        enc.push(Relu::new());
    }
    let c = Conv2d::new(c2, c3, down, &mut r).unwrap();
    h = c.forward(&h).unwrap();
    enc.push(c);
    let mut b = ResidualBlock::new(c3, &mut r).unwrap();
    let pre = b.conv1.forward(&h).unwrap();
    set_margin(&mut b.conv1.bias, &pre);
    h = b.forward(&h).unwrap();
    enc.push(b);
    let c = Conv2d::new(c3, d, one, &mut r).unwrap();
    h = c.forward(&h).unwrap();
    enc.push(c);

    let mut dec = Sequential::new();
    let c = Conv2d::new(d, c3, one, &mut r).unwrap();
    h = c.forward(&h).unwrap();
    dec.push(c);
    let mut b = ResidualBlock::new(c3, &mut r).unwrap();
    let pre = b.conv1.forward(&h).unwrap();
    set_margin(&mut b.conv1.bias, &pre);
    let pre = b.forward(&h).unwrap();
    set_margin(&mut b.conv2.bias, &pre);
    h = Relu::new().forward(&b.forward(&h).unwrap()).unwrap();
    dec.push(b);
    dec.push(Relu::new());
    for (i, o) in [(c3, c2), (c2, c1)] {
        let mut c = ConvTranspose2d::new(i, o, down, &mut r).unwrap();
        let pre = c.forward(&h).unwrap();
        set_margin(&mut c.bias, &pre);
        h = Relu::new().forward(&c.forward(&h).unwrap()).unwrap();
        dec.push(c);
        dec.push(Relu::new());
    }
    dec.push(ConvTranspose2d::new(c1, cin, down, &mut r).unwrap());
    m.encoder = enc;
    m.decoder = dec;
}
