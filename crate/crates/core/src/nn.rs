//! Fully connected Q-network: ReLU hidden layers, linear output, exact
//! reverse-mode gradients and an Adam optimizer.
//!
//! # Checkpoint format
//!
//! Plain UTF-8 text, one record per line:
//!
//! ```text
//! UPCQ1
//! layers <L> <n0> <n1> ... <nL-1>
//! weight <l> <rows> <cols>      # then <rows> lines of <cols> values
//! bias <l> <len>                # then 1 line of <len> values
//! ...                           # weight/bias repeated for l = 0..L-2
//! ```
//!
//! Weight matrices are `fan_in x fan_out`, row-major. Values are written with
//! Rust's shortest round-trip float formatting, so reading a checkpoint back
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "UPCQ1";

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations of every layer from one forward call; index 0 is the input.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    activations: Vec<Array2<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least input and output")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("at least input and output")
    }
}

/// Same layout as the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&x| x == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&x| x == 0.0))
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least input and output layers, got {} sizes",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    Ok(())
}

impl Mlp {
    /// Gaussian weights with variance `2 / fan_in`, zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let values = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
            weights.push(Array2::from_shape_vec((fan_in, fan_out), values).expect("matching length"));
        }
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
            biases: sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Batched forward pass; `input` is `batch x input_dim`.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ForwardPass> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: input.ncols(),
            });
        }
        let last = self.n_layers() - 1;
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(input.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|x| x.max(0.0));
            }
            activations.push(z);
        }
        Ok(ForwardPass { activations })
    }

    /// Forward pass for a single input vector.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("contiguous slice");
        Ok(self.forward(view)?.into_output().into_raw_vec_and_offset().0)
    }

    /// Gradients of a scalar loss given `d loss / d output` for the batch in `pass`.
    pub fn backward(&self, pass: &ForwardPass, output_grad: ArrayView2<f64>) -> Result<Gradients> {
        if pass.activations.len() != self.n_layers() + 1 {
            return Err(Error::Shape {
                expected: self.n_layers() + 1,
                actual: pass.activations.len(),
            });
        }
        let out = pass.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::Shape {
                expected: out.len(),
                actual: output_grad.len(),
            });
        }
        let mut weights = Vec::with_capacity(self.n_layers());
        let mut biases = Vec::with_capacity(self.n_layers());
        let mut delta = output_grad.to_owned();
        for l in (0..self.n_layers()).rev() {
            let a_in = &pass.activations[l];
            weights.push(a_in.t().dot(&delta));
            biases.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                // ReLU derivative from the stored post-activation.
                back.zip_mut_with(a_in, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        weights.reverse();
        biases.reverse();
        Ok(Gradients { weights, biases })
    }

    fn check_same_shape(&self, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != self.n_layers() || grads.biases.len() != self.n_layers() {
            return Err(Error::Shape {
                expected: self.n_layers(),
                actual: grads.weights.len(),
            });
        }
        for (w, g) in self.weights.iter().zip(&grads.weights) {
            if w.dim() != g.dim() {
                return Err(Error::Shape {
                    expected: w.len(),
                    actual: g.len(),
                });
            }
        }
        for (b, g) in self.biases.iter().zip(&grads.biases) {
            if b.len() != g.len() {
                return Err(Error::Shape {
                    expected: b.len(),
                    actual: g.len(),
                });
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CHECKPOINT_MAGIC}").unwrap();
        write!(s, "layers {}", self.sizes.len()).unwrap();
        for n in &self.sizes {
            write!(s, " {n}").unwrap();
        }
        s.push('\n');
        let join = |s: &mut String, values: &mut dyn Iterator<Item = &f64>| {
            let mut first = true;
            for v in values {
                if !first {
                    s.push(' ');
                }
                write!(s, "{v:?}").unwrap();
                first = false;
            }
            s.push('\n');
        };
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            writeln!(s, "weight {l} {} {}", w.nrows(), w.ncols()).unwrap();
            for row in w.rows() {
                join(&mut s, &mut row.iter());
            }
            writeln!(s, "bias {l} {}", b.len()).unwrap();
            join(&mut s, &mut b.iter());
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))
        };
        let (_, magic) = next("magic header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(bad(format!("bad magic `{magic}`")));
        }
        let parse_usize = |tok: Option<&str>, lineno: usize| -> Result<usize> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("line {}: expected an integer", lineno + 1)))
        };
        let parse_row = |line: &str, len: usize, lineno: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
            if row.len() != len {
                return Err(bad(format!(
                    "line {}: expected {len} values, got {}",
                    lineno + 1,
                    row.len()
                )));
            }
            Ok(row)
        };

        let (ln, header) = next("layer sizes")?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("layers") {
            return Err(bad(format!("line {}: expected `layers`", ln + 1)));
        }
        let count = parse_usize(toks.next(), ln)?;
        let sizes = (0..count)
            .map(|_| parse_usize(toks.next(), ln))
            .collect::<Result<Vec<_>>>()?;
        check_sizes(&sizes).map_err(|e| bad(e.to_string()))?;

        let mut net = Mlp::zeros(&sizes)?;
        for l in 0..net.n_layers() {
            let (rows, cols) = (sizes[l], sizes[l + 1]);
            let (ln, head) = next("weight header")?;
            let expected = format!("weight {l} {rows} {cols}");
            if head.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
                return Err(bad(format!("line {}: expected `{expected}`", ln + 1)));
            }
            for r in 0..rows {
                let (ln, line) = next("weight row")?;
                let row = parse_row(line, cols, ln)?;
                net.weights[l].row_mut(r).assign(&Array1::from(row));
            }
            let (ln, head) = next("bias header")?;
            let expected = format!("bias {l} {cols}");
            if head.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
                return Err(bad(format!("line {}: expected `{expected}`", ln + 1)));
            }
            let (ln, line) = next("bias values")?;
            net.biases[l] = Array1::from(parse_row(line, cols, ln)?);
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(format!("line {}: trailing content `{extra}`", ln + 1)));
        }
        Ok(net)
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        net.check_same_shape(grads)?;
        net.check_same_shape(&self.m)?;
        self.t += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - b1.powf(self.t as f64);
        let c2 = 1.0 - b2.powf(self.t as f64);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.n_layers() {
            ndarray::Zip::from(&mut net.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut net.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
