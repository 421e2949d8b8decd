//! Fully connected ReLU networks with a flat parameter vector, plus the
//! Laplace machinery built on their output Jacobians.
//!
//! Parameters are laid out layer by layer, each layer's weight matrix in
//! row-major order (`out × in`) followed by its bias.

pub mod laplace;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use laplace::{
    fit_laplace_regression, lla_predict, lla_sample_with_noise, lla_thompson_sample, train_regression,
    LaplacePosterior, RegressionOptions, TrainedNetwork, EVIDENCE_GRID,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpArchitecture {
    /// Two hidden ReLU layers of 50 units and a scalar output.
    pub fn standard(input_dim: usize) -> Self {
        Self::new(input_dim, vec![50, 50])
    }

    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim: 1,
        }
    }

    /// Layer sizes from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.input_dim);
        s.extend_from_slice(&self.hidden);
        s.push(self.output_dim);
        s
    }

    pub fn n_params(&self) -> usize {
        self.sizes().windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// `(fan_in, fan_out, offset)` of every layer in the flat vector.
    fn layers(&self) -> Vec<(usize, usize, usize)> {
        let mut off = 0;
        self.sizes()
            .windows(2)
            .map(|w| {
                let l = (w[0], w[1], off);
                off += w[1] * (w[0] + 1);
                l
            })
            .collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim != 1 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Dimension(format!(
                "unsupported architecture {:?} (scalar output and non-empty layers required)",
                self.sizes()
            )));
        }
        Ok(())
    }

    /// Uniform `±1/√fan_in` for weights and biases.
    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let mut theta = DVector::zeros(self.n_params());
        for (fan_in, fan_out, off) in self.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for k in 0..fan_out * (fan_in + 1) {
                theta[off + k] = T::lit(rng.random_range(-bound..bound));
            }
        }
        theta
    }
}

/// A network with its parameters, evaluated on row-major batches.
#[derive(Debug, Clone, Copy)]
pub struct Mlp<'a, T: Scalar> {
    pub arch: &'a MlpArchitecture,
    pub theta: &'a DVector<T>,
}

struct Tape<T: Scalar> {
    /// Layer inputs, `acts[0]` being the batch itself.
    acts: Vec<DMatrix<T>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<T>>,
    out: DVector<T>,
}

impl<'a, T: Scalar> Mlp<'a, T> {
    pub fn new(arch: &'a MlpArchitecture, theta: &'a DVector<T>) -> Result<Self> {
        arch.check()?;
        if theta.len() != arch.n_params() {
            return Err(Error::Dimension(format!(
                "{} parameters for an architecture with {}",
                theta.len(),
                arch.n_params()
            )));
        }
        Ok(Self { arch, theta })
    }

    fn weights(&self, fan_in: usize, fan_out: usize, off: usize) -> (DMatrix<T>, DVector<T>) {
        let w = DMatrix::from_row_slice(fan_out, fan_in, &self.theta.as_slice()[off..off + fan_in * fan_out]);
        let b = self.theta.rows(off + fan_in * fan_out, fan_out).into_owned();
        (w, b)
    }

    fn check_batch(&self, x: &DMatrix<T>) -> Result<()> {
        if x.ncols() != self.arch.input_dim {
            return Err(Error::Dimension(format!(
                "inputs have {} columns, network expects {}",
                x.ncols(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    fn tape(&self, x: &DMatrix<T>) -> Tape<T> {
        let layers = self.arch.layers();
        let last = layers.len() - 1;
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(last);
        let mut out = DVector::zeros(x.nrows());
        for (l, &(fi, fo, off)) in layers.iter().enumerate() {
            let (w, b) = self.weights(fi, fo, off);
            let mut z = &acts[l] * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            if l == last {
                out = z.column(0).into_owned();
            } else {
                acts.push(z.map(relu));
                pre.push(z);
            }
        }
        Tape { acts, pre, out }
    }

    /// Scalar outputs for every row of `x`.
    pub fn forward(&self, x: &DMatrix<T>) -> Result<DVector<T>> {
        self.check_batch(x)?;
        Ok(self.tape(x).out)
    }

    pub fn forward_one(&self, x: &[T]) -> Result<T> {
        let m = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.forward(&m)?[0])
    }

    /// Backpropagated output sensitivities `∂f(x_i)/∂z_l` per layer, for a
    /// unit cotangent on every row.
    fn deltas(&self, tape: &Tape<T>) -> Vec<DMatrix<T>> {
        let layers = self.arch.layers();
        let n = tape.out.len();
        let mut deltas = vec![DMatrix::zeros(0, 0); layers.len()];
        let mut delta = DMatrix::from_element(n, 1, T::one());
        for l in (0..layers.len()).rev() {
            if l > 0 {
                let (fi, fo, off) = layers[l];
                let (w, _) = self.weights(fi, fo, off);
                let mut next = &delta * &w;
                next.zip_apply(&tape.pre[l - 1], |d, z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
                deltas[l] = std::mem::replace(&mut delta, next);
            } else {
                deltas[0] = delta.clone();
            }
        }
        deltas
    }

    /// Outputs and `Σ_i v_i ∂f(x_i)/∂θ`.
    pub fn vjp(&self, x: &DMatrix<T>, v: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_batch(x)?;
        let tape = self.tape(x);
        let layers = self.arch.layers();
        let mut grad = DVector::zeros(self.theta.len());
        let mut delta = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        for l in (0..layers.len()).rev() {
            let (fi, fo, off) = layers[l];
            // dW = deltaᵀ A, stored row-major, i.e. as the column-major (A ᵀ delta)
            let gw = tape.acts[l].transpose() * &delta;
            grad.as_mut_slice()[off..off + fi * fo].copy_from_slice(gw.as_slice());
            for o in 0..fo {
                grad[off + fi * fo + o] = delta.column(o).sum();
            }
            if l > 0 {
                let (w, _) = self.weights(fi, fo, off);
                let mut next = &delta * &w;
                next.zip_apply(&tape.pre[l - 1], |d, z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = next;
            }
        }
        Ok((tape.out, grad))
    }

    /// Directional derivative `J(x) t` of the outputs along `t`, together
    /// with the outputs.
    pub fn jvp(&self, x: &DMatrix<T>, t: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_batch(x)?;
        if t.len() != self.theta.len() {
            return Err(Error::Dimension("tangent length differs from parameter count".into()));
        }
        let tangent = Mlp {
            arch: self.arch,
            theta: t,
        };
        let layers = self.arch.layers();
        let last = layers.len() - 1;
        let mut a = x.clone();
        let mut da = DMatrix::<T>::zeros(x.nrows(), x.ncols());
        for (l, &(fi, fo, off)) in layers.iter().enumerate() {
            let (w, b) = self.weights(fi, fo, off);
            let (dw, db) = tangent.weights(fi, fo, off);
            let mut z = &a * w.transpose();
            let mut dz = &a * dw.transpose();
            if l > 0 {
                dz += &da * w.transpose();
            }
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            for mut row in dz.row_iter_mut() {
                row += db.transpose();
            }
            if l == last {
                return Ok((z.column(0).into_owned(), dz.column(0).into_owned()));
            }
            dz.zip_apply(&z, |d, zz| {
                if zz <= T::zero() {
                    *d = T::zero();
                }
            });
            a = z.map(relu);
            da = dz;
        }
        unreachable!("architecture has at least one layer")
    }

    /// Output Jacobian, one row per input.
    pub fn jacobian(&self, x: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
        self.check_batch(x)?;
        let tape = self.tape(x);
        let deltas = self.deltas(&tape);
        let n = x.nrows();
        let mut j = DMatrix::zeros(n, self.theta.len());
        for (l, &(fi, fo, off)) in self.arch.layers().iter().enumerate() {
            let a = &tape.acts[l];
            let d = &deltas[l];
            for o in 0..fo {
                for i in 0..n {
                    let doi = d[(i, o)];
                    j[(i, off + fi * fo + o)] = doi;
                    if doi == T::zero() {
                        continue;
                    }
                    for c in 0..fi {
                        j[(i, off + o * fi + c)] = doi * a[(i, c)];
                    }
                }
            }
        }
        Ok((tape.out, j))
    }
}

#[inline]
fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}
