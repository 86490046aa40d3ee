use serde::Serialize;

use crate::jets::{Jet, JetError, JetSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

/// Dense component array over `dim^rank` entries, row-major in the index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

impl<T> Tensor<T> {
    pub fn try_from_fn<E>(
        dim: usize,
        variance: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> Result<T, E>,
    ) -> Result<Self, E> {
        let rank = variance.len();
        let len = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for k in 0..len {
            unflatten(k, dim, &mut idx);
            data.push(f(&idx)?);
        }
        Ok(Self {
            dim,
            variance,
            data,
        })
    }

    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        Self::try_from_fn::<std::convert::Infallible>(dim, variance, |i| Ok(f(i)))
            .unwrap_or_else(|e| match e {})
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.flat(idx)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub(crate) fn unflatten(mut k: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = k % dim;
        k /= dim;
    }
}

pub type JetTensor = Tensor<Jet>;

impl Tensor<Jet> {
    pub fn spec(&self) -> JetSpec {
        self.data[0].spec()
    }

    pub fn values(&self) -> Tensor<f64> {
        self.map(Jet::value)
    }

    /// Appends a trailing down index `m` holding `d/dy^m`.
    pub fn grad_y(&self) -> Result<Self, JetError> {
        self.grad(|j, m| j.dy(m))
    }

    /// Appends a trailing down index `m` holding `d/dx^m`.
    pub fn grad_x(&self) -> Result<Self, JetError> {
        self.grad(|j, m| j.dx(m))
    }

    fn grad(&self, d: impl Fn(&Jet, usize) -> Result<Jet, JetError>) -> Result<Self, JetError> {
        let mut variance = self.variance.clone();
        variance.push(Variance::Down);
        let rank = self.rank();
        Tensor::try_from_fn(self.dim, variance, |idx| {
            d(self.get(&idx[..rank]), idx[rank])
        })
    }
}

/// Component values of a named tensor at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct TensorValue {
    pub name: &'static str,
    pub variance: Vec<Variance>,
    /// Positive homogeneity degree in `y`.
    pub y_degree: i32,
    pub point: Point,
    pub dim: usize,
    pub components: Vec<f64>,
}

impl TensorValue {
    pub fn new(name: &'static str, y_degree: i32, point: Point, t: Tensor<f64>) -> Self {
        Self {
            name,
            variance: t.variance.clone(),
            y_degree,
            point,
            dim: t.dim,
            components: t.data,
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[idx.iter().fold(0, |acc, &i| acc * self.dim + i)]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_tensor(&self) -> Tensor<f64> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.components.clone(),
        }
    }

    /// Contracts the up index in `up_slot` with the down index in `down_slot`.
    ///
    /// Panics when the variances do not pair an up with a down index.
    pub fn contract(&self, up_slot: usize, down_slot: usize) -> Tensor<f64> {
        assert_eq!(self.variance[up_slot], Variance::Up, "first slot must be up");
        assert_eq!(self.variance[down_slot], Variance::Down, "second slot must be down");
        let rest: Vec<Variance> = self
            .variance
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != up_slot && *s != down_slot)
            .map(|(_, v)| *v)
            .collect();
        let full = self.as_tensor();
        Tensor::from_fn(self.dim, rest, |idx| {
            let mut buf = Vec::with_capacity(full.rank());
            (0..self.dim)
                .map(|m| {
                    buf.clear();
                    let mut it = idx.iter();
                    for s in 0..full.rank() {
                        if s == up_slot || s == down_slot {
                            buf.push(m);
                        } else {
                            buf.push(*it.next().unwrap());
                        }
                    }
                    *full.get(&buf)
                })
                .sum()
        })
    }
}
