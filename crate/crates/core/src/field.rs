//! Dense displacement fields. `u` points right (+x), `v` points down (+y).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("flow field", format!("empty extent {width}x{height}")));
        }
        let n = width * height;
        if u.len() != n || v.len() != n {
            return Err(Error::invalid(
                "flow field",
                format!("component lengths {}/{} for {width}x{height}", u.len(), v.len()),
            ));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("flow field", "non-finite displacement"));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![u; n], vec![v; n])
    }

    /// Builds a field from `f(x, y) -> (u, v)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Result<Self> {
        let n = width * height;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b))
    }

    pub fn negated(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|x| -x).collect(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }
}

/// Forward (t→t+1) and backward (t+1→t) fields for every consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence {
    forward: Vec<FlowField>,
    backward: Vec<FlowField>,
}

impl FlowSequence {
    pub fn new(forward: Vec<FlowField>, backward: Vec<FlowField>) -> Result<Self> {
        if forward.len() != backward.len() {
            return Err(Error::LengthMismatch {
                expected: forward.len(),
                got: backward.len(),
            });
        }
        if let Some(first) = forward.first() {
            let dims = first.dims();
            if let Some(f) = forward.iter().chain(&backward).find(|f| f.dims() != dims) {
                return Err(Error::ShapeMismatch {
                    expected: dims,
                    got: f.dims(),
                });
            }
        }
        Ok(Self { forward, backward })
    }

    pub fn forward(&self) -> &[FlowField] {
        &self.forward
    }

    pub fn backward(&self) -> &[FlowField] {
        &self.backward
    }

    /// Number of frame pairs (T − 1).
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.forward.first().map(FlowField::dims)
    }
}
