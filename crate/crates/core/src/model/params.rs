use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};

/// Dimensions of a parameter set.
///
/// Parameters are stored in one flat vector: all `theta_i` (`na` each), then
/// every `V_{e,k}` (`na x na`, row-major, causal edge major, basis minor), then
/// every `U_e` (`na x na`, row-major) in canonical lateral edge order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamShape {
    pub n_units: usize,
    pub na: usize,
    pub n_causal: usize,
    pub k: usize,
    pub n_lateral: usize,
}

/// Named region of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Theta,
    Causal,
    Lateral,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Theta => "theta",
            Block::Causal => "V",
            Block::Lateral => "U",
        }
    }
}

impl ParamShape {
    pub fn len(&self) -> usize {
        self.v_offset() + self.n_causal * self.k * self.na * self.na + self.n_lateral * self.na * self.na
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn v_offset(&self) -> usize {
        self.n_units * self.na
    }

    fn u_offset(&self) -> usize {
        self.v_offset() + self.n_causal * self.k * self.na * self.na
    }

    pub fn theta_range(&self, i: usize) -> Range<usize> {
        let s = i * self.na;
        s..s + self.na
    }

    pub fn v_range(&self, edge: usize, k: usize) -> Range<usize> {
        let m = self.na * self.na;
        let s = self.v_offset() + (edge * self.k + k) * m;
        s..s + m
    }

    pub fn v_edge_range(&self, edge: usize) -> Range<usize> {
        let m = self.k * self.na * self.na;
        let s = self.v_offset() + edge * m;
        s..s + m
    }

    pub fn u_range(&self, edge: usize) -> Range<usize> {
        let m = self.na * self.na;
        let s = self.u_offset() + edge * m;
        s..s + m
    }

    pub fn block_range(&self, block: Block) -> Range<usize> {
        match block {
            Block::Theta => 0..self.v_offset(),
            Block::Causal => self.v_offset()..self.u_offset(),
            Block::Lateral => self.u_offset()..self.len(),
        }
    }

    pub fn block_of(&self, index: usize) -> Block {
        if index < self.v_offset() {
            Block::Theta
        } else if index < self.u_offset() {
            Block::Causal
        } else {
            Block::Lateral
        }
    }
}

macro_rules! param_blocks {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(shape: ParamShape) -> Self {
                Self {
                    shape,
                    data: vec![0.0; shape.len()],
                }
            }

            pub fn from_flat(shape: ParamShape, data: Vec<f64>) -> Result<Self> {
                if data.len() != shape.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "expected {} parameters, got {}",
                        shape.len(),
                        data.len()
                    )));
                }
                Ok(Self { shape, data })
            }

            pub fn shape(&self) -> &ParamShape {
                &self.shape
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }

            pub fn theta(&self, i: usize) -> &[f64] {
                &self.data[self.shape.theta_range(i)]
            }

            pub fn theta_mut(&mut self, i: usize) -> &mut [f64] {
                let r = self.shape.theta_range(i);
                &mut self.data[r]
            }

            /// `V_{e,k}` as a row-major `na x na` matrix; entry `(a', a)` couples
            /// parent statistic `a'` to child statistic `a`.
            pub fn v(&self, edge: usize, k: usize) -> &[f64] {
                &self.data[self.shape.v_range(edge, k)]
            }

            /// Every `V_{e,k}` of one edge, `k` major.
            pub fn v_edge(&self, edge: usize) -> &[f64] {
                let r = self.shape.v_edge_range(edge);
                &self.data[r]
            }

            pub fn v_edge_mut(&mut self, edge: usize) -> &mut [f64] {
                let r = self.shape.v_edge_range(edge);
                &mut self.data[r]
            }

            pub fn v_mut(&mut self, edge: usize, k: usize) -> &mut [f64] {
                let r = self.shape.v_range(edge, k);
                &mut self.data[r]
            }

            /// `U_e` for canonical edge `(a, b)`, `a < b`, entering the energy
            /// as `s_a^T U_e s_b`.
            pub fn u(&self, edge: usize) -> &[f64] {
                &self.data[self.shape.u_range(edge)]
            }

            pub fn u_mut(&mut self, edge: usize) -> &mut [f64] {
                let r = self.shape.u_range(edge);
                &mut self.data[r]
            }

            pub fn block(&self, block: Block) -> &[f64] {
                &self.data[self.shape.block_range(block)]
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }
        }
    };
}

/// Model parameters `{theta, V, U}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shape: ParamShape,
    data: Vec<f64>,
}

/// Gradient with respect to [`ModelParams`], in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    shape: ParamShape,
    data: Vec<f64>,
}

param_blocks!(ModelParams);
param_blocks!(GradientBundle);

impl ModelParams {
    /// `theta` and `V` uniform in `[-init_range, init_range]`, `U` uniform in
    /// `[-lateral_range, lateral_range]`.
    pub fn random<R: Rng + ?Sized>(
        shape: ParamShape,
        init_range: f64,
        lateral_range: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(shape);
        let lateral = shape.block_range(Block::Lateral);
        for (idx, w) in p.data.iter_mut().enumerate() {
            let r = if lateral.contains(&idx) {
                lateral_range
            } else {
                init_range
            };
            *w = if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        }
        p
    }

    /// `self += scale * g`.
    pub fn add_scaled(&mut self, g: &GradientBundle, scale: f64) {
        debug_assert_eq!(self.shape, g.shape);
        for (w, d) in self.data.iter_mut().zip(&g.data) {
            *w += scale * d;
        }
    }
}

/// Transpose a row-major `n x n` matrix.
pub fn transpose(m: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            t[c * n + r] = m[r * n + c];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> ParamShape {
        ParamShape {
            n_units: 3,
            na: 2,
            n_causal: 2,
            k: 3,
            n_lateral: 1,
        }
    }

    #[test]
    fn ranges_tile_the_vector() {
        let s = shape();
        let mut seen = vec![0; s.len()];
        for i in 0..s.n_units {
            s.theta_range(i).for_each(|x| seen[x] += 1);
        }
        for e in 0..s.n_causal {
            for k in 0..s.k {
                s.v_range(e, k).for_each(|x| seen[x] += 1);
            }
        }
        for e in 0..s.n_lateral {
            s.u_range(e).for_each(|x| seen[x] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(s.len(), 6 + 24 + 4);
        assert_eq!(s.block_of(5), Block::Theta);
        assert_eq!(s.block_of(6), Block::Causal);
        assert_eq!(s.block_of(30), Block::Lateral);
    }

    #[test]
    fn random_init_respects_ranges() {
        let mut rng = crate::rng::stream(1, "t", 0);
        let p = ModelParams::random(shape(), 1.0, 2.0, &mut rng);
        assert!(p.block(Block::Theta).iter().all(|v| v.abs() <= 1.0));
        assert!(p.block(Block::Causal).iter().all(|v| v.abs() <= 1.0));
        assert!(p.block(Block::Lateral).iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn transpose_round_trip() {
        let m = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(transpose(&m, 2), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(transpose(&transpose(&m, 2), 2), m);
    }
}
