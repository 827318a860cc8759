//! A chain state: a d-dimensional point viewed as n tokens of dimension d/n.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    data: Vec<f64>,
    n_tokens: usize,
}

impl State {
    /// n must divide the length and every entry must be finite.
    pub fn new(data: Vec<f64>, n_tokens: usize) -> Result<State> {
        if n_tokens == 0 {
            return Err(Error::Shape("token count must be >= 1".into()));
        }
        if data.is_empty() || data.len() % n_tokens != 0 {
            return Err(Error::Shape(format!(
                "dimension {} not divisible into {} tokens",
                data.len(),
                n_tokens
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry at index {i}")));
        }
        Ok(State { data, n_tokens })
    }

    pub fn zeros(dim: usize, n_tokens: usize) -> State {
        State::new(vec![0.0; dim], n_tokens).expect("zeros is always valid")
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn token_dim(&self) -> usize {
        self.data.len() / self.n_tokens
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn token(&self, i: usize) -> &[f64] {
        let td = self.token_dim();
        &self.data[i * td..(i + 1) * td]
    }

    pub fn token_mut(&mut self, i: usize) -> &mut [f64] {
        let td = self.token_dim();
        &mut self.data[i * td..(i + 1) * td]
    }

    /// Flat view round-trips with `new` at the same token count.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &State) -> bool {
        self.data.len() == other.data.len() && self.n_tokens == other.n_tokens
    }
}
