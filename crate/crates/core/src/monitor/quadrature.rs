//! Product quadrature over the complex plane for the heterodyne measure.
//!
//! With `ξ = √u e^{iφ}`,
//! `∫ d²ξ (e^{−|ξ|²}/π) g(ξ) = (1/2π) ∫₀^∞ du e^{−u} ∫₀^{2π} dφ g`,
//! so Gauss–Laguerre nodes in `u` times uniform angles integrate every
//! `g = poly(ξ, ξ*)` of bidegree below `(K, L)` exactly.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Gauss–Laguerre nodes and weights for `∫₀^∞ e^{−u} f(u) du`
/// (Golub–Welsch).
pub fn gauss_laguerre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "need at least one node");
    let jacobi = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[derive(Clone, Debug)]
pub struct PlaneQuadrature {
    nodes: Vec<C64>,
    /// Weights for the Gaussian measure `e^{−|ξ|²}/π d²ξ`.
    weights: Vec<f64>,
}

impl PlaneQuadrature {
    pub fn new(radial: usize, angular: usize) -> Result<Self> {
        if radial == 0 || angular == 0 {
            return Err(Error::invalid(
                "monitor",
                "quadrature needs at least one radial and angular node",
            ));
        }
        let (u, w) = gauss_laguerre(radial);
        let mut nodes = Vec::with_capacity(radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        for (ui, wi) in u.iter().zip(&w) {
            for l in 0..angular {
                let phi = 2.0 * std::f64::consts::PI * l as f64 / angular as f64;
                nodes.push(C64::from_polar(ui.sqrt(), phi));
                weights.push(wi / angular as f64);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Exact for sesquilinear forms in Bargmann vectors with cutoff `n_max`,
    /// i.e. degree `≤ n_max` in each of `ξ` and `ξ*`.
    pub fn exact_for_cutoff(n_max: usize) -> Self {
        Self::new(n_max + 1, 2 * (n_max + 1)).expect("positive node counts")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Log of the weight for plain (Lebesgue) integration `∫ d²ξ f(ξ)`:
    /// `ln(π w_i) + |ξ_i|²`.
    pub fn log_lebesgue_weight(&self, i: usize) -> f64 {
        (std::f64::consts::PI * self.weights[i]).ln() + self.nodes[i].norm_sqr()
    }

    /// Gaussian-measure average of `g`.
    pub fn average<T, F>(&self, mut g: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(C64) -> T,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&z, &w)| acc + g(z) * w)
    }
}
