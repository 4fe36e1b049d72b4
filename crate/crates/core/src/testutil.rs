//! Helpers shared by unit tests.

use crate::hilbert::{ladder, tensor, ComplexMatrix, C64};
use crate::kernel::CouplingKernel;
use crate::lattice::{LatticeConfig, SystemSpec};
use crate::rng::{complex_normal, stream_rng};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_matrix(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = stream_rng(seed, 0);
    let data = (0..d * d).map(|_| complex_normal(&mut rng)).collect();
    ComplexMatrix::from_vec(d, d, data).unwrap()
}

pub fn random_hermitian(d: usize, seed: u64) -> ComplexMatrix {
    let a = random_matrix(d, seed);
    (&a + &a.adjoint()).scale_real(0.5)
}

pub fn embed(op: &ComplexMatrix, factor: usize, dims: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for (f, &d) in dims.iter().enumerate() {
        let piece = if f == factor {
            op.clone()
        } else {
            ComplexMatrix::identity(d)
        };
        out = tensor(&out, &piece).unwrap();
    }
    out
}

/// Kronecker-product construction of the generator.
pub fn generator_oracle(sys: &SystemSpec, kernel: &CouplingKernel, cfg: &LatticeConfig) -> ComplexMatrix {
    let mut dims = vec![sys.dim()];
    dims.extend(std::iter::repeat_n(cfg.bin_dim(), cfg.memory_bins()));
    let h = embed(sys.hamiltonian(), 0, &dims);
    let s = embed(sys.coupling(), 0, &dims);
    let mut g = h.scale(c(0.0, -cfg.dt()));
    for (k, th) in kernel.step_amplitudes().into_iter().enumerate() {
        let b = embed(&ladder(cfg.n_max()), k + 1, &dims);
        let raise = s.matmul(&b.adjoint()).scale(th);
        let lower = s.adjoint().matmul(&b).scale(th.conj());
        g = &(&g + &raise) - &lower;
    }
    g
}
