//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005 degree selection). Used on the full collision generator, whose
//! dimension stays at desk scale.

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn lincomb(terms: &[(f64, &ComplexMatrix)]) -> ComplexMatrix {
    let (first_c, first) = terms[0];
    let mut out = first.scale_real(first_c);
    for &(c, m) in &terms[1..] {
        for (o, &x) in out.data_mut().iter_mut().zip(m.data()) {
            *o += x * c;
        }
    }
    out
}

/// Odd/even parts (U, V) of a low-degree Padé approximant from the even powers.
fn pade_low(a: &ComplexMatrix, b: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.rows();
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(a);
    let mut powers = vec![id, a2.clone()];
    let degree = b.len() - 1;
    while powers.len() <= degree / 2 {
        let next = powers.last().unwrap().matmul(&a2);
        powers.push(next);
    }
    let odd: Vec<(f64, &ComplexMatrix)> = (0..=degree / 2).map(|k| (b[2 * k + 1], &powers[k])).collect();
    let even: Vec<(f64, &ComplexMatrix)> = (0..=degree / 2).map(|k| (b[2 * k], &powers[k])).collect();
    let u = a.matmul(&lincomb(&odd));
    let v = lincomb(&even);
    (u, v)
}

fn pade13(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.rows();
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let inner_u = lincomb(&[(B13[13], &a6), (B13[11], &a4), (B13[9], &a2)]);
    let u = a.matmul(&(&a6.matmul(&inner_u) + &lincomb(&[(B13[7], &a6), (B13[5], &a4), (B13[3], &a2), (B13[1], &id)])));
    let inner_v = lincomb(&[(B13[12], &a6), (B13[10], &a4), (B13[8], &a2)]);
    let v = &a6.matmul(&inner_v) + &lincomb(&[(B13[6], &a6), (B13[4], &a4), (B13[2], &a2), (B13[0], &id)]);
    (u, v)
}

/// `exp(G)` for a square matrix.
pub fn expm(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !g.is_square() {
        return Err(Error::Shape {
            context: "expm",
            expected: "square matrix".into(),
            found: format!("{}x{}", g.rows(), g.cols()),
        });
    }
    if !g.is_finite() {
        return Err(Error::NonFinite {
            module: "hilbert",
            context: "expm generator",
        });
    }
    let norm = g.one_norm();
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(g, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(g, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(g, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(g, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = g.scale_real(2f64.powi(-s));
        let (u, v) = pade13(&scaled);
        (u, v, s as u32)
    };
    // (V - U) X = (V + U)
    let mut result = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(Error::NonFinite {
            module: "hilbert",
            context: "expm result",
        });
    }
    Ok(result)
}

/// `exp(G) v`.
pub fn expm_apply(g: &ComplexMatrix, v: &[C64]) -> Result<Vec<C64>> {
    if g.cols() != v.len() {
        return Err(Error::Shape {
            context: "expm_apply",
            expected: format!("vector of length {}", g.cols()),
            found: format!("length {}", v.len()),
        });
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            module: "hilbert",
            context: "expm_apply vector",
        });
    }
    Ok(expm(g)?.mat_vec(v))
}
