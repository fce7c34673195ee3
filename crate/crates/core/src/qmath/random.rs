//! Seeded random states, unitaries and density matrices.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::CMatrix;

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-random unitary via Gram-Schmidt on a Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    isometry(rng, n, n)
}

/// Random isometry with orthonormal columns (`rows ≥ cols`).
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols);
    let g = ginibre(rng, rows, cols);
    let mut q = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut v: Vec<C64> = (0..rows).map(|i| g[(i, j)]).collect();
        for _ in 0..2 {
            for k in 0..j {
                let proj: C64 = (0..rows).map(|i| q[(i, k)].conj() * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= proj * q[(i, k)];
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (i, vi) in v.iter().enumerate() {
            q[(i, j)] = vi / n;
        }
    }
    q
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let g = ginibre(rng, dim, 1);
    let n = g.frobenius_norm();
    g.as_slice().iter().map(|z| z / n).collect()
}

/// Random density matrix of the given rank (Ginibre ensemble).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> CMatrix {
    let g = ginibre(rng, dim, rank.max(1));
    let m = &g * &g.adjoint();
    let t = m.trace().re;
    m.scale_real(1.0 / t).hermitian_part()
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    ginibre(rng, dim, dim).hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 4, 8] {
            assert!(haar_unitary(&mut rng, n).is_unitary(1e-12));
        }
    }

    #[test]
    fn density_is_unit_trace_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, 4, 2);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.is_hermitian(1e-14));
    }
}
