//! Pauli-string bases on qubit registers.
//!
//! A string on `n` qubits is indexed base-4 with the first qubit most significant,
//! digit 0=I, 1=X, 2=Y, 3=Z. Qubit `k` is bit `n-1-k` of a computational index.

use num_complex::Complex64 as C64;

use super::matrix::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    pub n: usize,
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub fn from_index(index: usize, n: usize) -> Self {
        let (mut x, mut z) = (0u64, 0u64);
        for k in 0..n {
            let digit = (index >> (2 * (n - 1 - k))) & 3;
            let bit = 1u64 << (n - 1 - k);
            match digit {
                1 => x |= bit,
                2 => {
                    x |= bit;
                    z |= bit
                }
                3 => z |= bit,
                _ => {}
            }
        }
        Self { n, x, z }
    }

    pub fn index(&self) -> usize {
        (0..self.n).fold(0, |acc, k| acc * 4 + self.digit(k))
    }

    /// Base-4 digit of qubit `k`.
    pub fn digit(&self, k: usize) -> usize {
        let bit = 1u64 << (self.n - 1 - k);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    /// Qubits carrying a non-identity factor, as a bitmask (qubit k at bit n-1-k).
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    /// Non-zero entry in column `c`: returns (row, value) with σ|c⟩ = value·|row⟩.
    #[inline]
    pub fn column_entry(&self, c: usize) -> (usize, C64) {
        let row = c ^ self.x as usize;
        (row, self.phase(c))
    }

    #[inline]
    fn phase(&self, c: usize) -> C64 {
        let ny = (self.x & self.z).count_ones() % 4;
        let sign = if ((c as u64) & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        match ny {
            0 => C64::new(sign, 0.0),
            1 => C64::new(0.0, sign),
            2 => C64::new(-sign, 0.0),
            _ => C64::new(0.0, -sign),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        let d = 1usize << self.n;
        let mut m = CMatrix::zeros(d, d);
        for c in 0..d {
            let (r, v) = self.column_entry(c);
            m[(r, c)] = v;
        }
        m
    }

    /// Tr(σ · M) in O(d).
    pub fn trace_with(&self, m: &CMatrix) -> C64 {
        let d = 1usize << self.n;
        let x = self.x as usize;
        (0..d).map(|k| self.phase(k) * m[(k, k ^ x)]).sum()
    }
}

fn spread_bits(mut v: usize) -> usize {
    let mut out = 0;
    let mut k = 0;
    while v != 0 {
        out |= (v & 1) << (2 * k);
        v >>= 1;
        k += 1;
    }
    out
}

/// Applies a 4×4 map to every base-4 digit of a length-4^n array.
fn apply_digit_map(data: &mut [C64], n: usize, map: &[[C64; 4]; 4]) {
    for k in 0..n {
        let stride = 1usize << (2 * (n - 1 - k));
        let block = stride * 4;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let idx = |u: usize| base + u * stride + off;
                let v = [data[idx(0)], data[idx(1)], data[idx(2)], data[idx(3)]];
                for p in 0..4 {
                    data[idx(p)] = (0..4).map(|u| map[p][u] * v[u]).sum();
                }
            }
        }
    }
}

/// Coordinates c_p with M = Σ_p c_p σ_p (complex in general, real for Hermitian M).
pub fn pauli_coords_complex(m: &CMatrix) -> Vec<C64> {
    let d = m.rows();
    assert!(d.is_power_of_two() && m.is_square(), "qubit register required");
    let n = d.trailing_zeros() as usize;
    let mut t = vec![C64::new(0.0, 0.0); d * d];
    let spread: Vec<usize> = (0..d).map(spread_bits).collect();
    for r in 0..d {
        for c in 0..d {
            t[2 * spread[r] + spread[c]] = m[(r, c)];
        }
    }
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    let z = C64::new(0.0, 0.0);
    // u = 2r + c : 00, 01, 10, 11
    let map = [[h, z, z, h], [z, h, h, z], [z, ih, -ih, z], [h, z, z, -h]];
    apply_digit_map(&mut t, n, &map);
    t
}

pub fn pauli_coords(m: &CMatrix) -> Vec<f64> {
    pauli_coords_complex(m).into_iter().map(|z| z.re).collect()
}

pub fn from_pauli_coords(coords: &[f64], n: usize) -> CMatrix {
    let d = 1usize << n;
    assert_eq!(coords.len(), d * d);
    let mut t: Vec<C64> = coords.iter().map(|&v| C64::new(v, 0.0)).collect();
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let z = C64::new(0.0, 0.0);
    // rows: u = 2r + c ; columns: p = I, X, Y, Z
    let map = [[one, z, z, one], [z, one, -i, z], [z, one, i, z], [one, z, z, -one]];
    apply_digit_map(&mut t, n, &map);
    let spread: Vec<usize> = (0..d).map(spread_bits).collect();
    CMatrix::from_fn(d, d, |r, c| t[2 * spread[r] + spread[c]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::gates;

    #[test]
    fn single_qubit_matrices() {
        let want = [gates::id2(), gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
        for (p, w) in want.iter().enumerate() {
            assert_eq!(&PauliString::from_index(p, 1).matrix(), w);
        }
    }

    #[test]
    fn index_round_trip_and_kron_order() {
        for idx in 0..64 {
            let p = PauliString::from_index(idx, 3);
            assert_eq!(p.index(), idx);
        }
        let xz = PauliString::from_index(4 + 3, 2); // X ⊗ Z
        assert_eq!(xz.matrix(), gates::pauli_x().kron(&gates::pauli_z()));
        let yx = PauliString::from_index(2 * 4 + 1, 2);
        assert_eq!(yx.matrix(), gates::pauli_y().kron(&gates::pauli_x()));
    }

    #[test]
    fn coords_round_trip() {
        let m = CMatrix::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let h = m.hermitian_part();
        let c = pauli_coords(&h);
        for idx in [0, 5, 17, 63] {
            let p = PauliString::from_index(idx, 3);
            let direct = p.trace_with(&h) / 8.0;
            assert!((direct.re - c[idx]).abs() < 1e-12);
            assert!((direct - p.matrix().trace_product(&h) / 8.0).norm() < 1e-12);
        }
        assert!(from_pauli_coords(&c, 3).max_abs_diff(&h) < 1e-12);
    }
}
