//! Geometric algebra kernel for Cl(K,0), K in {2, 3}.
//!
//! The algebra is generated by K orthonormal vectors with `e_i e_i = +1` and
//! `e_i e_j = -e_j e_i`; its 2^K basis blades are ordered graded-lexicographic
//! so every grade occupies a contiguous index range:
//!
//! ```text
//! K=2:  1, e1, e2, e12
//! K=3:  1, e1, e2, e3, e12, e13, e23, e123
//! ```
//!
//! [`Multivector`] is a dense coefficient vector over that basis;
//! [`MultivectorBatch`] stacks `d` independent channels sharing one algebra.
//! [`Rotor`] is a unit even-grade element acting through the sandwich product
//! `R a R~`, a norm-preserving rotation. Everything is plain `f64` with value
//! semantics; no operation mutates shared state.

use crate::error::{LionError, Result};

/// Unit-rotor tolerance enforced by the sandwich product.
pub const ROTOR_UNIT_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// BladeTable
// ---------------------------------------------------------------------------

/// Precomputed basis and multiplication table of Cl(K,0).
///
/// Each basis blade is a product of distinct generators, encoded as a bitmask
/// (bit i set = generator e_{i+1} present). The product of two basis blades is
/// `sign * blade(mask_a XOR mask_b)` where the sign counts the generator swaps
/// needed to reach canonical ascending order; squares contribute +1 under the
/// Euclidean signature.
#[derive(Debug, Clone, PartialEq)]
pub struct BladeTable {
    k: usize,
    dim: usize,
    masks: Vec<u32>,
    grades: Vec<usize>,
    index_of_mask: Vec<usize>,
    /// Row-major `dim x dim`: sign of blade_i * blade_j.
    sign: Vec<f64>,
    /// Row-major `dim x dim`: blade index of blade_i * blade_j.
    prod: Vec<usize>,
}

/// Sign of the canonical reordering when multiplying basis blades `a * b`.
fn reorder_sign(a: u32, b: u32) -> f64 {
    // Count, for each generator in a, how many lower-indexed generators of b
    // it must hop over; odd total flips the sign.
    let mut a = a >> 1;
    let mut swaps = 0u32;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl BladeTable {
    /// Builds the full multiplication table. `k` must be 2 or 3.
    pub fn new(k: usize) -> Result<Self> {
        if !(2..=3).contains(&k) {
            return Err(LionError::Config(format!(
                "unsupported modality count K={k}; only K in {{2, 3}} is implemented"
            )));
        }
        let dim = 1usize << k;
        let mut masks: Vec<u32> = (0..dim as u32).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        let grades: Vec<usize> = masks.iter().map(|m| m.count_ones() as usize).collect();
        let mut index_of_mask = vec![0usize; dim];
        for (i, &m) in masks.iter().enumerate() {
            index_of_mask[m as usize] = i;
        }
        let mut sign = vec![0.0; dim * dim];
        let mut prod = vec![0usize; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                sign[i * dim + j] = reorder_sign(masks[i], masks[j]);
                prod[i * dim + j] = index_of_mask[(masks[i] ^ masks[j]) as usize];
            }
        }
        Ok(BladeTable {
            k,
            dim,
            masks,
            grades,
            index_of_mask,
            sign,
            prod,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of basis blades, 2^K.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grade of blade `i`.
    pub fn grade(&self, i: usize) -> usize {
        self.grades[i]
    }

    /// Generator bitmask of blade `i`.
    pub fn mask(&self, i: usize) -> u32 {
        self.masks[i]
    }

    /// Blade index for a generator bitmask.
    pub fn index_of_mask(&self, mask: u32) -> usize {
        self.index_of_mask[mask as usize]
    }

    /// Index of the grade-1 basis vector e_{m+1} (m counted from 0).
    pub fn vector_index(&self, m: usize) -> usize {
        debug_assert!(m < self.k);
        self.index_of_mask[1usize << m]
    }

    /// Sign and resulting blade index of `blade_i * blade_j`.
    pub fn blade_product(&self, i: usize, j: usize) -> (f64, usize) {
        (self.sign[i * self.dim + j], self.prod[i * self.dim + j])
    }

    /// Indices of all blades of grade `g`.
    pub fn blades_of_grade(&self, g: usize) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.grades[i] == g).collect()
    }

    /// Human-readable blade name, e.g. `1`, `e1`, `e13`.
    pub fn blade_name(&self, i: usize) -> String {
        let m = self.masks[i];
        if m == 0 {
            return "1".to_string();
        }
        let mut s = String::from("e");
        for g in 0..self.k {
            if m & (1 << g) != 0 {
                s.push_str(&(g + 1).to_string());
            }
        }
        s
    }

    fn check_same(&self, other_len: usize, what: &str) -> Result<()> {
        if other_len != self.dim {
            return Err(LionError::Dimension(format!(
                "{what}: expected {} blade coefficients for K={}, got {other_len}",
                self.dim, self.k
            )));
        }
        Ok(())
    }

    /// Geometric product of two multivectors over this algebra.
    pub fn geometric_product(&self, a: &Multivector, b: &Multivector) -> Result<Multivector> {
        self.check_same(a.coeffs.len(), "geometric_product lhs")?;
        self.check_same(b.coeffs.len(), "geometric_product rhs")?;
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let ai = a.coeffs[i];
            if ai == 0.0 {
                continue;
            }
            let row_s = &self.sign[i * self.dim..(i + 1) * self.dim];
            let row_p = &self.prod[i * self.dim..(i + 1) * self.dim];
            for j in 0..self.dim {
                let bj = b.coeffs[j];
                if bj != 0.0 {
                    out[row_p[j]] += row_s[j] * ai * bj;
                }
            }
        }
        Ok(Multivector { coeffs: out })
    }
}

// ---------------------------------------------------------------------------
// Multivector
// ---------------------------------------------------------------------------

/// Dense element of Cl(K,0): one coefficient per basis blade.
#[derive(Debug, Clone, PartialEq)]
pub struct Multivector {
    coeffs: Vec<f64>,
}

impl Multivector {
    pub fn zero(table: &BladeTable) -> Self {
        Multivector {
            coeffs: vec![0.0; table.dim()],
        }
    }

    pub fn scalar(value: f64, table: &BladeTable) -> Self {
        let mut coeffs = vec![0.0; table.dim()];
        coeffs[0] = value;
        Multivector { coeffs }
    }

    /// The grade-1 basis vector for modality `m` (0-based).
    pub fn basis_vector(m: usize, table: &BladeTable) -> Self {
        let mut coeffs = vec![0.0; table.dim()];
        coeffs[table.vector_index(m)] = 1.0;
        Multivector { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>, table: &BladeTable) -> Result<Self> {
        table.check_same(coeffs.len(), "from_coeffs")?;
        Ok(Multivector { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs[i]
    }

    pub fn set_coeff(&mut self, i: usize, v: f64) {
        self.coeffs[i] = v;
    }

    /// Keeps only the grade-`g` coefficients. Idempotent; grades sum back to
    /// the original element.
    pub fn grade_project(&self, g: usize, table: &BladeTable) -> Result<Multivector> {
        if g > table.k() {
            return Err(LionError::Argument(format!(
                "grade {g} out of range 0..={}",
                table.k()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if table.grade(i) == g { c } else { 0.0 })
            .collect();
        Ok(Multivector { coeffs })
    }

    /// Euclidean norm over all blade coefficients.
    pub fn clifford_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Reversion: negates grades 2 and 3, fixes grades 0 and 1.
    pub fn reverse(&self, table: &BladeTable) -> Multivector {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let g = table.grade(i);
                // sign (-1)^{g(g-1)/2}
                if (g * (g.wrapping_sub(1)) / 2) % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        Multivector { coeffs }
    }

    pub fn scaled(&self, s: f64) -> Multivector {
        Multivector {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Multivector) -> Multivector {
        Multivector {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Multivector) -> Multivector {
        Multivector {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Rotor
// ---------------------------------------------------------------------------

/// Unit even-grade multivector (grades 0 and 2 only).
///
/// Acts on states via `R a R~`; `reverse` is its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotor {
    mv: Multivector,
}

impl Rotor {
    /// The identity rotor (scalar 1).
    pub fn identity(table: &BladeTable) -> Self {
        Rotor {
            mv: Multivector::scalar(1.0, table),
        }
    }

    /// Wraps an even-grade multivector, validating grade support and unit norm.
    pub fn from_multivector(mv: Multivector, table: &BladeTable) -> Result<Self> {
        table.check_same(mv.coeffs.len(), "rotor")?;
        for (i, &c) in mv.coeffs.iter().enumerate() {
            let g = table.grade(i);
            if c != 0.0 && g != 0 && g != 2 {
                return Err(LionError::Argument(format!(
                    "rotor has nonzero grade-{g} coefficient at blade {}",
                    table.blade_name(i)
                )));
            }
        }
        let norm = mv.clifford_norm();
        if (norm - 1.0).abs() > ROTOR_UNIT_TOL {
            return Err(LionError::Invariant(format!(
                "rotor norm {norm} deviates from 1 by more than {ROTOR_UNIT_TOL}"
            )));
        }
        Ok(Rotor { mv })
    }

    pub fn as_multivector(&self) -> &Multivector {
        &self.mv
    }

    pub fn is_identity(&self) -> bool {
        self.mv.coeffs[0] == 1.0 && self.mv.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    /// The inverse rotor (reversion negates the bivector part).
    pub fn reversed(&self, table: &BladeTable) -> Rotor {
        Rotor {
            mv: self.mv.reverse(table),
        }
    }

    fn check_unit(&self) -> Result<()> {
        let norm = self.mv.clifford_norm();
        if (norm - 1.0).abs() > ROTOR_UNIT_TOL {
            return Err(LionError::Invariant(format!(
                "sandwich requires a unit rotor; norm is {norm}"
            )));
        }
        Ok(())
    }

    /// Sandwich product `R a R~`.
    pub fn sandwich(&self, a: &Multivector, table: &BladeTable) -> Result<Multivector> {
        self.check_unit()?;
        let ra = table.geometric_product(&self.mv, a)?;
        table.geometric_product(&ra, &self.mv.reverse(table))
    }

    /// The linear map of the sandwich product as a row-major `dim x dim`
    /// matrix M with `(R a R~)_i = sum_j M[i][j] a_j`.
    ///
    /// Rotations are orthogonal on the coefficient space, so the matrix of the
    /// reversed rotor is this matrix's transpose.
    pub fn sandwich_matrix(&self, table: &BladeTable) -> Result<Vec<f64>> {
        self.check_unit()?;
        let dim = table.dim();
        let mut m = vec![0.0; dim * dim];
        let rev = self.mv.reverse(table);
        for j in 0..dim {
            let mut basis = Multivector::zero(table);
            basis.coeffs[j] = 1.0;
            let col = table.geometric_product(&table.geometric_product(&self.mv, &basis)?, &rev)?;
            for i in 0..dim {
                m[i * dim + j] = col.coeffs[i];
            }
        }
        Ok(m)
    }

    /// Applies the sandwich channel-wise to a batch.
    pub fn sandwich_batch(&self, batch: &MultivectorBatch, table: &BladeTable) -> Result<MultivectorBatch> {
        let m = self.sandwich_matrix(table)?;
        Ok(batch.apply_blade_matrix(&m))
    }
}

/// Closed-form exponential of a pure bivector.
///
/// For K <= 3 every bivector squares to `-|B|^2`, so
/// `exp(B) = cos|B| + sin|B| * B/|B|`; the zero bivector maps to the identity.
pub fn bivector_exp(b: &Multivector, table: &BladeTable) -> Result<Rotor> {
    table.check_same(b.coeffs.len(), "bivector_exp")?;
    for (i, &c) in b.coeffs.iter().enumerate() {
        if c != 0.0 && table.grade(i) != 2 {
            return Err(LionError::Argument(format!(
                "bivector_exp input has nonzero grade-{} coefficient at blade {}",
                table.grade(i),
                table.blade_name(i)
            )));
        }
    }
    let angle = b.clifford_norm();
    if angle == 0.0 {
        return Ok(Rotor::identity(table));
    }
    let (sin, cos) = angle.sin_cos();
    let mut mv = b.scaled(sin / angle);
    mv.coeffs[0] = cos;
    Rotor::from_multivector(mv, table)
}

// ---------------------------------------------------------------------------
// MultivectorBatch
// ---------------------------------------------------------------------------

/// `d` channels of multivectors sharing one algebra: a `d x 2^K` coefficient
/// matrix (row-major) with the channels partitioned into per-modality blocks.
///
/// This is the node state `H_u`; all blade operations act per channel row.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivectorBatch {
    d: usize,
    dim: usize,
    blocks: Vec<usize>,
    coeffs: Vec<f64>,
}

impl MultivectorBatch {
    /// All-zero state with `blocks` channel counts per modality.
    pub fn zero(blocks: Vec<usize>, table: &BladeTable) -> Result<Self> {
        if blocks.len() != table.k() {
            return Err(LionError::Dimension(format!(
                "expected {} modality blocks, got {}",
                table.k(),
                blocks.len()
            )));
        }
        let d: usize = blocks.iter().sum();
        if d == 0 {
            return Err(LionError::Dimension("channel count d must be positive".into()));
        }
        Ok(MultivectorBatch {
            d,
            dim: table.dim(),
            blocks,
            coeffs: vec![0.0; d * table.dim()],
        })
    }

    pub fn channels(&self) -> usize {
        self.d
    }

    pub fn blade_dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Channel range `[start, end)` of modality block `m`.
    pub fn block_range(&self, m: usize) -> (usize, usize) {
        let start: usize = self.blocks[..m].iter().sum();
        (start, start + self.blocks[m])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, channel: usize, blade: usize) -> f64 {
        self.coeffs[channel * self.dim + blade]
    }

    pub fn set(&mut self, channel: usize, blade: usize, v: f64) {
        self.coeffs[channel * self.dim + blade] = v;
    }

    /// Channel row as a standalone multivector.
    pub fn channel(&self, c: usize) -> Multivector {
        Multivector {
            coeffs: self.coeffs[c * self.dim..(c + 1) * self.dim].to_vec(),
        }
    }

    pub fn grade_project(&self, g: usize, table: &BladeTable) -> Result<MultivectorBatch> {
        if g > table.k() {
            return Err(LionError::Argument(format!(
                "grade {g} out of range 0..={}",
                table.k()
            )));
        }
        let mut out = self.clone();
        for blade in 0..self.dim {
            if table.grade(blade) != g {
                for ch in 0..self.d {
                    out.coeffs[ch * self.dim + blade] = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Euclidean norm over all channels and blades.
    pub fn clifford_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> MultivectorBatch {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn add(&self, other: &MultivectorBatch) -> MultivectorBatch {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &MultivectorBatch) -> MultivectorBatch {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        out
    }

    /// `self += s * other`.
    pub fn axpy_in_place(&mut self, s: f64, other: &MultivectorBatch) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Applies a `dim x dim` blade-space matrix to every channel row
    /// (out_row = M * row, treating the row as a column vector).
    pub fn apply_blade_matrix(&self, m: &[f64]) -> MultivectorBatch {
        debug_assert_eq!(m.len(), self.dim * self.dim);
        let mut out = self.clone();
        for ch in 0..self.d {
            let row = &self.coeffs[ch * self.dim..(ch + 1) * self.dim];
            let out_row = &mut out.coeffs[ch * self.dim..(ch + 1) * self.dim];
            for (i, o) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, &r) in row.iter().enumerate() {
                    acc += m[i * self.dim + j] * r;
                }
                *o = acc;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Brute-force blade multiplication: represent a blade as its generator
    /// list, concatenate, bubble-sort with sign bookkeeping, cancel equal
    /// adjacent generators (e_i e_i = +1).
    fn string_oracle(a_mask: u32, b_mask: u32, k: usize) -> (f64, u32) {
        let mut gens: Vec<u32> = Vec::new();
        for g in 0..k as u32 {
            if a_mask & (1 << g) != 0 {
                gens.push(g);
            }
        }
        for g in 0..k as u32 {
            if b_mask & (1 << g) != 0 {
                gens.push(g);
            }
        }
        let mut sign = 1.0;
        // Bubble sort counting swaps.
        let mut swapped = true;
        while swapped {
            swapped = false;
            for i in 1..gens.len() {
                if gens[i - 1] > gens[i] {
                    gens.swap(i - 1, i);
                    sign = -sign;
                    swapped = true;
                }
            }
        }
        // Cancel adjacent duplicates.
        let mut out: Vec<u32> = Vec::new();
        for g in gens {
            if out.last() == Some(&g) {
                out.pop();
            } else {
                out.push(g);
            }
        }
        let mask = out.iter().fold(0u32, |m, g| m | (1 << g));
        (sign, mask)
    }

    fn random_mv(table: &BladeTable, rng: &mut Rng) -> Multivector {
        let coeffs = (0..table.dim()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        Multivector::from_coeffs(coeffs, table).unwrap()
    }

    fn random_rotor(table: &BladeTable, rng: &mut Rng) -> Rotor {
        let mut b = Multivector::zero(table);
        for i in table.blades_of_grade(2) {
            b.set_coeff(i, rng.uniform_in(-2.0, 2.0));
        }
        bivector_exp(&b, table).unwrap()
    }

    #[test]
    fn blade_order_is_graded_lexicographic() {
        let t2 = BladeTable::new(2).unwrap();
        let names: Vec<String> = (0..4).map(|i| t2.blade_name(i)).collect();
        assert_eq!(names, vec!["1", "e1", "e2", "e12"]);
        let t3 = BladeTable::new(3).unwrap();
        let names: Vec<String> = (0..8).map(|i| t3.blade_name(i)).collect();
        assert_eq!(names, vec!["1", "e1", "e2", "e3", "e12", "e13", "e23", "e123"]);
    }

    #[test]
    fn grade_counts_match_binomials() {
        for k in [2usize, 3] {
            let t = BladeTable::new(k).unwrap();
            let binom = |n: usize, r: usize| -> usize {
                (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
            };
            for g in 0..=k {
                assert_eq!(t.blades_of_grade(g).len(), binom(k, g), "K={k} g={g}");
            }
        }
    }

    #[test]
    fn unsupported_k_is_a_config_error() {
        assert!(matches!(BladeTable::new(1), Err(LionError::Config(_))));
        assert!(matches!(BladeTable::new(4), Err(LionError::Config(_))));
    }

    #[test]
    fn generator_squares_and_anticommutation_k2() {
        let t = BladeTable::new(2).unwrap();
        let e1 = t.vector_index(0);
        let e2 = t.vector_index(1);
        let e12 = t.index_of_mask(0b11);
        assert_eq!(t.blade_product(e1, e1), (1.0, 0));
        assert_eq!(t.blade_product(e1, e2), (1.0, e12));
        assert_eq!(t.blade_product(e2, e1), (-1.0, e12));
    }

    #[test]
    fn k3_table_matches_string_sorting_oracle() {
        let t = BladeTable::new(3).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let (sign, idx) = t.blade_product(i, j);
                let (osign, omask) = string_oracle(t.mask(i), t.mask(j), 3);
                assert_eq!(sign, osign, "sign of {} * {}", t.blade_name(i), t.blade_name(j));
                assert_eq!(t.mask(idx), omask, "blade of {} * {}", t.blade_name(i), t.blade_name(j));
            }
        }
    }

    #[test]
    fn vector_product_splits_into_symmetric_and_antisymmetric_parts() {
        let t = BladeTable::new(2).unwrap();
        // (e1 + e2)(e1 - e2) = e1e1 - e1e2 + e2e1 - e2e2 = -2 e12
        let mut a = Multivector::zero(&t);
        a.set_coeff(t.vector_index(0), 1.0);
        a.set_coeff(t.vector_index(1), 1.0);
        let mut b = Multivector::zero(&t);
        b.set_coeff(t.vector_index(0), 1.0);
        b.set_coeff(t.vector_index(1), -1.0);
        let p = t.geometric_product(&a, &b).unwrap();
        assert_eq!(p.coeff(0), 0.0);
        assert_eq!(p.coeff(t.index_of_mask(0b11)), -2.0);
    }

    #[test]
    fn scalar_one_is_the_identity() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(1);
        let a = random_mv(&t, &mut rng);
        let one = Multivector::scalar(1.0, &t);
        assert_eq!(t.geometric_product(&one, &a).unwrap(), a);
        assert_eq!(t.geometric_product(&a, &one).unwrap(), a);
    }

    #[test]
    fn mismatched_algebras_are_a_dimension_error() {
        let t2 = BladeTable::new(2).unwrap();
        let t3 = BladeTable::new(3).unwrap();
        let a = Multivector::scalar(1.0, &t2);
        let b = Multivector::scalar(1.0, &t3);
        assert!(matches!(
            t3.geometric_product(&a, &b),
            Err(LionError::Dimension(_))
        ));
    }

    #[test]
    fn grade_projection_examples() {
        let t = BladeTable::new(2).unwrap();
        // a = 3 + 2 e1 + 5 e12
        let mut a = Multivector::zero(&t);
        a.set_coeff(0, 3.0);
        a.set_coeff(t.vector_index(0), 2.0);
        a.set_coeff(t.index_of_mask(0b11), 5.0);
        let g2 = a.grade_project(2, &t).unwrap();
        assert_eq!(g2.coeff(0), 0.0);
        assert_eq!(g2.coeff(t.vector_index(0)), 0.0);
        assert_eq!(g2.coeff(t.index_of_mask(0b11)), 5.0);
        // idempotence
        let g0 = a.grade_project(0, &t).unwrap();
        assert_eq!(g0.grade_project(0, &t).unwrap(), g0);
        // out of range
        assert!(matches!(a.grade_project(3, &t), Err(LionError::Argument(_))));
    }

    #[test]
    fn grade_projections_sum_to_identity() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(2);
        let a = random_mv(&t, &mut rng);
        let mut sum = Multivector::zero(&t);
        for g in 0..=3 {
            sum = sum.add(&a.grade_project(g, &t).unwrap());
        }
        assert_eq!(sum, a);
    }

    #[test]
    fn norm_examples() {
        let t = BladeTable::new(2).unwrap();
        assert_eq!(Multivector::zero(&t).clifford_norm(), 0.0);
        let mut a = Multivector::zero(&t);
        a.set_coeff(0, 3.0);
        a.set_coeff(t.index_of_mask(0b11), 4.0);
        assert_eq!(a.clifford_norm(), 5.0);
    }

    #[test]
    fn batch_norm_matches_naive_loop() {
        let t = BladeTable::new(2).unwrap();
        let mut rng = Rng::new(3);
        let mut batch = MultivectorBatch::zero(vec![2, 3], &t).unwrap();
        for ch in 0..5 {
            for blade in 0..4 {
                batch.set(ch, blade, rng.uniform_in(-2.0, 2.0));
            }
        }
        let mut acc = 0.0;
        for ch in 0..5 {
            for blade in 0..4 {
                acc += batch.get(ch, blade) * batch.get(ch, blade);
            }
        }
        assert!((batch.clifford_norm() - acc.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reverse_examples() {
        let t = BladeTable::new(2).unwrap();
        let mut a = Multivector::zero(&t);
        a.set_coeff(0, 1.0);
        a.set_coeff(t.index_of_mask(0b11), 1.0);
        let r = a.reverse(&t);
        assert_eq!(r.coeff(0), 1.0);
        assert_eq!(r.coeff(t.index_of_mask(0b11)), -1.0);
        // pure grade-1 fixed
        let v = Multivector::basis_vector(1, &t);
        assert_eq!(v.reverse(&t), v);
        // involution
        assert_eq!(r.reverse(&t), a);
    }

    #[test]
    fn rotor_times_its_reverse_is_one() {
        for k in [2usize, 3] {
            let t = BladeTable::new(k).unwrap();
            let mut rng = Rng::new(4);
            for _ in 0..50 {
                let r = random_rotor(&t, &mut rng);
                let p = t
                    .geometric_product(r.as_multivector(), &r.as_multivector().reverse(&t))
                    .unwrap();
                assert!((p.coeff(0) - 1.0).abs() < 1e-12);
                for i in 1..t.dim() {
                    assert!(p.coeff(i).abs() < 1e-12, "K={k} blade {i}");
                }
            }
        }
    }

    #[test]
    fn bivector_exp_examples() {
        let t = BladeTable::new(2).unwrap();
        // zero bivector -> identity
        let r = bivector_exp(&Multivector::zero(&t), &t).unwrap();
        assert!(r.is_identity());
        // (pi/2) e12 -> 0 + e12
        let mut b = Multivector::zero(&t);
        let e12 = t.index_of_mask(0b11);
        b.set_coeff(e12, std::f64::consts::FRAC_PI_2);
        let r = bivector_exp(&b, &t).unwrap();
        assert!(r.as_multivector().coeff(0).abs() < 1e-15);
        assert!((r.as_multivector().coeff(e12) - 1.0).abs() < 1e-15);
        // non-bivector input rejected
        let bad = Multivector::scalar(1.0, &t);
        assert!(matches!(bivector_exp(&bad, &t), Err(LionError::Argument(_))));
    }

    #[test]
    fn bivector_exp_matches_power_series_k3() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(5);
        for _ in 0..25 {
            let mut b = Multivector::zero(&t);
            for i in t.blades_of_grade(2) {
                b.set_coeff(i, rng.uniform_in(-1.5, 1.5));
            }
            // 30-term series sum B^n / n!
            let mut series = Multivector::scalar(1.0, &t);
            let mut term = Multivector::scalar(1.0, &t);
            for n in 1..=30 {
                term = t.geometric_product(&term, &b).unwrap().scaled(1.0 / n as f64);
                series = series.add(&term);
            }
            let r = bivector_exp(&b, &t).unwrap();
            let err: f64 = r
                .as_multivector()
                .coeffs()
                .iter()
                .zip(series.coeffs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "series mismatch {err}");
        }
    }

    #[test]
    fn sandwich_identity_is_noop() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(6);
        let a = random_mv(&t, &mut rng);
        let r = Rotor::identity(&t);
        assert_eq!(r.sandwich(&a, &t).unwrap(), a);
    }

    #[test]
    fn sandwich_rotates_e1_to_e2_at_quarter_turn() {
        let t = BladeTable::new(2).unwrap();
        let mut b = Multivector::zero(&t);
        b.set_coeff(t.index_of_mask(0b11), std::f64::consts::FRAC_PI_4);
        let r = bivector_exp(&b, &t).unwrap();
        // exp((pi/4) e12) e1 exp(-(pi/4) e12) = -e2 in this orientation;
        // the plane rotation direction flips with the sign of the bivector.
        let got = r.sandwich(&Multivector::basis_vector(0, &t), &t).unwrap();
        let e2 = t.vector_index(1);
        let e1 = t.vector_index(0);
        assert!(got.coeff(e1).abs() < 1e-12);
        assert!((got.coeff(e2).abs() - 1.0).abs() < 1e-12);
        // check the opposite bivector sign lands on the opposite e2 direction
        let rneg = bivector_exp(&b.scaled(-1.0), &t).unwrap();
        let got_neg = rneg.sandwich(&Multivector::basis_vector(0, &t), &t).unwrap();
        assert!((got.coeff(e2) + got_neg.coeff(e2)).abs() < 1e-12);
    }

    #[test]
    fn sandwich_preserves_norm_and_grade() {
        for k in [2usize, 3] {
            let t = BladeTable::new(k).unwrap();
            let mut rng = Rng::new(7);
            for _ in 0..200 {
                let r = random_rotor(&t, &mut rng);
                let a = random_mv(&t, &mut rng);
                let s = r.sandwich(&a, &t).unwrap();
                assert!((s.clifford_norm() - a.clifford_norm()).abs() < 1e-9);
                for g in 0..=k {
                    let ag = a.grade_project(g, &t).unwrap();
                    let sg = r.sandwich(&ag, &t).unwrap();
                    // pure-grade inputs stay pure-grade for K <= 3
                    for (i, &c) in sg.coeffs().iter().enumerate() {
                        if t.grade(i) != g {
                            assert!(c.abs() < 1e-12, "K={k} grade {g} leaked to blade {i}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sandwich_undone_by_reverse() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(8);
        for _ in 0..50 {
            let r = random_rotor(&t, &mut rng);
            let a = random_mv(&t, &mut rng);
            let back = r
                .reversed(&t)
                .sandwich(&r.sandwich(&a, &t).unwrap(), &t)
                .unwrap();
            let err: f64 = back
                .coeffs()
                .iter()
                .zip(a.coeffs())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn non_unit_rotor_rejected() {
        let t = BladeTable::new(2).unwrap();
        let mv = Multivector::scalar(2.0, &t);
        assert!(matches!(
            Rotor::from_multivector(mv, &t),
            Err(LionError::Invariant(_))
        ));
    }

    #[test]
    fn sandwich_matrix_agrees_with_direct_products() {
        for k in [2usize, 3] {
            let t = BladeTable::new(k).unwrap();
            let mut rng = Rng::new(9);
            let r = random_rotor(&t, &mut rng);
            let m = r.sandwich_matrix(&t).unwrap();
            let a = random_mv(&t, &mut rng);
            let direct = r.sandwich(&a, &t).unwrap();
            let dim = t.dim();
            for i in 0..dim {
                let via: f64 = (0..dim).map(|j| m[i * dim + j] * a.coeff(j)).sum();
                assert!((via - direct.coeff(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_sandwich_matches_per_channel_sandwich() {
        let t = BladeTable::new(2).unwrap();
        let mut rng = Rng::new(10);
        let r = random_rotor(&t, &mut rng);
        let mut batch = MultivectorBatch::zero(vec![2, 2], &t).unwrap();
        for ch in 0..4 {
            for blade in 0..4 {
                batch.set(ch, blade, rng.uniform_in(-1.0, 1.0));
            }
        }
        let out = r.sandwich_batch(&batch, &t).unwrap();
        for ch in 0..4 {
            let direct = r.sandwich(&batch.channel(ch), &t).unwrap();
            for blade in 0..4 {
                assert!((out.get(ch, blade) - direct.coeff(blade)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonality_preserved_under_rotation() {
        let t = BladeTable::new(3).unwrap();
        let mut rng = Rng::new(11);
        for _ in 0..100 {
            let r = random_rotor(&t, &mut rng);
            for i in 0..3 {
                for j in 0..3 {
                    let ei = r.sandwich(&Multivector::basis_vector(i, &t), &t).unwrap();
                    let ej = r.sandwich(&Multivector::basis_vector(j, &t), &t).unwrap();
                    let scalar = t.geometric_product(&ei, &ej).unwrap().coeff(0);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((scalar - expect).abs() < 1e-9);
                }
            }
        }
    }
}
