//! Dense spectral oracle for the potential-induced geometric Laplacian.
//!
//! Materializes the symmetrized operator
//! `L = I - D^{-1/2} W D^{-1/2}` acting on flattened node states, where
//! `W[u·,v·] = phi(u,v) * (I_d ⊗ M_uv)` stacks the per-edge transport
//! matrices and `D` holds the raw potential row sums. `W` is symmetric as a
//! real matrix because `phi` is edge-symmetric and the reverse rotor's
//! transport matrix is the transpose, so the spectrum is real.
//!
//! This is a verification tool only; materialization is capped at a flattened
//! width of 4096.

use crate::clifford::BladeTable;
use crate::error::{LionError, Result};
use crate::mag::Csr;

use super::EdgeGeometry;

/// Maximum flattened width (N * d * 2^K) of the dense materialization.
pub const SPECTRUM_SIZE_CAP: usize = 4096;

/// Eigenvalues (ascending) of the symmetrized geometric Laplacian.
///
/// Isolated nodes contribute zero rows (their coordinates are exact
/// eigenvalue-0 directions). An empty edge set therefore yields an all-zero
/// spectrum.
pub fn geometric_laplacian_spectrum(
    geo: &EdgeGeometry,
    csr: &Csr,
    table: &BladeTable,
    d: usize,
) -> Result<Vec<f64>> {
    let n = csr.n_nodes();
    let dim = table.dim();
    let width = n * d * dim;
    if width > SPECTRUM_SIZE_CAP {
        return Err(LionError::Size(format!(
            "dense spectrum width {width} exceeds cap {SPECTRUM_SIZE_CAP}"
        )));
    }
    let degrees: Vec<f64> = (0..n)
        .map(|u| geo.phi[csr.row_range(u)].iter().sum())
        .collect();

    let block = d * dim;
    let mut a = vec![0.0; width * width];
    for u in 0..n {
        if degrees[u] <= 0.0 {
            continue;
        }
        for c in 0..block {
            let i = u * block + c;
            a[i * width + i] = 1.0;
        }
        for (pos, &v) in csr.row_range(u).zip(csr.neighbors(u)) {
            let m = geo.rotors[pos].sandwich_matrix(table)?;
            let w = geo.phi[pos] / (degrees[u] * degrees[v]).sqrt();
            for ch in 0..d {
                for bi in 0..dim {
                    let row = u * block + ch * dim + bi;
                    for bj in 0..dim {
                        let col = v * block + ch * dim + bj;
                        a[row * width + col] -= w * m[bi * dim + bj];
                    }
                }
            }
        }
    }
    // Round-off can leave the assembled matrix asymmetric at the last ulp;
    // fold it back before the symmetric solver.
    for i in 0..width {
        for j in (i + 1)..width {
            let avg = 0.5 * (a[i * width + j] + a[j * width + i]);
            a[i * width + j] = avg;
            a[j * width + i] = avg;
        }
    }
    jacobi_eigenvalues(a, width)
}

/// Smallest eigenvalue above `tol`, if any.
pub fn min_nonzero_eigenvalue(spectrum: &[f64], tol: f64) -> Option<f64> {
    spectrum.iter().copied().find(|&x| x > tol)
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi sweeps.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    debug_assert_eq!(a.len(), n * n);
    let diag_scale: f64 = (0..n)
        .map(|i| a[i * n + i] * a[i * n + i])
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    for _sweep in 0..60 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
            s.sqrt()
        };
        if off <= 1e-13 * diag_scale {
            let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            eig.sort_by(f64::total_cmp);
            return Ok(eig);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(LionError::Numeric(
        "jacobi eigensolver failed to converge in 60 sweeps".into(),
    ))
}
