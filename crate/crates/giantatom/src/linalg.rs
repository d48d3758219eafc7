//! Small dense complex linear algebra: the workhorse for density matrices,
//! superoperators, and Choi-matrix fidelities.
//!
//! Dimensions here are tens to a few hundred, so a row-major `Vec<Complex64>`
//! with straightforward kernels beats pulling in a BLAS backend, and the
//! Hermitian eigensolver (cyclic Jacobi) is deterministic across platforms.

use num_complex::Complex64 as C64;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl std::fmt::Debug for CMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                let v = self[(r, c)];
                write!(f, "({:+.3e},{:+.3e}) ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        out
    }

    pub fn axpy(&mut self, a: C64, x: &Self) {
        assert_eq!((self.rows, self.cols), (x.rows, x.cols));
        for (v, w) in self.data.iter_mut().zip(&x.data) {
            *v += a * w;
        }
    }

    /// Matrix product, ikj loop order for row-major locality.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let (n, k_dim, m) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            for k in 0..k_dim {
                let a = self.data[i * k_dim + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[k * m..(k + 1) * m];
                let orow = &mut out.data[i * m..(i + 1) * m];
                for j in 0..m {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (self[(r, c)] - self[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue_hermitian(&self) -> f64 {
        let (vals, _) = eigh(self);
        vals.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with `a ≈ v · diag(λ) · v†`;
/// eigenvalues ascending, eigenvectors in the matching columns of `v`.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    assert!(a.is_square());
    let n = a.rows;
    let mut m = a.clone();
    // Work on the Hermitian average to shed tiny asymmetries.
    for r in 0..n {
        for c in 0..n {
            let h = 0.5 * (m[(r, c)] + m[(c, r)].conj());
            m[(r, c)] = h;
            m[(c, r)] = h.conj();
        }
    }
    let mut v = CMat::identity(n);
    let scale = m.max_abs().max(1e-300);
    let tol = 1e-15 * scale;

    for _sweep in 0..120 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let napq = apq.norm();
                if napq <= tol * 1e-2 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // Phase that makes the off-diagonal real, then a real Jacobi
                // rotation annihilates it.
                let phase = apq / napq;
                let tau = (aqq - app) / (2.0 * napq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns: |p'⟩ = c|p⟩ - s·e^{-iφ}|q⟩, |q'⟩ = s·e^{iφ}|p⟩ + c|q⟩
                let sp = C64::new(s, 0.0) * phase.conj();
                let sq = C64::new(s, 0.0) * phase;
                for r in 0..n {
                    let mrp = m[(r, p)];
                    let mrq = m[(r, q)];
                    m[(r, p)] = mrp * c - mrq * sp;
                    m[(r, q)] = mrp * sq + mrq * c;
                }
                for cidx in 0..n {
                    let mpc = m[(p, cidx)];
                    let mqc = m[(q, cidx)];
                    m[(p, cidx)] = mpc * c - mqc * sp.conj();
                    m[(q, cidx)] = mpc * sq.conj() + mqc * c;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * c - vrq * sp;
                    v[(r, q)] = vrp * sq + vrq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = CMat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            sorted_vecs[(r, new_c)] = v[(r, old_c)];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// Square root of a positive-semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-neg_tol, 0)` are clamped to zero; more negative ones are
/// reported as an error by the caller via `min_eigenvalue_hermitian`.
pub fn sqrt_psd(a: &CMat, neg_tol: f64) -> CMat {
    let n = a.rows;
    let (vals, vecs) = eigh(a);
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let lam = if vals[k] < 0.0 {
            debug_assert!(vals[k] > -neg_tol.max(1e-30) * 100.0);
            0.0
        } else {
            vals[k]
        };
        if lam == 0.0 {
            continue;
        }
        let s = lam.sqrt();
        for r in 0..n {
            let vr = vecs[(r, k)] * s;
            for c in 0..n {
                out[(r, c)] += vr * vecs[(c, k)].conj();
            }
        }
    }
    out
}

/// Exact propagator exp(-i H t) of a Hermitian 2x2 block.
pub fn expm_2x2_hermitian(h: &CMat, t: f64) -> CMat {
    assert_eq!((h.rows, h.cols), (2, 2));
    // H = a·I + b·(n̂·σ); exp(-iHt) = e^{-iat} (cos(bt) I - i sin(bt) n̂·σ)
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let dz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let dx = h[(0, 1)].re;
    let dy = -h[(0, 1)].im;
    let b = (dz * dz + dx * dx + dy * dy).sqrt();
    let phase = C64::new(0.0, -a * t).exp();
    let mut out = CMat::zeros(2, 2);
    if b == 0.0 {
        out[(0, 0)] = phase;
        out[(1, 1)] = phase;
        return out;
    }
    let (nx, ny, nz) = (dx / b, dy / b, dz / b);
    let cosbt = (b * t).cos();
    let msin = C64::new(0.0, -(b * t).sin());
    out[(0, 0)] = phase * (C64::new(cosbt, 0.0) + msin * nz);
    out[(1, 1)] = phase * (C64::new(cosbt, 0.0) - msin * nz);
    out[(0, 1)] = phase * msin * C64::new(nx, -ny);
    out[(1, 0)] = phase * msin * C64::new(nx, ny);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // Deterministic xorshift for reproducible pseudo-random matrices.
    struct XorShift(u64);
    impl XorShift {
        fn next_f64(&mut self) -> f64 {
            let mut x = self.0;
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            self.0 = x;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = XorShift(seed | 1);
        let mut m = CMat::zeros(n, n);
        for r in 0..n {
            for cidx in r..n {
                if r == cidx {
                    m[(r, cidx)] = c(rng.next_f64(), 0.0);
                } else {
                    let v = c(rng.next_f64(), rng.next_f64());
                    m[(r, cidx)] = v;
                    m[(cidx, r)] = v.conj();
                }
            }
        }
        m
    }

    #[test]
    fn mul_identity() {
        let a = random_hermitian(5, 3);
        let i = CMat::identity(5);
        let b = a.mul(&i);
        assert!(b.sub(&a).max_abs() < 1e-15);
    }

    #[test]
    fn eigh_reconstructs() {
        for seed in [1u64, 7, 42, 99] {
            for n in [2usize, 3, 8, 16] {
                let a = random_hermitian(n, seed * 13 + n as u64);
                let (vals, vecs) = eigh(&a);
                // v diag(λ) v† == a
                let mut lam = CMat::zeros(n, n);
                for i in 0..n {
                    lam[(i, i)] = c(vals[i], 0.0);
                }
                let recon = vecs.mul(&lam).mul(&vecs.dagger());
                assert!(
                    recon.sub(&a).max_abs() < 1e-12 * (1.0 + a.max_abs()),
                    "n={n} seed={seed} defect={}",
                    recon.sub(&a).max_abs()
                );
                // unitarity
                let vv = vecs.dagger().mul(&vecs);
                assert!(vv.sub(&CMat::identity(n)).max_abs() < 1e-12);
                // trace preserved
                let tr: f64 = vals.iter().sum();
                assert!((tr - a.trace().re).abs() < 1e-11 * (1.0 + tr.abs()));
            }
        }
    }

    #[test]
    fn eigh_known_pauli_x() {
        let mut x = CMat::zeros(2, 2);
        x[(0, 1)] = c(1.0, 0.0);
        x[(1, 0)] = c(1.0, 0.0);
        let (vals, _) = eigh(&x);
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let a = random_hermitian(6, 5);
        let psd = a.mul(&a.dagger()); // always PSD
        let r = sqrt_psd(&psd, 1e-12);
        assert!(r.mul(&r).sub(&psd).max_abs() < 1e-10 * (1.0 + psd.max_abs()));
    }

    #[test]
    fn expm_2x2_pi_rotation() {
        // H = g σ_x: at t = π/(2g) a full transfer with phase -i.
        let g = 1.7;
        let mut h = CMat::zeros(2, 2);
        h[(0, 1)] = c(g, 0.0);
        h[(1, 0)] = c(g, 0.0);
        let u = expm_2x2_hermitian(&h, PI / (2.0 * g));
        assert!(u[(0, 0)].norm() < 1e-14);
        assert!((u[(0, 1)] - c(0.0, -1.0)).norm() < 1e-14);
        // unitary
        let uu = u.dagger().mul(&u);
        assert!(uu.sub(&CMat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn kron_shapes() {
        let a = CMat::identity(2);
        let b = random_hermitian(3, 11);
        let k = a.kron(&b);
        assert_eq!((k.rows, k.cols), (6, 6));
        assert!((k.trace() - b.trace() * c(2.0, 0.0)).norm() < 1e-13);
    }
}
