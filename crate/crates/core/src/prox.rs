//! Proximable penalties: ℓ1, nuclear norm of a column-major vectorized
//! matrix, and weighted separable combinations of those on a product space.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, LigmeError, Result};

/// A convex, even-symmetric, coercive penalty with a cheap proximity operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Penalty {
    L1 {
        len: usize,
    },
    /// Nuclear norm of `vec^{-1}(z)` for an `rows x cols` matrix, column-major.
    Nuclear {
        rows: usize,
        cols: usize,
    },
    Separable(Separable),
}

/// `z = (z_1, ..., z_M) -> Σ w_i Ψ_i(z_i)` with strictly positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Separable {
    parts: Vec<(f64, Penalty)>,
    offsets: Vec<usize>,
    total_len: usize,
}

impl Separable {
    pub fn parts(&self) -> &[(f64, Penalty)] {
        &self.parts
    }

    /// Slice boundaries `[start, end)` of each part.
    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets
            .iter()
            .zip(&self.parts)
            .map(|(&o, (_, p))| (o, o + p.total_len()))
    }
}

impl Penalty {
    pub fn l1(len: usize) -> Self {
        Penalty::L1 { len }
    }

    pub fn nuclear(rows: usize, cols: usize) -> Self {
        Penalty::Nuclear { rows, cols }
    }

    /// Nuclear norm on a vector of length `len`, which must be `rows * cols`.
    pub fn nuclear_for_len(rows: usize, len: usize) -> Result<Self> {
        if rows == 0 || !len.is_multiple_of(rows) {
            return Err(LigmeError::InvalidArgument(format!(
                "length {len} is not a multiple of row count {rows}"
            )));
        }
        Ok(Penalty::Nuclear {
            rows,
            cols: len / rows,
        })
    }

    pub fn separable(parts: Vec<(f64, Penalty)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(LigmeError::InvalidArgument(
                "separable penalty needs parts".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total_len = 0;
        for (w, p) in &parts {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(LigmeError::InvalidArgument(format!(
                    "separable weights must be positive, got {w}"
                )));
            }
            offsets.push(total_len);
            total_len += p.total_len();
        }
        Ok(Penalty::Separable(Separable {
            parts,
            offsets,
            total_len,
        }))
    }

    pub fn total_len(&self) -> usize {
        match self {
            Penalty::L1 { len } => *len,
            Penalty::Nuclear { rows, cols } => rows * cols,
            Penalty::Separable(s) => s.total_len,
        }
    }

    /// Ψ(z).
    pub fn eval(&self, z: &DVector<f64>) -> Result<f64> {
        check_len("penalty eval", self.total_len(), z.len())?;
        Ok(self.eval_unchecked(z.as_slice()))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> f64 {
        match self {
            Penalty::L1 { .. } => z.iter().map(|v| v.abs()).sum(),
            Penalty::Nuclear { rows, cols } => DMatrix::from_column_slice(*rows, *cols, z)
                .singular_values()
                .sum(),
            Penalty::Separable(s) => s
                .parts
                .iter()
                .zip(s.ranges())
                .map(|((w, p), (a, b))| w * p.eval_unchecked(&z[a..b]))
                .sum(),
        }
    }

    /// `prox_{γΨ}(z) = argmin_y γΨ(y) + ½‖z - y‖²`.
    pub fn prox(&self, z: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
        check_len("prox", self.total_len(), z.len())?;
        check_gamma(gamma)?;
        Ok(self.prox_unchecked(z, gamma))
    }

    pub(crate) fn prox_unchecked(&self, z: &DVector<f64>, gamma: f64) -> DVector<f64> {
        let mut out = z.clone();
        self.prox_in_place(out.as_mut_slice(), gamma);
        out
    }

    fn prox_in_place(&self, z: &mut [f64], gamma: f64) {
        match self {
            Penalty::L1 { .. } => z.iter_mut().for_each(|v| *v = soft_threshold(*v, gamma)),
            Penalty::Nuclear { rows, cols } => {
                let m = DMatrix::from_column_slice(*rows, *cols, z);
                let shrunk = singular_value_threshold(m, gamma);
                z.copy_from_slice(shrunk.as_slice());
            }
            Penalty::Separable(s) => {
                for ((w, p), (a, b)) in s.parts.iter().zip(s.ranges()) {
                    p.prox_in_place(&mut z[a..b], gamma * w);
                }
            }
        }
    }

    /// `prox_{Ψ*}(z) = z - prox_Ψ(z)` (Moreau decomposition).
    pub fn prox_conjugate(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("prox_conjugate", self.total_len(), z.len())?;
        Ok(self.prox_conjugate_unchecked(z))
    }

    pub(crate) fn prox_conjugate_unchecked(&self, z: &DVector<f64>) -> DVector<f64> {
        z - self.prox_unchecked(z, 1.0)
    }

    /// Moreau envelope `min_y Ψ(y) + ‖x - y‖² / (2γ)`.
    pub fn moreau_envelope(&self, x: &DVector<f64>, gamma: f64) -> Result<f64> {
        let p = self.prox(x, gamma)?;
        Ok(self.eval_unchecked(p.as_slice()) + (x - &p).norm_squared() / (2.0 * gamma))
    }

    /// Gradient of the Moreau envelope, `(x - prox_{γΨ}(x)) / γ`.
    pub fn moreau_gradient(&self, x: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
        let p = self.prox(x, gamma)?;
        Ok((x - p) / gamma)
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `U diag(max(σ - t, 0)) V^T`.
pub fn singular_value_threshold(m: DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return m;
    }
    let mut svd = m.svd(true, true);
    svd.singular_values
        .iter_mut()
        .for_each(|s| *s = (*s - t).max(0.0));
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    u * DMatrix::from_diagonal(&svd.singular_values) * v_t
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(LigmeError::InvalidArgument(format!(
            "prox parameter must be positive, got {gamma}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn random_penalties() -> Vec<Penalty> {
        vec![
            Penalty::l1(6),
            Penalty::nuclear(2, 3),
            Penalty::separable(vec![(0.5, Penalty::l1(2)), (2.0, Penalty::nuclear(2, 2))]).unwrap(),
        ]
    }

    #[test]
    fn l1_examples() {
        let p = Penalty::l1(2);
        assert_eq!(
            p.prox(&dv(&[3.0, -0.5]), 1.0).unwrap().as_slice(),
            &[2.0, 0.0]
        );
        assert_eq!(Penalty::l1(1).prox_conjugate(&dv(&[0.5])).unwrap()[0], 0.5);
        assert_eq!(Penalty::l1(1).prox_conjugate(&dv(&[3.0])).unwrap()[0], 1.0);
        assert_eq!(Penalty::l1(3).eval(&dv(&[1.0, -2.0, 0.0])).unwrap(), 3.0);
    }

    #[test]
    fn nuclear_examples() {
        let p = Penalty::nuclear(2, 2);
        // vec(diag(5, 1)) column-major
        let z = dv(&[5.0, 0.0, 0.0, 1.0]);
        let out = p.prox(&z, 2.0).unwrap();
        assert!((out - dv(&[3.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
        assert!((p.eval(&dv(&[2.0, 0.0, 0.0, 3.0])).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_eval_matches_hand_svd_3x3() {
        // orthogonal Q times diag(4, 2, 1): nuclear norm 7
        let c = 0.6;
        let s = 0.8;
        let q = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let m = q * DMatrix::from_diagonal(&dv(&[4.0, 2.0, 1.0]));
        let p = Penalty::nuclear(3, 3);
        assert!((p.eval(&dv(m.as_slice())).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(Penalty::l1(2).prox(&dv(&[1.0, 2.0]), 0.0).is_err());
        assert!(Penalty::l1(2).prox(&dv(&[1.0, 2.0]), -1.0).is_err());
        assert!(Penalty::l1(2).prox(&dv(&[1.0]), 1.0).is_err());
        assert!(Penalty::nuclear_for_len(3, 10).is_err());
        assert!(Penalty::separable(vec![(0.0, Penalty::l1(1))]).is_err());
        assert!(Penalty::l1(1).moreau_envelope(&dv(&[1.0]), 0.0).is_err());
        assert!(Penalty::l1(1).moreau_gradient(&dv(&[1.0]), -2.0).is_err());
    }

    #[test]
    fn separable_uses_scaled_thresholds() {
        let p = Penalty::separable(vec![(1.0, Penalty::l1(2)), (3.0, Penalty::l1(1))]).unwrap();
        let out = p.prox(&dv(&[2.0, -2.0, 5.0]), 0.5).unwrap();
        assert_eq!(out.as_slice(), &[1.5, -1.5, 3.5]);
        assert_eq!(p.eval(&dv(&[1.0, -1.0, 2.0])).unwrap(), 8.0);
        assert_eq!(p.total_len(), 3);
    }

    #[test]
    fn l1_prox_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z: f64 = rng.random_range(-3.0..3.0);
            let g: f64 = rng.random_range(0.05..2.0);
            let step = 1e-4;
            let best = (0..=60_000)
                .map(|k| -3.0 + k as f64 * step)
                .min_by(|a, b| {
                    let fa = g * a.abs() + 0.5 * (z - a).powi(2);
                    let fb = g * b.abs() + 0.5 * (z - b).powi(2);
                    fa.partial_cmp(&fb).unwrap()
                })
                .unwrap();
            let p = Penalty::l1(1).prox(&dv(&[z]), g).unwrap()[0];
            assert!((p - best).abs() <= step, "z={z} g={g}: {p} vs {best}");
        }
    }

    #[test]
    fn moreau_examples() {
        let p = Penalty::l1(1);
        assert_eq!(p.moreau_envelope(&dv(&[0.0]), 1.0).unwrap(), 0.0);
        // Huber: |x| - γ/2 for |x| > γ
        assert!((p.moreau_envelope(&dv(&[2.0]), 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(p.moreau_gradient(&dv(&[0.0]), 1.0).unwrap()[0], 0.0);
        assert_eq!(p.moreau_gradient(&dv(&[5.0]), 1.0).unwrap()[0], 1.0);
    }

    #[test]
    fn moreau_envelope_increases_to_penalty() {
        let p = Penalty::l1(3);
        let x = dv(&[0.3, -1.7, 2.2]);
        let mut prev = f64::NEG_INFINITY;
        for g in [1.0, 0.1, 0.01, 0.001] {
            let e = p.moreau_envelope(&x, g).unwrap();
            assert!(e >= prev && e <= p.eval(&x).unwrap());
            prev = e;
        }
        assert!((prev - p.eval(&x).unwrap()).abs() < 2e-3);
    }

    #[test]
    fn moreau_gradient_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in random_penalties() {
            for _ in 0..20 {
                let x = DVector::from_fn(p.total_len(), |_, _| rng.random_range(-2.0..2.0));
                let g: f64 = rng.random_range(0.2..2.0);
                let grad = p.moreau_gradient(&x, g).unwrap();
                let h = 1e-5;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (p.moreau_envelope(&xp, g).unwrap()
                        - p.moreau_envelope(&xm, g).unwrap())
                        / (2.0 * h);
                    assert!((fd - grad[i]).abs() <= 1e-5, "{p:?}: {fd} vs {}", grad[i]);
                }
            }
        }
    }

    #[test]
    fn nuclear_prox_commutes_with_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let m = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
            let pm = Penalty::nuclear(3, 5).prox(&dv(m.as_slice()), 0.4).unwrap();
            let mt = m.transpose();
            let pmt = Penalty::nuclear(5, 3)
                .prox(&dv(mt.as_slice()), 0.4)
                .unwrap();
            let back = DMatrix::from_column_slice(5, 3, pmt.as_slice()).transpose();
            assert!((DMatrix::from_column_slice(3, 5, pm.as_slice()) - back).amax() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prox_is_firmly_nonexpansive(
            a in proptest::collection::vec(-3.0f64..3.0, 6),
            b in proptest::collection::vec(-3.0f64..3.0, 6),
            g in 0.05f64..2.0,
            which in 0usize..3,
        ) {
            let p = &random_penalties()[which];
            let (a, b) = (dv(&a), dv(&b));
            let (pa, pb) = (p.prox(&a, g).unwrap(), p.prox(&b, g).unwrap());
            let d = &pa - &pb;
            prop_assert!(d.norm_squared() <= d.dot(&(&a - &b)) + 1e-12);
        }

        #[test]
        fn moreau_decomposition_is_exact(
            z in proptest::collection::vec(-5.0f64..5.0, 6),
            which in 0usize..3,
        ) {
            let p = &random_penalties()[which];
            let z = dv(&z);
            let sum = p.prox(&z, 1.0).unwrap() + p.prox_conjugate(&z).unwrap();
            prop_assert!((sum - &z).amax() <= 1e-14 * (1.0 + z.amax()));
        }

        #[test]
        fn prox_beats_competitors(
            z in proptest::collection::vec(-3.0f64..3.0, 6),
            y in proptest::collection::vec(-3.0f64..3.0, 6),
            g in 0.05f64..2.0,
            which in 0usize..3,
        ) {
            let p = &random_penalties()[which];
            let (z, y) = (dv(&z), dv(&y));
            let pz = p.prox(&z, g).unwrap();
            let at_prox = p.eval(&pz).unwrap() + (&z - &pz).norm_squared() / (2.0 * g);
            let at_y = p.eval(&y).unwrap() + (&z - &y).norm_squared() / (2.0 * g);
            prop_assert!(at_prox <= at_y + 1e-12);
        }
    }
}
