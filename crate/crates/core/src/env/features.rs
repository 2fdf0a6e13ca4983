use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::FeatureMap;

/// `φ'(x, a) = Aᵀφ(x, a)`. Rewards `θᵀφ` are reproduced by `θ' = A⁻¹θ`.
pub fn transform_features(features: &FeatureMap, a: &DMatrix<f64>) -> Result<FeatureMap> {
    let d = features.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::dims(format!("transform is {}x{}, features have dimension {d}", a.nrows(), a.ncols())));
    }
    let det = a.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::SingularMatrix(det));
    }
    let mut out = features.clone();
    for x in 0..features.n_states() {
        for act in 0..features.n_actions() {
            let src = features.get(x, act);
            let dst = out.get_mut(x, act);
            for (j, o) in dst.iter_mut().enumerate() {
                *o = (0..d).map(|i| a[(i, j)] * src[i]).sum();
            }
        }
    }
    Ok(out)
}

/// Square matrix with i.i.d. uniform `[0, 1)` entries, redrawn until it is
/// comfortably invertible.
pub fn random_transform(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>());
        if m.determinant().abs() > 1e-6 {
            return m;
        }
    }
}

/// Adds independent uniform noise from `[-M_i/2, M_i/2]` to component `i` of
/// every feature vector, where `M_i` is the largest value of that component.
pub fn perturb_features(features: &FeatureMap, seed: u64) -> FeatureMap {
    let d = features.dim();
    let mut max = vec![f64::NEG_INFINITY; d];
    for chunk in features.values().chunks(d.max(1)) {
        for (m, v) in max.iter_mut().zip(chunk) {
            *m = m.max(*v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = features.clone();
    for chunk in out.values_mut().chunks_mut(d.max(1)) {
        for (v, &m) in chunk.iter_mut().zip(&max) {
            let u: f64 = rng.random();
            *v += m * (u - 0.5);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::VectorQTable;

    #[test]
    fn identity_and_scaling() {
        let f = VectorQTable::random(4, 2, 3, 1);
        assert_eq!(transform_features(&f, &DMatrix::identity(3, 3)).unwrap(), f);
        let doubled = transform_features(&f, &(DMatrix::identity(3, 3) * 2.0)).unwrap();
        for (a, b) in doubled.values().iter().zip(f.values()) {
            assert_eq!(*a, 2.0 * b);
        }
        let theta = [0.5, -1.0, 2.0];
        let half: Vec<f64> = theta.iter().map(|t| t / 2.0).collect();
        let (r1, r2) = (f.dot(&theta), doubled.dot(&half));
        assert!(r1.sup_distance(&r2) < 1e-15);
    }

    #[test]
    fn random_transform_spans_same_rewards() {
        let f = VectorQTable::random(10, 4, 5, 2);
        let a = random_transform(5, 3);
        let g = transform_features(&f, &a).unwrap();
        let theta = nalgebra::DVector::from_vec(vec![0.3, -0.7, 0.1, 0.9, -0.4]);
        let theta_prime = a.clone().lu().solve(&theta).unwrap();
        let r1 = f.dot(theta.as_slice());
        let r2 = g.dot(theta_prime.as_slice());
        assert!(r1.sup_distance(&r2) <= 1e-10);
    }

    #[test]
    fn singular_transform_rejected() {
        let f = VectorQTable::random(2, 2, 2, 0);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(transform_features(&f, &singular), Err(Error::SingularMatrix(_))));
        assert!(transform_features(&f, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn perturbation_range_and_determinism() {
        let zero = VectorQTable::zeros(3, 2, 2);
        assert_eq!(perturb_features(&zero, 5), zero);

        let f = VectorQTable::random(20, 4, 5, 4);
        let p = perturb_features(&f, 9);
        assert_eq!(p, perturb_features(&f, 9));
        assert_ne!(p, perturb_features(&f, 10));
        let mut max = [f64::NEG_INFINITY; 5];
        for c in f.values().chunks(5) {
            for k in 0..5 {
                max[k] = max[k].max(c[k]);
            }
        }
        for (orig, pert) in f.values().chunks(5).zip(p.values().chunks(5)) {
            for k in 0..5 {
                assert!((pert[k] - orig[k]).abs() <= max[k] / 2.0);
            }
        }
    }
}
