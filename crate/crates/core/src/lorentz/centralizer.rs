//! Lie-algebra centralizers of Moebius transformations.

use super::{j_matrix, max_abs, Mat5, MoebiusElement};
use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Basis of so(4,1): `K` with `K^T J + J K = 0`. Every such matrix is `J A`
/// with `A` antisymmetric, giving the ten generators `J (E_ij - E_ji)`, i < j.
pub fn so41_basis() -> Vec<Mat5> {
    let j = j_matrix();
    let mut out = Vec::with_capacity(10);
    for i in 0..5 {
        for k in (i + 1)..5 {
            let mut a = Mat5::zeros();
            a[(i, k)] = 1.0;
            a[(k, i)] = -1.0;
            out.push(j * a);
        }
    }
    out
}

/// One-parameter subgroup `exp(t K)` for `K` in so(4,1).
pub fn exp_so41(k: &Mat5, t: f64) -> MoebiusElement {
    MoebiusElement::from_matrix_unchecked((k * t).exp()).renormalized()
}

/// Basis of the centralizer of `g` inside so(4,1): the kernel of the linear
/// map `K -> g K - K g` on the ten-dimensional algebra, extracted by SVD.
///
/// Fails with `AmbiguousCentralizer` when `g` is numerically the identity,
/// whose centralizer is everything and carries no axis information.
pub fn centralizer_generators(g: &MoebiusElement, tol: &Tolerances) -> Result<Vec<Mat5>> {
    if g.distance_from_identity() < tol.eig {
        return Err(Error::AmbiguousCentralizer);
    }
    let basis = so41_basis();
    let m = g.matrix();
    let mut a = nalgebra::DMatrix::<f64>::zeros(25, basis.len());
    for (col, k) in basis.iter().enumerate() {
        let c = m * k - k * m;
        for idx in 0..25 {
            a[(idx, col)] = c[idx];
        }
    }
    let svd = a
        .try_svd(true, true, f64::EPSILON, 100_000)
        .expect("singular value iteration failed to converge");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let v_t = svd.v_t.expect("requested V^T");
    let mut out = Vec::new();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= tol.rank.max(1e-12) * smax.max(1e-300) {
            let mut k = Mat5::zeros();
            for (b, kb) in basis.iter().enumerate() {
                k += kb * v_t[(i, b)];
            }
            out.push(k);
        }
    }
    Ok(out)
}

/// Residual `max |g h g^{-1} - h|`, scaled by the largest norm the
/// conjugated matrix can reach, measuring how far `h` is from commuting
/// with `g` as group elements. The scaling makes the residual relative:
/// conjugating by a large-norm `g` rounds at `eps * |g|^2 * |h|` even for
/// exact commuters, so an absolute residual would be meaningless there,
/// while genuine non-commuters still measure far above any tolerance.
pub fn commutation_residual(g: &MoebiusElement, h: &MoebiusElement) -> f64 {
    let ghg = h.conjugate_by(g);
    let gn = max_abs(g.matrix());
    let hn = max_abs(h.matrix());
    let scale = (gn * gn * hn).max(1.0);
    max_abs(&(ghg.matrix() - h.matrix())) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::Vec3;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn algebra_basis_satisfies_the_defining_relation() {
        let j = j_matrix();
        for k in so41_basis() {
            assert!(max_abs(&(k.transpose() * j + j * k)) < 1e-15);
        }
    }

    #[test]
    fn exponentials_land_in_the_group() {
        for (i, k) in so41_basis().iter().enumerate() {
            let g = exp_so41(k, 0.3 + 0.1 * i as f64);
            assert!(g.form_residual() < 1e-12);
        }
    }

    #[test]
    fn exponential_of_the_chart_scaling_generator() {
        // J(E_04 - E_40) = -(E_04 + E_40); its exponential at -t is the
        // boost of rapidity t, i.e. the chart scaling by e^t.
        let basis = so41_basis();
        let k04 = basis[3]; // pairs in order (0,1),(0,2),(0,3),(0,4),...
        let g = exp_so41(&k04, -0.7);
        let expected = MoebiusElement::scaling((0.7f64).exp()).unwrap();
        assert!(g.matrix_distance(&expected) < 1e-12);
    }

    #[test]
    fn centralizer_dimensions_by_kind() {
        let t = tols();
        let nonrotating = MoebiusElement::scaling(2.0).unwrap();
        assert_eq!(centralizer_generators(&nonrotating, &t).unwrap().len(), 4);

        let rotating = MoebiusElement::scaling(2.0)
            .unwrap()
            .compose(&MoebiusElement::rotation(Vec3::z(), 0.7).unwrap());
        assert_eq!(centralizer_generators(&rotating, &t).unwrap().len(), 2);

        let singular = MoebiusElement::rotation(Vec3::z(), 1.3).unwrap();
        assert_eq!(centralizer_generators(&singular, &t).unwrap().len(), 4);
    }

    #[test]
    fn centralizer_generators_commute_after_exponentiation() {
        let g = MoebiusElement::scaling(2.0)
            .unwrap()
            .compose(&MoebiusElement::rotation(Vec3::z(), 0.7).unwrap());
        for k in centralizer_generators(&g, &tols()).unwrap() {
            let h = exp_so41(&k, 0.45);
            assert!(commutation_residual(&g, &h) < 1e-9);
        }
    }

    #[test]
    fn identity_has_ambiguous_centralizer() {
        let err = centralizer_generators(&MoebiusElement::identity(), &tols());
        assert!(matches!(err, Err(Error::AmbiguousCentralizer)));
    }

    #[test]
    fn conjugation_transports_centralizers() {
        let g = MoebiusElement::scaling(3.0).unwrap();
        let h = MoebiusElement::translation(Vec3::new(1.0, 0.5, -0.2));
        let conj = g.conjugate_by(&h);
        let gens = centralizer_generators(&conj, &tols()).unwrap();
        assert_eq!(gens.len(), 4);
        for k in gens {
            assert!(commutation_residual(&conj, &exp_so41(&k, 0.2)) < 1e-9);
        }
    }
}
