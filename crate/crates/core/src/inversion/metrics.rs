use crate::adjoint::Measurement;
use crate::error::{Error, Result};
use crate::fem::{BoundaryFlux, ConductivityField};
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::Real;

/// `sqrt(sum (f - f_m)^2 |face| / sum f_m^2 |face|)`, both sums running over
/// all faces of all measurements.
pub fn flux_error_norm<T: Real>(
    mesh: &SimplexMesh<T>,
    computed: &[BoundaryFlux<T>],
    measurements: &[Measurement<T>],
) -> Result<T> {
    if computed.len() != measurements.len() {
        return Err(Error::invalid("one computed flux per measurement is required"));
    }
    let faces = mesh.boundary_faces();
    let (mut num, mut den) = (T::zero(), T::zero());
    for (f, m) in computed.iter().zip(measurements) {
        if f.values.len() != faces.len() || m.target_flux.values.len() != faces.len() {
            return Err(Error::invalid("flux length differs from boundary face count"));
        }
        for ((face, &c), &t) in faces.iter().zip(&f.values).zip(&m.target_flux.values) {
            num += (c - t) * (c - t) * face.measure;
            den += t * t * face.measure;
        }
    }
    if den == T::zero() {
        return Err(Error::invalid("measured flux is identically zero"));
    }
    Ok((num / den).sqrt())
}

/// Volume-weighted `|k - k_t|_2 / |k_t|_2`.
pub fn k_l2_error<T: Real>(
    k: &ConductivityField<T>,
    k_target: &ConductivityField<T>,
    geom: &ElementGeometry<T>,
) -> Result<T> {
    if k.len() != k_target.len() || k.len() != geom.element_count() {
        return Err(Error::invalid("conductivity lengths differ"));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (e, (&a, &b)) in k.values().iter().zip(k_target.values()).enumerate() {
        let v = geom.volume(e);
        num += (a - b) * (a - b) * v;
        den += b * b * v;
    }
    if den == T::zero() {
        return Err(Error::invalid("target conductivity has zero norm"));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_geometry, generate_box_mesh};

    #[test]
    fn k_error_identities() {
        let m = generate_box_mesh(&[0.0, 0.0], &[1.0, 2.0], &[3, 2]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let t = ConductivityField::new((0..m.element_count()).map(|e| 1.0 + e as f64).collect()).unwrap();
        assert_eq!(k_l2_error(&t, &t, &g).unwrap(), 0.0);
        let twice = t.scaled(2.0).unwrap();
        assert!((k_l2_error(&twice, &t, &g).unwrap() - 1.0).abs() < 1e-15);
    }
}
