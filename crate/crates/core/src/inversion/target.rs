use crate::error::{Error, Result};
use crate::fem::ConductivityField;
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::Real;

/// Target conductivity families. Each element takes the value at its
/// centroid.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec<T> {
    Constant(T),
    /// `k = intercept + slope . x`
    Linear { intercept: T, slope: [T; 3] },
    /// `k = base + amplitude * exp(-(|x - center| / radius)^2)`. Only the
    /// first `center.len()` coordinates enter the distance.
    Gaussian {
        center: Vec<T>,
        radius: T,
        amplitude: T,
        base: T,
    },
    /// Disk of conductivity `k_disk` in a background `k_exte`, measured in
    /// the xy-plane. With `blend > 0` the indicator ramps linearly across a
    /// band of `blend` element sizes centred on the rim, which makes the
    /// element field continuous in the disk parameters.
    Disk {
        center: [T; 2],
        radius: T,
        k_disk: T,
        k_exte: T,
        blend: T,
    },
    /// Value `values[i]` on `breakpoints[i] <= x < breakpoints[i+1]`.
    Piecewise1D { breakpoints: Vec<T>, values: Vec<T> },
    /// Three vertical strips split at `x = splits[0]` and `x = splits[1]`.
    ThreeRegion2D { splits: [T; 2], values: [T; 3] },
}

impl<T: Real> TargetSpec<T> {
    /// `k = 2 - x`.
    pub fn linear_decreasing() -> Self {
        TargetSpec::Linear {
            intercept: T::lit(2.0),
            slope: [-T::one(), T::zero(), T::zero()],
        }
    }

    /// `k = 1 + 4 exp(-(|x - center| / 0.2)^2)`.
    pub fn gaussian_bump(center: Vec<T>) -> Self {
        TargetSpec::Gaussian {
            center,
            radius: T::lit(0.2),
            amplitude: T::lit(4.0),
            base: T::one(),
        }
    }

    /// Disk `k_disk = 5`, `k_exte = 1`, `r0 = 0.25` centred at (0.5, 0.5).
    pub fn reference_disk(blend: T) -> Self {
        TargetSpec::Disk {
            center: [T::lit(0.5), T::lit(0.5)],
            radius: T::lit(0.25),
            k_disk: T::lit(5.0),
            k_exte: T::one(),
            blend,
        }
    }

    /// Strips of conductivity 1, 10.1, 1 over `[0, 3] x [0, 1]`.
    pub fn three_region() -> Self {
        TargetSpec::ThreeRegion2D {
            splits: [T::one(), T::lit(2.0)],
            values: [T::one(), T::lit(10.1), T::one()],
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            TargetSpec::Constant(v) => positive("constant conductivity", *v),
            TargetSpec::Linear { .. } => Ok(()),
            TargetSpec::Gaussian {
                center,
                radius,
                amplitude,
                base,
            } => {
                if center.is_empty() || center.len() > 3 {
                    return Err(Error::invalid("gaussian center needs 1 to 3 coordinates"));
                }
                positive("gaussian radius", *radius)?;
                positive("gaussian base", *base)?;
                positive("gaussian peak", *base + *amplitude)
            }
            TargetSpec::Disk {
                radius,
                k_disk,
                k_exte,
                blend,
                ..
            } => {
                if dim < 2 {
                    return Err(Error::invalid("disk target needs a 2-D or 3-D mesh"));
                }
                positive("disk radius", *radius)?;
                positive("k_disk", *k_disk)?;
                positive("k_exte", *k_exte)?;
                if !(*blend >= T::zero()) {
                    return Err(Error::invalid("disk blend width must be non-negative"));
                }
                Ok(())
            }
            TargetSpec::Piecewise1D { breakpoints, values } => {
                if breakpoints.len() != values.len() + 1 || values.is_empty() {
                    return Err(Error::invalid("piecewise target needs one more breakpoint than values"));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("breakpoints must be strictly increasing"));
                }
                values.iter().try_for_each(|&v| positive("piecewise value", v))
            }
            TargetSpec::ThreeRegion2D { splits, values } => {
                if dim < 2 {
                    return Err(Error::invalid("three-region target needs a 2-D mesh"));
                }
                if !(splits[0] < splits[1]) {
                    return Err(Error::invalid("three-region splits must increase"));
                }
                values.iter().try_for_each(|&v| positive("region value", v))
            }
        }
    }

    /// Value at point `x` for an element of size `h` (only the blended disk
    /// depends on `h`).
    pub fn value_at(&self, x: &[T; 3], h: T) -> T {
        match self {
            TargetSpec::Constant(v) => *v,
            TargetSpec::Linear { intercept, slope } => {
                *intercept + slope[0] * x[0] + slope[1] * x[1] + slope[2] * x[2]
            }
            TargetSpec::Gaussian {
                center,
                radius,
                amplitude,
                base,
            } => {
                let d2: T = center.iter().zip(x).map(|(&c, &p)| (p - c) * (p - c)).sum();
                *base + *amplitude * (-d2 / (*radius * *radius)).exp()
            }
            TargetSpec::Disk {
                center,
                radius,
                k_disk,
                k_exte,
                blend,
            } => {
                let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                let inside = disk_fraction(d, *radius, *blend * h);
                *k_exte + (*k_disk - *k_exte) * inside
            }
            TargetSpec::Piecewise1D { breakpoints, values } => {
                let i = breakpoints[1..]
                    .iter()
                    .position(|&b| x[0] < b)
                    .unwrap_or(values.len() - 1);
                values[i]
            }
            TargetSpec::ThreeRegion2D { splits, values } => {
                if x[0] < splits[0] {
                    values[0]
                } else if x[0] < splits[1] {
                    values[1]
                } else {
                    values[2]
                }
            }
        }
    }
}

/// Fraction of an element at distance `d` from the centre lying inside a
/// disk of radius `r`, with a linear ramp of width `w` (sharp for `w = 0`).
pub(crate) fn disk_fraction<T: Real>(d: T, r: T, w: T) -> T {
    if w > T::zero() {
        ((r - d) / w + T::lit(0.5)).max(T::zero()).min(T::one())
    } else if d < r {
        T::one()
    } else {
        T::zero()
    }
}

/// Element conductivity sampled at centroids.
pub fn build_target<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    spec: &TargetSpec<T>,
) -> Result<ConductivityField<T>> {
    spec.validate(mesh.dim())?;
    let values: Vec<T> = (0..mesh.element_count())
        .map(|e| spec.value_at(geom.centroid(e), geom.size(e)))
        .collect();
    if let Some(e) = values.iter().position(|v| !(*v > T::zero())) {
        return Err(Error::NonPositiveConductivity {
            element: e,
            value: values[e].to_f64_lossy(),
        });
    }
    ConductivityField::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_geometry, generate_box_mesh};

    #[test]
    fn constant_and_linear() {
        let m = generate_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let k = build_target(&m, &g, &TargetSpec::Constant(2.0)).unwrap();
        assert!(k.values().iter().all(|&v| v == 2.0));
        let lin = TargetSpec::<f64>::linear_decreasing();
        assert_eq!(lin.value_at(&[0.5, 0.3, 0.0], 0.1), 1.5);
        let k = build_target(&m, &g, &lin).unwrap();
        for e in 0..m.element_count() {
            assert!((k.values()[e] - (2.0 - g.centroid(e)[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn sharp_disk_values() {
        let disk = TargetSpec::<f64>::reference_disk(0.0);
        assert_eq!(disk.value_at(&[0.7, 0.5, 0.0], 0.05), 5.0);
        assert_eq!(disk.value_at(&[0.5, 0.8, 0.0], 0.05), 1.0);
        let blended = TargetSpec::<f64>::reference_disk(1.0);
        assert_eq!(blended.value_at(&[0.7, 0.5, 0.0], 0.05), 5.0);
        assert_eq!(blended.value_at(&[0.5, 0.8, 0.0], 0.05), 1.0);
        assert!((blended.value_at(&[0.75, 0.5, 0.0], 0.05) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn disk_rejected_in_1d() {
        let m = generate_box_mesh(&[0.0f64], &[1.0], &[4]).unwrap();
        let g = compute_geometry(&m).unwrap();
        assert!(build_target(&m, &g, &TargetSpec::<f64>::reference_disk(0.0)).is_err());
    }

    #[test]
    fn gaussian_peak_and_nonpositive_linear() {
        let gs = TargetSpec::<f64>::gaussian_bump(vec![0.5, 0.5]);
        assert!((gs.value_at(&[0.5, 0.5, 0.7], 0.1) - 5.0).abs() < 1e-15);
        assert!((gs.value_at(&[0.7, 0.5, 0.0], 0.1) - (1.0 + 4.0 * (-1.0f64).exp())).abs() < 1e-14);
        let m = generate_box_mesh(&[0.0f64], &[3.0], &[6]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let bad = build_target(&m, &g, &TargetSpec::<f64>::linear_decreasing());
        assert!(matches!(bad, Err(Error::NonPositiveConductivity { .. })));
    }

    #[test]
    fn strips_and_piecewise() {
        let m = generate_box_mesh(&[0.0, 0.0], &[3.0, 1.0], &[6, 2]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let k = build_target(&m, &g, &TargetSpec::three_region()).unwrap();
        for e in 0..m.element_count() {
            let x = g.centroid(e)[0];
            let expect = if (1.0..2.0).contains(&x) { 10.1 } else { 1.0 };
            assert_eq!(k.values()[e], expect);
        }
        let pw = TargetSpec::Piecewise1D {
            breakpoints: vec![0.0, 0.5, 1.0],
            values: vec![3.0, 4.0],
        };
        assert_eq!(pw.value_at(&[0.25, 0.0, 0.0], 0.1), 3.0);
        assert_eq!(pw.value_at(&[0.75, 0.0, 0.0], 0.1), 4.0);
    }
}
