use super::KernelEval;
use crate::error::{invalid, Result};
use crate::graph::{EdgeIx, GraphPoint, ScatteringMatrix, VertexCondition};
use crate::math::{exp, ln, sqrt, PI};
use alloc::format;

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("t", format!("time must be positive, got {t}")))
    }
}

/// Heat kernel of the real line at distance `d`: `exp(-d²/4t) / sqrt(4πt)`.
pub fn gauss_free(t: f64, d: f64) -> Result<f64> {
    check_time(t)?;
    Ok(gauss(t, d))
}

#[inline]
pub(crate) fn gauss(t: f64, d: f64) -> f64 {
    exp(-d * d / (4.0 * t)) / sqrt(4.0 * PI * t)
}

/// Heat kernel of the star of half-lines meeting at one vertex with
/// scattering matrix `sigma`. Points are `(leg, distance from the vertex)`.
pub fn kernel_star(sigma: &ScatteringMatrix, t: f64, x: (usize, f64), y: (usize, f64)) -> Result<f64> {
    check_time(t)?;
    let d = sigma.degree();
    let ((a, s1), (b, s2)) = (x, y);
    if a >= d || b >= d {
        return Err(invalid("leg", format!("index out of range for degree {d}")));
    }
    if !(s1 >= 0.0 && s2 >= 0.0) {
        return Err(invalid("s", "distances from the vertex must be nonnegative"));
    }
    let direct = if a == b { exp(-(s1 - s2) * (s1 - s2) / (4.0 * t)) } else { 0.0 };
    let scattered = sigma.get(a, b) * exp(-(s1 + s2) * (s1 + s2) / (4.0 * t));
    Ok((direct + scattered) / sqrt(4.0 * PI * t))
}

/// Heat kernel of `[0, length]` by the method of images. The reflection at
/// a Neumann (Kirchhoff) end keeps the sign, at a Dirichlet end flips it.
pub fn kernel_interval(
    length: f64,
    left: VertexCondition,
    right: VertexCondition,
    t: f64,
    x: f64,
    y: f64,
) -> Result<KernelEval> {
    check_time(t)?;
    if !(length > 0.0) {
        return Err(invalid("length", "must be positive"));
    }
    for (name, p) in [("x", x), ("y", y)] {
        if !(0.0..=length).contains(&p) {
            return Err(invalid(name, format!("{p} outside [0, {length}]")));
        }
    }
    let sign = |c| match c {
        VertexCondition::Kirchhoff => 1.0,
        VertexCondition::Dirichlet => -1.0,
    };
    let (r0, r1) = (sign(left), sign(right));
    let tol: f64 = 1e-16;
    let reach = 2.0 * length + sqrt(4.0 * t * ln(1.0 / tol));
    let mut n_max = crate::math::ceil(reach / (2.0 * length)) as i64 + 1;
    let tail = |n: i64| {
        let u = 2.0 * n as f64 * length;
        let q = exp(-2.0 * n as f64 * length * length / t);
        4.0 * gauss(t, u) / (1.0 - q)
    };
    while tail(n_max) >= 1e-15 {
        n_max += 1;
    }
    let mut value = 0.0;
    for n in -n_max..=n_max {
        let shift = 2.0 * n as f64 * length;
        let parity = if n.unsigned_abs() % 2 == 1 { r0 * r1 } else { 1.0 };
        value += parity * (gauss(t, x - y - shift) + r0 * gauss(t, x + y - shift));
    }
    Ok(KernelEval {
        t,
        x: GraphPoint::new(EdgeIx(0), x),
        y: GraphPoint::new(EdgeIx(0), y),
        value,
        tail_bound: tail(n_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{MetricGraph, VertexCondition::*, VertexIx};
    use crate::quadrature::simpson;

    #[test]
    fn free_kernel_values() {
        assert!((gauss_free(0.25, 0.0).unwrap() - 1.0 / sqrt(PI)).abs() < 1e-15);
        assert_eq!(gauss_free(0.3, 0.7).unwrap(), gauss_free(0.3, -0.7).unwrap());
        assert!(gauss_free(0.0, 1.0).is_err());
        assert!(gauss_free(-1.0, 1.0).is_err());
        // Normalization on a window wide enough that the Gaussian tail is
        // below machine precision.
        let total = simpson(|u| gauss(0.1, u), -6.0, 6.0, 1e-3);
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn star_kernel_cases() {
        let s3 = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let sig = s3.scattering_matrix(VertexIx(0)).unwrap();
        let v = kernel_star(&sig, 0.01, (0, 0.0), (0, 0.0)).unwrap();
        assert!((v - (2.0 / 3.0) / sqrt(0.04 * PI)).abs() < 1e-12);
        assert!((v - 1.880632).abs() < 1e-6);

        let s2 = MetricGraph::star(&[1.0, 1.0], Kirchhoff).unwrap();
        let sig2 = s2.scattering_matrix(VertexIx(0)).unwrap();
        for t in [0.01, 0.1, 1.0] {
            assert_eq!(kernel_star(&sig2, t, (0, 0.3), (1, 0.4)).unwrap(), gauss_free(t, 0.7).unwrap());
        }

        let leaf = MetricGraph::interval(1.0, Dirichlet, Kirchhoff).unwrap();
        let sd = leaf.scattering_matrix(VertexIx(0)).unwrap();
        assert_eq!(kernel_star(&sd, 0.1, (0, 0.0), (0, 0.0)).unwrap(), 0.0);

        let a = kernel_star(&sig, 0.05, (0, 0.2), (2, 0.7)).unwrap();
        let b = kernel_star(&sig, 0.05, (2, 0.7), (0, 0.2)).unwrap();
        assert_eq!(a, b);
        assert!(kernel_star(&sig, 0.05, (3, 0.2), (0, 0.1)).is_err());
        assert!(kernel_star(&sig, 0.0, (0, 0.2), (0, 0.1)).is_err());
    }

    // Eigenfunction expansions: cos(nπx) for Neumann, sin(nπx) for Dirichlet.
    fn cosine_series(t: f64, x: f64, y: f64) -> f64 {
        1.0 + (1..400)
            .map(|n| {
                let k = n as f64 * PI;
                2.0 * crate::math::cos(k * x) * crate::math::cos(k * y) * exp(-k * k * t)
            })
            .sum::<f64>()
    }

    fn sine_series(t: f64, x: f64, y: f64) -> f64 {
        (1..400)
            .map(|n| {
                let k = n as f64 * PI;
                2.0 * crate::math::sin(k * x) * crate::math::sin(k * y) * exp(-k * k * t)
            })
            .sum()
    }

    #[test]
    fn interval_matches_eigen_expansions() {
        let nn = kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.05, 0.5, 0.5).unwrap();
        let dd = kernel_interval(1.0, Dirichlet, Dirichlet, 0.05, 0.5, 0.5).unwrap();
        assert!((nn.value - cosine_series(0.05, 0.5, 0.5)).abs() < 1e-12);
        assert!((dd.value - sine_series(0.05, 0.5, 0.5)).abs() < 1e-12);
        assert!((nn.value - 1.278566).abs() < 1e-6);
        assert!((dd.value - 1.244566).abs() < 1e-6);
        assert!(nn.tail_bound < 1e-14);
        for &(x, y, t) in &[(0.1, 0.9, 0.3), (0.0, 0.4, 0.02), (0.77, 0.31, 2.0)] {
            let a = kernel_interval(1.0, Kirchhoff, Kirchhoff, t, x, y).unwrap().value;
            assert!((a - cosine_series(t, x, y)).abs() < 1e-12);
            let b = kernel_interval(1.0, Dirichlet, Dirichlet, t, x, y).unwrap().value;
            assert!((b - sine_series(t, x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_interval_matches_quarter_wave_series() {
        // Dirichlet at 0, Neumann at 1: modes sqrt(2) sin((n+1/2)πx).
        let (t, x, y) = (0.07, 0.3, 0.8);
        let series: f64 = (0..400)
            .map(|n| {
                let k = (n as f64 + 0.5) * PI;
                2.0 * crate::math::sin(k * x) * crate::math::sin(k * y) * exp(-k * k * t)
            })
            .sum();
        let v = kernel_interval(1.0, Dirichlet, Kirchhoff, t, x, y).unwrap().value;
        assert!((v - series).abs() < 1e-12);
    }

    #[test]
    fn interval_boundary_and_errors() {
        for y in [0.0, 0.3, 1.0] {
            let v = kernel_interval(1.0, Dirichlet, Dirichlet, 0.1, 0.0, y).unwrap().value;
            assert!(v.abs() < 1e-15);
        }
        assert!(kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.0, 0.5, 0.5).is_err());
        assert!(kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.1, 1.5, 0.5).is_err());
    }
}
