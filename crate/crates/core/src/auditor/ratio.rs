//! Supremum of the log density ratio of two equal-scale Laplace mixtures.
//!
//! Between consecutive centers every component is a pure exponential in the
//! output `a`, so each mixture has the form `αe^{-a/s} + βe^{a/s}` there and
//! the ratio of two of them has at most one interior extremum. The supremum is
//! therefore attained at a center, in one of the two tails, or at the extremum
//! of some interval, which golden-section search locates.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mechanisms::LaplaceMixture;
use crate::Real;

/// Where a supremum is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness<T> {
    At(T),
    NegInfinity,
    PosInfinity,
}

impl<T: Real> Witness<T> {
    pub fn finite(&self) -> Option<T> {
        match *self {
            Witness::At(a) => Some(a),
            _ => None,
        }
    }
}

impl<T: Real> fmt::Display for Witness<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::At(a) => write!(f, "{a}"),
            Witness::NegInfinity => f.write_str("-inf"),
            Witness::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl<T: Real> Serialize for Witness<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Witness::At(a) => serializer.serialize_f64(a.as_f64()),
            other => serializer.serialize_str(&other.to_string()),
        }
    }
}

/// `ln(a(x)/b(x))`.
pub fn log_ratio_at<T: Real>(a: &LaplaceMixture<T>, b: &LaplaceMixture<T>, x: T) -> T {
    a.log_density(x) - b.log_density(x)
}

/// Limits of `ln(a/b)` at `-∞` and `+∞`.
pub fn tail_limits<T: Real>(a: &LaplaceMixture<T>, b: &LaplaceMixture<T>) -> (T, T) {
    (
        a.log_lower_tail() - b.log_lower_tail(),
        a.log_upper_tail() - b.log_upper_tail(),
    )
}

fn check_scales<T: Real>(a: &LaplaceMixture<T>, b: &LaplaceMixture<T>) -> Result<()> {
    let (sa, sb) = (a.scale(), b.scale());
    if (sa - sb).abs() > T::epsilon() * T::lit(64.0) * sa.max(sb) {
        return Err(Error::ScaleMismatch(sa.as_f64(), sb.as_f64()));
    }
    Ok(())
}

/// `sup_x ln(a(x)/b(x))` and a point attaining it. Finite witnesses are
/// preferred over tail limits of equal value.
pub fn sup_log_ratio<T: Real>(
    a: &LaplaceMixture<T>,
    b: &LaplaceMixture<T>,
) -> Result<(T, Witness<T>)> {
    check_scales(a, b)?;
    let mut knots: Vec<T> = a.centers().chain(b.centers()).collect();
    knots.sort_by(|x, y| x.partial_cmp(y).expect("centers are finite"));
    knots.dedup();

    let f = |x: T| log_ratio_at(a, b, x);
    let mut best_value = T::neg_infinity();
    let mut best_at = Witness::At(knots[0]);
    let tie = T::epsilon() * T::lit(1024.0);
    let offer = |value: T, at: Witness<T>, best_value: &mut T, best_at: &mut Witness<T>| {
        if value > *best_value + tie {
            *best_value = value;
            *best_at = at;
        }
    };

    for &x in &knots {
        offer(f(x), Witness::At(x), &mut best_value, &mut best_at);
    }
    for pair in knots.windows(2) {
        let (x, v) = golden_section_max(&f, pair[0], pair[1]);
        offer(v, Witness::At(x), &mut best_value, &mut best_at);
    }
    let (lower, upper) = tail_limits(a, b);
    offer(lower, Witness::NegInfinity, &mut best_value, &mut best_at);
    offer(upper, Witness::PosInfinity, &mut best_value, &mut best_at);
    Ok((best_value, best_at))
}

fn golden_section_max<T: Real>(f: &impl Fn(T) -> T, lo: T, hi: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo <= T::epsilon() * T::lit(4.0) * T::one().max(hi.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix(scale: f64, parts: &[(f64, f64)]) -> LaplaceMixture<f64> {
        LaplaceMixture::from_weighted(scale, parts.iter().copied()).unwrap()
    }

    #[test]
    fn shifted_point_masses() {
        let (eps, at) = sup_log_ratio(&mix(1.0, &[(1.0, 1.0)]), &mix(1.0, &[(0.0, 1.0)])).unwrap();
        assert!((eps - 1.0).abs() < 1e-12);
        match at {
            Witness::At(a) => assert!(a >= 1.0 - 1e-12),
            Witness::PosInfinity => {}
            w => panic!("unexpected witness {w}"),
        }
    }

    #[test]
    fn cluster_example_b5() {
        let a = mix(1.0, &[(0.0, 0.5), (5.0, 0.5)]);
        let b = mix(1.0, &[(1.0, 0.5), (5.0, 0.5)]);
        let (eps, at) = sup_log_ratio(&a, &b).unwrap();
        let expect = ((1.0 + (-5f64).exp()) / ((-1f64).exp() + (-5f64).exp())).ln();
        assert!((eps - expect).abs() < 1e-12);
        assert!((eps - 0.988_565_420_571_308).abs() < 1e-6);
        assert!(at.finite().unwrap() <= 1e-12);
        assert!((log_ratio_at(&a, &b, at.finite().unwrap()) - eps).abs() < 1e-9);
    }

    #[test]
    fn identical_mixtures() {
        let a = mix(0.5, &[(0.0, 0.3), (2.0, 0.7)]);
        let (eps, _) = sup_log_ratio(&a, &a).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn scale_mismatch() {
        let err = sup_log_ratio(&mix(1.0, &[(0.0, 1.0)]), &mix(2.0, &[(0.0, 1.0)])).unwrap_err();
        assert_eq!(err, Error::ScaleMismatch(1.0, 2.0));
    }

    #[test]
    fn tail_witness_when_strictly_larger() {
        // a has more right-tail mass than b anywhere finite
        let a = mix(1.0, &[(0.0, 0.5), (3.0, 0.5)]);
        let b = mix(1.0, &[(0.0, 0.9), (3.0, 0.1)]);
        let (eps, _) = sup_log_ratio(&a, &b).unwrap();
        let (_, upper) = tail_limits(&a, &b);
        assert!((eps - upper).abs() < 1e-12);
    }

    #[test]
    fn single_precision() {
        let a = LaplaceMixture::<f32>::from_weighted(1.0, [(0.0, 0.5), (5.0, 0.5)]).unwrap();
        let b = LaplaceMixture::<f32>::from_weighted(1.0, [(1.0, 0.5), (5.0, 0.5)]).unwrap();
        let (eps, _) = sup_log_ratio(&a, &b).unwrap();
        assert!((eps - 0.988_565_4).abs() < 1e-5);
    }
}
