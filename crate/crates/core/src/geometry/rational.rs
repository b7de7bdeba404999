use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always stored in reduced form with a positive
/// denominator (guaranteed by `num-rational`).
pub type RationalScalar = BigRational;

/// Exact projection onto the simplex by the same sort-and-threshold rule as the
/// float path, so supports and ties agree.
pub fn project_simplex_exact(v: &[RationalScalar]) -> Vec<RationalScalar> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].cmp(&v[i]));

    let one = RationalScalar::one();
    let mut cum = RationalScalar::zero();
    let mut theta = &v[order[0]] - &one;
    for (j, &i) in order.iter().enumerate() {
        cum += &v[i];
        let t = (&cum - &one) / RationalScalar::from_integer(BigInt::from(j + 1));
        if (&v[i] - &t).is_positive() {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| {
            let d = x - &theta;
            if d.is_positive() {
                d
            } else {
                RationalScalar::zero()
            }
        })
        .collect()
}

/// The exact value of a finite double.
pub fn rational_from_f64(x: f64) -> RationalScalar {
    BigRational::from_float(x).expect("finite input")
}

/// Nearest double; falls back to a quotient of doubles for huge terms.
pub fn rational_to_f64(x: &RationalScalar) -> f64 {
    if let Some(f) = x.to_f64() {
        if f.is_finite() {
            return f;
        }
    }
    // Shift both terms down so they fit in a double before dividing.
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift = (nb.max(db) - 1000).max(0) as usize;
    let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
    let d = (x.denom() >> shift).to_f64().unwrap_or(1.0);
    n / d
}
