//! Exact rational helpers: parsing, dyadic checks, conversions and a
//! fraction-exact Gaussian elimination.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `p/q` with positive integers or a terminating decimal such as
/// `0.375` or `1`.
pub fn parse_probability(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        if !is_digits(p) || !is_digits(q) {
            return None;
        }
        let p: BigInt = p.parse().ok()?;
        let q: BigInt = q.parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !(whole.is_empty() || is_digits(whole)) || !(frac.is_empty() || is_digits(frac)) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Some(Rational::new(numer, denom))
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Returns `k` when the reduced denominator is `2^k`.
pub fn dyadic_exponent(r: &Rational) -> Option<u32> {
    let d = r.denom();
    if !d.is_positive() {
        return None;
    }
    let bits = d.bits();
    if bits == 0 {
        return None;
    }
    let k = bits - 1;
    if *d == BigInt::one() << k {
        Some(k as u32)
    } else {
        None
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Rounds a float to the nearest multiple of `1/scale`.
pub fn quantize(value: f64, scale: i64) -> Rational {
    let n = (value * scale as f64).round() as i64;
    Rational::new(BigInt::from(n), BigInt::from(scale))
}

/// Solves `a * x = b` for a square `a` and several right-hand sides at once.
/// Returns `None` when `a` is singular.
pub fn solve_exact(
    mut a: Vec<Vec<Rational>>,
    mut b: Vec<Vec<Rational>>,
) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for k in col..n {
            a[col][k] = &a[col][k] * &inv;
        }
        for rhs in b[col].iter_mut() {
            *rhs = &*rhs * &inv;
        }
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone();
            for k in col..n {
                let delta = &factor * &a[col][k];
                a[row][k] -= delta;
            }
            let (pivot_rhs, target_rhs) = if row < col {
                let (lo, hi) = b.split_at_mut(col);
                (&hi[0], &mut lo[row])
            } else {
                let (lo, hi) = b.split_at_mut(row);
                (&lo[col], &mut hi[0])
            };
            for (t, p) in target_rhs.iter_mut().zip(pivot_rhs) {
                *t -= &factor * p;
            }
        }
    }
    Some(b)
}

/// Gaussian elimination with partial pivoting in binary64.
pub fn solve_f64(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let (pivot, best) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if best < 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_probability("1/2"), Some(rat(1, 2)));
        assert_eq!(parse_probability("6/8"), Some(rat(3, 4)));
        assert_eq!(parse_probability("0.375"), Some(rat(3, 8)));
        assert_eq!(parse_probability("1"), Some(int(1)));
        assert_eq!(parse_probability(".5"), Some(rat(1, 2)));
        assert_eq!(parse_probability("1/0"), None);
        assert_eq!(parse_probability("-1/2"), None);
        assert_eq!(parse_probability("1e-3"), None);
        assert_eq!(parse_probability(""), None);
        assert_eq!(parse_probability("."), None);
    }

    #[test]
    fn dyadic_detection() {
        assert_eq!(dyadic_exponent(&rat(3, 8)), Some(3));
        assert_eq!(dyadic_exponent(&int(1)), Some(0));
        assert_eq!(dyadic_exponent(&rat(1, 3)), None);
        assert_eq!(dyadic_exponent(&rat(2, 6)), None);
    }

    #[test]
    fn exact_solve_small_system() {
        // x + y = 3, x - y = 1
        let a = vec![vec![int(1), int(1)], vec![int(1), int(-1)]];
        let b = vec![vec![int(3)], vec![int(1)]];
        let x = solve_exact(a, b).unwrap();
        assert_eq!(x, vec![vec![int(2)], vec![int(1)]]);
    }

    #[test]
    fn exact_solve_needs_pivot_swap() {
        let a = vec![vec![int(0), int(2)], vec![int(3), int(1)]];
        let b = vec![vec![int(4), int(2)], vec![int(5), int(1)]];
        let x = solve_exact(a, b).unwrap();
        assert_eq!(x[0], vec![int(1), rat(0, 1)]);
        assert_eq!(x[1], vec![int(2), int(1)]);
    }

    #[test]
    fn singular_is_reported() {
        let a = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert!(solve_exact(a, vec![vec![int(1)], vec![int(2)]]).is_none());
        assert!(solve_f64(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn quantize_rounds() {
        assert_eq!(quantize(0.4, 1_000_000_000_000), rat(2, 5));
    }
}
