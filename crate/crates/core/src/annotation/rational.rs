use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Exact beat position or length, always kept in lowest terms with a
/// positive denominator. Written `n` or `n/d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError(pub String);

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };

    /// Returns `None` when `den` is zero.
    pub fn new(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1);
        let sign: i128 = if den < 0 { -1 } else { 1 };
        let n = sign * (num as i128) / g as i128;
        let d = sign * (den as i128) / g as i128;
        Some(Self {
            num: i64::try_from(n).ok()?,
            den: i64::try_from(d).ok()?,
        })
    }

    pub fn integer(n: i64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |why: &str| ParseRationalError(format!("{s:?}: {why}"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, Some(d)),
            None => (s, None),
        };
        let unsigned = n.strip_prefix('-').unwrap_or(n);
        if !is_digits(unsigned) {
            return Err(err("numerator must be an optionally negative integer"));
        }
        let num: i64 = n.parse().map_err(|_| err("numerator out of range"))?;
        let den: i64 = match d {
            None => 1,
            Some(d) => {
                if !is_digits(d) {
                    return Err(err("denominator must be a positive integer"));
                }
                d.parse().map_err(|_| err("denominator out of range"))?
            }
        };
        Rational::new(num, den).ok_or_else(|| err("zero denominator"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms() {
        let r = Rational::new(2, 4).unwrap();
        assert_eq!((r.numerator(), r.denominator()), (1, 2));
        assert_eq!(Rational::new(3, -6).unwrap().to_string(), "-1/2");
        assert_eq!(Rational::new(0, 5).unwrap(), Rational::ZERO);
        assert_eq!(Rational::new(8, 4).unwrap().to_string(), "2");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3/2".parse::<Rational>().unwrap(), Rational::new(3, 2).unwrap());
        assert_eq!("-7".parse::<Rational>().unwrap(), Rational::integer(-7));
        for bad in ["", "1/0", "1.5", "a", "1/", "/2", "+1", "1/-2", "1/2/3", "--1"] {
            assert!(bad.parse::<Rational>().is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn ordering_is_by_value() {
        let a: Rational = "1/3".parse().unwrap();
        let b: Rational = "1/2".parse().unwrap();
        assert!(a < b);
        assert_eq!("2/6".parse::<Rational>().unwrap().cmp(&a), Ordering::Equal);
    }
}
