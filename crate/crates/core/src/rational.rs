//! Exact rational helpers: parsing, square roots, formatting.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parse a rational literal: an integer (`3`), a fraction (`5/2`) or a
/// decimal (`2.5`). Decimals convert exactly (no float round-trip).
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator `{num}`"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator `{den}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{t}`"));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        let sign = if int_part.trim_start().starts_with('-') {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let ip: BigInt = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|_| format!("bad number `{t}`"))?
        };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad number `{t}`"));
        }
        let fp: BigInt = frac_part.parse().map_err(|_| format!("bad number `{t}`"))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        return Ok(BigRational::new(ip.magnitude().clone().into(), BigInt::one()) * &sign
            + BigRational::new(fp, scale) * &sign);
    }
    let n: BigInt = t.parse().map_err(|_| format!("bad number `{t}`"))?;
    Ok(BigRational::from_integer(n))
}

/// Exact square root of a nonnegative rational, if one exists.
pub fn sqrt_exact(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let num = exact_uint_sqrt(r.numer().magnitude())?;
    let den = exact_uint_sqrt(r.denom().magnitude())?;
    Some(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

fn exact_uint_sqrt(n: &BigUint) -> Option<BigUint> {
    let s = n.sqrt();
    if &(&s * &s) == n {
        Some(s)
    } else {
        None
    }
}

/// Render a rational compactly: integers without denominator, otherwise `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // fall back to a quotient of lossy conversions for huge entries
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_fractions_decimals() {
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert_eq!(
            parse_rational("5/2").unwrap(),
            BigRational::new(5.into(), 2.into())
        );
        assert_eq!(
            parse_rational("2.5").unwrap(),
            BigRational::new(5.into(), 2.into())
        );
        assert_eq!(
            parse_rational("-0.25").unwrap(),
            BigRational::new((-1).into(), 4.into())
        );
        assert_eq!(
            parse_rational("10.10").unwrap(),
            BigRational::new(101.into(), 10.into())
        );
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a.b").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn exact_sqrt() {
        let r = BigRational::new(4.into(), 9.into());
        assert_eq!(sqrt_exact(&r).unwrap(), BigRational::new(2.into(), 3.into()));
        assert!(sqrt_exact(&BigRational::from_integer(2.into())).is_none());
        assert_eq!(
            sqrt_exact(&BigRational::zero()).unwrap(),
            BigRational::zero()
        );
    }
}
