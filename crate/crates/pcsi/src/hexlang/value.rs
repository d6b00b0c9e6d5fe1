//! Awk scalar values and their coercion rules.
//!
//! A scalar is simultaneously a byte string and a number depending on
//! use. Uninitialized values read as the dual ""/0 and are falsy;
//! strings produced by `split` that look like numbers carry both
//! interpretations and compare numerically ("strnum" in POSIX terms).

use std::cmp::Ordering;
use std::sync::Arc;

pub type Bytes = Arc<Vec<u8>>;

#[derive(Debug, Clone)]
pub enum Scalar {
    Uninit,
    Num(f64),
    Str(Bytes),
    /// A string from field-splitting that looks like a number.
    StrNum(Bytes, f64),
}

impl Scalar {
    pub fn str(bytes: impl Into<Vec<u8>>) -> Scalar {
        Scalar::Str(Arc::new(bytes.into()))
    }

    /// Wrap split output: numeric-looking strings become strnums.
    pub fn field(bytes: Vec<u8>) -> Scalar {
        match numeric_string_value(&bytes) {
            Some(n) => Scalar::StrNum(Arc::new(bytes), n),
            None => Scalar::Str(Arc::new(bytes)),
        }
    }

    pub fn to_num(&self) -> f64 {
        match self {
            Scalar::Uninit => 0.0,
            Scalar::Num(n) => *n,
            Scalar::Str(b) => str_to_num(b),
            Scalar::StrNum(_, n) => *n,
        }
    }

    /// String form under `convfmt` (CONVFMT for expressions, OFMT in print).
    pub fn to_bytes(&self, convfmt: &[u8]) -> Bytes {
        match self {
            Scalar::Uninit => Arc::new(Vec::new()),
            Scalar::Num(n) => Arc::new(num_to_bytes(*n, convfmt)),
            Scalar::Str(b) | Scalar::StrNum(b, _) => Arc::clone(b),
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Scalar::Uninit => false,
            Scalar::Num(n) => *n != 0.0,
            Scalar::Str(b) => !b.is_empty(),
            Scalar::StrNum(_, n) => *n != 0.0,
        }
    }

    /// Does this value take part in numeric comparisons?
    fn numericish(&self) -> bool {
        !matches!(self, Scalar::Str(_))
    }

    /// The POSIX comparison rule: numeric when both sides are numbers,
    /// strnums, or uninitialized; otherwise byte-string comparison.
    pub fn compare(&self, other: &Scalar, convfmt: &[u8]) -> Ordering {
        if self.numericish() && other.numericish() {
            self.to_num()
                .partial_cmp(&other.to_num())
                .unwrap_or(Ordering::Equal)
        } else {
            self.to_bytes(convfmt).cmp(&other.to_bytes(convfmt))
        }
    }
}

/// Integer conversion clamped the way mawk's does: truncate toward zero
/// into [-(2^31-1), 2^31-1].
pub fn to_i32_clamped(n: f64) -> i64 {
    if n.is_nan() {
        return 0;
    }
    let t = n.trunc();
    if t > 2147483647.0 {
        2147483647
    } else if t < -2147483647.0 {
        -2147483647
    } else {
        t as i64
    }
}

/// Unsigned conversion for %x/%o/%u: negatives clamp to 0.
pub fn to_u32_clamped(n: f64) -> u64 {
    if n.is_nan() || n <= 0.0 {
        return 0;
    }
    let t = n.trunc();
    if t > u32::MAX as f64 {
        u32::MAX as u64
    } else {
        t as u64
    }
}

/// Number to string: integral values in the 32-bit range print as
/// integers, everything else through the conversion format (%.6g by
/// default). Matches the reference Awk byte-for-byte.
pub fn num_to_bytes(n: f64, convfmt: &[u8]) -> Vec<u8> {
    if n == n.trunc() && n.abs() <= 2147483647.0 {
        let mut v = (n as i64).to_string().into_bytes();
        if v == b"-0" {
            v = b"0".to_vec();
        }
        v
    } else {
        crate::hexlang::sprintf::format_one_number(convfmt, n)
    }
}

/// strtod-style prefix parse: leading whitespace, sign, then a decimal,
/// hex (0x...), "inf"/"infinity", or "nan" form. Anything unparseable
/// is 0.
pub fn str_to_num(bytes: &[u8]) -> f64 {
    parse_number_prefix(bytes).map(|(n, _)| n).unwrap_or(0.0)
}

/// Parse a number from the front; returns the value and bytes consumed.
fn parse_number_prefix(bytes: &[u8]) -> Option<(f64, usize)> {
    let mut pos = 0;
    while bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        pos += 1;
    }
    let sign_start = pos;
    let negative = match bytes.get(pos) {
        Some(b'-') => {
            pos += 1;
            true
        }
        Some(b'+') => {
            pos += 1;
            false
        }
        _ => false,
    };
    let body = &bytes[pos..];
    let (magnitude, used) = parse_unsigned_number(body)?;
    let _ = sign_start;
    let value = if negative { -magnitude } else { magnitude };
    Some((value, pos + used))
}

fn parse_unsigned_number(body: &[u8]) -> Option<(f64, usize)> {
    if body.len() >= 3 && body[..3].eq_ignore_ascii_case(b"inf") {
        let used = if body.len() >= 8 && body[..8].eq_ignore_ascii_case(b"infinity") {
            8
        } else {
            3
        };
        return Some((f64::INFINITY, used));
    }
    if body.len() >= 3 && body[..3].eq_ignore_ascii_case(b"nan") {
        return Some((f64::NAN, 3));
    }
    if body.len() >= 2
        && body[0] == b'0'
        && (body[1] == b'x' || body[1] == b'X')
        && body.get(2).is_some_and(|b| b.is_ascii_hexdigit())
    {
        let mut value = 0f64;
        let mut pos = 2;
        while let Some(d) = body.get(pos).and_then(|b| (*b as char).to_digit(16)) {
            value = value * 16.0 + d as f64;
            pos += 1;
        }
        return Some((value, pos));
    }
    // Decimal: digits [. digits] [e [sign] digits], needing at least one
    // digit in the mantissa. The exponent is consumed only if complete.
    let mut pos = 0;
    let mut saw_digit = false;
    while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
        saw_digit = true;
        pos += 1;
    }
    if body.get(pos) == Some(&b'.') {
        pos += 1;
        while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            saw_digit = true;
            pos += 1;
        }
    }
    if !saw_digit {
        return None;
    }
    let mantissa_end = pos;
    if matches!(body.get(pos), Some(b'e' | b'E')) {
        let mut exp_pos = pos + 1;
        if matches!(body.get(exp_pos), Some(b'+' | b'-')) {
            exp_pos += 1;
        }
        if body.get(exp_pos).is_some_and(|b| b.is_ascii_digit()) {
            while body.get(exp_pos).is_some_and(|b| b.is_ascii_digit()) {
                exp_pos += 1;
            }
            pos = exp_pos;
        } else {
            pos = mantissa_end;
        }
    }
    let text = std::str::from_utf8(&body[..pos]).ok()?;
    let text = if text.starts_with('.') {
        format!("0{text}")
    } else if text.ends_with('.') {
        format!("{text}0")
    } else {
        text.to_string()
    };
    text.parse::<f64>().ok().map(|v| (v, pos))
}

/// Is this entire string (modulo surrounding whitespace) a decimal
/// number? Used to mark split results as strnums.
pub fn numeric_string_value(bytes: &[u8]) -> Option<f64> {
    let mut start = 0;
    while bytes.get(start).is_some_and(|b| b.is_ascii_whitespace()) {
        start += 1;
    }
    let mut end = bytes.len();
    while end > start && bytes[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    let body = &bytes[start..end];
    if body.is_empty() {
        return None;
    }
    let (value, used) = parse_decimal_only(body)?;
    if used == body.len() {
        Some(value)
    } else {
        None
    }
}

/// Decimal-only companion of the prefix parser (no hex/inf/nan), per the
/// POSIX definition of a numeric string.
fn parse_decimal_only(body: &[u8]) -> Option<(f64, usize)> {
    let mut pos = 0;
    if matches!(body.first(), Some(b'+' | b'-')) {
        pos = 1;
    }
    let rest = &body[pos..];
    if rest.len() >= 2 && rest[0] == b'0' && matches!(rest[1], b'x' | b'X') {
        return None;
    }
    if rest.len() >= 3
        && (rest[..3].eq_ignore_ascii_case(b"inf") || rest[..3].eq_ignore_ascii_case(b"nan"))
    {
        return None;
    }
    let (value, used) = parse_number_prefix(body)?;
    Some((value, used))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONVFMT: &[u8] = b"%.6g";

    #[test]
    fn string_to_number_prefixes() {
        assert_eq!(str_to_num(b" 12abc"), 12.0);
        assert_eq!(str_to_num(b"3.5e"), 3.5);
        assert_eq!(str_to_num(b"1e"), 1.0);
        assert_eq!(str_to_num(b".5"), 0.5);
        assert_eq!(str_to_num(b"+7 "), 7.0);
        assert_eq!(str_to_num(b"-2.5e2x"), -250.0);
        assert_eq!(str_to_num(b"0x10"), 16.0);
        assert_eq!(str_to_num(b"abc"), 0.0);
        assert_eq!(str_to_num(b""), 0.0);
        assert!(str_to_num(b"inf").is_infinite());
        assert!(str_to_num(b"nan").is_nan());
    }

    #[test]
    fn number_to_string_integral_window() {
        assert_eq!(num_to_bytes(0.0, CONVFMT), b"0");
        assert_eq!(num_to_bytes(-0.0, CONVFMT), b"0");
        assert_eq!(num_to_bytes(123456789.0, CONVFMT), b"123456789");
        assert_eq!(num_to_bytes(2147483647.0, CONVFMT), b"2147483647");
        assert_eq!(num_to_bytes(2147483648.0, CONVFMT), b"2.14748e+09");
        assert_eq!(num_to_bytes(-2147483648.0, CONVFMT), b"-2.14748e+09");
        assert_eq!(num_to_bytes(1.0 / 3.0, CONVFMT), b"0.333333");
        assert_eq!(num_to_bytes(0.1 + 0.2, CONVFMT), b"0.3");
        assert_eq!(num_to_bytes(1e17, CONVFMT), b"1e+17");
        assert_eq!(num_to_bytes(1e-5, CONVFMT), b"1e-05");
        assert_eq!(num_to_bytes(100000.5, CONVFMT), b"100000");
    }

    #[test]
    fn comparison_matrix() {
        let n10 = Scalar::Num(10.0);
        let s10 = Scalar::str("10");
        let s9 = Scalar::str("9");
        let strnum3 = Scalar::field(b"3".to_vec());
        // number vs string constant: string comparison
        assert_eq!(n10.compare(&s9, CONVFMT), Ordering::Less); // "10" < "9"
        assert_eq!(n10.compare(&s10, CONVFMT), Ordering::Equal);
        assert_ne!(
            Scalar::Num(1.0).compare(&Scalar::str("1.0"), CONVFMT),
            Ordering::Equal
        );
        // strnum vs number: numeric
        assert_eq!(strnum3.compare(&Scalar::Num(3.0), CONVFMT), Ordering::Equal);
        // strnum vs string constant: string
        assert_eq!(strnum3.compare(&Scalar::str("21"), CONVFMT), Ordering::Greater);
        // uninit equals both "" and 0
        assert_eq!(Scalar::Uninit.compare(&Scalar::str(""), CONVFMT), Ordering::Equal);
        assert_eq!(Scalar::Uninit.compare(&Scalar::Num(0.0), CONVFMT), Ordering::Equal);
    }

    #[test]
    fn truthiness() {
        assert!(!Scalar::Uninit.truthy());
        assert!(!Scalar::Num(0.0).truthy());
        assert!(Scalar::Num(-1.5).truthy());
        assert!(Scalar::str("0").truthy()); // string constant "0" is true
        assert!(!Scalar::field(b"0".to_vec()).truthy()); // strnum "0" is false
        assert!(!Scalar::str("").truthy());
    }

    #[test]
    fn strnum_detection() {
        assert!(numeric_string_value(b"3").is_some());
        assert!(numeric_string_value(b" 3.5e2 ").is_some());
        assert!(numeric_string_value(b"-0.5").is_some());
        assert!(numeric_string_value(b"3x").is_none());
        assert!(numeric_string_value(b"").is_none());
        assert!(numeric_string_value(b"0x10").is_none());
        assert!(numeric_string_value(b"inf").is_none());
        assert!(numeric_string_value(b"nan").is_none());
    }

    #[test]
    fn clamped_conversions() {
        assert_eq!(to_i32_clamped(3.99), 3);
        assert_eq!(to_i32_clamped(-3.99), -3);
        assert_eq!(to_i32_clamped(2147483648.0), 2147483647);
        assert_eq!(to_i32_clamped(-2147483649.0), -2147483647);
        assert_eq!(to_u32_clamped(-1.0), 0);
        assert_eq!(to_u32_clamped(255.9), 255);
    }
}
