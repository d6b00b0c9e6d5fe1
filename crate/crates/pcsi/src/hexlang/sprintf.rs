//! Awk printf/sprintf formatting with C conversion semantics.
//!
//! Covers %d %i %o %u %x %X %c %s %e %E %f %g %G %% with the -, +,
//! space, #, and 0 flags, widths, precisions, and `*` arguments.
//! Integer conversions clamp like the reference Awk (32-bit window,
//! negatives clamp to zero for the unsigned forms).

use super::value::{to_i32_clamped, to_u32_clamped, Scalar};

/// Apply a single-conversion format (CONVFMT/OFMT, normally "%.6g") to
/// one number.
pub fn format_one_number(fmt: &[u8], n: f64) -> Vec<u8> {
    match run(fmt, &mut ArgSource::one(n), b"%.6g") {
        Ok(out) => out,
        Err(_) => run(b"%.6g", &mut ArgSource::one(n), b"%.6g").unwrap(),
    }
}

/// Format `fmt` with `args`. Strings passed through %s use `convfmt`
/// for number-to-string conversion.
pub fn sprintf(fmt: &[u8], args: &[Scalar], convfmt: &[u8]) -> Result<Vec<u8>, String> {
    let mut source = ArgSource::list(args);
    run(fmt, &mut source, convfmt)
}

struct ArgSource<'a> {
    args: &'a [Scalar],
    single: Option<Scalar>,
    next: usize,
}

impl<'a> ArgSource<'a> {
    fn list(args: &'a [Scalar]) -> ArgSource<'a> {
        ArgSource {
            args,
            single: None,
            next: 0,
        }
    }

    fn one(n: f64) -> ArgSource<'static> {
        ArgSource {
            args: &[],
            single: Some(Scalar::Num(n)),
            next: 0,
        }
    }

    /// Missing arguments read as the uninitialized value.
    fn take(&mut self) -> Scalar {
        if let Some(single) = &self.single {
            return single.clone();
        }
        let v = self.args.get(self.next).cloned().unwrap_or(Scalar::Uninit);
        self.next += 1;
        v
    }
}

#[derive(Default, Clone, Copy)]
struct Flags {
    left: bool,
    plus: bool,
    space: bool,
    zero: bool,
    alt: bool,
}

fn run(fmt: &[u8], args: &mut ArgSource, convfmt: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < fmt.len() {
        if fmt[pos] != b'%' {
            out.push(fmt[pos]);
            pos += 1;
            continue;
        }
        pos += 1;
        if pos >= fmt.len() {
            out.push(b'%');
            break;
        }
        if fmt[pos] == b'%' {
            out.push(b'%');
            pos += 1;
            continue;
        }
        let mut flags = Flags::default();
        loop {
            match fmt.get(pos) {
                Some(b'-') => flags.left = true,
                Some(b'+') => flags.plus = true,
                Some(b' ') => flags.space = true,
                Some(b'0') => flags.zero = true,
                Some(b'#') => flags.alt = true,
                _ => break,
            }
            pos += 1;
        }
        let mut width: Option<usize> = None;
        if fmt.get(pos) == Some(&b'*') {
            pos += 1;
            let w = to_i32_clamped(args.take().to_num());
            if w < 0 {
                flags.left = true;
                width = Some((-w) as usize);
            } else {
                width = Some(w as usize);
            }
        } else {
            let start = pos;
            while fmt.get(pos).is_some_and(|b| b.is_ascii_digit()) {
                pos += 1;
            }
            if pos > start {
                width = std::str::from_utf8(&fmt[start..pos]).unwrap().parse().ok();
            }
        }
        let mut precision: Option<usize> = None;
        if fmt.get(pos) == Some(&b'.') {
            pos += 1;
            if fmt.get(pos) == Some(&b'*') {
                pos += 1;
                let p = to_i32_clamped(args.take().to_num());
                precision = Some(p.max(0) as usize);
            } else {
                let start = pos;
                while fmt.get(pos).is_some_and(|b| b.is_ascii_digit()) {
                    pos += 1;
                }
                precision = Some(
                    std::str::from_utf8(&fmt[start..pos])
                        .unwrap()
                        .parse()
                        .unwrap_or(0),
                );
            }
        }
        let conv = *fmt
            .get(pos)
            .ok_or_else(|| "missing conversion character in printf format".to_string())?;
        pos += 1;
        let piece = convert(conv, flags, width, precision, args, convfmt)?;
        out.extend_from_slice(&piece);
    }
    Ok(out)
}

fn convert(
    conv: u8,
    flags: Flags,
    width: Option<usize>,
    precision: Option<usize>,
    args: &mut ArgSource,
    convfmt: &[u8],
) -> Result<Vec<u8>, String> {
    match conv {
        b'd' | b'i' => {
            let v = to_i32_clamped(args.take().to_num());
            Ok(pad_numeric(format_signed(v, flags), flags, width))
        }
        b'o' => {
            let v = to_u32_clamped(args.take().to_num());
            let digits = format!("{v:o}");
            let body = if flags.alt && !digits.starts_with('0') {
                format!("0{digits}")
            } else {
                digits
            };
            Ok(pad_numeric(body, flags, width))
        }
        b'x' | b'X' => {
            let v = to_u32_clamped(args.take().to_num());
            let digits = if conv == b'x' {
                format!("{v:x}")
            } else {
                format!("{v:X}")
            };
            let body = if flags.alt && v != 0 {
                let prefix = if conv == b'x' { "0x" } else { "0X" };
                format!("{prefix}{digits}")
            } else {
                digits
            };
            Ok(pad_numeric(body, flags, width))
        }
        b'u' => {
            let v = to_u32_clamped(args.take().to_num());
            Ok(pad_numeric(v.to_string(), flags, width))
        }
        b'c' => {
            let arg = args.take();
            let mut body = Vec::new();
            match &arg {
                Scalar::Str(b) | Scalar::StrNum(b, _) => match b.first() {
                    Some(byte) => body.push(*byte),
                    None => body.push(0),
                },
                Scalar::Num(n) => body.push((to_i32_clamped(*n).rem_euclid(256)) as u8),
                Scalar::Uninit => body.push(0),
            }
            Ok(pad_bytes(body, flags, width))
        }
        b's' => {
            let bytes = args.take().to_bytes(convfmt);
            let mut body = bytes.as_ref().clone();
            if let Some(p) = precision {
                body.truncate(p);
            }
            Ok(pad_bytes(body, flags, width))
        }
        b'e' | b'E' => {
            let v = args.take().to_num();
            let body = format_e(v, precision.unwrap_or(6), conv == b'E', flags);
            Ok(pad_numeric(body, flags, width))
        }
        b'f' | b'F' => {
            let v = args.take().to_num();
            let body = format_f(v, precision.unwrap_or(6), flags);
            Ok(pad_numeric(body, flags, width))
        }
        b'g' | b'G' => {
            let v = args.take().to_num();
            let body = format_g(v, precision.unwrap_or(6), conv == b'G', flags);
            Ok(pad_numeric(body, flags, width))
        }
        other => Err(format!(
            "unknown printf conversion '%{}'",
            other as char
        )),
    }
}

fn sign_prefix(negative: bool, flags: Flags) -> &'static str {
    if negative {
        "-"
    } else if flags.plus {
        "+"
    } else if flags.space {
        " "
    } else {
        ""
    }
}

fn format_signed(v: i64, flags: Flags) -> String {
    format!("{}{}", sign_prefix(v < 0, flags), v.abs())
}

/// Pad a numeric rendering; the zero flag fills between sign and digits.
fn pad_numeric(body: String, flags: Flags, width: Option<usize>) -> Vec<u8> {
    let width = width.unwrap_or(0);
    if body.len() >= width {
        return body.into_bytes();
    }
    let fill = width - body.len();
    if flags.left {
        let mut out = body.into_bytes();
        out.extend(std::iter::repeat_n(b' ', fill));
        out
    } else if flags.zero && body != "inf" && body != "-inf" && body != "nan" {
        let split = body
            .find(|c: char| c.is_ascii_digit() || c == '.')
            .unwrap_or(0);
        let (head, tail) = body.split_at(split);
        format!("{head}{}{tail}", "0".repeat(fill)).into_bytes()
    } else {
        let mut out = vec![b' '; fill];
        out.extend_from_slice(body.as_bytes());
        out
    }
}

fn pad_bytes(body: Vec<u8>, flags: Flags, width: Option<usize>) -> Vec<u8> {
    let width = width.unwrap_or(0);
    if body.len() >= width {
        return body;
    }
    let fill = width - body.len();
    let mut out = Vec::with_capacity(width);
    if flags.left {
        out.extend_from_slice(&body);
        out.extend(std::iter::repeat_n(b' ', fill));
    } else {
        out.extend(std::iter::repeat_n(b' ', fill));
        out.extend_from_slice(&body);
    }
    out
}

fn format_f(v: f64, precision: usize, flags: Flags) -> String {
    if v.is_nan() {
        return nan_str(v);
    }
    if v.is_infinite() {
        return inf_str(v, flags);
    }
    let body = format!("{:.*}", precision, v.abs());
    let body = if flags.alt && precision == 0 {
        format!("{body}.")
    } else {
        body
    };
    format!("{}{}", sign_prefix(v.is_sign_negative(), flags), body)
}

fn nan_str(_v: f64) -> String {
    "nan".to_string()
}

fn inf_str(v: f64, flags: Flags) -> String {
    format!("{}inf", sign_prefix(v < 0.0, flags))
}

/// C-style %e: mantissa with `precision` digits, exponent always signed
/// and at least two digits.
fn format_e(v: f64, precision: usize, upper: bool, flags: Flags) -> String {
    if v.is_nan() {
        return nan_str(v);
    }
    if v.is_infinite() {
        return inf_str(v, flags);
    }
    let formatted = format!("{:.*e}", precision, v.abs());
    let (mantissa, exp) = formatted.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let e = if upper { 'E' } else { 'e' };
    let mantissa = if flags.alt && precision == 0 && !mantissa.contains('.') {
        format!("{mantissa}.")
    } else {
        mantissa.to_string()
    };
    format!(
        "{}{}{}{}{:02}",
        sign_prefix(v.is_sign_negative(), flags),
        mantissa,
        e,
        if exp < 0 { '-' } else { '+' },
        exp.abs()
    )
}

/// C-style %g: %e or %f depending on the rounded exponent, then strip
/// trailing zeros unless '#' was given.
fn format_g(v: f64, precision: usize, upper: bool, flags: Flags) -> String {
    if v.is_nan() {
        return nan_str(v);
    }
    if v.is_infinite() {
        return inf_str(v, flags);
    }
    let p = precision.max(1);
    let exponent = if v == 0.0 {
        0
    } else {
        // Exponent after rounding to p significant digits.
        let probe = format!("{:.*e}", p - 1, v.abs());
        probe.split_once('e').unwrap().1.parse::<i32>().unwrap()
    };
    let mut body = if exponent >= -4 && (exponent as i64) < p as i64 {
        let frac = (p as i64 - 1 - exponent as i64).max(0) as usize;
        format!("{:.*}", frac, v.abs())
    } else {
        let noflags = Flags::default();
        let e = format_e(v.abs(), p - 1, upper, noflags);
        e
    };
    if !flags.alt {
        body = strip_g_zeros(&body);
    }
    format!("{}{}", sign_prefix(v.is_sign_negative(), flags), body)
}

fn strip_g_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some((&s[m.len()..m.len() + 1], e))),
        None => (s, None),
    };
    let trimmed = if mantissa.contains('.') {
        let t = mantissa.trim_end_matches('0');
        t.strip_suffix('.').unwrap_or(t)
    } else {
        mantissa
    };
    match exp {
        Some((e_char, e)) => format!("{trimmed}{e_char}{e}"),
        None => trimmed.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmt1(fmt: &str, arg: Scalar) -> String {
        String::from_utf8(sprintf(fmt.as_bytes(), &[arg], b"%.6g").unwrap()).unwrap()
    }

    fn fmtn(fmt: &str, args: &[Scalar]) -> String {
        String::from_utf8(sprintf(fmt.as_bytes(), args, b"%.6g").unwrap()).unwrap()
    }

    #[test]
    fn integer_conversions() {
        assert_eq!(fmt1("%d", Scalar::Num(42.0)), "42");
        assert_eq!(fmt1("%d", Scalar::Num(3.99)), "3");
        assert_eq!(fmt1("%d", Scalar::str("12abc")), "12");
        assert_eq!(fmt1("%d", Scalar::Num(2147483648.0)), "2147483647");
        assert_eq!(fmt1("%d", Scalar::Num(-2147483649.0)), "-2147483647");
        assert_eq!(fmt1("%i", Scalar::Num(42.0)), "42");
        assert_eq!(fmt1("%x", Scalar::Num(255.0)), "ff");
        assert_eq!(fmt1("%X", Scalar::Num(255.0)), "FF");
        assert_eq!(fmt1("%o", Scalar::Num(8.0)), "10");
        assert_eq!(fmt1("%#x", Scalar::Num(255.0)), "0xff");
        assert_eq!(fmt1("%#o", Scalar::Num(8.0)), "010");
        assert_eq!(fmt1("%x", Scalar::Num(-1.0)), "0");
        assert_eq!(fmt1("%u", Scalar::Num(7.0)), "7");
    }

    #[test]
    fn widths_flags() {
        assert_eq!(fmt1("%5d", Scalar::Num(42.0)), "   42");
        assert_eq!(fmt1("%-5d", Scalar::Num(42.0)), "42   ");
        assert_eq!(fmt1("%05d", Scalar::Num(42.0)), "00042");
        assert_eq!(fmt1("%05d", Scalar::Num(-42.0)), "-0042");
        assert_eq!(fmt1("%+d", Scalar::Num(42.0)), "+42");
        assert_eq!(fmt1("% d", Scalar::Num(42.0)), " 42");
        assert_eq!(
            fmtn("%*d", &[Scalar::Num(6.0), Scalar::Num(1.0)]),
            "     1"
        );
    }

    #[test]
    fn float_conversions() {
        assert_eq!(fmt1("%5.2f", Scalar::Num(3.14159)), " 3.14");
        assert_eq!(fmt1("%e", Scalar::Num(31415.9265)), "3.141593e+04");
        assert_eq!(fmt1("%E", Scalar::Num(0.000271828)), "2.718280E-04");
        assert_eq!(fmt1("%f", Scalar::Num(1.0)), "1.000000");
    }

    #[test]
    fn g_conversion_matches_c() {
        assert_eq!(fmt1("%g", Scalar::Num(100000.0)), "100000");
        assert_eq!(fmt1("%g", Scalar::Num(1000000.0)), "1e+06");
        assert_eq!(fmt1("%g", Scalar::Num(0.0001)), "0.0001");
        assert_eq!(fmt1("%g", Scalar::Num(0.00001)), "1e-05");
        assert_eq!(fmt1("%.3g", Scalar::Num(1234.5678)), "1.23e+03");
        assert_eq!(fmt1("%#g", Scalar::Num(1.5)), "1.50000");
        assert_eq!(fmt1("%g", Scalar::Num(123456789.0)), "1.23457e+08");
        assert_eq!(fmt1("%g", Scalar::Num(0.0)), "0");
        assert_eq!(fmt1("%g", Scalar::Num(0.1 + 0.2)), "0.3");
        assert_eq!(fmt1("%g", Scalar::Num(2147483648.0)), "2.14748e+09");
        assert_eq!(fmt1("%g", Scalar::Num(-2147483648.0)), "-2.14748e+09");
        assert_eq!(fmt1("%g", Scalar::Num(1e17)), "1e+17");
    }

    #[test]
    fn char_and_string() {
        assert_eq!(fmt1("%c", Scalar::Num(65.0)), "A");
        assert_eq!(fmt1("%c", Scalar::Num(321.0)), "A");
        assert_eq!(fmt1("%c", Scalar::str("xyz")), "x");
        assert_eq!(
            sprintf(b"%c", &[Scalar::str("")], b"%.6g").unwrap(),
            vec![0u8]
        );
        assert_eq!(fmt1("%s", Scalar::str("hello")), "hello");
        assert_eq!(fmt1("%.2s", Scalar::str("hello")), "he");
        assert_eq!(fmt1("%5s", Scalar::str("ab")), "   ab");
        assert_eq!(fmt1("%-5s|", Scalar::str("ab")), "ab   |");
        assert_eq!(fmt1("%s", Scalar::Num(0.5)), "0.5");
        assert_eq!(fmt1("%s", Scalar::Num(12.0)), "12");
    }

    #[test]
    fn percent_literal_and_missing_args() {
        assert_eq!(fmtn("100%%", &[]), "100%");
        assert_eq!(fmtn("[%s][%d]", &[]), "[][0]");
        assert!(sprintf(b"%q", &[], b"%.6g").is_err());
    }
}
