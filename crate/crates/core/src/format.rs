//! Fixed-decimal float rendering shared by every CSV writer.

/// Renders `x` with exactly `decimals` fractional digits.
///
/// Rounding is half away from zero, applied to the shortest decimal
/// representation that round-trips to `x` (so `0.0005` renders as `0.001`
/// at three decimals even though its binary value sits a hair above or
/// below the midpoint). Non-finite values render as an empty field.
pub fn format_float(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let sci = format!("{:e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i64 = exp.parse().expect("exponent");
    let mut digits: Vec<u8> = mantissa
        .bytes()
        .filter(u8::is_ascii_digit)
        .map(|b| b - b'0')
        .collect();

    // digits[0] sits at 10^exp; keep everything down to 10^-decimals
    let keep = exp + 1 + decimals as i64;
    let mut kept: Vec<u8> = if keep <= 0 {
        let round_up = keep == 0 && digits[0] >= 5;
        vec![u8::from(round_up)]
    } else {
        let keep = keep as usize;
        let round_up = digits.get(keep).is_some_and(|&d| d >= 5);
        digits.resize(keep.max(digits.len()), 0);
        digits.truncate(keep);
        if round_up {
            let mut i = digits.len();
            loop {
                if i == 0 {
                    digits.insert(0, 1);
                    break;
                }
                i -= 1;
                if digits[i] == 9 {
                    digits[i] = 0;
                } else {
                    digits[i] += 1;
                    break;
                }
            }
        }
        digits
    };

    // kept now encodes an integer count of 10^-decimals units
    if kept.len() <= decimals {
        let mut padded = vec![0u8; decimals + 1 - kept.len()];
        padded.append(&mut kept);
        kept = padded;
    }
    let split = kept.len() - decimals;
    let is_zero = kept.iter().all(|&d| d == 0);
    let mut out = String::with_capacity(kept.len() + 2);
    if x.is_sign_negative() && !is_zero {
        out.push('-');
    }
    out.extend(kept[..split].iter().map(|d| char::from(b'0' + d)));
    if decimals > 0 {
        out.push('.');
        out.extend(kept[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Three-decimal rendering used for positions and most float columns.
pub fn f3(x: f64) -> String {
    format_float(x, 3)
}

/// Five-decimal rendering used for posting rates.
pub fn f5(x: f64) -> String {
    format_float(x, 5)
}

/// Parses a float cell, treating empty fields and `nan` as missing.
pub fn parse_float_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| !v.is_nan())
}
