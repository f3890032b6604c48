//! CSV and key=value text formats.
//!
//! Numbers are written with 9 significant digits.

use std::io::{Read, Write};

use crate::charges::ChargeConfiguration;
use crate::error::{Error, Result};
use crate::odmr::{FitResult, OdmrSpectrum, ScatterDataset};

pub const SPECTRUM_HEADER: [&str; 2] = ["freq_mhz", "signal"];
pub const SCATTER_HEADER: [&str; 3] = ["magnitude", "f_minus_mhz", "f_plus_mhz"];
pub const CHARGES_HEADER: [&str; 4] = ["x_nm", "y_nm", "z_nm", "q_e"];
pub const PL_HEADER: [&str; 2] = ["power_mw", "pl"];

/// `x` with 9 significant digits; plain notation for 1e-4 <= |x| < 1e9.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // exponent after rounding to 9 digits, so 9.999999999 counts as 1e1
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn write_rows<W: Write, const N: usize>(
    w: W,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, const N: usize>(r: R, header: [&str; N]) -> Result<Vec<[f64; N]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let got = rdr.headers().map_err(csv_err)?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Csv(format!(
            "expected header '{}', found '{}'",
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != N {
            return Err(Error::Csv(format!("row {}: expected {N} fields", i + 2)));
        }
        let mut row = [0.0; N];
        for (v, field) in row.iter_mut().zip(rec.iter()) {
            *v = field
                .parse()
                .map_err(|_| Error::Csv(format!("row {}: '{field}' is not a number", i + 2)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_spectrum<W: Write>(w: W, s: &OdmrSpectrum) -> Result<()> {
    write_rows(
        w,
        SPECTRUM_HEADER,
        s.freqs.iter().zip(&s.signal).map(|(f, y)| [sig9(*f), sig9(*y)]),
    )
}

pub fn read_spectrum<R: Read>(r: R) -> Result<OdmrSpectrum> {
    let rows = read_rows(r, SPECTRUM_HEADER)?;
    let (freqs, signal) = rows.into_iter().map(|[f, y]| (f, y)).unzip();
    OdmrSpectrum::new(freqs, signal)
}

pub fn write_scatter<W: Write>(w: W, ds: &ScatterDataset) -> Result<()> {
    write_rows(
        w,
        SCATTER_HEADER,
        ds.rows
            .iter()
            .map(|r| [sig9(r.magnitude), sig9(r.f_minus), sig9(r.f_plus)]),
    )
}

pub fn read_scatter<R: Read>(r: R) -> Result<Vec<[f64; 3]>> {
    read_rows(r, SCATTER_HEADER)
}

pub fn write_charges<W: Write>(w: W, cfg: &ChargeConfiguration) -> Result<()> {
    write_rows(
        w,
        CHARGES_HEADER,
        cfg.charges.iter().map(|c| {
            let [x, y, z] = c.position;
            [sig9(x), sig9(y), sig9(z), c.q.to_string()]
        }),
    )
}

pub fn read_pl_series<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows(r, PL_HEADER)?.into_iter().map(|[p, y]| (p, y)).collect())
}

pub fn write_fit_result<W: Write>(mut w: W, fit: &FitResult) -> Result<()> {
    writeln!(w, "rho_c_nm3={}", sig9(fit.rho_c))?;
    writeln!(w, "contrast={}", sig9(fit.contrast))?;
    writeln!(w, "residual={}", sig9(fit.residual))?;
    writeln!(w, "step_rho_nm3={}", sig9(fit.step_rho))?;
    writeln!(w, "step_contrast={}", sig9(fit.step_contrast))?;
    for (i, r) in fit.cycle_residuals.iter().enumerate() {
        writeln!(w, "cycle{}_residual={}", i + 1, sig9(*r))?;
    }
    let hits = if fit.boundary_hits.is_empty() {
        "none".to_string()
    } else {
        fit.boundary_hits.join(",")
    };
    writeln!(w, "boundary_hit={hits}")?;
    Ok(())
}

/// Parses a flat `key=value` block; blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::InvalidParameter(format!("not a key=value line: '{l}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odmr::{PerturbationKind, ScatterRow};
    use proptest::prelude::*;

    #[test]
    fn sig9_examples() {
        assert_eq!(sig9(3467.928), "3467.92800");
        assert_eq!(sig9(-19.611848825331971), "-19.6118488");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.05), "0.0500000000");
        assert_eq!(sig9(1.4399645e7), "14399645.0");
        assert_eq!(sig9(2.5e-7), "2.50000000e-7");
        assert_eq!(sig9(9.9999999999), "10.0000000");
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let s = OdmrSpectrum::new(vec![3400.0, 3401.0, 3402.0], vec![1.0, 0.95, 0.999]).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("freq_mhz,signal\n3400.00000,1.00000000\n"));
        assert_eq!(read_spectrum(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(read_spectrum("freq,signal\n1,1\n2,1\n".as_bytes()).is_err());
        assert!(read_spectrum("freq_mhz,signal\n1,x\n2,1\n".as_bytes()).is_err());
        assert!(read_spectrum("freq_mhz,signal\n1,1,3\n2,1\n".as_bytes()).is_err());
        assert!(read_spectrum("freq_mhz,signal\n1,1\n5,1\n6,1\n".as_bytes()).is_err());
    }

    #[test]
    fn scatter_csv() {
        let ds = ScatterDataset {
            kind: PerturbationKind::Electric,
            rows: vec![ScatterRow { magnitude: 1e5, f_minus: 3467.928, f_plus: 3472.072 }],
        };
        let mut buf = Vec::new();
        write_scatter(&mut buf, &ds).unwrap();
        let rows = read_scatter(buf.as_slice()).unwrap();
        assert_eq!(rows, vec![[1e5, 3467.928, 3472.072]]);
    }

    #[test]
    fn fit_block_parses() {
        let fit = FitResult {
            rho_c: 0.046,
            contrast: 0.05,
            residual: 0.0,
            step_rho: 4e-4,
            step_contrast: 2e-4,
            cycle_residuals: vec![1e-3, 1e-5, 0.0],
            boundary_hits: vec![],
        };
        let mut buf = Vec::new();
        write_fit_result(&mut buf, &fit).unwrap();
        let kv = parse_key_values(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(kv[0], ("rho_c_nm3".into(), "0.0460000000".into()));
        assert_eq!(kv.last().unwrap().1, "none");
    }

    proptest! {
        #[test]
        fn sig9_keeps_nine_digits(x in -1e12f64..1e12) {
            let s = sig9(x);
            let back: f64 = s.parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-9 * x.abs() + 1e-300);
        }
    }
}
