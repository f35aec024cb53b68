//! CSV spectra, traces and back-action summaries with `#` metadata headers.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{CeoError, Result};
use crate::freq_response::{DbaShift, Frame, Spectrum};
use crate::model::{hz, to_hz};
use crate::time_domain::{TimeTrace, TraceKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance lines written as `#` comments ahead of the column header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub config_sha256: Option<String>,
    pub lines: Vec<(String, String)>,
}

impl Header {
    pub fn new(config_sha256: Option<String>) -> Self {
        Header {
            config_sha256,
            lines: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.lines.push((key.into(), value.into()));
        self
    }

    fn write(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# ceo {VERSION}")?;
        if let Some(d) = &self.config_sha256 {
            writeln!(w, "# config_sha256: {d}")?;
        }
        writeln!(w, "# units: frequencies in Hz (nu = omega / 2 pi), times in s")?;
        for (k, v) in &self.lines {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// 15 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.14e}")
}

fn opt_fmt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Columns `freq_hz,R,S_re,S_im`; missing quantities are left empty.
pub fn write_spectrum(w: &mut impl Write, s: &Spectrum, header: &Header) -> Result<()> {
    header.write(w)?;
    writeln!(w, "freq_hz,R,S_re,S_im")?;
    for (k, &omega) in s.frequencies.iter().enumerate() {
        let r = s.r_values.as_ref().map(|r| r[k]);
        let z = s.s_complex.as_ref().map(|z| z[k]);
        writeln!(
            w,
            "{},{},{},{}",
            fmt(to_hz(omega)),
            opt_fmt(r),
            opt_fmt(z.map(|z| z.re)),
            opt_fmt(z.map(|z| z.im))
        )?;
    }
    Ok(())
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn parse_cell(rec: &csv::StringRecord, idx: Option<usize>, row: usize, name: &str) -> Result<Option<f64>> {
    match idx.and_then(|i| rec.get(i)) {
        None | Some("") => Ok(None),
        Some(t) => t
            .parse::<f64>()
            .map(Some)
            .map_err(|e| CeoError::Parse(format!("row {row}, column {name}: {e}"))),
    }
}

/// Spectrum plus an optional per-point `sigma` column.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumData {
    pub spectrum: Spectrum,
    pub sigma: Option<Vec<f64>>,
}

/// Reads a spectrum CSV. Requires `freq_hz` and at least `R` or both `S_re`, `S_im`.
pub fn read_spectrum(r: impl Read) -> Result<SpectrumData> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let f = column(&headers, "freq_hz").ok_or_else(|| CeoError::Parse("missing freq_hz column".into()))?;
    let (ci, cre, cim, cs) = (
        column(&headers, "R"),
        column(&headers, "S_re"),
        column(&headers, "S_im"),
        column(&headers, "sigma"),
    );
    let mut freq = Vec::new();
    let mut rv: Vec<Option<f64>> = Vec::new();
    let mut sv: Vec<Option<Complex64>> = Vec::new();
    let mut sig: Vec<Option<f64>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nu = parse_cell(&rec, Some(f), row, "freq_hz")?
            .ok_or_else(|| CeoError::Parse(format!("row {row}: empty freq_hz")))?;
        freq.push(hz(nu));
        rv.push(parse_cell(&rec, ci, row, "R")?);
        let re = parse_cell(&rec, cre, row, "S_re")?;
        let im = parse_cell(&rec, cim, row, "S_im")?;
        sv.push(match (re, im) {
            (Some(a), Some(b)) => Some(Complex64::new(a, b)),
            _ => None,
        });
        sig.push(parse_cell(&rec, cs, row, "sigma")?);
    }
    let all = |v: &[Option<f64>]| v.iter().all(Option::is_some).then(|| v.iter().flatten().cloned().collect::<Vec<_>>());
    let r_values = all(&rv);
    let s_complex = sv
        .iter()
        .all(Option::is_some)
        .then(|| sv.iter().flatten().cloned().collect::<Vec<_>>());
    if r_values.is_none() && s_complex.is_none() {
        return Err(CeoError::Parse("spectrum needs a complete R column or S_re and S_im columns".into()));
    }
    let sigma = if cs.is_some() {
        Some(all(&sig).ok_or_else(|| CeoError::Parse("sigma column has empty cells".into()))?)
    } else {
        None
    };
    let spectrum = Spectrum::new(freq, s_complex, r_values, Frame::RotatingProbe)?;
    Ok(SpectrumData { spectrum, sigma })
}

/// Columns `t_s,value[,value_im]`.
pub fn write_trace(w: &mut impl Write, trace: &TimeTrace, header: &Header) -> Result<()> {
    header.write(w)?;
    match trace.as_complex() {
        Some(z) => {
            writeln!(w, "t_s,value,value_im")?;
            for (k, v) in z.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt(trace.t(k)), fmt(v.re), fmt(v.im))?;
            }
        }
        None => {
            writeln!(w, "t_s,value")?;
            for (k, v) in trace.expect_real()?.iter().enumerate() {
                writeln!(w, "{},{}", fmt(trace.t(k)), fmt(*v))?;
            }
        }
    }
    Ok(())
}

/// Reads a uniformly sampled trace written by [`write_trace`].
pub fn read_trace(r: impl Read, kind: TraceKind) -> Result<TimeTrace> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let ct = column(&headers, "t_s").ok_or_else(|| CeoError::Parse("missing t_s column".into()))?;
    let cv = column(&headers, "value").ok_or_else(|| CeoError::Parse("missing value column".into()))?;
    let cim = column(&headers, "value_im");
    let mut t = Vec::new();
    let mut re = Vec::new();
    let mut im = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let need = |idx, name| {
            parse_cell(&rec, Some(idx), row, name)?.ok_or_else(|| CeoError::Parse(format!("row {row}: empty {name}")))
        };
        t.push(need(ct, "t_s")?);
        re.push(need(cv, "value")?);
        if let Some(c) = cim {
            im.push(need(c, "value_im")?);
        }
    }
    if t.len() < 2 {
        return Err(CeoError::Parse("trace needs at least two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if t
        .iter()
        .enumerate()
        .any(|(k, &tk)| (tk - (t[0] + k as f64 * dt)).abs() > 1e-6 * dt)
    {
        return Err(CeoError::Parse("trace samples are not uniformly spaced".into()));
    }
    if cim.is_some() {
        let z = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        TimeTrace::complex(t[0], dt, z, kind)
    } else {
        TimeTrace::real(t[0], dt, re, kind)
    }
}

/// Columns `C,dOmega_hz,dKappa_hz`.
pub fn write_dba_summary(w: &mut impl Write, rows: &[(f64, DbaShift)], header: &Header) -> Result<()> {
    header.write(w)?;
    writeln!(w, "C,dOmega_hz,dKappa_hz")?;
    for (c, s) in rows {
        writeln!(w, "{},{},{}", fmt(*c), fmt(to_hz(s.delta_omega_e)), fmt(to_hz(s.delta_kappa_e)))?;
    }
    Ok(())
}

/// Reads a summary written by [`write_dba_summary`].
pub fn read_dba_summary(r: impl Read) -> Result<Vec<(f64, DbaShift)>> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let idx = ["C", "dOmega_hz", "dKappa_hz"]
        .iter()
        .map(|n| column(&headers, n).ok_or_else(|| CeoError::Parse(format!("missing {n} column"))))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 3];
        for (k, (&i, name)) in idx.iter().zip(["C", "dOmega_hz", "dKappa_hz"]).enumerate() {
            v[k] = parse_cell(&rec, Some(i), row, name)?.ok_or_else(|| CeoError::Parse(format!("row {row}: empty {name}")))?;
        }
        out.push((
            v[0],
            DbaShift {
                delta_omega_e: hz(v[1]),
                delta_kappa_e: hz(v[2]),
            },
        ));
    }
    Ok(out)
}

/// `t_s` followed by one `R@<offset_hz>` column per probe detuning.
pub fn write_reflection_map(w: &mut impl Write, offsets: &[f64], rows: &[TimeTrace], header: &Header) -> Result<()> {
    if offsets.len() != rows.len() || rows.is_empty() {
        return Err(CeoError::Config("one trace per probe offset required".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CeoError::Config("reflection traces must share one time grid".into()));
    }
    let values: Vec<&[f64]> = rows.iter().map(|r| r.expect_real()).collect::<Result<_>>()?;
    header.write(w)?;
    write!(w, "t_s")?;
    for &o in offsets {
        write!(w, ",R@{:e}", to_hz(o))?;
    }
    writeln!(w)?;
    for k in 0..n {
        write!(w, "{}", fmt(rows[0].t(k)))?;
        for v in &values {
            write!(w, ",{}", fmt(v[k]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reflection map as written by [`write_reflection_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionMap {
    /// Probe detunings, rad/s.
    pub offsets: Vec<f64>,
    pub times: Vec<f64>,
    /// `rows[k][j]` is `R` at `times[k]` and `offsets[j]`.
    pub rows: Vec<Vec<f64>>,
}

impl ReflectionMap {
    /// The spectrum across probe offsets at time index `k`.
    pub fn slice(&self, k: usize) -> Result<Spectrum> {
        let row = self
            .rows
            .get(k)
            .ok_or_else(|| CeoError::Config(format!("time index {k} out of range")))?;
        Spectrum::from_r(self.offsets.clone(), row.clone())
    }
}

pub fn read_reflection_map(r: impl Read) -> Result<ReflectionMap> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("t_s") {
        return Err(CeoError::Parse("first column must be t_s".into()));
    }
    let offsets = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("R@")
                .and_then(|v| v.parse::<f64>().ok())
                .map(hz)
                .ok_or_else(|| CeoError::Parse(format!("bad reflection column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if offsets.is_empty() {
        return Err(CeoError::Parse("reflection map has no R@ columns".into()));
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(rec.len());
        for (i, name) in headers.iter().enumerate() {
            vals.push(parse_cell(&rec, Some(i), row, name)?.ok_or_else(|| CeoError::Parse(format!("row {row}: empty {name}")))?);
        }
        times.push(vals[0]);
        rows.push(vals.split_off(1));
    }
    Ok(ReflectionMap { offsets, times, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip_to_15_digits() {
        let w = vec![-1.234567890123456e8, 0.0, 3.3e7];
        let r = vec![0.123456789012345678, 1.0, 9.87654321];
        let s = vec![Complex64::new(0.1, -0.2), Complex64::new(1.0, 0.0), Complex64::new(-0.3, 1e-9)];
        let sp = Spectrum::new(w, Some(s), Some(r), Frame::RotatingProbe).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &sp, &Header::new(Some("ab".repeat(32)))).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# ceo "));
        assert!(text.contains("freq_hz,R,S_re,S_im"));
        let back = read_spectrum(buf.as_slice()).unwrap().spectrum;
        for (a, b) in sp.frequencies.iter().zip(&back.frequencies) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
        for (a, b) in sp.r_values.unwrap().iter().zip(back.r_values.unwrap()) {
            assert!((a - b).abs() <= 1e-14 * a.abs());
        }
    }

    #[test]
    fn r_only_spectrum_with_sigma() {
        let text = "# comment\nfreq_hz,R,sigma\n1e6,0.5,0.01\n2e6,0.6,0.02\n";
        let d = read_spectrum(text.as_bytes()).unwrap();
        assert!(d.spectrum.s_complex.is_none());
        assert_eq!(d.sigma.unwrap(), vec![0.01, 0.02]);
        assert!(read_spectrum("freq_hz,S_re\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let tr = TimeTrace::real(1e-7, 1e-9, vec![1.0, 0.5, 0.25], TraceKind::Reflection).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &tr, &Header::default()).unwrap();
        let back = read_trace(buf.as_slice(), TraceKind::Reflection).unwrap();
        assert_eq!(back.as_real().unwrap(), tr.as_real().unwrap());
        assert!((back.dt - tr.dt).abs() < 1e-20);
        let z = TimeTrace::complex(0.0, 1.0, vec![Complex64::new(1.0, 2.0); 3], TraceKind::ComplexEnvelope).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &z, &Header::default()).unwrap();
        assert_eq!(read_trace(buf.as_slice(), TraceKind::ComplexEnvelope).unwrap(), z);
    }

    #[test]
    fn dba_summary_round_trip() {
        let rows = vec![(
            0.1,
            DbaShift {
                delta_omega_e: 1.5,
                delta_kappa_e: -hz(1e6),
            },
        )];
        let mut buf = Vec::new();
        write_dba_summary(&mut buf, &rows, &Header::default()).unwrap();
        let back = read_dba_summary(buf.as_slice()).unwrap();
        assert!((back[0].1.delta_kappa_e / rows[0].1.delta_kappa_e - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reflection_map_round_trip() {
        let offsets = vec![-hz(5e6), 0.0, hz(5e6)];
        let rows: Vec<TimeTrace> = (0..3)
            .map(|j| TimeTrace::real(0.0, 1e-9, vec![1.0, 0.9 - 0.1 * j as f64], TraceKind::Reflection).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_reflection_map(&mut buf, &offsets, &rows, &Header::default()).unwrap();
        let m = read_reflection_map(buf.as_slice()).unwrap();
        assert_eq!(m.times, vec![0.0, 1e-9]);
        assert!((m.offsets[2] / offsets[2] - 1.0).abs() < 1e-14);
        assert_eq!(m.rows[1], vec![0.9, 0.8, 0.7]);
        assert_eq!(m.slice(1).unwrap().r_values.unwrap(), vec![0.9, 0.8, 0.7]);
    }
}
