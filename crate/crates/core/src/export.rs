//! CSV writers for traces, spectra and frequency responses.
//!
//! Each writer takes an optional preamble that is emitted as `# ...` lines
//! before the header.

use std::io::{self, Write};

use crate::analysis::SpectrumEstimate;
use crate::designer::ResponsePoint;
use crate::model::SignalTrace;

fn preamble<W: Write>(out: &mut W, lines: &[String]) -> io::Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

/// Columns `index,re,im`.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &SignalTrace, notes: &[String]) -> io::Result<()> {
    preamble(out, notes)?;
    writeln!(out, "index,re,im")?;
    for (i, z) in trace.samples.iter().enumerate() {
        writeln!(out, "{},{:e},{:e}", trace.start + i as i64, z.re, z.im)?;
    }
    Ok(())
}

/// Columns `omega_over_pi,mag_db`, one row per bin.
pub fn write_spectrum_csv<W: Write>(
    out: &mut W,
    spec: &SpectrumEstimate,
    notes: &[String],
) -> io::Result<()> {
    preamble(out, notes)?;
    writeln!(out, "omega_over_pi,mag_db")?;
    for (f, m) in spec.omega_over_pi.iter().zip(&spec.mag_db) {
        writeln!(out, "{f},{m:.6}")?;
    }
    Ok(())
}

/// Columns `omega_over_pi,mag_db,phase_rad`.
pub fn write_response_csv<W: Write>(
    out: &mut W,
    points: &[ResponsePoint],
    notes: &[String],
) -> io::Result<()> {
    preamble(out, notes)?;
    writeln!(out, "omega_over_pi,mag_db,phase_rad")?;
    for p in points {
        writeln!(out, "{},{:.6},{:.9}", p.omega_over_pi, p.mag_db, p.phase_rad)?;
    }
    Ok(())
}
