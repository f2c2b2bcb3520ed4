//! CSV bundles behind each figure panel. Numbers use Rust's shortest round-trip
//! formatting, which is locale independent.

use std::f64::consts::{SQRT_2, TAU};

use remote_cnot::benchmarking::{ChshResult, InterleavedXeb};
use remote_cnot::quantum::{CMatrix, PAULI_LABELS};
use remote_cnot::tomography::SweepResult;

type Row = Vec<String>;

fn render(header: &[&str], rows: impl IntoIterator<Item = Row>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records")
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Amplitude and the six fitted rates, all in MHz; failed fits are NaN.
pub fn cr_parameters(sweep: &SweepResult) -> String {
    let mhz = |v: f64| v / TAU * 1e3;
    let rows = sweep.rows.iter().map(|r| {
        let rates = r.fit.as_ref().map_or([f64::NAN; 6], |f| f.coefficients.to_array());
        std::iter::once(mhz(r.amplitude)).chain(rates.map(mhz)).map(num).collect()
    });
    render(
        &["amplitude_mhz", "ix_mhz", "iy_mhz", "iz_mhz", "zx_mhz", "zy_mhz", "zz_mhz"],
        rows,
    )
}

/// Per-depth pooled fidelity and the fitted decay for both series.
pub fn xeb_decay(x: &InterleavedXeb) -> String {
    let mut rows = Vec::new();
    for (name, r) in [("reference", &x.reference), ("interleaved", &x.interleaved)] {
        for (d, f) in r.depths.iter().zip(&r.fidelities) {
            let fit = r.fit.amplitude * r.fit.p.powi(d.depth as i32);
            rows.push(vec![name.to_string(), d.depth.to_string(), num(*f), num(fit)]);
        }
    }
    render(&["series", "depth", "fidelity", "fit"], rows)
}

/// Fidelity of every circuit: its linear XEB score over the ideal self-score.
pub fn xeb_circuits(x: &InterleavedXeb) -> String {
    let mut rows = Vec::new();
    for (name, r) in [("reference", &x.reference), ("interleaved", &x.interleaved)] {
        for d in &r.depths {
            for (c, (m, i)) in d.measured.iter().zip(&d.ideal).enumerate() {
                rows.push(vec![name.to_string(), d.depth.to_string(), c.to_string(), num(m / i)]);
            }
        }
    }
    render(&["series", "depth", "circuit_index", "fidelity"], rows)
}

/// Every element of a 4×4 or 16×16 matrix with its row and column labels.
pub fn matrix_elements(m: &CMatrix, labels: &[&str]) -> String {
    let mut rows = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push(vec![
                labels[i].to_string(),
                labels[j].to_string(),
                num(m[(i, j)].re),
                num(m[(i, j)].im),
            ]);
        }
    }
    render(&["row", "column", "real", "imag"], rows)
}

pub fn chi_elements(chi: &CMatrix) -> String {
    matrix_elements(chi, &PAULI_LABELS)
}

pub fn density_elements(rho: &CMatrix) -> String {
    matrix_elements(rho, &["00", "01", "10", "11"])
}

pub fn chsh_scan(r: &ChshResult) -> String {
    let rows = r.points.iter().map(|p| {
        [p.theta, p.raw, p.corrected, p.stderr_raw, p.stderr_corrected]
            .map(num)
            .to_vec()
    });
    render(&["theta", "s_raw", "s_corrected", "stderr_raw", "stderr_corrected"], rows)
}

/// The scan plus constant rows at the classical and quantum limits.
pub fn chsh_figure(r: &ChshResult) -> String {
    let mut rows: Vec<Row> = r
        .points
        .iter()
        .map(|p| {
            let mut row = vec!["scan".to_string()];
            row.extend([p.theta, p.raw, p.corrected, p.stderr_raw, p.stderr_corrected].map(num));
            row
        })
        .collect();
    for (name, s) in [("classical_limit", 2.0), ("quantum_limit", 2.0 * SQRT_2)] {
        for theta in [0.0, TAU] {
            let mut row = vec![name.to_string()];
            row.extend([theta, s, s, 0.0, 0.0].map(num));
            rows.push(row);
        }
    }
    render(
        &["series", "theta", "s_raw", "s_corrected", "stderr_raw", "stderr_corrected"],
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use remote_cnot::benchmarking::ChshPoint;

    #[test]
    fn chsh_figure_has_reference_rows() {
        let r = ChshResult {
            points: vec![ChshPoint {
                theta: 0.5,
                raw: 1.0,
                corrected: 1.1,
                stderr_raw: 0.01,
                stderr_corrected: 0.02,
            }],
            max_raw: 1.0,
            max_corrected: 1.1,
        };
        let text = chsh_figure(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().any(|l| l.starts_with("classical_limit,0,2,2")));
        assert!(lines.iter().any(|l| l.starts_with(&format!("quantum_limit,0,{}", 2.0 * SQRT_2))));
    }

    #[test]
    fn matrix_elements_are_labelled() {
        let text = chi_elements(&CMatrix::identity(16, 16));
        assert_eq!(text.lines().count(), 257);
        assert!(text.contains("\nZX,ZX,1,0\n"));
    }
}
