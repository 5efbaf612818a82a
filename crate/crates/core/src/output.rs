//! Deterministic CSV serialization of trajectories.
//!
//! Every file starts with a `#schema=1` comment line. Numbers are written
//! with `{:.16e}` so that identical runs produce identical bytes.

use std::io::{self, Write};

use crate::dark::DarkTrajectory;
use crate::embedding::EmbeddedTrajectory;

pub const SCHEMA_VERSION: u32 = 1;

fn header(dim: usize, alpha: bool) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..dim).map(|j| format!("re_psi_{j}")));
    cols.extend((0..dim).map(|j| format!("im_psi_{j}")));
    cols.extend(["norm", "survival_prob", "orth_residual"].map(String::from));
    if alpha {
        cols.extend(["re_alpha", "im_alpha"].map(String::from));
    }
    cols.join(",")
}

fn row(traj: &DarkTrajectory, i: usize) -> Vec<String> {
    let psi = traj.states[i].as_vector();
    let mut fields = Vec::with_capacity(2 * psi.len() + 4);
    fields.push(fmt(traj.times[i]));
    fields.extend(psi.iter().map(|z| fmt(z.re)));
    fields.extend(psi.iter().map(|z| fmt(z.im)));
    fields.push(fmt(traj.norms[i]));
    fields.push(fmt(traj.survival_probability[i]));
    fields.push(fmt(traj.orthogonality_residual[i]));
    fields
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &DarkTrajectory) -> io::Result<()> {
    writeln!(w, "#schema={SCHEMA_VERSION}")?;
    writeln!(w, "{}", header(traj.dim(), false))?;
    for i in 0..traj.len() {
        writeln!(w, "{}", row(traj, i).join(","))?;
    }
    w.flush()
}

/// `view` is the dark component of `embedded` as returned by
/// [`EmbeddedTrajectory::to_dark_trajectory`].
pub fn write_embedded_csv<W: Write>(
    mut w: W,
    embedded: &EmbeddedTrajectory,
    view: &DarkTrajectory,
) -> io::Result<()> {
    if view.len() != embedded.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "view does not match the embedded trajectory",
        ));
    }
    writeln!(w, "#schema={SCHEMA_VERSION}")?;
    writeln!(w, "{}", header(view.dim(), true))?;
    for (i, a) in embedded.alpha.iter().enumerate() {
        let mut fields = row(view, i);
        fields.push(fmt(a.re));
        fields.push(fmt(a.im));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()
}
