use coarsen::datastore::{load_trajectory, Trajectory};

use crate::{CliError, ExportPlot};

/// Space-time samples in snapshot-major order: `values[(s·n + i)·k + c]`
/// for snapshot `s`, point `i` and channel `c`.
pub struct Field<'a> {
    pub times: Vec<f64>,
    pub coords: &'a [f64],
    pub channels: usize,
    pub values: &'a [f64],
}

impl<'a> Field<'a> {
    pub fn of(traj: &'a Trajectory<f64>, coords: &'a [f64]) -> Self {
        let times = (0..traj.n_snapshots()).map(|s| traj.time(s)).collect();
        Field {
            times,
            coords,
            channels: traj.channels.count(),
            values: traj.data(),
        }
    }

    fn row(&self, s: usize, i: usize) -> &[f64] {
        let base = (s * self.coords.len() + i) * self.channels;
        &self.values[base..base + self.channels]
    }
}

/// Long-format rows `t, x, value[, value_im]` for every `every`-th snapshot,
/// optionally followed by the columns of a second field of equal layout.
pub fn write_long_csv<W: std::io::Write>(
    out: W,
    field: &Field,
    compare: Option<&Field>,
    every: usize,
) -> Result<(), CliError> {
    if every == 0 {
        return Err(CliError::Config("--every must be at least 1".into()));
    }
    let (n, k) = (field.coords.len(), field.channels);
    if field.values.len() != field.times.len() * n * k {
        return Err(CliError::Config(
            "field values do not match its times and coordinates".into(),
        ));
    }
    if let Some(c) = compare {
        if c.coords.len() != n
            || c.channels != k
            || c.times.len() < field.times.len()
            || c.values.len() != c.times.len() * n * k
        {
            return Err(CliError::Config(
                "comparison trajectory has a different layout".into(),
            ));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t", "x", "value"];
    if k == 2 {
        header.push("value_im");
    }
    if compare.is_some() {
        header.push("compare");
        if k == 2 {
            header.push("compare_im");
        }
    }
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for s in (0..field.times.len()).step_by(every) {
        let t = field.times[s].to_string();
        for (i, x) in field.coords.iter().enumerate() {
            let mut row = vec![t.clone(), x.to_string()];
            row.extend(field.row(s, i).iter().map(|v| v.to_string()));
            if let Some(c) = compare {
                row.extend(c.row(s, i).iter().map(|v| v.to_string()));
            }
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn export_plot(a: ExportPlot) -> Result<(), CliError> {
    let (traj, _) = load_trajectory::<f64>(&a.input)?;
    let compare = a
        .compare
        .as_deref()
        .map(load_trajectory::<f64>)
        .transpose()?
        .map(|(t, _)| t);
    let coords = traj.grid.coords();
    let field = Field::of(&traj, &coords);
    let other = compare.as_ref().map(|c| Field::of(c, &coords));
    let file = std::fs::File::create(&a.output)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.output.display())))?;
    write_long_csv(
        std::io::BufWriter::new(file),
        &field,
        other.as_ref(),
        a.every,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use coarsen::datastore::{Boundary, Channels, Grid};

    fn csv_of(field: &Field, compare: Option<&Field>) -> String {
        let mut buf = Vec::new();
        write_long_csv(&mut buf, field, compare, 1).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn two_by_two_field_gives_four_rows() {
        let coords = [0.25, 0.75];
        let field = Field {
            times: vec![0.0, 0.5],
            coords: &coords,
            channels: 1,
            values: &[1.0, 2.0, 3.0, 4.0],
        };
        let text = csv_of(&field, None);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "0.5,0.75,4");
    }

    #[test]
    fn complex_field_has_both_columns() {
        let grid = Grid::cell_centered(3, 1.5, Boundary::ZeroFlux).unwrap();
        let traj = Trajectory::from_data(
            grid,
            Channels::Complex,
            0.0,
            1.0,
            vec![1.0, -1.0, 2.0, -2.0, 3.0, -3.0],
        )
        .unwrap();
        let coords = grid.coords();
        let field = Field::of(&traj, &coords);
        let text = csv_of(&field, Some(&field));
        assert!(text.starts_with("t,x,value,value_im,compare,compare_im\n"));
        assert!(text.contains("0,0.25,1,-1,1,-1"));
        assert_eq!(text.lines().count(), 4);
    }
}
