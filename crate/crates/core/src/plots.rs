//! Plot-ready data files distilled from a completed run directory:
//! reward-per-epoch curves, state/control trajectory bands (mean with 2nd and
//! 98th percentiles), and optional side-by-side overlays against an NMPC
//! evaluation run. Rendering is left to external tooling; a README in the
//! output directory documents every column.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::percentile;
use crate::rundir::{fmt_f64, RunDir};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::config(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<Option<f64>> = line
            .split(',')
            .map(|cell| {
                if cell.is_empty() {
                    None
                } else {
                    cell.parse::<f64>().ok()
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn column(table: &Table, name: &str) -> Result<usize> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::config(format!("missing column '{name}'")))
}

/// (interval, per-dimension samples) bands out of a trajectories table.
struct Bands {
    /// Dimension column names in input order (x0.., or u0..).
    names: Vec<String>,
    /// rows[t][dim] = (mean, p2, p98)
    rows: Vec<Vec<(f64, f64, f64)>>,
}

fn trajectory_bands(table: &Table, prefix: char) -> Result<Bands> {
    let t_col = column(table, "t")?;
    let dims: Vec<(usize, String)> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(prefix))
        .map(|(i, h)| (i, h.clone()))
        .collect();
    if dims.is_empty() {
        return Err(Error::config(format!("no '{prefix}*' columns")));
    }
    let t_max = table
        .rows
        .iter()
        .filter_map(|r| r[t_col])
        .fold(0.0f64, f64::max) as usize;
    let mut samples: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); dims.len()]; t_max + 1];
    for row in &table.rows {
        let t = row[t_col].ok_or_else(|| Error::config("missing t cell"))? as usize;
        for (d, (col, _)) in dims.iter().enumerate() {
            if let Some(v) = row[*col] {
                samples[t][d].push(v);
            }
        }
    }
    let mut rows = Vec::new();
    for per_dim in &mut samples {
        if per_dim.iter().all(|s| s.is_empty()) {
            continue;
        }
        let mut out = Vec::with_capacity(dims.len());
        for s in per_dim.iter_mut() {
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            out.push((mean, percentile(s, 2.0), percentile(s, 98.0)));
        }
        rows.push(out);
    }
    Ok(Bands {
        names: dims.into_iter().map(|(_, n)| n).collect(),
        rows,
    })
}

fn write_band_file(path: &Path, bands: &Bands) -> Result<()> {
    let mut w = fs::File::create(path)?;
    let mut header = String::from("interval");
    for n in &bands.names {
        header.push_str(&format!(",{n}_mean,{n}_p2,{n}_p98"));
    }
    writeln!(w, "{header}")?;
    for (t, row) in bands.rows.iter().enumerate() {
        let mut line = t.to_string();
        for (mean, p2, p98) in row {
            line.push_str(&format!(",{},{},{}", fmt_f64(*mean), fmt_f64(*p2), fmt_f64(*p98)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn write_overlay_band_file(path: &Path, rl: &Bands, nmpc: &Bands) -> Result<()> {
    if rl.rows.len() != nmpc.rows.len() || rl.names != nmpc.names {
        return Err(Error::config(
            "rl and nmpc trajectories do not share a time grid",
        ));
    }
    let mut w = fs::File::create(path)?;
    let mut header = String::from("method,interval");
    for n in &rl.names {
        header.push_str(&format!(",{n}_mean,{n}_p2,{n}_p98"));
    }
    writeln!(w, "{header}")?;
    for (method, bands) in [("rl", rl), ("nmpc", nmpc)] {
        for (t, row) in bands.rows.iter().enumerate() {
            let mut line = format!("{method},{t}");
            for (mean, p2, p98) in row {
                line.push_str(&format!(
                    ",{},{},{}",
                    fmt_f64(*mean),
                    fmt_f64(*p2),
                    fmt_f64(*p98)
                ));
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

const PLOTS_README: &str = "\
# Plot data

All files are plain CSV with one header row; every numeric cell carries 17
significant digits.

- `reward_per_epoch.csv`: columns `phase` (offline|online), `epoch`,
  `mean_return`, `std_return` - one row per training epoch, offline rows
  first.
- `states_band.csv`: columns `interval`, then `x<i>_mean`, `x<i>_p2`,
  `x<i>_p98` per state - Monte-Carlo mean and 2nd/98th percentiles of each
  state at each interval of the final-policy evaluation.
- `controls_band.csv`: same layout over the applied controls `u<i>`
  (one row per control interval).
- `overlay_returns.csv` (with --nmpc): columns `method` (rl|nmpc),
  `episode`, `return`.
- `overlay_states_band.csv`, `overlay_controls_band.csv` (with --nmpc):
  the band layout above with a leading `method` column on an identical
  interval grid.
";

/// Emits plot data from a completed run into `out` (fresh files only).
/// `nmpc_run` optionally points at a completed `nmpc-eval` run of the same
/// plant for RL-vs-NMPC overlays.
pub fn emit_plot_data(run_dir: &Path, nmpc_run: Option<&Path>, out: &Path) -> Result<()> {
    let run = RunDir::open_complete(run_dir)?;
    fs::create_dir_all(out)?;

    // Reward per epoch from whichever progress files the run produced.
    let mut reward_rows: Vec<(String, usize, f64, f64)> = Vec::new();
    for (phase, file) in [("offline", "progress_offline.csv"), ("online", "progress_online.csv")]
    {
        let path = run.path(file);
        if !path.exists() {
            continue;
        }
        let table = read_csv(&path)?;
        let e = column(&table, "epoch")?;
        let m = column(&table, "mean_return")?;
        let s = column(&table, "std_return")?;
        for row in &table.rows {
            reward_rows.push((
                phase.to_string(),
                row[e].unwrap_or(0.0) as usize,
                row[m].ok_or_else(|| Error::config("missing mean_return"))?,
                row[s].ok_or_else(|| Error::config("missing std_return"))?,
            ));
        }
    }
    if !reward_rows.is_empty() {
        let path = fresh(out, "reward_per_epoch.csv")?;
        let mut w = fs::File::create(path)?;
        writeln!(w, "phase,epoch,mean_return,std_return")?;
        for (phase, epoch, mean, std) in &reward_rows {
            writeln!(w, "{phase},{epoch},{},{}", fmt_f64(*mean), fmt_f64(*std))?;
        }
    }

    // Trajectory bands from the final evaluation.
    let traj_path = run.path("eval/trajectories.csv");
    let mut rl_states = None;
    let mut rl_controls = None;
    if traj_path.exists() {
        let table = read_csv(&traj_path)?;
        let states = trajectory_bands(&table, 'x')?;
        let controls = trajectory_bands(&table, 'u')?;
        write_band_file(&fresh(out, "states_band.csv")?, &states)?;
        write_band_file(&fresh(out, "controls_band.csv")?, &controls)?;
        rl_states = Some(states);
        rl_controls = Some(controls);
    }

    if let Some(nmpc_dir) = nmpc_run {
        let nmpc = RunDir::open_complete(nmpc_dir)?;
        let nmpc_traj = read_csv(&nmpc.path("eval/trajectories.csv"))?;
        let nmpc_states = trajectory_bands(&nmpc_traj, 'x')?;
        let nmpc_controls = trajectory_bands(&nmpc_traj, 'u')?;
        let (Some(rl_states), Some(rl_controls)) = (&rl_states, &rl_controls) else {
            return Err(Error::config(
                "overlays need eval/trajectories.csv in the policy run",
            ));
        };
        write_overlay_band_file(&fresh(out, "overlay_states_band.csv")?, rl_states, &nmpc_states)?;
        write_overlay_band_file(
            &fresh(out, "overlay_controls_band.csv")?,
            rl_controls,
            &nmpc_controls,
        )?;

        let rl_returns = read_csv(&run.path("eval/returns.csv"))?;
        let nmpc_returns = read_csv(&nmpc.path("eval/returns.csv"))?;
        let path = fresh(out, "overlay_returns.csv")?;
        let mut w = fs::File::create(path)?;
        writeln!(w, "method,episode,return")?;
        for (method, table) in [("rl", &rl_returns), ("nmpc", &nmpc_returns)] {
            let e = column(table, "episode")?;
            let r = column(table, "return")?;
            for row in &table.rows {
                writeln!(
                    w,
                    "{method},{},{}",
                    row[e].unwrap_or(0.0) as usize,
                    fmt_f64(row[r].ok_or_else(|| Error::config("missing return"))?)
                )?;
            }
        }
    }

    fs::write(fresh(out, "README.md")?, PLOTS_README)?;
    Ok(())
}

fn fresh(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let path = dir.join(name);
    if path.exists() {
        return Err(Error::config(format!(
            "{} already exists; emit-plots never overwrites",
            path.display()
        )));
    }
    Ok(path)
}
