//! Max-Q grids over the office map for one machine mode.

use std::io::Write;

use crate::envs::{Office, TabularEnv};
use crate::error::{Error, Result};
use crate::prm::HybridState;
use crate::product::Product;
use crate::tabular::QTable;

/// `grid[row][col]`: the largest action value at that cell, `None` on
/// walls.
pub type Heatmap = Vec<Vec<Option<f64>>>;

/// Joint machine index with the first machine that has a mode named `mode`
/// placed there at its initial `ψ`; every other machine stays initial.
pub fn mode_selection(product: &Product<Office>, mode: &str) -> Result<usize> {
    let mut states: Vec<HybridState> = product.machines.iter().map(|m| m.prm().initial_state()).collect();
    let (i, m) = product
        .machines
        .iter()
        .enumerate()
        .find_map(|(i, m)| m.prm().mode_index(mode).map(|m| (i, m)))
        .ok_or_else(|| Error::Lookup(format!("no attached machine has a mode named `{mode}`")))?;
    states[i].mode = m;
    product.joint_index(&states)
}

pub fn export_heatmap(q: &QTable, office: &Office, joint: usize) -> Result<Heatmap> {
    if q.n_cells() != office.num_cells() || joint >= q.n_machine() {
        return Err(Error::Config(format!(
            "q-table of {} cells × {} machine cells does not match the map ({} cells, machine index {joint})",
            q.n_cells(),
            q.n_machine(),
            office.num_cells()
        )));
    }
    let mut grid = vec![vec![None; office.width()]; office.height()];
    for (i, cell) in office.cells().iter().enumerate() {
        grid[cell.row][cell.col] = Some(q.max(i, joint));
    }
    Ok(grid)
}

/// CSV with columns `row,col,value`; walls leave `value` empty.
pub fn write_heatmap_csv<W: Write>(grid: &Heatmap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "value"])?;
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let value = v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([r.to_string(), c.to_string(), value])?;
        }
    }
    w.flush()?;
    Ok(())
}
