//! Simulation output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{Engine, SignalModel};
use crate::error::{Error, Result};
use crate::laxhopf::{evaluate_moskowitz, LinkConditions, LinkDomain};

/// Per-link series. Counts have one entry per grid time (`steps + 1`),
/// flows and capabilities one per step.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LinkSeries {
    pub id: String,
    pub n_up: Vec<f64>,
    pub n_down: Vec<f64>,
    pub q_in: Vec<f64>,
    pub q_out: Vec<f64>,
    pub demand: Vec<f64>,
    pub supply: Vec<f64>,
    /// Entrance in the congested phase during the step.
    pub entry_congested: Vec<bool>,
}

impl LinkSeries {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Self::default()
        }
    }

    /// Vehicles on the link at each grid time.
    pub fn occupancy(&self) -> Vec<f64> {
        self.n_up.iter().zip(&self.n_down).map(|(u, d)| u - d).collect()
    }

    pub fn write_csv<W: Write>(&self, times: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "N_up", "N_down", "q_in", "q_out", "demand", "supply"])?;
        let fmt = |v: Option<&f64>| v.map_or_else(String::new, |x| x.to_string());
        for (k, t) in times.iter().enumerate() {
            w.write_record([
                t.to_string(),
                self.n_up[k].to_string(),
                self.n_down[k].to_string(),
                fmt(self.q_in.get(k)),
                fmt(self.q_out.get(k)),
                fmt(self.demand.get(k)),
                fmt(self.supply.get(k)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub step: f64,
    pub times: Vec<f64>,
    pub model: SignalModel,
    pub engine: Engine,
    pub links: Vec<LinkSeries>,
    /// Final value conditions of each link, kept by the Lax-Hopf engine so
    /// that interior points can be evaluated.
    pub final_states: Option<Vec<(LinkDomain, LinkConditions)>>,
}

impl TrajectoryRecord {
    pub fn link_index(&self, id: &str) -> Result<usize> {
        self.links
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| Error::Comparison(format!("no link {id} in trajectory")))
    }

    pub fn link(&self, id: &str) -> Result<&LinkSeries> {
        Ok(&self.links[self.link_index(id)?])
    }

    /// `N(t, x)` at an interior point of link `link` (local coordinates).
    pub fn moskowitz_at(&self, link: usize, t: f64, x: f64) -> Result<f64> {
        let states = self
            .final_states
            .as_ref()
            .ok_or_else(|| Error::Comparison("trajectory has no link states".into()))?;
        let (dom, vc) = &states[link];
        evaluate_moskowitz(dom, vc, t, x)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.times.len() == other.times.len()
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && self.links.len() == other.links.len()
            && self.links.iter().zip(&other.links).all(|(a, b)| a.id == b.id)
    }

    /// Writes `<id>.csv` for every link into `dir`.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for link in &self.links {
            let file = std::fs::File::create(dir.join(format!("{}.csv", link.id)))?;
            link.write_csv(&self.times, std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}
