//! Independent finite-volume reference for single links: Godunov fluxes on
//! a fine grid, a point queue in front of the entrance and a prescribed
//! exit supply.

use signalflow_core::profile::StepProfile;
use signalflow_core::FundamentalDiagram;

pub struct SingleLink {
    pub fd: FundamentalDiagram,
    pub length: f64,
    /// `(start, density)` pairs covering the link.
    pub segments: Vec<(f64, f64)>,
    pub inflow: StepProfile,
    pub exit_supply: StepProfile,
    pub horizon: f64,
}

/// Cumulative counts at both ends, sampled every `sample` seconds.
/// `n_down` starts at minus the initial vehicle count.
pub struct Counts {
    pub n_up: Vec<f64>,
    pub n_down: Vec<f64>,
}

fn demand(fd: &FundamentalDiagram, rho: f64) -> f64 {
    fd.flow(rho.min(fd.critical_density())).unwrap()
}

fn supply(fd: &FundamentalDiagram, rho: f64) -> f64 {
    fd.flow(rho.max(fd.critical_density()).min(fd.jam_density())).unwrap()
}

/// Vehicles of the piecewise-constant density on `[x0, x1]`.
fn mass(segments: &[(f64, f64)], length: f64, x0: f64, x1: f64) -> f64 {
    segments
        .iter()
        .enumerate()
        .map(|(i, &(start, rho))| {
            let end = segments.get(i + 1).map_or(length, |s| s.0);
            (end.min(x1) - start.max(x0)).max(0.0) * rho
        })
        .sum()
}

pub fn solve(link: &SingleLink, cells: usize, sample: f64) -> Counts {
    let fd = &link.fd;
    let dx = link.length / cells as f64;
    let speed = fd.free_flow_speed().max(fd.backward_wave_speed());
    let per_sample = (sample * speed / (0.9 * dx)).ceil() as usize;
    let dt = sample / per_sample as f64;
    let mut rho: Vec<f64> = (0..cells)
        .map(|i| mass(&link.segments, link.length, i as f64 * dx, (i + 1) as f64 * dx) / dx)
        .collect();
    let initial = mass(&link.segments, link.length, 0.0, link.length);

    let samples = (link.horizon / sample).round() as usize;
    let (mut up, mut down, mut queue) = (0.0, -initial, 0.0);
    let mut out = Counts {
        n_up: vec![up],
        n_down: vec![down],
    };
    let mut flux = vec![0.0; cells + 1];
    let (mut d, mut sup) = (vec![0.0; cells], vec![0.0; cells]);
    for s in 0..samples {
        for m in 0..per_sample {
            let t = s as f64 * sample + m as f64 * dt;
            let arrivals = link.inflow.integral(t, t + dt);
            for i in 0..cells {
                d[i] = demand(fd, rho[i]);
                sup[i] = supply(fd, rho[i]);
            }
            flux[0] = ((queue + arrivals) / dt).min(sup[0]);
            queue = (queue + arrivals - flux[0] * dt).max(0.0);
            for i in 1..cells {
                flux[i] = d[i - 1].min(sup[i]);
            }
            flux[cells] = d[cells - 1].min(link.exit_supply.integral(t, t + dt) / dt);
            for i in 0..cells {
                rho[i] += dt / dx * (flux[i] - flux[i + 1]);
            }
            up += flux[0] * dt;
            down += flux[cells] * dt;
        }
        out.n_up.push(up);
        out.n_down.push(down);
    }
    out
}
