//! Concave flow-density laws.
//!
//! Two parameterizations are supported: the triangular diagram
//! `f(ρ) = min{vρ, w(ρ_j − ρ)}` and the Greenshields parabola
//! `f(ρ) = v0 ρ (1 − ρ/ρ_j)`. Densities are veh/m, speeds m/s, flows veh/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack within which out-of-range arguments are clamped instead of
/// rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdKind {
    Triangular,
    Greenshields,
}

impl FdKind {
    pub fn name(self) -> &'static str {
        match self {
            FdKind::Triangular => "triangular",
            FdKind::Greenshields => "greenshields",
        }
    }
}

/// Serialized form of a diagram. The derived quantities are not stored.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FdSpec {
    Triangular {
        free_flow_speed: f64,
        jam_density: f64,
        critical_density: f64,
    },
    Greenshields {
        free_flow_speed: f64,
        jam_density: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FdSpec", into = "FdSpec")]
pub struct FundamentalDiagram {
    kind: FdKind,
    v: f64,
    rho_j: f64,
    rho_c: f64,
    w: f64,
    capacity: f64,
}

impl TryFrom<FdSpec> for FundamentalDiagram {
    type Error = Error;

    fn try_from(spec: FdSpec) -> Result<Self> {
        match spec {
            FdSpec::Triangular {
                free_flow_speed,
                jam_density,
                critical_density,
            } => FundamentalDiagram::triangular(free_flow_speed, jam_density, critical_density),
            FdSpec::Greenshields {
                free_flow_speed,
                jam_density,
            } => FundamentalDiagram::greenshields(free_flow_speed, jam_density),
        }
    }
}

impl From<FundamentalDiagram> for FdSpec {
    fn from(fd: FundamentalDiagram) -> Self {
        match fd.kind {
            FdKind::Triangular => FdSpec::Triangular {
                free_flow_speed: fd.v,
                jam_density: fd.rho_j,
                critical_density: fd.rho_c,
            },
            FdKind::Greenshields => FdSpec::Greenshields {
                free_flow_speed: fd.v,
                jam_density: fd.rho_j,
            },
        }
    }
}

fn check_positive(quantity: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity,
            value,
            lo: 0.0,
            hi: f64::INFINITY,
        })
    }
}

/// Clamps `x` into `[lo, hi]` if it is within [`DOMAIN_SLACK`] of the
/// interval, errors otherwise.
fn clamp_domain(quantity: &'static str, x: f64, lo: f64, hi: f64) -> Result<f64> {
    if x >= lo && x <= hi {
        Ok(x)
    } else if x >= lo - DOMAIN_SLACK && x <= hi + DOMAIN_SLACK {
        Ok(x.clamp(lo, hi))
    } else {
        Err(Error::Domain {
            quantity,
            value: x,
            lo,
            hi,
        })
    }
}

impl FundamentalDiagram {
    /// Triangular diagram from free-flow speed, jam and critical density. The
    /// backward wave speed follows from continuity at the critical density.
    pub fn triangular(free_flow_speed: f64, jam_density: f64, critical_density: f64) -> Result<Self> {
        check_positive("free_flow_speed", free_flow_speed)?;
        check_positive("jam_density", jam_density)?;
        check_positive("critical_density", critical_density)?;
        if critical_density >= jam_density {
            return Err(Error::Domain {
                quantity: "critical_density",
                value: critical_density,
                lo: 0.0,
                hi: jam_density,
            });
        }
        let w = free_flow_speed * critical_density / (jam_density - critical_density);
        Ok(Self {
            kind: FdKind::Triangular,
            v: free_flow_speed,
            rho_j: jam_density,
            rho_c: critical_density,
            w,
            capacity: free_flow_speed * critical_density,
        })
    }

    pub fn greenshields(free_flow_speed: f64, jam_density: f64) -> Result<Self> {
        check_positive("free_flow_speed", free_flow_speed)?;
        check_positive("jam_density", jam_density)?;
        Ok(Self {
            kind: FdKind::Greenshields,
            v: free_flow_speed,
            rho_j: jam_density,
            rho_c: jam_density / 2.0,
            w: free_flow_speed,
            capacity: free_flow_speed * jam_density / 4.0,
        })
    }

    /// Triangular diagram with the link parameters used throughout the
    /// numerical experiments: v = 40/3 m/s, ρ_j = 0.4, ρ_c = 0.1.
    pub fn reference_triangular() -> Self {
        Self::triangular(40.0 / 3.0, 0.4, 0.1).expect("valid reference parameters")
    }

    /// Greenshields diagram with v0 = 40/3 m/s and ρ_j = 0.4.
    pub fn reference_greenshields() -> Self {
        Self::greenshields(40.0 / 3.0, 0.4).expect("valid reference parameters")
    }

    pub fn kind(&self) -> FdKind {
        self.kind
    }

    /// Forward (free-flow) wave speed `v = f'(0+)`.
    pub fn free_flow_speed(&self) -> f64 {
        self.v
    }

    /// Backward wave speed `w = −f'(ρ_j−)`.
    pub fn backward_wave_speed(&self) -> f64 {
        self.w
    }

    pub fn jam_density(&self) -> f64 {
        self.rho_j
    }

    pub fn critical_density(&self) -> f64 {
        self.rho_c
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Lower bound `b` on `−f''`; only defined for the strictly concave
    /// diagram.
    pub fn concavity_bound(&self) -> Option<f64> {
        match self.kind {
            FdKind::Triangular => None,
            FdKind::Greenshields => Some(2.0 * self.v / self.rho_j),
        }
    }

    pub fn flow(&self, rho: f64) -> Result<f64> {
        let rho = clamp_domain("density", rho, 0.0, self.rho_j)?;
        Ok(self.flow_unchecked(rho))
    }

    pub(crate) fn flow_unchecked(&self, rho: f64) -> f64 {
        match self.kind {
            FdKind::Triangular => (self.v * rho).min(self.w * (self.rho_j - rho)),
            FdKind::Greenshields => self.v * rho * (1.0 - rho / self.rho_j),
        }
    }

    /// Concave transform `f*(u) = sup_ρ {f(ρ) − uρ}` on `u ∈ [−w, v]`.
    pub fn legendre(&self, u: f64) -> Result<f64> {
        let u = clamp_domain("wave speed", u, -self.w, self.v)?;
        Ok(self.legendre_unchecked(u))
    }

    pub(crate) fn legendre_unchecked(&self, u: f64) -> f64 {
        match self.kind {
            FdKind::Triangular => self.capacity - self.rho_c * u,
            FdKind::Greenshields => {
                let d = self.v - u;
                self.rho_j * d * d / (4.0 * self.v)
            }
        }
    }

    /// Congested-branch inverse: the largest density carrying flow `q`.
    pub fn congested_inverse(&self, q: f64) -> Result<f64> {
        let q = self.check_flow(q)?;
        Ok(match self.kind {
            FdKind::Triangular => self.rho_j - q / self.w,
            FdKind::Greenshields => {
                0.5 * self.rho_j * (1.0 + (1.0 - q / self.capacity).max(0.0).sqrt())
            }
        })
    }

    /// Free-branch inverse: the smallest density carrying flow `q`.
    pub fn free_inverse(&self, q: f64) -> Result<f64> {
        let q = self.check_flow(q)?;
        Ok(match self.kind {
            FdKind::Triangular => q / self.v,
            FdKind::Greenshields => {
                0.5 * self.rho_j * (1.0 - (1.0 - q / self.capacity).max(0.0).sqrt())
            }
        })
    }

    fn check_flow(&self, q: f64) -> Result<f64> {
        if q > self.capacity * (1.0 + 1e-12) + DOMAIN_SLACK {
            return Err(Error::InfeasibleFlow {
                flow: q,
                capacity: self.capacity,
            });
        }
        clamp_domain("flow", q, 0.0, self.capacity)
    }

    /// Characteristic speed `f'(ρ)`, if the diagram is differentiable there
    /// in a way that matters for minimization. Returns `None` for the
    /// triangular diagram, whose transform is affine.
    pub(crate) fn characteristic_speed(&self, rho: f64) -> Option<f64> {
        match self.kind {
            FdKind::Triangular => None,
            FdKind::Greenshields => Some(self.v * (1.0 - 2.0 * rho / self.rho_j)),
        }
    }

    /// Maximum rate of flow increase at the entrance of a fully congested
    /// link of length `length` between downward jumps: `w³ / (b L)`.
    pub fn oleinik_rate_bound(&self, length: f64) -> Result<f64> {
        check_positive("length", length)?;
        let b = self
            .concavity_bound()
            .ok_or(Error::UnsupportedDiagram(self.kind.name()))?;
        Ok(self.w.powi(3) / (b * length))
    }

    /// Flow carried by the rarefaction fan at the entrance of a congested
    /// link, `f((f')⁻¹(−L / (L/w + Δ_B)))`: the bound on supply jumps for a
    /// downstream signal of cycle `cycle`. Valid for any strictly concave
    /// diagram.
    pub fn rarefaction_jump_bound(&self, length: f64, cycle: f64) -> Result<f64> {
        check_positive("length", length)?;
        check_positive("cycle", cycle)?;
        match self.kind {
            FdKind::Triangular => Err(Error::UnsupportedDiagram(self.kind.name())),
            FdKind::Greenshields => {
                let speed = -length / (length / self.w + cycle);
                // invert f'(ρ) = v (1 − 2ρ/ρ_j)
                let rho = 0.5 * self.rho_j * (1.0 - speed / self.v);
                Ok(self.flow_unchecked(rho))
            }
        }
    }

    /// Closed form of [`rarefaction_jump_bound`](Self::rarefaction_jump_bound)
    /// for the Greenshields diagram:
    /// `ρ_j v0² Δ_B / 4 · (2L + v0 Δ_B) / (L + v0 Δ_B)²`.
    pub fn gs_jump_bound(&self, length: f64, cycle: f64) -> Result<f64> {
        check_positive("length", length)?;
        if self.kind != FdKind::Greenshields {
            return Err(Error::UnsupportedDiagram(self.kind.name()));
        }
        if !(cycle.is_finite() && cycle >= 0.0) {
            return Err(Error::Domain {
                quantity: "cycle",
                value: cycle,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let v0 = self.v;
        let denom = length + v0 * cycle;
        Ok(self.rho_j * v0 * v0 * cycle / 4.0 * (2.0 * length + v0 * cycle) / (denom * denom))
    }
}
