//! Single-link Moskowitz function via the generalized Lax-Hopf formula.
//!
//! `N(t, x)` is the infimum over backward characteristics of a value
//! condition plus the transported cost `τ f*(u)`. With piecewise-linear
//! initial, upstream and downstream conditions, every candidate family is
//! convex on each linear piece of its condition (the cost term is a
//! perspective of the convex `f*`), so the minimum over a piece is attained
//! at a piece endpoint or at the unique stationary speed. For the triangular
//! diagram `f*` is affine and endpoints suffice.
//!
//! Stationary points, per condition piece of slope `m`:
//! - initial (`m = −ρ0`): `u = f'(ρ0)`;
//! - upstream (`m = q`): `u = f'(ρ)` with `ρ` on the free branch, `f(ρ) = q`;
//! - downstream (`m = q`): `u = f'(ρ)` with `ρ` on the congested branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::FundamentalDiagram;
use crate::network::{SignalModel, SignalSchedule};
use crate::profile::StepProfile;

/// Tolerance on coordinates when checking that a condition covers a range.
const RANGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    Initial,
    Upstream,
    Downstream,
}

/// Continuous piecewise-linear value condition, stored as breakpoints.
///
/// Boundary conditions are functions of time and non-decreasing; the initial
/// condition is a function of space and non-increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueCondition {
    kind: ConditionKind,
    coords: Vec<f64>,
    values: Vec<f64>,
}

impl ValueCondition {
    pub fn new(kind: ConditionKind, points: &[(f64, f64)]) -> Result<Self> {
        let Some(&(c0, v0)) = points.first() else {
            return Err(Error::InvalidScenario("value condition needs a breakpoint".into()));
        };
        let mut cond = Self {
            kind,
            coords: vec![c0],
            values: vec![v0],
        };
        for &(c, v) in &points[1..] {
            cond.push(c, v)?;
        }
        Ok(cond)
    }

    /// Boundary condition starting at `(0, 0)`.
    pub fn boundary_origin(kind: ConditionKind) -> Self {
        Self {
            kind,
            coords: vec![0.0],
            values: vec![0.0],
        }
    }

    /// Large constant condition standing in for "unconstrained":
    /// `ρ_j L + C T` exceeds any count the link can realize.
    pub fn unconstrained(kind: ConditionKind, dom: &LinkDomain) -> Self {
        let big = dom.fd.jam_density() * dom.length() + dom.fd.capacity() * dom.horizon;
        let (lo, hi) = match kind {
            ConditionKind::Initial => (dom.a, dom.b),
            _ => (0.0, dom.horizon),
        };
        Self {
            kind,
            coords: vec![lo, hi],
            values: vec![big, big],
        }
    }

    /// Initial condition `N_ini(x) = −∫_a^x ρ0(s) ds` for piecewise-constant
    /// densities given as `(segment start, density)` pairs covering `[a, b]`.
    pub fn initial_from_densities(dom: &LinkDomain, segments: &[(f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Self::new(ConditionKind::Initial, &[(dom.a, 0.0), (dom.b, 0.0)]);
        }
        let mut points = vec![(dom.a, 0.0)];
        let mut value = 0.0;
        for (i, &(start, rho)) in segments.iter().enumerate() {
            if !(0.0..=dom.fd.jam_density()).contains(&rho) {
                return Err(Error::Domain {
                    quantity: "initial density",
                    value: rho,
                    lo: 0.0,
                    hi: dom.fd.jam_density(),
                });
            }
            let lo = start.max(dom.a);
            let hi = segments.get(i + 1).map_or(dom.b, |n| n.0.min(dom.b));
            if i == 0 && start > dom.a + RANGE_TOL {
                return Err(Error::InvalidScenario("initial densities must start at a".into()));
            }
            if hi > lo {
                value -= rho * (hi - lo);
                points.push((hi, value));
            }
        }
        Self::new(ConditionKind::Initial, &points)
    }

    pub fn uniform_initial(dom: &LinkDomain, density: f64) -> Result<Self> {
        Self::initial_from_densities(dom, &[(dom.a, density)])
    }

    pub fn kind(&self) -> ConditionKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        (self.coords[0], *self.coords.last().expect("non-empty"))
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coords.iter().copied().zip(self.values.iter().copied())
    }

    /// Same condition with every value moved by `dv`.
    pub fn shifted(&self, dv: f64) -> Self {
        Self {
            kind: self.kind,
            coords: self.coords.clone(),
            values: self.values.iter().map(|v| v + dv).collect(),
        }
    }

    /// Appends a breakpoint beyond the current range.
    pub fn push(&mut self, coord: f64, value: f64) -> Result<()> {
        let (_, hi) = self.range();
        let last = self.last_value();
        if !(coord > hi) {
            return Err(Error::InvalidScenario(format!(
                "breakpoint {coord} does not extend condition ending at {hi}"
            )));
        }
        let monotone = match self.kind {
            ConditionKind::Initial => value <= last + 1e-12,
            _ => value >= last - 1e-12,
        };
        if !monotone || !value.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "{:?} condition must be monotone: {last} then {value}",
                self.kind
            )));
        }
        self.coords.push(coord);
        self.values.push(value);
        Ok(())
    }

    /// Extends a boundary condition by `rate · dt`.
    pub fn extend_by_rate(&mut self, dt: f64, rate: f64) -> Result<()> {
        let (_, hi) = self.range();
        let last = self.last_value();
        self.push(hi + dt, last + rate * dt)
    }

    pub fn eval(&self, c: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if c < lo - RANGE_TOL || c > hi + RANGE_TOL {
            return Err(Error::InsufficientHistory { at: c, lo, hi });
        }
        let c = c.clamp(lo, hi);
        if self.coords.len() == 1 {
            return Ok(self.values[0]);
        }
        let idx = self.coords.partition_point(|&x| x <= c).clamp(1, self.coords.len() - 1);
        Ok(self.piece(idx - 1).value_at(c))
    }

    fn piece_count(&self) -> usize {
        self.coords.len().saturating_sub(1)
    }

    fn piece(&self, i: usize) -> Piece {
        Piece {
            c0: self.coords[i],
            c1: self.coords[i + 1],
            v0: self.values[i],
            v1: self.values[i + 1],
        }
    }

    /// Pieces overlapping `[lo, hi]`, clipped to it. A single-breakpoint
    /// condition yields a degenerate piece.
    fn pieces_in(&self, lo: f64, hi: f64) -> Result<Vec<Piece>> {
        let (r0, r1) = self.range();
        if lo < r0 - RANGE_TOL || hi > r1 + RANGE_TOL {
            let at = if lo < r0 - RANGE_TOL { lo } else { hi };
            return Err(Error::InsufficientHistory { at, lo: r0, hi: r1 });
        }
        let lo = lo.max(r0);
        let hi = hi.min(r1);
        if self.piece_count() == 0 {
            return Ok(vec![Piece {
                c0: r0,
                c1: r0,
                v0: self.values[0],
                v1: self.values[0],
            }]);
        }
        let start = self.coords.partition_point(|&x| x <= lo).clamp(1, self.coords.len() - 1) - 1;
        let mut out = Vec::new();
        for i in start..self.piece_count() {
            let p = self.piece(i);
            if p.c0 > hi {
                break;
            }
            let a = p.c0.max(lo);
            let b = p.c1.min(hi);
            if b >= a {
                out.push(Piece {
                    c0: a,
                    c1: b,
                    v0: p.value_at(a),
                    v1: p.value_at(b),
                });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    c0: f64,
    c1: f64,
    v0: f64,
    v1: f64,
}

impl Piece {
    fn slope(&self) -> f64 {
        if self.c1 > self.c0 {
            (self.v1 - self.v0) / (self.c1 - self.c0)
        } else {
            0.0
        }
    }

    fn value_at(&self, c: f64) -> f64 {
        if self.c1 <= self.c0 {
            return self.v0;
        }
        let c = c.clamp(self.c0, self.c1);
        self.v0 + (self.v1 - self.v0) * (c - self.c0) / (self.c1 - self.c0)
    }
}

/// Space-time domain `[0, T] × [a, b]` of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDomain {
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
    pub fd: FundamentalDiagram,
}

impl LinkDomain {
    pub fn new(a: f64, b: f64, horizon: f64, fd: FundamentalDiagram) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidScenario(format!("link needs b > a, got [{a}, {b}]")));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidScenario(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { a, b, horizon, fd })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    fn check_point(&self, t: f64, x: f64) -> Result<()> {
        if !(0.0..=self.horizon + RANGE_TOL).contains(&t) {
            return Err(Error::Domain {
                quantity: "time",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        if x < self.a - RANGE_TOL || x > self.b + RANGE_TOL {
            return Err(Error::Domain {
                quantity: "position",
                value: x,
                lo: self.a,
                hi: self.b,
            });
        }
        Ok(())
    }
}

/// The four subregions of the link domain, by which boundaries can reach a
/// point along characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Initial data only.
    I,
    /// Initial and upstream data.
    II,
    /// Initial and downstream data.
    III,
    /// All three.
    IV,
}

pub fn classify_domain(dom: &LinkDomain, t: f64, x: f64) -> Result<Region> {
    dom.check_point(t, x)?;
    let v = dom.fd.free_flow_speed();
    let w = dom.fd.backward_wave_speed();
    let from_up = x < dom.a + v * t;
    let from_down = x > dom.b - w * t;
    Ok(match (from_up, from_down) {
        (false, false) => Region::I,
        (true, false) => Region::II,
        (false, true) => Region::III,
        (true, true) => Region::IV,
    })
}

/// Initial condition plus optional boundary conditions. A missing boundary
/// condition is unconstrained, which is equivalent to
/// [`ValueCondition::unconstrained`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkConditions {
    pub initial: ValueCondition,
    pub upstream: Option<ValueCondition>,
    pub downstream: Option<ValueCondition>,
}

impl LinkConditions {
    pub fn new(
        dom: &LinkDomain,
        initial: ValueCondition,
        upstream: Option<ValueCondition>,
        downstream: Option<ValueCondition>,
    ) -> Result<Self> {
        if initial.kind != ConditionKind::Initial {
            return Err(Error::InvalidScenario("initial condition has wrong kind".into()));
        }
        let (lo, hi) = initial.range();
        if lo > dom.a + RANGE_TOL || hi < dom.b - RANGE_TOL {
            return Err(Error::InvalidScenario("initial condition must cover the link".into()));
        }
        let rho_j = dom.fd.jam_density();
        for i in 0..initial.piece_count() {
            let density = -initial.piece(i).slope();
            if density > rho_j * (1.0 + 1e-9) {
                return Err(Error::Domain {
                    quantity: "initial density",
                    value: density,
                    lo: 0.0,
                    hi: rho_j,
                });
            }
        }
        for (cond, kind) in [
            (&upstream, ConditionKind::Upstream),
            (&downstream, ConditionKind::Downstream),
        ] {
            if let Some(c) = cond {
                if c.kind != kind {
                    return Err(Error::InvalidScenario(format!("expected {kind:?} condition")));
                }
            }
        }
        Ok(Self {
            initial,
            upstream,
            downstream,
        })
    }
}

/// `N(t, x)` under the given conditions.
pub fn evaluate_moskowitz(dom: &LinkDomain, vc: &LinkConditions, t: f64, x: f64) -> Result<f64> {
    dom.check_point(t, x)?;
    moskowitz(dom, &vc.initial, vc.upstream.as_ref(), vc.downstream.as_ref(), t, x)
}

fn moskowitz(
    dom: &LinkDomain,
    initial: &ValueCondition,
    upstream: Option<&ValueCondition>,
    downstream: Option<&ValueCondition>,
    t: f64,
    x: f64,
) -> Result<f64> {
    let x = x.clamp(dom.a, dom.b);
    let t = t.max(0.0);
    if t == 0.0 {
        return initial.eval(x);
    }
    let mut best = initial_candidates(dom, initial, t, x)?;
    if let Some(up) = upstream {
        best = best.min(upstream_candidates(dom, up, t, x)?);
    }
    if let Some(down) = downstream {
        best = best.min(downstream_candidates(dom, down, t, x)?);
    }
    Ok(best)
}

/// `min_u N_ini(x − u t) + t f*(u)` over speeds whose foot lies in `[a, b]`.
fn initial_candidates(dom: &LinkDomain, initial: &ValueCondition, t: f64, x: f64) -> Result<f64> {
    let fd = &dom.fd;
    let u_lo = (-fd.backward_wave_speed()).max((x - dom.b) / t);
    let u_hi = fd.free_flow_speed().min((x - dom.a) / t);
    let xi_lo = (x - u_hi * t).max(dom.a);
    let xi_hi = (x - u_lo * t).min(dom.b);
    let mut best = f64::INFINITY;
    for p in initial.pieces_in(xi_lo, xi_hi)? {
        let ua = ((x - p.c1) / t).clamp(u_lo, u_hi);
        let ub = ((x - p.c0) / t).clamp(u_lo, u_hi);
        let cost = |u: f64| p.value_at(x - u * t) + t * fd.legendre_unchecked(u);
        best = best.min(cost(ua)).min(cost(ub));
        let density = (-p.slope()).clamp(0.0, fd.jam_density());
        if let Some(u) = fd.characteristic_speed(density) {
            if u > ua && u < ub {
                best = best.min(cost(u));
            }
        }
    }
    Ok(best)
}

/// `min_s N_up(t − s) + s f*((x − a)/s)` for `s ∈ [(x − a)/v, t]`.
fn upstream_candidates(dom: &LinkDomain, up: &ValueCondition, t: f64, x: f64) -> Result<f64> {
    let fd = &dom.fd;
    let d = x - dom.a;
    let s_min = d / fd.free_flow_speed();
    if s_min > t {
        return Ok(f64::INFINITY);
    }
    let cost_term = |s: f64| {
        if d <= 0.0 {
            s * fd.capacity()
        } else {
            s * fd.legendre_unchecked((d / s).min(fd.free_flow_speed()))
        }
    };
    let mut best = f64::INFINITY;
    for p in up.pieces_in(0.0, t - s_min)? {
        let sa = (t - p.c1).max(s_min);
        let sb = (t - p.c0).min(t);
        let cost = |s: f64| p.value_at(t - s) + cost_term(s);
        best = best.min(cost(sa)).min(cost(sb));
        let q = p.slope();
        if d > 0.0 && q < fd.capacity() {
            let rho = fd.free_inverse(q.max(0.0))?;
            if let Some(u) = fd.characteristic_speed(rho) {
                if u > 0.0 {
                    let s = d / u;
                    if s > sa && s < sb {
                        best = best.min(cost(s));
                    }
                }
            }
        }
    }
    Ok(best)
}

/// `min_s N_down(t − s) + s f*(−(b − x)/s)` for `s ∈ [(b − x)/w, t]`.
fn downstream_candidates(dom: &LinkDomain, down: &ValueCondition, t: f64, x: f64) -> Result<f64> {
    let fd = &dom.fd;
    let e = dom.b - x;
    let s_min = e / fd.backward_wave_speed();
    if s_min > t {
        return Ok(f64::INFINITY);
    }
    let cost_term = |s: f64| {
        if e <= 0.0 {
            s * fd.capacity()
        } else {
            s * fd.legendre_unchecked((-e / s).max(-fd.backward_wave_speed()))
        }
    };
    let mut best = f64::INFINITY;
    for p in down.pieces_in(0.0, t - s_min)? {
        let sa = (t - p.c1).max(s_min);
        let sb = (t - p.c0).min(t);
        let cost = |s: f64| p.value_at(t - s) + cost_term(s);
        best = best.min(cost(sa)).min(cost(sb));
        let q = p.slope();
        if e > 0.0 && q < fd.capacity() {
            let rho = fd.congested_inverse(q.max(0.0))?;
            if let Some(u) = fd.characteristic_speed(rho) {
                if u < 0.0 {
                    let s = -e / u;
                    if s > sa && s < sb {
                        best = best.min(cost(s));
                    }
                }
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkEnd {
    Upstream,
    Downstream,
}

fn check_increment(dom: &LinkDomain, t: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::Domain {
            quantity: "difference step",
            value: delta,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    dom.check_point(t + delta, dom.a)
}

/// Difference quotient `(N(t + δ, x_end) − N(t, x_end)) / δ`.
pub fn boundary_flow(
    dom: &LinkDomain,
    vc: &LinkConditions,
    t: f64,
    end: LinkEnd,
    delta: f64,
) -> Result<f64> {
    check_increment(dom, t, delta)?;
    let x = match end {
        LinkEnd::Upstream => dom.a,
        LinkEnd::Downstream => dom.b,
    };
    let n0 = evaluate_moskowitz(dom, vc, t, x)?;
    let n1 = evaluate_moskowitz(dom, vc, t + delta, x)?;
    Ok(((n1 - n0) / delta).max(0.0))
}

/// Clamps a difference quotient to `[0, C]`; round-off residue of counts
/// near zero is read as no flow.
fn capability(dom: &LinkDomain, quotient: f64) -> f64 {
    let cap = dom.fd.capacity();
    if quotient < 1e-12 * cap {
        0.0
    } else {
        quotient.min(cap)
    }
}

/// Sending capability at the exit: `min{C, (Ñ(t+δ, b) − N(t, b)) / δ}` where
/// `Ñ` ignores the downstream condition.
pub fn link_demand(dom: &LinkDomain, vc: &LinkConditions, t: f64, delta: f64) -> Result<f64> {
    check_increment(dom, t, delta)?;
    demand_with(dom, vc, t, delta)
}

pub(crate) fn demand_with(dom: &LinkDomain, vc: &LinkConditions, t: f64, delta: f64) -> Result<f64> {
    let up = vc.upstream.as_ref();
    let now = moskowitz(dom, &vc.initial, up, vc.downstream.as_ref(), t, dom.b)?;
    let free = moskowitz(dom, &vc.initial, up, None, t + delta, dom.b)?;
    Ok(capability(dom, (free - now) / delta))
}

/// Receiving capability at the entrance: `min{C, (Ñ'(t+δ, a) − N(t, a)) / δ}`
/// where `Ñ'` ignores the upstream condition.
pub fn link_supply(dom: &LinkDomain, vc: &LinkConditions, t: f64, delta: f64) -> Result<f64> {
    check_increment(dom, t, delta)?;
    supply_with(dom, vc, t, delta)
}

pub(crate) fn supply_with(dom: &LinkDomain, vc: &LinkConditions, t: f64, delta: f64) -> Result<f64> {
    let down = vc.downstream.as_ref();
    let now = moskowitz(dom, &vc.initial, vc.upstream.as_ref(), down, t, dom.a)?;
    let free = moskowitz(dom, &vc.initial, None, down, t + delta, dom.a)?;
    Ok(capability(dom, (free - now) / delta))
}

/// Downstream condition built from an effective supply history and a signal:
/// `∫₀ᵗ 𝒮(τ) u(τ) dτ` for the on-and-off model, `∫₀ᵗ η(τ) 𝒮(τ) dτ` for the
/// continuum model. Breakpoints fall on supply changes and on signal switches
/// (or split changes), so the condition is exact.
pub fn make_downstream_condition(
    supply: &StepProfile,
    schedule: &SignalSchedule,
    phase: usize,
    model: SignalModel,
    horizon: f64,
) -> Result<ValueCondition> {
    if phase >= schedule.phase_count() {
        return Err(Error::InvalidControl(format!("phase {phase} not in schedule")));
    }
    let mut cuts: Vec<f64> = vec![0.0, horizon];
    cuts.extend(supply.breakpoints(0.0, horizon));
    match model {
        SignalModel::OnOff => cuts.extend(schedule.switch_times(phase, 0.0, horizon)),
        SignalModel::Continuum => cuts.extend(
            schedule
                .plan()
                .iter()
                .map(|p| p.start)
                .filter(|&s| s > 0.0 && s < horizon),
        ),
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut cond = ValueCondition::boundary_origin(ConditionKind::Downstream);
    for pair in cuts.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let mid = 0.5 * (t0 + t1);
        let gate = match model {
            SignalModel::OnOff => f64::from(u8::from(schedule.is_green(phase, mid))),
            SignalModel::Continuum => schedule.share(phase, mid),
        };
        cond.extend_by_rate(t1 - t0, supply.rate_at(mid) * gate)?;
    }
    Ok(cond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tri_domain() -> LinkDomain {
        LinkDomain::new(0.0, 400.0, 1500.0, FundamentalDiagram::reference_triangular()).unwrap()
    }

    fn gs_domain() -> LinkDomain {
        LinkDomain::new(0.0, 400.0, 1500.0, FundamentalDiagram::reference_greenshields()).unwrap()
    }

    fn linear(kind: ConditionKind, rate: f64, horizon: f64) -> ValueCondition {
        ValueCondition::new(kind, &[(0.0, 0.0), (horizon, rate * horizon)]).unwrap()
    }

    #[test]
    fn classify_examples() {
        let dom = tri_domain();
        assert_eq!(classify_domain(&dom, 10.0, 200.0).unwrap(), Region::I);
        assert_eq!(classify_domain(&dom, 60.0, 100.0).unwrap(), Region::II);
        assert_eq!(classify_domain(&dom, 0.0, 250.0).unwrap(), Region::I);
        assert_eq!(classify_domain(&dom, 10.0, 390.0).unwrap(), Region::III);
        assert_eq!(classify_domain(&dom, 100.0, 200.0).unwrap(), Region::IV);
        assert!(classify_domain(&dom, 10.0, 401.0).is_err());
        assert!(classify_domain(&dom, -1.0, 1.0).is_err());
    }

    #[test]
    fn empty_link_stays_empty() {
        for dom in [tri_domain(), gs_domain()] {
            let vc = LinkConditions::new(
                &dom,
                ValueCondition::uniform_initial(&dom, 0.0).unwrap(),
                Some(linear(ConditionKind::Upstream, 0.0, 1500.0)),
                Some(ValueCondition::unconstrained(ConditionKind::Downstream, &dom)),
            )
            .unwrap();
            for &(t, x) in &[(0.0, 0.0), (10.0, 200.0), (500.0, 400.0), (1500.0, 37.0)] {
                assert!(evaluate_moskowitz(&dom, &vc, t, x).unwrap().abs() < 1e-12);
            }
            assert_eq!(boundary_flow(&dom, &vc, 100.0, LinkEnd::Downstream, 1.0).unwrap(), 0.0);
            assert_eq!(link_demand(&dom, &vc, 100.0, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn free_flow_characteristic() {
        let dom = tri_domain();
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.0).unwrap(),
            Some(linear(ConditionKind::Upstream, 1.0, 1500.0)),
            None,
        )
        .unwrap();
        let n = evaluate_moskowitz(&dom, &vc, 60.0, 400.0).unwrap();
        assert_relative_eq!(n, 30.0, max_relative = 1e-12);
        let q = boundary_flow(&dom, &vc, 100.0, LinkEnd::Downstream, 1.0).unwrap();
        assert_relative_eq!(q, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn red_light_caps_exit() {
        for dom in [tri_domain(), gs_domain()] {
            let rho_c = dom.fd.critical_density();
            let initial = ValueCondition::uniform_initial(&dom, rho_c).unwrap();
            let anchor = initial.eval(dom.b).unwrap();
            let red = ValueCondition::new(ConditionKind::Downstream, &[(0.0, anchor), (1500.0, anchor)]).unwrap();
            let vc = LinkConditions::new(&dom, initial, None, Some(red)).unwrap();
            for i in 0..20 {
                let t = 75.0 * i as f64;
                let n = evaluate_moskowitz(&dom, &vc, t, 400.0).unwrap();
                assert!((n - anchor).abs() < 1e-9, "N({t}, b) = {n}");
            }
            assert_eq!(boundary_flow(&dom, &vc, 10.0, LinkEnd::Downstream, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn demand_free_branch_and_queue() {
        let dom = tri_domain();
        // uncongested exit at density 0.05
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.05).unwrap(),
            Some(linear(ConditionKind::Upstream, 2.0 / 3.0, 1500.0)),
            None,
        )
        .unwrap();
        assert_relative_eq!(link_demand(&dom, &vc, 10.0, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-9);
        // queue held by a red light
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.05).unwrap(),
            Some(linear(ConditionKind::Upstream, 2.0 / 3.0, 1500.0)),
            Some(linear(ConditionKind::Downstream, 0.0, 1500.0)),
        )
        .unwrap();
        assert_relative_eq!(link_demand(&dom, &vc, 100.0, 1.0).unwrap(), 4.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn supply_branches() {
        let dom = tri_domain();
        let empty = ValueCondition::uniform_initial(&dom, 0.0).unwrap();
        let vc = LinkConditions::new(&dom, empty, None, None).unwrap();
        assert_relative_eq!(link_supply(&dom, &vc, 10.0, 1.0).unwrap(), 4.0 / 3.0, max_relative = 1e-12);
        // congested at ρ = 0.25 discharging at 2/3
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.25).unwrap(),
            None,
            Some(linear(ConditionKind::Downstream, 2.0 / 3.0, 1500.0)),
        )
        .unwrap();
        assert_relative_eq!(link_supply(&dom, &vc, 10.0, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-9);
        // jammed with a permanent red
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.4).unwrap(),
            None,
            Some(linear(ConditionKind::Downstream, 0.0, 1500.0)),
        )
        .unwrap();
        assert!(link_supply(&dom, &vc, 10.0, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn greenshields_rarefaction_matches_closed_form() {
        // jammed link, exit opens at t = 0 with unconstrained downstream:
        // the fan gives N(t, b) = t f*(0) = C t for all t.
        let dom = gs_domain();
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.4).unwrap(),
            None,
            None,
        )
        .unwrap();
        let n = evaluate_moskowitz(&dom, &vc, 20.0, 400.0).unwrap();
        // N_ini(b) = −160, plus C t
        assert_relative_eq!(n, -160.0 + 20.0 * 4.0 / 3.0, max_relative = 1e-12);
        // interior of the fan: x − b = u t, N = N_ini(b) + t f*(u)
        let u = -5.0;
        let t = 20.0;
        let n = evaluate_moskowitz(&dom, &vc, t, 400.0 + u * t).unwrap();
        let expected = -160.0 + t * dom.fd.legendre(u).unwrap();
        assert_relative_eq!(n, expected, max_relative = 1e-12);
    }

    #[test]
    fn insufficient_history_is_reported() {
        let dom = tri_domain();
        let vc = LinkConditions::new(
            &dom,
            ValueCondition::uniform_initial(&dom, 0.0).unwrap(),
            Some(linear(ConditionKind::Upstream, 1.0, 50.0)),
            None,
        )
        .unwrap();
        assert!(matches!(
            evaluate_moskowitz(&dom, &vc, 200.0, 400.0),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn downstream_condition_models() {
        let supply = StepProfile::constant(4.0 / 3.0);
        let sched = SignalSchedule::two_phase(60.0, 0.5, 0.0).unwrap();
        let onoff = make_downstream_condition(&supply, &sched, 0, SignalModel::OnOff, 600.0).unwrap();
        let cont = make_downstream_condition(&supply, &sched, 0, SignalModel::Continuum, 600.0).unwrap();
        assert_relative_eq!(onoff.eval(30.0).unwrap(), 40.0, max_relative = 1e-12);
        assert_relative_eq!(cont.eval(30.0).unwrap(), 20.0, max_relative = 1e-12);
        assert_relative_eq!(onoff.eval(30.0).unwrap() - cont.eval(30.0).unwrap(), 0.5 * 0.5 * 60.0 * 4.0 / 3.0, max_relative = 1e-12);
        for k in 0..10 {
            let t = 60.0 * k as f64;
            assert!((onoff.eval(t).unwrap() - cont.eval(t).unwrap()).abs() < 1e-9);
            assert_relative_eq!(cont.eval(t).unwrap(), 0.5 * 4.0 / 3.0 * t, epsilon = 1e-9);
        }
        let zero = StepProfile::constant(0.0);
        let z = make_downstream_condition(&zero, &sched, 0, SignalModel::OnOff, 600.0).unwrap();
        assert_eq!(z.last_value(), 0.0);
    }

    #[test]
    fn condition_monotonicity_enforced() {
        assert!(ValueCondition::new(ConditionKind::Upstream, &[(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(ValueCondition::new(ConditionKind::Initial, &[(0.0, 0.0), (1.0, 1.0)]).is_err());
        let mut c = ValueCondition::boundary_origin(ConditionKind::Upstream);
        assert!(c.push(0.0, 1.0).is_err());
        c.extend_by_rate(2.0, 0.5).unwrap();
        assert_eq!(c.eval(1.0).unwrap(), 0.5);
        assert!(c.eval(3.0).is_err());
    }
}
