//! Grid reinforcement and power flow: transformer choice, voltage bands,
//! parallel cable settings, LinDistFlow voltage drops, octagonal line limits
//! and the node balances at the main busbar and passive buses.
//!
//! Squared voltages are modelled per unit (`u / V_base²`); flows are in kW
//! and kVAr.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{effective_cable_params, CableSetting, Network, Topology, VoltageBands};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Sense, VarId};
use crate::util::sanitize;

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Coefficients `(a, b, c)` of the eight half-planes
/// `a·p + b·q <= c·κ` describing the regular octagon inscribed in the circle
/// of radius κ.
pub const OCTAGON: [(f64, f64, f64); 8] = [
    (1.0, SQRT2 + 1.0, SQRT2 + 1.0),
    (1.0, SQRT2 - 1.0, 1.0),
    (1.0, -SQRT2 + 1.0, 1.0),
    (-1.0, SQRT2 + 1.0, SQRT2 + 1.0),
    (-1.0, -SQRT2 - 1.0, SQRT2 + 1.0),
    (-1.0, -SQRT2 + 1.0, 1.0),
    (-1.0, SQRT2 - 1.0, 1.0),
    (1.0, -SQRT2 - 1.0, SQRT2 + 1.0),
];

/// Whether `(p, q)` lies inside the octagon of radius `kappa`.
pub fn octagon_contains(p: f64, q: f64, kappa: f64, tol: f64) -> bool {
    OCTAGON.iter().all(|&(a, b, c)| a * p + b * q <= c * kappa + tol)
}

#[derive(Clone, Debug)]
pub struct TransformerVars {
    /// One binary per catalog option, in catalog order.
    pub alpha: Vec<VarId>,
    pub incumbent: usize,
}

impl TransformerVars {
    /// Binaries of the OLTC options with their catalog index.
    pub fn oltc(&self) -> impl Iterator<Item = (usize, VarId)> + '_ {
        self.alpha.iter().copied().enumerate().filter(move |&(i, _)| i != self.incumbent)
    }
}

#[derive(Clone, Debug)]
pub struct LineVars {
    pub alpha: [VarId; 3],
    /// Per-setting flows, indexed `[setting][step]`.
    pub p: [Vec<VarId>; 3],
    pub q: [Vec<VarId>; 3],
    pub p_grid: Vec<VarId>,
    pub q_grid: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct GridVars {
    pub transformer: TransformerVars,
    pub lines: Vec<LineVars>,
    /// Squared voltage per unit, indexed `[bus][step]`.
    pub u: Vec<Vec<VarId>>,
    pub p_import: Vec<VarId>,
    pub p_feed_in: Vec<VarId>,
    pub q_comp_pos: Vec<VarId>,
    pub q_comp_neg: Vec<VarId>,
    /// Grid-side curtailment, indexed `[bus][step]`, for buses with fixed
    /// injections.
    pub curtailment: Vec<Option<Vec<VarId>>>,
    pub topology: Topology,
}

impl GridVars {
    /// Terms of `inflow − outflow` of active power at `bus`, step `k`.
    pub fn net_inflow_p(&self, bus: usize, k: usize) -> Vec<(VarId, f64)> {
        self.net_inflow(bus, k, |l| &l.p_grid)
    }

    pub fn net_inflow_q(&self, bus: usize, k: usize) -> Vec<(VarId, f64)> {
        self.net_inflow(bus, k, |l| &l.q_grid)
    }

    fn net_inflow(&self, bus: usize, k: usize, f: impl Fn(&LineVars) -> &Vec<VarId>) -> Vec<(VarId, f64)> {
        let topo = &self.topology;
        let mut terms = Vec::new();
        if let Some(l) = topo.parent_line[bus] {
            terms.push((f(&self.lines[l])[k], 1.0));
        }
        for &l in &topo.child_lines[bus] {
            terms.push((f(&self.lines[l])[k], -1.0));
        }
        terms
    }

    /// Binaries describing the reinforcement decision.
    pub fn design_vars(&self) -> Vec<VarId> {
        let mut v = self.transformer.alpha.clone();
        for l in &self.lines {
            v.extend_from_slice(&l.alpha);
        }
        v
    }
}

fn line_tag(network: &Network, l: usize) -> String {
    sanitize(&network.lines[l].label())
}

/// One binary per transformer option with exactly one chosen.
pub fn add_transformer_choice(model: &mut ModelSpec, network: &Network) -> Result<TransformerVars> {
    let incumbent = network
        .transformers
        .iter()
        .position(|t| !t.is_oltc)
        .ok_or_else(|| Error::invalid("network has no fixed-ratio transformer"))?;
    let alpha: Vec<VarId> = network
        .transformers
        .iter()
        .map(|t| model.binary(format!("trafo_{}", sanitize(&t.name))))
        .collect();
    model.add_constraint("trafo_one", alpha.iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 1.0);
    Ok(TransformerVars { alpha, incumbent })
}

/// Root exchange limited by the chosen transformer's rating.
pub fn add_transformer_limits(
    model: &mut ModelSpec,
    network: &Network,
    tv: &TransformerVars,
    p_import: &[VarId],
    p_feed_in: &[VarId],
) {
    for k in 0..p_import.len() {
        for (name, var) in [("trafo_imp", p_import[k]), ("trafo_fi", p_feed_in[k])] {
            let mut terms = vec![(var, 1.0)];
            terms.extend(tv.alpha.iter().zip(&network.transformers).map(|(&a, t)| (a, -t.capacity)));
            model.add_constraint(format!("{name}_t{k}"), terms, Sense::Le, 0.0);
        }
    }
}

/// Squared-voltage variables with band limits that widen when any OLTC is
/// chosen.
pub fn add_voltage_bands(
    model: &mut ModelSpec,
    network: &Network,
    bands: &VoltageBands,
    tv: &TransformerVars,
    steps: usize,
) -> Vec<Vec<VarId>> {
    let mut u = Vec::with_capacity(network.buses.len());
    for bus in &network.buses {
        let band = bands.band(bus);
        let tag = sanitize(&bus.id);
        let (lo, hi) = (band.min * band.min, band.max * band.max);
        let (olo, ohi) = (band.oltc_min * band.oltc_min, band.oltc_max * band.oltc_max);
        let mut ub = Vec::with_capacity(steps);
        for k in 0..steps {
            let v = model.continuous(format!("u_{tag}_t{k}"), olo, ohi);
            let mut upper = vec![(v, 1.0)];
            let mut lower = vec![(v, 1.0)];
            for (_, a) in tv.oltc() {
                upper.push((a, -(ohi - hi)));
                lower.push((a, -(olo - lo)));
            }
            model.add_constraint(format!("vmax_{tag}_t{k}"), upper, Sense::Le, hi);
            model.add_constraint(format!("vmin_{tag}_t{k}"), lower, Sense::Ge, lo);
            ub.push(v);
        }
        u.push(ub);
    }
    u
}

/// Setting binaries and per-setting flows of line `l`. Settings below the
/// existing one are kept in the model but fixed to zero.
pub fn add_cable_settings(model: &mut ModelSpec, network: &Network, l: usize, steps: usize) -> LineVars {
    let line = &network.lines[l];
    let tag = line_tag(network, l);
    let alpha = CableSetting::ALL.map(|m| {
        let a = model.binary(format!("cable_{tag}_{m}"));
        if m < line.existing {
            model.set_bounds(a, 0.0, 0.0);
        }
        a
    });
    model.add_constraint(format!("cable_one_{tag}"), alpha.iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 1.0);
    let flows = |model: &mut ModelSpec, sym: &str| {
        CableSetting::ALL.map(|m| {
            (0..steps)
                .map(|k| model.free(format!("{sym}_{tag}_{m}_t{k}")))
                .collect::<Vec<_>>()
        })
    };
    let p = flows(model, "flow_p");
    let q = flows(model, "flow_q");
    let mut p_grid = Vec::with_capacity(steps);
    let mut q_grid = Vec::with_capacity(steps);
    for k in 0..steps {
        let pg = model.free(format!("grid_p_{tag}_t{k}"));
        let qg = model.free(format!("grid_q_{tag}_t{k}"));
        let mut pt = vec![(pg, 1.0)];
        let mut qt = vec![(qg, 1.0)];
        for m in 0..3 {
            pt.push((p[m][k], -1.0));
            qt.push((q[m][k], -1.0));
        }
        model.add_constraint(format!("flow_sum_p_{tag}_t{k}"), pt, Sense::Eq, 0.0);
        model.add_constraint(format!("flow_sum_q_{tag}_t{k}"), qt, Sense::Eq, 0.0);
        p_grid.push(pg);
        q_grid.push(qg);
    }
    LineVars {
        alpha,
        p,
        q,
        p_grid,
        q_grid,
    }
}

/// Coefficients `(cp, cq)` such that `u_to = u_from − cp·p − cq·q` for one
/// setting, with `u` per unit and flows in kW/kVAr.
pub fn lindistflow_coefficients(network: &Network, l: usize, setting: CableSetting, v_base: f64) -> Result<(f64, f64)> {
    let line = &network.lines[l];
    let cable = network
        .cable(&line.cable)
        .ok_or_else(|| Error::invalid(format!("unknown cable `{}`", line.cable)))?;
    let (_, r, x) = effective_cable_params(cable, setting);
    let km = line.length / 1000.0;
    let scale = 2.0 * 1000.0 / (v_base * v_base);
    Ok((scale * r * km, scale * x * km))
}

pub fn add_lindistflow(
    model: &mut ModelSpec,
    network: &Network,
    bands: &VoltageBands,
    l: usize,
    lv: &LineVars,
    u: &[Vec<VarId>],
    topo: &Topology,
) -> Result<()> {
    let tag = line_tag(network, l);
    let (from, to) = (topo.line_from[l], topo.line_to[l]);
    let coefs: Vec<(f64, f64)> = CableSetting::ALL
        .iter()
        .map(|&m| lindistflow_coefficients(network, l, m, bands.v_base))
        .collect::<Result<_>>()?;
    for k in 0..lv.p_grid.len() {
        let mut terms = vec![(u[to][k], 1.0), (u[from][k], -1.0)];
        for (m, &(cp, cq)) in coefs.iter().enumerate() {
            terms.push((lv.p[m][k], cp));
            terms.push((lv.q[m][k], cq));
        }
        model.add_constraint(format!("ldf_{tag}_t{k}"), terms, Sense::Eq, 0.0);
    }
    Ok(())
}

/// Octagonal apparent power limit on every setting's flow, scaled by the
/// setting binary.
pub fn add_line_limits(model: &mut ModelSpec, network: &Network, l: usize, lv: &LineVars) -> Result<()> {
    let line = &network.lines[l];
    let cable = network
        .cable(&line.cable)
        .ok_or_else(|| Error::invalid(format!("unknown cable `{}`", line.cable)))?;
    let tag = line_tag(network, l);
    for (m, setting) in CableSetting::ALL.iter().enumerate() {
        let (kappa, _, _) = effective_cable_params(cable, *setting);
        for k in 0..lv.p_grid.len() {
            for (y, &(a, b, c)) in OCTAGON.iter().enumerate() {
                model.add_constraint(
                    format!("lim_{tag}_{setting}_y{}_t{k}", y + 1),
                    vec![(lv.p[m][k], a), (lv.q[m][k], b), (lv.alpha[m], -c * kappa)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    Ok(())
}

/// Main busbar balance: root import minus feed-in leaves through the root's
/// lines, and reactive power is supplied by the two-sided compensator.
pub fn add_root_balance(model: &mut ModelSpec, gv: &GridVars) {
    let root = gv.topology.root;
    for k in 0..gv.p_import.len() {
        let mut p = vec![(gv.p_import[k], 1.0), (gv.p_feed_in[k], -1.0)];
        p.extend(gv.net_inflow_p(root, k));
        model.add_constraint(format!("root_p_t{k}"), p, Sense::Eq, 0.0);
        let mut q = vec![(gv.q_comp_pos[k], 1.0), (gv.q_comp_neg[k], -1.0)];
        q.extend(gv.net_inflow_q(root, k));
        model.add_constraint(format!("root_q_t{k}"), q, Sense::Eq, 0.0);
    }
}

/// Inflow equals outflow at `bus`.
pub fn add_passive_balance(model: &mut ModelSpec, gv: &GridVars, bus: usize, tag: &str) {
    for k in 0..gv.p_import.len() {
        model.add_constraint(format!("node_p_{tag}_t{k}"), gv.net_inflow_p(bus, k), Sense::Eq, 0.0);
        model.add_constraint(format!("node_q_{tag}_t{k}"), gv.net_inflow_q(bus, k), Sense::Eq, 0.0);
    }
}

/// Fixed hourly injections at one bus: `p_import`, `p_feed_in` and
/// `q_import` from a building plan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InjectionProfile {
    pub p_import: Vec<f64>,
    pub p_feed_in: Vec<f64>,
    pub q_import: Vec<f64>,
}

/// Balance against fixed injections. The curtailment variable is capped by
/// the intended feed-in and fixed to zero unless `curtail` is set.
pub fn add_fixed_injection_balance(
    model: &mut ModelSpec,
    gv: &mut GridVars,
    bus: usize,
    tag: &str,
    profile: &InjectionProfile,
    curtail: bool,
) -> Result<()> {
    let steps = gv.p_import.len();
    if profile.p_import.len() != steps || profile.p_feed_in.len() != steps || profile.q_import.len() != steps {
        return Err(Error::invalid(format!("injection profile for `{tag}` does not match {steps} steps")));
    }
    let mut curt = Vec::with_capacity(steps);
    for k in 0..steps {
        let cap = if curtail { profile.p_feed_in[k].max(0.0) } else { 0.0 };
        let c = model.continuous(format!("curt_{tag}_t{k}"), 0.0, cap);
        let mut p = gv.net_inflow_p(bus, k);
        p.push((c, -1.0));
        model.add_constraint(
            format!("inj_p_{tag}_t{k}"),
            p,
            Sense::Eq,
            profile.p_import[k] - profile.p_feed_in[k],
        );
        model.add_constraint(format!("inj_q_{tag}_t{k}"), gv.net_inflow_q(bus, k), Sense::Eq, profile.q_import[k]);
        curt.push(c);
    }
    gv.curtailment[bus] = Some(curt);
    Ok(())
}

/// Emits every grid-side variable and constraint except node balances of
/// non-root buses, which depend on how buildings are coupled.
pub fn add_grid(model: &mut ModelSpec, network: &Network, bands: &VoltageBands, steps: usize) -> Result<GridVars> {
    bands.validate()?;
    let topology = network.topology()?;
    let transformer = add_transformer_choice(model, network)?;
    let u = add_voltage_bands(model, network, bands, &transformer, steps);
    let mut lines = Vec::with_capacity(network.lines.len());
    for l in 0..network.lines.len() {
        let lv = add_cable_settings(model, network, l, steps);
        add_lindistflow(model, network, bands, l, &lv, &u, &topology)?;
        add_line_limits(model, network, l, &lv)?;
        lines.push(lv);
    }
    let p_import: Vec<VarId> = (0..steps).map(|k| model.nonneg(format!("root_imp_t{k}"))).collect();
    let p_feed_in: Vec<VarId> = (0..steps).map(|k| model.nonneg(format!("root_fi_t{k}"))).collect();
    let q_comp_pos: Vec<VarId> = (0..steps).map(|k| model.nonneg(format!("qcomp_pos_t{k}"))).collect();
    let q_comp_neg: Vec<VarId> = (0..steps).map(|k| model.nonneg(format!("qcomp_neg_t{k}"))).collect();
    add_transformer_limits(model, network, &transformer, &p_import, &p_feed_in);
    let gv = GridVars {
        transformer,
        lines,
        u,
        p_import,
        p_feed_in,
        q_comp_pos,
        q_comp_neg,
        curtailment: vec![None; network.buses.len()],
        topology,
    };
    add_root_balance(model, &gv);
    Ok(gv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octagon_vertices_on_circle() {
        // Adjacent half-planes meet at multiples of 45 degrees on the circle.
        for i in 0..8 {
            let ang = core::f64::consts::FRAC_PI_4 * i as f64;
            let (p, q) = (libm::cos(ang), libm::sin(ang));
            assert!(octagon_contains(p, q, 1.0, 1e-12), "vertex {i}");
            let tight = OCTAGON.iter().filter(|&&(a, b, c)| (a * p + b * q - c).abs() < 1e-12).count();
            assert_eq!(tight, 2, "vertex {i}");
        }
    }

    #[test]
    fn row_two_cuts_off_small_q() {
        assert!(octagon_contains(1.0, 0.0, 1.0, 1e-12));
        assert!(!octagon_contains(1.0, 0.01, 1.0, 0.0));
    }
}
