//! Entanglement topology across wavelength bins: which spectral modes become
//! pairwise entangled under a set of pumps, how the resulting graph
//! classifies, and which pumps would realize a requested graph.

use std::collections::BTreeSet;
use std::fmt;

use serde::ser::Serializer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optics::Metasurface;
use crate::spdc::{idler_wavelength, pump_for_pair, PumpConfig};

/// Modes with polarization coupling below this are treated as dark.
const MIN_COUPLING: f64 = 1e-6;

/// One spectral mode of the graph: a wavelength bin with a merge tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct WavelengthBin {
    pub center_nm: f64,
    pub tolerance_nm: f64,
    /// Resonances and partner bands that populate this bin.
    pub sources: Vec<String>,
    /// True when signal and idler of some pair fall into this same bin.
    pub degenerate: bool,
}

/// Pairwise entanglement between two bins generated by one pump.
#[derive(Debug, Clone, Serialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub pump_index: usize,
    pub pump_wavelength_nm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherent_group_id: Option<String>,
}

/// Shape classification of the graph restricted to its proper edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphClass {
    SingleEdge,
    /// Linear chain of n vertices.
    Path(usize),
    /// One hub connected to n-1 leaves (GHZ-class), n >= 4 vertices.
    Star(usize),
    General,
}

impl fmt::Display for GraphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphClass::SingleEdge => write!(f, "single-edge"),
            GraphClass::Path(n) => write!(f, "path-{n}"),
            GraphClass::Star(n) => write!(f, "star-{n}"),
            GraphClass::General => write!(f, "general"),
        }
    }
}

impl Serialize for GraphClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntanglementGraph {
    /// Bins sorted by center wavelength.
    pub vertices: Vec<WavelengthBin>,
    pub edges: Vec<GraphEdge>,
    pub classification: GraphClass,
    /// True when edges come from pumps that are not mutually phase-coherent.
    pub incoherent_pump_mix: bool,
    pub warnings: Vec<String>,
}

struct Candidate {
    center_nm: f64,
    tolerance_nm: f64,
    source: String,
}

struct CandidateEdge {
    a: usize,
    b: usize,
    pump_index: usize,
    pump_wavelength_nm: f64,
    coherent_group_id: Option<String>,
}

/// Merge candidate bins (sorted by wavelength; two bins merge when their
/// centers differ by no more than the smaller tolerance), remap edges, and
/// classify.
fn assemble(
    candidates: Vec<Candidate>,
    cand_edges: Vec<CandidateEdge>,
    mut warnings: Vec<String>,
) -> EntanglementGraph {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&x, &y| {
        candidates[x]
            .center_nm
            .total_cmp(&candidates[y].center_nm)
            .then(candidates[x].source.cmp(&candidates[y].source))
    });

    let mut vertices: Vec<WavelengthBin> = Vec::new();
    let mut remap = vec![usize::MAX; candidates.len()];
    for &ci in &order {
        let c = &candidates[ci];
        let merged = vertices.last_mut().filter(|head| {
            (c.center_nm - head.center_nm).abs() <= c.tolerance_nm.min(head.tolerance_nm)
        });
        match merged {
            Some(head) => {
                head.tolerance_nm = head.tolerance_nm.min(c.tolerance_nm);
                if !head.sources.contains(&c.source) {
                    head.sources.push(c.source.clone());
                }
                remap[ci] = vertices.len() - 1;
            }
            None => {
                remap[ci] = vertices.len();
                vertices.push(WavelengthBin {
                    center_nm: c.center_nm,
                    tolerance_nm: c.tolerance_nm,
                    sources: vec![c.source.clone()],
                    degenerate: false,
                });
            }
        }
    }
    for v in &mut vertices {
        v.sources.sort();
    }

    let mut edges: Vec<GraphEdge> = cand_edges
        .into_iter()
        .map(|e| {
            let (a, b) = (remap[e.a], remap[e.b]);
            GraphEdge {
                a: a.min(b),
                b: a.max(b),
                pump_index: e.pump_index,
                pump_wavelength_nm: e.pump_wavelength_nm,
                coherent_group_id: e.coherent_group_id,
            }
        })
        .collect();
    edges.sort_by(|x, y| {
        (x.a, x.b, x.pump_index).cmp(&(y.a, y.b, y.pump_index))
    });
    for e in &edges {
        if e.a == e.b {
            vertices[e.a].degenerate = true;
        }
    }

    let classification = classify(vertices.len(), &edges);
    let incoherent_pump_mix = incoherent_mix(&edges);
    warnings.sort();
    warnings.dedup();
    EntanglementGraph {
        vertices,
        edges,
        classification,
        incoherent_pump_mix,
        warnings,
    }
}

fn incoherent_mix(edges: &[GraphEdge]) -> bool {
    let pumps: BTreeSet<usize> = edges.iter().map(|e| e.pump_index).collect();
    if pumps.len() <= 1 {
        return false;
    }
    let mut groups: BTreeSet<Option<&str>> = BTreeSet::new();
    for e in edges {
        groups.insert(e.coherent_group_id.as_deref());
        if e.coherent_group_id.is_none() {
            // independent lasers are never mutually coherent
            return true;
        }
    }
    groups.len() > 1
}

/// Classify the simple graph formed by the proper (non-loop) edges. Isolated
/// vertices (including flagged degenerate bins) do not affect the shape.
pub fn classify(n_vertices: usize, edges: &[GraphEdge]) -> GraphClass {
    let proper: BTreeSet<(usize, usize)> = edges
        .iter()
        .filter(|e| e.a != e.b)
        .map(|e| (e.a.min(e.b), e.a.max(e.b)))
        .collect();
    if proper.is_empty() {
        return GraphClass::General;
    }
    if proper.len() == 1 {
        return GraphClass::SingleEdge;
    }
    let mut degree = vec![0usize; n_vertices];
    let mut parent: Vec<usize> = (0..n_vertices).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(a, b) in &proper {
        degree[a] += 1;
        degree[b] += 1;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let used: Vec<usize> = (0..n_vertices).filter(|&v| degree[v] > 0).collect();
    let roots: BTreeSet<usize> = used.iter().map(|&v| find(&mut parent, v)).collect();
    if roots.len() != 1 {
        return GraphClass::General;
    }
    let n = used.len();
    let is_tree = proper.len() == n - 1;
    let ones = used.iter().filter(|&&v| degree[v] == 1).count();
    let twos = used.iter().filter(|&&v| degree[v] == 2).count();
    if is_tree && ones == 2 && ones + twos == n {
        return GraphClass::Path(n);
    }
    let hub_count = used.iter().filter(|&&v| degree[v] == proper.len()).count();
    if is_tree && proper.len() >= 3 && hub_count == 1 && ones == n - 1 {
        return GraphClass::Star(n);
    }
    GraphClass::General
}

impl EntanglementGraph {
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.vertices.len();
        let mut m = vec![vec![false; n]; n];
        for e in &self.edges {
            m[e.a][e.b] = true;
            m[e.b][e.a] = true;
        }
        m
    }

    /// |1/lambda_a + 1/lambda_b - 1/lambda_p| for one edge, in inverse nm.
    /// Bin merging moves each endpoint by at most its tolerance, so this
    /// stays below tol_a/lambda_a^2 + tol_b/lambda_b^2 (first order).
    pub fn edge_energy_residual_inv_nm(&self, edge: &GraphEdge) -> f64 {
        let ca = self.vertices[edge.a].center_nm;
        let cb = self.vertices[edge.b].center_nm;
        (1.0 / ca + 1.0 / cb - 1.0 / edge.pump_wavelength_nm).abs()
    }

    /// Canonical form for set comparisons: vertex centers rounded to 1e-6 nm
    /// with their degenerate flags, and edges as sorted index triples.
    pub fn signature(&self) -> (Vec<(i64, bool)>, Vec<(usize, usize, usize)>) {
        let verts = self
            .vertices
            .iter()
            .map(|v| ((v.center_nm * 1e6).round() as i64, v.degenerate))
            .collect();
        let mut edges: Vec<(usize, usize, usize)> = self
            .edges
            .iter()
            .map(|e| (e.a, e.b, e.pump_index))
            .collect();
        edges.sort_unstable();
        (verts, edges)
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph entanglement {\n");
        out.push_str("  node [shape=circle];\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let marker = if v.degenerate { " (degenerate)" } else { "" };
            out.push_str(&format!(
                "  v{i} [label=\"{:.1} nm{marker}\"];\n",
                v.center_nm
            ));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  v{} -- v{} [label=\"pump {:.1} nm\"];\n",
                e.a, e.b, e.pump_wavelength_nm
            ));
        }
        out.push_str(&format!(
            "  label=\"{}\";\n  labelloc=\"t\";\n}}\n",
            self.classification
        ));
        out
    }

    /// Combine graphs built from separately placed surfaces under the same
    /// pump list: bins re-merge by the usual tolerance rule. Building one
    /// graph from the union of surfaces gives the same result.
    pub fn merge_union(graphs: &[EntanglementGraph]) -> EntanglementGraph {
        let mut candidates = Vec::new();
        let mut cand_edges = Vec::new();
        let mut warnings = Vec::new();
        for g in graphs {
            let offset = candidates.len();
            for v in &g.vertices {
                candidates.push(Candidate {
                    center_nm: v.center_nm,
                    tolerance_nm: v.tolerance_nm,
                    source: v.sources.join("+"),
                });
            }
            for e in &g.edges {
                cand_edges.push(CandidateEdge {
                    a: offset + e.a,
                    b: offset + e.b,
                    pump_index: e.pump_index,
                    pump_wavelength_nm: e.pump_wavelength_nm,
                    coherent_group_id: e.coherent_group_id.clone(),
                });
            }
            warnings.extend(g.warnings.iter().cloned());
        }
        assemble(candidates, cand_edges, warnings)
    }
}

/// Build the entanglement graph for a set of surfaces under a set of pumps.
///
/// Every resonance with non-dark polarization coupling that lies above the
/// pump line contributes a vertex at its center and a vertex at its
/// energy-conservation partner, joined by an edge. Bin tolerance defaults to
/// half the resonance linewidth (scaled by the spectral Jacobian on the
/// partner side) unless `tolerance_nm` overrides it. Bins closer than the
/// smaller tolerance merge; a pair falling into one bin becomes a flagged
/// degenerate vertex with a self-loop.
pub fn build_graph(
    surfaces: &[Metasurface],
    pumps: &[PumpConfig],
    tolerance_nm: Option<f64>,
) -> Result<EntanglementGraph> {
    if let Some(tol) = tolerance_nm {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::Domain(format!(
                "bin tolerance {tol} nm must be positive and finite"
            )));
        }
    }
    let mut candidates = Vec::new();
    let mut cand_edges = Vec::new();
    let mut warnings = Vec::new();
    for (pi, pump) in pumps.iter().enumerate() {
        pump.validate(&format!("pumps[{pi}]"))?;
        for (si, surface) in surfaces.iter().enumerate() {
            surface.validate(&format!("metasurfaces[{si}]"))?;
            for r in &surface.resonances {
                if r.polarization_coupling(pump.pol_deg) < MIN_COUPLING {
                    continue;
                }
                if r.center_wavelength_nm <= pump.wavelength_nm {
                    warnings.push(format!(
                        "resonance `{}` at {} nm sits at or above the photon energy of pump {} nm; no pair emission",
                        r.label, r.center_wavelength_nm, pump.wavelength_nm
                    ));
                    continue;
                }
                let partner = idler_wavelength(pump.wavelength_nm, r.center_wavelength_nm)?;
                let tol_r = tolerance_nm.unwrap_or(r.fwhm_nm() / 2.0);
                let jacobian = (partner / r.center_wavelength_nm).powi(2);
                let tol_p = tolerance_nm.unwrap_or(r.fwhm_nm() / 2.0 * jacobian);
                let a = candidates.len();
                candidates.push(Candidate {
                    center_nm: r.center_wavelength_nm,
                    tolerance_nm: tol_r,
                    source: format!("{}/{}", surface.name, r.label),
                });
                let degenerate = (partner - r.center_wavelength_nm).abs() <= tol_r.min(tol_p);
                let b = if degenerate {
                    a
                } else {
                    candidates.push(Candidate {
                        center_nm: partner,
                        tolerance_nm: tol_p,
                        source: format!("{}/{}~pump{pi}", surface.name, r.label),
                    });
                    a + 1
                };
                cand_edges.push(CandidateEdge {
                    a,
                    b,
                    pump_index: pi,
                    pump_wavelength_nm: pump.wavelength_nm,
                    coherent_group_id: pump.coherent_group_id.clone(),
                });
            }
        }
    }
    Ok(assemble(candidates, cand_edges, warnings))
}

/// One pump of a plan and the target edges it drives (indices into the
/// target list).
#[derive(Debug, Clone, Serialize)]
pub struct PlannedPump {
    pub wavelength_nm: f64,
    pub drives: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PumpPlan {
    pub pumps: Vec<PlannedPump>,
}

/// Choose pump wavelengths that realize every requested edge
/// (lambda_a, lambda_b): each pump is lambda_a*lambda_b/(lambda_a+lambda_b),
/// deduplicated and sorted. An edge is feasible when at least one endpoint
/// lies within tolerance of a resonance center (default: half its linewidth);
/// any infeasible edge fails the whole plan with a per-edge diagnostic.
pub fn plan_pumps(
    target_edges: &[(f64, f64)],
    resonances: &[crate::optics::Resonance],
    tolerance_nm: Option<f64>,
) -> Result<PumpPlan> {
    if target_edges.is_empty() {
        return Err(Error::Domain("no target edges given".into()));
    }
    let mut problems = Vec::new();
    let mut wanted: Vec<(f64, usize)> = Vec::new();
    for (i, &(a, b)) in target_edges.iter().enumerate() {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            problems.push(format!("edge {i} ({a} nm, {b} nm): wavelengths out of range"));
            continue;
        }
        let near = |x: f64| {
            resonances.iter().any(|r| {
                (x - r.center_wavelength_nm).abs() <= tolerance_nm.unwrap_or(r.fwhm_nm() / 2.0)
            })
        };
        if !near(a) && !near(b) {
            problems.push(format!(
                "edge {i} ({a} nm, {b} nm): neither endpoint lies on a resonance"
            ));
            continue;
        }
        wanted.push((pump_for_pair(a, b), i));
    }
    if !problems.is_empty() {
        return Err(Error::Domain(format!(
            "infeasible pump plan: {}",
            problems.join("; ")
        )));
    }
    wanted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut pumps: Vec<PlannedPump> = Vec::new();
    for (w, edge) in wanted {
        match pumps.last_mut().filter(|p| (p.wavelength_nm - w).abs() < 1e-9) {
            Some(p) => p.drives.push(edge),
            None => pumps.push(PlannedPump {
                wavelength_nm: w,
                drives: vec![edge],
            }),
        }
    }
    Ok(PumpPlan { pumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Resonance;

    fn surface(resonances: Vec<Resonance>) -> Metasurface {
        Metasurface::new("s", resonances)
    }

    #[test]
    fn degenerate_pump_yields_flagged_vertex_with_self_loop() {
        let s = surface(vec![Resonance::new("ed", 1446.0, 330.0)]);
        let pumps = vec![PumpConfig::new(723.0, 1.0)];
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(g.vertices[0].degenerate);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].a, g.edges[0].b);
        assert_eq!(g.classification, GraphClass::General);
    }

    #[test]
    fn single_resonance_single_pump_gives_single_edge() {
        let s = surface(vec![Resonance::new("ed", 1391.0, 330.0)]);
        let pumps = vec![PumpConfig::new(718.0, 1.0)];
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert_eq!(g.classification, GraphClass::SingleEdge);
        assert!((g.vertices[0].center_nm - 1391.0).abs() < 1e-9);
        assert!((g.vertices[1].center_nm - 1484.0089).abs() < 2e-3);
        assert!(!g.incoherent_pump_mix);
    }

    #[test]
    fn shared_resonance_under_two_pumps_forms_a_path() {
        let s = surface(vec![Resonance::new("ed", 1359.0, 330.0)]);
        let pumps = vec![PumpConfig::new(725.0, 1.0), PumpConfig::new(718.0, 1.0)];
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.vertices.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.classification, GraphClass::Path(3));
        assert_eq!(g.classification.to_string(), "path-3");
        // both partner bands hang off the shared 1359 nm bin
        let centers: Vec<f64> = g.vertices.iter().map(|v| v.center_nm).collect();
        assert!((centers[0] - 1359.0).abs() < 1e-9);
        assert!((centers[1] - 1522.2496).abs() < 2e-3);
        assert!((centers[2] - 1554.0615).abs() < 2e-3);
        // two independent lasers
        assert!(g.incoherent_pump_mix);
    }

    #[test]
    fn hub_resonance_under_three_pumps_forms_a_star() {
        let s = surface(vec![Resonance::new("hub", 1359.0, 330.0)]);
        let pumps: Vec<PumpConfig> = [1500.0, 1600.0, 1700.0]
            .iter()
            .map(|&b| PumpConfig::new(pump_for_pair(1359.0, b), 1.0))
            .collect();
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.classification, GraphClass::Star(4));
        assert_eq!(g.classification.to_string(), "star-4");
    }

    #[test]
    fn triangle_and_disjoint_edges_classify_general() {
        let s = surface(vec![
            Resonance::new("a", 1359.0, 330.0),
            Resonance::new("b", 1429.0, 1000.0).with_pol_axis(90.0),
        ]);
        let pumps = vec![PumpConfig::new(725.0, 1.0).with_pol(40.0)];
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.vertices.len(), 4);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.classification, GraphClass::General);
    }

    #[test]
    fn coherent_group_ids_suppress_the_incoherent_flag() {
        let s = surface(vec![Resonance::new("ed", 1359.0, 330.0)]);
        let mut p1 = PumpConfig::new(725.0, 1.0);
        let mut p2 = PumpConfig::new(718.0, 1.0);
        p1.coherent_group_id = Some("laser1".into());
        p2.coherent_group_id = Some("laser1".into());
        let g = build_graph(&[s.clone()], &[p1.clone(), p2.clone()], None).unwrap();
        assert!(!g.incoherent_pump_mix);
        p2.coherent_group_id = Some("laser2".into());
        let g2 = build_graph(&[s], &[p1, p2], None).unwrap();
        assert!(g2.incoherent_pump_mix);
    }

    #[test]
    fn bins_merge_within_the_smaller_tolerance() {
        let s = surface(vec![
        // two slightly offset resonances whose bins overlap
            Resonance::new("a", 1359.0, 330.0),
            Resonance::new("b", 1359.5, 330.0),
        ]);
        let pumps = vec![PumpConfig::new(725.0, 1.0)];
        let g = build_graph(&[s], &pumps, Some(1.0)).unwrap();
        let near_1359 = g
            .vertices
            .iter()
            .filter(|v| (v.center_nm - 1359.0).abs() < 2.0)
            .count();
        assert_eq!(near_1359, 1, "overlapping bins must merge");
        let merged = g
            .vertices
            .iter()
            .find(|v| (v.center_nm - 1359.0).abs() < 2.0)
            .unwrap();
        assert_eq!(merged.sources.len(), 2);
    }

    #[test]
    fn resonance_below_pump_energy_warns_and_is_skipped() {
        let s = surface(vec![
            Resonance::new("low", 600.0, 330.0),
            Resonance::new("ok", 1391.0, 330.0),
        ]);
        let pumps = vec![PumpConfig::new(718.0, 1.0)];
        let g = build_graph(&[s], &pumps, None).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert_eq!(g.warnings.len(), 1);
        assert!(g.warnings[0].contains("low"));
    }

    #[test]
    fn edges_respect_energy_conservation_within_tolerance() {
        let s = surface(vec![
            Resonance::new("a", 1359.0, 330.0),
            Resonance::new("b", 1361.0, 500.0),
        ]);
        let pumps = vec![PumpConfig::new(725.0, 1.0), PumpConfig::new(718.0, 1.0)];
        let g = build_graph(&[s], &pumps, Some(3.0)).unwrap();
        for e in &g.edges {
            let ca = g.vertices[e.a].center_nm;
            let cb = g.vertices[e.b].center_nm;
            let ta = g.vertices[e.a].tolerance_nm;
            let tb = g.vertices[e.b].tolerance_nm;
            let bound = ta / ((ca - ta) * (ca - ta)) + tb / ((cb - tb) * (cb - tb));
            assert!(
                g.edge_energy_residual_inv_nm(e) <= bound + 1e-12,
                "edge ({ca}, {cb}) residual {} vs bound {bound}",
                g.edge_energy_residual_inv_nm(e)
            );
        }
    }

    #[test]
    fn plan_pumps_recovers_the_generating_pumps() {
        let res = vec![Resonance::new("ed", 1359.0, 330.0)];
        let targets = vec![
            (1359.0, idler_wavelength(725.0, 1359.0).unwrap()),
            (1359.0, idler_wavelength(718.0, 1359.0).unwrap()),
        ];
        let plan = plan_pumps(&targets, &res, None).unwrap();
        assert_eq!(plan.pumps.len(), 2);
        assert!((plan.pumps[0].wavelength_nm - 718.0).abs() < 1e-9);
        assert!((plan.pumps[1].wavelength_nm - 725.0).abs() < 1e-9);
        assert_eq!(plan.pumps[0].drives, vec![1]);
        assert_eq!(plan.pumps[1].drives, vec![0]);
    }

    #[test]
    fn plan_pumps_shares_a_pump_between_degenerate_targets() {
        let res = vec![Resonance::new("ed", 1446.0, 330.0)];
        let plan = plan_pumps(&[(1446.0, 1446.0)], &res, None).unwrap();
        assert_eq!(plan.pumps.len(), 1);
        assert!((plan.pumps[0].wavelength_nm - 723.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_edges_fail_with_diagnostics() {
        let res = vec![Resonance::new("ed", 1359.0, 330.0)];
        let err = plan_pumps(&[(1000.0, 2000.0)], &res, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("edge 0"));
        assert!(msg.contains("1000"));
        assert!(plan_pumps(&[], &res, None).is_err());
    }

    #[test]
    fn planned_pumps_rebuild_the_requested_graph() {
        let res = vec![Resonance::new("ed", 1359.0, 330.0)];
        let targets = vec![
            (1359.0, idler_wavelength(725.0, 1359.0).unwrap()),
            (1359.0, idler_wavelength(718.0, 1359.0).unwrap()),
        ];
        let plan = plan_pumps(&targets, &res, None).unwrap();
        let pumps: Vec<PumpConfig> = plan
            .pumps
            .iter()
            .map(|p| PumpConfig::new(p.wavelength_nm, 1.0))
            .collect();
        let g = build_graph(&[surface(res)], &pumps, None).unwrap();
        assert_eq!(g.classification, GraphClass::Path(3));
        for &(a, b) in &targets {
            let has = g.edges.iter().any(|e| {
                let (ca, cb) = (g.vertices[e.a].center_nm, g.vertices[e.b].center_nm);
                ((ca - a).abs() < 1e-6 && (cb - b).abs() < 1e-6)
                    || ((ca - b).abs() < 1e-6 && (cb - a).abs() < 1e-6)
            });
            assert!(has, "target edge ({a}, {b}) missing");
        }
    }

    #[test]
    fn union_of_per_surface_graphs_matches_joint_build() {
        let s1 = Metasurface::new("s1", vec![Resonance::new("a", 1359.0, 330.0)]);
        let s2 = Metasurface::new("s2", vec![Resonance::new("b", 1429.0, 1000.0)]);
        let pumps = vec![PumpConfig::new(725.0, 1.0), PumpConfig::new(700.0, 1.0)];
        let joint = build_graph(&[s1.clone(), s2.clone()], &pumps, None).unwrap();
        let g1 = build_graph(&[s1], &pumps, None).unwrap();
        let g2 = build_graph(&[s2], &pumps, None).unwrap();
        let union = EntanglementGraph::merge_union(&[g1, g2]);
        assert_eq!(joint.signature(), union.signature());
    }

    #[test]
    fn dot_output_names_every_vertex_and_edge() {
        let s = surface(vec![Resonance::new("ed", 1391.0, 330.0)]);
        let g = build_graph(&[s], &[PumpConfig::new(718.0, 1.0)], None).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("v0 -- v1"));
        assert!(dot.contains("1391.0 nm"));
        assert!(dot.contains("single-edge"));
    }
}
