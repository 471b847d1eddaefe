use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use regraph_core::graph::{RegionalPartition, SiteGraph, Strategy};

use crate::error::{CliError, CliResult};
use crate::shared::{ensure_parent, load_graph, write_json, LoadedGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl DegreeStats {
    fn of(degrees: &[usize]) -> Self {
        DegreeStats {
            min: degrees.iter().copied().min().unwrap_or(0),
            max: degrees.iter().copied().max().unwrap_or(0),
            mean: if degrees.is_empty() {
                0.0
            } else {
                degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteDegree {
    pub site_id: String,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphSummary {
    pub label: String,
    pub nodes: usize,
    pub edges: usize,
    pub degree: DegreeStats,
    pub overlap_cost: f64,
}

/// A node whose degree inside its subgraph exceeds its degree in the
/// reference graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeViolation {
    pub site_id: String,
    pub local_degree: usize,
    pub reference_degree: usize,
}

/// Local degree never exceeds the degree in the reference graph: the full
/// threshold graph for regional decompositions, the union of the groups for
/// random ones. Random groups connect sites regardless of distance, so their
/// violations against the threshold graph are listed separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub reference: String,
    pub checked: usize,
    pub violations: Vec<DegreeViolation>,
    pub violations_vs_connected: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub connected: f64,
    pub decomposed: Option<f64>,
    /// `decomposed / connected`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAnalysis {
    pub strategy: Strategy,
    pub threshold_miles: f64,
    pub nodes: usize,
    pub edges: usize,
    pub degree: DegreeStats,
    pub degrees: Vec<SiteDegree>,
    pub subgraphs: Vec<SubgraphSummary>,
    pub degree_check: Option<DegreeCheck>,
    pub overlap: OverlapSummary,
}

fn violations(graph: &SiteGraph, reference: &SiteGraph, p: &RegionalPartition) -> Vec<DegreeViolation> {
    (0..graph.len())
        .filter(|&i| p.local_degree(i) > reference.degree(i))
        .map(|i| DegreeViolation {
            site_id: graph.nodes()[i].site_id.clone(),
            local_degree: p.local_degree(i),
            reference_degree: reference.degree(i),
        })
        .collect()
}

pub fn analyze(loaded: &LoadedGraph) -> CliResult<GraphAnalysis> {
    let g = &loaded.graph;
    let degrees = g.degrees();
    let connected = g.overlap_cost();
    let (subgraphs, degree_check, decomposed) = match &loaded.partition {
        None => (Vec::new(), None, None),
        Some(p) => {
            let subgraphs = p
                .subgraphs()
                .iter()
                .map(|s| SubgraphSummary {
                    label: s.label.clone(),
                    nodes: s.nodes.len(),
                    edges: s.graph.edges().len(),
                    degree: DegreeStats::of(&s.graph.degrees()),
                    overlap_cost: s.graph.overlap_cost(),
                })
                .collect();
            let check = if loaded.file.strategy == Strategy::Random {
                let union = p.union_graph(g).map_err(|e| CliError::data(e.to_string()))?;
                DegreeCheck {
                    reference: "union of groups".into(),
                    checked: g.len(),
                    violations: violations(g, &union, p),
                    violations_vs_connected: Some(violations(g, g, p).len()),
                }
            } else {
                DegreeCheck {
                    reference: "threshold graph".into(),
                    checked: g.len(),
                    violations: violations(g, g, p),
                    violations_vs_connected: None,
                }
            };
            (subgraphs, Some(check), Some(p.overlap_cost()))
        }
    };
    Ok(GraphAnalysis {
        strategy: loaded.file.strategy,
        threshold_miles: loaded.file.threshold_miles,
        nodes: g.len(),
        edges: g.edges().len(),
        degree: DegreeStats::of(&degrees),
        degrees: g
            .nodes()
            .iter()
            .zip(degrees)
            .map(|(n, degree)| SiteDegree {
                site_id: n.site_id.clone(),
                degree,
            })
            .collect(),
        subgraphs,
        degree_check,
        overlap: OverlapSummary {
            connected,
            decomposed,
            ratio: decomposed.map(|d| d / connected),
        },
    })
}

/// Prints the analysis as JSON, or writes it to `out`.
pub fn run(graph: &Path, out: Option<&Path>) -> CliResult<()> {
    let analysis = analyze(&load_graph(graph)?)?;
    match out {
        Some(path) => {
            ensure_parent(path)?;
            write_json(path, &analysis)?;
            let overlap = &analysis.overlap;
            println!(
                "{} sites, overlap cost {} connected vs {} decomposed -> {}",
                analysis.nodes,
                overlap.connected,
                overlap.decomposed.map_or("n/a".to_owned(), |d| d.to_string()),
                path.display()
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&analysis).map_err(|e| CliError::other(e.to_string()))?;
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    Ok(())
}
