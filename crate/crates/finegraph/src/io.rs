//! JSON file formats: group specifications, subgroups, graph specs with
//! optional Cayley-bundle metadata, witnesses, and vertex-token paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cayley::{ConedOff, RelCayley};
use crate::eqgraph::{EdgeLabel, EdgeOrbit, GraphSpec, VertexOrbit};
use crate::error::{Error, Result};
use crate::group::{FiniteTable, GroupElement, GroupOracle, SubgroupHandle, SubgroupKind};
use crate::qc::QcWitness;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorFile {
    pub label: String,
    pub order: usize,
}

/// Group specification: backend kind plus relation data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum GroupFile {
    #[serde(rename_all = "camelCase")]
    FreeGroup { generators: Vec<String> },
    #[serde(rename_all = "camelCase")]
    FiniteCyclic { order: usize },
    #[serde(rename_all = "camelCase")]
    FiniteTable { elements: Vec<String>, table: Vec<Vec<u32>>, generators: Vec<String> },
    #[serde(rename_all = "camelCase")]
    FreeProductOfFinite { factors: Vec<FactorFile> },
}

pub fn group_from_file(gf: &GroupFile) -> Result<GroupOracle> {
    match gf {
        GroupFile::FreeGroup { generators } => {
            let refs: Vec<&str> = generators.iter().map(|s| s.as_str()).collect();
            Ok(GroupOracle::free(&refs))
        }
        GroupFile::FiniteCyclic { order } => Ok(GroupOracle::cyclic(*order)),
        GroupFile::FiniteTable { elements, table, generators } => {
            let t = FiniteTable::new(elements.clone(), table.clone())?;
            let refs: Vec<&str> = generators.iter().map(|s| s.as_str()).collect();
            GroupOracle::finite(t, &refs)
        }
        GroupFile::FreeProductOfFinite { factors } => {
            let refs: Vec<(&str, usize)> =
                factors.iter().map(|f| (f.label.as_str(), f.order)).collect();
            Ok(GroupOracle::free_product_cyclic(&refs))
        }
    }
}

/// Subgroup specification over a group's generators.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SubgroupFile {
    WholeGroup,
    Trivial,
    #[serde(rename_all = "camelCase")]
    Factor { index: usize },
    #[serde(rename_all = "camelCase")]
    FreeGenerator { generator: String },
    #[serde(rename_all = "camelCase")]
    Cyclic { word: String },
    #[serde(rename_all = "camelCase")]
    FiniteGenerated { generators: Vec<String> },
}

pub fn subgroup_from_file(oracle: &GroupOracle, sf: &SubgroupFile) -> Result<SubgroupHandle> {
    match sf {
        SubgroupFile::WholeGroup => Ok(SubgroupHandle::whole(oracle)),
        SubgroupFile::Trivial => Ok(SubgroupHandle::trivial(oracle)),
        SubgroupFile::Factor { index } => Ok(SubgroupHandle::free_factor(oracle, *index)),
        SubgroupFile::FreeGenerator { generator } => {
            let g = oracle.parse_word(generator)?;
            match g.repr() {
                crate::group::Repr::Word(w) if w.len() == 1 && w[0] > 0 => {
                    Ok(SubgroupHandle::free_gen_cyclic(oracle, (w[0] - 1) as usize))
                }
                _ => Err(Error::BadInput(format!(
                    "'{generator}' is not a positive free generator"
                ))),
            }
        }
        SubgroupFile::Cyclic { word } => {
            let w = oracle.parse_word(word)?;
            SubgroupHandle::cyclic(oracle, &w, &format!("<{word}>"))
        }
        SubgroupFile::FiniteGenerated { generators } => {
            let gens: Vec<GroupElement> =
                generators.iter().map(|w| oracle.parse_word(w)).collect::<Result<_>>()?;
            SubgroupHandle::finite_generated(oracle, &gens, "<finite>")
        }
    }
}

pub fn subgroup_to_file(oracle: &GroupOracle, h: &SubgroupHandle) -> SubgroupFile {
    match h.kind() {
        SubgroupKind::Whole => SubgroupFile::WholeGroup,
        SubgroupKind::Trivial => SubgroupFile::Trivial,
        SubgroupKind::FreeFactor(i) => SubgroupFile::Factor { index: *i },
        SubgroupKind::GenCyclic(i) => {
            let g = GroupElement { backend: oracle.id(), repr: crate::group::Repr::Word(vec![*i as i32 + 1]) };
            let _ = &g;
            SubgroupFile::FreeGenerator { generator: oracle.word_token(&g) }
        }
        SubgroupKind::Cyclic(w) => SubgroupFile::Cyclic { word: oracle.word_token(w) },
        SubgroupKind::FiniteSet(_) => SubgroupFile::FiniteGenerated {
            generators: h.generators().iter().map(|g| oracle.word_token(g)).collect(),
        },
    }
}

/// Group reference: inline or by file path (relative to the referring file).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Path { file: String },
    Inline(GroupFile),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndpointFile {
    pub orbit: String,
    pub offset: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct EdgeOrbitFile {
    pub id: String,
    pub from: Option<EndpointFile>,
    pub to: Option<EndpointFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilizer: Option<SubgroupFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<String>,
    /// Peripheral family index (relative Cayley edges).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peripheral: Option<usize>,
}

impl Default for EndpointFile {
    fn default() -> Self {
        EndpointFile { orbit: String::new(), offset: "1".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VertexOrbitFile {
    pub id: String,
    pub stabilizer: SubgroupFile,
}

/// Bundle metadata for graphs built as (coned-off/relative) Cayley graphs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleFile {
    pub kind: String,
    pub s_words: Vec<String>,
    pub peripherals: Vec<SubgroupFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphFile {
    pub name: String,
    pub group: GroupRef,
    pub vertex_orbits: Vec<VertexOrbitFile>,
    pub edge_orbits: Vec<EdgeOrbitFile>,
    #[serde(default)]
    pub cones: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peripherals: Vec<SubgroupFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleFile>,
}

/// A loaded graph file: the spec plus any bundle machinery it described.
pub struct LoadedGraph {
    pub spec: GraphSpec,
    pub oracle: GroupOracle,
    pub peripherals: Vec<SubgroupHandle>,
    pub coned: Option<ConedOff>,
    pub relative: Option<RelCayley>,
}

pub fn resolve_group(gr: &GroupRef, base_dir: &Path) -> Result<GroupOracle> {
    match gr {
        GroupRef::Inline(gf) => group_from_file(gf),
        GroupRef::Path { file } => {
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)?;
            let gf: GroupFile = serde_json::from_str(&text)?;
            group_from_file(&gf)
        }
    }
}

pub fn graph_from_file(gf: &GraphFile, base_dir: &Path) -> Result<LoadedGraph> {
    let oracle = resolve_group(&gf.group, base_dir)?;
    let peripherals: Vec<SubgroupHandle> = gf
        .peripherals
        .iter()
        .map(|sf| subgroup_from_file(&oracle, sf))
        .collect::<Result<_>>()?;

    if let Some(bundle) = &gf.bundle {
        let s_gens = s_gens_from_words(&oracle, &bundle.s_words)?;
        let ps: Vec<SubgroupHandle> = bundle
            .peripherals
            .iter()
            .map(|sf| subgroup_from_file(&oracle, sf))
            .collect::<Result<_>>()?;
        return match bundle.kind.as_str() {
            "coned" => {
                let coned = crate::cayley::coned_off(&oracle, &s_gens, &ps)?;
                Ok(LoadedGraph {
                    spec: coned.spec.clone(),
                    oracle,
                    peripherals: ps,
                    coned: Some(coned),
                    relative: None,
                })
            }
            "relative" => {
                let rel = crate::cayley::relative_cayley(&oracle, &s_gens, &ps)?;
                Ok(LoadedGraph {
                    spec: rel.spec.clone(),
                    oracle,
                    peripherals: ps,
                    coned: None,
                    relative: Some(rel),
                })
            }
            "plain" => {
                let spec = crate::cayley::cayley_graph(&oracle, &s_gens)?;
                Ok(LoadedGraph { spec, oracle, peripherals: ps, coned: None, relative: None })
            }
            other => Err(Error::BadInput(format!("unknown bundle kind '{other}'"))),
        };
    }

    let vertex_orbits: Vec<VertexOrbit> = gf
        .vertex_orbits
        .iter()
        .map(|vo| {
            Ok(VertexOrbit {
                id: vo.id.clone(),
                stabilizer: subgroup_from_file(&oracle, &vo.stabilizer)?,
            })
        })
        .collect::<Result<_>>()?;
    let orbit_index = |id: &str| -> Result<usize> {
        gf.vertex_orbits
            .iter()
            .position(|vo| vo.id == id)
            .ok_or_else(|| Error::UnknownOrbit(id.to_string()))
    };
    let edge_orbits: Vec<EdgeOrbit> = gf
        .edge_orbits
        .iter()
        .map(|eo| {
            let from = eo.from.clone().unwrap_or_default();
            let to = eo.to.clone().unwrap_or_default();
            let ep0 = (orbit_index(&from.orbit)?, oracle.parse_word(&from.offset)?);
            let ep1 = (orbit_index(&to.orbit)?, oracle.parse_word(&to.offset)?);
            let stabilizer = match &eo.stabilizer {
                Some(sf) => subgroup_from_file(&oracle, sf)?,
                None => SubgroupHandle::trivial(&oracle),
            };
            let label = if let Some(l) = &eo.gen_label {
                EdgeLabel::Gen(l.clone())
            } else if let Some(c) = eo.cone {
                EdgeLabel::Cone(c)
            } else if let Some(p) = eo.peripheral {
                EdgeLabel::Peripheral(p)
            } else {
                EdgeLabel::Plain
            };
            Ok(EdgeOrbit {
                id: eo.id.clone(),
                ep0,
                ep1,
                stabilizer,
                flip: eo.flip.as_ref().map(|w| oracle.parse_word(w)).transpose()?,
                family: eo
                    .family
                    .map(|i| {
                        peripherals.get(i).cloned().ok_or_else(|| {
                            Error::BadInput(format!("family index {i} out of range"))
                        })
                    })
                    .transpose()?,
                label,
            })
        })
        .collect::<Result<_>>()?;
    let cones: Vec<usize> =
        gf.cones.iter().map(|id| orbit_index(id)).collect::<Result<_>>()?;
    let spec = GraphSpec::new(&gf.name, oracle.clone(), vertex_orbits, edge_orbits, cones)?;
    Ok(LoadedGraph { spec, oracle, peripherals, coned: None, relative: None })
}

pub fn s_gens_from_words(
    oracle: &GroupOracle,
    words: &[String],
) -> Result<Vec<(String, GroupElement)>> {
    let mut out = Vec::new();
    for w in words {
        let g = oracle.parse_word(w)?;
        let label = w.replace(' ', ".");
        out.push((label.clone(), g.clone()));
        let gi = oracle.invert(&g);
        if gi != g {
            out.push((format!("{label}-"), gi));
        }
    }
    Ok(out)
}

/// Serialize a spec back to a graph file (inline group description).
pub fn graph_to_file(spec: &GraphSpec, group: GroupFile, peripherals: &[SubgroupHandle]) -> GraphFile {
    let oracle = spec.oracle();
    let vertex_orbits = spec
        .vertex_orbits()
        .iter()
        .map(|vo| VertexOrbitFile {
            id: vo.id.clone(),
            stabilizer: subgroup_to_file(oracle, &vo.stabilizer),
        })
        .collect();
    let edge_orbits = spec
        .edge_orbits()
        .iter()
        .map(|eo| {
            let (mut gen_label, mut cone, mut peripheral) = (None, None, None);
            match &eo.label {
                EdgeLabel::Gen(l) => gen_label = Some(l.clone()),
                EdgeLabel::Cone(i) => cone = Some(*i),
                EdgeLabel::Peripheral(i) => peripheral = Some(*i),
                EdgeLabel::Plain => {}
            }
            EdgeOrbitFile {
                id: eo.id.clone(),
                from: Some(EndpointFile {
                    orbit: spec.vertex_orbits()[eo.ep0.0].id.clone(),
                    offset: oracle.word_token(&eo.ep0.1),
                }),
                to: Some(EndpointFile {
                    orbit: spec.vertex_orbits()[eo.ep1.0].id.clone(),
                    offset: oracle.word_token(&eo.ep1.1),
                }),
                stabilizer: Some(subgroup_to_file(oracle, &eo.stabilizer)),
                flip: eo.flip.as_ref().map(|f| oracle.word_token(f)),
                family: eo.family.as_ref().and_then(|f| peripherals.iter().position(|p| p == f)),
                gen_label,
                cone,
                peripheral,
            }
        })
        .collect();
    GraphFile {
        name: spec.name().to_string(),
        group: GroupRef::Inline(group),
        vertex_orbits,
        edge_orbits,
        cones: spec
            .cone_orbits()
            .iter()
            .map(|&i| spec.vertex_orbits()[i].id.clone())
            .collect(),
        peripherals: peripherals.iter().map(|p| subgroup_to_file(oracle, p)).collect(),
        bundle: None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessFile {
    pub subgroup: SubgroupFile,
    pub base: String,
    pub orbit_edges: Vec<[String; 2]>,
}

pub fn witness_from_file(spec: &GraphSpec, wf: &WitnessFile) -> Result<QcWitness> {
    let subgroup = subgroup_from_file(spec.oracle(), &wf.subgroup)?;
    let base = spec.parse_vertex(&wf.base)?;
    let orbit_edges = wf
        .orbit_edges
        .iter()
        .map(|[a, b]| Ok((spec.parse_vertex(a)?, spec.parse_vertex(b)?)))
        .collect::<Result<_>>()?;
    Ok(QcWitness { subgroup, base, orbit_edges })
}

/// Vertex-token path file: a JSON array of "orbit:word" tokens.
pub fn path_from_file(spec: &GraphSpec, path: &Path) -> Result<Vec<crate::eqgraph::Vertex>> {
    let text = std::fs::read_to_string(path)?;
    let tokens: Vec<String> = serde_json::from_str(&text)?;
    tokens.iter().map(|t| spec.parse_vertex(t)).collect()
}

pub fn load_graph(path: &Path) -> Result<LoadedGraph> {
    let text = std::fs::read_to_string(path)?;
    let gf: GraphFile = serde_json::from_str(&text)
        .map_err(|e| Error::BadInput(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    graph_from_file(&gf, &base_dir)
}

pub fn load_group_file(path: &Path) -> Result<GroupOracle> {
    let text = std::fs::read_to_string(path)?;
    let gf: GroupFile = serde_json::from_str(&text)
        .map_err(|e| Error::BadInput(format!("{}: {e}", path.display())))?;
    group_from_file(&gf)
}

pub fn load_subgroup_file(oracle: &GroupOracle, path: &Path) -> Result<SubgroupHandle> {
    let text = std::fs::read_to_string(path)?;
    let sf: SubgroupFile = serde_json::from_str(&text)
        .map_err(|e| Error::BadInput(format!("{}: {e}", path.display())))?;
    subgroup_from_file(oracle, &sf)
}

pub fn load_witness_file(spec: &GraphSpec, path: &Path) -> Result<QcWitness> {
    let text = std::fs::read_to_string(path)?;
    let wf: WitnessFile = serde_json::from_str(&text)
        .map_err(|e| Error::BadInput(format!("{}: {e}", path.display())))?;
    witness_from_file(spec, &wf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_round_trips() {
        for gf in [
            GroupFile::FreeGroup { generators: vec!["a".into(), "b".into()] },
            GroupFile::FiniteCyclic { order: 6 },
            GroupFile::FreeProductOfFinite {
                factors: vec![
                    FactorFile { label: "s".into(), order: 2 },
                    FactorFile { label: "t".into(), order: 3 },
                ],
            },
        ] {
            let text = serde_json::to_string(&gf).unwrap();
            let back: GroupFile = serde_json::from_str(&text).unwrap();
            let o1 = group_from_file(&gf).unwrap();
            let o2 = group_from_file(&back).unwrap();
            assert_eq!(o1.backend(), o2.backend());
            assert_eq!(o1.ball(2).len(), o2.ball(2).len());
        }
    }

    #[test]
    fn graph_file_round_trip_via_spec() {
        let z = crate::fixtures::z23_fixture();
        let gf = graph_to_file(
            &z.tree,
            GroupFile::FreeProductOfFinite {
                factors: vec![
                    FactorFile { label: "s".into(), order: 2 },
                    FactorFile { label: "t".into(), order: 3 },
                ],
            },
            &z.peripherals(),
        );
        let text = serde_json::to_string_pretty(&gf).unwrap();
        let parsed: GraphFile = serde_json::from_str(&text).unwrap();
        let loaded = graph_from_file(&parsed, Path::new(".")).unwrap();
        assert_eq!(loaded.spec.vertex_orbits().len(), 2);
        let w = loaded
            .spec
            .materialize_ball(&loaded.spec.base_vertex(0), 2, 8, None)
            .unwrap();
        assert_eq!(w.vertex_count(), 7);
    }

    #[test]
    fn bundle_file_reconstructs() {
        let gf = GraphFile {
            name: "coned".into(),
            group: GroupRef::Inline(GroupFile::FreeGroup {
                generators: vec!["a".into(), "b".into()],
            }),
            vertex_orbits: vec![],
            edge_orbits: vec![],
            cones: vec![],
            peripherals: vec![],
            bundle: Some(BundleFile {
                kind: "coned".into(),
                s_words: vec!["a".into(), "b".into()],
                peripherals: vec![SubgroupFile::FreeGenerator { generator: "a".into() }],
            }),
        };
        let loaded = graph_from_file(&gf, Path::new(".")).unwrap();
        assert!(loaded.coned.is_some());
        assert_eq!(loaded.spec.vertex_orbits().len(), 2);
    }
}
