use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{generate_city_instance, generate_dbn_instance, BenchError};
use crate::hierarchy::{
    build_abstract_models, induce_hierarchy_spectral, AbstractModelStack, AbstractionHierarchy, DbnSpec,
};
use crate::hmm::{validate_model, HmmModel, ObservationSequence};
use crate::tav::{Heuristic, TavOptions};
use crate::{decode, Algorithm, Error};

/// Largest log-likelihood difference tolerated between decoders on one
/// instance.
pub const AGREEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub runs: Vec<RunSpec>,
    /// CSV destination used when the caller does not name one.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub instance: InstanceSpec,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub hierarchy: HierarchySpec,
    #[serde(default)]
    pub tav: TavOptions,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Seed for instance generation.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSpec {
    /// Generated DBN; cardinalities slowest first.
    Dbn {
        cardinalities: Vec<usize>,
        epsilon: f64,
        horizon: usize,
    },
    Cities,
    /// Model JSON, observation text and optional hierarchy JSON. Relative
    /// paths resolve against the config file's directory.
    Files {
        model: PathBuf,
        obs: PathBuf,
        #[serde(default)]
        hierarchy: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchySpec {
    /// The generator's own hierarchy, or the instance's hierarchy file.
    #[default]
    Native,
    Flat,
    /// Spectral induction with binary splits.
    Spectral,
    /// Consecutive blocks of the given size at every level.
    Balanced(usize),
    File(PathBuf),
}

impl HierarchySpec {
    fn label(&self) -> String {
        match self {
            HierarchySpec::Native => "native".into(),
            HierarchySpec::Flat => "flat".into(),
            HierarchySpec::Spectral => "spectral".into(),
            HierarchySpec::Balanced(b) => format!("balanced{b}"),
            HierarchySpec::File(p) => p.display().to_string(),
        }
    }
}

/// Tree over `0..n` whose every level groups `branching` consecutive states.
pub fn balanced_hierarchy(n: usize, branching: usize) -> Result<AbstractionHierarchy, Error> {
    if branching < 2 {
        return Err(BenchError::Config(format!("branching {branching} is below 2")).into());
    }
    let mut sizes = vec![n];
    let mut maps = Vec::new();
    while *sizes.last().unwrap() > 1 {
        let s = *sizes.last().unwrap();
        maps.push((0..s).map(|i| i / branching).collect());
        sizes.push(s.div_ceil(branching));
    }
    Ok(AbstractionHierarchy::new(sizes, maps)?)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub epsilon: Option<f64>,
    pub hierarchy: String,
    pub heuristic: Option<Heuristic>,
    pub presegments: Option<usize>,
    pub loglik: f64,
    pub iterations: usize,
    pub cells: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Median wall time of each run, in config order.
    pub median_wall_ms: Vec<f64>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| BenchError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

struct Instance {
    model: HmmModel,
    hierarchy: Option<AbstractionHierarchy>,
    obs: ObservationSequence,
    epsilon: Option<f64>,
}

struct Prepared {
    stack: AbstractModelStack,
    hierarchy: AbstractionHierarchy,
    obs: Rc<ObservationSequence>,
    epsilon: Option<f64>,
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())).into())
}

fn load_instance(spec: &InstanceSpec, seed: u64, base: &Path) -> Result<Instance, Error> {
    Ok(match spec {
        InstanceSpec::Dbn {
            cardinalities,
            epsilon,
            horizon,
        } => {
            let dbn = DbnSpec {
                cardinalities: cardinalities.clone(),
                epsilon: *epsilon,
                seed,
            };
            let (model, hierarchy, obs) = generate_dbn_instance(&dbn, *horizon)?;
            Instance {
                model,
                hierarchy: Some(hierarchy),
                obs,
                epsilon: Some(*epsilon),
            }
        }
        InstanceSpec::Cities => {
            let (model, hierarchy, obs) = generate_city_instance(seed)?;
            Instance {
                model,
                hierarchy: Some(hierarchy),
                obs,
                epsilon: None,
            }
        }
        InstanceSpec::Files { model, obs, hierarchy } => {
            let hierarchy = match hierarchy {
                Some(p) => Some(AbstractionHierarchy::from_json(&read(&base.join(p))?)?),
                None => None,
            };
            Instance {
                model: HmmModel::from_json(&read(&base.join(model))?)?,
                hierarchy,
                obs: ObservationSequence::parse(&read(&base.join(obs))?)?,
                epsilon: None,
            }
        }
    })
}

fn choose_hierarchy(spec: &HierarchySpec, instance: &Instance, base: &Path) -> Result<AbstractionHierarchy, Error> {
    let n = instance.model.num_states;
    match spec {
        HierarchySpec::Native => instance
            .hierarchy
            .clone()
            .ok_or_else(|| BenchError::Config("instance has no native hierarchy".into()).into()),
        HierarchySpec::Flat => Ok(AbstractionHierarchy::flat(n)),
        HierarchySpec::Spectral => {
            let lm = validate_model(&instance.model)?;
            Ok(induce_hierarchy_spectral(&lm, 2, 1)?.hierarchy)
        }
        HierarchySpec::Balanced(b) => balanced_hierarchy(n, *b),
        HierarchySpec::File(p) => Ok(AbstractionHierarchy::from_json(&read(&base.join(p))?)?),
    }
}

/// Runs every configured decode and checks that all decoders agree on the
/// log-likelihood of each instance.
pub fn run_benchmark(config: &BenchConfig, base: &Path) -> Result<BenchReport, Error> {
    let mut instances: HashMap<String, Rc<Instance>> = HashMap::new();
    let mut prepared: HashMap<String, Rc<Prepared>> = HashMap::new();
    let mut reference: HashMap<String, f64> = HashMap::new();
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (k, run) in config.runs.iter().enumerate() {
        if run.repetitions == 0 {
            return Err(BenchError::Config(format!("run {k} has zero repetitions")).into());
        }
        let instance_key = serde_json::to_string(&(&run.instance, run.seed)).expect("spec serializes");
        let instance = match instances.get(&instance_key) {
            Some(i) => i.clone(),
            None => {
                let i = Rc::new(load_instance(&run.instance, run.seed, base)?);
                instances.insert(instance_key.clone(), i.clone());
                i
            }
        };
        let key = serde_json::to_string(&(&instance_key, &run.hierarchy)).expect("spec serializes");
        let prep = match prepared.get(&key) {
            Some(p) => p.clone(),
            None => {
                let hierarchy = choose_hierarchy(&run.hierarchy, &instance, base)?;
                let lm = validate_model(&instance.model)?;
                let stack = build_abstract_models(&lm, &hierarchy)?;
                let p = Rc::new(Prepared {
                    stack,
                    hierarchy,
                    obs: Rc::new(instance.obs.clone()),
                    epsilon: instance.epsilon,
                });
                prepared.insert(key, p.clone());
                p
            }
        };
        let is_tav = run.algorithm == Algorithm::Tav;
        let mut walls = Vec::with_capacity(run.repetitions);
        for _ in 0..run.repetitions {
            let (result, _) = decode(run.algorithm, &prep.stack, &prep.hierarchy, &prep.obs, run.tav)?;
            let expected = *reference.entry(instance_key.clone()).or_insert(result.log_likelihood);
            if (result.log_likelihood - expected).abs() > AGREEMENT_TOLERANCE {
                return Err(BenchError::Disagreement {
                    run: k,
                    algorithm: run.algorithm.to_string(),
                    expected,
                    got: result.log_likelihood,
                }
                .into());
            }
            walls.push(result.stats.wall_ms);
            rows.push(BenchRow {
                algorithm: run.algorithm,
                n: prep.hierarchy.level_size(0),
                t: prep.obs.len(),
                epsilon: prep.epsilon,
                hierarchy: run.hierarchy.label(),
                heuristic: is_tav.then_some(run.tav.heuristic),
                presegments: is_tav.then_some(run.tav.presegments),
                loglik: result.log_likelihood,
                iterations: result.stats.iterations,
                cells: result.stats.cells_explored,
                wall_ms: result.stats.wall_ms,
            });
        }
        medians.push(median(&walls));
    }
    Ok(BenchReport {
        rows,
        median_wall_ms: medians,
    })
}
