//! Synthetic multi-subject benchmark: one latent space observed by each subject
//! through its own linear transform plus Gaussian noise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, load_matrix, save_matrix, svd, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Orthogonal,
    InvertibleLinear,
    TallLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_common: usize,
    pub n_unique: usize,
    pub n_test: usize,
    pub latent_dim: usize,
    pub subject_dim: usize,
    pub target_dim: usize,
    pub transform: Transform,
    pub noise_sigma: f64,
    pub n_categories: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// 4 subjects × (1000 common + 200 unique + 100 test), 16 → 64 tall maps, σ = 0.02.
    pub fn standard() -> Self {
        Self {
            n_subjects: 4,
            n_common: 1000,
            n_unique: 200,
            n_test: 100,
            latent_dim: 16,
            subject_dim: 64,
            target_dim: 32,
            transform: Transform::TallLinear,
            noise_sigma: 0.02,
            n_categories: 8,
            seed: 20240101,
        }
    }

    /// Same items as [`SynthConfig::standard`] with square orthogonal transforms.
    pub fn standard_orthogonal() -> Self {
        Self {
            transform: Transform::Orthogonal,
            subject_dim: 16,
            ..Self::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::dim("synth", msg));
        if self.n_subjects == 0
            || self.latent_dim == 0
            || self.target_dim == 0
            || self.n_categories == 0
        {
            return bad("subjects, latent_dim, target_dim and categories must be positive".into());
        }
        if self.n_common + self.n_unique + self.n_test == 0 {
            return bad("each subject needs at least one item".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        match self.transform {
            Transform::TallLinear if self.subject_dim < self.latent_dim => bad(format!(
                "tall_linear needs subject_dim {} >= latent_dim {}",
                self.subject_dim, self.latent_dim
            )),
            Transform::Orthogonal | Transform::InvertibleLinear
                if self.subject_dim != self.latent_dim =>
            {
                bad(format!(
                    "square transforms need subject_dim {} == latent_dim {}",
                    self.subject_dim, self.latent_dim
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn items_per_subject(&self) -> usize {
        self.n_common + self.n_unique + self.n_test
    }

    pub fn total_items(&self) -> usize {
        self.n_common + self.n_subjects * (self.n_unique + self.n_test)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Common,
    Unique,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Common => "common",
            Split::Unique => "unique",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "common" => Ok(Split::Common),
            "unique" => Ok(Split::Unique),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// One subject's observations, rows aligned with `item_ids` and `split`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectDataset {
    pub subject_id: String,
    pub embeddings: Matrix<f64>,
    /// Global item identifiers (rows of the benchmark's latents and targets).
    pub item_ids: Vec<usize>,
    pub split: Vec<Split>,
}

impl SubjectDataset {
    /// Row indices carrying `which`, in row order.
    pub fn rows(&self, which: Split) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == which)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn ids(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.item_ids[r]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub config: SynthConfig,
    /// `total_items × latent_dim`
    pub latents: Matrix<f64>,
    /// `total_items × target_dim`
    pub targets: Matrix<f64>,
    pub subjects: Vec<SubjectDataset>,
    /// Category of every global item.
    pub categories: Vec<usize>,
    /// Planted `subject_dim × latent_dim` maps; empty when loaded from disk.
    pub transforms: Vec<Matrix<f64>>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Modified Gram-Schmidt QR of a square Gaussian, with `diag(R) > 0`.
fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Matrix<f64> {
    loop {
        let g = gaussian(rng, d, d, 1.0);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut ok = true;
        for j in 0..d {
            let mut v = g.col(j);
            for prev in &q {
                let p = dot(&v, prev);
                v.iter_mut().zip(prev).for_each(|(x, &y)| *x -= p * y);
            }
            let n = dot(&v, &v).sqrt();
            if n < 1e-8 {
                ok = false;
                break;
            }
            q.push(v.into_iter().map(|x| x / n).collect());
        }
        if ok {
            let mut m = Matrix::zeros(d, d);
            for (j, c) in q.iter().enumerate() {
                m.set_col(j, c);
            }
            return m;
        }
    }
}

fn planted_transform(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Result<Matrix<f64>> {
    let d = cfg.latent_dim;
    let scale = 1.0 / (d as f64).sqrt();
    match cfg.transform {
        Transform::Orthogonal => Ok(random_orthogonal(rng, d)),
        Transform::TallLinear => Ok(gaussian(rng, cfg.subject_dim, d, scale)),
        Transform::InvertibleLinear => loop {
            let a = gaussian(rng, d, d, scale);
            let s = svd(&a)?.s;
            let smin = *s.last().expect("non-empty spectrum");
            if smin > 0.0 && s[0] / smin <= 100.0 {
                return Ok(a);
            }
        },
    }
}

pub fn generate_benchmark(cfg: &SynthConfig) -> Result<Benchmark> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.total_items();
    let d = cfg.latent_dim;

    let means = gaussian(&mut rng, cfg.n_categories, d, 1.0);
    let categories: Vec<usize> = (0..total)
        .map(|_| rng.random_range(0..cfg.n_categories))
        .collect();
    let spread = gaussian(&mut rng, total, d, 0.5);
    let latents = Matrix::from_fn(total, d, |i, j| means[(categories[i], j)] + spread[(i, j)]);

    let target_map = gaussian(&mut rng, cfg.target_dim, d, 1.0 / (d as f64).sqrt());
    let targets = latents.matmul_t(&target_map)?;

    let mut subjects = Vec::with_capacity(cfg.n_subjects);
    let mut transforms = Vec::with_capacity(cfg.n_subjects);
    for s in 0..cfg.n_subjects {
        let base = cfg.n_common + s * (cfg.n_unique + cfg.n_test);
        let mut item_ids: Vec<usize> = (0..cfg.n_common).collect();
        item_ids.extend(base..base + cfg.n_unique + cfg.n_test);
        let mut split = vec![Split::Common; cfg.n_common];
        split.extend(std::iter::repeat_n(Split::Unique, cfg.n_unique));
        split.extend(std::iter::repeat_n(Split::Test, cfg.n_test));

        let a = planted_transform(&mut rng, cfg)?;
        let clean = latents.select_rows(&item_ids)?.matmul_t(&a)?;
        let noise = gaussian(&mut rng, clean.rows(), clean.cols(), cfg.noise_sigma);
        subjects.push(SubjectDataset {
            subject_id: (s + 1).to_string(),
            embeddings: clean.add(&noise)?,
            item_ids,
            split,
        });
        transforms.push(a);
    }
    Ok(Benchmark {
        config: cfg.clone(),
        latents,
        targets,
        subjects,
        categories,
        transforms,
    })
}

pub fn standard_benchmark() -> Benchmark {
    generate_benchmark(&SynthConfig::standard()).expect("standard configuration is valid")
}

impl Benchmark {
    pub fn subject(&self, id: &str) -> Result<&SubjectDataset> {
        self.subjects
            .iter()
            .find(|s| s.subject_id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no subject {id:?}")))
    }

    /// Writes the benchmark directory layout.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        save_matrix(&self.latents, dir.join("latents.ramx"))?;
        save_matrix(&self.targets, dir.join("targets.ramx"))?;
        for s in &self.subjects {
            let sub = dir.join(format!("subj_{}", s.subject_id));
            fs::create_dir_all(&sub)?;
            save_matrix(&s.embeddings, sub.join("embeddings.ramx"))?;
            let mut csv = String::from("item_id,split\n");
            for (id, sp) in s.item_ids.iter().zip(&s.split) {
                writeln!(csv, "{id},{}", sp.as_str()).expect("string write");
            }
            fs::write(sub.join("split.csv"), csv)?;
        }
        let mut csv = String::from("item_id,category\n");
        for (i, c) in self.categories.iter().enumerate() {
            writeln!(csv, "{i},{c}").expect("string write");
        }
        fs::write(dir.join("categories.csv"), csv)?;
        fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(&self.config)? + "\n",
        )?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config: SynthConfig =
            serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        let latents = load_matrix(dir.join("latents.ramx"))?;
        let targets = load_matrix(dir.join("targets.ramx"))?;
        let categories = parse_pairs(&fs::read_to_string(dir.join("categories.csv"))?, |c| {
            c.parse::<usize>().map_err(|e| e.to_string())
        })?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
        let mut subjects = Vec::with_capacity(config.n_subjects);
        for s in 0..config.n_subjects {
            let id = (s + 1).to_string();
            let sub = dir.join(format!("subj_{id}"));
            let embeddings: Matrix<f64> = load_matrix(sub.join("embeddings.ramx"))?;
            let pairs = parse_pairs(&fs::read_to_string(sub.join("split.csv"))?, |t| {
                t.parse::<Split>().map_err(|e| e.to_string())
            })?;
            if pairs.len() != embeddings.rows() {
                return Err(Error::shape(
                    "benchmark",
                    format!(
                        "subject {id}: {} splits for {} rows",
                        pairs.len(),
                        embeddings.rows()
                    ),
                ));
            }
            let (item_ids, split) = pairs.into_iter().unzip();
            subjects.push(SubjectDataset {
                subject_id: id,
                embeddings,
                item_ids,
                split,
            });
        }
        Ok(Self {
            config,
            latents,
            targets,
            subjects,
            categories,
            transforms: Vec::new(),
        })
    }
}

fn parse_pairs<V>(
    text: &str,
    parse: impl Fn(&str) -> std::result::Result<V, String>,
) -> Result<Vec<(usize, V)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let (a, b) = line.split_once(',').ok_or(Error::Csv {
                line: n + 1,
                detail: "expected two columns".into(),
            })?;
            let id = a.trim().parse::<usize>().map_err(|e| Error::Csv {
                line: n + 1,
                detail: e.to_string(),
            })?;
            let v = parse(b.trim()).map_err(|detail| Error::Csv {
                line: n + 1,
                detail,
            })?;
            Ok((id, v))
        })
        .collect()
}
