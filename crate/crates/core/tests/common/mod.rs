#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Files for a synthetic experiment inside a temporary directory.
pub struct Workload {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

pub const SYNTHETIC_PREDICTORS: [&str; 13] = [
    "nqc",
    "wig",
    "sigma_max",
    "sigma_frac",
    "smv",
    "uef",
    "rsd",
    "scnqc",
    "qv_nqc",
    "dm",
    "external:file=ext_a.tsv",
    "external:file=ext_b.tsv",
    "external:file=ext_c.tsv",
];

const POOL: usize = 150;
const DEPTH: usize = 100;
const DIM: usize = 16;
const VARIANTS: usize = 2;

/// `queries × rankers` runs with graded qrels, embeddings, query variants and
/// three external prediction files; the config lists all 13 predictors.
pub fn synthetic_workload(queries: usize, rankers: usize, seed: u64) -> Workload {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qids: Vec<String> = (0..queries).map(|i| format!("q{i:03}")).collect();
    let rids: Vec<String> = (0..rankers).map(|j| format!("r{j}")).collect();

    let mut qrels = String::new();
    let mut emb = String::new();
    let mut meta = String::from("qid\tterm_count\tvariants\n");
    let mut grades: Vec<Vec<u32>> = Vec::new();
    for q in &qids {
        let g: Vec<u32> = (0..POOL)
            .map(|_| match rng.gen::<f64>() {
                p if p < 0.75 => 0,
                p if p < 0.88 => 1,
                p if p < 0.96 => 2,
                _ => 3,
            })
            .collect();
        for (d, grade) in g.iter().enumerate() {
            writeln!(qrels, "{q} 0 {q}_d{d:03} {grade}").unwrap();
            let v: Vec<String> = (0..DIM)
                .map(|_| format!("{:.5}", rng.gen_range(-1.0..1.0) + f64::from(*grade) * 0.3))
                .collect();
            writeln!(emb, "{q}_d{d:03}\t{}", v.join(",")).unwrap();
        }
        grades.push(g);
        let variants: Vec<String> = (1..=VARIANTS).map(|v| format!("{q}_v{v}")).collect();
        writeln!(meta, "{q}\t{}\t{}", rng.gen_range(1..6), variants.join(",")).unwrap();
    }

    let mut run_paths = Vec::new();
    for (j, r) in rids.iter().enumerate() {
        let mut run = String::new();
        for (i, q) in qids.iter().enumerate() {
            let skill: f64 = rng.gen_range(0.0..2.0);
            let targets = std::iter::once(q.clone())
                .chain((1..=VARIANTS).map(|v| format!("{q}_v{v}")));
            for target in targets {
                let mut docs: Vec<(usize, f64)> = (0..POOL)
                    .map(|d| {
                        let s = 10.0 + j as f64 + skill * f64::from(grades[i][d]) + rng.gen_range(0.0..4.0);
                        (d, s)
                    })
                    .collect();
                docs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                for (rank, (d, s)) in docs.iter().take(DEPTH).enumerate() {
                    writeln!(run, "{target} Q0 {q}_d{d:03} {} {s:.6} {r}", rank + 1).unwrap();
                }
            }
        }
        let path = format!("{r}.run");
        fs::write(dir.path().join(&path), run).unwrap();
        run_paths.push((r.clone(), path));
    }

    for name in ["ext_a", "ext_b", "ext_c"] {
        let mut out = String::from("qid\tranker_id\tscore\n");
        for q in &qids {
            for r in &rids {
                writeln!(out, "{q}\t{r}\t{:.6}", rng.gen::<f64>()).unwrap();
            }
        }
        fs::write(dir.path().join(format!("{name}.tsv")), out).unwrap();
    }
    fs::write(dir.path().join("qrels.txt"), qrels).unwrap();
    fs::write(dir.path().join("embeddings.tsv"), emb).unwrap();
    fs::write(dir.path().join("query_meta.tsv"), meta).unwrap();

    let runs: Vec<String> = run_paths
        .iter()
        .map(|(r, p)| format!("\"{r}\": \"{p}\""))
        .collect();
    let preds: Vec<String> = SYNTHETIC_PREDICTORS.iter().map(|p| format!("\"{p}\"")).collect();
    let config = format!(
        "{{\n  \"runs\": {{{}}},\n  \"qrels\": \"qrels.txt\",\n  \"queries\": [{}],\n  \
         \"metrics\": [\"ap@50\", \"ndcg@10\"],\n  \"predictors\": [{}],\n  \
         \"embeddings\": \"embeddings.tsv\",\n  \"query_meta\": \"query_meta.tsv\",\n  \
         \"seed\": {seed},\n  \"output\": {{\"dir\": \"report\", \"formats\": [\"csv\", \"markdown\", \"latex\"]}}\n}}\n",
        runs.join(", "),
        qids.iter().map(|q| format!("\"{q}\"")).collect::<Vec<_>>().join(", "),
        preds.join(", "),
    );
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, config).unwrap();
    Workload { dir, config: config_path }
}

/// Contents of every file under `dir`, sorted by name.
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}
