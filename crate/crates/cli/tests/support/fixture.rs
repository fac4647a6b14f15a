//! Synthetic cache-backed dataset: one shared bona-fide pool and six
//! attack subsets, with image embeddings drawn around the single-prompt
//! prototypes so every subset has its own difficulty.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use madprompts_core::prompts::{all_prompt_strings, prompts_for};
use madprompts_core::{l2_normalize, Embedding, EmbeddingCache, Label, PromptSetSelector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 16;
pub const SUBSETS: [&str; 6] = [
    "FaceMorph",
    "MIPGAN_I",
    "MIPGAN_II",
    "MorDIFF",
    "OpenCV",
    "Webmorph",
];
pub const N_BF: usize = 30;
pub const N_PER_SUBSET: usize = 20;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub images: PathBuf,
    pub text: PathBuf,
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    l2_normalize(&Embedding::new(v).unwrap())
        .unwrap()
        .values()
        .to_vec()
}

/// `noise` scales the per-sample jitter; 0 gives perfectly separable data.
pub fn build(seed: u64, noise: f64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut text = EmbeddingCache::new(DIM).unwrap();
    for dot in [true, false] {
        for p in all_prompt_strings(dot) {
            text.insert_embedding(p, &Embedding::new(random_vec(&mut rng)).unwrap())
                .unwrap();
        }
    }
    let single = |label| {
        let prompt = &prompts_for(PromptSetSelector::Single, label, true)[0];
        unit(text.get(prompt).unwrap().unwrap().into_values())
    };
    let (bf_dir, ma_dir) = (single(Label::BonaFide), single(Label::Attack));

    let mut images = EmbeddingCache::new(DIM).unwrap();
    let mut manifest = String::from("id,path,label,subset\n");
    let mut add = |id: String,
                   label: Label,
                   subset: &str,
                   center: &[f64],
                   noise: f64,
                   rng: &mut ChaCha8Rng| {
        let jitter = random_vec(rng);
        let v: Vec<f64> = center
            .iter()
            .zip(jitter)
            .map(|(c, j)| c + noise * j)
            .collect();
        images
            .insert_embedding(&id, &Embedding::new(v).unwrap())
            .unwrap();
        writeln!(manifest, "{id},img/{id}.png,{},{subset}", label.code()).unwrap();
    };
    for i in 0..N_BF {
        add(
            format!("bf{i:03}"),
            Label::BonaFide,
            "bonafide",
            &bf_dir,
            noise,
            &mut rng,
        );
    }
    for (k, subset) in SUBSETS.iter().enumerate() {
        let spread = noise * (1.0 + k as f64 * 0.3);
        for i in 0..N_PER_SUBSET {
            add(
                format!("{subset}_{i:03}"),
                Label::Attack,
                subset,
                &ma_dir,
                spread,
                &mut rng,
            );
        }
    }

    let manifest_path = dir.path().join("manifest.csv");
    std::fs::write(&manifest_path, manifest).unwrap();
    let images_path = dir.path().join("images.emb");
    let text_path = dir.path().join("text.emb");
    images.save(&images_path).unwrap();
    text.save(&text_path).unwrap();
    Fixture {
        manifest: manifest_path,
        images: images_path,
        text: text_path,
        dir,
    }
}

impl Fixture {
    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}
