mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use madprompts_core::classifier::read_scores_csv;
use madprompts_core::prompts::prompts_for;
use madprompts_core::report::EvalReport;
use madprompts_core::{EmbeddingCache, Label, PromptSetSelector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fixture;

fn madprompts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_madprompts"))
        .args(args)
        .env_remove("MADPROMPTS_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_report(path: &Path) -> EvalReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tiny_model() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../neural/tests/fixtures/tiny_model")
}

#[test]
fn prompts_dump_matches_engine_bytes() {
    for selector in PromptSetSelector::ALL_SELECTORS {
        for (label, name) in [(Label::BonaFide, "bona-fide"), (Label::Attack, "attack")] {
            for (dot, flag) in [(true, "--dot"), (false, "--no-dot")] {
                let out = madprompts(&[
                    "prompts",
                    "dump",
                    "--selector",
                    selector.name(),
                    "--label",
                    name,
                    flag,
                ]);
                assert!(out.status.success());
                let expected: String = prompts_for(selector, label, dot)
                    .iter()
                    .map(|p| format!("{p}\n"))
                    .collect();
                assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
            }
        }
    }
}

#[test]
fn eval_writes_reports_for_each_subset() {
    let fx = fixture::build(1, 0.6);
    let out_dir = fx.out("out");
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--cache",
        s(&fx.images),
        "--text-cache",
        s(&fx.text),
        "--selector",
        "pr+ap",
        "--dot",
        "--out",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_report(&out_dir.join("report_pr_ap_dot.json"));
    let names: Vec<_> = report.subsets.iter().map(|r| r.subset.as_str()).collect();
    assert_eq!(names, fixture::SUBSETS);
    assert!(report
        .subsets
        .iter()
        .all(|r| r.n_bf == fixture::N_BF && r.n_attack == fixture::N_PER_SUBSET));
    assert_eq!(report.settings.as_ref().unwrap().prompt_count, 40);
    assert!(out_dir.join("report_pr_ap_dot.csv").is_file());

    // the metrics command recomputes the same rows from the score file
    let scores = out_dir.join("scores_pr_ap_dot.csv");
    let out = madprompts(&["metrics", "--scores", s(&scores), "--json"]);
    assert!(out.status.success());
    let recomputed: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(recomputed.subsets.len(), 6);
    for (a, b) in recomputed.rows().zip(report.rows()) {
        assert_eq!((a.n_bf, a.n_attack), (b.n_bf, b.n_attack));
        assert_eq!(a.columns(), b.columns(), "{}", a.subset);
    }
}

#[test]
fn separable_scores_give_zero_errors() {
    let fx = fixture::build(2, 0.0);
    let out_dir = fx.out("out");
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--cache",
        s(&fx.images),
        "--text-cache",
        s(&fx.text),
        "--preset",
        "ti-dot",
        "--out",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_report(&out_dir.join("report_single_dot.json"));
    for row in report.rows() {
        assert_eq!(row.columns(), [0.0; 7], "{}", row.subset);
    }
}

#[test]
fn grid_writes_eight_reports() {
    let fx = fixture::build(3, 0.6);
    let out_dir = fx.out("grid");
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--cache",
        s(&fx.images),
        "--text-cache",
        s(&fx.text),
        "--grid",
        "--no-dot",
        "--out",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reports: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("report_") && n.ends_with(".json"))
        .collect();
    reports.sort();
    assert_eq!(
        reports,
        [
            "report_all_nodot.json",
            "report_ap_nodot.json",
            "report_id_ap_nodot.json",
            "report_id_nodot.json",
            "report_id_pr_nodot.json",
            "report_pr_ap_nodot.json",
            "report_pr_nodot.json",
            "report_single_nodot.json",
        ]
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let fx = fixture::build(4, 0.6);
    let cfg = fx.out("run.toml");
    fs::write(
        &cfg,
        "manifest = \"manifest.csv\"\ncache = \"images.emb\"\ntext_cache = \"text.emb\"\n\
         out = \"from_config\"\nselector = \"id\"\ndot = false\nthreads = 2\n",
    )
    .unwrap();
    let out = madprompts(&["eval", "--config", s(&cfg)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(fx.out("from_config/report_id_nodot.json").is_file());

    let out = madprompts(&["eval", "--config", s(&cfg), "--selector", "ap", "--dot"]);
    assert!(out.status.success());
    assert!(fx.out("from_config/report_ap_dot.json").is_file());

    fs::write(&cfg, "selectr = \"id\"\n").unwrap();
    assert_eq!(
        madprompts(&["eval", "--config", s(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let fx = fixture::build(5, 0.8);
    let run = |threads: &str, dir: &str| {
        let out_dir = fx.out(dir);
        let status = Command::new(env!("CARGO_BIN_EXE_madprompts"))
            .args([
                "eval",
                "--manifest",
                s(&fx.manifest),
                "--cache",
                s(&fx.images),
                "--text-cache",
                s(&fx.text),
            ])
            .args(["--selector", "all", "--out", s(&out_dir)])
            .env("MADPROMPTS_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        (
            fs::read(out_dir.join("report_all_dot.json")).unwrap(),
            fs::read(out_dir.join("scores_all_dot.csv")).unwrap(),
        )
    };
    assert_eq!(run("1", "serial"), run("4", "parallel"));
}

#[test]
fn missing_embedding_is_a_data_error() {
    let fx = fixture::build(6, 0.6);
    let mut manifest = fs::read_to_string(&fx.manifest).unwrap();
    manifest.push_str("ghost,img/ghost.png,1,OpenCV\n");
    fs::write(&fx.manifest, manifest).unwrap();
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--cache",
        s(&fx.images),
        "--text-cache",
        s(&fx.text),
        "--out",
        s(&fx.out("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));
}

#[test]
fn backend_errors_exit_with_4() {
    let fx = fixture::build(7, 0.6);
    // image cache has no prompt entries
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--cache",
        s(&fx.images),
        "--out",
        s(&fx.out("out")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&fx.manifest),
        "--backend",
        s(fx.path()),
        "--out",
        s(&fx.out("out")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

/// Ten small PNGs, half bona fide, half attacks in two subsets.
fn image_dataset(dir: &Path, skip_one: bool) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut manifest = String::from("id,path,label,subset,x0,y0,x1,y1\n");
    for i in 0..10 {
        let (label, subset) = match i {
            0..=4 => (0, "bonafide"),
            5..=7 => (1, "A"),
            _ => (1, "B"),
        };
        let id = format!("s{i}");
        let base: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let img = image::RgbImage::from_fn(48, 40, |x, y| {
            image::Rgb([
                base[0].wrapping_add(x as u8 * 3),
                base[1].wrapping_add(y as u8 * 5),
                base[2],
            ])
        });
        if !(skip_one && i == 3) {
            img.save(dir.join(format!("{id}.png"))).unwrap();
        }
        let crop = if i % 2 == 0 { "2,2,46,38" } else { ",,," };
        manifest.push_str(&format!("{id},{id}.png,{label},{subset},{crop}\n"));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn embed_is_deterministic_and_matches_live_eval() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = image_dataset(dir.path(), false);
    let model = tiny_model();
    let (cache, text) = (dir.path().join("img.emb"), dir.path().join("text.emb"));
    let embed = |out: &Path| {
        madprompts(&[
            "embed",
            "--manifest",
            s(&manifest),
            "--backend",
            s(&model),
            "--out",
            s(out),
            "--text-out",
            s(&text),
        ])
    };
    let out = embed(&cache);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let loaded = EmbeddingCache::load(&cache).unwrap();
    assert_eq!((loaded.len(), loaded.dim()), (10, 8));
    assert_eq!(EmbeddingCache::load(&text).unwrap().len(), 244);

    let again = dir.path().join("img2.emb");
    assert!(embed(&again).status.success());
    assert_eq!(fs::read(&cache).unwrap(), fs::read(&again).unwrap());

    let live = dir.path().join("live");
    let cached = dir.path().join("cached");
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--backend",
        s(&model),
        "--selector",
        "pr",
        "--out",
        s(&live),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = madprompts(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--cache",
        s(&cache),
        "--text-cache",
        s(&text),
        "--selector",
        "pr",
        "--out",
        s(&cached),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let read =
        |d: &Path| read_scores_csv(fs::File::open(d.join("scores_pr_dot.csv")).unwrap()).unwrap();
    let (a, b) = (read(&live), read(&cached));
    assert_eq!(a.len(), 10);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.sample_id, y.sample_id);
        assert!((x.score - y.score).abs() <= 1e-4);
    }
}

#[test]
fn embed_fails_above_one_percent_but_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = image_dataset(dir.path(), true);
    let cache = dir.path().join("img.emb");
    let out = madprompts(&[
        "embed",
        "--manifest",
        s(&manifest),
        "--backend",
        s(&tiny_model()),
        "--out",
        s(&cache),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let loaded = EmbeddingCache::load(&cache).unwrap();
    assert_eq!(loaded.len(), 9);
    assert!(!loaded.contains("s3"));
}
