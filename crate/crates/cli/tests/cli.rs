use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use seasoncorr::dataset::{
    read_cloud, read_fused_scores, read_patch_scores, write_cloud, write_patch_scores, write_poses, PatchScores,
};
use seasoncorr::patch_inference::{fuse_patch_scores, make_weight_map, plan_tiles, ScoreGrid};
use seasoncorr::{CameraView, Intrinsics, PointCloud, Quaternion, Vec3, ViewId};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seasoncorr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().display().to_string(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

fn tsv(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    synth(&a, &["--seed", "7", "--views", "3"]);
    synth(&b, &["--seed", "7", "--views", "3"]);
    let ta = tree(&a);
    assert!(ta.contains_key("poses.txt") && ta.contains_key("gt/manifest.txt") && ta.contains_key("clouds/t2.ply"));
    assert_eq!(ta, tree(&b));
    let c = dir.path().join("c");
    synth(&c, &["--seed", "8", "--views", "3"]);
    assert_ne!(ta, tree(&c));
}

#[test]
fn ground_truth_scores_perfectly_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--views", "3", "--traversals", "2"]);
    let gt = dir.path().join("gt/manifest.txt");
    let r = tsv(&ok(&["eval", "--generated", p(&gt), "--ground-truth", p(&gt)]));
    assert_eq!(r["precision"], "1.000000");
    assert_eq!(r["recall"], "1.000000");
    assert_eq!(r["precision_defined"], "true");
}

#[test]
fn match_then_eval_on_noiseless_scene() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    synth(&s, &["--seed", "3", "--views", "4", "--traversals", "2"]);
    let out = dir.path().join("m");
    let summary = tsv(&ok(&[
        "match",
        "--ref-cloud",
        p(&s.join("clouds/t0.ply")),
        "--tgt-cloud",
        p(&s.join("clouds/t1.ply")),
        "--poses",
        p(&s.join("poses.txt")),
        "--out",
        p(&out),
        "--condition",
        "Overcast + Mixed Foliage",
    ]));
    assert!(summary["samples"].parse::<usize>().unwrap() > 0);
    let r = tsv(&ok(&[
        "eval",
        "--generated",
        p(&out.join("manifest.txt")),
        "--ground-truth",
        p(&s.join("gt/manifest.txt")),
    ]));
    assert_eq!(r["precision"], "1.000000");
    assert!(r["recall"].parse::<f64>().unwrap() >= 0.9);

    let stats = ok(&["stats", p(&out.join("manifest.txt"))]);
    let mut lines = stats.lines();
    assert_eq!(lines.next(), Some("condition\tpairs\tmean_n"));
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(row[0], "Overcast + Mixed Foliage");
    assert_eq!(row[1], summary["samples"]);
}

#[test]
fn unreachable_min_common_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    synth(&s, &["--views", "2", "--traversals", "2"]);
    let out = dir.path().join("m");
    ok(&[
        "match",
        "--ref-cloud",
        p(&s.join("clouds/t0.ply")),
        "--tgt-cloud",
        p(&s.join("clouds/t1.ply")),
        "--poses",
        p(&s.join("poses.txt")),
        "--out",
        p(&out),
        "--min-common",
        "10000000",
    ]);
    assert_eq!(fs::read_to_string(out.join("manifest.txt")).unwrap(), "");
}

fn view(id: u32, traversal: &str) -> CameraView<f64> {
    CameraView::new(
        ViewId(id),
        traversal,
        format!("img/{id}.png"),
        Quaternion::identity(),
        Vec3::zero(),
        Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 40.0,
            width: 100,
            height: 80,
        },
    )
    .unwrap()
}

#[test]
fn identical_clouds_from_coincident_cameras_match() {
    let dir = tempfile::tempdir().unwrap();
    let poses = dir.path().join("poses.txt");
    write_poses(&[view(1, "a"), view(2, "b")], fs::File::create(&poses).unwrap()).unwrap();
    let pts: Vec<Vec3<f64>> = (0..20).map(|i| Vec3::new(i as f64 * 0.1 - 1.0, 0.2, 5.0)).collect();
    for (name, id) in [("a.ply", 1), ("b.ply", 2)] {
        let cloud = PointCloud::new("x", pts.clone(), vec![vec![ViewId(id)]; pts.len()]).unwrap();
        write_cloud(&cloud, fs::File::create(dir.path().join(name)).unwrap()).unwrap();
    }
    let out = dir.path().join("m");
    let summary = tsv(&ok(&[
        "match",
        "--ref-cloud",
        p(&dir.path().join("a.ply")),
        "--tgt-cloud",
        p(&dir.path().join("b.ply")),
        "--poses",
        p(&poses),
        "--out",
        p(&out),
        "--min-common",
        "1",
    ]));
    assert_eq!(summary["correspondences"], "20");
    let text = fs::read_to_string(out.join("1_2.corr")).unwrap();
    assert!(text.starts_with("CORR 1 1 2 b 20\n"), "{text}");
    assert_eq!(fs::read_to_string(out.join("manifest.txt")).unwrap(), "1_2.corr\n");

    // the same clouds without visibility need explicit traversals
    for name in ["a.ply", "b.ply"] {
        let cloud = PointCloud::from_positions("x", pts.clone()).unwrap();
        write_cloud(&cloud, fs::File::create(dir.path().join(name)).unwrap()).unwrap();
    }
    let (a, b) = (dir.path().join("a.ply"), dir.path().join("b.ply"));
    let base = [
        "match",
        "--ref-cloud",
        p(&a),
        "--tgt-cloud",
        p(&b),
        "--poses",
        p(&poses),
        "--out",
        p(&out),
        "--min-common",
        "1",
    ];
    assert_eq!(code(&base), 2);
    let mut explicit = base.to_vec();
    explicit.extend(["--ref-traversal", "a", "--tgt-traversal", "b", "--profile", "robotcar"]);
    assert_eq!(tsv(&ok(&explicit))["correspondences"], "20");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    synth(&s, &["--views", "3", "--traversals", "2"]);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep\nmin_common = 10000000\nkappa = 0.01\n").unwrap();
    let base = |out: &Path| {
        vec![
            "match".to_string(),
            "--ref-cloud".into(),
            p(&s.join("clouds/t0.ply")).into(),
            "--tgt-cloud".into(),
            p(&s.join("clouds/t1.ply")).into(),
            "--poses".into(),
            p(&s.join("poses.txt")).into(),
            "--out".into(),
            p(out).into(),
            "--config".into(),
            p(&cfg).into(),
        ]
    };
    let out = dir.path().join("file");
    let args = base(&out);
    let from_file = tsv(&ok(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    assert_eq!(from_file["samples"], "0");
    let out = dir.path().join("flag");
    let mut args = base(&out);
    args.extend(["--min-common".into(), "100".into()]);
    let from_flag = tsv(&ok(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    assert!(from_flag["samples"].parse::<usize>().unwrap() > 0);

    fs::write(&cfg, "kappa: 0.01\n").unwrap();
    let out = dir.path().join("bad");
    let args = base(&out);
    assert_eq!(code(&args.iter().map(String::as_str).collect::<Vec<_>>()), 2);
}

#[test]
fn fuse_writes_a_cloud_that_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    synth(&s, &["--views", "2", "--traversals", "2"]);
    let cloud = dir.path().join("t0.ply");
    ok(&[
        "fuse",
        "--poses",
        p(&s.join("poses.txt")),
        "--depth-dir",
        p(&s.join("depth")),
        "--traversal",
        "t0",
        "--out",
        p(&cloud),
        "--pixel-stride",
        "8",
    ]);
    let bytes = fs::read(&cloud).unwrap();
    let parsed = read_cloud(BufReader::new(&bytes[..]), "t0").unwrap();
    assert!(parsed.len() > 100);
    assert!(parsed.visibility().iter().flatten().all(|v| v.0 < 1000));
    let mut again = Vec::new();
    write_cloud(&parsed, &mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn fuse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    synth(&s, &["--views", "2", "--traversals", "2"]);
    let poses = s.join("poses.txt");
    let out = dir.path().join("x.ply");
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(
        code(&["fuse", "--poses", p(&poses), "--depth-dir", p(&empty), "--out", p(&out)]),
        2
    );
    assert_eq!(
        code(&[
            "fuse",
            "--poses",
            p(&dir.path().join("nope")),
            "--depth-dir",
            p(&s.join("depth")),
            "--out",
            p(&out)
        ]),
        2
    );
    // all traversals at once is ambiguous
    assert_eq!(
        code(&[
            "fuse",
            "--poses",
            p(&poses),
            "--depth-dir",
            p(&s.join("depth")),
            "--out",
            p(&out)
        ]),
        2
    );
    fs::write(empty.join("bad.depth"), b"DEPTH 0 2 2\nxx").unwrap();
    let res = run(&["fuse", "--poses", p(&poses), "--depth-dir", p(&empty), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bad.depth"));
    assert!(res.stdout.is_empty());
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["match", "--kappa", "x"]), 2);
    assert_eq!(code(&["stats", p(&dir.path().join("missing.txt"))]), 2);
    let manifest = dir.path().join("manifest.txt");
    fs::write(&manifest, "broken.corr\n").unwrap();
    fs::write(dir.path().join("broken.corr"), "CORR 1 0 1 tag 2\n1 2 3 4\n").unwrap();
    let res = run(&["stats", p(&manifest)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line"));
    assert_eq!(code(&["losscheck", "--per-combo", "0"]), 2);
    assert_eq!(
        code(&["synth", "--out", p(&dir.path().join("s")), "--traversals", "1"]),
        2
    );
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn stats_on_empty_manifest_prints_header() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.txt");
    fs::write(&manifest, "").unwrap();
    assert_eq!(ok(&["stats", p(&manifest)]), "condition\tpairs\tmean_n\n");
}

#[test]
fn losscheck_passes() {
    let out = ok(&["losscheck", "--per-combo", "2", "--seed", "5"]);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().skip(1).all(|l| l.ends_with("\tok")), "{out}");
}

#[test]
fn fuse_scores_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h, patch, stride) = (50, 37, 20, 13);
    let plan = plan_tiles(w, h, patch, stride).unwrap();
    let mut patches = Vec::new();
    for (i, &(x, y)) in plan.origins.iter().enumerate() {
        let values: Vec<f64> = (0..patch * patch * 3)
            .map(|k| ((k * 7 + i * 13) % 29) as f64 * 0.25 - 3.0)
            .collect();
        let pt = PatchScores {
            x,
            y,
            scores: ScoreGrid::new(patch, patch, 3, values).unwrap(),
        };
        write_patch_scores(
            &pt,
            fs::File::create(dir.path().join(format!("{i:03}.scores"))).unwrap(),
        )
        .unwrap();
        patches.push(read_patch_scores(fs::File::open(dir.path().join(format!("{i:03}.scores"))).unwrap()).unwrap());
    }
    let out = dir.path().join("fused.bin");
    ok(&[
        "fuse-scores",
        p(dir.path()),
        "--width",
        "50",
        "--height",
        "37",
        "--stride",
        "13",
        "--center",
        "8",
        "--out",
        p(&out),
    ]);
    let got = read_fused_scores(fs::File::open(&out).unwrap()).unwrap();
    let want = fuse_patch_scores(&plan, &make_weight_map(patch, 8, 1e-6).unwrap(), &patches).unwrap();
    assert_eq!(got.width(), w);
    assert_eq!(got.height(), h);
    for (a, b) in got.values().iter().zip(want.values()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    // a missing patch is rejected
    fs::remove_file(dir.path().join("000.scores")).unwrap();
    assert_eq!(
        code(&[
            "fuse-scores",
            p(dir.path()),
            "--width",
            "50",
            "--height",
            "37",
            "--stride",
            "13",
            "--center",
            "8",
            "--out",
            p(&out)
        ]),
        2
    );
}
