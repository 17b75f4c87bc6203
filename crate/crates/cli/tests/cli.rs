use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tcresnet::audio_io::{encode_wav, AudioClip, Label, CLIP_LEN, SAMPLE_RATE};
use tcresnet::features::MfccMatrix;

fn kws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kws")).args(args).output().expect("spawn kws")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = kws(args);
    assert!(o.status.success(), "kws {args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

/// Cheap xorshift noise so fixtures need no rng crate.
fn noise(seed: u64, amp: f32, len: usize) -> Vec<f32> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            amp * ((s >> 40) as f32 / (1u64 << 23) as f32 - 1.0)
        })
        .collect()
}

fn word_clip(word: usize, variant: u64) -> AudioClip {
    let freq = 200.0 + 150.0 * word as f32;
    let mut x = noise(variant, 0.02, CLIP_LEN);
    for (i, v) in x.iter_mut().enumerate().skip(3_000).take(10_000) {
        *v += 0.4 * (2.0 * std::f32::consts::PI * freq * i as f32 / SAMPLE_RATE as f32).sin();
    }
    AudioClip::new(x, SAMPLE_RATE)
}

fn toy_tree(root: &Path, per_word: usize) {
    let words: Vec<&str> = Label::TARGETS.iter().map(|l| l.name()).chain(["bed", "cat"]).collect();
    for (w, word) in words.iter().enumerate() {
        let dir = root.join(word);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_word {
            let name = format!("{:08x}_nohash_0.wav", (w * 7919 + i * 104_729) as u32);
            fs::write(dir.join(name), encode_wav(&word_clip(w, (w * 100 + i) as u64)).unwrap()).unwrap();
        }
    }
    let bg = root.join("_background_noise_");
    fs::create_dir_all(&bg).unwrap();
    let clip = AudioClip::new(noise(7, 0.3, 3 * CLIP_LEN), SAMPLE_RATE);
    fs::write(bg.join("white.wav"), encode_wav(&clip).unwrap()).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn profile_totals() {
    let expected = [
        ("tc-resnet8", 65_824u64, 3_045_120u64),
        ("tc-resnet14", 136_928, 6_061_056),
        ("tc-resnet8-1.5", 145_248, 6_568_416),
        ("tc-resnet14-1.5", 304_608, 13_354_272),
        ("2d-resnet8", 64_048, 31_957_632),
        ("2d-resnet8-pool", 64_048, 3_590_400),
    ];
    for (model, params, flops) in expected {
        let text = ok(&["profile", "--model", model, "--csv"]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("layer,out_shape,params_all,params_trainable,flops"));
        let (mut sp, mut sf) = (0u64, 0u64);
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            sp += f[2].parse::<u64>().unwrap();
            sf += f[4].parse::<u64>().unwrap();
        }
        assert_eq!((sp, sf), (params, flops), "{model}");
        let table = ok(&["profile", "--model", model]);
        assert!(table.contains(&params.to_string()) && table.contains(&flops.to_string()));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(kws(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kws(&["profile"]).status.code(), Some(2));
    let o = kws(&["profile", "--model", "tc-resnet9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("depth"));
    let o = kws(&["featurize", "--wav", "/nonexistent/a.wav"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn featurize_writes_mfc() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    fs::write(&wav, encode_wav(&word_clip(3, 1)).unwrap()).unwrap();
    let out = dir.path().join("a.mfc");
    ok(&["featurize", "--wav", p(&wav), "--out", p(&out)]);
    let m = MfccMatrix::read_from(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!((m.t, m.f), (98, 40));
    assert_eq!(fs::metadata(&out).unwrap().len(), 16 + 98 * 40 * 4);

    let garbage = dir.path().join("bad.wav");
    fs::write(&garbage, b"RIFF\0\0\0\0WAVE").unwrap();
    let o = kws(&["featurize", "--wav", p(&garbage)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn split_from_listing() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("files.txt");
    let mut text = String::new();
    for word in ["yes", "no", "bed"] {
        for i in 0..20 {
            text.push_str(&format!("{word}/{:08x}_nohash_0.wav\n", i * 7 + word.len()));
        }
    }
    fs::write(&list, text).unwrap();
    let out = dir.path().join("index.csv");
    ok(&["split", "--list", p(&list), "--out", p(&out)]);
    let again = ok(&["split", "--list", p(&list)]);
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv, again);
    assert!(csv.starts_with("path,label,split\n"));
    assert!(csv.lines().any(|l| l.starts_with("yes/") && l.contains(",yes,")));
    assert!(csv.contains(",silence,"));
    assert_eq!(kws(&["split"]).status.code(), Some(2));
}

#[test]
fn train_infer_eval_roc() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    toy_tree(&data, 12);
    let index = dir.path().join("index.csv");
    ok(&["split", "--data-root", p(&data), "--val", "25", "--test", "25", "--out", p(&index)]);

    let cfg = dir.path().join("train.toml");
    fs::write(
        &cfg,
        "batch_size = 16\ntotal_iters = 6\neval_every = 3\nlr_drop_every = 4\ndropout_p = 0.1\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let args = [
        "train", "--model", "tc-resnet8", "--data-root", p(&data), "--index", p(&index), "--config", p(&cfg),
        "--seed", "3", "--out", p(&run),
    ];
    ok(&args);
    let ckpt = run.join("best.ckpt");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("iter,lr,train_loss,val_acc"));
    assert_eq!(metrics.lines().count(), 7);
    assert_eq!(metrics.lines().filter(|l| !l.ends_with(',')).count(), 3);

    let first = fs::read(&ckpt).unwrap();
    let run2 = dir.path().join("run2");
    let mut args2 = args;
    args2[args2.len() - 1] = p(&run2);
    ok(&args2);
    assert_eq!(first, fs::read(run2.join("best.ckpt")).unwrap(), "same seed, same checkpoint");

    let wav = data.join("yes").read_dir().unwrap().next().unwrap().unwrap().path();
    let plain = ok(&["infer", "--checkpoint", p(&ckpt), "--wav", p(&wav)]);
    let lines: Vec<&str> = plain.lines().collect();
    assert_eq!(lines.len(), 13);
    let probs: Vec<f64> = lines[1..].iter().map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-4);
    assert!(Label::ALL.iter().any(|l| l.name() == lines[0]));
    let folded = ok(&["infer", "--model", p(&ckpt), "--wav", p(&wav), "--fold"]);
    assert_eq!(folded.lines().next(), plain.lines().next(), "folding keeps top-1");

    let scores = dir.path().join("scores.csv");
    let acc = ok(&[
        "eval", "--checkpoint", p(&ckpt), "--data-root", p(&data), "--index", p(&index), "--split", "test",
        "--scores-out", p(&scores),
    ]);
    assert!(acc.starts_with("accuracy "));
    let score_text = fs::read_to_string(&scores).unwrap();
    assert!(score_text.starts_with("label,yes,no,up,down,left,right,on,off,stop,go,silence,unknown\n"));

    let curve = dir.path().join("roc.csv");
    let auc = ok(&["eval-roc", "--scores", p(&scores), "--out", p(&curve)]);
    let area: f64 = auc.trim().strip_prefix("auc ").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&area));
    assert!(fs::read_to_string(&curve).unwrap().starts_with("far,frr\n"));

    let avg = ok(&["eval-roc", "--scores", p(&scores), p(&scores), "--exclude-classes", "silence,unknown"]);
    assert_eq!(avg.lines().count(), 102);

    let direct = ok(&[
        "eval-roc", "--checkpoint", p(&ckpt), "--data-root", p(&data), "--index", p(&index), "--out", p(&curve),
    ]);
    assert_eq!(direct, auc);

    let o = kws(&["eval-roc", "--scores", p(&scores), "--exclude-classes", "banana"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_json() {
    for extra in [&[][..], &["--no-fold"][..]] {
        let mut args = vec!["bench", "--model", "tc-resnet8", "--runs", "3", "--warmup", "1"];
        args.extend_from_slice(extra);
        let v: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
        assert_eq!(v["runs"], 3);
        assert_eq!(v["times_ms"].as_array().unwrap().len(), 3);
        assert!(v["mean_ms"].as_f64().unwrap() > 0.0);
    }
}
