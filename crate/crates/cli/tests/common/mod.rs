#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use egogate::audio::write_wav_pcm16;
use egogate::AudioClip;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATE: u32 = 16000;

pub fn egogate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_egogate"))
}

pub fn run(args: &[&str]) -> Output {
    egogate().args(args).output().expect("spawn egogate")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "egogate {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Clattering: sparse broadband bursts over faint noise.
pub fn interaction_samples(seconds: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = (seconds * f64::from(RATE)) as usize;
    let mut out = vec![0f32; n];
    let mut i = 0;
    while i < n {
        let len = rng.random_range(800..2400).min(n - i);
        let amp = rng.random_range(0.3f32..0.9);
        for s in &mut out[i..i + len] {
            *s = amp * rng.random_range(-1.0f32..1.0);
        }
        i += len + rng.random_range(400..1600);
    }
    for s in &mut out {
        *s += 0.01 * rng.random_range(-1.0f32..1.0);
    }
    out
}

/// Background: a low hum with faint noise.
pub fn background_samples(seconds: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = (seconds * f64::from(RATE)) as usize;
    let f = rng.random_range(90.0..180.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(RATE);
            (0.4 * (std::f64::consts::TAU * f * t + phase).sin()) as f32 + 0.01 * rng.random_range(-1.0f32..1.0)
        })
        .collect()
}

pub fn write_clip(path: &Path, samples: Vec<f32>) {
    write_wav_pcm16(path, &AudioClip::mono(samples, RATE).unwrap()).unwrap();
}

/// Labeled clip corpus in `dir`; returns the label file path.
pub fn make_corpus(dir: &Path, n_pos: usize, n_neg: usize, seconds: f64, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = String::new();
    for i in 0..n_pos.max(n_neg) {
        if i < n_pos {
            let name = format!("hoi_{i:03}.wav");
            write_clip(&dir.join(&name), interaction_samples(seconds, &mut rng));
            lines.push_str(&format!("{{\"clip_file\": \"{name}\", \"is_hand_object_interaction\": 1}}\n"));
        }
        if i < n_neg {
            let name = format!("bg_{i:03}.wav");
            write_clip(&dir.join(&name), background_samples(seconds, &mut rng));
            lines.push_str(&format!("{{\"clip_file\": \"{name}\", \"is_hand_object_interaction\": 0}}\n"));
        }
    }
    let labels = dir.join("labels.jsonl");
    std::fs::write(&labels, lines).unwrap();
    labels
}

/// A recording alternating background and interaction segments; returns
/// the ground-truth interaction spans.
pub fn make_recording(path: &Path, segments: &[(bool, f64)], seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut spans = Vec::new();
    let mut t = 0.0;
    for &(hoi, secs) in segments {
        if hoi {
            samples.extend(interaction_samples(secs, &mut rng));
            spans.push((t, t + secs));
        } else {
            samples.extend(background_samples(secs, &mut rng));
        }
        t += secs;
    }
    write_clip(path, samples);
    spans
}
