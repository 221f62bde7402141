//! Brute-force reference implementations used to check the library. None
//! of these call into the code under test.

/// A run of `true` cells on a millisecond grid, as `[first_ms, one_past_last_ms)`.
pub type MsRun = (i64, i64);

pub fn to_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn runs(timeline: &[bool], origin_ms: i64) -> Vec<MsRun> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &on) in timeline.iter().chain(std::iter::once(&false)).enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((origin_ms + s as i64, origin_ms + i as i64));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Fixed-OFF trigger: paint the span `[t, t + t_fixed)` of every
/// triggering sample onto a millisecond grid and read off the runs.
/// Touching spans paint contiguous cells and so come out merged.
pub fn fixed_trigger_ms(starts: &[f64], probs: &[f64], tau: f64, t_fixed: f64) -> Vec<MsRun> {
    let horizon = starts.last().map_or(0, |&t| to_ms(t + t_fixed)) + 2;
    let mut grid = vec![false; horizon as usize + 1];
    for (&t, &p) in starts.iter().zip(probs) {
        if p >= tau {
            for cell in &mut grid[to_ms(t) as usize..to_ms(t + t_fixed) as usize] {
                *cell = true;
            }
        }
    }
    runs(&grid, 0)
}

/// Hysteresis trigger: compute the state after each sample with the
/// literal three-case rule, then paint `[t_i, t_i + hop)` for every ON
/// sample.
pub fn hysteresis_ms(starts: &[f64], probs: &[f64], hop: f64, tau_on: f64, tau_off: f64) -> Vec<MsRun> {
    let horizon = starts.last().map_or(0, |&t| to_ms(t + hop)) + 2;
    let mut grid = vec![false; horizon as usize + 1];
    let mut on = false;
    for (&t, &p) in starts.iter().zip(probs) {
        on = if !on && p >= tau_on {
            true
        } else if on && p < tau_off {
            false
        } else {
            on
        };
        if on {
            for cell in &mut grid[to_ms(t) as usize..to_ms(t + hop) as usize] {
                *cell = true;
            }
        }
    }
    runs(&grid, 0)
}

/// Simple single-threshold run extractor: a run starts at a sample with
/// `p >= tau` and ends at the first later sample below it (or one hop past
/// the last sample).
pub fn threshold_runs(starts: &[f64], probs: &[f64], hop: f64, tau: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (&t, &p) in starts.iter().zip(probs) {
        match (p >= tau, open) {
            (true, None) => open = Some(t),
            (false, Some(s)) => {
                out.push((s, t));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(&last)) = (open, starts.last()) {
        out.push((s, last + hop));
    }
    out
}

/// Frame `i` captured iff some interval has `start <= i/fps < stop`,
/// checked against every interval.
pub fn captured_frames(fps: f64, frame_count: usize, intervals: &[(f64, f64)]) -> Vec<bool> {
    (0..frame_count)
        .map(|i| {
            let t = i as f64 / fps;
            intervals.iter().any(|&(a, b)| a <= t && t < b)
        })
        .collect()
}

/// Number of windows by scanning start indices in integer samples.
pub fn window_count_scan(total_samples: usize, window_samples: usize, hop_samples: usize) -> usize {
    let mut i = 0;
    while i * hop_samples + window_samples <= total_samples {
        i += 1;
    }
    i
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Mean weighted cross-entropy of a ReLU MLP evaluated with plain loops.
/// `params` holds each layer's row-major `out x in` weights followed by its
/// bias. Also returns the smallest |hidden pre-activation| seen, so callers
/// can avoid the ReLU kink.
pub fn mlp_loss(dims: &[usize], params: &[f64], xs: &[Vec<f64>], ys: &[usize], w: [f64; 2]) -> (f64, f64) {
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    for (x, &y) in xs.iter().zip(ys) {
        let mut a = x.clone();
        let mut off = 0;
        for l in 0..dims.len() - 1 {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            let bias = off + n_in * n_out;
            let mut z = vec![0.0; n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let mut s = params[bias + o];
                for (i, ai) in a.iter().enumerate() {
                    s += params[off + o * n_in + i] * ai;
                }
                *zo = s;
            }
            off = bias + n_out;
            if l + 2 < dims.len() {
                min_abs = z.iter().fold(min_abs, |m, v| m.min(v.abs()));
                a = z.iter().map(|v| v.max(0.0)).collect();
            } else {
                a = z;
            }
        }
        let m = a[0].max(a[1]);
        let lse = m + ((a[0] - m).exp() + (a[1] - m).exp()).ln();
        total += w[y] * (lse - a[y]);
    }
    (total / xs.len() as f64, min_abs)
}

/// Write a canonical 44-byte-header RIFF/WAVE file by hand.
pub fn wav_bytes(format_tag: u16, channels: u16, sample_rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
    let block_align = channels * bits / 8;
    let byte_rate = sample_rate * u32::from(block_align);
    let mut out = Vec::with_capacity(44 + data.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
    out
}

pub fn pcm16_bytes(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}
