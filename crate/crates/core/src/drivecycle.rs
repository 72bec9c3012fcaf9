//! Drive cycles: target vehicle speed against time.
//!
//! CSV layout is `t_s,v_kmph` with an optional `grade_rad` column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

/// Steepest speed change the generator will emit, m/s².
pub const SYNTH_MAX_ACCEL: f64 = 3.0;
/// Shortest cycle the generator accepts, s.
pub const SYNTH_MIN_DURATION: f64 = 60.0;

const KMPH_PER_MPS: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSample {
    pub t: f64,
    pub v_kmph: f64,
    pub grade_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    samples: Vec<CycleSample>,
    has_grade: bool,
}

impl DriveCycle {
    /// Builds a cycle, checking ordering, start time and speed sign.
    pub fn new(name: impl Into<String>, samples: Vec<CycleSample>, has_grade: bool) -> Result<Self> {
        if samples.len() < 2 {
            return Err(SimError::Format { line: 0, msg: "a cycle needs at least 2 samples".into() });
        }
        for (i, s) in samples.iter().enumerate() {
            // header is line 1, first sample line 2
            let line = i + 2;
            if !(s.t.is_finite() && s.v_kmph.is_finite() && s.grade_rad.is_finite()) {
                return Err(SimError::Format { line, msg: "non-finite value".into() });
            }
            if s.v_kmph < 0.0 {
                return Err(SimError::Format { line, msg: format!("negative speed {}", s.v_kmph) });
            }
            if i == 0 && s.t != 0.0 {
                return Err(SimError::Format { line, msg: format!("cycle must start at t = 0, got {}", s.t) });
            }
            if i > 0 && s.t <= samples[i - 1].t {
                let msg = if s.t == samples[i - 1].t {
                    format!("duplicate time {}", s.t)
                } else {
                    format!("time goes backwards ({} after {})", s.t, samples[i - 1].t)
                };
                return Err(SimError::Format { line, msg });
            }
        }
        Ok(Self { name: name.into(), samples, has_grade })
    }

    pub fn samples(&self) -> &[CycleSample] {
        &self.samples
    }

    pub fn has_grade(&self) -> bool {
        self.has_grade
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Largest |dv/dt| between samples, kmph/s.
    pub fn max_slope(&self) -> f64 {
        self.samples.windows(2).map(|w| ((w[1].v_kmph - w[0].v_kmph) / (w[1].t - w[0].t)).abs()).fold(0.0, f64::max)
    }

    /// Piecewise-linear target speed, clamped outside the cycle.
    pub fn sample_speed(&self, t: f64) -> f64 {
        self.interpolate(t, |s| s.v_kmph)
    }

    pub fn sample_grade(&self, t: f64) -> f64 {
        if self.has_grade {
            self.interpolate(t, |s| s.grade_rad)
        } else {
            0.0
        }
    }

    fn interpolate(&self, t: f64, field: impl Fn(&CycleSample) -> f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].t {
            return field(&s[0]);
        }
        let last = &s[s.len() - 1];
        if t >= last.t {
            return field(last);
        }
        // first index with sample time > t; t lies in [k-1, k)
        let k = s.partition_point(|x| x.t <= t);
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.t) / (b.t - a.t);
        field(a) + w * (field(b) - field(a))
    }

    /// CSV text that [`parse_cycle`] reads back to an identical cycle.
    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: &[String]| w.write_record(rec).expect("writing to memory");
        if self.has_grade {
            write(&mut w, &["t_s".into(), "v_kmph".into(), "grade_rad".into()]);
        } else {
            write(&mut w, &["t_s".into(), "v_kmph".into()]);
        }
        for s in &self.samples {
            if self.has_grade {
                write(&mut w, &[s.t.to_string(), s.v_kmph.to_string(), s.grade_rad.to_string()]);
            } else {
                write(&mut w, &[s.t.to_string(), s.v_kmph.to_string()]);
            }
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("ascii csv")
    }
}

/// Parses `t_s,v_kmph[,grade_rad]` CSV text.
pub fn parse_cycle(text: &str, name: &str) -> Result<DriveCycle> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| SimError::Format { line: 1, msg: e.to_string() })?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_grade = match cols.as_slice() {
        ["t_s", "v_kmph"] => false,
        ["t_s", "v_kmph", "grade_rad"] => true,
        _ => {
            return Err(SimError::Format {
                line: 1,
                msg: format!("expected header t_s,v_kmph[,grade_rad], got {}", cols.join(",")),
            })
        }
    };

    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SimError::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| SimError::Format { line, msg: format!("bad number {raw:?} in column {}", i + 1) })
        };
        let t = field(0)?;
        let v_kmph = field(1)?;
        let grade_rad = if has_grade { field(2)? } else { 0.0 };
        if v_kmph < 0.0 {
            return Err(SimError::Format { line, msg: format!("negative speed {v_kmph}") });
        }
        if let Some(prev) = samples.last().map(|s: &CycleSample| s.t) {
            if t == prev {
                return Err(SimError::Format { line, msg: format!("duplicate time {t}") });
            }
            if t < prev {
                return Err(SimError::Format { line, msg: format!("time goes backwards ({t} after {prev})") });
            }
        }
        samples.push(CycleSample { t, v_kmph, grade_rad });
    }
    if samples.is_empty() {
        return Err(SimError::Format { line: 2, msg: "cycle has no samples".into() });
    }
    DriveCycle::new(name, samples, has_grade)
}

/// Reads and parses a cycle file.
pub fn load_cycle(path: &std::path::Path) -> Result<DriveCycle> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cycle");
    parse_cycle(&text, name)
}

/// Seeded synthetic cycle sampled at 1 Hz. The first half ramps between
/// cruise plateaus; the second half wanders randomly around them. Every
/// cycle ends at standstill.
pub fn synth_cycle(duration: f64, seed: u64) -> Result<DriveCycle> {
    if !(duration > SYNTH_MIN_DURATION) || !duration.is_finite() {
        return Err(SimError::domain(format!(
            "synthetic cycle duration must be > {SYNTH_MIN_DURATION} s, got {duration}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = duration.floor() as usize;
    let half = duration / 2.0;
    let step_cap = 0.8 * SYNTH_MAX_ACCEL * KMPH_PER_MPS;
    let stop_decel = 1.5 * KMPH_PER_MPS;

    let mut v: f64 = 0.0;
    let mut base: f64 = 0.0;
    let mut target: f64 = rng.random_range(20.0..45.0);
    let mut ramp: f64 = rng.random_range(0.6..1.4) * KMPH_PER_MPS;
    let mut hold: i32 = 0;
    let mut wander: f64 = 0.0;
    let mut samples = Vec::with_capacity(n + 2);
    samples.push(CycleSample { t: 0.0, v_kmph: 0.0, grade_rad: 0.0 });

    for k in 1..=n {
        let t = k as f64;
        if base == target {
            if hold > 0 {
                hold -= 1;
            } else {
                target = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(15.0..55.0) };
                ramp = rng.random_range(0.6..1.8) * KMPH_PER_MPS;
                hold = rng.random_range(6..20);
            }
        }
        base = if base < target { (base + ramp).min(target) } else { (base - ramp).max(target) };

        if t > half {
            wander = 0.85 * wander + rng.random_range(-1.0..1.0) * 2.5;
            if rng.random_bool(0.03) {
                // sudden braking event
                wander -= rng.random_range(6.0..12.0);
            }
        }

        // leave room to stop by the end of the cycle
        let stop_cap = (duration - t).max(0.0) * stop_decel;
        let next = (base + wander).clamp(v - step_cap, v + step_cap).clamp(0.0, stop_cap.min(90.0));
        v = round_to(next, 1e-3).min(stop_cap);
        samples.push(CycleSample { t, v_kmph: v, grade_rad: 0.0 });
    }
    if samples.last().map(|s| s.t) != Some(duration) {
        samples.push(CycleSample { t: duration, v_kmph: 0.0, grade_rad: 0.0 });
    }
    DriveCycle::new(format!("synth-{seed}"), samples, false)
}

fn round_to(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}
