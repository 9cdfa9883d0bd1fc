//! Manifests, train/val/test splits, repeated evaluation and the metrics
//! CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::text::{content_lines, Tokens};
use crate::energy::Labeling;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub truth: PathBuf,
    pub scribbles: Option<PathBuf>,
}

/// Parses `image <path> truth <path> [scribbles <path>]` lines. Relative
/// paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let mut t = Tokens::new(line, content);
        let field = |t: &mut Tokens, name: &str| -> Result<PathBuf> {
            let key = t.word("field name")?;
            if key != name {
                return Err(Error::parse(line, format!("expected `{name}`, found `{key}`")));
            }
            Ok(resolve(t.word("path")?))
        };
        let image = field(&mut t, "image")?;
        let truth = field(&mut t, "truth")?;
        let scribbles = match t.next_word() {
            None => None,
            Some("scribbles") => Some(resolve(t.word("path")?)),
            Some(other) => return Err(Error::parse(line, format!("expected `scribbles`, found `{other}`"))),
        };
        t.finish()?;
        out.push(ManifestEntry { image, truth, scribbles });
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("manifest lists no instances".into()));
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Writes entries with paths relative to `base` where possible.
pub fn write_manifest(entries: &[ManifestEntry], base: &Path) -> String {
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let mut out = String::new();
    for e in entries {
        write!(out, "image {} truth {}", rel(&e.image), rel(&e.truth)).unwrap();
        if let Some(s) = &e.scribbles {
            write!(out, " scribbles {}", rel(s)).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Parses `[split] train=N val=N test=N seed=S [repeats=R]`; repeats
    /// defaults to 5.
    pub fn parse(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace().peekable();
        if words.peek() == Some(&"split") {
            words.next();
        }
        let (mut train, mut val, mut test, mut seed, mut repeats) = (None, None, None, None, Some(5u64));
        for w in words {
            let (key, value) = w
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("split field `{w}` is not key=value")))?;
            let v: u64 = value
                .parse()
                .map_err(|_| Error::InvalidInput(format!("split field `{key}` needs an integer, got `{value}`")))?;
            let slot = match key {
                "train" => &mut train,
                "val" => &mut val,
                "test" => &mut test,
                "seed" => &mut seed,
                "repeats" => &mut repeats,
                _ => return Err(Error::InvalidInput(format!("unknown split field `{key}`"))),
            };
            *slot = Some(v);
        }
        let need = |v: Option<u64>, name: &str| v.ok_or_else(|| Error::InvalidInput(format!("split lacks `{name}`")));
        let spec = SplitSpec {
            train: need(train, "train")? as usize,
            val: need(val, "val")? as usize,
            test: need(test, "test")? as usize,
            seed: need(seed, "seed")?,
            repeats: need(repeats, "repeats")? as usize,
        };
        if spec.train == 0 || spec.test == 0 || spec.repeats == 0 {
            return Err(Error::InvalidInput("split needs train ≥ 1, test ≥ 1 and repeats ≥ 1".into()));
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        format!(
            "split train={} val={} test={} seed={} repeats={}",
            self.train, self.val, self.test, self.seed, self.repeats
        )
    }

    /// One independent shuffle of `0..n` per repeat.
    pub fn draw(&self, n: usize) -> Result<Vec<Split>> {
        let total = self.train + self.val + self.test;
        if total > n {
            return Err(Error::InvalidInput(format!("split needs {total} instances, dataset has {n}")));
        }
        Ok((0..self.repeats)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(r as u64);
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                Split {
                    train: idx[..self.train].to_vec(),
                    val: idx[self.train..self.train + self.val].to_vec(),
                    test: idx[self.train + self.val..total].to_vec(),
                }
            })
            .collect())
    }
}

/// Something evaluated against a binary ground truth.
pub trait Labeled {
    fn truth(&self) -> &Labeling;
}

/// A learning method: fit on a training set (with a validation set for
/// model selection), then predict.
pub trait Algorithm<E> {
    type Fitted;

    fn name(&self) -> &str;
    fn fit(&self, train: &[&E], val: &[&E]) -> Result<Self::Fitted>;
    fn predict(&self, fitted: &Self::Fitted, x: &E) -> Result<Labeling>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub algorithm: String,
    /// Mean test pixel error of each repeat.
    pub repeat_errors: Vec<f64>,
    pub train_s: f64,
    pub test_s_per_image: f64,
}

impl MetricsRow {
    pub fn avg_error(&self) -> f64 {
        self.repeat_errors.iter().sum::<f64>() / self.repeat_errors.len() as f64
    }

    /// Sample standard deviation across repeats, 0 for a single repeat.
    pub fn std_error(&self) -> f64 {
        let n = self.repeat_errors.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.avg_error();
        (self.repeat_errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// Runs `algo` on every split. Timings are averaged over repeats.
pub fn evaluate_split<E, A>(algo: &A, data: &[E], spec: &SplitSpec) -> Result<MetricsRow>
where
    E: Labeled,
    A: Algorithm<E>,
{
    let pick = |idx: &[usize]| idx.iter().map(|&i| &data[i]).collect::<Vec<_>>();
    let mut repeat_errors = Vec::new();
    let (mut train_s, mut test_s, mut tested) = (0.0, 0.0, 0usize);
    for split in spec.draw(data.len())? {
        let t0 = Instant::now();
        let fitted = algo.fit(&pick(&split.train), &pick(&split.val))?;
        train_s += t0.elapsed().as_secs_f64();
        let mut sum = 0.0;
        for x in pick(&split.test) {
            let t0 = Instant::now();
            let y = algo.predict(&fitted, x)?;
            test_s += t0.elapsed().as_secs_f64();
            sum += crate::learn::hamming_loss(x.truth(), &y, true)?;
        }
        tested += split.test.len();
        repeat_errors.push(sum / split.test.len() as f64);
    }
    Ok(MetricsRow {
        algorithm: algo.name().to_string(),
        train_s: train_s / spec.repeats as f64,
        test_s_per_image: test_s / tested as f64,
        repeat_errors,
    })
}

pub const METRICS_HEADER: &str = "algorithm,avg_error,std_error,train_s,test_s_per_image";

/// Metrics CSV. Errors are fractions with 6 decimals. Timing columns read
/// `NA` unless `timings` is set, so that reruns produce identical bytes.
pub fn metrics_csv(rows: &[MetricsRow], timings: bool) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let (tr, te) = if timings {
            (format!("{:.3}", r.train_s), format!("{:.4}", r.test_s_per_image))
        } else {
            ("NA".into(), "NA".into())
        };
        writeln!(out, "{},{:.6},{:.6},{tr},{te}", r.algorithm, r.avg_error(), r.std_error()).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Item(Labeling);

    impl Labeled for Item {
        fn truth(&self) -> &Labeling {
            &self.0
        }
    }

    struct Oracle;

    impl Algorithm<Item> for Oracle {
        type Fitted = ();
        fn name(&self) -> &str {
            "oracle"
        }
        fn fit(&self, _: &[&Item], _: &[&Item]) -> Result<()> {
            Ok(())
        }
        fn predict(&self, _: &(), x: &Item) -> Result<Labeling> {
            Ok(x.0.clone())
        }
    }

    struct Background;

    impl Algorithm<Item> for Background {
        type Fitted = ();
        fn name(&self) -> &str {
            "background"
        }
        fn fit(&self, _: &[&Item], _: &[&Item]) -> Result<()> {
            Ok(())
        }
        fn predict(&self, _: &(), x: &Item) -> Result<Labeling> {
            Ok(Labeling::from_bits(vec![false; x.0.len()]))
        }
    }

    fn half_and_half(n: usize) -> Vec<Item> {
        (0..n)
            .map(|i| Item(Labeling::from_bits((0..20).map(|p| (p + i) % 2 == 0).collect())))
            .collect()
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let spec = SplitSpec::parse("split train=3 val=2 test=4 seed=1").unwrap();
        let row = evaluate_split(&Oracle, &half_and_half(10), &spec).unwrap();
        assert_eq!(row.repeat_errors, vec![0.0; 5]);
        assert_eq!(row.std_error(), 0.0);
    }

    #[test]
    fn background_predictor_scores_half() {
        let spec = SplitSpec::parse("train=2 val=0 test=5 seed=3 repeats=2").unwrap();
        let row = evaluate_split(&Background, &half_and_half(8), &spec).unwrap();
        assert!((row.avg_error() - 0.5).abs() < 1e-12);
        let csv = metrics_csv(&[row], false);
        assert_eq!(csv, format!("{METRICS_HEADER}\nbackground,0.500000,0.000000,NA,NA\n"));
    }

    #[test]
    fn splits_are_disjoint_and_seeded() {
        let spec = SplitSpec::parse("split train=4 val=3 test=3 seed=9").unwrap();
        let a = spec.draw(12).unwrap();
        assert_eq!(a, spec.draw(12).unwrap());
        assert_ne!(a[0], a[1]);
        for s in &a {
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 10);
        }
        assert!(spec.draw(9).is_err());
        assert_eq!(SplitSpec::parse(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn bad_split_specs() {
        for s in ["train=1 test=1 seed=1", "train=1 val=0 test=1 seed=x", "train=0 val=0 test=1 seed=1", "a=1"] {
            assert!(SplitSpec::parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let base = Path::new("/data");
        let text = "# comment\nimage a.png truth a_gt.png\nimage /x/b.png truth b_gt.png scribbles b_s.png\n";
        let m = parse_manifest(text, base).unwrap();
        assert_eq!(m[0].image, Path::new("/data/a.png"));
        assert_eq!(m[1].image, Path::new("/x/b.png"));
        assert_eq!(m[1].scribbles.as_deref(), Some(Path::new("/data/b_s.png")));
        assert_eq!(parse_manifest(&write_manifest(&m, base), base).unwrap(), m);
        assert!(parse_manifest("image a.png\n", base).is_err());
        assert!(parse_manifest("image a truth b extra c\n", base).is_err());
        assert!(parse_manifest("# nothing\n", base).is_err());
    }
}
