//! Leaf evaluators. Every evaluator returns a reward in `[0, 1]` from Max's
//! point of view and takes its randomness from the caller.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tree_model::{subtree_density, GameParams, Player, Value};

pub const DEFAULT_SIGMA: f64 = 0.3;

const BUNDLED: &[(&str, &str)] = &[
    ("chess_p10_light", include_str!("../data/chess_p10_light.hist")),
    ("chess_p10_heavy", include_str!("../data/chess_p10_heavy.hist")),
];

/// Names of the histogram files compiled into the library.
pub fn bundled_histograms() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

/// Per-class evaluation densities over `bins` uniform bins of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramPdf {
    plus: Vec<f64>,
    minus: Vec<f64>,
    plus_cdf: Vec<f64>,
    minus_cdf: Vec<f64>,
}

impl HistogramPdf {
    /// Normalizes raw class weights.
    pub fn from_weights(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::Histogram(format!(
                "class lengths differ: {} vs {}",
                plus.len(),
                minus.len()
            )));
        }
        if plus.len() < 2 {
            return Err(Error::Histogram("at least two bins are required".into()));
        }
        let plus = normalize(plus, "plus")?;
        let minus = normalize(minus, "minus")?;
        Ok(HistogramPdf {
            plus_cdf: cumulative(&plus),
            minus_cdf: cumulative(&minus),
            plus,
            minus,
        })
    }

    pub fn bins(&self) -> usize {
        self.plus.len()
    }

    pub fn weights(&self, class: Value) -> &[f64] {
        match class {
            Value::Plus => &self.plus,
            Value::Minus => &self.minus,
        }
    }

    /// Mean of the class density, taking each bin at its midpoint.
    pub fn mean(&self, class: Value) -> f64 {
        let width = 1.0 / self.bins() as f64;
        self.weights(class)
            .iter()
            .enumerate()
            .map(|(i, w)| w * (i as f64 + 0.5) * width)
            .sum()
    }

    /// Inverse-CDF draw: pick a bin by weight, then a uniform point inside it.
    pub fn sample<R: Rng + ?Sized>(&self, class: Value, rng: &mut R) -> f64 {
        let cdf = match class {
            Value::Plus => &self.plus_cdf,
            Value::Minus => &self.minus_cdf,
        };
        let u: f64 = rng.random();
        let bin = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let within: f64 = rng.random();
        ((bin as f64 + within) / cdf.len() as f64).min(1.0)
    }

    pub fn bundled(name: &str) -> Option<HistogramPdf> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| text.parse().expect("bundled histogram is well-formed"))
    }

    /// Serializes in the same plain-text format `load_histogram` reads.
    pub fn to_file_string(&self) -> String {
        let join = |w: &[f64]| w.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        format!(
            "bins={}\nplus={}\nminus={}\n",
            self.bins(),
            join(&self.plus),
            join(&self.minus)
        )
    }
}

fn normalize(weights: Vec<f64>, class: &str) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Histogram(format!("{class} weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Histogram(format!("{class} class has zero total weight")));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Pin the last non-empty bin to exactly 1 so rounding never leaves a gap.
    if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
        for c in &mut cdf[last..] {
            *c = 1.0;
        }
    }
    cdf
}

impl FromStr for HistogramPdf {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut bins: Option<usize> = None;
        let mut plus: Option<Vec<f64>> = None;
        let mut minus: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once('=')
                .ok_or_else(|| Error::Histogram(format!("line {}: expected key=value", lineno + 1)))?;
            let parse_reals = |rest: &str| -> Result<Vec<f64>> {
                rest.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::Histogram(format!("line {}: bad number `{t}`", lineno + 1)))
                    })
                    .collect()
            };
            let slot_taken = |taken: bool| -> Result<()> {
                if taken {
                    Err(Error::Histogram(format!("line {}: duplicate key `{}`", lineno + 1, key.trim())))
                } else {
                    Ok(())
                }
            };
            match key.trim() {
                "bins" => {
                    slot_taken(bins.is_some())?;
                    bins = Some(
                        rest.trim()
                            .parse()
                            .map_err(|_| Error::Histogram(format!("line {}: bad bin count", lineno + 1)))?,
                    );
                }
                "plus" => {
                    slot_taken(plus.is_some())?;
                    plus = Some(parse_reals(rest)?);
                }
                "minus" => {
                    slot_taken(minus.is_some())?;
                    minus = Some(parse_reals(rest)?);
                }
                other => return Err(Error::Histogram(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        let bins = bins.ok_or_else(|| Error::Histogram("missing `bins`".into()))?;
        let plus = plus.ok_or_else(|| Error::Histogram("missing `plus`".into()))?;
        let minus = minus.ok_or_else(|| Error::Histogram("missing `minus`".into()))?;
        if plus.len() != bins || minus.len() != bins {
            return Err(Error::Histogram(format!(
                "expected {bins} weights per class, got {} and {}",
                plus.len(),
                minus.len()
            )));
        }
        HistogramPdf::from_weights(plus, minus)
    }
}

pub fn load_histogram(path: &Path) -> Result<HistogramPdf> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse()
}

/// Node context handed to an evaluator.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub value: Value,
    pub player: Player,
    pub depth: u32,
    pub params: &'a GameParams,
}

#[derive(Clone, Debug)]
pub enum Heuristic {
    /// 1 for `+1` nodes, 0 for `-1` nodes.
    Perfect,
    /// Perfect value plus `Normal(0, sigma)` noise, clamped to `[0, 1]`.
    Gaussian { sigma: f64 },
    /// Draw from the class density of the node's true value.
    Histogram { name: String, pdf: Arc<HistogramPdf> },
    /// One analytic random playout to the end of the game: 1 with the
    /// probability that a uniformly random leaf is `+1`.
    PlayoutL1,
    /// Expected outcome of infinitely many random playouts.
    PlayoutLInf,
}

impl Heuristic {
    pub fn gaussian(sigma: f64) -> Result<Heuristic> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::HeuristicSpec(format!("gaussian:{sigma}")));
        }
        Ok(Heuristic::Gaussian { sigma })
    }

    pub fn histogram(name: impl Into<String>, pdf: HistogramPdf) -> Heuristic {
        Heuristic::Histogram {
            name: name.into(),
            pdf: Arc::new(pdf),
        }
    }

    pub fn bundled(name: &str) -> Option<Heuristic> {
        HistogramPdf::bundled(name).map(|pdf| Heuristic::histogram(name, pdf))
    }

    pub fn evaluate<R: Rng + ?Sized>(&self, ctx: &EvalContext<'_>, rng: &mut R) -> f64 {
        match self {
            Heuristic::Perfect => ctx.value.reward(),
            Heuristic::Gaussian { sigma } => {
                let noise = if *sigma > 0.0 {
                    Normal::new(0.0, *sigma).expect("sigma validated").sample(rng)
                } else {
                    0.0
                };
                (ctx.value.reward() + noise).clamp(0.0, 1.0)
            }
            Heuristic::Histogram { pdf, .. } => pdf.sample(ctx.value, rng),
            Heuristic::PlayoutLInf => playout_density(ctx),
            Heuristic::PlayoutL1 => {
                if rng.random::<f64>() < playout_density(ctx) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Short stable name used in tables and manifests.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn playout_density(ctx: &EvalContext<'_>) -> f64 {
    let remaining = ctx.params.max_depth().saturating_sub(ctx.depth);
    subtree_density(ctx.params.density_ratio(), ctx.value, ctx.player, remaining)
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Heuristic::Perfect => f.write_str("perfect"),
            Heuristic::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Heuristic::Histogram { name, .. } => write!(f, "hist:{name}"),
            Heuristic::PlayoutL1 => f.write_str("l1"),
            Heuristic::PlayoutLInf => f.write_str("linf"),
        }
    }
}

/// Accepted forms: `perfect`, `gaussian`, `gaussian:<sigma>`,
/// `hist:<bundled name or file path>`, `l1`, `linf`.
impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, arg) = match spec.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (spec, None),
        };
        match (kind, arg) {
            ("perfect", None) => Ok(Heuristic::Perfect),
            ("l1", None) => Ok(Heuristic::PlayoutL1),
            ("linf", None) => Ok(Heuristic::PlayoutLInf),
            ("gaussian", None) => Ok(Heuristic::Gaussian { sigma: DEFAULT_SIGMA }),
            ("gaussian", Some(s)) => {
                let sigma = s.parse().map_err(|_| Error::HeuristicSpec(spec.to_string()))?;
                Heuristic::gaussian(sigma)
            }
            ("hist", Some(source)) => {
                if let Some(h) = Heuristic::bundled(source) {
                    return Ok(h);
                }
                let path = Path::new(source);
                let pdf = load_histogram(path)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| source.to_string());
                Ok(Heuristic::histogram(name, pdf))
            }
            _ => Err(Error::HeuristicSpec(spec.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn ctx(params: &GameParams, value: Value, player: Player, depth: u32) -> EvalContext<'_> {
        EvalContext {
            value,
            player,
            depth,
            params,
        }
    }

    #[test]
    fn perfect_maps_values() {
        let p = GameParams::new(2, 1.0, 10, 0).unwrap();
        let mut rng = stream_rng(1);
        assert_eq!(Heuristic::Perfect.evaluate(&ctx(&p, Value::Plus, Player::Max, 3), &mut rng), 1.0);
        assert_eq!(Heuristic::Perfect.evaluate(&ctx(&p, Value::Minus, Player::Max, 3), &mut rng), 0.0);
    }

    #[test]
    fn linf_examples() {
        let p = GameParams::new(2, 1.0, 10, 0).unwrap();
        let mut rng = stream_rng(1);
        let h = Heuristic::PlayoutLInf;
        assert_eq!(h.evaluate(&ctx(&p, Value::Minus, Player::Min, 10), &mut rng), 0.0);
        assert_eq!(h.evaluate(&ctx(&p, Value::Plus, Player::Max, 8), &mut rng), 0.75);
    }

    #[test]
    fn two_bin_histogram() {
        let pdf: HistogramPdf = "bins=2\nplus=0.5 0.5\nminus=1.0 0.0\n".parse().unwrap();
        let mut rng = stream_rng(2);
        let mut upper = 0;
        for _ in 0..10_000 {
            let x = pdf.sample(Value::Minus, &mut rng);
            assert!((0.0..0.5).contains(&x));
            let y = pdf.sample(Value::Plus, &mut rng);
            assert!((0.0..=1.0).contains(&y));
            if y >= 0.5 {
                upper += 1;
            }
        }
        assert!((4700..5300).contains(&upper), "{upper}");
    }

    #[test]
    fn single_bin_mass() {
        let mut plus = vec![0.0; 64];
        plus[0] = 3.0;
        let pdf = HistogramPdf::from_weights(plus.clone(), plus).unwrap();
        let mut rng = stream_rng(3);
        for _ in 0..10_000 {
            assert!(pdf.sample(Value::Plus, &mut rng) < 1.0 / 64.0);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        for bad in [
            "bins=2\nplus=0.5 0.5\n",
            "bins=2\nplus=0.5 -0.5\nminus=1 0\n",
            "bins=2\nplus=0 0\nminus=1 0\n",
            "bins=3\nplus=1 1\nminus=1 1\n",
            "bins=1\nplus=1\nminus=1\n",
            "bins=2\nplus=1 x\nminus=1 1\n",
            "bins=2\nplus=1 1\nminus=1 1\nextra=3\n",
            "bins=2\nplus=1 1\nplus=1 1\nminus=1 1\n",
        ] {
            assert!(bad.parse::<HistogramPdf>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn comments_and_normalization() {
        let pdf: HistogramPdf = "# header\nbins=2 # two\nplus=2 6\nminus=1 1\n".parse().unwrap();
        assert_eq!(pdf.weights(Value::Plus), &[0.25, 0.75]);
        let again: HistogramPdf = pdf.to_file_string().parse().unwrap();
        assert_eq!(again, pdf);
    }

    #[test]
    fn bundled_light_histogram_separates_classes() {
        let pdf = HistogramPdf::bundled("chess_p10_light").unwrap();
        assert!(pdf.mean(Value::Plus) > pdf.mean(Value::Minus));
        for name in bundled_histograms() {
            assert!(Heuristic::bundled(name).is_some());
        }
    }

    #[test]
    fn spec_parsing() {
        assert!(matches!("perfect".parse::<Heuristic>().unwrap(), Heuristic::Perfect));
        assert!(matches!(
            "gaussian".parse::<Heuristic>().unwrap(),
            Heuristic::Gaussian { sigma } if sigma == DEFAULT_SIGMA
        ));
        assert_eq!("gaussian:0.1".parse::<Heuristic>().unwrap().label(), "gaussian:0.1");
        assert_eq!("hist:chess_p10_light".parse::<Heuristic>().unwrap().label(), "hist:chess_p10_light");
        assert!("gaussian:-1".parse::<Heuristic>().is_err());
        assert!("bogus".parse::<Heuristic>().is_err());
        assert!("hist:/nonexistent/file.hist".parse::<Heuristic>().is_err());
    }
}
