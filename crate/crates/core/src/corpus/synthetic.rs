//! Seeded generator for PAN-shaped corpora with controllable label signal.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AuthorRecord, Corpus, Lang};
use crate::error::{Error, Result};

/// Probability distribution over tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    pub tokens: Vec<(String, f64)>,
}

impl TokenDistribution {
    pub fn uniform<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let p = 1.0 / tokens.len().max(1) as f64;
        TokenDistribution {
            tokens: tokens.into_iter().map(|t| (t, p)).collect(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::validation(format!("{what}: empty token distribution")));
        }
        if let Some((t, _)) = self
            .tokens
            .iter()
            .find(|(t, _)| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::validation(format!(
                "{what}: token {t:?} is empty or contains whitespace"
            )));
        }
        if self.tokens.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation(format!("{what}: negative or non-finite probability")));
        }
        let total: f64 = self.tokens.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "{what}: probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.tokens.iter().map(|(_, p)| *p)).expect("validated distribution")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub label: String,
    pub tokens: TokenDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub lang: Lang,
    pub n_authors: usize,
    pub docs_per_author: usize,
    pub tokens_per_doc: usize,
    pub varieties: Vec<LabelDistribution>,
    pub genders: Vec<LabelDistribution>,
    /// Shared tokens drawn when neither label distribution is chosen.
    pub background: TokenDistribution,
    /// Probability that a token comes from the author's variety distribution.
    pub variety_share: f64,
    /// Probability that a token comes from the author's gender distribution.
    pub gender_share: f64,
    pub seed: u64,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ra", "tu", "sa", "po", "vi", "de", "bu", "ga", "fe", "zo", "ri", "ta", "ch", "ll", "qu",
    "ão", "ñe", "gh", "th", "ou",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=4);
    (0..n)
        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
        .collect()
}

fn fresh_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut std::collections::BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Mixes `shared` and `own` words, giving `own_mass` of the probability to `own`.
fn mixture(shared: &[String], own: Vec<String>, own_mass: f64) -> TokenDistribution {
    let mut tokens: Vec<(String, f64)> = shared
        .iter()
        .map(|w| (w.clone(), (1.0 - own_mass) / shared.len() as f64))
        .collect();
    let n_own = own.len() as f64;
    tokens.extend(own.into_iter().map(|w| (w, own_mass / n_own)));
    // exact unit sum keeps validation independent of rounding
    let total: f64 = tokens.iter().map(|(_, p)| p).sum();
    tokens.iter_mut().for_each(|(_, p)| *p /= total);
    TokenDistribution { tokens }
}

impl SyntheticSpec {
    /// A corpus with `n_varieties` of the language's PAN varieties and two
    /// genders. Every label has its own vocabulary plus a pool shared with
    /// the other labels of the same task, so the distributions overlap
    /// partially.
    pub fn standard(lang: Lang, n_authors: usize, n_varieties: usize, seed: u64) -> Result<Self> {
        let names = lang.pan_varieties();
        if n_varieties < 2 || n_varieties > names.len() {
            return Err(Error::validation(format!(
                "{lang} has {} varieties; cannot generate {n_varieties}",
                names.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_70c5);
        let mut taken = std::collections::BTreeSet::new();
        let background = TokenDistribution::uniform(fresh_words(&mut rng, 120, &mut taken));
        let variety_shared = fresh_words(&mut rng, 30, &mut taken);
        let varieties = names[..n_varieties]
            .iter()
            .map(|name| LabelDistribution {
                label: (*name).to_owned(),
                tokens: mixture(&variety_shared, fresh_words(&mut rng, 30, &mut taken), 0.6),
            })
            .collect();
        let gender_shared = fresh_words(&mut rng, 30, &mut taken);
        let genders = ["female", "male"]
            .iter()
            .map(|name| LabelDistribution {
                label: (*name).to_owned(),
                tokens: mixture(&gender_shared, fresh_words(&mut rng, 30, &mut taken), 0.6),
            })
            .collect();
        Ok(SyntheticSpec {
            lang,
            n_authors,
            docs_per_author: 10,
            tokens_per_doc: 15,
            varieties,
            genders,
            background,
            variety_share: 0.3,
            gender_share: 0.25,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_authors == 0 || self.docs_per_author == 0 || self.tokens_per_doc == 0 {
            return Err(Error::validation("author, document and token counts must be positive"));
        }
        if self.varieties.len() < 2 {
            return Err(Error::validation("at least two varieties are required"));
        }
        if self.genders.len() != 2 {
            return Err(Error::validation("exactly two genders are required"));
        }
        for (what, defs) in [("variety", &self.varieties), ("gender", &self.genders)] {
            let mut labels: Vec<String> = defs.iter().map(|d| d.label.trim().to_lowercase()).collect();
            labels.sort();
            labels.dedup();
            if labels.len() != defs.len() || labels.iter().any(String::is_empty) {
                return Err(Error::validation(format!(
                    "{what} labels must be distinct and non-empty"
                )));
            }
            for d in defs {
                d.tokens.validate(&format!("{what} {:?}", d.label))?;
            }
        }
        let shares = [self.variety_share, self.gender_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || self.variety_share + self.gender_share > 1.0 + 1e-12 {
            return Err(Error::validation(
                "token shares must lie in [0, 1] and sum to at most 1",
            ));
        }
        if self.variety_share + self.gender_share < 1.0 {
            self.background.validate("background")?;
        }
        Ok(())
    }
}

/// Samples a labeled corpus. Labels are dealt in sorted order: author `i`
/// gets gender `i mod 2` and variety `(i / 2) mod n_varieties`, so an odd
/// author count gives the first gender one extra author.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut varieties: Vec<&LabelDistribution> = spec.varieties.iter().collect();
    varieties.sort_by(|a, b| a.label.cmp(&b.label));
    let mut genders: Vec<&LabelDistribution> = spec.genders.iter().collect();
    genders.sort_by(|a, b| a.label.cmp(&b.label));

    let variety_samplers: Vec<_> = varieties.iter().map(|d| d.tokens.sampler()).collect();
    let gender_samplers: Vec<_> = genders.iter().map(|d| d.tokens.sampler()).collect();
    let background_sampler = (spec.variety_share + spec.gender_share < 1.0).then(|| spec.background.sampler());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.n_authors.to_string().len().max(4);
    let mut authors = Vec::with_capacity(spec.n_authors);
    for i in 0..spec.n_authors {
        let g = i % genders.len();
        let v = (i / genders.len()) % varieties.len();
        let mut documents = Vec::with_capacity(spec.docs_per_author);
        for _ in 0..spec.docs_per_author {
            let mut words = Vec::with_capacity(spec.tokens_per_doc);
            for _ in 0..spec.tokens_per_doc {
                let u: f64 = rng.random();
                let word = if u < spec.variety_share {
                    &varieties[v].tokens.tokens[variety_samplers[v].sample(&mut rng)].0
                } else if u < spec.variety_share + spec.gender_share {
                    &genders[g].tokens.tokens[gender_samplers[g].sample(&mut rng)].0
                } else {
                    let s = background_sampler.as_ref().expect("background present");
                    &spec.background.tokens[s.sample(&mut rng)].0
                };
                words.push(word.as_str());
            }
            documents.push(words.join(" "));
        }
        authors.push(
            AuthorRecord::new(format!("synth-{i:0width$}"), spec.lang, documents)
                .with_labels(genders[g].label.clone(), varieties[v].label.clone()),
        );
    }
    Corpus::new(spec.lang, authors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n_authors: usize) -> SyntheticSpec {
        SyntheticSpec {
            lang: Lang::Pt,
            n_authors,
            docs_per_author: 2,
            tokens_per_doc: 5,
            varieties: vec![
                LabelDistribution {
                    label: "brazil".into(),
                    tokens: TokenDistribution::uniform(["voce", "legal"]),
                },
                LabelDistribution {
                    label: "portugal".into(),
                    tokens: TokenDistribution::uniform(["tu", "fixe"]),
                },
            ],
            genders: vec![
                LabelDistribution {
                    label: "male".into(),
                    tokens: TokenDistribution::uniform(["cara"]),
                },
                LabelDistribution {
                    label: "female".into(),
                    tokens: TokenDistribution::uniform(["amiga"]),
                },
            ],
            background: TokenDistribution::uniform(["de", "que", "o"]),
            variety_share: 0.4,
            gender_share: 0.2,
            seed: 7,
        }
    }

    #[test]
    fn odd_count_gives_first_gender_the_extra_author() {
        let c = generate_synthetic_corpus(&tiny(3)).unwrap();
        let female = c
            .authors
            .iter()
            .filter(|a| a.gender.as_deref() == Some("female"))
            .count();
        assert_eq!((female, c.len() - female), (2, 1));
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            generate_synthetic_corpus(&tiny(10)).unwrap(),
            generate_synthetic_corpus(&tiny(10)).unwrap()
        );
        let mut other = tiny(10);
        other.seed = 8;
        assert_ne!(
            generate_synthetic_corpus(&other).unwrap(),
            generate_synthetic_corpus(&tiny(10)).unwrap()
        );
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = tiny(4);
        s.genders[0].tokens.tokens.clear();
        assert!(generate_synthetic_corpus(&s)
            .unwrap_err()
            .to_string()
            .contains("empty token distribution"));

        let mut s = tiny(4);
        s.varieties.truncate(1);
        assert!(generate_synthetic_corpus(&s).is_err());

        let mut s = tiny(4);
        s.genders.push(s.genders[0].clone());
        assert!(generate_synthetic_corpus(&s).is_err());

        let mut s = tiny(4);
        s.background.tokens[0].1 = 0.9;
        assert!(generate_synthetic_corpus(&s).is_err());
    }

    #[test]
    fn standard_spec_is_valid_and_balanced() {
        let spec = SyntheticSpec::standard(Lang::Es, 70, 7, 1).unwrap();
        let c = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(c.variety_labels.len(), 7);
        for v in &c.variety_labels {
            let n = c.authors.iter().filter(|a| a.variety.as_ref() == Some(v)).count();
            assert_eq!(n, 10);
        }
        assert!(c.non_pan_varieties().is_empty());
        assert!(SyntheticSpec::standard(Lang::Pt, 10, 3, 1).is_err());
    }
}
