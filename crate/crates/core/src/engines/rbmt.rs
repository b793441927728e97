//! Shallow-transfer rule-based translation in five stages:
//! analysis, tagging, lexical transfer, generation and post-generation.
//!
//! Transfer is lexical only (no reordering). Unknown words pass through every
//! stage and come out as `*surface`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use super::{CostModel, Engine, EngineError, EngineKind, Translation};
use crate::corpus::Sentence;

const TOY_MORPH: &str = include_str!("../../resources/toy/morph.tsv");
const TOY_TAGS: &str = include_str!("../../resources/toy/tags.tsv");
const TOY_BILINGUAL: &str = include_str!("../../resources/toy/bilingual.tsv");
const TOY_GEN: &str = include_str!("../../resources/toy/gen.tsv");
const TOY_POSTGEN: &str = include_str!("../../resources/toy/postgen.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LexicalUnit {
    pub surface: String,
    pub lemma: String,
    pub tags: Vec<String>,
    pub unknown: bool,
}

impl LexicalUnit {
    pub fn known(surface: &str, lemma: &str, tags: &[&str]) -> Self {
        LexicalUnit {
            surface: surface.into(),
            lemma: lemma.into(),
            tags: tags.iter().map(|t| (*t).to_owned()).collect(),
            unknown: false,
        }
    }

    pub fn unknown(surface: &str) -> Self {
        LexicalUnit {
            surface: surface.into(),
            lemma: String::new(),
            tags: Vec::new(),
            unknown: true,
        }
    }

    fn key(&self) -> (String, Vec<String>) {
        (self.lemma.clone(), self.tags.clone())
    }
}

/// Surface form to every (lemma, tags) analysis, in file order.
pub type MorphDict = HashMap<String, Vec<(String, Vec<String>)>>;
/// Unigram tag probabilities.
pub type TagModel = HashMap<String, f64>;
pub type BilingualDict = HashMap<(String, Vec<String>), (String, Vec<String>)>;
pub type GenDict = HashMap<(String, Vec<String>), String>;

/// Rewrites the adjacent pair `left right` into `replacement` words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostgenRule {
    pub left: String,
    pub right: String,
    pub replacement: Vec<String>,
}

impl PostgenRule {
    pub fn new(left: &str, right: &str, replacement: &str) -> Self {
        PostgenRule {
            left: left.into(),
            right: right.into(),
            replacement: replacement.split_whitespace().map(str::to_owned).collect(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RbmtResources {
    pub morph_dict: MorphDict,
    pub tag_model: TagModel,
    pub bilingual_dict: BilingualDict,
    pub gen_dict: GenDict,
    pub postgen_rules: Vec<PostgenRule>,
}

fn rows(name: &str, text: &str, width: usize) -> Result<Vec<Vec<String>>, EngineError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .comment(Some(b'#'))
        .quoting(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EngineError::Resource(format!("{name}: {e}")))?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(EngineError::Resource(format!(
                "{name}: record {} has {} fields, expected {width}",
                line + 1,
                record.len()
            )));
        }
        out.push(record.iter().map(|f| f.trim().to_owned()).collect());
    }
    Ok(out)
}

fn split_tags(field: &str) -> Vec<String> {
    field
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn tag_string(tags: &[String]) -> String {
    tags.join(",")
}

impl RbmtResources {
    /// Parses the five TSV tables and validates them.
    pub fn from_tsv(
        morph: &str,
        tags: &str,
        bilingual: &str,
        gen: &str,
        postgen: &str,
    ) -> Result<Self, EngineError> {
        let mut res = RbmtResources::default();
        for row in rows("morph_dict", morph, 3)? {
            let tags = split_tags(&row[2]);
            if tags.is_empty() {
                return Err(EngineError::Resource(format!(
                    "morph_dict: '{}' has no tags",
                    row[0]
                )));
            }
            res.morph_dict
                .entry(row[0].clone())
                .or_default()
                .push((row[1].clone(), tags));
        }
        for row in rows("tag_model", tags, 2)? {
            let p: f64 = row[1].parse().map_err(|_| {
                EngineError::Resource(format!("tag_model: bad probability '{}'", row[1]))
            })?;
            res.tag_model.insert(row[0].clone(), p);
        }
        for row in rows("bilingual_dict", bilingual, 4)? {
            res.bilingual_dict.insert(
                (row[0].clone(), split_tags(&row[1])),
                (row[2].clone(), split_tags(&row[3])),
            );
        }
        for row in rows("gen_dict", gen, 3)? {
            res.gen_dict
                .insert((row[0].clone(), split_tags(&row[1])), row[2].clone());
        }
        for row in rows("postgen_rules", postgen, 3)? {
            res.postgen_rules
                .push(PostgenRule::new(&row[0], &row[1], &row[2]));
        }
        res.validate()?;
        Ok(res)
    }

    /// The bundled Spanish to English sample dictionaries.
    pub fn builtin() -> Result<Self, EngineError> {
        RbmtResources::from_tsv(TOY_MORPH, TOY_TAGS, TOY_BILINGUAL, TOY_GEN, TOY_POSTGEN)
    }

    /// Reads `morph.tsv`, `tags.tsv`, `bilingual.tsv`, `gen.tsv` and
    /// `postgen.tsv` (optional) from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, EngineError> {
        let read = |name: &str, required: bool| -> Result<String, EngineError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(text),
                Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => {
                    Ok(String::new())
                }
                Err(e) => Err(EngineError::Resource(format!("{}: {e}", path.display()))),
            }
        };
        RbmtResources::from_tsv(
            &read("morph.tsv", true)?,
            &read("tags.tsv", true)?,
            &read("bilingual.tsv", true)?,
            &read("gen.tsv", true)?,
            &read("postgen.tsv", false)?,
        )
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        for (tag, p) in &self.tag_model {
            if !p.is_finite() || *p <= 0.0 {
                return Err(EngineError::Resource(format!(
                    "tag_model: probability for '{tag}' must be positive, got {p}"
                )));
            }
        }
        for (surface, analyses) in &self.morph_dict {
            if analyses.len() < 2 {
                continue;
            }
            for (_, tags) in analyses {
                if !self.tag_model.contains_key(&tags[0]) {
                    return Err(EngineError::Resource(format!(
                        "tag_model: ambiguous '{surface}' needs a probability for '{}'",
                        tags[0]
                    )));
                }
            }
        }
        for ((src, src_tags), (lemma, tags)) in &self.bilingual_dict {
            if !self.gen_dict.contains_key(&(lemma.clone(), tags.clone())) {
                return Err(EngineError::Resource(format!(
                    "gen_dict: no surface for {lemma}<{}> (from {src}<{}>)",
                    tag_string(tags),
                    tag_string(src_tags)
                )));
            }
        }
        Ok(())
    }

    /// Runs the whole pipeline over one sentence's text.
    pub fn translate_text(&self, text: &str) -> Result<String, EngineError> {
        let analyses: Vec<Vec<LexicalUnit>> = text
            .split_whitespace()
            .map(|w| rbmt_analyze(w, &self.morph_dict))
            .collect();
        let tagged = rbmt_tag(&analyses, &self.tag_model)?;
        let words = tagged
            .iter()
            .map(|u| {
                rbmt_transfer(u, &self.bilingual_dict)
                    .and_then(|t| rbmt_generate(&t, &self.gen_dict))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rbmt_postgenerate(words, &self.postgen_rules).join(" "))
    }
}

/// All dictionary analyses of `word`, or one unknown unit.
pub fn rbmt_analyze(word: &str, morph_dict: &MorphDict) -> Vec<LexicalUnit> {
    match morph_dict.get(word) {
        Some(analyses) if !analyses.is_empty() => analyses
            .iter()
            .map(|(lemma, tags)| LexicalUnit {
                surface: word.to_owned(),
                lemma: lemma.clone(),
                tags: tags.clone(),
                unknown: false,
            })
            .collect(),
        _ => vec![LexicalUnit::unknown(word)],
    }
}

/// Picks one analysis per word: the one whose first tag is most probable.
/// Ties go to the analysis listed first.
pub fn rbmt_tag(
    analyses: &[Vec<LexicalUnit>],
    tag_model: &TagModel,
) -> Result<Vec<LexicalUnit>, EngineError> {
    analyses
        .iter()
        .map(|candidates| {
            let (first, rest) = candidates
                .split_first()
                .ok_or_else(|| EngineError::InvalidInput("word with no analyses".into()))?;
            if rest.is_empty() {
                return Ok(first.clone());
            }
            let prob = |u: &LexicalUnit| -> Result<f64, EngineError> {
                let tag = u.tags.first().map(String::as_str).unwrap_or("");
                tag_model
                    .get(tag)
                    .copied()
                    .ok_or_else(|| EngineError::ModelCoverage {
                        tag: tag.to_owned(),
                    })
            };
            let mut best = first;
            let mut best_p = prob(first)?;
            for u in rest {
                let p = prob(u)?;
                if p > best_p {
                    best = u;
                    best_p = p;
                }
            }
            Ok(best.clone())
        })
        .collect()
}

pub fn rbmt_transfer(
    unit: &LexicalUnit,
    bilingual_dict: &BilingualDict,
) -> Result<LexicalUnit, EngineError> {
    if unit.unknown {
        return Ok(unit.clone());
    }
    let (lemma, tags) =
        bilingual_dict
            .get(&unit.key())
            .ok_or_else(|| EngineError::TransferCoverage {
                lemma: unit.lemma.clone(),
                tags: tag_string(&unit.tags),
            })?;
    Ok(LexicalUnit {
        surface: unit.surface.clone(),
        lemma: lemma.clone(),
        tags: tags.clone(),
        unknown: false,
    })
}

pub fn rbmt_generate(unit: &LexicalUnit, gen_dict: &GenDict) -> Result<String, EngineError> {
    if unit.unknown {
        return Ok(format!("*{}", unit.surface));
    }
    gen_dict
        .get(&unit.key())
        .cloned()
        .ok_or_else(|| EngineError::Generation {
            lemma: unit.lemma.clone(),
            tags: tag_string(&unit.tags),
        })
}

/// Applies each rule in order, scanning adjacent pairs left to right.
pub fn rbmt_postgenerate(mut words: Vec<String>, rules: &[PostgenRule]) -> Vec<String> {
    for rule in rules {
        let mut out = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            if i + 1 < words.len() && words[i] == rule.left && words[i + 1] == rule.right {
                out.extend(rule.replacement.iter().cloned());
                i += 2;
            } else {
                out.push(std::mem::take(&mut words[i]));
                i += 1;
            }
        }
        words = out;
    }
    words
}

#[derive(Debug, Clone)]
pub struct RbmtEngine {
    resources: Arc<RbmtResources>,
    cost: CostModel,
}

impl RbmtEngine {
    pub fn new(resources: Arc<RbmtResources>, cost: CostModel) -> Self {
        RbmtEngine { resources, cost }
    }

    pub fn resources(&self) -> &RbmtResources {
        &self.resources
    }
}

impl Engine for RbmtEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Rbmt
    }

    fn setup_seconds(&self) -> f64 {
        self.cost.setup_seconds
    }

    fn translate_sentence(&mut self, sentence: &Sentence) -> Result<Translation, EngineError> {
        let text = self
            .resources
            .translate_text(sentence.text())
            .map_err(|e| EngineError::Sentence {
                sentence_index: sentence.index(),
                reason: e.to_string(),
            })?;
        let cost_seconds = self.cost.sentence_cost(sentence.word_count());
        self.cost.pay(cost_seconds);
        Ok(Translation {
            sentence: sentence.with_text(&text),
            cost_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DEFAULT_BASE_SENTENCE;

    fn strings(tags: &[&str]) -> Vec<String> {
        tags.iter().map(|t| (*t).to_owned()).collect()
    }

    /// Two-entry dictionaries translating "la casa".
    fn la_casa() -> RbmtResources {
        RbmtResources::from_tsv(
            "la\tel\tdet,def,f,sg\nla\tlo\tprn,obj,p3,f,sg\ncasa\tcasa\tn,f,sg\n",
            "det\t0.7\nprn\t0.3\n",
            "el\tdet,def,f,sg\tthe\tdet,def\ncasa\tn,f,sg\thouse\tn,sg\n",
            "the\tdet,def\tthe\nhouse\tn,sg\thouse\nhouse\tn,pl\thouses\n",
            "",
        )
        .unwrap()
    }

    #[test]
    fn constructed_dictionaries_translate_la_casa() {
        assert_eq!(la_casa().translate_text("la casa").unwrap(), "the house");
        let mut engine = RbmtEngine::new(Arc::new(la_casa()), CostModel::default());
        let t = engine
            .translate_sentence(&Sentence::new(0, "la casa"))
            .unwrap();
        assert_eq!(t.sentence.text(), "the house");
    }

    #[test]
    fn analyze_cases() {
        let res = la_casa();
        assert_eq!(
            rbmt_analyze("casa", &res.morph_dict),
            vec![LexicalUnit::known("casa", "casa", &["n", "f", "sg"])]
        );
        assert_eq!(rbmt_analyze("la", &res.morph_dict).len(), 2);
        let miss = rbmt_analyze("xyzzy", &res.morph_dict);
        assert_eq!(miss, vec![LexicalUnit::unknown("xyzzy")]);
        assert!(miss[0].lemma.is_empty() && miss[0].tags.is_empty());
    }

    #[test]
    fn tagger_picks_most_probable_first_tag() {
        let res = la_casa();
        let la = rbmt_analyze("la", &res.morph_dict);
        let picked = rbmt_tag(std::slice::from_ref(&la), &res.tag_model).unwrap();
        assert_eq!(picked[0].tags[0], "det");

        let single = rbmt_analyze("casa", &res.morph_dict);
        assert_eq!(
            rbmt_tag(std::slice::from_ref(&single), &TagModel::new()).unwrap()[0],
            single[0]
        );

        let tie: TagModel = [("det".to_owned(), 0.5), ("prn".to_owned(), 0.5)].into();
        let mut reversed = la.clone();
        reversed.reverse();
        assert_eq!(rbmt_tag(std::slice::from_ref(&la), &tie).unwrap()[0], la[0]);
        assert_eq!(rbmt_tag(&[reversed.clone()], &tie).unwrap()[0], reversed[0]);

        let partial: TagModel = [("det".to_owned(), 0.5)].into();
        assert!(matches!(
            rbmt_tag(&[la], &partial),
            Err(EngineError::ModelCoverage { tag }) if tag == "prn"
        ));
        assert!(rbmt_tag(&[vec![]], &tie).is_err());
    }

    #[test]
    fn transfer_cases() {
        let res = la_casa();
        let casa = LexicalUnit::known("casa", "casa", &["n", "f", "sg"]);
        let house = rbmt_transfer(&casa, &res.bilingual_dict).unwrap();
        assert_eq!(
            (house.lemma.as_str(), house.tags.clone()),
            ("house", strings(&["n", "sg"]))
        );

        let la = LexicalUnit::known("la", "el", &["det", "def", "f", "sg"]);
        let the = rbmt_transfer(&la, &res.bilingual_dict).unwrap();
        assert_eq!(
            (the.lemma.as_str(), the.tags.clone()),
            ("the", strings(&["det", "def"]))
        );

        let unknown = LexicalUnit::unknown("xyzzy");
        assert_eq!(
            rbmt_transfer(&unknown, &res.bilingual_dict).unwrap(),
            unknown
        );

        let uncovered = LexicalUnit::known("la", "lo", &["prn", "obj", "p3", "f", "sg"]);
        assert!(matches!(
            rbmt_transfer(&uncovered, &res.bilingual_dict),
            Err(EngineError::TransferCoverage { .. })
        ));
    }

    #[test]
    fn generate_cases() {
        let res = la_casa();
        let target = |tags: &[&str]| LexicalUnit::known("casa", "house", tags);
        assert_eq!(
            rbmt_generate(&target(&["n", "pl"]), &res.gen_dict).unwrap(),
            "houses"
        );
        assert_eq!(
            rbmt_generate(&target(&["n", "sg"]), &res.gen_dict).unwrap(),
            "house"
        );
        assert_eq!(
            rbmt_generate(&LexicalUnit::unknown("xyzzy"), &res.gen_dict).unwrap(),
            "*xyzzy"
        );
        assert!(matches!(
            rbmt_generate(&target(&["n", "du"]), &res.gen_dict),
            Err(EngineError::Generation { .. })
        ));
    }

    #[test]
    fn postgenerate_cases() {
        let words = strings(&["a", "el", "x"]);
        assert_eq!(rbmt_postgenerate(words.clone(), &[]), words);
        let rule = PostgenRule::new("a", "el", "al");
        assert_eq!(
            rbmt_postgenerate(words.clone(), std::slice::from_ref(&rule)),
            strings(&["al", "x"])
        );
        let other = strings(&["el", "a", "x"]);
        assert_eq!(rbmt_postgenerate(other.clone(), &[rule]), other);
        let expand = PostgenRule::new("a", "apple", "an apple");
        assert_eq!(
            rbmt_postgenerate(strings(&["a", "apple", "a", "apple"]), &[expand]),
            strings(&["an", "apple", "an", "apple"])
        );
    }

    #[test]
    fn load_rejects_generation_dead_end() {
        let err = RbmtResources::from_tsv(
            "casa\tcasa\tn,f,sg\n",
            "n\t1\n",
            "casa\tn,f,sg\thouse\tn,sg\n",
            "",
            "",
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::Resource(_)));
    }

    #[test]
    fn load_rejects_bad_tag_model() {
        let ambiguous = "la\tel\tdet\nla\tlo\tprn\n";
        for tags in [
            "det\t0.7\n",
            "det\t0.7\nprn\t0\n",
            "det\tNaN\nprn\t0.3\n",
            "det\tx\n",
        ] {
            assert!(
                RbmtResources::from_tsv(ambiguous, tags, "", "", "").is_err(),
                "{tags:?}"
            );
        }
        assert!(RbmtResources::from_tsv("a\tb\n", "", "", "", "").is_err());
    }

    #[test]
    fn builtin_dictionaries_cover_default_sentence() {
        let res = RbmtResources::builtin().unwrap();
        let out = res.translate_text(DEFAULT_BASE_SENTENCE).unwrap();
        assert!(!out.contains('*'), "{out}");
        assert_eq!(
            out,
            "the cat black eats the food in the house big and the dog white sleeps in the park green today"
        );
        assert_eq!(
            res.translate_text("un elefante viejo").unwrap(),
            "an elephant old"
        );
        assert_eq!(res.translate_text("la xyzzy").unwrap(), "the *xyzzy");
    }

    #[test]
    fn load_dir_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in [
            ("morph.tsv", TOY_MORPH),
            ("tags.tsv", TOY_TAGS),
            ("bilingual.tsv", TOY_BILINGUAL),
            ("gen.tsv", TOY_GEN),
        ] {
            std::fs::write(dir.path().join(name), body).unwrap();
        }
        let res = RbmtResources::load_dir(dir.path()).unwrap();
        assert!(res.postgen_rules.is_empty());
        assert_eq!(res.translate_text("la casa").unwrap(), "the house");
        assert!(RbmtResources::load_dir(&dir.path().join("missing")).is_err());
    }
}
