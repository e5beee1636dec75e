//! Text processing: tokenization, skip-gram word embeddings, character-trigram
//! language identification and lexicon sentiment.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const URL_TOKEN: &str = "<url>";
pub const MENTION_TOKEN: &str = "<mention>";
pub const UNDETERMINED: &str = "und";

/// Texts shorter than this (in characters) are not language-identified.
pub const MIN_LANGID_CHARS: usize = 10;
/// Trigrams kept per language profile.
pub const PROFILE_SIZE: usize = 300;

fn is_url(lower: &str) -> bool {
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Lowercased word tokens. URLs become `<url>`, @-mentions `<mention>`,
/// hashtags keep their `#`, and punctuation is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if is_url(&lower) {
            out.push(URL_TOKEN.to_string());
            continue;
        }
        if let Some(rest) = lower.strip_prefix('@') {
            if rest.chars().any(|c| c.is_alphanumeric() || c == '_') {
                out.push(MENTION_TOKEN.to_string());
            }
            continue;
        }
        if let Some(rest) = lower.strip_prefix('#') {
            let tag: String = rest
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .collect();
            if !tag.is_empty() {
                out.push(format!("#{tag}"));
            }
            continue;
        }
        out.extend(
            lower
                .split(|c: char| !c.is_alphanumeric())
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    fn header_fields(&self) -> String {
        format!(
            "window={} negatives={} epochs={} min_count={} learning_rate={} seed={}",
            self.window, self.negatives, self.epochs, self.min_count, self.learning_rate, self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    /// `key=value` hyperparameters recorded in the saved header.
    pub metadata: BTreeMap<String, String>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            vectors: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::InvalidInput("empty embedding token".into()));
        }
        if vector.len() != self.dimension {
            return Err(Error::WidthMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.vectors.insert(token, vector);
        Ok(())
    }
}

/// Cumulative unigram^0.75 distribution for negative sampling.
struct NoiseDistribution {
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseDistribution { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

/// Trains skip-gram embeddings with negative sampling.
///
/// The vocabulary holds tokens seen at least `min_count` times. Noise words
/// are drawn from the unigram distribution raised to 0.75 and the learning
/// rate decays linearly to zero over all epochs. Training is single-threaded,
/// so the result depends only on the corpus and `config.seed`.
pub fn train_skipgram(corpus: &[Vec<String>], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if config.dimension < 2 || config.window < 1 || config.negatives < 1 {
        return Err(Error::InvalidInput(
            "skip-gram needs dimension >= 2, window >= 1 and negatives >= 1".into(),
        ));
    }

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sentence in corpus {
        for token in sentence {
            *freq.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count.max(1))
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "no token occurs at least {} times",
            config.min_count
        )));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(t, _))| (t, i)).collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let counts: Vec<usize> = vocab.iter().map(|&(_, c)| c).collect();
    let noise = NoiseDistribution::new(&counts);

    let dim = config.dimension;
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; n * dim];
    let mut hidden_grad = vec![0.0; dim];

    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total = (words_per_epoch * config.epochs).max(1) as f64;
    let mut processed = 0usize;

    for _ in 0..config.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - processed as f64 / total).max(1e-4);
                processed += 1;
                let reach = rng.gen_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sentence[ctx_pos];
                    let v = center * dim;
                    hidden_grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let u = target * dim;
                        let dot: f64 = (0..dim).map(|d| input[v + d] * output[u + d]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            hidden_grad[d] += g * output[u + d];
                            output[u + d] += g * input[v + d];
                        }
                    }
                    for d in 0..dim {
                        input[v + d] += hidden_grad[d];
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, &(token, _)) in vocab.iter().enumerate() {
        table
            .vectors
            .insert(token.to_string(), input[i * dim..(i + 1) * dim].to_vec());
    }
    for field in config.header_fields().split(' ') {
        if let Some((k, v)) = field.split_once('=') {
            table.metadata.insert(k.to_string(), v.to_string());
        }
    }
    Ok(table)
}

/// Writes `<count> <dim> key=value...` followed by one `token v1 .. vd` line
/// per token.
pub fn save_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = format!("{} {}", table.len(), table.dimension);
    for (k, v) in &table.metadata {
        header.push_str(&format!(" {k}={v}"));
    }
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for (token, vector) in &table.vectors {
        write!(w, "{token}").map_err(io)?;
        for x in vector {
            write!(w, " {x}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn parse_header(fields: &[&str]) -> Option<(usize, BTreeMap<String, String>)> {
    if fields.len() < 2 {
        return None;
    }
    fields[0].parse::<usize>().ok()?;
    let dim = fields[1].parse::<usize>().ok()?;
    let mut meta = BTreeMap::new();
    for f in &fields[2..] {
        let (k, v) = f.split_once('=')?;
        meta.insert(k.to_string(), v.to_string());
    }
    Some((dim, meta))
}

/// Reads the text format written by [`save_embeddings`]; the header line is
/// optional. Duplicate tokens keep the last vector.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = None;
    let mut duplicates = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if i == 0 {
            if let Some((dim, metadata)) = parse_header(&fields) {
                let mut t = EmbeddingTable::new(dim);
                t.metadata = metadata;
                table = Some(t);
                continue;
            }
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(e.to_string()))?;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dimension {
            return Err(parse_err(format!(
                "expected {} values, found {}",
                t.dimension,
                values.len()
            )));
        }
        if t.vectors.insert(fields[0].to_string(), values).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate tokens, last kept", path.display());
    }
    let table = table.ok_or_else(|| Error::EmptyVocabulary(format!("{} is empty", path.display())))?;
    if table.dimension == 0 {
        return Err(Error::InvalidInput(format!("{}: zero-dimensional vectors", path.display())));
    }
    Ok(table)
}

/// Mean vector of the in-vocabulary tokens, or the zero vector when none are
/// known. Summation runs in token order so the result does not depend on the
/// order of `tokens`.
pub fn embed_text<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut known: Vec<&str> = tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| table.vectors.contains_key(*t))
        .collect();
    let mut out = vec![0.0; table.dimension];
    if known.is_empty() {
        return out;
    }
    known.sort_unstable();
    for t in &known {
        for (o, x) in out.iter_mut().zip(&table.vectors[*t]) {
            *o += x;
        }
    }
    let n = known.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Ranked character-trigram profile of one language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageProfile {
    pub language: String,
    /// Most frequent first.
    pub trigrams: Vec<String>,
}

fn ranked_trigrams<'a>(texts: impl IntoIterator<Item = &'a str>, limit: usize) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for word in text
            .to_lowercase()
            .split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty())
        {
            let padded: Vec<char> = std::iter::once('_')
                .chain(word.chars())
                .chain(std::iter::once('_'))
                .collect();
            for w in padded.windows(3) {
                *counts.entry(w.iter().collect()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked.into_iter().map(|(t, _)| t).collect()
}

impl LanguageProfile {
    pub fn train<'a>(language: &str, texts: impl IntoIterator<Item = &'a str>) -> Self {
        LanguageProfile {
            language: language.to_string(),
            trigrams: ranked_trigrams(texts, PROFILE_SIZE),
        }
    }

    /// Out-of-place distance from a ranked document profile.
    fn distance(&self, document: &[String]) -> usize {
        let ranks: HashMap<&str, usize> = self
            .trigrams
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let penalty = self.trigrams.len().max(document.len());
        document
            .iter()
            .enumerate()
            .map(|(i, t)| ranks.get(t.as_str()).map_or(penalty, |&r| r.abs_diff(i)))
            .sum()
    }
}

/// Language code of the nearest profile by out-of-place trigram distance, or
/// `"und"` for short or letterless texts. Ties go to the earlier profile.
pub fn identify_language(text: &str, profiles: &[LanguageProfile]) -> Result<String> {
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no language profiles".into()));
    }
    if text.trim().chars().count() < MIN_LANGID_CHARS {
        return Ok(UNDETERMINED.to_string());
    }
    let document = ranked_trigrams([text], PROFILE_SIZE);
    if document.is_empty() {
        return Ok(UNDETERMINED.to_string());
    }
    let best = profiles
        .iter()
        .min_by_key(|p| p.distance(&document))
        .expect("non-empty");
    Ok(best.language.clone())
}

/// Writes profiles as `lang<TAB>trigram<TAB>rank` lines, ranks from 1.
pub fn save_profiles(profiles: &[LanguageProfile], path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in profiles {
        for (i, t) in p.trigrams.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", p.language, t, i + 1));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_profiles(path: &Path) -> Result<Vec<LanguageProfile>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut ranked: HashMap<String, Vec<(usize, String)>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: message.to_string(),
        };
        if fields.len() != 3 {
            return Err(err("expected lang<TAB>trigram<TAB>rank"));
        }
        let rank: usize = fields[2].trim().parse().map_err(|_| err("rank is not an integer"))?;
        let lang = fields[0].to_string();
        if !ranked.contains_key(&lang) {
            order.push(lang.clone());
        }
        ranked.entry(lang).or_default().push((rank, fields[1].to_string()));
    }
    Ok(order
        .into_iter()
        .map(|lang| {
            let mut entries = ranked.remove(&lang).unwrap_or_default();
            entries.sort();
            entries.dedup_by(|a, b| a.1 == b.1);
            LanguageProfile {
                language: lang,
                trigrams: entries.into_iter().map(|(_, t)| t).collect(),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentimentLexicon {
    pub language: String,
    pub polarity: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new(language: &str, entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut polarity = BTreeMap::new();
        for (token, value) in entries {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "polarity {value} of {token:?} outside [-1, 1]"
                )));
            }
            polarity.insert(token.to_lowercase(), value);
        }
        Ok(SentimentLexicon {
            language: language.to_string(),
            polarity,
        })
    }

    /// Reads `token<TAB>polarity` lines.
    pub fn load(language: &str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .and_then(|(t, v)| v.trim().parse::<f64>().ok().map(|v| (t.to_string(), v)));
            match parsed {
                Some(e) => entries.push(e),
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: "expected token<TAB>polarity".into(),
                    })
                }
            }
        }
        Self::new(language, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let out: String = self
            .polarity
            .iter()
            .map(|(t, v)| format!("{t}\t{v}\n"))
            .collect();
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SentimentClass {
    Negative,
    Neutral,
    Positive,
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentClass::Negative => "neg",
            SentimentClass::Neutral => "neu",
            SentimentClass::Positive => "pos",
        })
    }
}

/// Sum of the polarities of lexicon tokens, with its sign as the class.
pub fn sentiment_score<S: AsRef<str>>(tokens: &[S], lexicon: &SentimentLexicon) -> (f64, SentimentClass) {
    let score: f64 = tokens
        .iter()
        .filter_map(|t| lexicon.polarity.get(t.as_ref()))
        .sum();
    let class = if score > 0.0 {
        SentimentClass::Positive
    } else if score < 0.0 {
        SentimentClass::Negative
    } else {
        SentimentClass::Neutral
    };
    (score, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Hello WORLD http://x.cat @bob"),
            vec!["hello", "world", "<url>", "<mention>"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("#VoteYes!"), vec!["#voteyes"]);
        assert_eq!(tokenize("l'independència, ARA!"), vec!["l", "independència", "ara"]);
    }

    #[test]
    fn repeated_sentence_table_shape() {
        let corpus = vec![toks("a b c d"); 20];
        let cfg = SkipGramConfig {
            dimension: 8,
            epochs: 2,
            ..Default::default()
        };
        let table = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(table.dimension, 8);
        assert_eq!(table.vectors.keys().collect::<Vec<_>>(), vec!["a", "b", "c", "d"]);
        assert!(table.vectors.values().all(|v| v.len() == 8 && v.iter().all(|x| x.is_finite())));
        assert_eq!(table.metadata["window"], "5");
    }

    #[test]
    fn unique_tokens_have_no_vocabulary() {
        let corpus = vec![toks("a b c"), toks("d e f")];
        let err = train_skipgram(&corpus, &SkipGramConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary(_)));
    }

    #[test]
    fn min_count_is_respected_exactly() {
        let corpus = vec![toks("a a a b b c"), toks("c d")];
        let cfg = SkipGramConfig {
            dimension: 4,
            min_count: 2,
            epochs: 1,
            ..Default::default()
        };
        let table = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(table.vectors.keys().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus: Vec<Vec<String>> = (0..30).map(|i| toks(&format!("x{} y z w{}", i % 3, i % 4))).collect();
        let cfg = SkipGramConfig {
            dimension: 6,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(train_skipgram(&corpus, &cfg).unwrap(), train_skipgram(&corpus, &cfg).unwrap());
    }

    #[test]
    fn embedding_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = vec![toks("#tag <url> b c d"); 10];
        let cfg = SkipGramConfig {
            dimension: 5,
            epochs: 1,
            ..Default::default()
        };
        let table = train_skipgram(&corpus, &cfg).unwrap();
        let path = dir.path().join("emb.txt");
        save_embeddings(&table, &path).unwrap();
        let back = load_embeddings(&path).unwrap();
        assert_eq!(back.dimension, 5);
        assert_eq!(back.metadata, table.metadata);
        for (t, v) in &table.vectors {
            for (a, b) in v.iter().zip(&back.vectors[t]) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn load_plain_file_and_reject_ragged_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        fs::write(&path, "cat 1 2 3\ndog 4 5 6\n").unwrap();
        let t = load_embeddings(&path).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("dog").unwrap(), &[4.0, 5.0, 6.0]);

        fs::write(&path, "cat 1 2 3\ndog 4 5\n").unwrap();
        match load_embeddings(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }

        fs::write(&path, "cat 1 2\ncat 3 4\n").unwrap();
        assert_eq!(load_embeddings(&path).unwrap().get("cat").unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn embed_text_examples() {
        let mut t = EmbeddingTable::new(2);
        t.insert("x", vec![1.0, 0.0]).unwrap();
        t.insert("y", vec![0.0, 1.0]).unwrap();
        assert_eq!(embed_text(&["x"], &t), vec![1.0, 0.0]);
        assert_eq!(embed_text(&["x", "y", "zzz"], &t), vec![0.5, 0.5]);
        assert_eq!(embed_text(&["zzz"], &t), vec![0.0, 0.0]);
        assert_eq!(embed_text::<&str>(&[], &t), vec![0.0, 0.0]);
    }

    fn sample_profiles() -> Vec<LanguageProfile> {
        let ca = "el govern de la generalitat ha aprovat avui una nova llei sobre la llengua catalana i els drets dels ciutadans del país";
        let es = "el gobierno de españa ha aprobado hoy una nueva ley sobre la lengua castellana y los derechos de los ciudadanos del país";
        let en = "the government of the united kingdom has approved today a new law about the english language and the rights of the citizens";
        vec![
            LanguageProfile::train("ca", [ca]),
            LanguageProfile::train("es", [es]),
            LanguageProfile::train("en", [en]),
        ]
    }

    #[test]
    fn language_id_recovers_training_text() {
        let profiles = sample_profiles();
        assert_eq!(identify_language("la generalitat ha aprovat una llei", &profiles).unwrap(), "ca");
        assert_eq!(identify_language("el gobierno ha aprobado una ley", &profiles).unwrap(), "es");
        assert_eq!(identify_language("the government has approved a law", &profiles).unwrap(), "en");
        assert_eq!(identify_language("ok", &profiles).unwrap(), UNDETERMINED);
        assert_eq!(identify_language("1234567890 42", &profiles).unwrap(), UNDETERMINED);
        assert!(identify_language("anything long enough", &[]).is_err());
    }

    #[test]
    fn profile_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profiles.tsv");
        let profiles = sample_profiles();
        save_profiles(&profiles, &path).unwrap();
        assert_eq!(load_profiles(&path).unwrap(), profiles);
    }

    #[test]
    fn sentiment_examples() {
        let lex = SentimentLexicon::new("en", [("good".to_string(), 1.0), ("bad".to_string(), -1.0)]).unwrap();
        assert_eq!(sentiment_score(&["good", "good"], &lex), (2.0, SentimentClass::Positive));
        assert_eq!(sentiment_score(&["bad"], &lex), (-1.0, SentimentClass::Negative));
        assert_eq!(sentiment_score(&["the", "cat"], &lex), (0.0, SentimentClass::Neutral));
        assert!(SentimentLexicon::new("en", [("x".to_string(), 2.0)]).is_err());
    }
}
