//! Corpus ingestion, normalization, time partitioning, and synthesis.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Line numbers are 1-based positions in the input file.
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("invalid interval spec {0:?}: expected name=start..end")]
    BadIntervalSpec(String),
    #[error("interval {name}: start {start} is not before end {end}")]
    EmptyInterval { name: String, start: i64, end: i64 },
    #[error("intervals {0} and {1} overlap")]
    OverlappingIntervals(String, String),
    #[error("duplicate interval name {0}")]
    DuplicateInterval(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("ground truth references unknown tweet id {0}")]
    UnknownTweetId(String),
}

fn line_err(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Line { line, msg: msg.into() }
}

/// Half-open time window `[start, end)` in UTC seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalSpec {
    pub name: String,
    pub start: i64,
    pub end: i64,
}

impl IntervalSpec {
    pub fn new(name: impl Into<String>, start: i64, end: i64) -> Result<Self, CorpusError> {
        let name = name.into();
        if start >= end {
            return Err(CorpusError::EmptyInterval { name, start, end });
        }
        Ok(Self { name, start, end })
    }

    /// Parses `name=start..end` where both bounds are ISO-8601 timestamps,
    /// e.g. `ev1=2014-02-25T18:00:00Z..2014-02-25T19:00:00Z`.
    pub fn parse(spec: &str) -> Result<Self, CorpusError> {
        let bad = || CorpusError::BadIntervalSpec(spec.to_string());
        let (name, range) = spec.split_once('=').ok_or_else(bad)?;
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let start = parse_timestamp(a).ok_or_else(bad)?;
        let end = parse_timestamp(b).ok_or_else(bad)?;
        Self::new(name, start, end)
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        self.start <= timestamp && timestamp < self.end
    }
}

impl fmt::Display for IntervalSpec {
    /// Writes the `parse` form back: `name=start..end` with Z-suffixed bounds.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let iso = |ts: i64| {
            chrono::DateTime::from_timestamp(ts, 0)
                .expect("in-range timestamp")
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        write!(f, "{}={}..{}", self.name, iso(self.start), iso(self.end))
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    chrono::DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|dt| dt.timestamp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub raw_text: String,
    /// `normalize(raw_text, false)`.
    pub norm_text: String,
    /// `normalize(raw_text, true)`; cached for the word-level baseline.
    pub norm_text_words: String,
    pub timestamp: i64,
    /// Lowercased `#`-prefixed tokens of `raw_text`, `#` stripped, in order.
    pub hashtags: Vec<String>,
    pub interval: Option<String>,
}

impl Tweet {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, timestamp: i64) -> Self {
        let raw_text = raw_text.into();
        Self {
            id: id.into(),
            norm_text: normalize(&raw_text, false),
            norm_text_words: normalize(&raw_text, true),
            hashtags: extract_hashtags(&raw_text),
            raw_text,
            timestamp,
            interval: None,
        }
    }
}

/// Removes retweet prefixes, URL tokens, and @-mentions, lowercases, and
/// collapses whitespace. With `word_level` every punctuation or symbol
/// character additionally becomes its own token.
///
/// The single-pass transform below can expose new strippable tokens (for
/// example punctuation spacing splits `".http"` into `". http"`), so the
/// result is iterated to a fixed point; this makes the function idempotent
/// by construction.
pub fn normalize(raw: &str, word_level: bool) -> String {
    let mut cur = normalize_pass(raw, word_level);
    loop {
        let next = normalize_pass(&cur, word_level);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn normalize_pass(raw: &str, word_level: bool) -> String {
    let lower = raw.to_lowercase();
    let kept: Vec<&str> = lower
        .split_whitespace()
        .filter(|tok| !is_url_token(tok) && !is_mention_token(tok))
        .collect();
    // Retweet markers are only stripped at the front, after mention removal
    // so that "RT @user text" loses both leading tokens.
    let body = kept
        .iter()
        .position(|tok| *tok != "rt")
        .map_or(&kept[..0], |i| &kept[i..]);
    if !word_level {
        return body.join(" ");
    }
    let mut spaced = String::new();
    for tok in body {
        if !spaced.is_empty() {
            spaced.push(' ');
        }
        for c in tok.chars() {
            let cat = c.general_category_group();
            if cat == GeneralCategoryGroup::Punctuation || cat == GeneralCategoryGroup::Symbol {
                spaced.push(' ');
                spaced.push(c);
                spaced.push(' ');
            } else {
                spaced.push(c);
            }
        }
    }
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_url_token(tok: &str) -> bool {
    tok.starts_with("http") || tok.contains("http://") || tok.contains("https://")
}

fn is_mention_token(tok: &str) -> bool {
    // A lone "@" carries no username and is not a mention.
    tok.len() > 1 && tok.starts_with('@')
}

fn extract_hashtags(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|tok| tok.strip_prefix('#'))
        .map(str::to_lowercase)
        .filter(|tag| !tag.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    tweets: Vec<Tweet>,
    intervals: Vec<IntervalSpec>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates id uniqueness and interval disjointness, and tags each tweet
    /// with the interval containing its timestamp (or none).
    pub fn new(mut tweets: Vec<Tweet>, intervals: Vec<IntervalSpec>) -> Result<Self, CorpusError> {
        let mut sorted: Vec<&IntervalSpec> = intervals.iter().collect();
        sorted.sort_by_key(|iv| iv.start);
        for pair in sorted.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(CorpusError::DuplicateInterval(pair[0].name.clone()));
            }
            if pair[1].start < pair[0].end {
                return Err(CorpusError::OverlappingIntervals(
                    pair[0].name.clone(),
                    pair[1].name.clone(),
                ));
            }
        }
        let mut index = HashMap::with_capacity(tweets.len());
        for (i, tweet) in tweets.iter().enumerate() {
            if index.insert(tweet.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(tweet.id.clone()));
            }
        }
        for tweet in &mut tweets {
            tweet.interval = intervals
                .iter()
                .find(|iv| iv.contains(tweet.timestamp))
                .map(|iv| iv.name.clone());
        }
        Ok(Self { tweets, intervals, index })
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn intervals(&self) -> &[IntervalSpec] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Tweet> {
        self.index.get(id).map(|&i| &self.tweets[i])
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Tweets falling in the named interval, in corpus order.
    pub fn tweets_in<'a>(&'a self, interval: &'a str) -> impl Iterator<Item = &'a Tweet> + 'a {
        self.tweets
            .iter()
            .filter(move |t| t.interval.as_deref() == Some(interval))
    }
}

/// Reads line-delimited JSON `{"id", "text", "timestamp", "lang"?}` and tags
/// tweets with the interval containing their timestamp. `lang` is tolerated
/// and ignored.
pub fn load_corpus(path: &Path, intervals: &[IntervalSpec]) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    let mut tweets = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| line_err(lineno, format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| line_err(lineno, "expected a JSON object"))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| line_err(lineno, format!("missing field {name}")))
        };
        let id = field("id")?
            .as_str()
            .ok_or_else(|| line_err(lineno, "field id must be a string"))?;
        let text = field("text")?
            .as_str()
            .ok_or_else(|| line_err(lineno, "field text must be a string"))?;
        let timestamp = field("timestamp")?
            .as_i64()
            .ok_or_else(|| line_err(lineno, "field timestamp must be an integer"))?;
        if seen.insert(id.to_string(), lineno).is_some() {
            return Err(line_err(lineno, format!("duplicate id {id}")));
        }
        tweets.push(Tweet::new(id, text, timestamp));
    }
    Corpus::new(tweets, intervals.to_vec())
}

/// Writes the corpus back out in the `load_corpus` input format.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for tweet in corpus.tweets() {
        let row = serde_json::json!({
            "id": tweet.id,
            "text": tweet.raw_text,
            "timestamp": tweet.timestamp,
        });
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// One tweet's ground-truth topic with the match strength that produced it
/// (1.0 for synthetic assignments).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicMatch {
    pub topic: usize,
    pub ratio: f64,
}

/// Partial map tweet-id -> topic, with dense topic ids indexing `topics`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    topics: Vec<String>,
    assignment: BTreeMap<String, TopicMatch>,
}

impl GroundTruth {
    pub fn new(topics: Vec<String>) -> Self {
        Self { topics, assignment: BTreeMap::new() }
    }

    pub fn insert(&mut self, id: impl Into<String>, topic: usize, ratio: f64) {
        assert!(topic < self.topics.len(), "topic id {topic} out of range");
        self.assignment.insert(id.into(), TopicMatch { topic, ratio });
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn get(&self, id: &str) -> Option<TopicMatch> {
        self.assignment.get(id).copied()
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.get(id).map(|m| m.topic)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TopicMatch)> {
        self.assignment.iter().map(|(id, m)| (id.as_str(), *m))
    }

    pub fn validate_against(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        for (id, _) in self.iter() {
            if !corpus.contains_id(id) {
                return Err(CorpusError::UnknownTweetId(id.to_string()));
            }
        }
        Ok(())
    }

    /// Writes one `{"id", "topic", "ratio"}` object per assigned tweet.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(File::create(path)?);
        for (id, m) in self.iter() {
            let row = serde_json::json!({ "id": id, "topic": m.topic, "ratio": m.ratio });
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// Rebuilds a truth from `save` output. Topic labels are not part of the
    /// row format, so they come back as placeholders `topic0`, `topic1`, ...
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path)?;
        let mut rows = Vec::new();
        let mut max_topic = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&line)
                .map_err(|e| line_err(lineno, format!("invalid JSON: {e}")))?;
            let id = value["id"]
                .as_str()
                .ok_or_else(|| line_err(lineno, "missing field id"))?
                .to_string();
            let topic = value["topic"]
                .as_u64()
                .ok_or_else(|| line_err(lineno, "missing field topic"))? as usize;
            let ratio = value["ratio"]
                .as_f64()
                .ok_or_else(|| line_err(lineno, "missing field ratio"))?;
            max_topic = Some(max_topic.map_or(topic, |m: usize| m.max(topic)));
            rows.push((id, topic, ratio));
        }
        let n_topics = max_topic.map_or(0, |m| m + 1);
        let mut truth = Self::new((0..n_topics).map(|i| format!("topic{i}")).collect());
        for (id, topic, ratio) in rows {
            truth.insert(id, topic, ratio);
        }
        Ok(truth)
    }
}

const TEMPLATES: &[&str] = &[
    "godzilla trailer lands online and fans cannot stop watching",
    "city marathon closes downtown streets for the whole morning",
    "new transfer rumor links the striker with a summer move",
    "volcanic ash cloud delays flights across northern europe",
    "indie band announces reunion tour after ten years apart",
    "scientists report liquid water plumes on an icy moon",
    "stock markets rally after the surprise rate decision",
    "heavy snowfall shuts schools across the mountain region",
    "the award ceremony opens with a surprise musical number",
    "local bakery wins national prize for sourdough loaf",
    "wildfire crews gain ground after a week of hot winds",
    "council approves bike lanes along the riverfront road",
    "astronomers spot a comet visible to the naked eye",
    "museum returns ancient statue to its country of origin",
    "champion keeper saves two penalties in the cup final",
    "tech firm unveils a folding phone with a glass hinge",
    "storm surge floods the harbor district overnight",
    "archaeologists uncover a mosaic floor under the plaza",
    "union and airline reach a deal hours before the strike",
    "rare orchid blooms for the first time in the botanic garden",
    "film festival adds a midnight screening after sellout",
    "railway opens the refurbished coastal line to passengers",
    "chess prodigy defeats the grandmaster in nineteen moves",
    "drought forces the city to ration water next month",
];

const WORD_BANK: &[&str] = &[
    "harbor", "signal", "meadow", "rocket", "violet", "timber", "anchor", "breeze",
    "carbon", "dapper", "ember", "falcon", "glacier", "hollow", "ivory", "jungle",
    "kernel", "lantern", "marble", "nectar", "onyx", "pepper", "quartz", "ridge",
    "saffron", "thistle", "umber", "velvet", "willow", "zephyr", "basalt", "cinder",
    "drift", "ellipse", "fathom", "garnet", "hazel", "inlet", "juniper", "krill",
];

const NOISE_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz ";

fn random_noise_char(rng: &mut ChaCha8Rng) -> char {
    NOISE_ALPHABET[rng.random_range(0..NOISE_ALPHABET.len())] as char
}

/// Generates `n_topics * per_topic` tweets from template sentences. Each
/// character of the template is independently substituted, doubled with an
/// inserted character, or deleted with probability `noise_rate`; afterwards a
/// topic hashtag `#t<topic>` is appended with probability `hashtag_rate`.
/// Fully deterministic for a given seed.
pub fn synth_corpus(
    n_topics: usize,
    per_topic: usize,
    noise_rate: f64,
    hashtag_rate: f64,
    seed: u64,
) -> (Corpus, GroundTruth) {
    assert!(n_topics >= 1, "n_topics must be at least 1");
    assert!(per_topic >= 1, "per_topic must be at least 1");
    assert!((0.0..=1.0).contains(&noise_rate), "noise_rate must be in [0,1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<String> = (0..n_topics)
        .map(|k| match TEMPLATES.get(k) {
            Some(t) => (*t).to_string(),
            None => {
                let n_words = rng.random_range(6..=9);
                (0..n_words)
                    .map(|_| WORD_BANK[rng.random_range(0..WORD_BANK.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        })
        .collect();

    let mut truth = GroundTruth::new(templates.clone());
    let mut tweets = Vec::with_capacity(n_topics * per_topic);
    let mut idx = 0usize;
    for (topic, template) in templates.iter().enumerate() {
        for _ in 0..per_topic {
            let mut text = String::with_capacity(template.len() + 8);
            for c in template.chars() {
                if rng.random::<f64>() < noise_rate {
                    match rng.random_range(0..3) {
                        0 => text.push(random_noise_char(&mut rng)),
                        1 => {
                            text.push(random_noise_char(&mut rng));
                            text.push(c);
                        }
                        _ => {}
                    }
                } else {
                    text.push(c);
                }
            }
            if rng.random::<f64>() < hashtag_rate {
                text.push_str(&format!(" #t{topic}"));
            }
            let id = format!("t{idx:05}");
            tweets.push(Tweet::new(&id, text, 1_500_000_000 + idx as i64));
            truth.insert(id, topic, 1.0);
            idx += 1;
        }
    }
    let corpus = Corpus::new(tweets, Vec::new()).expect("synthetic ids are unique");
    (corpus, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_strips_rt_mentions_urls() {
        let raw = "RT @bob Godzilla roars! http://t.co/x";
        assert_eq!(normalize(raw, false), "godzilla roars!");
        assert_eq!(normalize(raw, true), "godzilla roars !");
    }

    #[test]
    fn normalize_empty() {
        assert_eq!(normalize("", false), "");
        assert_eq!(normalize("", true), "");
    }

    #[test]
    fn normalize_strips_stacked_rt_and_interleaved_mentions() {
        assert_eq!(normalize("RT rt RT hello", false), "hello");
        assert_eq!(normalize("rt @a rt @b go", false), "go");
        assert_eq!(normalize("start rt middle", false), "start rt middle");
    }

    #[test]
    fn normalize_drops_tokens_embedding_urls() {
        assert_eq!(normalize("see (http://x.co/y) now", false), "see now");
        assert_eq!(normalize("a .https://b.c d", false), "a d");
    }

    #[test]
    fn normalize_word_level_separates_unicode_punctuation() {
        assert_eq!(normalize("¡hola, mundo!", true), "¡ hola , mundo !");
        assert_eq!(normalize("a+b=c", true), "a + b = c");
    }

    #[test]
    fn normalize_keeps_lone_at_sign() {
        assert_eq!(normalize("meet @ noon", false), "meet @ noon");
        assert_eq!(normalize("a!@b", true), "a ! @ b");
    }

    #[test]
    fn hashtag_extraction() {
        let t = Tweet::new("x", "Go #Fun stuff #X2 # ##nest", 0);
        assert_eq!(t.hashtags, vec!["fun", "x2", "#nest"]);
    }

    #[test]
    fn interval_spec_parse_iso() {
        let iv = IntervalSpec::parse("ev1=2014-02-25T18:00:00Z..2014-02-25T19:00:00Z").unwrap();
        assert_eq!(iv.name, "ev1");
        assert_eq!(iv.start, 1393351200);
        assert_eq!(iv.end, 1393354800);
        assert!(iv.contains(1393351200));
        assert!(!iv.contains(1393354800));
        assert!(IntervalSpec::parse("no-equals").is_err());
        assert!(IntervalSpec::parse("x=2014-02-25T19:00:00Z..2014-02-25T18:00:00Z").is_err());
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn load_corpus_counts_and_intervals() {
        let f = write_lines(&[
            r#"{"id": "a", "text": "RT @x Hello!", "timestamp": 1393351200, "lang": "en"}"#,
            r#"{"id": "b", "text": "outside", "timestamp": 99}"#,
        ]);
        let iv = IntervalSpec::parse("ev=2014-02-25T18:00:00Z..2014-02-25T19:00:00Z").unwrap();
        let corpus = load_corpus(f.path(), &[iv]).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.tweets()[0].interval.as_deref(), Some("ev"));
        assert_eq!(corpus.tweets()[0].norm_text, "hello!");
        assert_eq!(corpus.tweets()[1].interval, None);
        assert_eq!(corpus.tweets_in("ev").count(), 1);
    }

    #[test]
    fn load_corpus_missing_field_names_line() {
        let lines: Vec<String> = (0..6)
            .map(|i| format!(r#"{{"id": "t{i}", "text": "x", "timestamp": {i}}}"#))
            .chain([r#"{"id": "g", "timestamp": 7}"#.to_string()])
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_lines(&refs);
        let err = load_corpus(f.path(), &[]).unwrap_err();
        assert_eq!(err.to_string(), "line 7: missing field text");
    }

    #[test]
    fn load_corpus_rejects_duplicate_id() {
        let f = write_lines(&[
            r#"{"id": "a", "text": "x", "timestamp": 1}"#,
            r#"{"id": "a", "text": "y", "timestamp": 2}"#,
        ]);
        let err = load_corpus(f.path(), &[]).unwrap_err();
        assert_eq!(err.to_string(), "line 2: duplicate id a");
    }

    #[test]
    fn load_corpus_rejects_malformed_json() {
        let f = write_lines(&[r#"{"id": "a", "text": "x", "timestamp": 1}"#, "{nope"]);
        let err = load_corpus(f.path(), &[]).unwrap_err();
        assert!(err.to_string().starts_with("line 2: invalid JSON"), "{err}");
    }

    #[test]
    fn corpus_rejects_overlapping_intervals() {
        let a = IntervalSpec::new("a", 0, 10).unwrap();
        let b = IntervalSpec::new("b", 5, 15).unwrap();
        assert!(matches!(
            Corpus::new(Vec::new(), vec![a, b]),
            Err(CorpusError::OverlappingIntervals(..))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let (corpus, _) = synth_corpus(3, 4, 0.1, 0.5, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let reloaded = load_corpus(&path, &[]).unwrap();
        assert_eq!(corpus, reloaded);
    }

    #[test]
    fn synth_zero_noise_yields_identical_tweets() {
        let (corpus, truth) = synth_corpus(1, 5, 0.0, 0.0, 42);
        assert_eq!(corpus.len(), 5);
        assert_eq!(truth.topics().len(), 1);
        let first = &corpus.tweets()[0].raw_text;
        assert!(corpus.tweets().iter().all(|t| &t.raw_text == first));
    }

    #[test]
    fn synth_zero_noise_within_topic_equality_excluding_hashtags() {
        let (corpus, truth) = synth_corpus(4, 6, 0.0, 0.7, 11);
        for (id, m) in truth.iter() {
            let tweet = corpus.get(id).unwrap();
            let body = tweet.raw_text.split(" #t").next().unwrap();
            assert_eq!(body, truth.topics()[m.topic]);
        }
    }

    #[test]
    fn synth_same_seed_byte_identical() {
        let (c1, t1) = synth_corpus(5, 10, 0.2, 0.5, 123);
        let (c2, t2) = synth_corpus(5, 10, 0.2, 0.5, 123);
        assert_eq!(c1, c2);
        assert_eq!(t1, t2);
        let (c3, _) = synth_corpus(5, 10, 0.2, 0.5, 124);
        assert_ne!(c1, c3);
    }

    #[test]
    fn synth_hashtag_count_is_binomial() {
        // Total tagged tweets over 30 seeds ~ Binomial(6000, 0.5):
        // mean 3000, sigma sqrt(1500) ~ 38.7; require within 4 sigma.
        let mut tagged = 0usize;
        for seed in 0..30 {
            let (corpus, _) = synth_corpus(10, 20, 0.05, 0.5, seed);
            assert_eq!(corpus.len(), 200);
            tagged += corpus
                .tweets()
                .iter()
                .filter(|t| !t.hashtags.is_empty())
                .count();
        }
        let dev = (tagged as f64 - 3000.0).abs();
        assert!(dev < 4.0 * 1500f64.sqrt(), "tagged {tagged} deviates {dev:.1}");
    }

    #[test]
    fn synth_truth_is_dense_and_complete() {
        let (corpus, truth) = synth_corpus(30, 3, 0.1, 0.3, 9);
        assert_eq!(truth.len(), corpus.len());
        assert_eq!(truth.topics().len(), 30);
        truth.validate_against(&corpus).unwrap();
        let mut seen = [false; 30];
        for (_, m) in truth.iter() {
            assert_eq!(m.ratio, 1.0);
            seen[m.topic] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn ground_truth_save_load() {
        let mut truth = GroundTruth::new(vec!["a".into(), "b".into()]);
        truth.insert("t1", 0, 1.0);
        truth.insert("t2", 1, 0.95);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.jsonl");
        truth.save(&path).unwrap();
        let loaded = GroundTruth::load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.get("t1"), Some(TopicMatch { topic: 0, ratio: 1.0 }));
        assert_eq!(loaded.get("t2"), Some(TopicMatch { topic: 1, ratio: 0.95 }));
        assert_eq!(loaded.topics().len(), 2);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(raw in ".*", word_level in proptest::bool::ANY) {
            let once = normalize(&raw, word_level);
            prop_assert_eq!(normalize(&once, word_level), once);
        }

        #[test]
        fn normalize_ascii_never_grows(raw in "[ -~]*") {
            let out = normalize(&raw, false);
            prop_assert!(out.chars().count() <= raw.chars().count());
        }

        #[test]
        fn normalize_output_clean(raw in ".*") {
            let out = normalize(&raw, false);
            prop_assert!(!out.contains("http://"));
            prop_assert!(!out.contains("https://"));
            // "No uppercase" means lowercasing is a no-op; some uppercase
            // code points (math alphanumerics) have no lowercase mapping.
            prop_assert_eq!(out.to_lowercase(), out.clone());
            prop_assert!(!out.starts_with("rt ") && out != "rt");
            for tok in out.split_whitespace() {
                prop_assert!(!(tok.len() > 1 && tok.starts_with('@')), "mention {} survived", tok);
            }
        }
    }
}
