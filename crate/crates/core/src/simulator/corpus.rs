use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::textpipe::Tokenizer;

/// Nouns with a single accepted rendering.
const NOUNS: [(&str, &str); 8] = [
    ("printer", "imprimante"),
    ("cable", "fil"),
    ("report", "rapport"),
    ("user", "utilisateur"),
    ("disk", "disque"),
    ("menu", "menu"),
    ("server", "serveur"),
    ("network", "reseau"),
];

/// Terminology: `(source, general rendering, client rendering)`.
pub const TERMS: [(&str, &str, &str); 5] = [
    ("file", "fichier", "dossier"),
    ("screen", "ecran", "moniteur"),
    ("key", "cle", "touche"),
    ("account", "compte", "profil"),
    ("window", "fenetre", "volet"),
];

const ADJECTIVES: [(&str, &str); 6] = [
    ("new", "nouveau"),
    ("old", "ancien"),
    ("main", "principal"),
    ("shared", "partage"),
    ("local", "local"),
    ("large", "grand"),
];

const VERBS: [(&str, &str); 6] = [
    ("open", "ouvrez"),
    ("close", "fermez"),
    ("delete", "supprimez"),
    ("update", "actualisez"),
    ("check", "verifiez"),
    ("save", "enregistrez"),
];

const STATES: [(&str, &str); 5] = [
    ("ready", "pret"),
    ("broken", "casse"),
    ("empty", "vide"),
    ("locked", "verrouille"),
    ("visible", "visible"),
];

/// Shape of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub train_size: usize,
    pub test_size: usize,
    /// Share of terminology occurrences in the training data rendered
    /// with the client's preferred term.
    pub client_rate: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            train_size: 200,
            test_size: 100,
            client_rate: 0.1,
            seed: 1,
        }
    }
}

/// Parallel data for a simulated project: generic training material and
/// a client document that uses its own terminology throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
}

struct Noun {
    src: &'static str,
    general: &'static str,
    client: &'static str,
}

fn nouns() -> Vec<Noun> {
    let mut all: Vec<Noun> = NOUNS
        .iter()
        .map(|&(s, t)| Noun { src: s, general: t, client: t })
        .collect();
    all.extend(TERMS.iter().map(|&(s, g, c)| Noun { src: s, general: g, client: c }));
    all
}

fn sentence(rng: &mut ChaCha8Rng, head: &Noun, other: &Noun, client_head: bool, client_other: bool) -> (String, String) {
    let (src, tgt) = template(rng, head, other, client_head, client_other);
    let t = Tokenizer::new();
    (t.detokenize(&t.tokenize(&src)), t.detokenize(&t.tokenize(&tgt)))
}

fn template(rng: &mut ChaCha8Rng, head: &Noun, other: &Noun, client_head: bool, client_other: bool) -> (String, String) {
    let n = if client_head { head.client } else { head.general };
    let n2 = if client_other { other.client } else { other.general };
    let (adj, adj_t) = *ADJECTIVES.choose(rng).unwrap();
    let (verb, verb_t) = *VERBS.choose(rng).unwrap();
    let (state, state_t) = *STATES.choose(rng).unwrap();
    match rng.gen_range(0..5) {
        0 => (
            format!("the {adj} {} is {state} .", head.src),
            format!("le {n} {adj_t} est {state_t} ."),
        ),
        1 => (format!("{verb} the {} .", head.src), format!("{verb_t} le {n} .")),
        2 => (
            format!("{verb} the {adj} {} now .", head.src),
            format!("{verb_t} le {n} {adj_t} maintenant ."),
        ),
        3 => (
            format!("the {} of the {} is {state} .", head.src, other.src),
            format!("le {n} du {n2} est {state_t} ."),
        ),
        _ => (
            format!("do not {verb} the {} !", head.src),
            format!("ne {verb_t} pas le {n} !"),
        ),
    }
}

/// Templated sentence pairs over a small controlled vocabulary, in
/// detokenized form.
///
/// Training pairs draw nouns uniformly and render terminology with the
/// general term except for a `client_rate` minority. Every test pair
/// centres on a terminology noun and always uses the client's terms, so a
/// static system keeps producing the general term while an adapting one
/// can pick up the preference from earlier confirmations.
pub fn generate(spec: &CorpusSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let all = nouns();
    let terms = &all[NOUNS.len()..];
    let mut train = Vec::with_capacity(spec.train_size);
    for _ in 0..spec.train_size {
        let head = all.choose(&mut rng).unwrap();
        let other = all.choose(&mut rng).unwrap();
        let client_head = rng.gen_bool(spec.client_rate);
        let client_other = rng.gen_bool(spec.client_rate);
        train.push(sentence(&mut rng, head, other, client_head, client_other));
    }
    let mut test = Vec::with_capacity(spec.test_size);
    for _ in 0..spec.test_size {
        let head = terms.choose(&mut rng).unwrap();
        let other = all.choose(&mut rng).unwrap();
        test.push(sentence(&mut rng, head, other, true, true));
    }
    SyntheticCorpus { train, test }
}
