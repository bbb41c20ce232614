use std::collections::BTreeMap;

/// Multiset of n-grams: term -> count.
pub type NgramBag = BTreeMap<String, usize>;

/// Unigrams plus adjacent-pair bigrams joined by a single space.
pub fn build_ngrams<S: AsRef<str>>(tokens: &[S]) -> NgramBag {
    let mut bag = NgramBag::new();
    for t in tokens {
        *bag.entry(t.as_ref().to_owned()).or_default() += 1;
    }
    for pair in tokens.windows(2) {
        let bigram = format!("{} {}", pair[0].as_ref(), pair[1].as_ref());
        *bag.entry(bigram).or_default() += 1;
    }
    bag
}
