//! Classic Porter suffix stemmer (the 1980 algorithm), implemented as a
//! single deterministic function over lowercase ASCII words.
//!
//! Tokens containing anything other than `a-z` (digits, non-ASCII) are
//! returned unchanged; suffix rules are only meaningful for plain English
//! words. Follows the reference implementation's conventions: step 2 maps
//! `bli`->`ble` and `logi`->`log`, step 1c requires a vowel in the stem.

fn is_cons(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => {
            if i == 0 {
                true
            } else {
                !is_cons(w, i - 1)
            }
        }
        _ => true,
    }
}

/// Number of VC sequences in the [C](VC)^m[V] decomposition of `w`.
fn measure(w: &[u8]) -> usize {
    let n = w.len();
    let mut m = 0;
    let mut i = 0;
    while i < n && is_cons(w, i) {
        i += 1;
    }
    loop {
        if i >= n {
            return m;
        }
        while i < n && !is_cons(w, i) {
            i += 1;
        }
        if i >= n {
            return m;
        }
        m += 1;
        while i < n && is_cons(w, i) {
            i += 1;
        }
    }
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_cons(w, i))
}

fn ends_double_cons(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_cons(w, n - 1)
}

/// *o condition: stem ends CVC where the final C is not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 || !is_cons(w, n - 3) || is_cons(w, n - 2) || !is_cons(w, n - 1) {
        return false;
    }
    !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn step1a(w: &mut Vec<u8>) {
    if w.ends_with(b"sses") || w.ends_with(b"ies") {
        w.truncate(w.len() - 2);
    } else if !w.ends_with(b"ss") && w.ends_with(b"s") {
        w.pop();
    }
}

fn step1b(w: &mut Vec<u8>) {
    if w.ends_with(b"eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            w.pop();
        }
        return;
    }
    let cut = if w.ends_with(b"ed") && has_vowel(&w[..w.len() - 2]) {
        2
    } else if w.ends_with(b"ing") && has_vowel(&w[..w.len() - 3]) {
        3
    } else {
        return;
    };
    w.truncate(w.len() - cut);
    if w.ends_with(b"at") || w.ends_with(b"bl") || w.ends_with(b"iz") {
        w.push(b'e');
    } else if ends_double_cons(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step1c(w: &mut [u8]) {
    let n = w.len();
    if n >= 2 && w[n - 1] == b'y' && has_vowel(&w[..n - 1]) {
        w[n - 1] = b'i';
    }
}

const STEP2: &[(&[u8], &[u8])] = &[
    (b"ational", b"ate"),
    (b"tional", b"tion"),
    (b"enci", b"ence"),
    (b"anci", b"ance"),
    (b"izer", b"ize"),
    (b"bli", b"ble"),
    (b"alli", b"al"),
    (b"entli", b"ent"),
    (b"eli", b"e"),
    (b"ousli", b"ous"),
    (b"ization", b"ize"),
    (b"ation", b"ate"),
    (b"ator", b"ate"),
    (b"alism", b"al"),
    (b"iveness", b"ive"),
    (b"fulness", b"ful"),
    (b"ousness", b"ous"),
    (b"aliti", b"al"),
    (b"iviti", b"ive"),
    (b"biliti", b"ble"),
    (b"logi", b"log"),
];

const STEP3: &[(&[u8], &[u8])] = &[
    (b"icate", b"ic"),
    (b"ative", b""),
    (b"alize", b"al"),
    (b"iciti", b"ic"),
    (b"ical", b"ic"),
    (b"ful", b""),
    (b"ness", b""),
];

fn rewrite_suffix(w: &mut Vec<u8>, table: &[(&[u8], &[u8])]) {
    for (suffix, replacement) in table {
        if w.ends_with(suffix) {
            let stem_len = w.len() - suffix.len();
            if measure(&w[..stem_len]) > 0 {
                w.truncate(stem_len);
                w.extend_from_slice(replacement);
            }
            return;
        }
    }
}

const STEP4: &[&[u8]] = &[
    b"al", b"ance", b"ence", b"er", b"ic", b"able", b"ible", b"ant",
    b"ement", b"ment", b"ent", b"ion", b"ou", b"ism", b"ate", b"iti",
    b"ous", b"ive", b"ize",
];

fn step4(w: &mut Vec<u8>) {
    for suffix in STEP4 {
        if w.ends_with(suffix) {
            let stem_len = w.len() - suffix.len();
            if *suffix == b"ion"
                && !(stem_len > 0 && matches!(w[stem_len - 1], b's' | b't'))
            {
                return;
            }
            if measure(&w[..stem_len]) > 1 {
                w.truncate(stem_len);
            }
            return;
        }
    }
}

fn step5(w: &mut Vec<u8>) {
    if w.ends_with(b"e") {
        let stem = &w[..w.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.pop();
        }
    }
    if measure(w) > 1 && ends_double_cons(w) && w.ends_with(b"l") {
        w.pop();
    }
}

/// Stem one lowercase token. Words of length <= 2 and tokens that are not
/// pure `a-z` pass through unchanged.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    rewrite_suffix(&mut w, STEP2);
    rewrite_suffix(&mut w, STEP3);
    step4(&mut w);
    step5(&mut w);
    String::from_utf8(w).expect("stemmer operates on ASCII")
}
