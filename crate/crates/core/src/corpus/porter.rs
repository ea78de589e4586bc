//! Porter suffix-stripping stemmer.
//!
//! Faithful port of the reference C implementation, including its two
//! revisions to the originally published rule table (step 2 maps `bli` to
//! `ble` and adds `logi` to `log`). Operates on lowercase ASCII; tokens with
//! any non-ASCII-alphabetic byte are returned unchanged.

struct Stemmer<'a> {
    b: &'a mut [u8],
    /// Index of the last letter of the current (shrinking) word.
    k: usize,
    /// Index of the last letter of the stem once a suffix has been matched.
    j: usize,
}

impl<'a> Stemmer<'a> {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => {
                if i == 0 {
                    true
                } else {
                    !self.is_consonant(i - 1)
                }
            }
            _ => true,
        }
    }

    /// Number of vowel-consonant sequences in b[0..=j].
    fn measure(&self) -> usize {
        let mut n = 0;
        let mut i = 0;
        loop {
            if i > self.j {
                return n;
            }
            if !self.is_consonant(i) {
                break;
            }
            i += 1;
        }
        i += 1;
        loop {
            loop {
                if i > self.j {
                    return n;
                }
                if self.is_consonant(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
            n += 1;
            loop {
                if i > self.j {
                    return n;
                }
                if !self.is_consonant(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
        }
    }

    fn vowel_in_stem(&self) -> bool {
        if self.j == usize::MAX {
            return false; // suffix consumed the whole word
        }
        (0..=self.j).any(|i| !self.is_consonant(i))
    }

    fn double_consonant(&self, i: usize) -> bool {
        i >= 1 && self.b[i] == self.b[i - 1] && self.is_consonant(i)
    }

    /// consonant-vowel-consonant ending at i, where the final consonant is
    /// not w, x or y; signals a short stem like "hop" that takes back an 'e'.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.is_consonant(i) || self.is_consonant(i - 1) || !self.is_consonant(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    fn ends(&mut self, s: &[u8]) -> bool {
        let len = s.len();
        if len > self.k + 1 {
            return false;
        }
        let start = self.k + 1 - len;
        if &self.b[start..=self.k] == s {
            // j marks the last stem letter; usize::MAX flags an empty stem.
            self.j = if start == 0 { usize::MAX } else { start - 1 };
            true
        } else {
            false
        }
    }

    fn stem_len(&self) -> usize {
        if self.j == usize::MAX {
            0
        } else {
            self.j + 1
        }
    }

    fn m(&self) -> usize {
        if self.j == usize::MAX {
            0
        } else {
            self.measure()
        }
    }

    fn set_to(&mut self, s: &[u8]) {
        let start = self.stem_len();
        self.b[start..start + s.len()].copy_from_slice(s);
        self.k = start + s.len() - 1;
    }

    fn replace_if_m(&mut self, s: &[u8]) {
        if self.m() > 0 {
            self.set_to(s);
        }
    }

    fn step1ab(&mut self) {
        if self.b[self.k] == b's' {
            if self.ends(b"sses") {
                self.k -= 2;
            } else if self.ends(b"ies") {
                self.set_to(b"i");
            } else if self.b[self.k - 1] != b's' {
                self.k -= 1;
            }
        }
        if self.ends(b"eed") {
            if self.m() > 0 {
                self.k -= 1;
            }
        } else if (self.ends(b"ed") || self.ends(b"ing")) && self.vowel_in_stem() {
            self.k = self.j; // safe: vowel_in_stem implies a nonempty stem
            if self.ends(b"at") {
                self.set_to(b"ate");
            } else if self.ends(b"bl") {
                self.set_to(b"ble");
            } else if self.ends(b"iz") {
                self.set_to(b"ize");
            } else if self.double_consonant(self.k) {
                self.k -= 1;
                if matches!(self.b[self.k], b'l' | b's' | b'z') {
                    self.k += 1;
                }
            } else if self.measure_at_k() == 1 && self.cvc(self.k) {
                self.set_to_e();
            }
        }
    }

    fn measure_at_k(&mut self) -> usize {
        self.j = self.k;
        self.measure()
    }

    fn set_to_e(&mut self) {
        self.k += 1;
        self.b[self.k] = b'e';
    }

    fn step1c(&mut self) {
        if self.ends(b"y") && self.vowel_in_stem() {
            self.b[self.k] = b'i';
        }
    }

    // Arms keep the uniform suffix-table layout even when single-entry.
    #[allow(clippy::collapsible_match)]
    fn step2(&mut self) {
        if self.k == 0 {
            return;
        }
        match self.b[self.k - 1] {
            b'a' => {
                if self.ends(b"ational") {
                    self.replace_if_m(b"ate");
                } else if self.ends(b"tional") {
                    self.replace_if_m(b"tion");
                }
            }
            b'c' => {
                if self.ends(b"enci") {
                    self.replace_if_m(b"ence");
                } else if self.ends(b"anci") {
                    self.replace_if_m(b"ance");
                }
            }
            b'e' => {
                if self.ends(b"izer") {
                    self.replace_if_m(b"ize");
                }
            }
            b'l' => {
                if self.ends(b"bli") {
                    self.replace_if_m(b"ble");
                } else if self.ends(b"alli") {
                    self.replace_if_m(b"al");
                } else if self.ends(b"entli") {
                    self.replace_if_m(b"ent");
                } else if self.ends(b"eli") {
                    self.replace_if_m(b"e");
                } else if self.ends(b"ousli") {
                    self.replace_if_m(b"ous");
                }
            }
            b'o' => {
                if self.ends(b"ization") {
                    self.replace_if_m(b"ize");
                } else if self.ends(b"ation") || self.ends(b"ator") {
                    self.replace_if_m(b"ate");
                }
            }
            b's' => {
                if self.ends(b"alism") {
                    self.replace_if_m(b"al");
                } else if self.ends(b"iveness") {
                    self.replace_if_m(b"ive");
                } else if self.ends(b"fulness") {
                    self.replace_if_m(b"ful");
                } else if self.ends(b"ousness") {
                    self.replace_if_m(b"ous");
                }
            }
            b't' => {
                if self.ends(b"aliti") {
                    self.replace_if_m(b"al");
                } else if self.ends(b"iviti") {
                    self.replace_if_m(b"ive");
                } else if self.ends(b"biliti") {
                    self.replace_if_m(b"ble");
                }
            }
            b'g' => {
                if self.ends(b"logi") {
                    self.replace_if_m(b"log");
                }
            }
            _ => {}
        }
    }

    #[allow(clippy::collapsible_match)]
    fn step3(&mut self) {
        match self.b[self.k] {
            b'e' => {
                if self.ends(b"icate") {
                    self.replace_if_m(b"ic");
                } else if self.ends(b"ative") {
                    self.replace_if_m(b"");
                } else if self.ends(b"alize") {
                    self.replace_if_m(b"al");
                }
            }
            b'i' => {
                if self.ends(b"iciti") {
                    self.replace_if_m(b"ic");
                }
            }
            b'l' => {
                if self.ends(b"ical") {
                    self.replace_if_m(b"ic");
                } else if self.ends(b"ful") {
                    self.replace_if_m(b"");
                }
            }
            b's' => {
                if self.ends(b"ness") {
                    self.replace_if_m(b"");
                }
            }
            _ => {}
        }
    }

    fn step4(&mut self) {
        if self.k == 0 {
            return;
        }
        let matched = match self.b[self.k - 1] {
            b'a' => self.ends(b"al"),
            b'c' => self.ends(b"ance") || self.ends(b"ence"),
            b'e' => self.ends(b"er"),
            b'i' => self.ends(b"ic"),
            b'l' => self.ends(b"able") || self.ends(b"ible"),
            b'n' => self.ends(b"ant") || self.ends(b"ement") || self.ends(b"ment") || self.ends(b"ent"),
            b'o' => {
                (self.ends(b"ion")
                    && self.j != usize::MAX
                    && matches!(self.b[self.j], b's' | b't'))
                    || self.ends(b"ou")
            }
            b's' => self.ends(b"ism"),
            b't' => self.ends(b"ate") || self.ends(b"iti"),
            b'u' => self.ends(b"ous"),
            b'v' => self.ends(b"ive"),
            b'z' => self.ends(b"ize"),
            _ => false,
        };
        if matched && self.m() > 1 {
            self.k = self.j;
        }
    }

    fn step5(&mut self) {
        self.j = self.k;
        if self.b[self.k] == b'e' {
            let a = self.measure();
            if a > 1 || (a == 1 && !self.cvc(self.k - 1)) {
                self.k -= 1;
            }
        }
        if self.b[self.k] == b'l' && self.double_consonant(self.k) && {
            self.j = self.k;
            self.measure() > 1
        } {
            self.k -= 1;
        }
    }
}

/// Stem a single lowercase token.
pub fn stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|c| c.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut buf = token.as_bytes().to_vec();
    let k = buf.len() - 1;
    let mut st = Stemmer { b: &mut buf, k, j: 0 };
    st.step1ab();
    if st.k > 0 {
        st.step1c();
        st.step2();
        st.step3();
        st.step4();
        st.step5();
    }
    let end = st.k + 1;
    String::from_utf8_lossy(&buf[..end]).into_owned()
}

#[cfg(test)]
mod tests {
    use super::stem;

    fn check(pairs: &[(&str, &str)]) {
        for (input, expect) in pairs {
            assert_eq!(stem(input), *expect, "stem({input:?})");
        }
    }

    #[test]
    fn short_tokens_unchanged() {
        check(&[("a", "a"), ("is", "is"), ("at", "at")]);
    }

    #[test]
    fn plurals_and_ed_ing() {
        check(&[
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("troubled", "troubl"),
            ("sized", "size"),
            ("hopping", "hop"),
            ("tanned", "tan"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("fizzed", "fizz"),
            ("failing", "fail"),
            ("filing", "file"),
        ]);
    }

    #[test]
    fn y_to_i() {
        check(&[("happy", "happi"), ("sky", "sky")]);
    }

    #[test]
    fn step2_suffix_table() {
        check(&[
            ("relational", "relat"),
            ("conditional", "condit"),
            ("rational", "ration"),
            ("valenci", "valenc"),
            ("hesitanci", "hesit"),
            ("digitizer", "digit"),
            ("conformabli", "conform"),
            ("radicalli", "radic"),
            ("differentli", "differ"),
            ("vileli", "vile"),
            ("analogousli", "analog"),
            ("vietnamization", "vietnam"),
            ("predication", "predic"),
            ("operator", "oper"),
            ("feudalism", "feudal"),
            ("decisiveness", "decis"),
            ("hopefulness", "hope"),
            ("callousness", "callous"),
            ("formaliti", "formal"),
            ("sensitiviti", "sensit"),
            ("sensibiliti", "sensibl"),
        ]);
    }

    #[test]
    fn step3_step4_step5() {
        check(&[
            ("triplicate", "triplic"),
            ("formative", "form"),
            ("formalize", "formal"),
            ("electriciti", "electr"),
            ("electrical", "electr"),
            ("hopeful", "hope"),
            ("goodness", "good"),
            ("revival", "reviv"),
            ("allowance", "allow"),
            ("inference", "infer"),
            ("airliner", "airlin"),
            ("gyroscopic", "gyroscop"),
            ("adjustable", "adjust"),
            ("defensible", "defens"),
            ("irritant", "irrit"),
            ("replacement", "replac"),
            ("adjustment", "adjust"),
            ("dependent", "depend"),
            ("adoption", "adopt"),
            ("communism", "commun"),
            ("activate", "activ"),
            ("angulariti", "angular"),
            ("homologous", "homolog"),
            ("effective", "effect"),
            ("bowdlerize", "bowdler"),
            ("probate", "probat"),
            ("rate", "rate"),
            ("cease", "ceas"),
            ("controll", "control"),
            ("roll", "roll"),
        ]);
    }

    #[test]
    fn multi_step_chains() {
        check(&[
            ("generalizations", "gener"),
            ("oscillators", "oscil"),
            ("friends", "friend"),
            ("suicide", "suicid"),
            ("insurgencies", "insurg"),
            ("detonated", "deton"),
            ("explosive", "explos"),
            ("vehicles", "vehicl"),
            ("wounded", "wound"),
            ("injuries", "injuri"),
        ]);
    }

    #[test]
    fn non_ascii_passthrough() {
        assert_eq!(stem("caf\u{e9}s"), "caf\u{e9}s");
    }

    #[test]
    fn output_is_lowercase_alphabetic() {
        for word in ["bizarre", "quizzical", "syzygy", "rhythm", "aaa", "zzz", "yearly"] {
            let s = stem(word);
            assert!(!s.is_empty());
            assert!(s.bytes().all(|c| c.is_ascii_lowercase()));
        }
    }
}
