//! Word combinatorics over the alphabet `{0, 1, ..., d}`.
//!
//! A word `a1 a2 ... an` indexes the iterated Stratonovich integral `J_w`
//! (letter 0 integrates against time) and its Itô counterpart `I_w`.
//! Expectations are computed exactly as rational multiples of powers of `t`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{invalid, Result, SdeError};
use crate::model::SdeModel;

pub type Rational = Ratio<i128>;

/// Largest `n(w)` for which exact expectations fit in 128-bit rationals.
pub const MAX_EXACT_ORDER: u32 = 30;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    letters: Vec<u8>,
}

impl Word {
    pub fn new(letters: Vec<u8>) -> Word {
        Word { letters }
    }

    pub fn empty() -> Word {
        Word::default()
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Checks every letter lies in `{0, ..., d}`.
    pub fn check_alphabet(&self, d: u8) -> Result<()> {
        match self.letters.iter().find(|&&a| a > d) {
            Some(a) => Err(invalid("word", format!("letter {a} outside alphabet 0..={d}"))),
            None => Ok(()),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }
}

impl From<&[u8]> for Word {
    fn from(letters: &[u8]) -> Word {
        Word::new(letters.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("∅");
        }
        if self.letters.iter().all(|&a| a < 10) {
            for a in &self.letters {
                write!(f, "{a}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.letters.iter().map(|a| a.to_string()).collect();
            f.write_str(&parts.join(","))?;
            // a lone "12" would read back as two letters
            if parts.len() == 1 {
                f.write_str(",")?;
            }
            Ok(())
        }
    }
}

/// Parses `"1122"` (one digit per letter), `"1,12,3"` / `"1 12 3"` for
/// multi-digit letters, and `""` or `"∅"` for the empty word.
impl FromStr for Word {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() || s == "∅" {
            return Ok(Word::empty());
        }
        let separated = s.contains(|c: char| c == ',' || c.is_whitespace());
        let letters = if separated {
            s.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|p| !p.is_empty())
                .map(|p| {
                    p.parse::<u8>()
                        .map_err(|_| invalid("word", format!("bad letter {p:?}")))
                })
                .collect::<Result<Vec<u8>>>()?
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|v| v as u8)
                        .ok_or_else(|| invalid("word", format!("bad letter {c:?}")))
                })
                .collect::<Result<Vec<u8>>>()?
        };
        Ok(Word { letters })
    }
}

/// Block statistics of a word under greedy tiling by `{0, 11, 22, ...}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordStats {
    /// number of zero letters
    pub zeros: u32,
    /// number of `ii` blocks in the tiling
    pub pairs: u32,
    /// `zeros + pairs`
    pub order: u32,
    /// whether the tiling covers the word exactly
    pub in_d: bool,
}

pub fn decompose(word: &Word) -> WordStats {
    let w = word.letters();
    let mut zeros = 0;
    let mut pairs = 0;
    let mut in_d = true;
    let mut i = 0;
    while i < w.len() {
        if w[i] == 0 {
            zeros += 1;
            i += 1;
        } else if i + 1 < w.len() && w[i + 1] == w[i] {
            pairs += 1;
            i += 2;
        } else {
            in_d = false;
            i += 1;
        }
    }
    WordStats {
        zeros,
        pairs,
        order: zeros + pairs,
        in_d,
    }
}

/// Polynomial in `t` with rational coefficients, keyed by power.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    terms: BTreeMap<u32, Rational>,
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial::default()
    }

    pub fn monomial(coeff: Rational, power: u32) -> Polynomial {
        let mut p = Polynomial::zero();
        p.add_term(coeff, power);
        p
    }

    pub fn add_term(&mut self, coeff: Rational, power: u32) {
        if coeff.is_zero() {
            return;
        }
        let c = self.terms.entry(power).or_insert_with(Rational::zero);
        *c += coeff;
        if c.is_zero() {
            self.terms.remove(&power);
        }
    }

    pub fn add_scaled(&mut self, other: &Polynomial, scale: Rational) {
        for (&p, &c) in &other.terms {
            self.add_term(c * scale, p);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, power: u32) -> Rational {
        self.terms.get(&power).copied().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&p, c)| (*c.numer() as f64 / *c.denom() as f64) * t.powi(p as i32))
            .sum()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(p, c)| format!("({c}) t^{p}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

fn half_pow(k: u32) -> Rational {
    Rational::new(1, 1i128 << k)
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_EXACT_ORDER {
        return Err(SdeError::Unsupported(format!(
            "exact expectation for order {order} exceeds {MAX_EXACT_ORDER}"
        )));
    }
    Ok(())
}

/// `E J_w(t) = t^n / (2^d n!)` on `D*`, zero elsewhere.
pub fn expected_stratonovich_exact(word: &Word) -> Result<Polynomial> {
    let s = decompose(word);
    if !s.in_d {
        return Ok(Polynomial::zero());
    }
    check_order(s.order)?;
    // 30! fits in i128 but 2^30 * 30! does not
    let denom = factorial(s.order).checked_mul(1i128 << s.pairs).ok_or_else(|| {
        SdeError::Unsupported(format!("2^{} * {}! overflows exact arithmetic", s.pairs, s.order))
    })?;
    Ok(Polynomial::monomial(Rational::new(1, denom), s.order))
}

pub fn expected_stratonovich(word: &Word, t: f64) -> f64 {
    let s = decompose(word);
    if !s.in_d {
        return 0.0;
    }
    let fact: f64 = (1..=s.order).map(|k| k as f64).product();
    t.powi(s.order as i32) / (2f64.powi(s.pairs as i32) * fact)
}

/// `E I_w(t)`: zero when any letter is nonzero, `t^k / k!` for `0^k`.
pub fn expected_ito_exact(word: &Word) -> Result<Polynomial> {
    if word.letters().iter().any(|&a| a != 0) {
        return Ok(Polynomial::zero());
    }
    let k = word.len() as u32;
    check_order(k)?;
    Ok(Polynomial::monomial(
        Rational::new(1, factorial(k)),
        k,
    ))
}

pub fn expected_ito(word: &Word, t: f64) -> f64 {
    if word.letters().iter().any(|&a| a != 0) {
        return 0.0;
    }
    let k = word.len() as i32;
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    t.powi(k) / fact
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItoTerm {
    pub coeff: Rational,
    pub word: Word,
}

/// Stratonovich integral `J_w` as a combination of Itô integrals, for
/// `|w| <= 4`.
pub fn strat_to_ito(word: &Word) -> Result<Vec<ItoTerm>> {
    let w = word.letters();
    let same = |x: u8, y: u8| x == y && x != 0;
    let half = Rational::new(1, 2);
    let term = |coeff: Rational, letters: &[u8]| ItoTerm {
        coeff,
        word: Word::from(letters),
    };
    let mut out = vec![term(Rational::one(), w)];
    match *w {
        [] | [_] => {}
        [a1, a2] => {
            if same(a1, a2) {
                out.push(term(half, &[0]));
            }
        }
        [a1, a2, a3] => {
            if same(a1, a2) {
                out.push(term(half, &[0, a3]));
            }
            if same(a2, a3) {
                out.push(term(half, &[a1, 0]));
            }
        }
        [a1, a2, a3, a4] => {
            if same(a1, a2) && same(a3, a4) {
                out.push(term(Rational::new(1, 4), &[0, 0]));
            }
            if same(a1, a2) {
                out.push(term(half, &[0, a3, a4]));
            }
            if same(a2, a3) {
                out.push(term(half, &[a1, 0, a4]));
            }
            if same(a3, a4) {
                out.push(term(half, &[a1, a2, 0]));
            }
        }
        _ => {
            return Err(SdeError::Unsupported(format!(
                "Stratonovich-to-Itô relation for word length {} (max 4)",
                w.len()
            )))
        }
    }
    Ok(out)
}

/// `E J_w` computed through the Itô expansion.
pub fn expected_via_ito(word: &Word) -> Result<Polynomial> {
    let mut acc = Polynomial::zero();
    for t in strat_to_ito(word)? {
        acc.add_scaled(&expected_ito_exact(&t.word)?, t.coeff);
    }
    Ok(acc)
}

/// All words of length `len` over `{0, ..., d}`, lexicographic.
pub fn words_of_length(d: u8, len: usize) -> impl Iterator<Item = Word> {
    let base = d as u64 + 1;
    let count = base.pow(len as u32);
    (0..count).map(move |mut code| {
        let mut letters = vec![0u8; len];
        for slot in letters.iter_mut().rev() {
            *slot = (code % base) as u8;
            code /= base;
        }
        Word::new(letters)
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central-difference `dV_i(y)[v]` with step `eps^(1/3) (1 + |y|)` along `v/|v|`.
pub fn fd_directional_derivative(model: &dyn SdeModel, i: usize, y: &[f64], v: &[f64]) -> Vec<f64> {
    let vn = norm(v);
    if vn == 0.0 {
        return vec![0.0; model.state_dim()];
    }
    let step = f64::EPSILON.cbrt() * (1.0 + norm(y));
    let plus: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + step * b / vn).collect();
    let minus: Vec<f64> = y.iter().zip(v).map(|(a, b)| a - step * b / vn).collect();
    model
        .diffusion(i, &plus)
        .iter()
        .zip(model.diffusion(i, &minus))
        .map(|(p, m)| (p - m) / (2.0 * step) * vn)
        .collect()
}

/// `dV_i(y)[v]`: analytic when the model provides it, else central differences.
pub fn directional_derivative(model: &dyn SdeModel, i: usize, y: &[f64], v: &[f64]) -> Vec<f64> {
    model
        .diffusion_derivative(i, y, v)
        .unwrap_or_else(|| fd_directional_derivative(model, i, y, v))
}

/// `sum_i dV_i(y)[V_i(y)]`, the Itô–Stratonovich correction before halving.
fn correction(model: &dyn SdeModel, y: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; model.state_dim()];
    for i in 0..model.noise_dim() {
        let vi = model.diffusion(i, y);
        for (a, c) in acc.iter_mut().zip(directional_derivative(model, i, y, &vi)) {
            *a += c;
        }
    }
    acc
}

/// `V0(y) = V0~(y) - (1/2) sum_i dV_i(y)[V_i(y)]`.
pub fn ito_drift_to_strat(model: &dyn SdeModel, y: &[f64]) -> Vec<f64> {
    let c = correction(model, y);
    model
        .drift_ito(y)
        .iter()
        .zip(c)
        .map(|(d, c)| d - 0.5 * c)
        .collect()
}

/// Inverse of [`ito_drift_to_strat`] for a given Stratonovich drift value.
pub fn strat_drift_to_ito(model: &dyn SdeModel, y: &[f64], strat: &[f64]) -> Vec<f64> {
    let c = correction(model, y);
    strat.iter().zip(c).map(|(d, c)| d + 0.5 * c).collect()
}

/// Stratonovich drift, supplied or derived.
pub fn stratonovich_drift(model: &dyn SdeModel, y: &[f64]) -> Vec<f64> {
    model
        .drift_strat(y)
        .unwrap_or_else(|| ito_drift_to_strat(model, y))
}

/// `[V_i, V_j](y) = dV_j(y)[V_i(y)] - dV_i(y)[V_j(y)]`.
pub fn lie_bracket(model: &dyn SdeModel, i: usize, j: usize, y: &[f64]) -> Vec<f64> {
    let vi = model.diffusion(i, y);
    let vj = model.diffusion(j, y);
    directional_derivative(model, j, y, &vi)
        .iter()
        .zip(directional_derivative(model, i, y, &vj))
        .map(|(a, b)| a - b)
        .collect()
}

/// Outcome of expanding `(V0 + (1/2) sum V_ii)^k` over `D`-blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupReport {
    pub d: u8,
    pub k: u32,
    pub words: usize,
    pub expected_count: usize,
    /// expansion multiset equals `{((1/2)^d(w), w) : w in D*, n(w) = k}`
    pub expansion_matches: bool,
    /// `E J_w(t) = coefficient * t^k / k!` for every expanded word
    pub expectation_matches: bool,
}

impl SemigroupReport {
    pub fn passed(&self) -> bool {
        self.expansion_matches && self.expectation_matches && self.words == self.expected_count
    }
}

pub fn semigroup_coefficient_check(d: u8, k: u32) -> Result<SemigroupReport> {
    if d == 0 || d > 3 || k > 4 {
        return Err(invalid("d,k", format!("need 1 <= d <= 3 and k <= 4, got d={d}, k={k}")));
    }
    let half = Rational::new(1, 2);
    // formal expansion: every sequence of k blocks, block coefficient 1 or 1/2
    let mut expansion: BTreeMap<Word, Rational> = BTreeMap::new();
    expansion.insert(Word::empty(), Rational::one());
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for (w, c) in &expansion {
            next.insert(w.concat(&Word::new(vec![0])), *c);
            for i in 1..=d {
                *next
                    .entry(w.concat(&Word::new(vec![i, i])))
                    .or_insert_with(Rational::zero) += *c * half;
            }
        }
        expansion = next;
    }
    // direct enumeration of D* words with n(w) = k
    let mut direct: BTreeMap<Word, Rational> = BTreeMap::new();
    for len in k as usize..=2 * k as usize {
        for w in words_of_length(d, len) {
            let s = decompose(&w);
            if s.in_d && s.order == k {
                direct.insert(w, half_pow(s.pairs));
            }
        }
    }
    let inv_fact = Rational::new(1, factorial(k));
    let mut expectation_matches = true;
    for (w, c) in &expansion {
        let e = expected_stratonovich_exact(w)?;
        if e != Polynomial::monomial(*c * inv_fact, k) {
            expectation_matches = false;
        }
    }
    Ok(SemigroupReport {
        d,
        k,
        words: expansion.len(),
        expected_count: (d as usize + 1).pow(k),
        expansion_matches: expansion == direct,
        expectation_matches,
    })
}

/// One named check of the word-identity suite.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Exact identities tying the `E J_w` formula to the Itô relations and the
/// semigroup expansion.
pub fn identity_suite() -> Vec<IdentityCheck> {
    let mut checks = Vec::new();
    for d in 1..=3u8 {
        let mut total = 0;
        let mut failures = Vec::new();
        for len in 0..=4 {
            for w in words_of_length(d, len) {
                total += 1;
                let direct = expected_stratonovich_exact(&w);
                let via = expected_via_ito(&w);
                match (direct, via) {
                    (Ok(a), Ok(b)) if a == b => {}
                    (a, b) => failures.push(format!("{w}: {a:?} vs {b:?}")),
                }
            }
        }
        checks.push(IdentityCheck {
            name: format!("E J_w = E(strat_to_ito(w)), d={d}, |w|<=4"),
            passed: failures.is_empty(),
            detail: if failures.is_empty() {
                format!("{total} words agree")
            } else {
                failures.join("; ")
            },
        });
    }
    for d in 1..=3u8 {
        for k in 1..=4u32 {
            let (passed, detail) = match semigroup_coefficient_check(d, k) {
                Ok(r) => (r.passed(), format!("{} words, expected {}", r.words, r.expected_count)),
                Err(e) => (false, e.to_string()),
            };
            checks.push(IdentityCheck {
                name: format!("semigroup expansion d={d}, k={k}"),
                passed,
                detail,
            });
        }
    }
    let jii = expected_stratonovich_exact(&Word::new(vec![1, 1]))
        .map(|p| p == Polynomial::monomial(Rational::new(1, 2), 1))
        .unwrap_or(false);
    checks.push(IdentityCheck {
        name: "E J_ii = h/2".into(),
        passed: jii,
        detail: String::new(),
    });
    let off = expected_stratonovich_exact(&Word::new(vec![1, 2]))
        .map(|p| p.is_zero())
        .unwrap_or(false);
    checks.push(IdentityCheck {
        name: "E J_12 = 0".into(),
        passed: off,
        detail: String::new(),
    });
    checks
}
