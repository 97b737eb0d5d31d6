//! Synthetic sparse/frequent/irrelevant token datasets.
//!
//! A vocabulary of `M` one-hot tokens is split into per-label sparse
//! singletons, per-label frequent subsets of size `m`, and an irrelevant
//! remainder. Each generated sequence carries `n_s` sparse tokens matching
//! its label, `n_f` frequent tokens with a label-leaning majority
//! controlled by `n_d`, and irrelevant tokens elsewhere. The OOD test
//! variant swaps the sparse tokens to the opposite label's singleton.
//!
//! Token ids are 1-based: id `i` is the basis vector `e_i`, placed at
//! 0-based column `i − 1` of the one-hot matrix.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// 1-based token id into the vocabulary `{e_1, …, e_M}`.
pub type TokenId = usize;

/// Position role within a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// Sparse position (token from the label's sparse singleton, or the
    /// opposite one for OOD data).
    Sparse,
    /// Frequent position with a token from the label's frequent subset.
    FrequentSame,
    /// Frequent position with a token from the opposite frequent subset.
    FrequentOpposite,
    /// Irrelevant position.
    Irrelevant,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Sparse => "s",
            Role::FrequentSame => "f+",
            Role::FrequentOpposite => "f-",
            Role::Irrelevant => "i",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "s" => Ok(Role::Sparse),
            "f+" => Ok(Role::FrequentSame),
            "f-" => Ok(Role::FrequentOpposite),
            "i" => Ok(Role::Irrelevant),
            other => Err(CoreError::Config(format!("unknown role tag `{other}`"))),
        }
    }
}

/// Which distribution a dataset was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Train,
    TestId,
    TestOod,
}

impl DatasetKind {
    pub fn tag(self) -> &'static str {
        match self {
            DatasetKind::Train => "train",
            DatasetKind::TestId => "test_id",
            DatasetKind::TestOod => "test_ood",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "train" => Ok(DatasetKind::Train),
            "test_id" => Ok(DatasetKind::TestId),
            "test_ood" => Ok(DatasetKind::TestOod),
            other => Err(CoreError::Config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

/// Hyperparameters of the synthetic task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticParams {
    /// Sequence length.
    pub seq_len: usize,
    /// Vocabulary size `M`.
    pub vocab_size: usize,
    /// Frequent-subset size `m` (per label).
    pub freq_subset: usize,
    /// Sparse token count per sequence.
    pub n_sparse: usize,
    /// Frequent token count per sequence.
    pub n_frequent: usize,
    /// Frequent imbalance parameter.
    pub n_disparity: usize,
    /// Token dimension; must be at least `M`.
    pub d_tok: usize,
}

impl SyntheticParams {
    /// Default vocabulary size for a given `m`: the `2m + 2` structured
    /// tokens plus a 20% irrelevant margin.
    pub fn default_vocab_size(freq_subset: usize) -> usize {
        let structured = 2 * freq_subset + 2;
        structured + structured.div_ceil(5)
    }

    pub fn new(
        seq_len: usize,
        vocab_size: usize,
        freq_subset: usize,
        n_sparse: usize,
        n_frequent: usize,
        n_disparity: usize,
        d_tok: usize,
    ) -> Result<Self> {
        let p = Self {
            seq_len,
            vocab_size,
            freq_subset,
            n_sparse,
            n_frequent,
            n_disparity,
            d_tok,
        };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor with `M` defaulted from `m` (floored at the
    /// sequence length so one-hot inputs fit the attention head) and
    /// `d_tok = M`.
    pub fn with_defaults(
        seq_len: usize,
        freq_subset: usize,
        n_sparse: usize,
        n_frequent: usize,
        n_disparity: usize,
    ) -> Result<Self> {
        let vocab = Self::default_vocab_size(freq_subset).max(seq_len);
        Self::new(
            seq_len,
            vocab,
            freq_subset,
            n_sparse,
            n_frequent,
            n_disparity,
            vocab,
        )
    }

    /// Invariants the vocabulary layout itself needs; sequence generation
    /// additionally requires [`Self::validate`].
    fn validate_vocab(&self) -> Result<()> {
        let fail = |msg: String| Err(CoreError::Config(msg));
        if self.freq_subset == 0 {
            return fail("m >= 1 violated: m=0".into());
        }
        if !(2 * self.freq_subset + 2 < self.vocab_size) {
            return fail(format!(
                "2m + 2 < M violated: 2m+2={} M={}",
                2 * self.freq_subset + 2,
                self.vocab_size
            ));
        }
        if !(self.d_tok >= self.vocab_size) {
            return fail(format!(
                "d_tok >= M violated: d_tok={} M={}",
                self.d_tok, self.vocab_size
            ));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_vocab()?;
        let fail = |msg: String| Err(CoreError::Config(msg));
        if !(self.n_sparse < self.n_frequent) {
            return fail(format!(
                "n_s < n_f violated: n_s={} n_f={}",
                self.n_sparse, self.n_frequent
            ));
        }
        let bound = self.freq_subset.min(self.seq_len - self.n_sparse.min(self.seq_len));
        if !(self.n_frequent < bound) {
            return fail(format!(
                "n_f < min(m, T - n_s) violated: n_f={} min({}, {})",
                self.n_frequent,
                self.freq_subset,
                self.seq_len - self.n_sparse.min(self.seq_len)
            ));
        }
        if !(self.n_disparity <= self.n_frequent) {
            return fail(format!(
                "n_d <= n_f violated: n_d={} n_f={}",
                self.n_disparity, self.n_frequent
            ));
        }
        Ok(())
    }

    /// `⌊(n_f + n_d)/2⌋`: frequent positions carrying the label's own
    /// frequent tokens.
    pub fn n_freq_same(&self) -> usize {
        (self.n_frequent + self.n_disparity) / 2
    }

    pub fn n_freq_opposite(&self) -> usize {
        self.n_frequent - self.n_freq_same()
    }

    pub fn n_irrelevant(&self) -> usize {
        self.seq_len - self.n_frequent - self.n_sparse
    }
}

/// Coarse classification of a token id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    SparsePlus,
    SparseMinus,
    FrequentPlus,
    FrequentMinus,
    Irrelevant,
}

/// Validated vocabulary view over [`SyntheticParams`].
#[derive(Debug, Clone, Copy)]
pub struct Vocabulary {
    params: SyntheticParams,
}

/// Builds the vocabulary split. Only the vocabulary-level invariants are
/// required here (`m ≥ 1`, `2m + 2 < M`, `d_tok ≥ M`); the sequence-count
/// invariants are enforced where sequences are generated.
pub fn build_vocab(params: SyntheticParams) -> Result<Vocabulary> {
    params.validate_vocab()?;
    Ok(Vocabulary { params })
}

impl Vocabulary {
    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    /// The sparse singleton for a label: `e_1` for `+1`, `e_2` for `−1`.
    pub fn sparse_token(&self, label: i8) -> TokenId {
        if label > 0 {
            1
        } else {
            2
        }
    }

    /// Frequent subset for a label: odd ids `3, 5, …, 2m+1` for `+1`,
    /// even ids `4, 6, …, 2m+2` for `−1`.
    pub fn frequent_ids(&self, label: i8) -> impl ExactSizeIterator<Item = TokenId> {
        let start = if label > 0 { 3 } else { 4 };
        (0..self.params.freq_subset).map(move |i| start + 2 * i)
    }

    /// Irrelevant ids `2m+3, …, M`.
    pub fn irrelevant_ids(&self) -> impl ExactSizeIterator<Item = TokenId> {
        (2 * self.params.freq_subset + 3)..self.params.vocab_size + 1
    }

    pub fn class_of(&self, id: TokenId) -> TokenClass {
        match id {
            1 => TokenClass::SparsePlus,
            2 => TokenClass::SparseMinus,
            i if i <= 2 * self.params.freq_subset + 2 => {
                if i % 2 == 1 {
                    TokenClass::FrequentPlus
                } else {
                    TokenClass::FrequentMinus
                }
            }
            _ => TokenClass::Irrelevant,
        }
    }
}

/// One generated labeled sequence, as token ids plus role tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub label: i8,
    pub token_ids: Vec<TokenId>,
    pub roles: Vec<Role>,
}

/// Input content of a dataset example: original token ids, or a dense
/// matrix (after Gaussian augmentation).
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleInput<T> {
    Tokens(Vec<TokenId>),
    Dense(Array2<T>),
}

/// A labeled example with position roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub label: i8,
    pub roles: Vec<Role>,
    pub input: ExampleInput<T>,
}

impl<T: Scalar> Example<T> {
    /// Materializes the `T × d_tok` input matrix (one-hot rows for token
    /// ids).
    pub fn to_matrix(&self, d_tok: usize) -> Array2<T> {
        match &self.input {
            ExampleInput::Dense(x) => x.clone(),
            ExampleInput::Tokens(ids) => one_hot_matrix(ids, d_tok),
        }
    }
}

/// One-hot matrix for a sequence of 1-based token ids.
pub fn one_hot_matrix<T: Scalar>(ids: &[TokenId], d_tok: usize) -> Array2<T> {
    let mut x = Array2::zeros((ids.len(), d_tok));
    for (t, &id) in ids.iter().enumerate() {
        x[(t, id - 1)] = T::one();
    }
    x
}

impl From<TokenSequence> for Example<f64> {
    fn from(seq: TokenSequence) -> Self {
        Example {
            label: seq.label,
            roles: seq.roles,
            input: ExampleInput::Tokens(seq.token_ids),
        }
    }
}

impl TokenSequence {
    pub fn to_example<T: Scalar>(&self) -> Example<T> {
        Example {
            label: self.label,
            roles: self.roles.clone(),
            input: ExampleInput::Tokens(self.token_ids.clone()),
        }
    }
}

/// A generated dataset; all sequences share the same parameters.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub params: SyntheticParams,
    pub kind: DatasetKind,
    pub seed: u64,
    pub examples: Vec<Example<T>>,
}

/// Generates one labeled sequence. Position roles are assigned by a
/// uniform random partition of `[T]`; token draws within a role are i.i.d.
/// uniform with replacement.
pub fn generate_example(
    vocab: &Vocabulary,
    label: i8,
    ood_sparse: bool,
    rng: &mut impl Rng,
) -> TokenSequence {
    let p = vocab.params();
    let mut order: Vec<usize> = (0..p.seq_len).collect();
    order.shuffle(rng);

    let mut roles = vec![Role::Irrelevant; p.seq_len];
    let mut ids = vec![0usize; p.seq_len];
    let n_same = p.n_freq_same();

    let sparse_label = if ood_sparse { -label } else { label };
    let freq_same: Vec<TokenId> = vocab.frequent_ids(label).collect();
    let freq_opp: Vec<TokenId> = vocab.frequent_ids(-label).collect();
    let irrelevant: Vec<TokenId> = vocab.irrelevant_ids().collect();

    for (slot, &pos) in order.iter().enumerate() {
        let (role, id) = if slot < p.n_sparse {
            (Role::Sparse, vocab.sparse_token(sparse_label))
        } else if slot < p.n_sparse + n_same {
            (Role::FrequentSame, freq_same[rng.gen_range(0..freq_same.len())])
        } else if slot < p.n_sparse + p.n_frequent {
            (
                Role::FrequentOpposite,
                freq_opp[rng.gen_range(0..freq_opp.len())],
            )
        } else {
            (
                Role::Irrelevant,
                irrelevant[rng.gen_range(0..irrelevant.len())],
            )
        };
        roles[pos] = role;
        ids[pos] = id;
    }

    TokenSequence {
        label,
        token_ids: ids,
        roles,
    }
}

/// Generates `n` i.i.d. examples with uniform ±1 labels; deterministic
/// given the seed. For [`DatasetKind::TestOod`] the sparse tokens come
/// from the opposite label's sparse singleton.
pub fn generate_dataset<T: Scalar>(
    params: SyntheticParams,
    n: usize,
    kind: DatasetKind,
    seed: u64,
) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(CoreError::Config("dataset size must be at least 1".into()));
    }
    params.validate()?;
    let vocab = build_vocab(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ood = kind == DatasetKind::TestOod;
    let examples = (0..n)
        .map(|_| {
            let label = if rng.gen::<bool>() { 1 } else { -1 };
            generate_example(&vocab, label, ood, &mut rng).to_example()
        })
        .collect();
    Ok(Dataset {
        params,
        kind,
        seed,
        examples,
    })
}

/// Reference directions for the alignment diagnostics. Each direction
/// contrasts the label-positive tokens of a group against the
/// label-negative ones: `e_1 − e_2` for the sparse singletons,
/// `Σ_{V_frequent^+} e_i − Σ_{V_frequent^−} e_i` for the frequent
/// subsets, and the plain sum over the irrelevant tokens.
#[derive(Debug, Clone)]
pub struct ReferenceVectors<T> {
    /// `e_1 − e_2`.
    pub v_sparse: Array1<T>,
    /// `Σ_{V_frequent^+} e_i − Σ_{V_frequent^−} e_i`.
    pub v_frequent: Array1<T>,
    /// `Σ_{V_irrelevant} e_i`.
    pub v_irrelevant: Array1<T>,
}

/// Builds the three reference directions in `ℝ^{d_tok}`.
pub fn reference_vectors<T: Scalar>(params: &SyntheticParams) -> Result<ReferenceVectors<T>> {
    let vocab = build_vocab(*params)?;
    let d = params.d_tok;
    let mut v_sparse = Array1::zeros(d);
    v_sparse[0] = T::one();
    v_sparse[1] = -T::one();

    let mut v_frequent = Array1::zeros(d);
    for id in vocab.frequent_ids(1) {
        v_frequent[id - 1] = T::one();
    }
    for id in vocab.frequent_ids(-1) {
        v_frequent[id - 1] = -T::one();
    }

    let mut v_irrelevant = Array1::zeros(d);
    for id in vocab.irrelevant_ids() {
        v_irrelevant[id - 1] = T::one();
    }

    Ok(ReferenceVectors {
        v_sparse,
        v_frequent,
        v_irrelevant,
    })
}
