#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ffn/attention.hpp"
#include "ffn/rng.hpp"
#include "ffn/tensor.hpp"

namespace ffn {

struct Token {
    std::string text;
    std::size_t begin;  // char offsets into the original string
    std::size_t end;
};

// Whitespace split with leading/trailing punctuation detached as single-char
// tokens. Joining token slices with the gap text reproduces the input.
std::vector<Token> tokenize(const std::string& text);

// Lowercase plus a small suffix stripper (plural -s/-es, -ing, -ed).
std::string lemma(const std::string& token);

// Per context token: (original form in question, lowercase form in
// lowercased question, lemma in lemmatized question), as 0/1 rows.
Tensor hard_match(const std::vector<Token>& context, const std::vector<Token>& question);

// Count of the token's lowercase form in the context over context length.
Tensor term_frequency(const std::vector<Token>& context);

constexpr std::size_t kGloveDim = 300;
constexpr std::size_t kPosDim = 12;
constexpr std::size_t kNerDim = 8;
constexpr std::size_t kHardMatchDim = 3;
constexpr std::size_t kInputDim = kGloveDim + 1 + kPosDim + kNerDim + kGloveDim + kHardMatchDim;
static_assert(kInputDim == 624);

// Embedding table plus the set of rows that stay trainable: padding,
// unknown, and the top 1000 training-set words.
struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> tokens;  // index -> token, [0]=<pad>, [1]=<unk>
    std::unordered_map<std::string, int> index;
    Tensor embeddings;            // [V x 300], requires_grad
    std::vector<int> tune_rows;   // sorted; rows not listed are frozen

    int lookup(const std::string& token) const;
    std::size_t size() const { return tokens.size(); }
    bool is_tunable(int row) const;
};

// Builds the vocabulary from training text. Tokens present in the embedding
// file get its vector; everything else gets a deterministic hash-seeded
// random vector (so desk-scale runs need no download). tune_top_k most
// frequent corpus tokens (ties broken lexicographically) plus pad/unk are
// trainable.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus_texts,
                            const std::string& embedding_file = "",
                            std::size_t tune_top_k = 1000);

// "token f1 ... f300" per line.
std::unordered_map<std::string, std::vector<double>> load_embedding_file(const std::string& path);

struct TagVocab {
    std::vector<std::string> pos_names;  // [0] = the default tag
    std::vector<std::string> ner_names;
    std::unordered_map<std::string, int> pos_index;
    std::unordered_map<std::string, int> ner_index;

    int pos(const std::string& name) const;
    int ner(const std::string& name) const;
};

TagVocab make_default_tag_vocab();

struct TagEmbeddings {
    Tensor pos_table;  // [n_pos x 12]
    Tensor ner_table;  // [n_ner x 8]
};

TagEmbeddings make_tag_embeddings(const TagVocab& vocab, Rng& rng);

// Sidecar tag records: one line per context id,
//   id <TAB> pos1 pos2 ... <TAB> ner1 ner2 ...
// token-aligned with the tokenizer output for that context.
struct TagRecord {
    std::vector<std::string> pos;
    std::vector<std::string> ner;
};

std::unordered_map<std::string, TagRecord> load_tag_sidecar(const std::string& path);

struct FeaturizeOptions {
    bool training = false;
    double embedding_dropout = 0.4;
    Rng* rng = nullptr;
    const TagRecord* tags = nullptr;  // per-token context tags; index 0 when absent
};

struct FeaturizedPair {
    Tensor c_in;  // [n x 624]
    Tensor q_in;  // [m x 300]
    std::vector<std::uint8_t> c_mask;
    std::vector<std::uint8_t> q_mask;
    std::vector<Token> c_tokens;
    std::vector<Token> q_tokens;
};

// [C_glove; C_tf; C_pos; C_ner; C_soft_match; C_hard_match] in that order.
FeaturizedPair build_inputs(const std::string& context, const std::string& question,
                            const Vocabulary& vocab, const TagVocab& tag_vocab,
                            const TagEmbeddings& tags, const AttnParams& word_match,
                            const FeaturizeOptions& opts = {});

}  // namespace ffn
