#include "ffn/features.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ffn/dropout.hpp"
#include "ffn/error.hpp"

namespace ffn {

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t j = i;
        while (j < n && !is_space(static_cast<unsigned char>(text[j]))) ++j;

        // chunk [i, j): peel leading and trailing punctuation one char at a time
        std::size_t b = i, e = j;
        while (b < e && is_punct(static_cast<unsigned char>(text[b]))) {
            tokens.push_back({text.substr(b, 1), b, b + 1});
            ++b;
        }
        std::size_t trail = e;
        while (trail > b && is_punct(static_cast<unsigned char>(text[trail - 1]))) --trail;
        if (trail > b) tokens.push_back({text.substr(b, trail - b), b, trail});
        for (std::size_t t = trail; t < e; ++t) {
            tokens.push_back({text.substr(t, 1), t, t + 1});
        }
        i = j;
    }
    return tokens;
}

std::string lemma(const std::string& token) {
    std::string s = lower(token);
    auto ends_with = [&](const char* suf) {
        const std::size_t len = std::char_traits<char>::length(suf);
        return s.size() >= len && s.compare(s.size() - len, len, suf) == 0;
    };
    if (s.size() > 4 && ends_with("ing")) return s.substr(0, s.size() - 3);
    if (s.size() > 3 && ends_with("ed")) return s.substr(0, s.size() - 2);
    if (s.size() > 3 && ends_with("es")) return s.substr(0, s.size() - 2);
    if (s.size() > 3 && ends_with("s") && !ends_with("ss")) return s.substr(0, s.size() - 1);
    return s;
}

Tensor hard_match(const std::vector<Token>& context, const std::vector<Token>& question) {
    std::set<std::string> exact, lowered, lemmas;
    for (const Token& q : question) {
        exact.insert(q.text);
        lowered.insert(lower(q.text));
        lemmas.insert(lemma(q.text));
    }
    Tensor out(Shape{context.size(), kHardMatchDim});
    for (std::size_t i = 0; i < context.size(); ++i) {
        out.at(i, 0) = exact.count(context[i].text) ? 1.0 : 0.0;
        out.at(i, 1) = lowered.count(lower(context[i].text)) ? 1.0 : 0.0;
        out.at(i, 2) = lemmas.count(lemma(context[i].text)) ? 1.0 : 0.0;
    }
    return out;
}

Tensor term_frequency(const std::vector<Token>& context) {
    if (context.empty()) throw DataError("term_frequency: empty context");
    std::unordered_map<std::string, double> counts;
    for (const Token& t : context) counts[lower(t.text)] += 1.0;
    Tensor out(Shape{context.size(), 1});
    for (std::size_t i = 0; i < context.size(); ++i) {
        out[i] = counts[lower(context[i].text)] / static_cast<double>(context.size());
    }
    return out;
}

// ---- vocabulary -------------------------------------------------------------

int Vocabulary::lookup(const std::string& token) const {
    auto it = index.find(token);
    if (it != index.end()) return it->second;
    it = index.find(lower(token));
    if (it != index.end()) return it->second;
    return kUnk;
}

bool Vocabulary::is_tunable(int row) const {
    return std::binary_search(tune_rows.begin(), tune_rows.end(), row);
}

std::unordered_map<std::string, std::vector<double>> load_embedding_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_embedding_file: cannot open " + path);
    std::unordered_map<std::string, std::vector<double>> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vec;
        vec.reserve(kGloveDim);
        double v;
        while (ss >> v) vec.push_back(v);
        if (vec.size() != kGloveDim) {
            throw ParseError("load_embedding_file: line " + std::to_string(lineno) + " has " +
                             std::to_string(vec.size()) + " values, expected 300");
        }
        table[token] = std::move(vec);
    }
    return table;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus_texts,
                            const std::string& embedding_file, std::size_t tune_top_k) {
    // token -> count, ordered so ties break lexicographically
    std::map<std::string, std::size_t> counts;
    for (const std::string& text : corpus_texts) {
        for (const Token& t : tokenize(text)) counts[t.text] += 1;
    }

    Vocabulary vocab;
    vocab.tokens = {"<pad>", "<unk>"};
    for (const auto& [tok, cnt] : counts) {
        (void)cnt;
        vocab.tokens.push_back(tok);
    }
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
        vocab.index[vocab.tokens[i]] = static_cast<int>(i);
    }

    std::unordered_map<std::string, std::vector<double>> file_vectors;
    if (!embedding_file.empty()) file_vectors = load_embedding_file(embedding_file);

    vocab.embeddings = Tensor(Shape{vocab.tokens.size(), kGloveDim}, 0.0, /*requires_grad=*/true);
    for (std::size_t i = 1; i < vocab.tokens.size(); ++i) {
        auto it = file_vectors.find(vocab.tokens[i]);
        double* row = vocab.embeddings.data().data() + i * kGloveDim;
        if (it != file_vectors.end()) {
            std::copy(it->second.begin(), it->second.end(), row);
        } else {
            Rng row_rng(fnv1a(vocab.tokens[i]));
            for (std::size_t j = 0; j < kGloveDim; ++j) row[j] = row_rng.uniform(-0.5, 0.5);
        }
    }

    // top-k by count, ties by token order (counts map is already sorted by token)
    std::vector<std::pair<std::size_t, std::string>> by_count;
    for (const auto& [tok, cnt] : counts) by_count.push_back({cnt, tok});
    std::stable_sort(by_count.begin(), by_count.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    std::set<int> tune = {Vocabulary::kPad, Vocabulary::kUnk};
    for (std::size_t i = 0; i < by_count.size() && i < tune_top_k; ++i) {
        tune.insert(vocab.index.at(by_count[i].second));
    }
    vocab.tune_rows.assign(tune.begin(), tune.end());
    return vocab;
}

// ---- tags -------------------------------------------------------------------

int TagVocab::pos(const std::string& name) const {
    auto it = pos_index.find(name);
    return it == pos_index.end() ? 0 : it->second;
}

int TagVocab::ner(const std::string& name) const {
    auto it = ner_index.find(name);
    return it == ner_index.end() ? 0 : it->second;
}

TagVocab make_default_tag_vocab() {
    TagVocab v;
    v.pos_names = {"<none>", "ADJ", "ADP", "ADV", "AUX",  "CCONJ", "DET",  "INTJ", "NOUN",
                   "NUM",    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};
    v.ner_names = {"<none>", "PER", "LOC", "ORG", "MISC", "DATE", "TIME", "NUM"};
    for (std::size_t i = 0; i < v.pos_names.size(); ++i) v.pos_index[v.pos_names[i]] = (int)i;
    for (std::size_t i = 0; i < v.ner_names.size(); ++i) v.ner_index[v.ner_names[i]] = (int)i;
    return v;
}

TagEmbeddings make_tag_embeddings(const TagVocab& vocab, Rng& rng) {
    TagEmbeddings t;
    t.pos_table = Tensor::uniform({vocab.pos_names.size(), kPosDim}, -0.5, 0.5, rng, true);
    t.ner_table = Tensor::uniform({vocab.ner_names.size(), kNerDim}, -0.5, 0.5, rng, true);
    return t;
}

std::unordered_map<std::string, TagRecord> load_tag_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_tag_sidecar: cannot open " + path);
    std::unordered_map<std::string, TagRecord> records;
    std::string line;
    std::size_t lineno = 0;
    auto split_ws = [](const std::string& s) {
        std::istringstream ss(s);
        std::vector<std::string> out;
        std::string w;
        while (ss >> w) out.push_back(w);
        return out;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw ParseError("load_tag_sidecar: line " + std::to_string(lineno) +
                             ": expected id<TAB>pos...<TAB>ner...");
        }
        TagRecord rec;
        rec.pos = split_ws(line.substr(tab1 + 1, tab2 - tab1 - 1));
        rec.ner = split_ws(line.substr(tab2 + 1));
        if (rec.pos.size() != rec.ner.size()) {
            throw ParseError("load_tag_sidecar: line " + std::to_string(lineno) +
                             ": POS and NER lists differ in length");
        }
        records[line.substr(0, tab1)] = std::move(rec);
    }
    return records;
}

// ---- featurization ------------------------------------------------------------

FeaturizedPair build_inputs(const std::string& context, const std::string& question,
                            const Vocabulary& vocab, const TagVocab& tag_vocab,
                            const TagEmbeddings& tags, const AttnParams& word_match,
                            const FeaturizeOptions& opts) {
    FeaturizedPair out;
    out.c_tokens = tokenize(context);
    out.q_tokens = tokenize(question);
    if (out.c_tokens.empty()) throw DataError("build_inputs: empty context");
    if (out.q_tokens.empty()) throw DataError("build_inputs: empty question");
    const std::size_t n = out.c_tokens.size();

    std::vector<int> c_idx, q_idx;
    for (const Token& t : out.c_tokens) c_idx.push_back(vocab.lookup(t.text));
    for (const Token& t : out.q_tokens) q_idx.push_back(vocab.lookup(t.text));

    Tensor c_glove = gather_rows(vocab.embeddings, c_idx);
    Tensor q_glove = gather_rows(vocab.embeddings, q_idx);
    if (opts.training) {
        c_glove = dropout(c_glove, opts.embedding_dropout, true, opts.rng);
        q_glove = dropout(q_glove, opts.embedding_dropout, true, opts.rng);
    }

    std::vector<int> pos_idx(n, 0), ner_idx(n, 0);
    if (opts.tags) {
        if (opts.tags->pos.size() != n) {
            throw DataError("build_inputs: tag record is not token-aligned (" +
                            std::to_string(opts.tags->pos.size()) + " tags for " +
                            std::to_string(n) + " tokens)");
        }
        for (std::size_t i = 0; i < n; ++i) {
            pos_idx[i] = tag_vocab.pos(opts.tags->pos[i]);
            ner_idx[i] = tag_vocab.ner(opts.tags->ner[i]);
        }
    }

    Tensor tf = term_frequency(out.c_tokens);
    Tensor pos = gather_rows(tags.pos_table, pos_idx);
    Tensor ner = gather_rows(tags.ner_table, ner_idx);
    Tensor soft = word_level_soft_match(word_match, c_glove, q_glove);
    Tensor hard = hard_match(out.c_tokens, out.q_tokens);

    out.c_in = concat_cols({c_glove, tf, pos, ner, soft, hard});
    if (out.c_in.cols() != kInputDim) {
        throw DimensionError("build_inputs: context feature width " +
                             std::to_string(out.c_in.cols()) + ", expected " +
                             std::to_string(kInputDim));
    }
    out.q_in = q_glove;
    out.c_mask.assign(n, 1);
    out.q_mask.assign(out.q_tokens.size(), 1);
    return out;
}

}  // namespace ffn
