#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ffn/features.hpp"
#include "ffn/error.hpp"

using namespace ffn;

namespace {

std::string join_with_gaps(const std::string& original, const std::vector<Token>& tokens) {
    std::string rebuilt;
    std::size_t cursor = 0;
    for (const Token& t : tokens) {
        rebuilt += original.substr(cursor, t.begin - cursor);
        rebuilt += original.substr(t.begin, t.end - t.begin);
        cursor = t.end;
    }
    rebuilt += original.substr(cursor);
    return rebuilt;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/ffn_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("tokenizer detaches punctuation with correct offsets") {
    auto toks = tokenize("Hello, world!");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0].text == "Hello");
    CHECK(toks[0].begin == 0);
    CHECK(toks[0].end == 5);
    CHECK(toks[1].text == ",");
    CHECK(toks[1].begin == 5);
    CHECK(toks[2].text == "world");
    CHECK(toks[2].begin == 7);
    CHECK(toks[3].text == "!");
    CHECK(toks[3].end == 13);
}

TEST_CASE("tokenizer trivial cases") {
    CHECK(tokenize("").empty());
    auto ab = tokenize("a b");
    REQUIRE(ab.size() == 2);
    CHECK(ab[0].begin == 0);
    CHECK(ab[0].end == 1);
    CHECK(ab[1].begin == 2);
    CHECK(ab[1].end == 3);

    auto punct = tokenize("(hi!)");
    REQUIRE(punct.size() == 4);
    CHECK(punct[0].text == "(");
    CHECK(punct[1].text == "hi");
    CHECK(punct[2].text == "!");
    CHECK(punct[3].text == ")");
}

TEST_CASE("tokenizer round trip on random text") {
    Rng rng(1);
    const std::string alphabet = "ab.,c  d!?e( )x";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const std::size_t len = rng.below(40);
        for (std::size_t i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
        auto toks = tokenize(text);
        CHECK(join_with_gaps(text, toks) == text);
        for (const Token& t : toks) {
            CHECK(t.text == text.substr(t.begin, t.end - t.begin));
        }
    }
}

TEST_CASE("lemma rules") {
    CHECK(lemma("Cats") == "cat");
    CHECK(lemma("goes") == "go");
    CHECK(lemma("walked") == "walk");
    CHECK(lemma("Running") == "runn");
    CHECK(lemma("class") == "class");
    CHECK(lemma("is") == "is");
    CHECK(lemma("The") == "the");
}

TEST_CASE("hard match forms") {
    auto ctx = tokenize("The cat sat");
    auto q = tokenize("the mat");
    Tensor hm = hard_match(ctx, q);
    // "The": not exact, lowercase yes, lemma yes
    CHECK(hm.at(0, 0) == 0.0);
    CHECK(hm.at(0, 1) == 1.0);
    CHECK(hm.at(0, 2) == 1.0);
    // "cat": nothing
    CHECK(hm.at(1, 0) == 0.0);
    CHECK(hm.at(1, 1) == 0.0);
    CHECK(hm.at(1, 2) == 0.0);

    // verbatim presence implies all three forms
    Tensor all = hard_match(tokenize("mat"), q);
    CHECK(all.at(0, 0) == 1.0);
    CHECK(all.at(0, 1) == 1.0);
    CHECK(all.at(0, 2) == 1.0);

    // empty question: all zeros
    Tensor none = hard_match(ctx, {});
    for (double v : none.data()) CHECK(v == 0.0);

    // question order does not matter
    Tensor reordered = hard_match(ctx, tokenize("mat the"));
    for (std::size_t i = 0; i < hm.size(); ++i) CHECK(hm[i] == reordered[i]);
}

TEST_CASE("term frequency") {
    Tensor tf = term_frequency(tokenize("a b c d"));
    for (std::size_t i = 0; i < 4; ++i) CHECK(tf[i] == 0.25);

    Tensor twice = term_frequency(tokenize("a b A c"));
    CHECK(twice[0] == 0.5);  // "a" and "A" share a lowercase form
    CHECK(twice[1] == 0.25);
    CHECK(twice[2] == 0.5);

    Tensor single = term_frequency(tokenize("word"));
    CHECK(single[0] == 1.0);
}

TEST_CASE("vocabulary lookup and tunable rows") {
    Vocabulary v = build_vocabulary({"the cat sat on the mat", "a cat"}, "", 2);
    CHECK(v.lookup("cat") != Vocabulary::kUnk);
    CHECK(v.lookup("zzzz") == Vocabulary::kUnk);
    // case falls back to the lowercase entry
    CHECK(v.lookup("Cat") == v.lookup("cat"));

    // pad & unk always tunable; top-2 = "cat" (2) and "the" (2), tie with "a"... counts:
    // the:2 cat:2 sat:1 on:1 mat:1 a:1 -> top2 by count then lexicographic: cat, the
    CHECK(v.is_tunable(Vocabulary::kPad));
    CHECK(v.is_tunable(Vocabulary::kUnk));
    CHECK(v.is_tunable(v.lookup("cat")));
    CHECK(v.is_tunable(v.lookup("the")));
    CHECK_FALSE(v.is_tunable(v.lookup("sat")));
    CHECK(v.tune_rows.size() == 4);
}

TEST_CASE("hash-seeded embeddings are deterministic per token") {
    Vocabulary a = build_vocabulary({"alpha beta"});
    Vocabulary b = build_vocabulary({"beta gamma alpha"});
    const int ia = a.lookup("alpha"), ib = b.lookup("alpha");
    for (std::size_t j = 0; j < kGloveDim; ++j) {
        CHECK(a.embeddings.at(ia, j) == b.embeddings.at(ib, j));
    }
}

TEST_CASE("embedding file loading") {
    std::string content = "hello";
    for (int i = 0; i < 300; ++i) content += " " + std::to_string(0.01 * i);
    content += "\n";
    TempFile file("emb.txt", content);

    Vocabulary v = build_vocabulary({"hello world"}, file.path);
    const int idx = v.lookup("hello");
    CHECK(v.embeddings.at(idx, 0) == doctest::Approx(0.0));
    CHECK(v.embeddings.at(idx, 299) == doctest::Approx(2.99));

    TempFile bad("emb_bad.txt", "hello 1.0 2.0\n");
    CHECK_THROWS_AS(build_vocabulary({"hello"}, bad.path), ParseError);
}

TEST_CASE("tag sidecar parsing") {
    TempFile file("tags.tsv", "ex1\tDET NOUN\t<none> PER\n# comment\nex2\tVERB\tLOC\n");
    auto records = load_tag_sidecar(file.path);
    REQUIRE(records.count("ex1") == 1);
    CHECK(records["ex1"].pos.size() == 2);
    CHECK(records["ex1"].ner[1] == "PER");
    CHECK(records["ex2"].pos[0] == "VERB");

    TempFile bad("tags_bad.tsv", "ex1\tDET NOUN\n");
    CHECK_THROWS_AS(load_tag_sidecar(bad.path), ParseError);

    TempFile misaligned("tags_mis.tsv", "ex1\tDET NOUN\tPER\n");
    CHECK_THROWS_AS(load_tag_sidecar(misaligned.path), ParseError);
}

TEST_CASE("build_inputs produces the 624-wide feature matrix") {
    Rng rng(2);
    Vocabulary vocab = build_vocabulary({"the cat sat on the mat", "where did the cat sit"});
    TagVocab tv = make_default_tag_vocab();
    TagEmbeddings tags = make_tag_embeddings(tv, rng);
    AttnParams word_match = make_attn_params(kGloveDim, 8, rng);

    FeaturizedPair pair = build_inputs("The cat sat on the mat.", "Where did the cat sit?",
                                       vocab, tv, tags, word_match);
    CHECK(pair.c_in.cols() == 624);
    CHECK(pair.q_in.cols() == 300);
    CHECK(pair.c_in.rows() == pair.c_tokens.size());
    CHECK(pair.c_mask.size() == pair.c_tokens.size());

    // feature column slices recover the parts bit-exactly
    Tensor glove_slice = slice_cols(pair.c_in, 0, kGloveDim);
    std::vector<int> idx;
    for (const Token& t : pair.c_tokens) idx.push_back(vocab.lookup(t.text));
    Tensor glove_direct = gather_rows(vocab.embeddings, idx);
    for (std::size_t i = 0; i < glove_slice.size(); ++i) {
        CHECK(glove_slice[i] == glove_direct[i]);
    }
    Tensor tf_slice = slice_cols(pair.c_in, kGloveDim, 1);
    Tensor tf_direct = term_frequency(pair.c_tokens);
    for (std::size_t i = 0; i < tf_slice.size(); ++i) CHECK(tf_slice[i] == tf_direct[i]);
    Tensor hard_slice = slice_cols(pair.c_in, 621, 3);
    Tensor hard_direct = hard_match(pair.c_tokens, pair.q_tokens);
    for (std::size_t i = 0; i < hard_slice.size(); ++i) CHECK(hard_slice[i] == hard_direct[i]);

    // unknown words use the unk embedding row
    FeaturizedPair unk = build_inputs("qqqq zzzz", "what", vocab, tv, tags, word_match);
    for (std::size_t j = 0; j < kGloveDim; ++j) {
        CHECK(unk.c_in.at(0, j) == vocab.embeddings.at(Vocabulary::kUnk, j));
    }

    CHECK_THROWS_AS(build_inputs("", "question", vocab, tv, tags, word_match), DataError);
    CHECK_THROWS_AS(build_inputs("context", "", vocab, tv, tags, word_match), DataError);
}

TEST_CASE("build_inputs with token-aligned tags") {
    Rng rng(3);
    Vocabulary vocab = build_vocabulary({"dogs bark"});
    TagVocab tv = make_default_tag_vocab();
    TagEmbeddings tags = make_tag_embeddings(tv, rng);
    AttnParams word_match = make_attn_params(kGloveDim, 8, rng);

    TagRecord rec;
    rec.pos = {"NOUN", "VERB"};
    rec.ner = {"<none>", "<none>"};
    FeaturizeOptions opts;
    opts.tags = &rec;
    FeaturizedPair pair = build_inputs("dogs bark", "what", vocab, tv, tags, word_match, opts);

    Tensor pos_slice = slice_cols(pair.c_in, kGloveDim + 1, kPosDim);
    for (std::size_t j = 0; j < kPosDim; ++j) {
        CHECK(pos_slice.at(0, j) == tags.pos_table.at(tv.pos("NOUN"), j));
        CHECK(pos_slice.at(1, j) == tags.pos_table.at(tv.pos("VERB"), j));
    }

    TagRecord short_rec;
    short_rec.pos = {"NOUN"};
    short_rec.ner = {"<none>"};
    opts.tags = &short_rec;
    CHECK_THROWS_AS(build_inputs("dogs bark", "what", vocab, tv, tags, word_match, opts),
                    DataError);
}
