#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ffn/features.hpp"

namespace ffn {

struct Answer {
    std::string text;
    std::size_t char_start;
};

struct QaExample {
    std::string id;
    std::string context;
    std::string question;
    std::vector<Answer> answers;
};

struct SquadDataset {
    std::vector<QaExample> examples;
    // ids whose answer text is not the context substring at char_start
    std::vector<std::string> alignment_warnings;
};

// SQuAD v1.1 layout: data -> paragraphs -> qas -> answers with answer_start.
SquadDataset parse_squad_json(const std::string& json_text);
SquadDataset load_squad_json(const std::string& path);

// Round-trip serialization (ids, texts, offsets preserved).
std::string to_squad_json(const std::vector<QaExample>& examples);

// Smallest token span whose character range covers the answer. Falls back
// to the nearest covering span (flagged) when no clean cover exists.
struct SpanAlignment {
    std::size_t start_token;
    std::size_t end_token;
    bool clean;
};

SpanAlignment align_answer_span(const Answer& answer, const std::vector<Token>& tokens);

// SQuAD-convention normalization: lowercase, strip punctuation, drop the
// articles a/an/the, collapse whitespace.
std::string normalize_answer(const std::string& text);

struct F1Em {
    double f1;
    double em;
};

// Token-bag F1 and exact match after normalization, max over golds.
F1Em f1_em(const std::string& prediction, const std::vector<std::string>& golds);

}  // namespace ffn
