#include "ffn/squad.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ffn/error.hpp"

namespace ffn {

using nlohmann::json;

namespace {

SquadDataset from_parsed(const json& root) {
    SquadDataset ds;
    if (!root.contains("data") || !root["data"].is_array()) {
        throw ParseError("squad: missing top-level \"data\" array");
    }
    for (const json& article : root["data"]) {
        for (const json& para : article.at("paragraphs")) {
            const std::string context = para.at("context").get<std::string>();
            for (const json& qa : para.at("qas")) {
                QaExample ex;
                ex.id = qa.at("id").get<std::string>();
                ex.context = context;
                ex.question = qa.at("question").get<std::string>();
                for (const json& ans : qa.at("answers")) {
                    Answer a;
                    a.text = ans.at("text").get<std::string>();
                    a.char_start = ans.at("answer_start").get<std::size_t>();
                    ex.answers.push_back(std::move(a));
                }
                for (const Answer& a : ex.answers) {
                    if (ex.context.compare(a.char_start, a.text.size(), a.text) != 0) {
                        ds.alignment_warnings.push_back(ex.id);
                        break;
                    }
                }
                ds.examples.push_back(std::move(ex));
            }
        }
    }
    return ds;
}

}  // namespace

SquadDataset parse_squad_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
        return from_parsed(root);
    } catch (const json::exception& e) {
        throw ParseError(std::string("squad: ") + e.what());
    }
}

SquadDataset load_squad_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_squad_json: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_squad_json(buf.str());
}

std::string to_squad_json(const std::vector<QaExample>& examples) {
    // one article, one paragraph per distinct context, in first-seen order
    json data = json::array();
    json paragraphs = json::array();
    std::map<std::string, std::size_t> context_slot;
    for (const QaExample& ex : examples) {
        auto [it, inserted] = context_slot.try_emplace(ex.context, paragraphs.size());
        if (inserted) {
            paragraphs.push_back(json{{"context", ex.context}, {"qas", json::array()}});
        }
        json answers = json::array();
        for (const Answer& a : ex.answers) {
            answers.push_back(json{{"text", a.text}, {"answer_start", a.char_start}});
        }
        paragraphs[it->second]["qas"].push_back(
            json{{"id", ex.id}, {"question", ex.question}, {"answers", answers}});
    }
    data.push_back(json{{"title", ""}, {"paragraphs", paragraphs}});
    return json{{"data", data}}.dump();
}

SpanAlignment align_answer_span(const Answer& answer, const std::vector<Token>& tokens) {
    if (tokens.empty()) throw DataError("align_answer_span: no tokens");
    const std::size_t a_begin = answer.char_start;
    const std::size_t a_end = a_begin + answer.text.size();

    // tokens overlapping [a_begin, a_end)
    std::size_t first = tokens.size(), last = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].end > a_begin && tokens[i].begin < a_end) {
            if (first == tokens.size()) first = i;
            last = i;
        }
    }
    if (first == tokens.size()) {
        // answer fell into a gap; cover with the nearest following token
        std::size_t i = 0;
        while (i + 1 < tokens.size() && tokens[i].end <= a_begin) ++i;
        return {i, i, false};
    }
    const bool clean = tokens[first].begin <= a_begin && tokens[last].end >= a_end;
    return {first, last, clean};
}

std::string normalize_answer(const std::string& text) {
    std::string no_punct;
    no_punct.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        no_punct.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream ss(no_punct);
    std::string word, out;
    while (ss >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

namespace {

std::vector<std::string> normalized_tokens(const std::string& text) {
    std::istringstream ss(normalize_answer(text));
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

double bag_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::map<std::string, int> gold_counts;
    for (const std::string& g : gold) gold_counts[g] += 1;
    int overlap = 0;
    for (const std::string& p : pred) {
        auto it = gold_counts.find(p);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / pred.size();
    const double recall = static_cast<double>(overlap) / gold.size();
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

F1Em f1_em(const std::string& prediction, const std::vector<std::string>& golds) {
    if (golds.empty()) throw DataError("f1_em: no gold answers");
    const std::string pred_norm = normalize_answer(prediction);
    const std::vector<std::string> pred_toks = normalized_tokens(prediction);

    F1Em best{0.0, 0.0};
    for (const std::string& gold : golds) {
        const double em = pred_norm == normalize_answer(gold) ? 1.0 : 0.0;
        const double f1 = bag_f1(pred_toks, normalized_tokens(gold));
        best.em = std::max(best.em, em);
        best.f1 = std::max(best.f1, f1);
    }
    return best;
}

}  // namespace ffn
