#include "ffn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ffn/error.hpp"

namespace ffn {

namespace {

constexpr char kMagic[8] = {'F', 'F', 'N', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw ParseError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

double read_f64(std::istream& in) {
    std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint64_t len = read_u64(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError("checkpoint: truncated string");
    return s;
}

void write_string_list(std::ostream& out, const std::vector<std::string>& v) {
    write_u64(out, v.size());
    for (const std::string& s : v) write_string(out, s);
}

std::vector<std::string> read_string_list(std::istream& in) {
    std::vector<std::string> v(read_u64(in));
    for (std::string& s : v) s = read_string(in);
    return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 8);

    write_u64(out, model.cfg.hidden);
    write_u64(out, model.cfg.layers_per_block);
    write_u64(out, model.cfg.max_span_len);
    write_f64(out, model.cfg.dropout_input);
    write_f64(out, model.cfg.dropout_sru);

    write_string_list(out, model.vocab.tokens);
    write_u64(out, model.vocab.tune_rows.size());
    for (int r : model.vocab.tune_rows) write_u64(out, static_cast<std::uint64_t>(r));
    write_string_list(out, model.tag_vocab.pos_names);
    write_string_list(out, model.tag_vocab.ner_names);

    const std::vector<NamedParam> params = model.trainable();
    write_u64(out, params.size());
    for (const NamedParam& p : params) {
        write_string(out, p.name);
        write_u64(out, p.tensor.ndim());
        for (std::size_t d : p.tensor.shape()) write_u64(out, d);
        for (double v : p.tensor.data()) write_f64(out, v);
    }
    if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError("load_checkpoint: bad magic, not a checkpoint file");
    }

    ModelConfig cfg;
    cfg.hidden = read_u64(in);
    cfg.layers_per_block = read_u64(in);
    cfg.max_span_len = read_u64(in);
    cfg.dropout_input = read_f64(in);
    cfg.dropout_sru = read_f64(in);

    Vocabulary vocab;
    vocab.tokens = read_string_list(in);
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
        vocab.index[vocab.tokens[i]] = static_cast<int>(i);
    }
    const std::uint64_t n_tune = read_u64(in);
    for (std::uint64_t i = 0; i < n_tune; ++i) {
        vocab.tune_rows.push_back(static_cast<int>(read_u64(in)));
    }
    vocab.embeddings = Tensor(Shape{vocab.tokens.size(), kGloveDim}, 0.0, true);

    TagVocab tag_vocab;
    tag_vocab.pos_names = read_string_list(in);
    tag_vocab.ner_names = read_string_list(in);
    for (std::size_t i = 0; i < tag_vocab.pos_names.size(); ++i) {
        tag_vocab.pos_index[tag_vocab.pos_names[i]] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < tag_vocab.ner_names.size(); ++i) {
        tag_vocab.ner_index[tag_vocab.ner_names[i]] = static_cast<int>(i);
    }

    Model model = make_model(cfg, std::move(vocab), std::move(tag_vocab), /*seed=*/0);

    std::vector<NamedParam> params = model.trainable();
    const std::uint64_t n_params = read_u64(in);
    if (n_params != params.size()) {
        throw ParseError("load_checkpoint: expected " + std::to_string(params.size()) +
                         " tensors, file has " + std::to_string(n_params));
    }
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = read_string(in);
        if (name != params[i].name) {
            throw ParseError("load_checkpoint: tensor " + std::to_string(i) + " is \"" + name +
                             "\", expected \"" + params[i].name + "\"");
        }
        Shape shape(read_u64(in));
        for (std::size_t& d : shape) d = read_u64(in);
        Tensor t = params[i].tensor;
        if (shape != t.shape()) {
            throw ParseError("load_checkpoint: shape mismatch for \"" + name + "\"");
        }
        for (double& v : t.data()) v = read_f64(in);
    }
    return model;
}

}  // namespace ffn
