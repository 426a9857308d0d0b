#include "cmn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cmn/errors.hpp"

namespace cmn {

std::string format_double(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, end);
}

void Checkpoint::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : metadata) {
        if (k == key) {
            v = value;
            return;
        }
    }
    metadata.emplace_back(key, value);
}

bool Checkpoint::has(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return true;
    return false;
}

const std::string& Checkpoint::get(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return v;
    throw DataError("checkpoint is missing metadata '" + key + "'");
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw DataError("checkpoint is missing tensor '" + name + "'");
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << "cmn-checkpoint 1\n";
    out << "model " << checkpoint.model << '\n';
    for (const auto& [key, value] : checkpoint.metadata) out << "meta " << key << ' ' << value << '\n';
    std::string line;
    for (const auto& [name, m] : checkpoint.tensors) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t r = 0; r < m.rows(); ++r) {
            line.clear();
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (c) line += ' ';
                line += format_double(m(r, c));
            }
            out << line << '\n';
        }
    }
    out << "end\n";
    if (!out) throw DataError("failed while writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::size_t line_number = 0;
    std::string line;
    const auto fail = [&](const std::string& why) {
        return DataError("corrupt checkpoint " + path.string() + ":" + std::to_string(line_number) + ": " + why);
    };
    const auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_number;
        return true;
    };

    if (!next_line() || line != "cmn-checkpoint 1") throw fail("bad header");
    Checkpoint ckpt;
    bool ended = false;
    while (next_line()) {
        std::istringstream fields(line);
        std::string tag;
        fields >> tag;
        if (tag == "model") {
            if (!(fields >> ckpt.model)) throw fail("missing model kind");
        } else if (tag == "meta") {
            std::string key;
            std::string value;
            if (!(fields >> key >> value)) throw fail("malformed meta line");
            ckpt.metadata.emplace_back(key, value);
        } else if (tag == "tensor") {
            std::string name;
            std::size_t rows = 0;
            std::size_t cols = 0;
            if (!(fields >> name >> rows >> cols)) throw fail("malformed tensor header");
            Matrix m(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!next_line()) throw fail("truncated tensor " + name);
                const char* p = line.data();
                const char* end = line.data() + line.size();
                for (std::size_t c = 0; c < cols; ++c) {
                    while (p < end && *p == ' ') ++p;
                    double value = 0.0;
                    const auto [ptr, ec] = std::from_chars(p, end, value);
                    if (ec != std::errc{}) throw fail("bad value in tensor " + name);
                    m(r, c) = value;
                    p = ptr;
                }
                while (p < end && *p == ' ') ++p;
                if (p != end) throw fail("extra values in tensor " + name);
            }
            ckpt.tensors.emplace_back(name, std::move(m));
        } else if (tag == "end") {
            ended = true;
            break;
        } else {
            throw fail("unknown record '" + tag + "'");
        }
    }
    if (!ended) throw fail("missing end marker (truncated file)");
    if (ckpt.model.empty()) throw fail("no model kind recorded");
    return ckpt;
}

}  // namespace cmn
