#include "tembed/projector.hpp"

#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/tsv.hpp"

namespace tembed {

namespace {

void check_field(const std::string& s, const char* what) {
    if (s.find_first_of("\t\n\r") != std::string::npos) {
        throw std::invalid_argument(std::string(what) + " '" + s + "' contains a tab or line break");
    }
}

void append_row(std::string& out, std::span<const double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out += '\t';
        out += format_double(row[j]);
    }
}

} // namespace

std::string format_embeddings_tsv(const EmbeddingTable& table) {
    const std::size_t n = table.vectors.rows;
    if (table.class_names.size() != n || table.splits.size() != n || table.paths.size() != n) {
        throw StructuralError("embedding table columns have different lengths");
    }
    std::string out = "class\tsplit\tpath";
    for (std::size_t j = 0; j < table.vectors.cols; ++j) out += "\te" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < n; ++i) {
        check_field(table.class_names[i], "class name");
        check_field(table.paths[i], "path");
        out += table.class_names[i] + '\t' + table.splits[i] + '\t' + table.paths[i] + '\t';
        append_row(out, table.vectors.row(i));
        out += '\n';
    }
    return out;
}

EmbeddingTable parse_embeddings_tsv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw std::invalid_argument("embedding table: missing header");
    const auto header = split_tabs(lines[0]);
    if (header.size() < 4 || header[0] != "class" || header[1] != "split" || header[2] != "path") {
        throw std::invalid_argument("embedding table: bad header");
    }
    const std::size_t dim = header.size() - 3;
    EmbeddingTable t;
    std::vector<double> values;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (lines[l].empty()) continue;
        const auto f = split_tabs(lines[l]);
        if (f.size() != dim + 3) {
            throw std::invalid_argument("embedding table line " + std::to_string(l + 1) + ": expected " +
                                        std::to_string(dim + 3) + " fields");
        }
        t.class_names.emplace_back(f[0]);
        t.splits.emplace_back(f[1]);
        t.paths.emplace_back(f[2]);
        for (std::size_t j = 0; j < dim; ++j) values.push_back(parse_double(f[3 + j]));
    }
    t.vectors = Matrix(t.class_names.size(), dim, std::move(values));
    return t;
}

std::string format_vectors_tsv(const Matrix& embeddings) {
    std::string out;
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        append_row(out, embeddings.row(i));
        out += '\n';
    }
    return out;
}

Matrix parse_vectors_tsv(std::string_view text) {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    for (auto line : split_lines(text)) {
        const auto f = split_tabs(line);
        if (rows == 0) cols = f.size();
        if (f.size() != cols) throw std::invalid_argument("vectors.tsv: ragged row " + std::to_string(rows + 1));
        for (auto v : f) values.push_back(parse_double(v));
        ++rows;
    }
    return Matrix(rows, cols, std::move(values));
}

void export_projector(const Matrix& embeddings, const std::vector<std::string>& labels,
                      const std::filesystem::path& out_dir) {
    if (embeddings.rows == 0) throw std::invalid_argument("export_projector: no embeddings");
    if (labels.size() != embeddings.rows) throw StructuralError("export_projector: label count does not match rows");
    std::string metadata;
    for (const auto& l : labels) {
        check_field(l, "label");
        metadata += l + '\n';
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    write_text_file(out_dir / "vectors.tsv", format_vectors_tsv(embeddings));
    write_text_file(out_dir / "metadata.tsv", metadata);
}

} // namespace tembed
