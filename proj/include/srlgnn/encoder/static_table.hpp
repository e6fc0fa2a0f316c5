#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "srlgnn/encoder/transformer.hpp"
#include "srlgnn/tensor/checkpoint.hpp"

namespace srlgnn {

/// Fixed id -> vector lookup used as a parameter-free encoder.
/// File: `{"vocab_size":V,"d_lm":d,"precision":"f32"|"f64"}\n` then V*d
/// little-endian values, row-major.
template <typename T>
struct StaticTable {
  Tensor<T> vectors;  // [V x d]

  std::size_t vocab_size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding table " + path);
    nlohmann::json header = {
        {"vocab_size", vocab_size()}, {"d_lm", dim()}, {"precision", detail::precision_name<T>()}};
    out << header.dump() << '\n';
    write_values(out, vectors);
  }

  static StaticTable load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding table " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": bad embedding table header: " + e.what());
    }
    const auto v = header.at("vocab_size").get<std::size_t>();
    const auto d = header.at("d_lm").get<std::size_t>();
    const bool wide = header.value("precision", "f32") == "f64";
    StaticTable table{Tensor<T>::matrix(v, d)};
    for (auto& x : table.vectors.values()) {
      x = wide ? static_cast<T>(detail::read_le<double>(in)) : static_cast<T>(detail::read_le<float>(in));
    }
    return table;
  }
};

/// Looks every id up verbatim. The result is a constant on `tape`: no
/// gradient flows into the table.
template <typename T>
EncodedSequence<T> encode_static(const InputSequence& seq, const StaticTable<T>& table, Tape<T>& tape) {
  const std::size_t d = table.dim();
  Tensor<T> out = Tensor<T>::matrix(seq.size(), d);
  for (std::size_t r = 0; r < seq.size(); ++r) {
    const std::size_t id = seq.token_ids[r];
    if (id >= table.vocab_size()) {
      throw ValidationError("embedding table has no row for token id " + std::to_string(id));
    }
    std::copy_n(table.vectors.data() + id * d, d, out.data() + r * d);
  }
  Var<T> tokens = tape.constant(std::move(out));
  return {tokens, ops::gather_rows(tokens, {0})};
}

}  // namespace srlgnn
