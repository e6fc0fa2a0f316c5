#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "srlgnn/tensor/params.hpp"

namespace srlgnn {

/// On-disk layout: one line of JSON
///   {"version":1,"precision":"f32"|"f64","params":[{"name":..,"shape":[..]},..], ...}
/// terminated by '\n', then the raw little-endian values of every parameter
/// in header order. Extra header keys are carried through untouched.
template <typename T>
struct Checkpoint {
  nlohmann::json header;
  ParamStore<T> params;
};

namespace detail {

template <typename T>
constexpr const char* precision_name() {
  return std::is_same_v<T, double> ? "f64" : "f32";
}

template <typename U>
void write_le(std::ostream& out, U value) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::uint32_t>;
  auto bits = std::bit_cast<Bits>(value);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(std::istream& in) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::uint32_t>;
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw ParseError("checkpoint: truncated value section");
  }
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<Bits>(bytes[i]) << (8 * i);
  return std::bit_cast<U>(bits);
}

}  // namespace detail

template <typename T>
void write_values(std::ostream& out, const Tensor<T>& t) {
  for (T v : t.values()) detail::write_le(out, v);
}

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& params,
                     nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json header = std::move(extra);
  header["version"] = 1;
  header["precision"] = detail::precision_name<T>();
  header["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    header["params"].push_back({{"name", params.name(i)}, {"shape", params.value(i).shape()}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << header.dump() << '\n';
  for (const auto& t : params.tensors()) write_values(out, t);
  if (!out) throw IoError("failed writing checkpoint " + path);
}

/// Reads a checkpoint of either precision, converting values to T.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing header in " + path);
  Checkpoint<T> ck;
  try {
    ck.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint header is not JSON: " + std::string(e.what()));
  }
  if (ck.header.value("version", 0) != 1) throw ParseError("checkpoint: unsupported version");
  const std::string precision = ck.header.value("precision", "");
  if (precision != "f32" && precision != "f64") {
    throw ParseError("checkpoint: unknown precision '" + precision + "'");
  }
  for (const auto& p : ck.header.at("params")) {
    Shape shape = p.at("shape").template get<Shape>();
    Tensor<T> t(shape);
    for (auto& v : t.values()) {
      v = precision == "f64" ? static_cast<T>(detail::read_le<double>(in))
                             : static_cast<T>(detail::read_le<float>(in));
    }
    ck.params.add(p.at("name").template get<std::string>(), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("checkpoint: trailing bytes after value section");
  }
  return ck;
}

}  // namespace srlgnn
