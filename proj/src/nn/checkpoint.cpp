#include "codekc/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "codekc/errors.hpp"
#include "json.hpp"

namespace codekc::nn {

namespace {

void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw ValidationError("checkpoint: truncated header length");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_f64_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

double get_f64_le(std::istream& in) {
  std::uint64_t bits = get_u64_le(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::map<std::string, Mat>& arrays) {
  nlohmann::json header;
  std::uint64_t offset = 0;
  for (const auto& [name, mat] : arrays) {
    header[name] = {{"shape", {mat.rows(), mat.cols()}}, {"offset", offset}};
    offset += static_cast<std::uint64_t>(mat.size()) * 8;
  }
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + path.string());
  put_u64_le(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, mat] : arrays) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) put_f64_le(out, mat(r, c));
  }
}

std::map<std::string, Mat> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("missing checkpoint: " + path.string());
  std::uint64_t header_len = get_u64_le(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("checkpoint: truncated header");
  nlohmann::json header = nlohmann::json::parse(header_str);

  std::streampos payload_start = in.tellg();
  std::map<std::string, Mat> arrays;
  for (auto it = header.begin(); it != header.end(); ++it) {
    auto shape = it.value().at("shape");
    Eigen::Index rows = shape.at(0).get<Eigen::Index>();
    Eigen::Index cols = shape.at(1).get<Eigen::Index>();
    std::uint64_t offset = it.value().at("offset").get<std::uint64_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    Mat mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) mat(r, c) = get_f64_le(in);
    if (!in) throw ValidationError("checkpoint: truncated payload for " + it.key());
    arrays.emplace(it.key(), std::move(mat));
  }
  return arrays;
}

void save_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::map<std::string, Mat> arrays;
  for (const Parameter* p : params) arrays.emplace(p->name, p->value);
  save_checkpoint(path, arrays);
}

void load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  auto arrays = load_checkpoint(path);
  for (Parameter* p : params) {
    auto it = arrays.find(p->name);
    if (it == arrays.end()) throw ValidationError("checkpoint missing parameter " + p->name);
    p->value = it->second;
    p->grad = Mat::Zero(p->value.rows(), p->value.cols());
  }
}

}  // namespace codekc::nn
