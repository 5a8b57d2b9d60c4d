#include "causalign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "causalign/errors.hpp"

namespace causalign {
namespace {

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* ext) {
  return prefix.string() + ext;
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const ad::Matrix& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& prefix, const Checkpoint& ckpt) {
  const auto json_path = with_suffix(prefix, ".json");
  const auto bin_path = with_suffix(prefix, ".bin");
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["data_file"] = bin_path.filename().string();
  auto& table = header["tensors"] = nlohmann::json::array();

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + bin_path.string());
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    table.push_back({{"name", t.name},
                     {"rows", t.value.rows()},
                     {"cols", t.value.cols()},
                     {"offset", offset}});
    for (ad::Index i = 0; i < t.value.size(); ++i) put_le(bin, t.value.data()[i]);
    offset += static_cast<std::size_t>(t.value.size());
  }
  if (!bin) throw IoError("write failed for " + bin_path.string());

  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << header.dump(2) << '\n';
  if (!js) throw IoError("write failed for " + json_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& prefix) {
  const auto json_path = with_suffix(prefix, ".json");
  std::ifstream js(json_path);
  if (!js) throw IoError("cannot open " + json_path.string());
  nlohmann::json header;
  try {
    js >> header;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }
  if (header.value("dtype", "") != "float64" || header.value("byte_order", "") != "little")
    throw IoError(json_path.string() + ": unsupported dtype or byte order");

  const auto bin_path = json_path.parent_path() / header.at("data_file").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), {});

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const auto rows = entry.at("rows").get<ad::Index>();
    const auto cols = entry.at("cols").get<ad::Index>();
    const auto offset = entry.at("offset").get<std::size_t>();
    if (rows < 0 || cols < 0 ||
        (offset + static_cast<std::size_t>(rows * cols)) * 8 > bytes.size())
      throw IoError(bin_path.string() + ": tensor '" + entry.at("name").get<std::string>() +
                    "' lies outside the data file");
    NamedTensor t{entry.at("name").get<std::string>(), ad::Matrix(rows, cols)};
    for (ad::Index i = 0; i < t.value.size(); ++i)
      t.value.data()[i] = get_le(bytes.data() + (offset + static_cast<std::size_t>(i)) * 8);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace causalign
