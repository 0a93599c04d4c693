#include "spoofbreak/serialize.hpp"

#include <cstring>
#include <fstream>

#include "spoofbreak/error.hpp"

namespace spoofbreak::io {

namespace {

constexpr char kMagic[4] = {'S', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append_tensor(std::vector<Archive::Tensor>& tensors, const std::string& name,
                   const char* dtype, const T* p, std::size_t n) {
  Archive::Tensor t;
  t.name = name;
  t.dtype = dtype;
  t.count = n;
  t.bytes.resize(n * sizeof(T));
  if (n) std::memcpy(t.bytes.data(), p, n * sizeof(T));
  tensors.push_back(std::move(t));
}

template <typename T>
std::vector<T> extract(const Archive::Tensor& t, const char* dtype) {
  if (t.dtype != dtype)
    throw LoadError("tensor " + t.name + " has dtype " + t.dtype + ", expected " +
                    dtype);
  std::vector<T> out(t.count);
  if (t.count) std::memcpy(out.data(), t.bytes.data(), t.count * sizeof(T));
  return out;
}

}  // namespace

void Archive::add_f32(const std::string& name, const float* p, std::size_t n) {
  append_tensor(tensors_, name, "f32", p, n);
}
void Archive::add_f64(const std::string& name, const double* p, std::size_t n) {
  append_tensor(tensors_, name, "f64", p, n);
}
void Archive::add_u64(const std::string& name, const std::uint64_t* p, std::size_t n) {
  append_tensor(tensors_, name, "u64", p, n);
}

bool Archive::has(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return true;
  return false;
}

const Archive::Tensor& Archive::tensor(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw LoadError("archive has no tensor named " + name);
}

std::vector<float> Archive::read_f32(const std::string& name) const {
  return extract<float>(tensor(name), "f32");
}
std::vector<double> Archive::read_f64(const std::string& name) const {
  return extract<double>(tensor(name), "f64");
}
std::vector<std::uint64_t> Archive::read_u64(const std::string& name) const {
  return extract<std::uint64_t>(tensor(name), "u64");
}

void Archive::write(const std::string& path) const {
  nlohmann::json manifest;
  manifest["format_version"] = kVersion;
  manifest["meta"] = meta;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors_) {
    table.push_back({{"name", t.name},
                     {"dtype", t.dtype},
                     {"count", t.count},
                     {"offset", offset}});
    offset += t.bytes.size();
  }
  manifest["tensors"] = table;
  const std::string json = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t json_len = json.size();
  out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  for (const auto& t : tensors_)
    out.write(reinterpret_cast<const char*>(t.bytes.data()),
              static_cast<std::streamsize>(t.bytes.size()));
  if (!out) throw LoadError("write failed: " + path);
}

Archive Archive::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint not found: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw LoadError("not a checkpoint archive: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion)
    throw LoadError("unsupported checkpoint version in " + path);
  std::uint64_t json_len = 0;
  in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
  if (!in || json_len > (1ull << 31)) throw LoadError("corrupt manifest length in " + path);
  std::string json(json_len, '\0');
  in.read(json.data(), static_cast<std::streamsize>(json_len));
  if (!in) throw LoadError("truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("corrupt manifest in " + path + ": " + e.what());
  }

  Archive ar;
  try {
    ar.meta = manifest.at("meta");
    const std::streampos payload_start = in.tellg();
    for (const auto& entry : manifest.at("tensors")) {
      Tensor t;
      t.name = entry.at("name").get<std::string>();
      t.dtype = entry.at("dtype").get<std::string>();
      t.count = entry.at("count").get<std::uint64_t>();
      const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
      std::size_t elem = 0;
      if (t.dtype == "f32")
        elem = 4;
      else if (t.dtype == "f64" || t.dtype == "u64")
        elem = 8;
      else
        throw LoadError("unknown dtype " + t.dtype + " in " + path);
      t.bytes.resize(t.count * elem);
      in.seekg(payload_start + static_cast<std::streamoff>(offset));
      in.read(reinterpret_cast<char*>(t.bytes.data()),
              static_cast<std::streamsize>(t.bytes.size()));
      if (!in) throw LoadError("truncated tensor " + t.name + " in " + path);
      ar.tensors_.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed manifest in " + path + ": " + e.what());
  }
  return ar;
}

}  // namespace spoofbreak::io
