#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spoofbreak::io {

// Single-file checkpoint container: magic "SBCK", version, a JSON manifest
// (metadata + tensor table), then raw little-endian tensor payload. JSON keys
// are emitted sorted, so identical contents produce identical bytes.
class Archive {
public:
  struct Tensor {
    std::string name;
    std::string dtype;  // "f32" | "f64" | "u64"
    std::uint64_t count = 0;
    std::vector<unsigned char> bytes;
  };

  nlohmann::json meta = nlohmann::json::object();

  void add_f32(const std::string& name, const float* p, std::size_t n);
  void add_f64(const std::string& name, const double* p, std::size_t n);
  void add_u64(const std::string& name, const std::uint64_t* p, std::size_t n);

  bool has(const std::string& name) const;
  const Tensor& tensor(const std::string& name) const;  // LoadError if absent

  // typed readers; dtype must match exactly
  std::vector<float> read_f32(const std::string& name) const;
  std::vector<double> read_f64(const std::string& name) const;
  std::vector<std::uint64_t> read_u64(const std::string& name) const;

  const std::vector<Tensor>& tensors() const { return tensors_; }

  void write(const std::string& path) const;
  static Archive read(const std::string& path);  // LoadError on any corruption

private:
  std::vector<Tensor> tensors_;
};

}  // namespace spoofbreak::io
