#include "lpm/coefficients.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

namespace lpm {

void CoefficientSet::add(const std::string& name, Tensor t) {
  if (tensors_.count(name)) {
    throw CoefficientError(CoefficientErrc::duplicate_name, name, "duplicate tensor '" + name + "'");
  }
  if (t.values.size() != t.numel()) {
    throw CoefficientError(CoefficientErrc::shape_mismatch, name,
                           "tensor '" + name + "' payload does not match its shape");
  }
  tensors_.emplace(name, std::move(t));
  order_.push_back(name);
}

bool CoefficientSet::has_group(const std::string& prefix) const {
  auto it = tensors_.lower_bound(prefix);
  return it != tensors_.end() && it->first.starts_with(prefix);
}

const Tensor* CoefficientSet::find(const std::string& name) const {
  auto it = tensors_.find(name);
  return it == tensors_.end() ? nullptr : &it->second;
}

const Tensor& CoefficientSet::require(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw CoefficientError(CoefficientErrc::missing_tensor, name, "missing tensor '" + name + "'");
}

namespace {

using Dims = std::vector<std::string>;

const std::map<std::string, Dims>& registry_v1() {
  static const std::map<std::string, Dims> reg = [] {
    std::map<std::string, Dims> r;
    auto conv = [&r](const std::string& base, Dims w, const std::string& out) {
      r[base + ".weight"] = std::move(w);
      r[base + ".bias"] = {out};
    };
    conv("fpn.conv0", {"F0", "3", "3", "3"}, "F0");
    conv("fpn.conv1", {"F1", "F0", "3", "3"}, "F1");
    conv("fpn.conv2", {"F2", "F1", "3", "3"}, "F2");
    conv("fpn.conv3", {"F3", "F2", "3", "3"}, "F3");
    for (int k = 1; k <= 3; ++k) {
      const std::string s = std::to_string(k);
      conv("fpn.lat" + s, {"C", "F" + s, "1", "1"}, "C");
      conv("fpn.out" + s, {"C", "C", "3", "3"}, "C");
      conv("prop.stage" + s, {"P" + s, "C", "3", "3"}, "P" + s);
      conv("eval.stage" + s, {"E" + s, "C", "3", "3"}, "E" + s);
    }
    conv("viewweight.0", {"VH", "G"}, "VH");
    conv("viewweight.1", {"1", "VH"}, "1");
    conv("score.0", {"SH1", "G"}, "SH1");
    conv("score.1", {"SH2", "SH1"}, "SH2");
    conv("score.2", {"1", "SH2"}, "1");
    conv("spatialweight.0", {"WH", "G"}, "WH");
    conv("spatialweight.1", {"1", "WH"}, "1");
    conv("refine.image", {"RI", "3", "3", "3"}, "RI");
    conv("refine.depth", {"RD", "1", "3", "3"}, "RD");
    conv("refine.depth_up", {"RD", "RD", "4", "4"}, "RD");
    conv("refine.fuse0", {"RF", "RD+RI", "3", "3"}, "RF");
    conv("refine.fuse1", {"RF", "RF", "3", "3"}, "RF");
    conv("refine.residual", {"1", "RF", "3", "3"}, "1");
    return r;
  }();
  return reg;
}

bool is_literal(const std::string& d) { return !d.empty() && std::isdigit(static_cast<unsigned char>(d[0])); }

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace

void validate_coefficients(const CoefficientSet& set) {
  if (set.version != kCoefficientVersion) {
    throw CoefficientError(CoefficientErrc::version_mismatch, "",
                           "coefficient version " + std::to_string(set.version) +
                               " is not supported (expected " +
                               std::to_string(kCoefficientVersion) + ")");
  }
  const auto& reg = registry_v1();
  std::map<std::string, int> bound;
  auto mismatch = [](const std::string& name, const std::vector<int>& shape) {
    return CoefficientError(CoefficientErrc::shape_mismatch, name,
                            "tensor '" + name + "' has unexpected shape " + shape_string(shape));
  };

  // Pass 1 binds plain symbols, pass 2 checks sums that depend on them.
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& name : set.names()) {
      auto it = reg.find(name);
      if (it == reg.end()) {
        throw CoefficientError(CoefficientErrc::unknown_tensor, name,
                               "tensor '" + name + "' is not part of the version 1 graph");
      }
      const Dims& dims = it->second;
      const Tensor& t = set.require(name);
      if (t.shape.size() != dims.size()) throw mismatch(name, t.shape);
      for (std::size_t i = 0; i < dims.size(); ++i) {
        const std::string& d = dims[i];
        const int actual = t.shape[i];
        if (actual <= 0) throw mismatch(name, t.shape);
        if (is_literal(d)) {
          if (actual != std::stoi(d)) throw mismatch(name, t.shape);
        } else if (auto plus = d.find('+'); plus != std::string::npos) {
          if (pass == 0) continue;
          const auto a = bound.find(d.substr(0, plus));
          const auto b = bound.find(d.substr(plus + 1));
          if (a != bound.end() && b != bound.end() && a->second + b->second != actual) {
            throw mismatch(name, t.shape);
          }
        } else {
          auto [pos, inserted] = bound.emplace(d, actual);
          if (!inserted && pos->second != actual) throw mismatch(name, t.shape);
        }
      }
    }
  }
}

namespace {

template <typename T>
T byte_reversed(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::ranges::reverse(bytes);
  return std::bit_cast<T>(bytes);
}

template <typename T>
T read_le(std::istream& in, const std::string& context) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) {
    throw CoefficientError(CoefficientErrc::truncated, context, "truncated coefficient file");
  }
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    v = byte_reversed(v);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    v = byte_reversed(v);
  }
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

CoefficientSet load_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CoefficientError(CoefficientErrc::open_failed, "",
                           "cannot open coefficient file '" + path.string() + "'");
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "PMNW", 4) != 0) {
    throw CoefficientError(CoefficientErrc::bad_magic, "",
                           "'" + path.string() + "' is not a coefficient file");
  }
  CoefficientSet set;
  set.version = read_le<std::uint32_t>(in, "");
  if (set.version != kCoefficientVersion) {
    throw CoefficientError(CoefficientErrc::version_mismatch, "",
                           "coefficient version " + std::to_string(set.version) +
                               " is not supported");
  }
  const auto count = read_le<std::uint32_t>(in, "");
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto len = read_le<std::uint16_t>(in, "");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (in.gcount() != len) {
      throw CoefficientError(CoefficientErrc::truncated, "", "truncated tensor name");
    }
    const auto ndim = read_le<std::uint8_t>(in, name);
    Tensor t;
    for (int d = 0; d < ndim; ++d) {
      const auto dim = read_le<std::uint32_t>(in, name);
      if (dim == 0 || dim > (1u << 24)) {
        throw CoefficientError(CoefficientErrc::shape_mismatch, name,
                               "tensor '" + name + "' has an invalid dimension");
      }
      t.shape.push_back(static_cast<int>(dim));
    }
    t.values.resize(t.numel());
    for (float& v : t.values) {
      const auto bits = read_le<std::uint32_t>(in, name);
      v = std::bit_cast<float>(bits);
    }
    set.add(name, std::move(t));
  }
  validate_coefficients(set);
  return set;
}

void save_coefficients(const std::filesystem::path& path, const CoefficientSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CoefficientError(CoefficientErrc::write_failed, "",
                           "cannot write coefficient file '" + path.string() + "'");
  }
  out.write("PMNW", 4);
  write_le<std::uint32_t>(out, set.version);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  for (const auto& name : set.names()) {
    const Tensor& t = set.require(name);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : t.values) write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) {
    throw CoefficientError(CoefficientErrc::write_failed, "", "short write to '" + path.string() + "'");
  }
}

}  // namespace lpm
