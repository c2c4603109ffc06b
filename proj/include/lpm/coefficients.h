#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpm/conv.h"

namespace lpm {

enum class CoefficientErrc {
  open_failed,
  bad_magic,
  version_mismatch,
  truncated,
  shape_mismatch,
  unknown_tensor,
  duplicate_name,
  missing_tensor,
  write_failed,
};

class CoefficientError : public std::runtime_error {
 public:
  CoefficientError(CoefficientErrc code, std::string tensor, const std::string& what)
      : std::runtime_error(what), code_(code), tensor_(std::move(tensor)) {}
  CoefficientErrc code() const { return code_; }
  // Name of the offending tensor, empty when the error is not tensor-specific.
  const std::string& tensor() const { return tensor_; }

 private:
  CoefficientErrc code_;
  std::string tensor_;
};

inline constexpr std::uint32_t kCoefficientVersion = 1;

// Named weights for the fixed network graphs. Every tensor name belongs to the
// versioned registry below; consumers ask for whole groups ("fpn.", "score.").
//
// Version 1 registry (symbols bind on first use and must agree afterwards):
//   fpn.conv{0..3}.{weight,bias}    [F0,3,3,3] [F1,F0,3,3] [F2,F1,3,3] [F3,F2,3,3]
//   fpn.lat{1..3}.{weight,bias}     [C,Fk,1,1]
//   fpn.out{1..3}.{weight,bias}     [C,C,3,3]
//   prop.stage{1..3}.{weight,bias}  [Pk,C,3,3]   Pk = 2 * propagation samples
//   eval.stage{1..3}.{weight,bias}  [Ek,C,3,3]   Ek = 2 * evaluation samples
//   viewweight.{0,1}                [VH,G] -> [1,VH]            relu, sigmoid
//   score.{0,1,2}                   [SH1,G] -> [SH2,SH1] -> [1,SH2]  relu, relu, none
//   spatialweight.{0,1}             [WH,G] -> [1,WH]            relu, sigmoid
//   refine.image                    [RI,3,3,3]
//   refine.depth                    [RD,1,3,3]
//   refine.depth_up                 [RD,RD,4,4]  transposed, stride 2
//   refine.fuse0 / fuse1            [RF,RD+RI,3,3] / [RF,RF,3,3]
//   refine.residual                 [1,RF,3,3]
class CoefficientSet {
 public:
  std::uint32_t version = kCoefficientVersion;

  void add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  // True when at least one tensor name starts with `prefix`.
  bool has_group(const std::string& prefix) const;
  const Tensor& require(const std::string& name) const;
  const Tensor* find(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::map<std::string, Tensor> tensors_;
  std::vector<std::string> order_;
};

// Checks every tensor name and shape against the registry for set.version.
void validate_coefficients(const CoefficientSet& set);

// Binary layout: "PMNW", u32 version, u32 count, then per tensor
// u16 name length, name bytes, u8 ndim, u32 dims[ndim], f32 payload (little endian).
CoefficientSet load_coefficients(const std::filesystem::path& path);
void save_coefficients(const std::filesystem::path& path, const CoefficientSet& set);

}  // namespace lpm
