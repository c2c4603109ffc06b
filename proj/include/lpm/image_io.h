#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "lpm/grid.h"

namespace lpm {

enum class ImageErrc {
  open_failed,
  bad_header,
  truncated,
  unsupported_channels,
  decode_failed,
  write_failed,
};

class ImageIoError : public std::runtime_error {
 public:
  ImageIoError(ImageErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ImageErrc code() const { return code_; }

 private:
  ImageErrc code_;
};

// PFM: "Pf" (1 channel) or "PF" (3 channels), scanlines stored bottom to top.
// Writes little-endian (negative scale). Reads either endianness.
Grid read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Grid& grid);

// 8-bit images are mapped to floats in [0, 1]. PNG goes through libpng; PPM/PGM
// (binary P6/P5) are parsed directly. Dispatch is by file extension.
Grid read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Grid& grid);
Grid read_png(const std::filesystem::path& path);
Grid read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Grid& grid);

}  // namespace lpm
