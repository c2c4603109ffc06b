#include "lpm/image_io.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace lpm {

namespace {

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return false;
  tok.push_back(static_cast<char>(ch));
  while ((ch = in.peek()) != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(in.get()));
  }
  return true;
}

int parse_dim(const std::string& tok, const std::filesystem::path& path) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw ImageIoError(ImageErrc::bad_header, "bad dimension '" + tok + "' in " + quoted(path));
  }
  if (v <= 0) throw ImageIoError(ImageErrc::bad_header, "non-positive dimension in " + quoted(path));
  return v;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Grid read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(ImageErrc::open_failed, "cannot open " + quoted(path));

  std::string magic, wtok, htok, stok;
  if (!next_token(in, magic)) {
    throw ImageIoError(ImageErrc::bad_header, "empty PFM " + quoted(path));
  }
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else if (magic.size() == 2 && magic[0] == 'P') {
    throw ImageIoError(ImageErrc::unsupported_channels,
                       "unsupported PFM variant '" + magic + "' in " + quoted(path));
  } else {
    throw ImageIoError(ImageErrc::bad_header, "bad PFM magic in " + quoted(path));
  }
  if (!next_token(in, wtok) || !next_token(in, htok) || !next_token(in, stok)) {
    throw ImageIoError(ImageErrc::bad_header, "incomplete PFM header in " + quoted(path));
  }
  const int w = parse_dim(wtok, path);
  const int h = parse_dim(htok, path);
  double scale = 0.0;
  try {
    scale = std::stod(stok);
  } catch (const std::exception&) {
    throw ImageIoError(ImageErrc::bad_header, "bad PFM scale in " + quoted(path));
  }
  if (scale == 0.0 || !std::isfinite(scale)) {
    throw ImageIoError(ImageErrc::bad_header, "zero PFM scale in " + quoted(path));
  }
  // Exactly one whitespace byte separates the header from the payload.
  in.get();
  const bool little = scale < 0.0;

  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(std::uint32_t)) {
    throw ImageIoError(ImageErrc::truncated, "truncated PFM payload in " + quoted(path));
  }
  const bool host_little = std::endian::native == std::endian::little;
  if (little != host_little) {
    for (auto& v : raw) v = __builtin_bswap32(v);
  }

  Grid g(w, h, channels);
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  for (int y = 0; y < h; ++y) {
    const std::uint32_t* src = raw.data() + static_cast<std::size_t>(h - 1 - y) * row;
    std::memcpy(g.data().data() + static_cast<std::size_t>(y) * row, src,
                row * sizeof(float));
  }
  return g;
}

void write_pfm(const std::filesystem::path& path, const Grid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw ImageIoError(ImageErrc::unsupported_channels,
                       "PFM supports 1 or 3 channels, got " + std::to_string(grid.channels()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError(ImageErrc::write_failed, "cannot write " + quoted(path));
  out << (grid.channels() == 1 ? "Pf" : "PF") << '\n'
      << grid.width() << ' ' << grid.height() << '\n'
      << (std::endian::native == std::endian::little ? "-1.0" : "1.0") << '\n';
  const std::size_t row = static_cast<std::size_t>(grid.width()) * grid.channels();
  for (int y = grid.height() - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(grid.data().data() + y * row),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw ImageIoError(ImageErrc::write_failed, "short write to " + quoted(path));
}

Grid read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(ImageErrc::open_failed, "cannot open " + quoted(path));
  std::string magic, wtok, htok, mtok;
  if (!next_token(in, magic) || (magic != "P6" && magic != "P5")) {
    throw ImageIoError(ImageErrc::bad_header, "expected binary PPM/PGM in " + quoted(path));
  }
  if (!next_token(in, wtok) || !next_token(in, htok) || !next_token(in, mtok)) {
    throw ImageIoError(ImageErrc::bad_header, "incomplete PNM header in " + quoted(path));
  }
  const int w = parse_dim(wtok, path);
  const int h = parse_dim(htok, path);
  const int maxval = parse_dim(mtok, path);
  if (maxval > 255) {
    throw ImageIoError(ImageErrc::unsupported_channels, "16-bit PNM not supported: " + quoted(path));
  }
  in.get();
  const int c = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * c);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw ImageIoError(ImageErrc::truncated, "truncated PNM payload in " + quoted(path));
  }
  Grid g(w, h, c);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    g.data()[i] = static_cast<float>(bytes[i]) / static_cast<float>(maxval);
  }
  return g;
}

void write_pnm(const std::filesystem::path& path, const Grid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw ImageIoError(ImageErrc::unsupported_channels, "PNM supports 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError(ImageErrc::write_failed, "cannot write " + quoted(path));
  out << (grid.channels() == 3 ? "P6" : "P5") << '\n'
      << grid.width() << ' ' << grid.height() << "\n255\n";
  std::vector<std::uint8_t> bytes(grid.data().size());
  std::ranges::transform(grid.data(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

struct PngReadDeleter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadDeleter() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriteDeleter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteDeleter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

Grid read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageIoError(ImageErrc::open_failed, "cannot open " + quoted(path));
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageIoError(ImageErrc::bad_header, "not a PNG file: " + quoted(path));
  }
  PngReadDeleter h;
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!h.png) throw ImageIoError(ImageErrc::decode_failed, "libpng init failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw ImageIoError(ImageErrc::decode_failed, "libpng init failed");

  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  int w = 0, hgt = 0, c = 0;
  if (setjmp(png_jmpbuf(h.png))) {
    throw ImageIoError(ImageErrc::decode_failed, "corrupt PNG " + quoted(path));
  }
  png_init_io(h.png, fp.get());
  png_set_sig_bytes(h.png, 8);
  png_read_info(h.png, h.info);
  const png_byte color = png_get_color_type(h.png, h.info);
  const png_byte depth = png_get_bit_depth(h.png, h.info);
  if (depth == 16) png_set_strip_16(h.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(h.png);
  if (png_get_valid(h.png, h.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(h.png);
  png_set_strip_alpha(h.png);
  png_read_update_info(h.png, h.info);
  w = static_cast<int>(png_get_image_width(h.png, h.info));
  hgt = static_cast<int>(png_get_image_height(h.png, h.info));
  c = png_get_channels(h.png, h.info);
  const std::size_t stride = png_get_rowbytes(h.png, h.info);
  pixels.resize(stride * hgt);
  rows.resize(hgt);
  for (int y = 0; y < hgt; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(h.png, rows.data());
  png_read_end(h.png, nullptr);

  if (c != 1 && c != 3) {
    throw ImageIoError(ImageErrc::unsupported_channels, "unsupported PNG layout in " + quoted(path));
  }
  Grid g(w, hgt, c);
  for (int y = 0; y < hgt; ++y) {
    for (int i = 0; i < w * c; ++i) {
      g.data()[static_cast<std::size_t>(y) * w * c + i] = rows[y][i] / 255.0f;
    }
  }
  return g;
}

void write_png(const std::filesystem::path& path, const Grid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw ImageIoError(ImageErrc::unsupported_channels, "PNG writer supports 1 or 3 channels");
  }
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageIoError(ImageErrc::write_failed, "cannot write " + quoted(path));
  PngWriteDeleter h;
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!h.png) throw ImageIoError(ImageErrc::write_failed, "libpng init failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw ImageIoError(ImageErrc::write_failed, "libpng init failed");

  const int w = grid.width();
  const int hgt = grid.height();
  const int c = grid.channels();
  std::vector<std::uint8_t> bytes(grid.data().size());
  std::ranges::transform(grid.data(), bytes.begin(), to_byte);
  std::vector<png_bytep> rows(hgt);
  for (int y = 0; y < hgt; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * c;

  if (setjmp(png_jmpbuf(h.png))) {
    throw ImageIoError(ImageErrc::write_failed, "PNG encode failed for " + quoted(path));
  }
  png_init_io(h.png, fp.get());
  png_set_IHDR(h.png, h.info, w, hgt, 8, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);
  png_write_image(h.png, rows.data());
  png_write_end(h.png, nullptr);
}

Grid read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  if (ext == ".pfm") return read_pfm(path);
  throw ImageIoError(ImageErrc::decode_failed, "unsupported image type " + quoted(path));
}

}  // namespace lpm
