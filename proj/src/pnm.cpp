#include "sigvae/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace sigvae {

namespace {

const char* kind_name(PnmError::Kind kind) {
  switch (kind) {
    case PnmError::Kind::unsupported_magic: return "unsupported magic";
    case PnmError::Kind::malformed_header: return "malformed header";
    case PnmError::Kind::truncated_payload: return "truncated payload";
    case PnmError::Kind::io: return "i/o error";
  }
  return "error";
}

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, std::size_t start)
      : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) {
        throw PnmError(PnmError::Kind::malformed_header, start,
                       std::string(field) + " is unreasonably large");
      }
      ++pos_;
    }
    if (pos_ == start) {
      throw PnmError(PnmError::Kind::malformed_header, pos_,
                     std::string("expected ") + field);
    }
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

}  // namespace

PnmError::PnmError(Kind kind, std::size_t offset, const std::string& what)
    : std::runtime_error(std::string(kind_name(kind)) + " at byte " + std::to_string(offset) +
                         ": " + what),
      kind_(kind),
      offset_(offset) {}

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw PnmError(PnmError::Kind::unsupported_magic, 0, "expected P5 or P6");
  }
  const bool rgb = bytes[1] == '6';
  std::size_t pos = 2;
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw PnmError(PnmError::Kind::malformed_header, pos, "missing whitespace after magic");
  }
  HeaderReader fields(bytes, pos);
  const unsigned long width = fields.read_uint("width");
  const unsigned long height = fields.read_uint("height");
  const unsigned long maxval = fields.read_uint("maxval");
  pos = fields.pos();
  if (width == 0 || height == 0) {
    throw PnmError(PnmError::Kind::malformed_header, pos, "zero image dimension");
  }
  if (maxval == 0 || maxval > 255) {
    throw PnmError(PnmError::Kind::malformed_header, pos, "maxval must be in [1,255]");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw PnmError(PnmError::Kind::malformed_header, pos, "missing whitespace before payload");
  }
  ++pos;

  const std::size_t channels = rgb ? 3 : 1;
  const std::size_t needed = width * height * channels;
  if (bytes.size() - pos < needed) {
    throw PnmError(PnmError::Kind::truncated_payload, bytes.size(),
                   "expected " + std::to_string(needed) + " payload bytes, found " +
                       std::to_string(bytes.size() - pos));
  }

  const double scale = 1.0 / static_cast<double>(maxval);
  std::vector<double> px(width * height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    double v;
    if (rgb) {
      const auto* p = &bytes[pos + 3 * i];
      v = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) * scale;
    } else {
      v = bytes[pos + i] * scale;
    }
    px[i] = std::clamp(v, 0.0, 1.0);
  }
  return GrayImage(width, height, std::move(px));
}

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PnmError(PnmError::Kind::io, 0, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PnmError(PnmError::Kind::io, 0, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sigvae
