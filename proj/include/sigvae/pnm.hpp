#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigvae/image.hpp"

namespace sigvae {

/// Netpbm decode failure. offset is the byte position where parsing stopped.
class PnmError : public std::runtime_error {
 public:
  enum class Kind { unsupported_magic, malformed_header, truncated_payload, io };

  PnmError(Kind kind, std::size_t offset, const std::string& what);

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

/// Decodes binary P5 (gray) or P6 (rgb, converted by luminance), maxval <= 255.
GrayImage decode_pnm(std::span<const std::uint8_t> bytes);
GrayImage load_image(const std::filesystem::path& path);

/// P5, maxval 255, each intensity quantized to round(v * 255).
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void save_pgm(const std::filesystem::path& path, const GrayImage& img);

}  // namespace sigvae
