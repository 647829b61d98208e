#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sigvae {

/// Forged is the positive class throughout.
enum class Label { genuine = 0, forged = 1 };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

struct ManifestRow {
  std::string path;  // relative paths resolve against the manifest's directory
  std::string identity;
  Label label = Label::genuine;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset listing: CSV with header `path,identity,label`.
struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestRow& row) const;
  /// Distinct identities in first-appearance order.
  std::vector<std::string> identities() const;
  std::size_t count(Label label) const;
};

Manifest parse_manifest(std::string_view csv, std::filesystem::path base_dir = {});
Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ManifestRow>& rows);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace sigvae
