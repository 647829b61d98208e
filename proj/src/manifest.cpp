#include "sigvae/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sigvae {

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ManifestError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::forged ? "forged" : "genuine";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "genuine") return Label::genuine;
  if (text == "forged") return Label::forged;
  return std::nullopt;
}

std::filesystem::path Manifest::resolve(const ManifestRow& row) const {
  std::filesystem::path p(row.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::vector<std::string> Manifest::identities() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (std::find(ids.begin(), ids.end(), r.identity) == ids.end()) ids.push_back(r.identity);
  }
  return ids;
}

std::size_t Manifest::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [label](const auto& r) { return r.label == label; }));
}

Manifest parse_manifest(std::string_view csv, std::filesystem::path base_dir) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (!saw_header) {
      if (fields != std::vector<std::string>{"path", "identity", "label"}) {
        throw ManifestError("manifest header must be `path,identity,label`");
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != 3) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const auto label = parse_label(fields[2]);
    if (!label) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": unknown label '" +
                          fields[2] + "'");
    }
    if (fields[0].empty()) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": empty path");
    }
    m.rows.push_back({std::move(fields[0]), std::move(fields[1]), *label});
  }
  if (!saw_header) throw ManifestError("manifest is missing its header");
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = "path,identity,label\n";
  for (const auto& r : rows) {
    out += quote_field(r.path);
    out += ',';
    out += quote_field(r.identity);
    out += ',';
    out += to_string(r.label);
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << format_manifest(rows);
}

}  // namespace sigvae
