#include "mrphe/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "mrphe/errors.hpp"
#include "mrphe/rng.hpp"

namespace mrphe {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) throw DataError("unterminated quote in CSV line: " + line);
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::filesystem::path Manifest::resolve(const ManifestRow& row) const {
  std::filesystem::path p(row.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<int> Manifest::label_indices(const std::vector<std::string>& class_names) const {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < class_names.size(); ++i) index[class_names[i]] = static_cast<int>(i);
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto it = index.find(r.label);
    if (it == index.end()) throw DataError("manifest row '" + r.path + "' has unknown label '" + r.label + "'");
    out.push_back(it->second);
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"path", "label"})
    throw DataError("manifest " + path.string() + ": header must be 'path,label'");
  std::set<std::string> ids;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2 || fields[0].empty())
      throw DataError("manifest " + path.string() + ": malformed row at line " + std::to_string(lineno));
    if (!ids.insert(fields[0]).second)
      throw DataError("manifest " + path.string() + ": duplicate id '" + fields[0] + "'");
    m.rows.push_back({std::move(fields[0]), std::move(fields[1])});
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << "path,label\n";
  for (const auto& r : manifest.rows) out << csv_escape(r.path) << ',' << csv_escape(r.label) << '\n';
}

Manifest validation_subset(const Manifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("val_fraction: must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(manifest.rows.size())));
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i)
    keyed.emplace_back(RandomStream::keyed(seed, "val/" + manifest.rows[i].path).next_u64(), i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < n; ++i) picked.push_back(keyed[i].second);
  std::sort(picked.begin(), picked.end());
  Manifest out{{}, manifest.base_dir};
  for (auto i : picked) out.rows.push_back(manifest.rows[i]);
  return out;
}

}  // namespace mrphe
