#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mrphe {

// Minimal RFC 4180 field splitting (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

struct ManifestRow {
  std::string path;   // doubles as the image id
  std::string label;
};

// CSV with header `path,label`. Relative paths resolve against base_dir.
struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestRow& row) const;
  // Label indices against `class_names`; throws DataError on an unknown label.
  std::vector<int> label_indices(const std::vector<std::string>& class_names) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Deterministic validation subset: the round(fraction * N) rows with the smallest
// fnv1a64(seed, id) hash, returned in manifest order.
Manifest validation_subset(const Manifest& manifest, double fraction, std::uint64_t seed);

}  // namespace mrphe
