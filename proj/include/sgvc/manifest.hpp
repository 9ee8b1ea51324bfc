#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sgvc {

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::filesystem::path path;
  std::string split;  // "train", "test", ...
};

/// CSV with header utterance_id,speaker_id,path,split.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ManifestEntry> entries);

  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Sorted distinct speaker ids; the index in this list is the class label.
  const std::vector<std::string>& speakers() const noexcept { return speakers_; }
  int speaker_index(const std::string& speaker) const;  // -1 if unknown

  /// Entries whose split equals `split`; an empty string selects all.
  DatasetManifest filter_split(const std::string& split) const;

  /// Throws DataError naming the first speaker with fewer than
  /// `min_utterances` utterances.
  void validate(std::size_t min_utterances = 2) const;

 private:
  std::vector<ManifestEntry> entries_;
  std::vector<std::string> speakers_;
};

/// Relative paths in the file are resolved against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest);

/// Minimal CSV helpers shared with the evaluator.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

}  // namespace sgvc
