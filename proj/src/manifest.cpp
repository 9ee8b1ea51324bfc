#include "sgvc/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "sgvc/error.hpp"

namespace sgvc {

DatasetManifest::DatasetManifest(std::vector<ManifestEntry> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const auto& e : entries_) ids.insert(e.speaker_id);
  speakers_.assign(ids.begin(), ids.end());
}

int DatasetManifest::speaker_index(const std::string& speaker) const {
  const auto it = std::lower_bound(speakers_.begin(), speakers_.end(), speaker);
  if (it == speakers_.end() || *it != speaker) return -1;
  return static_cast<int>(it - speakers_.begin());
}

DatasetManifest DatasetManifest::filter_split(const std::string& split) const {
  if (split.empty()) return *this;
  std::vector<ManifestEntry> kept;
  for (const auto& e : entries_)
    if (e.split == split) kept.push_back(e);
  return DatasetManifest(std::move(kept));
}

void DatasetManifest::validate(std::size_t min_utterances) const {
  if (entries_.empty()) throw DataError("manifest has no entries");
  std::map<std::string, std::size_t> counts;
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    ++counts[e.speaker_id];
    if (!ids.insert(e.utterance_id).second) {
      throw DataError("duplicate utterance id '" + e.utterance_id + "'");
    }
  }
  for (const auto& [speaker, n] : counts) {
    if (n < min_utterances) {
      throw DataError("speaker '" + speaker + "' has " + std::to_string(n) +
                      " utterance(s); at least " +
                      std::to_string(min_utterances) + " required");
    }
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest " + path.string());
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"utterance_id", "speaker_id", "path", "split"}) {
    if (!col.count(need)) {
      throw DataError("manifest " + path.string() + " lacks column '" + need + "'");
    }
  }
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError("manifest line " + std::to_string(line_no) + " has " +
                      std::to_string(f.size()) + " fields");
    }
    ManifestEntry e;
    e.utterance_id = f[col["utterance_id"]];
    e.speaker_id = f[col["speaker_id"]];
    e.path = f[col["path"]];
    if (e.path.is_relative()) e.path = base / e.path;
    e.split = f[col["split"]];
    entries.push_back(std::move(e));
  }
  return DatasetManifest(std::move(entries));
}

void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  os << "utterance_id,speaker_id,path,split\n";
  for (const auto& e : manifest.entries()) {
    const auto rel = std::filesystem::absolute(e.path).lexically_relative(base);
    os << csv_escape(e.utterance_id) << ',' << csv_escape(e.speaker_id) << ','
       << csv_escape(rel.generic_string()) << ',' << csv_escape(e.split) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sgvc
