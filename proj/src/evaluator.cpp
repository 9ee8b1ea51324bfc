#include "sgvc/evaluator.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sgvc/dataset.hpp"
#include "sgvc/error.hpp"
#include "sgvc/manifest.hpp"
#include "sgvc/trainer.hpp"

namespace fs = std::filesystem;

namespace sgvc {

F0Diff compute_f0_diff(const Waveform& converted, std::span<const Waveform> references,
                       const MelConfig& cfg, const F0Params& params) {
  if (converted.empty()) throw EmptyInputError("converted waveform is empty");
  if (references.empty()) throw EmptyInputError("F0 difference needs at least one reference");

  double ref_sum = 0.0;
  std::size_t ref_frames = 0;
  for (const auto& ref : references) {
    const auto track = estimate_f0(ref, cfg, params);
    for (std::size_t i = 0; i < track.f0_hz.size(); ++i) {
      if (track.voiced[i]) {
        ref_sum += track.f0_hz[i];
        ++ref_frames;
      }
    }
  }
  if (ref_frames == 0) throw DataError("target references contain no voiced frame");

  F0Diff out;
  out.reference_f0 = ref_sum / static_cast<double>(ref_frames);
  const auto track = estimate_f0(converted, cfg, params);
  if (track.voiced_count() == 0) return out;
  out.valid = true;
  out.converted_f0 = track.mean_voiced_f0();
  out.value = std::abs(out.converted_f0 - out.reference_f0);
  return out;
}

double mean_f0_diff(std::span<const double> per_record) {
  if (per_record.empty()) return 0.0;
  return std::accumulate(per_record.begin(), per_record.end(), 0.0) /
         static_cast<double>(per_record.size());
}

F0Report f0_report(const std::vector<ConversionRecord>& records, const MelConfig& cfg,
                   const F0Params& params) {
  if (records.empty()) throw EmptyInputError("no conversion records to evaluate");
  F0Report report;
  std::map<std::string, std::vector<double>> by_speaker;
  std::map<std::string, std::size_t> invalid;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (!by_speaker.count(r.target_speaker)) order.push_back(r.target_speaker);
    auto& diffs = by_speaker[r.target_speaker];
    std::vector<Waveform> refs;
    for (const auto& p : r.target_reference_paths)
      refs.push_back(load_and_resample(p, cfg.sample_rate));
    const auto diff =
        compute_f0_diff(load_and_resample(r.converted_wave_path, cfg.sample_rate), refs, cfg, params);
    if (diff.valid) {
      diffs.push_back(diff.value);
      report.per_record.push_back(diff.value);
    } else {
      ++invalid[r.target_speaker];
      ++report.invalid_count;
    }
  }
  for (const auto& speaker : order) {
    const auto& diffs = by_speaker[speaker];
    report.per_speaker.push_back({speaker, mean_f0_diff(diffs), diffs.size(), invalid[speaker]});
  }
  report.m_f0_diff = mean_f0_diff(report.per_record);
  return report;
}

double compute_cls(const std::vector<ConversionRecord>& records, VoiceConversionModel& classifier,
                   const std::vector<std::string>& speakers, const MelConfig& cfg) {
  if (records.empty()) throw EmptyInputError("no conversion records to classify");
  if (static_cast<int>(speakers.size()) != classifier.config().num_speakers) {
    throw SchemaError("classifier has " + std::to_string(classifier.config().num_speakers) +
                      " classes but the speaker table has " + std::to_string(speakers.size()));
  }
  std::vector<Utterance> utts;
  for (const auto& r : records) {
    const auto it = std::find(speakers.begin(), speakers.end(), r.target_speaker);
    if (it == speakers.end()) {
      throw SchemaError("target speaker '" + r.target_speaker +
                        "' is unknown to the classifier");
    }
    Utterance u;
    u.id = r.source_id;
    u.label = static_cast<int>(it - speakers.begin());
    u.mel = mel_spectrogram(load_and_resample(r.converted_wave_path, cfg.sample_rate), cfg);
    utts.push_back(std::move(u));
  }
  return classification_accuracy(classifier, MelDataset(std::move(utts), speakers), cfg);
}

namespace {

std::string join_paths(const std::vector<fs::path>& paths, const fs::path& base) {
  std::string out;
  for (const auto& p : paths) {
    if (!out.empty()) out += ';';
    out += base.empty() ? p.generic_string()
                        : fs::absolute(p).lexically_relative(base).generic_string();
  }
  return out;
}

std::vector<fs::path> split_paths(const std::string& field, const fs::path& base) {
  std::vector<fs::path> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    fs::path p(item);
    out.push_back(p.is_relative() ? base / p : p);
  }
  return out;
}

void write_record_csv(const fs::path& path, const std::vector<ConversionRecord>& records) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  const auto base = fs::absolute(path).parent_path();
  os << "source_id,target_speaker,converted_wave_path,target_reference_paths,transcript\n";
  for (const auto& r : records) {
    os << csv_escape(r.source_id) << ',' << csv_escape(r.target_speaker) << ','
       << csv_escape(fs::absolute(r.converted_wave_path).lexically_relative(base).generic_string())
       << ',' << csv_escape(join_paths(r.target_reference_paths, base)) << ','
       << csv_escape(r.transcript) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<ConversionRecord> read_record_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty records file " + path.string());
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"source_id", "target_speaker", "converted_wave_path",
                           "target_reference_paths"}) {
    if (!col.count(need)) throw DataError(path.string() + " lacks column '" + need + "'");
  }
  const auto base = path.parent_path();
  std::vector<ConversionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw DataError("malformed record line in " + path.string());
    ConversionRecord r;
    r.source_id = f[col["source_id"]];
    r.target_speaker = f[col["target_speaker"]];
    fs::path conv(f[col["converted_wave_path"]]);
    r.converted_wave_path = conv.is_relative() ? base / conv : conv;
    r.target_reference_paths = split_paths(f[col["target_reference_paths"]], base);
    if (col.count("transcript")) r.transcript = f[col["transcript"]];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<ConversionRecord> read_records(const fs::path& path) { return read_record_csv(path); }

void write_records(const fs::path& path, const std::vector<ConversionRecord>& records) {
  write_record_csv(path, records);
}

void export_external_manifest(const std::vector<ConversionRecord>& records,
                              const fs::path& out_path) {
  write_record_csv(out_path, records);
}

std::vector<ConversionRecord> read_external_manifest(const fs::path& path) {
  return read_record_csv(path);
}

void write_evaluation_report(const fs::path& path, const F0Report& f0, std::optional<double> cls,
                             const std::map<std::string, std::string>& genders) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& s : f0.per_speaker) {
    nlohmann::json row = {{"id", s.speaker},
                          {"f0_diff", s.f0_diff},
                          {"valid", s.valid},
                          {"invalid", s.invalid}};
    if (const auto it = genders.find(s.speaker); it != genders.end()) row["gender"] = it->second;
    table.push_back(std::move(row));
  }
  nlohmann::json j = {{"per_speaker", table},
                      {"m_f0_diff", f0.m_f0_diff},
                      {"records_valid", f0.per_record.size()},
                      {"records_invalid", f0.invalid_count}};
  j["cls"] = cls ? nlohmann::json(*cls) : nlohmann::json(nullptr);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sgvc
