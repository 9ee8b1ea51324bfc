#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgvc/dsp.hpp"
#include "sgvc/model.hpp"

namespace sgvc {

struct ConversionRecord {
  std::string source_id;
  std::string target_speaker;
  std::filesystem::path converted_wave_path;
  std::vector<std::filesystem::path> target_reference_paths;
  std::string transcript;  // optional, for external ASR scoring
};

struct F0Diff {
  bool valid = false;         // false when the converted audio has no voiced frame
  double value = 0;           // |mean F0(converted) - mean F0(references)|, Hz
  double converted_f0 = 0;
  double reference_f0 = 0;
};

/// Pooled voiced-frame mean of the references against the converted
/// waveform's voiced mean. Throws EmptyInputError without references or for
/// empty audio, DataError if no reference frame is voiced.
F0Diff compute_f0_diff(const Waveform& converted, std::span<const Waveform> references,
                       const MelConfig& cfg, const F0Params& params = {});

struct SpeakerF0 {
  std::string speaker;
  double f0_diff = 0;  // mean over the speaker's valid records
  std::size_t valid = 0;
  std::size_t invalid = 0;
};

struct F0Report {
  std::vector<double> per_record;  // valid records, in input order
  std::vector<SpeakerF0> per_speaker;
  double m_f0_diff = 0;            // mean of per_record
  std::size_t invalid_count = 0;
};

/// Arithmetic mean of per-record differences.
double mean_f0_diff(std::span<const double> per_record);

/// Loads every record's audio and builds the per-speaker table. Records
/// whose conversion is fully unvoiced are counted as invalid and left out of
/// the means.
F0Report f0_report(const std::vector<ConversionRecord>& records, const MelConfig& cfg,
                   const F0Params& params = {});

/// Fraction of converted utterances the classifier assigns to their target
/// speaker. `speakers` is the classifier's label table. Throws
/// EmptyInputError for no records, SchemaError if a target speaker is not
/// in the table.
double compute_cls(const std::vector<ConversionRecord>& records, VoiceConversionModel& classifier,
                   const std::vector<std::string>& speakers, const MelConfig& cfg);

/// Records CSV: source_id,target_speaker,converted_wave_path,
/// target_reference_paths (';'-separated),transcript. Relative paths are
/// resolved against the file's directory.
std::vector<ConversionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   const std::vector<ConversionRecord>& records);

/// Manifest for external scoring tools, paths written relative to the
/// manifest's directory. Throws IoError if the file cannot be written.
void export_external_manifest(const std::vector<ConversionRecord>& records,
                              const std::filesystem::path& out_path);
std::vector<ConversionRecord> read_external_manifest(const std::filesystem::path& path);

/// JSON report: per-speaker table (id, optional gender, F0_diff), mF0_diff,
/// CLS when available, invalid-record count.
void write_evaluation_report(const std::filesystem::path& path, const F0Report& f0,
                             std::optional<double> cls,
                             const std::map<std::string, std::string>& genders = {});

}  // namespace sgvc
