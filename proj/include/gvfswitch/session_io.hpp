#ifndef GVFSWITCH_SESSION_IO_HPP
#define GVFSWITCH_SESSION_IO_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gvfswitch/gvf.hpp"
#include "gvfswitch/signal_pipeline.hpp"
#include "gvfswitch/switch_advisor.hpp"

namespace gvfswitch {

inline constexpr int kLogFormatVersion = 1;

enum class SwitchSource { None, User, Auto };
const char* source_name(SwitchSource s);

struct PredictionEntry {
  double raw = 0.0;
  double normalized = 0.0;
  bool operator==(const PredictionEntry&) const = default;
};

struct MaturedEntry {
  int question = 0;  // index into the header's question list
  MaturedReturn matured;
  bool operator==(const MaturedEntry&) const = default;
};

/// One tick of a session.
struct SessionLogRecord {
  TimeStepSample sample;
  ProcessedSignals processed;
  std::vector<PredictionEntry> predictions;  // header question order
  std::vector<MaturedEntry> matured;
  AdvisorOutput advisor;
  Autonomy autonomy = Autonomy::Manual;
  SwitchSource source = SwitchSource::None;
  std::optional<int> switched_to;
  std::uint64_t config_hash = 0;

  bool operator==(const SessionLogRecord&) const = default;
};

struct SessionLogHeader {
  int version = kLogFormatVersion;
  std::uint64_t config_hash = 0;
  std::vector<std::string> question_ids;
  std::string config_json;  // full engine configuration, single line

  bool operator==(const SessionLogHeader&) const = default;
};

/// Text form of one record (no trailing newline). Doubles are C99 hex-float
/// literals so parsing restores them bit for bit.
std::string format_record(const SessionLogRecord& record);
/// Throws FormatError describing the first bad field.
SessionLogRecord parse_record(const std::string& line, std::size_t num_questions);

/// Append-only, single-producer log writer.
class SessionLogWriter {
 public:
  SessionLogWriter(const std::string& path, const SessionLogHeader& header);
  void write(const SessionLogRecord& record);
  void flush();
  void close();
  std::int64_t records_written() const { return count_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::int64_t count_ = 0;
};

struct SessionLog {
  SessionLogHeader header;
  std::vector<SessionLogRecord> records;
  // Set when the file ends mid-record; records holds every whole tick.
  std::optional<std::string> truncation;
};

SessionLog read_log(const std::string& path);

void write_log(const std::string& path, const SessionLog& log);

// ---------------------------------------------------------------------------
// Model files: "GVFS" | u32 version | u64 config hash | u32 question count,
// then per question: u32 id length | id bytes | u32 timescale | f64 gamma |
// u64 weight count | weights. All integers and floats little-endian.

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelQuestion {
  std::string id;
  int timescale = 10;
  double gamma = 0.9;
  std::vector<double> weights;
  bool operator==(const ModelQuestion&) const = default;
};

struct ModelFile {
  std::uint64_t config_hash = 0;
  std::vector<ModelQuestion> questions;
  bool operator==(const ModelFile&) const = default;
};

std::vector<unsigned char> serialize_model(const ModelFile& model);
ModelFile deserialize_model(const std::vector<unsigned char>& bytes);
void save_model(const std::string& path, const ModelFile& model);
/// Refuses a model whose hash differs from `expected_hash` unless
/// `allow_mismatch` is set.
ModelFile load_model(const std::string& path, std::optional<std::uint64_t> expected_hash = std::nullopt,
                     bool allow_mismatch = false);

}  // namespace gvfswitch

#endif
